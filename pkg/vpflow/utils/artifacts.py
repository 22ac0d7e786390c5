from typing import Any, Dict, Optional, Sequence, Union
import csv
import logging
from datetime import datetime
from pathlib import Path

from vpflow.utils.manifest import write_manifest

logger = logging.getLogger(__name__)

PARTIAL_MARKER = 'PARTIAL'


class ArtifactStore:
    """Manage output directories of runs and suites and the files written into them"""

    def __init__(self, root: Union[str, Path]):
        self.root = Path(root)
        self.runs: Dict[str, Dict[str, Any]] = {}

    def create_run(self, name: str, directory: Optional[Union[str, Path]] = None) -> str:
        """Create (or reuse) an output directory and start tracking it"""
        stamp = datetime.now().strftime('%Y%m%d-%H%M%S')
        run_id = f"{name}-{stamp}"
        path = Path(directory) if directory is not None else self.root / run_id
        path.mkdir(parents=True, exist_ok=True)
        # a reused directory must not keep a stale marker
        marker = path / PARTIAL_MARKER
        if marker.exists():
            marker.unlink()

        self.runs[run_id] = {
            "path": path,
            "name": name,
            "created": datetime.now(),
            "files": [],
            "status": "running",
        }
        logger.info("writing %s artifacts to %s", name, path)
        return run_id

    def path(self, run_id: str) -> Path:
        return self.runs[run_id]["path"]

    def record(self, run_id: str, *paths: Union[str, Path]) -> None:
        run = self.runs[run_id]
        for p in paths:
            run["files"].append(str(Path(p).relative_to(run["path"])) if Path(p).is_absolute() else str(p))

    def write_table(self, run_id: str, filename: str, units: str, header: Sequence[str],
                    rows: Sequence[Sequence[Any]]) -> Path:
        """CSV with a '#' comment line naming the units of every column"""
        target = self.path(run_id) / filename
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, 'w', newline='', encoding='utf-8') as fh:
            fh.write(f"# {units}\n")
            writer = csv.writer(fh)
            writer.writerow(list(header))
            for row in rows:
                writer.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])
        self.record(run_id, filename)
        return target

    def write_yaml(self, run_id: str, filename: str, payload: Dict[str, Any]) -> Path:
        target = self.path(run_id) / filename
        write_manifest(target, payload)
        self.record(run_id, filename)
        return target

    def finish_run(self, run_id: str, status: str, manifest: Dict[str, Any]) -> Path:
        """Write manifest.yaml; partial outputs also get the PARTIAL marker"""
        run = self.runs[run_id]
        run["status"] = status
        payload = dict(manifest)
        payload['status'] = status
        payload['files'] = sorted(set(run["files"]))
        target = run["path"] / 'manifest.yaml'
        write_manifest(target, payload)
        if status == 'partial':
            (run["path"] / PARTIAL_MARKER).write_text(
                f"{run['name']} stopped early; see manifest.yaml\n", encoding='utf-8'
            )
            logger.warning("%s artifacts in %s are partial", run["name"], run["path"])
        return target
