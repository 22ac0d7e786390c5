"""YAML manifests and the plain-dict form of kernel and background settings."""
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import yaml

from vpflow.errors import ConfigurationError
from vpflow.field.background import BackgroundSpec
from vpflow.field.solver import KernelConfig
from vpflow.phase_state.grid import GridSpec

PathLike = Union[str, Path]


def to_plain(value: Any) -> Any:
    """Recursively turn numpy scalars/arrays and tuples into YAML-safe builtins"""
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    return value


def write_manifest(path: PathLike, payload: Dict[str, Any]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as fh:
        yaml.safe_dump(to_plain(payload), fh, sort_keys=False)


def read_manifest(path: PathLike) -> Dict[str, Any]:
    try:
        with open(path, 'r', encoding='utf-8') as fh:
            data = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as e:
        raise ConfigurationError(f"cannot read manifest {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigurationError(f"manifest {path} is not a mapping")
    return data


def grid_to_dict(grid: Optional[GridSpec]) -> Optional[Dict[str, Any]]:
    if grid is None:
        return None
    return {'dim': grid.dim, 'origin': list(grid.origin), 'extent': list(grid.extent), 'cells': list(grid.cells)}


def grid_from_dict(data: Optional[Dict[str, Any]]) -> Optional[GridSpec]:
    if data is None:
        return None
    return GridSpec(int(data['dim']), tuple(data['origin']), tuple(data['extent']), tuple(data['cells']))


def kernel_to_dict(cfg: KernelConfig) -> Dict[str, Any]:
    return {
        'dim': cfg.dim,
        'softening': cfg.softening,
        'method': cfg.method,
        'grid': grid_to_dict(cfg.grid),
        'threads': cfg.threads,
        'chunk_pairs': cfg.chunk_pairs,
    }


def kernel_from_dict(data: Dict[str, Any]) -> KernelConfig:
    return KernelConfig(
        dim=int(data['dim']),
        softening=float(data['softening']),
        method=data['method'],
        grid=grid_from_dict(data.get('grid')),
        threads=int(data.get('threads', 1)),
        chunk_pairs=int(data.get('chunk_pairs', 400_000)),
    )


def background_to_dict(spec: BackgroundSpec) -> Dict[str, Any]:
    return {'kind': spec.kind, 'dim': spec.dim, 'mass': spec.mass, 'parameters': to_plain(spec.parameters)}


def background_from_dict(data: Dict[str, Any]) -> BackgroundSpec:
    return BackgroundSpec(data['kind'], int(data['dim']), float(data['mass']), dict(data.get('parameters') or {}))
