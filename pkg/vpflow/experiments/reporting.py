"""Verdicts, reports and the member pool shared by the experiment suites."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, TypeVar

import numpy as np

from vpflow.experiments.configuration import ExperimentConfig
from vpflow.experiments.simulation import run_manifest
from vpflow.functionals.stability import StabilityReport, write_stability_report
from vpflow.utils.artifacts import ArtifactStore
from vpflow.utils.manifest import to_plain

logger = logging.getLogger(__name__)

T = TypeVar('T')


@dataclass
class Verdict:
    """One acceptance rule: the metric it reads, the threshold and the outcome"""
    name: str
    metric: str
    threshold: Any
    value: Any
    passed: bool
    detail: str = ''

    def to_dict(self) -> Dict[str, Any]:
        return to_plain({
            'name': self.name, 'metric': self.metric, 'threshold': self.threshold,
            'value': self.value, 'passed': bool(self.passed), 'detail': self.detail,
        })


@dataclass
class ExperimentReport:
    suite: str
    sequence: List[float]
    seeds: List[int]
    # metric name -> (seeds, members) array
    metrics: Dict[str, np.ndarray] = field(default_factory=dict)
    verdicts: List[Verdict] = field(default_factory=list)
    extras: Dict[str, Any] = field(default_factory=dict)
    # "seed=<s>/member=<p>" -> report of that member against the reference flow
    stability: Dict[str, StabilityReport] = field(default_factory=dict)
    status: str = 'complete'

    @property
    def passed(self) -> bool:
        return self.status == 'complete' and all(v.passed for v in self.verdicts)

    def median(self, metric: str) -> np.ndarray:
        return np.median(self.metrics[metric], axis=0)

    def add_metric(self, name: str, per_seed: Sequence[Sequence[float]]) -> np.ndarray:
        values = np.asarray(per_seed, dtype=float)
        if values.shape != (len(self.seeds), len(self.sequence)):
            raise ValueError(f"metric {name} has shape {values.shape}, expected "
                             f"({len(self.seeds)}, {len(self.sequence)})")
        self.metrics[name] = values
        return self.median(name)

    def add_verdict(self, verdict: Verdict) -> Verdict:
        self.verdicts.append(verdict)
        level = logging.INFO if verdict.passed else logging.WARNING
        logger.log(level, "%s: %s = %s against %s -> %s", self.suite, verdict.metric, verdict.value,
                   verdict.threshold, 'pass' if verdict.passed else 'FAIL')
        return verdict

    def to_dict(self) -> Dict[str, Any]:
        return to_plain({
            'suite': self.suite,
            'status': self.status,
            'passed': self.passed,
            'sequence': self.sequence,
            'seeds': self.seeds,
            'verdicts': [v.to_dict() for v in self.verdicts],
            'medians': {name: self.median(name) for name in self.metrics},
            **self.extras,
        })


def nonincreasing(values: Sequence[float], rtol: float = 1e-9) -> bool:
    """values[i + 1] <= values[i] up to a relative slack"""
    values = np.asarray(values, dtype=float)
    slack = rtol * max(float(np.abs(values).max(initial=0.0)), 1e-300)
    return bool(np.all(np.diff(values) <= slack))


def constant(values: Sequence[float], rtol: float = 1e-9) -> bool:
    values = np.asarray(values, dtype=float)
    slack = rtol * max(float(np.abs(values).max(initial=0.0)), 1e-300)
    return bool(np.all(np.abs(values - values[0]) <= slack))


def monotone_verdict(name: str, metric: str, values: Sequence[float], degenerate: bool = False) -> Verdict:
    """Medians decrease along the sequence, or stay constant for a degenerate sequence"""
    values = np.asarray(values, dtype=float)
    if degenerate:
        return Verdict(name, metric, 'constant across members', values.tolist(), constant(values),
                       'degenerate sequence')
    return Verdict(name, metric, 'nonincreasing along the sequence', values.tolist(), nonincreasing(values))


def run_members(jobs: Sequence[Callable[[], T]], threads: int) -> List[T]:
    """Run independent member jobs in a thread pool; results keep the job order"""
    if threads <= 1 or len(jobs) <= 1:
        return [job() for job in jobs]
    with ThreadPoolExecutor(max_workers=min(threads, len(jobs))) as pool:
        futures = [pool.submit(job) for job in jobs]
        return [f.result() for f in futures]


def write_report(report: ExperimentReport, config: ExperimentConfig, store: ArtifactStore,
                 run_id: str, units: Optional[Dict[str, str]] = None) -> Path:
    """verdicts.yaml, one CSV per metric with the raw per-seed values, stability/ per member"""
    store.write_yaml(run_id, 'verdicts.yaml', report.to_dict())
    units = units or {}
    for name, values in report.metrics.items():
        rows = [[seed] + [float(v) for v in values[i]] for i, seed in enumerate(report.seeds)]
        rows.append(['median'] + [float(v) for v in report.median(name)])
        store.write_table(
            run_id, f'{name}.csv',
            f"seed, then {name} [{units.get(name, 'dimensionless')}] per member",
            ['seed'] + [f'member={p:g}' for p in report.sequence], rows,
        )
    for key, stability in report.stability.items():
        write_stability_report(stability, store.path(run_id) / 'stability' / key)
    store.finish_run(run_id, report.status, {**run_manifest(config, report.seeds), 'suite': report.suite})
    return store.path(run_id)
