"""The logarithmic stability functional Phi_delta and deviation measures of two flows.

Both flows must start from the same seeds (common seeding); sums run over
seeds in B_r, each carrying its lattice cell volume (or its mass).
"""
import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, NamedTuple, Sequence, Union

import numpy as np
from scipy import integrate

from vpflow.errors import ConfigurationError, SeedingError
from vpflow.flow.history import FlowHistory
from vpflow.flow.measures import FunctionalParams, ball_seeds, seed_view, trajectory_bound
from vpflow.phase_state.grid import GridSpec
from vpflow.utils.geometry import ball_volume
from vpflow.utils.manifest import to_plain, write_manifest
from vpflow.utils.summation import compensated_dot, compensated_sum

logger = logging.getLogger(__name__)


def _paired(histA: FlowHistory, histB: FlowHistory, weighting: str):
    trajA, measure = seed_view(histA, weighting)
    trajB, _ = seed_view(histB, weighting)
    if trajA.shape != trajB.shape:
        raise SeedingError(f"histories hold different seedings: {trajA.shape} vs {trajB.shape}")
    if not np.allclose(histA.times, histB.times, rtol=0.0, atol=1e-12 * max(1.0, histA.horizon)):
        raise SeedingError("histories have different sample times")
    if not np.array_equal(trajA[0], trajB[0]):
        raise SeedingError("histories do not start from the same seeds")
    return trajA, trajB, measure


class CoveredSet(NamedTuple):
    in_ball: np.ndarray
    covered: np.ndarray
    ball_measure: float
    excluded_measure: float


def covered_set(trajA: np.ndarray, trajB: np.ndarray, measure: np.ndarray,
                params: FunctionalParams) -> CoveredSet:
    """B_r intersected with both lambda sublevels, plus the measure it leaves out of B_r"""
    in_ball = ball_seeds(trajA, params.r)
    if not in_ball.any():
        raise SeedingError(f"no seeds start in the ball of radius {params.r}")
    both = (trajectory_bound(trajA) <= params.lam) & (trajectory_bound(trajB) <= params.lam)
    covered = in_ball & both
    ball = compensated_sum(measure[in_ball])
    return CoveredSet(in_ball, covered, ball, ball - compensated_sum(measure[covered]))


def phi_delta(histA: FlowHistory, histB: FlowHistory, params: FunctionalParams,
              weighting: str = 'lattice') -> np.ndarray:
    """Phi_delta(s) = sum over the covered set of measure * log(1 + |Z_A(s) - Z_B(s)| / delta), per sample"""
    trajA, trajB, measure = _paired(histA, histB, weighting)
    cover = covered_set(trajA, trajB, measure, params)
    weights = measure[cover.covered]
    gaps = np.linalg.norm(trajA[:, cover.covered] - trajB[:, cover.covered], axis=2)
    return np.array([compensated_dot(weights, np.log1p(gap / params.delta)) for gap in gaps])


def deviation_measure(histA: FlowHistory, histB: FlowHistory, gamma: float, r: float, s: float,
                      weighting: str = 'lattice') -> float:
    """Measure of seeds in B_r with |Z_A(s) - Z_B(s)| > gamma"""
    if not gamma > 0:
        raise ConfigurationError(f"gamma must be positive, got {gamma}")
    trajA, _, measure = _paired(histA, histB, weighting)
    in_ball = ball_seeds(trajA, r)
    if not in_ball.any():
        raise SeedingError(f"no seeds start in the ball of radius {r}")
    gap = np.linalg.norm(histA.state_at(s, _which(weighting)) - histB.state_at(s, _which(weighting)), axis=1)
    return compensated_sum(measure[in_ball & (gap > gamma)])


def _which(weighting: str) -> str:
    return 'tracers' if weighting == 'lattice' else 'particles'


class BridgeCheck(NamedTuple):
    deviation: float
    phi: float
    excluded: float
    bound: float
    holds: bool


def chebyshev_bridge(histA: FlowHistory, histB: FlowHistory, params: FunctionalParams, s: float,
                     weighting: str = 'lattice') -> BridgeCheck:
    """deviation(gamma, r, s) <= Phi_delta(s) / log(1 + gamma / delta) + |B_r minus both sublevels|"""
    trajA, trajB, measure = _paired(histA, histB, weighting)
    cover = covered_set(trajA, trajB, measure, params)
    which = _which(weighting)
    gap = np.linalg.norm(histA.state_at(s, which) - histB.state_at(s, which), axis=1)
    deviation = compensated_sum(measure[cover.in_ball & (gap > params.gamma)])
    phi = compensated_dot(measure[cover.covered], np.log1p(gap[cover.covered] / params.delta))
    bound = phi / np.log1p(params.gamma / params.delta) + cover.excluded_measure
    return BridgeCheck(deviation, phi, cover.excluded_measure, float(bound),
                       bool(deviation <= bound * (1.0 + 1e-12) + 1e-300))


def field_difference_norm(histA: FlowHistory, histB: FlowHistory, lam: float, cells: int = 12) -> float:
    """||b - b_bar||_{L1((0,T) x B_lam)} for b = (v, E(t, x)).

    Only the field component differs; the v-integral over the phase-space
    ball is the volume of the velocity ball of radius sqrt(lam^2 - |x|^2).
    Midpoint rule in x, trapezoid rule over the sample times.
    """
    if not lam > 0:
        raise ConfigurationError(f"lambda must be positive, got {lam}")
    if histA.dim != histB.dim or not np.allclose(histA.times, histB.times):
        raise SeedingError("field difference needs histories on the same sample times")
    dim = histA.dim
    grid = GridSpec.cube(dim, lam, cells)
    h = grid.spacing
    axes = [grid.origin[k] + h[k] * (np.arange(cells) + 0.5) for k in range(dim)]
    points = np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1).reshape(-1, dim)
    radius2 = lam ** 2 - np.sum(points ** 2, axis=1)
    keep = radius2 > 0
    points = points[keep]
    slab = np.array([ball_volume(dim, np.sqrt(r2)) for r2 in radius2[keep]]) * grid.cell_volume
    per_sample = []
    for k in range(histA.samples):
        diff = histA.field_at(k)(points) - histB.field_at(k)(points)
        per_sample.append(compensated_dot(slab, np.linalg.norm(diff, axis=1)))
    if histA.samples == 1:
        return 0.0
    return float(integrate.trapezoid(per_sample, histA.times))


@dataclass
class StabilityReport:
    """Phi_delta per sample, deviation measures per (gamma, s), field-difference norm, parameters"""
    times: np.ndarray
    phi: np.ndarray
    deviations: Dict[float, np.ndarray]
    excluded_measure: float
    ball_measure: float
    field_difference: float
    params: FunctionalParams
    weighting: str = 'lattice'
    bridges: Dict[float, list] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return to_plain({
            'params': {
                'r': self.params.r, 'lambda': self.params.lam, 'gamma': self.params.gamma,
                'delta': self.params.delta, 'alpha': self.params.alpha,
            },
            'weighting': self.weighting,
            'ball_measure': self.ball_measure,
            'excluded_measure': self.excluded_measure,
            'field_difference_norm': self.field_difference,
            'phi_delta_final': float(self.phi[-1]),
            'deviation_final': {str(g): float(d[-1]) for g, d in self.deviations.items()},
            'bridge_holds': all(all(b) for b in self.bridges.values()) if self.bridges else None,
        })


def stability_report(histA: FlowHistory, histB: FlowHistory, params: FunctionalParams,
                     gammas: Sequence[float] = (), weighting: str = 'lattice',
                     field_cells: int = 12) -> StabilityReport:
    trajA, trajB, measure = _paired(histA, histB, weighting)
    cover = covered_set(trajA, trajB, measure, params)
    gammas = list(gammas) or [params.gamma]
    deviations, bridges = {}, {}
    for gamma in gammas:
        deviations[gamma] = np.array([
            deviation_measure(histA, histB, gamma, params.r, s, weighting) for s in histA.times
        ])
        at_gamma = FunctionalParams(params.r, params.lam, gamma, params.delta, params.alpha)
        bridges[gamma] = [chebyshev_bridge(histA, histB, at_gamma, s, weighting).holds for s in histA.times]
    report = StabilityReport(
        times=histA.times.copy(),
        phi=phi_delta(histA, histB, params, weighting),
        deviations=deviations,
        excluded_measure=cover.excluded_measure,
        ball_measure=cover.ball_measure,
        field_difference=field_difference_norm(histA, histB, params.lam, field_cells),
        params=params,
        weighting=weighting,
        bridges=bridges,
    )
    logger.info("stability: final Phi_delta %.4g, field difference %.4g", report.phi[-1], report.field_difference)
    return report


def write_stability_report(report: StabilityReport, directory: Union[str, Path]) -> Path:
    """stability.yaml plus stability.csv (s, Phi_delta, deviation per gamma)"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_manifest(directory / 'stability.yaml', report.to_dict())
    gammas = list(report.deviations)
    with open(directory / 'stability.csv', 'w', newline='', encoding='utf-8') as fh:
        fh.write("# s [time], phi_delta [phase-space volume], deviation_gamma=<g> [phase-space volume]\n")
        writer = csv.writer(fh)
        writer.writerow(['s', 'phi_delta'] + [f'deviation_gamma={g:g}' for g in gammas])
        for k, s in enumerate(report.times):
            writer.writerow([repr(float(s)), repr(float(report.phi[k]))]
                            + [repr(float(report.deviations[g][k])) for g in gammas])
    return directory
