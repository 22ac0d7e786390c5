"""Flow-level sets and measures: sublevels G_lambda, superlevel curves, compressibility."""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from vpflow.errors import ConfigurationError, SeedingError
from vpflow.flow.history import FlowHistory
from vpflow.utils.summation import compensated_sum

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FunctionalParams:
    """Analysis knobs: ball radius r, sublevel threshold lam, deviation threshold gamma,
    log regularization delta and the exponent alpha of the beta functional."""
    r: float = 1.0
    lam: float = 4.0
    gamma: float = 0.1
    delta: float = 0.01
    alpha: float = 0.3

    def __post_init__(self):
        for name in ('r', 'lam', 'gamma', 'delta', 'alpha'):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ConfigurationError(f"functional parameter {name} must be positive, got {value}")
        if not self.alpha < 1.0 / 3.0:
            raise ConfigurationError(f"alpha must lie in (0, 1/3), got {self.alpha}")


def seed_view(history: FlowHistory, weighting: str = 'lattice') -> Tuple[np.ndarray, np.ndarray]:
    """(trajectories (samples, m, 2N), measure per seed) for lattice tracers or mass-weighted particles"""
    if weighting == 'lattice':
        if not history.has_tracers:
            raise SeedingError("lattice measures need a history advanced with lattice tracers")
        return history.trajectories('tracers'), history.seed_measure('tracers')
    if weighting == 'mass':
        return history.trajectories('particles'), history.seed_measure('particles')
    raise ConfigurationError(f"unknown weighting {weighting!r}; use 'lattice' or 'mass'")


def trajectory_bound(trajectories: np.ndarray) -> np.ndarray:
    """max over samples of |Z(s)| per seed"""
    return np.max(np.linalg.norm(trajectories, axis=2), axis=0)


def sublevel_mask(history: FlowHistory, lam: float, which: str = 'particles') -> np.ndarray:
    """True for seeds whose whole stored trajectory stays in the ball |z| <= lam"""
    if lam < 0:
        raise ConfigurationError(f"sublevel threshold must be >= 0, got {lam}")
    return trajectory_bound(history.trajectories(which)) <= lam


def ball_seeds(trajectories: np.ndarray, r: float) -> np.ndarray:
    """Seeds starting in the phase-space ball B_r"""
    if not r > 0:
        raise ConfigurationError(f"ball radius must be positive, got {r}")
    return np.linalg.norm(trajectories[0], axis=1) <= r


@dataclass
class SuperlevelCurve:
    r: float
    lambdas: np.ndarray
    measures: np.ndarray
    covered_measure: float
    weighting: str


def superlevel_measure(history: FlowHistory, r: float, lambdas: Sequence[float],
                       weighting: str = 'lattice') -> SuperlevelCurve:
    """g(r, lam): measure of initial points in B_r whose trajectory leaves B_lam, per lam"""
    trajectories, measure = seed_view(history, weighting)
    in_ball = ball_seeds(trajectories, r)
    if not in_ball.any():
        raise SeedingError(f"no seeds start in the ball of radius {r}")
    bound = trajectory_bound(trajectories[:, in_ball])
    weights = measure[in_ball]
    lambdas = np.asarray(lambdas, dtype=float)
    if np.any(lambdas < 0):
        raise ConfigurationError("sublevel thresholds must be >= 0")
    values = np.array([compensated_sum(weights[bound > lam]) for lam in lambdas])
    return SuperlevelCurve(float(r), lambdas, values, compensated_sum(weights), weighting)


@dataclass
class CompressibilityEstimate:
    """Ratios |Z(s)^-1(A)| / |A| per box and sample"""
    ratios: np.ndarray
    flagged: List[int]

    @property
    def max_ratio(self) -> float:
        valid = np.delete(self.ratios, self.flagged, axis=0)
        return float(valid.max()) if valid.size else float('nan')

    @property
    def min_ratio(self) -> float:
        valid = np.delete(self.ratios, self.flagged, axis=0)
        return float(valid.min()) if valid.size else float('nan')


def compressibility_estimate(history: FlowHistory, boxes: Sequence[Tuple[Sequence[float], Sequence[float]]],
                             samples: Optional[Sequence[int]] = None,
                             min_seeds: int = 8) -> CompressibilityEstimate:
    """Seeded volume mapped into each phase-space box A, divided by |A|.

    Boxes are (lower corner, upper corner) in R^2N. A box is flagged when it
    is not inside the seeded lattice or holds fewer than `min_seeds` seeds at
    the initial time.
    """
    trajectories, measure = seed_view(history, 'lattice')
    half_width = history.tracer_half_width
    samples = range(history.samples) if samples is None else samples
    ratios, flagged = [], []
    for i, (lo, hi) in enumerate(boxes):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if lo.shape != (2 * history.dim,) or hi.shape != lo.shape or np.any(hi <= lo):
            raise ConfigurationError(f"entry {i} is not a box in R^{2 * history.dim}")
        volume = float(np.prod(hi - lo))
        row = []
        for k in samples:
            inside = np.all((trajectories[k] >= lo) & (trajectories[k] <= hi), axis=1)
            row.append(compensated_sum(measure[inside]) / volume)
        initial = np.all((trajectories[0] >= lo) & (trajectories[0] <= hi), axis=1).sum()
        outside_lattice = half_width is not None and (np.any(lo < -half_width) or np.any(hi > half_width))
        if outside_lattice or initial < min_seeds:
            logger.warning("compressibility box %d is not covered by the seeding", i)
            flagged.append(i)
        ratios.append(row)
    return CompressibilityEstimate(np.asarray(ratios), flagged)
