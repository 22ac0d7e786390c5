"""beta(y) = (1 + log(1 + y))^alpha and the superlevel bound built on it."""
import logging
from dataclasses import dataclass

import numpy as np

from vpflow.errors import ConfigurationError, SeedingError
from vpflow.flow.history import FlowHistory
from vpflow.flow.measures import SuperlevelCurve, ball_seeds, seed_view
from vpflow.utils.summation import compensated_dot

logger = logging.getLogger(__name__)


def check_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0 / 3.0:
        raise ConfigurationError(f"alpha must lie in (0, 1/3), got {alpha}")


def _log_term(y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("beta is defined for y >= 0")
    return 1.0 + np.log1p(y)


def beta(y, alpha: float):
    check_alpha(alpha)
    return _log_term(y) ** alpha


def beta_prime(y, alpha: float):
    """alpha (1 + log(1 + y))^(alpha - 1) / (1 + y)"""
    check_alpha(alpha)
    return alpha * _log_term(y) ** (alpha - 1.0) / (1.0 + np.asarray(y, dtype=float))


def beta_second(y, alpha: float):
    """alpha L^(alpha - 2) (alpha - 1 - L) / (1 + y)^2 with L = 1 + log(1 + y); always negative"""
    check_alpha(alpha)
    L = _log_term(y)
    return alpha * L ** (alpha - 2.0) * (alpha - 1.0 - L) / (1.0 + np.asarray(y, dtype=float)) ** 2


def beta_superlevel_functional(history: FlowHistory, r: float, alpha: float,
                               weighting: str = 'lattice') -> float:
    """Sum over seeds starting in B_r of cell volume * beta(max_s |V(s)|^2 / 2).

    Only defined for the repulsive case.
    """
    check_alpha(alpha)
    if history.omega != 1:
        raise ConfigurationError("the beta superlevel functional is defined for omega = +1 only")
    trajectories, measure = seed_view(history, weighting)
    in_ball = ball_seeds(trajectories, r)
    if not in_ball.any():
        raise SeedingError(f"no seeds start in the ball of radius {r}")
    velocities = trajectories[:, in_ball, history.dim:]
    peak = np.max(np.sum(velocities ** 2, axis=2), axis=0)
    return compensated_dot(measure[in_ball], beta(0.5 * peak, alpha))


@dataclass
class SuperlevelFit:
    """Superlevel curve against A / beta(lam_tilde^2 / 2), lam_tilde = (lam - r) / (1 + T).

    `A_fit` is the smallest A for which A / beta(lam^2 / 2) dominates the curve.
    """
    lambdas: np.ndarray
    measures: np.ndarray
    chain_bound: np.ndarray
    A: float
    A_fit: float
    alpha: float
    holds: bool
    worst_ratio: float

    def to_dict(self) -> dict:
        return {
            'A': self.A,
            'A_fit': self.A_fit,
            'alpha': self.alpha,
            'holds': self.holds,
            'worst_ratio': self.worst_ratio,
            'lambdas': self.lambdas.tolist(),
            'measures': self.measures.tolist(),
            'chain_bound': self.chain_bound.tolist(),
        }


def fit_superlevel_bound(curve: SuperlevelCurve, A: float, alpha: float, T: float) -> SuperlevelFit:
    """Check g(r, lam) <= A / beta(lam_tilde^2 / 2) on the curve's lambda grid.

    For lam <= r the bound is the covered measure of B_r itself.
    """
    check_alpha(alpha)
    if not A >= 0 or not T >= 0:
        raise ConfigurationError("superlevel fit needs A >= 0 and T >= 0")
    lambdas = curve.lambdas
    lam_tilde = np.maximum(lambdas - curve.r, 0.0) / (1.0 + T)
    chain = np.where(lambdas > curve.r, A / beta(0.5 * lam_tilde ** 2, alpha), curve.covered_measure)
    chain = np.minimum(chain, curve.covered_measure)
    with np.errstate(divide='ignore', invalid='ignore'):
        ratios = np.where(chain > 0, curve.measures / chain, np.where(curve.measures > 0, np.inf, 0.0))
    A_fit = float(np.max(curve.measures * beta(0.5 * lambdas ** 2, alpha))) if lambdas.size else 0.0
    worst = float(ratios.max()) if ratios.size else 0.0
    holds = bool(worst <= 1.0 + 1e-12)
    if not holds:
        logger.warning("superlevel chain bound violated, worst ratio %.4f", worst)
    return SuperlevelFit(lambdas, curve.measures, chain, float(A), A_fit, alpha, holds, worst)
