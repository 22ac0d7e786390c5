from dataclasses import dataclass
from typing import Optional

import numpy as np

from vpflow.errors import ConfigurationError
from vpflow.utils.summation import compensated_column_sum, compensated_dot, compensated_sum


def _frozen(array: np.ndarray) -> np.ndarray:
    out = np.array(array, dtype=np.float64, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ParticleEnsemble:
    """Weighted point cloud in phase space standing in for f(t, x, v).

    Every integral of f against a test function becomes a weighted sum over
    particles. Arrays are read-only; advancing an ensemble returns a new one
    sharing the same weights array.
    """
    positions: np.ndarray
    velocities: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        positions = np.atleast_2d(np.asarray(self.positions, dtype=np.float64))
        velocities = np.atleast_2d(np.asarray(self.velocities, dtype=np.float64))
        if positions.shape != velocities.shape:
            raise ConfigurationError(
                f"positions {positions.shape} and velocities {velocities.shape} differ"
            )
        if positions.shape[1] not in (1, 2, 3):
            raise ConfigurationError(f"spatial dimension must be 1, 2 or 3, got {positions.shape[1]}")
        weights = self.weights
        if not (isinstance(weights, np.ndarray) and not weights.flags.writeable):
            weights = _frozen(np.ravel(weights))
        if weights.shape != (positions.shape[0],):
            raise ConfigurationError(
                f"{weights.shape[0]} weights for {positions.shape[0]} particles"
            )
        if positions.shape[0] < 1:
            raise ConfigurationError("ensemble needs at least one particle")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise ConfigurationError("particle weights must be finite and nonnegative")
        object.__setattr__(self, 'positions', _frozen(positions))
        object.__setattr__(self, 'velocities', _frozen(velocities))
        object.__setattr__(self, 'weights', weights)

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    @property
    def phase(self) -> np.ndarray:
        """States z = (x, v) as an array of shape (count, 2N)"""
        return np.concatenate([self.positions, self.velocities], axis=1)

    def with_state(self, positions: np.ndarray, velocities: np.ndarray) -> 'ParticleEnsemble':
        """New ensemble at another phase-space state carrying the same weights"""
        return ParticleEnsemble(positions, velocities, self.weights)

    def with_weights(self, weights: np.ndarray) -> 'ParticleEnsemble':
        return ParticleEnsemble(self.positions, self.velocities, np.asarray(weights, dtype=float))


def total_mass(ens: ParticleEnsemble) -> float:
    """Sum of weights"""
    return compensated_sum(ens.weights)


def kinetic_energy(ens: ParticleEnsemble) -> float:
    """Sum of w |v|^2 / 2"""
    return compensated_dot(ens.weights, 0.5 * np.sum(ens.velocities ** 2, axis=1))


def momentum(ens: ParticleEnsemble) -> np.ndarray:
    """Sum of w v per axis"""
    return compensated_column_sum(ens.weights[:, None] * ens.velocities)


def second_moment(ens: ParticleEnsemble) -> float:
    """Sum of w (|x|^2 + |v|^2), finite for every admissible datum"""
    return compensated_dot(ens.weights, np.sum(ens.phase ** 2, axis=1))


def weight_l1_distance(a: ParticleEnsemble, b: ParticleEnsemble) -> float:
    """L1 distance of two data carried by the same points: sum |w_a - w_b|"""
    if a.count != b.count or not (
        np.array_equal(a.positions, b.positions) and np.array_equal(a.velocities, b.velocities)
    ):
        raise ConfigurationError("weight distance needs ensembles on identical points")
    return compensated_sum(np.abs(a.weights - b.weights))


def phase_space_l1_distance(a: ParticleEnsemble, b: ParticleEnsemble,
                            bins: int = 8, half_width: Optional[float] = None) -> float:
    """Discrete L1 distance of two ensembles binned on a common phase-space histogram"""
    if a.dim != b.dim:
        raise ConfigurationError("ensembles have different dimensions")
    if half_width is None:
        half_width = float(max(np.abs(a.phase).max(), np.abs(b.phase).max())) * (1.0 + 1e-9)
    edges = [np.linspace(-half_width, half_width, bins + 1)] * (2 * a.dim)
    hist_a, _ = np.histogramdd(a.phase, bins=edges, weights=a.weights)
    hist_b, _ = np.histogramdd(b.phase, bins=edges, weights=b.weights)
    return compensated_sum(np.abs(hist_a - hist_b))
