"""Initial data f0: datum descriptions, random sampling, lattice and x1 quadratures, mollification."""
import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np
from scipy import stats

from vpflow.errors import ConfigurationError
from vpflow.phase_state.ensemble import ParticleEnsemble
from vpflow.utils.geometry import ball_volume, random_directions, sphere_area

logger = logging.getLogger(__name__)

DATUM_KINDS = ('gaussian', 'uniform-ball', 'two-stream', 'product-of-marginals', 'table')
POSITION_MARGINALS = ('gaussian', 'uniform-ball', 'uniform-box')
VELOCITY_MARGINALS = ('gaussian', 'uniform-ball', 'singular')

# gaussian x1 ranges are cut at this many standard deviations
GAUSSIAN_REACH = 6.0

DensityFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class InitialDatumSpec:
    """Description of f0 from which ensembles are sampled"""
    kind: str
    dim: int = 3
    mass: float = 1.0
    parameters: Dict[str, Any] = field(default_factory=dict)
    oscillation: Optional[int] = None

    def __post_init__(self):
        validate_datum_spec(self)

    def with_oscillation(self, wavenumber: Optional[int]) -> 'InitialDatumSpec':
        return InitialDatumSpec(self.kind, self.dim, self.mass, dict(self.parameters), wavenumber)


@dataclass(frozen=True)
class LatticeSeeding:
    """Zero-weight tracers on a uniform phase-space lattice.

    Each tracer carries the Lebesgue measure `cell_volume` of its lattice
    cell, so counting tracers measures sets of initial points.
    """
    positions: np.ndarray
    velocities: np.ndarray
    cell_volume: float
    half_width: float

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    @property
    def phase(self) -> np.ndarray:
        return np.concatenate([self.positions, self.velocities], axis=1)


def _positive(params: Dict[str, Any], key: str, default: float) -> float:
    value = float(params.get(key, default))
    if not value > 0:
        raise ConfigurationError(f"datum parameter {key!r} must be positive, got {value}")
    return value


def _marginal_params(params: Dict[str, Any], key: str) -> Dict[str, Any]:
    marginal = dict(params.get(key, {'kind': 'gaussian'}))
    marginal.setdefault('kind', 'gaussian')
    return marginal


def validate_datum_spec(spec: InitialDatumSpec) -> None:
    """Reject unknown kinds and out-of-range shape parameters"""
    if spec.kind not in DATUM_KINDS:
        raise ConfigurationError(f"unknown datum kind {spec.kind!r}; valid kinds: {', '.join(DATUM_KINDS)}")
    if spec.dim not in (1, 2, 3):
        raise ConfigurationError(f"datum dim must be 1, 2 or 3, got {spec.dim}")
    if not spec.mass > 0:
        raise ConfigurationError(f"datum mass must be positive, got {spec.mass}")
    if spec.oscillation is not None and spec.oscillation < 0:
        raise ConfigurationError(f"oscillation wavenumber must be >= 0, got {spec.oscillation}")
    p = spec.parameters
    if spec.kind in ('gaussian', 'two-stream'):
        _positive(p, 'sigma_x', 1.0)
        _positive(p, 'sigma_v', 1.0 if spec.kind == 'gaussian' else 0.3)
    elif spec.kind == 'uniform-ball':
        _positive(p, 'radius', 1.0)
        _positive(p, 'velocity_radius', 1.0)
    elif spec.kind == 'product-of-marginals':
        pos = _marginal_params(p, 'position')
        vel = _marginal_params(p, 'velocity')
        if pos['kind'] not in POSITION_MARGINALS:
            raise ConfigurationError(f"unknown position marginal {pos['kind']!r}")
        if vel['kind'] not in VELOCITY_MARGINALS:
            raise ConfigurationError(f"unknown velocity marginal {vel['kind']!r}")
        _positive(pos, 'scale', 1.0)
        _positive(vel, 'scale', 1.0)
        if vel['kind'] == 'singular':
            exponent = float(vel.get('exponent', 1.0))
            if not 0 <= exponent < spec.dim:
                raise ConfigurationError(
                    f"singular exponent must lie in [0, {spec.dim}) to stay integrable, got {exponent}"
                )
    elif spec.kind == 'table':
        if 'positions' not in p or 'velocities' not in p:
            raise ConfigurationError("table datum needs 'positions' and 'velocities'")
        positions = np.atleast_2d(np.asarray(p['positions'], dtype=float))
        if positions.shape[1] != spec.dim:
            raise ConfigurationError(f"table positions have dim {positions.shape[1]}, datum dim {spec.dim}")


# -- marginal samplers ---------------------------------------------------

def _sample_marginal(rng: np.random.Generator, marginal: Dict[str, Any], count: int, dim: int) -> np.ndarray:
    kind = marginal['kind']
    scale = float(marginal.get('scale', 1.0))
    center = np.broadcast_to(np.asarray(marginal.get('center', 0.0), dtype=float), (dim,))
    if kind == 'gaussian':
        return center + scale * rng.standard_normal((count, dim))
    if kind == 'uniform-ball':
        radii = scale * rng.random(count) ** (1.0 / dim)
        return center + radii[:, None] * random_directions(rng, count, dim)
    if kind == 'uniform-box':
        return center + scale * (2.0 * rng.random((count, dim)) - 1.0)
    if kind == 'singular':
        # radial density r^(dim-1-a) on [0, scale] inverts to scale * u^(1/(dim-a))
        exponent = float(marginal.get('exponent', 1.0))
        radii = scale * rng.random(count) ** (1.0 / (dim - exponent))
        return center + radii[:, None] * random_directions(rng, count, dim)
    raise ConfigurationError(f"unknown marginal kind {kind!r}")


def _marginal_density(marginal: Dict[str, Any], y: np.ndarray) -> np.ndarray:
    kind = marginal['kind']
    dim = y.shape[1]
    scale = float(marginal.get('scale', 1.0))
    center = np.broadcast_to(np.asarray(marginal.get('center', 0.0), dtype=float), (dim,))
    r = np.linalg.norm(y - center, axis=1)
    if kind == 'gaussian':
        return np.exp(-0.5 * (r / scale) ** 2) / (2.0 * np.pi * scale ** 2) ** (dim / 2.0)
    if kind == 'uniform-ball':
        return np.where(r <= scale, 1.0 / ball_volume(dim, scale), 0.0)
    if kind == 'uniform-box':
        inside = np.all(np.abs(y - center) <= scale, axis=1)
        return np.where(inside, 1.0 / (2.0 * scale) ** dim, 0.0)
    if kind == 'singular':
        exponent = float(marginal.get('exponent', 1.0))
        norm = sphere_area(dim) * scale ** (dim - exponent) / (dim - exponent)
        safe = np.maximum(r, 1e-12 * scale)
        return np.where(r <= scale, safe ** (-exponent) / norm, 0.0)
    raise ConfigurationError(f"unknown marginal kind {kind!r}")


def _marginals(spec: InitialDatumSpec) -> Tuple[Dict[str, Any], Dict[str, Any]]:
    """Position and velocity marginals equivalent to the datum kind"""
    p = spec.parameters
    if spec.kind == 'gaussian':
        return (
            {'kind': 'gaussian', 'scale': p.get('sigma_x', 1.0), 'center': p.get('center', 0.0)},
            {'kind': 'gaussian', 'scale': p.get('sigma_v', 1.0), 'center': p.get('drift', 0.0)},
        )
    if spec.kind == 'uniform-ball':
        return (
            {'kind': 'uniform-ball', 'scale': p.get('radius', 1.0), 'center': p.get('center', 0.0)},
            {'kind': 'uniform-ball', 'scale': p.get('velocity_radius', 1.0)},
        )
    if spec.kind == 'product-of-marginals':
        return _marginal_params(p, 'position'), _marginal_params(p, 'velocity')
    raise ConfigurationError(f"datum kind {spec.kind!r} has no product form")


def _two_stream_velocity(spec: InitialDatumSpec) -> Tuple[float, float]:
    return float(spec.parameters.get('drift', 1.0)), float(spec.parameters.get('sigma_v', 0.3))


def _oscillation_factor(spec: InitialDatumSpec, positions: np.ndarray) -> np.ndarray:
    if not spec.oscillation:
        return np.ones(positions.shape[0])
    return 1.0 + np.sin(spec.oscillation * positions[:, 0])


def _normalized(weights: np.ndarray, mass: float) -> np.ndarray:
    total = weights.sum()
    if not total > 0:
        raise ConfigurationError("datum carries no mass on the sampled points")
    return mass * weights / total


def sample_ensemble(spec: InitialDatumSpec, count: int, seed: int) -> ParticleEnsemble:
    """Draw `count` particles from f0; weights sum to spec.mass"""
    if count < 1:
        raise ConfigurationError(f"count must be >= 1, got {count}")
    rng = np.random.default_rng(seed)
    dim = spec.dim
    if spec.kind == 'table':
        positions = np.atleast_2d(np.asarray(spec.parameters['positions'], dtype=float))
        velocities = np.atleast_2d(np.asarray(spec.parameters['velocities'], dtype=float))
        base = np.asarray(spec.parameters.get('weights', np.ones(positions.shape[0])), dtype=float)
    elif spec.kind == 'two-stream':
        pos = {'kind': 'gaussian', 'scale': spec.parameters.get('sigma_x', 1.0)}
        positions = _sample_marginal(rng, pos, count, dim)
        drift, sigma_v = _two_stream_velocity(spec)
        signs = np.where(rng.random(count) < 0.5, -1.0, 1.0)
        velocities = sigma_v * rng.standard_normal((count, dim))
        velocities[:, 0] += signs * drift
        base = np.ones(count)
    else:
        pos, vel = _marginals(spec)
        positions = _sample_marginal(rng, pos, count, dim)
        velocities = _sample_marginal(rng, vel, count, dim)
        base = np.ones(count)
    weights = _normalized(base * _oscillation_factor(spec, positions), spec.mass)
    return ParticleEnsemble(positions, velocities, weights)


def datum_density(spec: InitialDatumSpec) -> DensityFn:
    """Evaluator (x, v) -> f0(x, v) for the analytic datum kinds"""
    if spec.kind == 'table':
        raise ConfigurationError("table data have no pointwise density")

    if spec.kind == 'two-stream':
        pos = {'kind': 'gaussian', 'scale': spec.parameters.get('sigma_x', 1.0)}
        drift, sigma_v = _two_stream_velocity(spec)
        shift = np.zeros(spec.dim)
        shift[0] = drift

        def velocity_density(v):
            g = {'kind': 'gaussian', 'scale': sigma_v}
            return 0.5 * (_marginal_density(g, v - shift) + _marginal_density(g, v + shift))
    else:
        pos, vel = _marginals(spec)

        def velocity_density(v):
            return _marginal_density(vel, v)

    def density(x: np.ndarray, v: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        v = np.atleast_2d(v)
        values = spec.mass * _marginal_density(pos, x) * velocity_density(v)
        return values * _oscillation_factor(spec, x)

    return density


def lattice_seeding(dim: int, half_width: float, points_per_axis: int,
                    seed: Optional[int] = None) -> LatticeSeeding:
    """Tracers at the cell centers of a uniform lattice on [-a, a]^(2N).

    With a seed the whole lattice is shifted by one common random offset
    inside a cell, so repeated seeds give independent but equally fine
    lattices.
    """
    if half_width <= 0 or points_per_axis < 1:
        raise ConfigurationError("lattice needs positive half width and points per axis")
    h = 2.0 * half_width / points_per_axis
    if seed is None:
        offset = np.full(2 * dim, 0.5)
    else:
        offset = np.random.default_rng(seed).random(2 * dim)
    axes = [-half_width + (np.arange(points_per_axis) + offset[k]) * h for k in range(2 * dim)]
    mesh = np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1).reshape(-1, 2 * dim)
    return LatticeSeeding(
        positions=mesh[:, :dim].copy(),
        velocities=mesh[:, dim:].copy(),
        cell_volume=h ** (2 * dim),
        half_width=half_width,
    )


def lattice_ensemble(spec: InitialDatumSpec, half_width: float, points_per_axis: int,
                     seed: Optional[int] = None) -> ParticleEnsemble:
    """Quadrature realization of f0: lattice points weighted by f0 * cell volume.

    Points where the unmodulated datum vanishes are dropped, so every
    oscillated variant of a datum lives on the same points.
    """
    lattice = lattice_seeding(spec.dim, half_width, points_per_axis, seed)
    base = datum_density(spec.with_oscillation(None))(lattice.positions, lattice.velocities)
    keep = base > 0
    positions = lattice.positions[keep]
    velocities = lattice.velocities[keep]
    values = datum_density(spec)(positions, velocities) * lattice.cell_volume
    logger.debug("lattice ensemble: %d of %d points carry mass", keep.sum(), lattice.count)
    return ParticleEnsemble(positions, velocities, _normalized(values, spec.mass))


def _x1_range(spec: InitialDatumSpec) -> Tuple[float, float]:
    if spec.kind == 'two-stream':
        pos = {'kind': 'gaussian', 'scale': spec.parameters.get('sigma_x', 1.0)}
    else:
        pos, _ = _marginals(spec)
    scale = float(pos.get('scale', 1.0))
    center = float(np.broadcast_to(np.asarray(pos.get('center', 0.0), dtype=float), (spec.dim,))[0])
    reach = GAUSSIAN_REACH * scale if pos['kind'] == 'gaussian' else scale
    return center - reach, center + reach


def x1_resolved_ensemble(spec: InitialDatumSpec, count: int, seed: int, points: int) -> ParticleEnsemble:
    """Random sample across (x2.., v), midpoint quadrature along x1.

    count // points particles are drawn from f0; each becomes a line of
    `points` copies at the midpoints of a uniform grid over the datum's x1
    range, weighted by f0 there, and every line keeps the mass of the
    particle it came from. Reweighting by 1 + sin(n x1) is resolved while
    n stays well below pi / spacing.
    """
    if spec.kind == 'table':
        raise ConfigurationError("table data cannot be resolved along x1")
    if points < 2:
        raise ConfigurationError(f"x1 resolution needs at least 2 points, got {points}")
    lines = count // points
    if lines < 1:
        raise ConfigurationError(f"count {count} is below the {points} x1 points of one line")
    drawn = sample_ensemble(spec.with_oscillation(None), lines, seed)
    lo, hi = _x1_range(spec)
    x1 = lo + (np.arange(points) + 0.5) * (hi - lo) / points
    positions = np.repeat(drawn.positions, points, axis=0)
    positions[:, 0] = np.tile(x1, lines)
    velocities = np.repeat(drawn.velocities, points, axis=0)

    base = datum_density(spec.with_oscillation(None))(positions, velocities).reshape(lines, points)
    values = datum_density(spec)(positions, velocities).reshape(lines, points)
    line_mass = base.sum(axis=1)
    # a chord shorter than the spacing can miss every midpoint
    live = line_mass > 0
    if not live.any():
        raise ConfigurationError("no x1 line carries mass; raise x1_points")
    weights = np.where(live[:, None], values / np.where(live, line_mass, 1.0)[:, None], 0.0).ravel()
    keep = base.ravel() > 0
    logger.debug("x1-resolved ensemble: %d lines of %d points, spacing %.4g",
                 live.sum(), points, (hi - lo) / points)
    return ParticleEnsemble(positions[keep], velocities[keep], _normalized(weights[keep], spec.mass))


def oscillated(ens: ParticleEnsemble, wavenumber: int) -> ParticleEnsemble:
    """Reweight an ensemble by 1 + sin(n x1), keeping its total mass"""
    if wavenumber == 0:
        return ens
    factor = 1.0 + np.sin(wavenumber * ens.positions[:, 0])
    return ens.with_weights(_normalized(ens.weights * factor, float(ens.weights.sum())))


def mollify_ensemble(ens: ParticleEnsemble, sigma: float, seed: int,
                     truncate: Optional[float] = None) -> ParticleEnsemble:
    """Sample of f0 * eta_sigma by displacing every particle with common gaussian noise.

    The noise depends only on the seed, so the members of a mollified
    sequence are coupled particle by particle and converge as sigma -> 0.
    With `truncate` the noise is a normal truncated to [-truncate, truncate]
    per coordinate, a compactly supported mollifier.
    """
    if sigma < 0:
        raise ConfigurationError(f"mollification width must be >= 0, got {sigma}")
    if truncate is not None and not truncate > 0:
        raise ConfigurationError(f"truncation must be positive, got {truncate}")
    if sigma == 0:
        return ens
    rng = np.random.default_rng(seed)
    shape = (ens.count, 2 * ens.dim)
    if truncate is None:
        noise = rng.standard_normal(shape)
    else:
        noise = stats.truncnorm.rvs(-truncate, truncate, size=shape, random_state=rng)
    return ens.with_state(ens.positions + sigma * noise[:, :ens.dim],
                          ens.velocities + sigma * noise[:, ens.dim:])
