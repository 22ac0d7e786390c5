"""Self-consistent field E = omega * g_eps * (rho - rho_b), its potential and derivatives.

Sources are signed point charges: particle weights (or grid nodes carrying
rho * cellvol) count positive, background quadrature masses negative. Every
quantity is a kernel sum over those charges, evaluated either directly in
target chunks or by FFT convolution of CIC-deposited node masses.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np
from scipy.signal import fftconvolve

from vpflow.errors import ConfigurationError
from vpflow.field.background import BackgroundSpec, background_sources
from vpflow.field.kernels import coulomb_kernel, green_function, kernel_matrix, mollifier
from vpflow.phase_state.deposition import cic_stencil
from vpflow.phase_state.ensemble import ParticleEnsemble, kinetic_energy
from vpflow.phase_state.grid import GridField, GridSpec
from vpflow.utils.summation import compensated_dot

logger = logging.getLogger(__name__)

METHODS = ('direct-sum', 'grid-convolution')

Density = Union[ParticleEnsemble, GridField]


@dataclass(frozen=True)
class KernelConfig:
    """How kernel sums are evaluated.

    `chunk_pairs` bounds the target x source block held in memory; it does
    not depend on `threads`, so results are identical for any thread count.
    """
    dim: int = 3
    softening: float = 0.05
    method: str = 'direct-sum'
    grid: Optional[GridSpec] = None
    threads: int = 1
    chunk_pairs: int = 400_000

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ConfigurationError(f"kernel dim must be 1, 2 or 3, got {self.dim}")
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown field method {self.method!r}; valid methods: {', '.join(METHODS)}")
        if self.softening < 0 or not np.isfinite(self.softening):
            raise ConfigurationError(f"softening must be finite and >= 0, got {self.softening}")
        if self.method == 'direct-sum' and self.softening == 0:
            raise ConfigurationError("direct-sum needs a positive softening")
        if self.method == 'grid-convolution':
            if self.grid is None:
                raise ConfigurationError("grid-convolution needs a grid")
            if self.grid.dim != self.dim:
                raise ConfigurationError(f"grid dim {self.grid.dim} differs from kernel dim {self.dim}")
        if self.threads < 1:
            raise ConfigurationError(f"threads must be >= 1, got {self.threads}")
        if self.chunk_pairs < 1:
            raise ConfigurationError("chunk_pairs must be positive")


# (kernel, einsum contraction, output shape builder)
_SUMS = {
    'field': (coulomb_kernel, 'tsk,s->tk', lambda n: (n,)),
    'potential': (green_function, 'ts,s->t', lambda n: ()),
    'gradient': (kernel_matrix, 'tsij,s->tij', lambda n: (n, n)),
    'mollified': (mollifier, 'ts,s->t', lambda n: ()),
    'current': (kernel_matrix, 'tsij,sj->ti', lambda n: (n,)),
}


def check_omega(omega: int) -> int:
    if omega not in (1, -1):
        raise ConfigurationError(f"omega must be +1 or -1, got {omega}")
    return int(omega)


def density_sources(rho: Density, dim: int) -> Tuple[np.ndarray, np.ndarray]:
    """Points and charges of a particle or grid density"""
    if isinstance(rho, ParticleEnsemble):
        if rho.dim != dim:
            raise ConfigurationError(f"ensemble of dim {rho.dim} with a dim {dim} kernel")
        return rho.positions, rho.weights
    if isinstance(rho, GridField):
        if rho.rank != 'scalar':
            raise ConfigurationError(f"density must be a scalar field, got {rho.rank}")
        if rho.grid.dim != dim:
            raise ConfigurationError(f"density grid of dim {rho.grid.dim} with a dim {dim} kernel")
        charges = rho.flat() * rho.grid.cell_volume
        keep = charges != 0.0
        return rho.grid.node_points()[keep], charges[keep]
    raise ConfigurationError(f"cannot use {type(rho).__name__} as a density")


def signed_sources(rho: Density, rho_b: BackgroundSpec, dim: int) -> Tuple[np.ndarray, np.ndarray]:
    """Charges of rho - rho_b: density positive, background quadrature negative"""
    points, charges = density_sources(rho, dim)
    return with_background(points, charges, rho_b, dim)


def with_background(points: np.ndarray, charges: np.ndarray, rho_b: BackgroundSpec,
                    dim: int) -> Tuple[np.ndarray, np.ndarray]:
    if rho_b.dim != dim:
        raise ConfigurationError(f"background of dim {rho_b.dim} with a dim {dim} kernel")
    bg_points, bg_mass = background_sources(rho_b)
    if bg_mass.size == 0:
        return points, charges
    return np.concatenate([points, bg_points]), np.concatenate([charges, -bg_mass])


def _direct_sum(kind: str, targets: np.ndarray, points: np.ndarray, values: np.ndarray,
                cfg: KernelConfig) -> np.ndarray:
    kernel, expr, shape = _SUMS[kind]
    n = targets.shape[0]
    out = np.zeros((n,) + shape(cfg.dim))
    if n == 0 or points.shape[0] == 0:
        return out
    rows = max(1, cfg.chunk_pairs // points.shape[0])
    bounds = [(lo, min(lo + rows, n)) for lo in range(0, n, rows)]

    def work(bound):
        lo, hi = bound
        d = targets[lo:hi, None, :] - points[None, :, :]
        out[lo:hi] = np.einsum(expr, kernel(d, cfg.dim, cfg.softening), values)

    if cfg.threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            list(pool.map(work, bounds))
    else:
        for bound in bounds:
            work(bound)
    return out


def _offset_grid(grid: GridSpec) -> GridSpec:
    """Node offsets -(n-1)h .. (n-1)h of a grid, the support of its convolution kernel"""
    h = grid.spacing
    cells = np.asarray(grid.cells)
    return GridSpec(grid.dim, tuple(-cells * h), tuple(2.0 * cells * h), tuple(2 * cells))


def _node_masses(points: np.ndarray, values: np.ndarray, grid: GridSpec):
    """CIC-deposit charges onto nodes; returns (node masses, outside mask)"""
    inside, corners = cic_stencil(points, grid, 'cic')
    inner = values[inside]
    flat_values = inner.reshape(inner.shape[0], -1)
    masses = np.zeros((grid.node_count, flat_values.shape[1]))
    for idx, shape_weight in corners:
        for c in range(flat_values.shape[1]):
            masses[:, c] += np.bincount(idx, weights=flat_values[:, c] * shape_weight,
                                        minlength=grid.node_count)
    return masses.reshape(grid.node_shape + values.shape[1:]), ~inside


def _convolve(kernel_values: np.ndarray, masses: np.ndarray, grid: GridSpec) -> np.ndarray:
    d = grid.dim
    kshape = kernel_values.shape[d:]
    flat = kernel_values.reshape(kernel_values.shape[:d] + (-1,))
    out = [fftconvolve(masses, flat[..., c], mode='same') for c in range(flat.shape[-1])]
    return np.stack(out, axis=-1).reshape(grid.node_shape + kshape)


def _grid_nodes(kind: str, points: np.ndarray, values: np.ndarray, cfg: KernelConfig) -> np.ndarray:
    """Kernel sum at every node of cfg.grid by FFT convolution"""
    grid = cfg.grid
    kernel, _, _ = _SUMS[kind]
    offsets = _offset_grid(grid).node_coordinates()
    sampled = kernel(offsets, cfg.dim, cfg.softening)
    masses, outside = _node_masses(points, values, grid)
    if kind == 'current':
        nodes = sum(_convolve(sampled[..., :, j], masses[..., j], grid) for j in range(cfg.dim))
    else:
        nodes = _convolve(sampled, masses, grid)
    if outside.any():
        logger.debug("grid convolution: %d sources outside the grid, summed directly", outside.sum())
        extra = _direct_sum(kind, grid.node_points(), points[outside], values[outside], cfg)
        nodes = nodes + extra.reshape(nodes.shape)
    return nodes


def _gather(nodes: np.ndarray, grid: GridSpec, targets: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """CIC interpolation of node values at the targets inside the grid"""
    inside, corners = cic_stencil(targets, grid, 'cic')
    flat = nodes.reshape((grid.node_count,) + nodes.shape[grid.dim:])
    out = np.zeros((int(inside.sum()),) + flat.shape[1:])
    for idx, shape_weight in corners:
        out += flat[idx] * shape_weight.reshape((-1,) + (1,) * (flat.ndim - 1))
    return out, inside


def kernel_sum(kind: str, points: np.ndarray, values: np.ndarray, cfg: KernelConfig,
               targets: np.ndarray) -> np.ndarray:
    """Sum over sources of kernel(target - source) contracted with the source values"""
    if cfg.method == 'direct-sum':
        return _direct_sum(kind, targets, points, values, cfg)
    grid = cfg.grid
    nodes = _grid_nodes(kind, points, values, cfg)
    out = np.zeros((targets.shape[0],) + nodes.shape[grid.dim:])
    gathered, inside = _gather(nodes, grid, targets)
    out[inside] = gathered
    if not inside.all():
        out[~inside] = _direct_sum(kind, targets[~inside], points, values, cfg)
    return out


def _resolve_targets(rho, cfg: KernelConfig, targets) -> Tuple[np.ndarray, Optional[GridSpec]]:
    if targets is not None:
        pts = np.atleast_2d(np.asarray(targets, dtype=float))
        if pts.shape[1] != cfg.dim:
            raise ConfigurationError(f"targets of dim {pts.shape[1]} with a dim {cfg.dim} kernel")
        return pts, None
    grid = cfg.grid
    if grid is None and isinstance(rho, GridField):
        grid = rho.grid
    if grid is None:
        raise ConfigurationError("a field on a grid needs cfg.grid or a grid density")
    return grid.node_points(), grid


def _wrap(values: np.ndarray, grid: Optional[GridSpec], rank: str):
    if grid is None:
        return values
    return GridField(grid, values.reshape(grid.node_shape + values.shape[1:]), rank)


def _evaluate(kind: str, rho, rho_b: BackgroundSpec, scale: float, cfg: KernelConfig, targets, rank: str):
    pts, grid = _resolve_targets(rho, cfg, targets)
    if rho_b.is_comoving:
        _, _, shape = _SUMS[kind]
        return _wrap(np.zeros((pts.shape[0],) + shape(cfg.dim)), grid, rank)
    points, charges = signed_sources(rho, rho_b, cfg.dim)
    return _wrap(scale * kernel_sum(kind, points, charges, cfg, pts), grid, rank)


def solve_field(rho: Density, rho_b: BackgroundSpec, omega: int, cfg: KernelConfig,
                targets: Optional[np.ndarray] = None):
    """E(x) = omega * sum_sources q (x - y) / (|S^{N-1}| (|x - y|^2 + eps^2)^{N/2}).

    Returns a vector GridField on cfg.grid (or the density's grid), or an
    (n, N) array when targets are given.
    """
    omega = check_omega(omega)
    return _evaluate('field', rho, rho_b, float(omega), cfg, targets, 'vector')


def particle_field(positions: np.ndarray, weights: np.ndarray, rho_b: BackgroundSpec, omega: int,
                   cfg: KernelConfig, targets: np.ndarray) -> np.ndarray:
    """solve_field for raw particle arrays, the form the integrator calls every step"""
    if rho_b.is_comoving:
        return np.zeros((targets.shape[0], cfg.dim))
    points, charges = with_background(positions, weights, rho_b, cfg.dim)
    return float(omega) * kernel_sum('field', points, charges, cfg, targets)


def potential(rho: Density, rho_b: BackgroundSpec, omega: int, cfg: KernelConfig,
              targets: Optional[np.ndarray] = None):
    """U with -Laplace U = omega * eta_eps * (rho - rho_b) and E = -grad U.

    For N <= 2 the kernel grows at infinity; on a grid U is shifted so that
    its mean over the boundary nodes is 0.
    """
    omega = check_omega(omega)
    out = _evaluate('potential', rho, rho_b, float(omega), cfg, targets, 'scalar')
    if isinstance(out, GridField) and cfg.dim <= 2:
        values = out.values
        interior = tuple(slice(1, -1) for _ in range(cfg.dim))
        mask = np.ones(values.shape, dtype=bool)
        mask[interior] = False
        out = GridField(out.grid, values - values[mask].mean(), 'scalar')
    return out


def field_gradient(rho: Density, rho_b: BackgroundSpec, cfg: KernelConfig, omega: int = 1,
                   targets: Optional[np.ndarray] = None):
    """D_x E = -omega * sum q K_eps(x - y); its trace is omega * eta_eps * (rho - rho_b).

    D_x E carries the sign of E, so `omega` is the same sign solve_field
    takes; it defaults to +1, the repulsive case.
    """
    omega = check_omega(omega)
    return _evaluate('gradient', rho, rho_b, -float(omega), cfg, targets, 'matrix')


def mollified_density(rho: Density, rho_b: BackgroundSpec, cfg: KernelConfig,
                      targets: Optional[np.ndarray] = None):
    """eta_eps * (rho - rho_b) with the Plummer mollifier"""
    if cfg.softening <= 0:
        raise ConfigurationError("the mollified density needs a positive softening")
    return _evaluate('mollified', rho, rho_b, 1.0, cfg, targets, 'scalar')


def current_sources(current: Union[GridField, ParticleEnsemble], dim: int) -> Tuple[np.ndarray, np.ndarray]:
    """Points and momentum charges q v of a current"""
    if isinstance(current, ParticleEnsemble):
        if current.dim != dim:
            raise ConfigurationError(f"ensemble of dim {current.dim} with a dim {dim} kernel")
        return current.positions, current.weights[:, None] * current.velocities
    if isinstance(current, GridField):
        if current.rank != 'vector' or current.grid.dim != dim:
            raise ConfigurationError("current must be a vector field of the kernel's dimension")
        return current.grid.node_points(), current.flat() * current.grid.cell_volume
    raise ConfigurationError(f"cannot use {type(current).__name__} as a current")


def dt_field(current: Union[GridField, ParticleEnsemble], omega: int, cfg: KernelConfig,
             targets: Optional[np.ndarray] = None):
    """d/dt E = omega * sum K_eps(x - y) J(y): the gradient part of -omega J.

    Only the moving charges contribute; the background is static.
    """
    omega = check_omega(omega)
    pts, grid = _resolve_targets(current, cfg, targets)
    points, momenta = current_sources(current, cfg.dim)
    return _wrap(float(omega) * kernel_sum('current', points, momenta, cfg, pts), grid, 'vector')


def pair_potential_energy(ens: ParticleEnsemble, rho_b: BackgroundSpec, omega: int,
                          cfg: KernelConfig) -> float:
    """(omega / 2) sum_{a != b} q_a q_b G_eps(x_a - x_b) over particles and background nodes.

    The softened counterpart of (omega / 2) int |E|^2 that the integrator
    conserves together with the kinetic energy.
    """
    omega = check_omega(omega)
    if rho_b.is_comoving:
        return 0.0
    points, charges = signed_sources(ens, rho_b, cfg.dim)
    sums = kernel_sum('potential', points, charges, cfg, points)
    self_term = float(green_function(np.zeros((1, cfg.dim)), cfg.dim, cfg.softening)[0])
    per_source = sums - charges * self_term
    return 0.5 * omega * compensated_dot(charges, per_source)


def total_energy(ens: ParticleEnsemble, rho_b: BackgroundSpec, omega: int, cfg: KernelConfig) -> float:
    """Kinetic plus pair potential energy"""
    return kinetic_energy(ens) + pair_potential_energy(ens, rho_b, omega, cfg)
