"""Norms, energies and identities evaluated on grid fields."""
import logging
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from vpflow.errors import ConfigurationError
from vpflow.field.background import BackgroundSpec, background_sources
from vpflow.field.solver import Density, KernelConfig, mollified_density, potential
from vpflow.phase_state.deposition import deposit_density
from vpflow.phase_state.ensemble import ParticleEnsemble
from vpflow.phase_state.grid import GridField, GridSpec, same_grid
from vpflow.utils.summation import compensated_sum

logger = logging.getLogger(__name__)


class HelmholtzResidual(NamedTuple):
    value: float
    degenerate: bool


def potential_energy(E: GridField) -> float:
    """1/2 sum over nodes of |E|^2 times the cell volume"""
    if E.rank != 'vector':
        raise ConfigurationError(f"potential energy needs a vector field, got {E.rank}")
    squared = np.sum(E.values ** 2, axis=-1)
    if not np.all(np.isfinite(squared)):
        raise ConfigurationError("field has non-finite values")
    return 0.5 * compensated_sum(squared) * E.grid.cell_volume


def _node_dot(a: GridField, b: GridField) -> np.ndarray:
    return np.sum(a.values * b.values, axis=-1)


def helmholtz_identity_residual(E: GridField, dtE: GridField, J: GridField, omega: int) -> HelmholtzResidual:
    """|int E . dtE + omega int E . J| / (int |E||J| + int |E||dtE|).

    An all-zero normalization returns (0, degenerate=True).
    """
    grid = same_grid(E, dtE, J)
    cellvol = grid.cell_volume
    lhs = compensated_sum(_node_dot(E, dtE)) * cellvol
    rhs = omega * compensated_sum(_node_dot(E, J)) * cellvol
    norm = (compensated_sum(E.magnitude() * J.magnitude())
            + compensated_sum(E.magnitude() * dtE.magnitude())) * cellvol
    if norm == 0.0:
        return HelmholtzResidual(0.0, True)
    return HelmholtzResidual(abs(lhs + rhs) / norm, False)


def weak_quasinorm(fld: GridField, p: float) -> float:
    """Discrete M^p quasinorm: max over node levels of level * |{|u| >= level}|^(1/p).

    Each node carries one cell volume of measure; levels run over the realized
    node magnitudes.
    """
    if not p > 1:
        raise ConfigurationError(f"weak quasinorm needs p > 1, got {p}")
    levels = np.sort(fld.magnitude().ravel())[::-1]
    measure = np.arange(1, levels.size + 1) * fld.grid.cell_volume
    return float(np.max(levels * measure ** (1.0 / p)))


def lp_norm(fld: GridField, p: float) -> float:
    """Grid L^p norm of |u|; p = inf gives the max"""
    mag = fld.magnitude()
    if np.isinf(p):
        return float(mag.max())
    if not p >= 1:
        raise ConfigurationError(f"L^p norm needs p >= 1, got {p}")
    return float((compensated_sum(mag.ravel() ** p) * fld.grid.cell_volume) ** (1.0 / p))


def laplacian(fld: GridField) -> np.ndarray:
    """Second-order central Laplacian at interior nodes"""
    if fld.rank != 'scalar':
        raise ConfigurationError("the Laplacian is taken of a scalar field")
    values = fld.values
    dim = fld.grid.dim
    h = fld.grid.spacing
    interior = tuple(slice(1, -1) for _ in range(dim))
    out = np.zeros(values[interior].shape)
    for k in range(dim):
        plus = list(interior)
        minus = list(interior)
        plus[k] = slice(2, None)
        minus[k] = slice(None, -2)
        out += (values[tuple(plus)] - 2.0 * values[interior] + values[tuple(minus)]) / h[k] ** 2
    return out


def poisson_residual(rho: Density, rho_b: BackgroundSpec, omega: int, cfg: KernelConfig) -> float:
    """max |-Laplace U - omega eta_eps*(rho - rho_b)| over interior nodes, relative to max |eta_eps*(rho - rho_b)|"""
    U = potential(rho, rho_b, omega, cfg)
    if min(U.grid.cells) < 2:
        raise ConfigurationError("the Poisson residual needs at least two cells per axis")
    source = mollified_density(rho, rho_b, cfg)
    interior = tuple(slice(1, -1) for _ in range(cfg.dim))
    target = omega * source.values[interior]
    scale = np.abs(target).max()
    if scale == 0.0:
        return 0.0
    residual = np.abs(-laplacian(U) - target).max() / scale
    logger.debug("poisson residual %.3e on %s cells, eps %.3g", residual, U.grid.cells, cfg.softening)
    return float(residual)


def translation_modulus(E: GridField, shifts: Sequence[Sequence[float]], p: float) -> Tuple[np.ndarray, np.ndarray]:
    """||E(. + h) - E||_{L^p} over the overlap of the grid and its shift, per h.

    Shifts are rounded to whole node offsets. Returns (|h| realized, values).
    """
    grid = E.grid
    spacing = grid.spacing
    lengths, values = [], []
    for h in shifts:
        h = np.broadcast_to(np.asarray(h, dtype=float), (grid.dim,))
        steps = np.rint(h / spacing).astype(int)
        if np.any(np.abs(steps) >= np.asarray(grid.node_shape)):
            raise ConfigurationError(f"shift {tuple(h)} leaves no overlap with the grid")
        moved = tuple(slice(max(s, 0), n + min(s, 0)) for s, n in zip(steps, grid.node_shape))
        base = tuple(slice(max(-s, 0), n + min(-s, 0)) for s, n in zip(steps, grid.node_shape))
        diff = E.values[moved] - E.values[base]
        mag = np.sqrt(np.sum(diff ** 2, axis=-1)) if E.rank == 'vector' else np.abs(diff)
        lengths.append(float(np.linalg.norm(steps * spacing)))
        values.append(float((compensated_sum(mag.ravel() ** p) * grid.cell_volume) ** (1.0 / p)))
    return np.asarray(lengths), np.asarray(values)


def source_l1_norm(ens: ParticleEnsemble, rho_b: BackgroundSpec, grid: GridSpec) -> float:
    """||rho - rho_b||_{L^1} from cloud-in-cell deposits of both on `grid`.

    Mass that either deposit leaves outside the grid box counts in full.
    """
    rho = deposit_density(ens, grid)
    values = rho.field.values.copy()
    outside = float(rho.outside)
    points, weights = background_sources(rho_b)
    if weights.size:
        background = deposit_density(ParticleEnsemble(points, np.zeros_like(points), weights), grid)
        values -= background.field.values
        outside += float(background.outside)
    return compensated_sum(np.abs(values).ravel()) * grid.cell_volume + outside


def hls_ratio(E: GridField, source_l1: float, p: Optional[float] = None) -> float:
    """|||E|||_{M^p} / ||rho - rho_b||_{L^1}, p = N / (N - 1) by default"""
    dim = E.grid.dim
    if p is None:
        if dim == 1:
            raise ConfigurationError("N = 1 has no weak exponent N / (N - 1); pass p")
        p = dim / (dim - 1.0)
    if not source_l1 > 0:
        raise ConfigurationError("source L1 norm must be positive")
    return weak_quasinorm(E, p) / source_l1
