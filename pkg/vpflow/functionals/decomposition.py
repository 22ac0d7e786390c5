"""Split of E / (1 + |x| + |v|) along {|v| <= |E(x)|} for N <= 2."""
import logging
from typing import NamedTuple, Sequence, Union

import numpy as np

from vpflow.errors import ConfigurationError, UnsupportedDimensionError
from vpflow.phase_state.grid import GridField
from vpflow.utils.summation import compensated_sum

logger = logging.getLogger(__name__)

# int_{|v| <= e} dv / (1 + |v|) <= BOUND_FACTOR[N] * e
BOUND_FACTOR = {1: 2.0, 2: 2.0 * np.pi}


class R1Norms(NamedTuple):
    l1: float
    linf: float
    bound: float
    slack: float
    velocity_covered: bool


def r1_decomposition_norms(E: GridField, velocity_extent: Union[float, Sequence[float]],
                           velocity_cells: int = 48, chunk: int = 512) -> R1Norms:
    """(||E1||_L1(x, v), ||E2||_Linf) with E1 = E/(1+|x|+|v|) on {|v| <= |E|}, E2 the rest.

    x runs over the nodes of E's grid, v over a midpoint grid on
    [-V, V]^N. `bound` is BOUND_FACTOR[N] * ||E||_{L2}^2, which dominates
    the L1 part; `velocity_covered` is False when |E| exceeds V somewhere.
    """
    dim = E.grid.dim
    if dim == 3:
        raise UnsupportedDimensionError("the R1 split of the field is not available in dimension 3")
    if E.rank != 'vector':
        raise ConfigurationError(f"R1 split needs a vector field, got {E.rank}")
    extent = np.broadcast_to(np.asarray(velocity_extent, dtype=float), (dim,))
    if np.any(extent <= 0) or velocity_cells < 1:
        raise ConfigurationError("velocity box needs positive extent and cells")
    dv = 2.0 * extent / velocity_cells
    axes = [-extent[k] + dv[k] * (np.arange(velocity_cells) + 0.5) for k in range(dim)]
    speeds = np.linalg.norm(np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1).reshape(-1, dim), axis=1)
    cellvol_v = float(np.prod(dv))

    strength = E.magnitude().ravel()
    radius = np.linalg.norm(E.grid.node_points(), axis=1)
    covered = bool(strength.max(initial=0.0) <= extent.min())
    if not covered:
        logger.warning("R1 split: |E| up to %.3g exceeds the velocity box %.3g", strength.max(), extent.min())

    l1_parts, linf = [], 0.0
    for lo in range(0, strength.size, chunk):
        e = strength[lo:lo + chunk, None]
        ratio = e / (1.0 + radius[lo:lo + chunk, None] + speeds[None, :])
        inner = speeds[None, :] <= e
        l1_parts.append(compensated_sum(np.where(inner, ratio, 0.0).ravel()))
        outer = np.where(inner, 0.0, ratio)
        if outer.size:
            linf = max(linf, float(outer.max()))
    l1 = compensated_sum(np.asarray(l1_parts)) * E.grid.cell_volume * cellvol_v
    bound = BOUND_FACTOR[dim] * compensated_sum(strength ** 2) * E.grid.cell_volume
    return R1Norms(l1, linf, float(bound), float(bound - l1), covered)
