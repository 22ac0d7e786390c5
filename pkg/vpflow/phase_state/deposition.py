"""Particle-to-grid deposits of the velocity moments rho and J."""
import itertools
import logging
from dataclasses import dataclass
from typing import Literal, Union

import numpy as np

from vpflow.errors import ConfigurationError
from vpflow.phase_state.ensemble import ParticleEnsemble
from vpflow.phase_state.grid import GridField, GridSpec
from vpflow.utils.summation import compensated_column_sum, compensated_sum

logger = logging.getLogger(__name__)

Scheme = Literal['cic', 'ngp']


@dataclass
class DepositResult:
    """Deposited field plus whatever fell outside the grid box"""
    field: GridField
    outside: Union[float, np.ndarray]


def cic_stencil(points: np.ndarray, grid: GridSpec, scheme: Scheme):
    """Flat node indices and shape weights of every particle's stencil.

    Returns (inside mask, list of (flat index, weight) per stencil corner).
    """
    if points.shape[1] != grid.dim:
        raise ConfigurationError(f"particles of dim {points.shape[1]} on a grid of dim {grid.dim}")
    cells = np.asarray(grid.cells)
    u = (points - np.asarray(grid.origin)) / grid.spacing
    inside = np.all((u >= 0.0) & (u <= cells), axis=1)
    u = u[inside]
    strides = np.array([int(np.prod(grid.node_shape[k + 1:])) for k in range(grid.dim)])
    if scheme == 'ngp':
        nearest = np.rint(u).astype(np.int64)
        return inside, [(nearest @ strides, np.ones(u.shape[0]))]
    if scheme != 'cic':
        raise ConfigurationError(f"unknown deposit scheme {scheme!r}")
    base = np.minimum(np.floor(u).astype(np.int64), cells - 1)
    frac = u - base
    corners = []
    for offset in itertools.product((0, 1), repeat=grid.dim):
        off = np.asarray(offset)
        shape_weight = np.prod(np.where(off == 1, frac, 1.0 - frac), axis=1)
        corners.append(((base + off) @ strides, shape_weight))
    return inside, corners


def _scatter(grid: GridSpec, corners, values: np.ndarray) -> np.ndarray:
    out = np.zeros(grid.node_count)
    for flat, shape_weight in corners:
        out += np.bincount(flat, weights=values * shape_weight, minlength=grid.node_count)
    return out.reshape(grid.node_shape)


def deposit_density(ens: ParticleEnsemble, grid: GridSpec, scheme: Scheme = 'cic') -> DepositResult:
    """Cloud-in-cell density rho on the grid nodes.

    Node sum of rho * cellvol plus the reported outside mass equals the total
    weight.
    """
    inside, corners = cic_stencil(ens.positions, grid, scheme)
    rho = _scatter(grid, corners, ens.weights[inside]) / grid.cell_volume
    outside = compensated_sum(ens.weights[~inside])
    if outside > 0:
        logger.info("deposit: mass %.3e outside the grid box", outside)
    return DepositResult(GridField(grid, rho, 'scalar'), outside)


def deposit_current(ens: ParticleEnsemble, grid: GridSpec, scheme: Scheme = 'cic') -> DepositResult:
    """Cloud-in-cell current J = sum w v on the grid nodes, outside momentum reported"""
    inside, corners = cic_stencil(ens.positions, grid, scheme)
    w = ens.weights[inside]
    v = ens.velocities[inside]
    components = [_scatter(grid, corners, w * v[:, k]) for k in range(grid.dim)]
    current = np.stack(components, axis=-1) / grid.cell_volume
    outside_mask = ~inside
    if outside_mask.any():
        outside = compensated_column_sum(ens.weights[outside_mask, None] * ens.velocities[outside_mask])
    else:
        outside = np.zeros(grid.dim)
    return DepositResult(GridField(grid, current, 'vector'), outside)
