"""Little-endian snapshot formats; byte layouts are documented in docs/FORMATS.md."""
import struct
from pathlib import Path
from typing import Union

import numpy as np

from vpflow.errors import ConfigurationError
from vpflow.phase_state.ensemble import ParticleEnsemble
from vpflow.phase_state.grid import GridField, GridSpec

ENSEMBLE_MAGIC = b'VLEN'
GRID_MAGIC = b'VLGF'
FORMAT_VERSION = 1

_ENSEMBLE_HEADER = struct.Struct('<4sIIQ')
_GRID_HEADER = struct.Struct('<4sIII')
_RANKS = {'scalar': 0, 'vector': 1, 'matrix': 2}
_RANK_NAMES = {v: k for k, v in _RANKS.items()}

PathLike = Union[str, Path]


def write_ensemble(path: PathLike, ens: ParticleEnsemble) -> None:
    """Write an ensemble snapshot: header, positions, velocities, weights"""
    with open(path, 'wb') as fh:
        fh.write(_ENSEMBLE_HEADER.pack(ENSEMBLE_MAGIC, FORMAT_VERSION, ens.dim, ens.count))
        for block in (ens.positions, ens.velocities, ens.weights):
            fh.write(np.ascontiguousarray(block, dtype='<f8').tobytes())


def read_ensemble(path: PathLike) -> ParticleEnsemble:
    data = Path(path).read_bytes()
    magic, version, dim, count = _ENSEMBLE_HEADER.unpack_from(data, 0)
    if magic != ENSEMBLE_MAGIC:
        raise ConfigurationError(f"{path}: not an ensemble snapshot (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise ConfigurationError(f"{path}: unsupported ensemble format version {version}")
    body = np.frombuffer(data, dtype='<f8', offset=_ENSEMBLE_HEADER.size)
    expected = count * (2 * dim + 1)
    if body.size != expected:
        raise ConfigurationError(f"{path}: expected {expected} floats, found {body.size}")
    n = count * dim
    return ParticleEnsemble(
        body[:n].reshape(count, dim),
        body[n:2 * n].reshape(count, dim),
        body[2 * n:].copy(),
    )


def write_grid_field(path: PathLike, fld: GridField) -> None:
    """Write a grid field: header, cells, origin, extent, node-major values"""
    grid = fld.grid
    with open(path, 'wb') as fh:
        fh.write(_GRID_HEADER.pack(GRID_MAGIC, FORMAT_VERSION, grid.dim, _RANKS[fld.rank]))
        fh.write(np.asarray(grid.cells, dtype='<u4').tobytes())
        fh.write(np.asarray(grid.origin, dtype='<f8').tobytes())
        fh.write(np.asarray(grid.extent, dtype='<f8').tobytes())
        fh.write(np.ascontiguousarray(fld.values, dtype='<f8').tobytes())


def read_grid_field(path: PathLike) -> GridField:
    data = Path(path).read_bytes()
    magic, version, dim, rank = _GRID_HEADER.unpack_from(data, 0)
    if magic != GRID_MAGIC:
        raise ConfigurationError(f"{path}: not a grid field (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise ConfigurationError(f"{path}: unsupported grid format version {version}")
    offset = _GRID_HEADER.size
    cells = np.frombuffer(data, dtype='<u4', count=dim, offset=offset)
    offset += 4 * dim
    origin = np.frombuffer(data, dtype='<f8', count=dim, offset=offset)
    offset += 8 * dim
    extent = np.frombuffer(data, dtype='<f8', count=dim, offset=offset)
    offset += 8 * dim
    grid = GridSpec(dim, tuple(origin), tuple(extent), tuple(int(c) for c in cells))
    rank_name = _RANK_NAMES[rank]
    extra = {'scalar': (), 'vector': (dim,), 'matrix': (dim, dim)}[rank_name]
    values = np.frombuffer(data, dtype='<f8', offset=offset).reshape(grid.node_shape + extra)
    return GridField(grid, values.copy(), rank_name)
