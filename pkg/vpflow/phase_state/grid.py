from dataclasses import dataclass, field
from typing import List, Literal, Tuple

import numpy as np

from vpflow.errors import ConfigurationError

Rank = Literal['scalar', 'vector', 'matrix']


@dataclass(frozen=True)
class GridSpec:
    """Uniform node grid on a box [origin, origin + extent] in R^N.

    Nodes sit at origin + i * spacing for i = 0..cells, so a grid with
    `cells` intervals per axis carries `cells + 1` nodes per axis.
    """
    dim: int
    origin: Tuple[float, ...]
    extent: Tuple[float, ...]
    cells: Tuple[int, ...]

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ConfigurationError(f"grid dim must be 1, 2 or 3, got {self.dim}")
        object.__setattr__(self, 'origin', tuple(float(o) for o in self.origin))
        object.__setattr__(self, 'extent', tuple(float(e) for e in self.extent))
        object.__setattr__(self, 'cells', tuple(int(c) for c in self.cells))
        for name in ('origin', 'extent', 'cells'):
            if len(getattr(self, name)) != self.dim:
                raise ConfigurationError(
                    f"grid {name} has {len(getattr(self, name))} entries for dim {self.dim}"
                )
        if any(e <= 0 for e in self.extent):
            raise ConfigurationError(f"grid extent must be positive, got {self.extent}")
        if any(int(c) < 1 for c in self.cells):
            raise ConfigurationError(f"grid cells must be positive integers, got {self.cells}")

    @classmethod
    def cube(cls, dim: int, half_width: float, cells: int) -> 'GridSpec':
        """Centered cubic grid [-half_width, half_width]^dim"""
        return cls(dim, (-half_width,) * dim, (2.0 * half_width,) * dim, (cells,) * dim)

    @property
    def spacing(self) -> np.ndarray:
        return np.asarray(self.extent, dtype=float) / np.asarray(self.cells, dtype=float)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def node_shape(self) -> Tuple[int, ...]:
        return tuple(int(c) + 1 for c in self.cells)

    @property
    def node_count(self) -> int:
        return int(np.prod(self.node_shape))

    def axes(self) -> List[np.ndarray]:
        """Node coordinates along each axis"""
        return [
            self.origin[k] + self.spacing[k] * np.arange(self.node_shape[k])
            for k in range(self.dim)
        ]

    def node_coordinates(self) -> np.ndarray:
        """Array of shape (*node_shape, dim) holding every node position"""
        mesh = np.meshgrid(*self.axes(), indexing='ij')
        return np.stack(mesh, axis=-1)

    def node_points(self) -> np.ndarray:
        """Node positions flattened to (node_count, dim) in C order"""
        return self.node_coordinates().reshape(-1, self.dim)


@dataclass
class GridField:
    """Scalar, vector or matrix quantity sampled at the nodes of a grid"""
    grid: GridSpec
    values: np.ndarray
    rank: Rank = field(default='scalar')

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        shape = self.grid.node_shape
        n = self.grid.dim
        expected = {
            'scalar': shape,
            'vector': shape + (n,),
            'matrix': shape + (n, n),
        }
        if self.rank not in expected:
            raise ConfigurationError(f"unknown field rank {self.rank!r}")
        if self.values.shape != expected[self.rank]:
            raise ConfigurationError(
                f"{self.rank} field on nodes {shape} needs values of shape "
                f"{expected[self.rank]}, got {self.values.shape}"
            )

    @classmethod
    def zeros(cls, grid: GridSpec, rank: Rank = 'scalar') -> 'GridField':
        extra = {'scalar': (), 'vector': (grid.dim,), 'matrix': (grid.dim, grid.dim)}[rank]
        return cls(grid, np.zeros(grid.node_shape + extra), rank)

    def magnitude(self) -> np.ndarray:
        """Pointwise |u| on nodes: absolute value, Euclidean or Frobenius norm"""
        if self.rank == 'scalar':
            return np.abs(self.values)
        if self.rank == 'vector':
            return np.linalg.norm(self.values, axis=-1)
        return np.sqrt(np.sum(self.values ** 2, axis=(-2, -1)))

    def flat(self) -> np.ndarray:
        """Values as (node_count, ...) in C node order"""
        return self.values.reshape((self.grid.node_count,) + self.values.shape[self.grid.dim:])


def same_grid(*fields: GridField) -> GridSpec:
    """Return the common grid of the given fields or raise"""
    grid = fields[0].grid
    for other in fields[1:]:
        if other.grid != grid:
            raise ConfigurationError("fields live on different grids")
    return grid
