"""Static background density rho_b, realized as negative quadrature charges."""
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Dict, Tuple

import numpy as np

from vpflow.errors import ConfigurationError
from vpflow.phase_state.grid import GridSpec
from vpflow.utils.geometry import sphere_area

BACKGROUND_KINDS = ('zero', 'gaussian', 'power', 'table', 'comoving')
SOURCE_CACHE_SIZE = 32


@dataclass(frozen=True)
class BackgroundSpec:
    """rho_b >= 0.

    kinds: zero; gaussian (sigma, center); power (|x|^-exponent on |x| <= radius);
    table (explicit quadrature positions and weights); comoving (rho_b tracks
    rho, so the field vanishes identically, the free-streaming hook).
    """
    kind: str = 'zero'
    dim: int = 3
    mass: float = 0.0
    parameters: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        validate_background(self)

    @property
    def is_zero(self) -> bool:
        return self.kind == 'zero' or (self.kind != 'comoving' and self.mass == 0.0)

    @property
    def is_comoving(self) -> bool:
        return self.kind == 'comoving'

    def key(self) -> Tuple:
        items = tuple(sorted((k, repr(v)) for k, v in self.parameters.items()))
        return (self.kind, self.dim, float(self.mass), items)

    def __hash__(self) -> int:
        return hash(self.key())


def validate_background(spec: BackgroundSpec) -> None:
    """Kind, sign and integrability class checks"""
    if spec.kind not in BACKGROUND_KINDS:
        raise ConfigurationError(
            f"unknown background kind {spec.kind!r}; valid kinds: {', '.join(BACKGROUND_KINDS)}"
        )
    if spec.dim not in (1, 2, 3):
        raise ConfigurationError(f"background dim must be 1, 2 or 3, got {spec.dim}")
    if spec.mass < 0:
        raise ConfigurationError(f"background mass must be >= 0, got {spec.mass}")
    p = spec.parameters
    if spec.kind == 'gaussian' and not float(p.get('sigma', 1.0)) > 0:
        raise ConfigurationError("gaussian background needs sigma > 0")
    if spec.kind == 'power':
        exponent = float(p.get('exponent', 0.0))
        if not 0 <= exponent < spec.dim:
            raise ConfigurationError(
                f"power background |x|^-{exponent} is not integrable in dimension {spec.dim}"
            )
        # rho_b in L^p for some p > 3/2 needs exponent * 3/2 < 3
        if spec.dim == 3 and exponent >= 2.0:
            raise ConfigurationError(
                f"N=3 needs rho_b in L^p for some p > 3/2; |x|^-{exponent} is not"
            )
    if spec.kind == 'table':
        if 'positions' not in p or 'weights' not in p:
            raise ConfigurationError("table background needs 'positions' and 'weights'")
        weights = np.asarray(p['weights'], dtype=float)
        if np.any(weights < 0):
            raise ConfigurationError("background weights must be nonnegative")


def background_density(spec: BackgroundSpec, points: np.ndarray) -> np.ndarray:
    """Pointwise rho_b for the analytic kinds"""
    p = spec.parameters
    dim = spec.dim
    center = np.broadcast_to(np.asarray(p.get('center', 0.0), dtype=float), (dim,))
    r = np.linalg.norm(np.atleast_2d(points) - center, axis=1)
    if spec.kind == 'gaussian':
        sigma = float(p.get('sigma', 1.0))
        return spec.mass * np.exp(-0.5 * (r / sigma) ** 2) / (2.0 * np.pi * sigma ** 2) ** (dim / 2.0)
    if spec.kind == 'power':
        exponent = float(p.get('exponent', 0.0))
        radius = float(p.get('radius', 1.0))
        norm = sphere_area(dim) * radius ** (dim - exponent) / (dim - exponent)
        floor = float(p.get('floor', 1e-3)) * radius
        return np.where(r <= radius, spec.mass * np.maximum(r, floor) ** (-exponent) / norm, 0.0)
    return np.zeros(r.shape)


def background_grid(spec: BackgroundSpec) -> GridSpec:
    """Quadrature grid covering the support of an analytic background"""
    p = spec.parameters
    cells = int(p.get('cells', 16))
    if spec.kind == 'gaussian':
        half_width = float(p.get('half_width', 6.0 * float(p.get('sigma', 1.0))))
    else:
        half_width = float(p.get('half_width', float(p.get('radius', 1.0))))
    center = np.broadcast_to(np.asarray(p.get('center', 0.0), dtype=float), (spec.dim,))
    return GridSpec(spec.dim, tuple(center - half_width), (2.0 * half_width,) * spec.dim, (cells,) * spec.dim)


@lru_cache(maxsize=SOURCE_CACHE_SIZE)
def _build_sources(spec: BackgroundSpec) -> Tuple[np.ndarray, np.ndarray]:
    if spec.kind == 'table':
        points = np.atleast_2d(np.asarray(spec.parameters['positions'], dtype=float))
        weights = np.asarray(spec.parameters['weights'], dtype=float)
    else:
        grid = background_grid(spec)
        points = grid.node_points()
        weights = background_density(spec, points) * grid.cell_volume
        keep = weights > 0
        points, weights = points[keep], weights[keep]
    total = weights.sum()
    if total > 0:
        weights = spec.mass * weights / total
    points.setflags(write=False)
    weights.setflags(write=False)
    return points, weights


def background_sources(spec: BackgroundSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Quadrature points and nonnegative masses whose sum is spec.mass.

    The field solver subtracts these as negative charges.
    """
    if spec.is_zero or spec.is_comoving:
        return np.zeros((0, spec.dim)), np.zeros(0)
    return _build_sources(spec)
