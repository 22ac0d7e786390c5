"""L^p modulus of continuity of the unsoftened kernel g(x) = x / |x|^N under translation.

||g(. + h) - g||_p^p splits at |x| = 2|h|: the outer shell integral is done by
adaptive radial quadrature with a Gauss-Legendre rule in angle, the inner
ball is replaced by the bound 2^p int_{|y| <= 3|h|} |y|^{(1-N)p} dy.
"""
from typing import NamedTuple, Sequence, Union

import numpy as np
from scipy import integrate, stats

from vpflow.errors import ConfigurationError
from vpflow.utils.geometry import sphere_area

Offset = Union[float, Sequence[float], np.ndarray]


class TranslationParts(NamedTuple):
    outer: float
    inner_bound: float


class SlopeFit(NamedTuple):
    slope: float
    intercept: float
    rvalue: float


def translation_exponent(p: float, dim: int) -> float:
    """alpha = 1 - N + N / p, positive on the admissible range of p"""
    return 1.0 - dim + dim / p


def check_exponent(p: float, dim: int) -> None:
    if dim not in (1, 2, 3):
        raise ConfigurationError(f"dimension must be 1, 2 or 3, got {dim}")
    upper = np.inf if dim == 1 else dim / (dim - 1.0)
    if not 1.0 < p < upper:
        raise ConfigurationError(f"p must lie in (1, {upper:g}) for N = {dim}, got {p}")


def _g(x: np.ndarray, dim: int) -> np.ndarray:
    r = np.linalg.norm(x, axis=-1)
    return x / r[..., None] ** dim


def _angular_rule(dim: int, nodes: int):
    """Unit directions and weights integrating functions of x . e1 over S^{N-1}"""
    if dim == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if dim == 2:
        t, w = np.polynomial.legendre.leggauss(nodes)
        phi = 0.5 * np.pi * (t + 1.0)
        directions = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        # half circle phi in (0, pi), mirrored about e1
        return directions, np.pi * w
    t, w = np.polynomial.legendre.leggauss(nodes)
    directions = np.stack([t, np.sqrt(1.0 - t * t), np.zeros_like(t)], axis=1)
    return directions, 2.0 * np.pi * w


def translation_parts(h: Offset, p: float, dim: int, angular_nodes: int = 64) -> TranslationParts:
    check_exponent(p, dim)
    length = float(np.linalg.norm(np.atleast_1d(np.asarray(h, dtype=float))))
    if length == 0.0:
        return TranslationParts(0.0, 0.0)
    shift = np.zeros(dim)
    shift[0] = length
    directions, weights = _angular_rule(dim, angular_nodes)

    def shell(r: float) -> float:
        x = r * directions
        diff = np.linalg.norm(_g(x + shift, dim) - _g(x, dim), axis=1)
        return r ** (dim - 1) * float(np.dot(weights, diff ** p))

    if dim == 1:
        outer = 0.0  # sign(x + h) = sign(x) for |x| > |h|
    else:
        outer, _ = integrate.quad(shell, 2.0 * length, np.inf, epsrel=1e-10, limit=200)
    power = dim - (dim - 1.0) * p
    inner = 2.0 ** p * sphere_area(dim) * (3.0 * length) ** power / power
    return TranslationParts(float(outer), float(inner))


def kernel_translation_error(h: Offset, p: float, dim: int, angular_nodes: int = 64) -> float:
    """||g(. + h) - g||_{L^p(R^N)} with the inner ball bounded; scales as |h|^alpha"""
    parts = translation_parts(h, p, dim, angular_nodes)
    return (parts.outer + parts.inner_bound) ** (1.0 / p)


def fit_translation_slope(lengths: Sequence[float], values: Sequence[float]) -> SlopeFit:
    """Least-squares slope of log(value) against log(|h|)"""
    lengths = np.asarray(lengths, dtype=float)
    values = np.asarray(values, dtype=float)
    if lengths.size < 2 or np.any(lengths <= 0) or np.any(values <= 0):
        raise ConfigurationError("slope fit needs at least two positive (|h|, value) pairs")
    fit = stats.linregress(np.log(lengths), np.log(values))
    return SlopeFit(float(fit.slope), float(fit.intercept), float(fit.rvalue))


def translation_table(p: float, dim: int, levels: int = 6):
    """(|h|, error) for |h| = 2^-1 .. 2^-levels, with the fitted slope"""
    lengths = 2.0 ** -np.arange(1, levels + 1)
    values = np.array([kernel_translation_error(length, p, dim) for length in lengths])
    return lengths, values, fit_translation_slope(lengths, values)
