"""Softened kernels of the free-space Poisson problem in dimension N = 1, 2, 3.

With Plummer softening |x|^2 -> |x|^2 + eps^2 every kernel below is the exact
derivative of the softened Green function, so the softened field is still a
gradient and the softened gradient matrix still has a closed form.
"""
import numpy as np

from vpflow.utils.geometry import sphere_area


def _r2(d: np.ndarray, softening: float) -> np.ndarray:
    return np.sum(d * d, axis=-1) + softening * softening


def green_function(d: np.ndarray, dim: int, softening: float = 0.0) -> np.ndarray:
    """Softened G with -Laplace G = eta_eps (N=3: 1/(4 pi r), N=2: -log r / 2 pi, N=1: -|x| / 2)"""
    r2 = _r2(d, softening)
    if dim == 3:
        with np.errstate(divide='ignore'):
            out = 1.0 / (4.0 * np.pi * np.sqrt(r2))
        return np.where(r2 > 0, out, 0.0)
    if dim == 2:
        with np.errstate(divide='ignore'):
            out = -np.log(r2) / (4.0 * np.pi)
        return np.where(r2 > 0, out, 0.0)
    return -0.5 * np.sqrt(r2)


def coulomb_kernel(d: np.ndarray, dim: int, softening: float = 0.0) -> np.ndarray:
    """g_eps(d) = d / (|S^{N-1}| (|d|^2 + eps^2)^{N/2}); zero at d = 0 when eps = 0"""
    r2 = _r2(d, softening)
    with np.errstate(divide='ignore', invalid='ignore'):
        scale = np.where(r2 > 0, r2 ** (-dim / 2.0), 0.0) / sphere_area(dim)
    return d * scale[..., None]


def kernel_matrix(d: np.ndarray, dim: int, softening: float = 0.0) -> np.ndarray:
    """K_ij(d) = (N d_i d_j / r^{N+2} - delta_ij / r^N) / |S^{N-1}| with r^2 = |d|^2 + eps^2.

    This is -d_j g_i. Unsoftened it is trace free off the origin; softened its
    trace is -eta_eps.
    """
    r2 = _r2(d, softening)
    with np.errstate(divide='ignore', invalid='ignore'):
        inv_n = np.where(r2 > 0, r2 ** (-dim / 2.0), 0.0)
        inv_n2 = np.where(r2 > 0, r2 ** (-dim / 2.0 - 1.0), 0.0)
    outer = d[..., :, None] * d[..., None, :]
    eye = np.eye(dim)
    return (dim * outer * inv_n2[..., None, None] - eye * inv_n[..., None, None]) / sphere_area(dim)


def mollifier(d: np.ndarray, dim: int, softening: float) -> np.ndarray:
    """Plummer mollifier eta_eps = N eps^2 / (|S^{N-1}| (|d|^2 + eps^2)^{N/2+1}), unit mass"""
    if softening <= 0:
        raise ValueError("the Plummer mollifier needs a positive softening")
    r2 = _r2(d, softening)
    return dim * softening ** 2 * r2 ** (-dim / 2.0 - 1.0) / sphere_area(dim)
