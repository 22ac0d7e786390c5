import numpy as np
from scipy.special import gamma


def sphere_area(dim: int) -> float:
    """|S^{dim-1}|: 2 for dim=1, 2*pi for dim=2, 4*pi for dim=3"""
    return float(2.0 * np.pi ** (dim / 2.0) / gamma(dim / 2.0))


def ball_volume(dim: int, radius: float = 1.0) -> float:
    """Lebesgue measure of the radius-r ball in R^dim"""
    return float(np.pi ** (dim / 2.0) / gamma(dim / 2.0 + 1.0) * radius ** dim)


def random_directions(rng: np.random.Generator, count: int, dim: int) -> np.ndarray:
    """Uniform unit vectors in R^dim"""
    g = rng.standard_normal((count, dim))
    norms = np.linalg.norm(g, axis=1)
    norms[norms == 0.0] = 1.0
    return g / norms[:, None]
