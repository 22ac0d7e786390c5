"""Order-fixed, compensated reductions used by every conserved diagnostic."""
import math

import numpy as np


def compensated_sum(values: np.ndarray) -> float:
    """Exactly rounded sum of a 1-D array, independent of thread count"""
    return math.fsum(np.asarray(values, dtype=np.float64).ravel().tolist())


def compensated_column_sum(values: np.ndarray) -> np.ndarray:
    """Compensated sum along the first axis of a 2-D array"""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 1:
        return np.array([compensated_sum(arr)])
    return np.array([compensated_sum(arr[:, k]) for k in range(arr.shape[1])])


def compensated_dot(weights: np.ndarray, values: np.ndarray) -> float:
    """Compensated sum of weights * values in particle order"""
    return compensated_sum(np.asarray(weights, dtype=np.float64) * np.asarray(values, dtype=np.float64))
