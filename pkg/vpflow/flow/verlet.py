"""Kick-drift-kick Verlet step shared by the integrator and its reversal."""
from typing import Callable, Tuple

import numpy as np

Accel = Callable[[np.ndarray], np.ndarray]


def kick_drift_kick(x: np.ndarray, v: np.ndarray, a: np.ndarray, accel: Accel,
                    dt: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One velocity Verlet step; `a` is the field at x, `accel` is evaluated at the new x.

    Each of the three substeps is a shear of phase space, so the map has unit
    Jacobian determinant. A negative dt with the fields swapped inverts it.
    """
    v_half = v + 0.5 * dt * a
    x_new = x + dt * v_half
    a_new = accel(x_new)
    v_new = v_half + 0.5 * dt * a_new
    return x_new, v_new, a_new
