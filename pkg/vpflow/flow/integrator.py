"""Velocity Verlet integration of the characteristics dX/ds = V, dV/ds = E(s, X)."""
import logging
from typing import Callable, Optional, Tuple

import numpy as np

from vpflow.errors import ConfigurationError, SingularEncounterError
from vpflow.field.background import BackgroundSpec
from vpflow.field.solver import KernelConfig, check_omega, particle_field
from vpflow.flow.history import FlowHistory
from vpflow.flow.verlet import Accel, kick_drift_kick
from vpflow.phase_state.ensemble import ParticleEnsemble
from vpflow.phase_state.sampling import LatticeSeeding

logger = logging.getLogger(__name__)


def leapfrog(x: np.ndarray, v: np.ndarray, accel: Accel, dt: float, steps: int = 1,
             a: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """`steps` kick-drift-kick steps of signed size dt; returns (x, v, field at x).

    Running it forward and then with -dt retraces the same states.
    """
    if steps < 0:
        raise ConfigurationError(f"steps must be >= 0, got {steps}")
    x = np.array(x, dtype=float)
    v = np.array(v, dtype=float)
    if a is None:
        a = accel(x)
    for _ in range(steps):
        x, v, a = kick_drift_kick(x, v, a, accel, dt)
    return x, v, a


def self_consistent_accel(weights: np.ndarray, rho_b: BackgroundSpec, omega: int, cfg: KernelConfig,
                          external_field: Optional[np.ndarray] = None) -> Accel:
    """Field at all moving points, sourced by the first len(weights) of them.

    The remaining rows are zero-weight tracers that feel the field without
    producing it.
    """
    n = weights.shape[0]

    def accel(x: np.ndarray) -> np.ndarray:
        E = particle_field(x[:n], weights, rho_b, omega, cfg, x)
        if external_field is not None:
            E = E + external_field
        return E

    return accel


def _finite(x: np.ndarray, v: np.ndarray, a: np.ndarray) -> bool:
    return bool(np.all(np.isfinite(a)) and np.all(np.isfinite(x)) and np.all(np.isfinite(v)))


def advance(ens: ParticleEnsemble, rho_b: BackgroundSpec, omega: int, cfg: KernelConfig,
            dt: float, T: float, tracers: Optional[LatticeSeeding] = None,
            external_field: Optional[np.ndarray] = None, sample_every: int = 1,
            seed: Optional[int] = None,
            on_sample: Optional[Callable[[int, float, np.ndarray, np.ndarray], None]] = None) -> FlowHistory:
    """Self-consistent run on [0, T] with fixed dt, one field solve per step.

    Raises SingularEncounterError carrying the partial history if a field
    value or state turns non-finite.
    """
    omega = check_omega(omega)
    if not dt > 0:
        raise ConfigurationError(f"dt must be positive, got {dt}")
    if not T >= dt:
        raise ConfigurationError(f"horizon T={T} must be at least dt={dt}")
    if sample_every < 1:
        raise ConfigurationError(f"sample_every must be >= 1, got {sample_every}")
    if ens.dim != cfg.dim:
        raise ConfigurationError(f"ensemble of dim {ens.dim} with a dim {cfg.dim} kernel")
    if external_field is not None:
        external_field = np.broadcast_to(np.asarray(external_field, dtype=float), (ens.dim,)).copy()
    steps = int(round(T / dt))
    if abs(steps * dt - T) > 1e-9 * T:
        logger.warning("horizon %.6g is not a multiple of dt %.6g; stopping at %.6g", T, dt, steps * dt)

    n = ens.count
    x = ens.positions.copy()
    v = ens.velocities.copy()
    if tracers is not None:
        if tracers.dim != ens.dim:
            raise ConfigurationError("tracer lattice and ensemble differ in dimension")
        x = np.concatenate([x, tracers.positions])
        v = np.concatenate([v, tracers.velocities])
    accel = self_consistent_accel(ens.weights, rho_b, omega, cfg, external_field)

    times, xs, vs = [0.0], [x.copy()], [v.copy()]

    def history(status: str) -> FlowHistory:
        X = np.stack(xs)
        V = np.stack(vs)
        return FlowHistory(
            times=np.asarray(times), positions=X[:, :n], velocities=V[:, :n], weights=ens.weights,
            kernel=cfg, background=rho_b, omega=omega, dt=dt, sample_every=sample_every, seed=seed,
            tracer_positions=None if tracers is None else X[:, n:],
            tracer_velocities=None if tracers is None else V[:, n:],
            tracer_cell_volume=None if tracers is None else tracers.cell_volume,
            tracer_half_width=None if tracers is None else tracers.half_width,
            external_field=external_field, status=status,
        )

    a = accel(x)
    if not _finite(x, v, a):
        raise SingularEncounterError("non-finite field at the initial state", 0, history('partial'))
    if on_sample is not None:
        on_sample(0, 0.0, x[:n], v[:n])
    report_every = max(1, steps // 10)
    logger.info("advance: %d particles, %d tracers, %d steps of %.3g, method %s",
                n, x.shape[0] - n, steps, dt, cfg.method)
    for step in range(1, steps + 1):
        x, v, a = kick_drift_kick(x, v, a, accel, dt)
        if not _finite(x, v, a):
            logger.error("advance: non-finite state at step %d (t=%.6g)", step, step * dt)
            raise SingularEncounterError(
                f"non-finite field or state at step {step} (t={step * dt:.6g})", step, history('partial')
            )
        if step % sample_every == 0 or step == steps:
            times.append(step * dt)
            xs.append(x.copy())
            vs.append(v.copy())
            if on_sample is not None:
                on_sample(step, step * dt, x[:n], v[:n])
        if step % report_every == 0:
            logger.info("advance: step %d/%d (t=%.4g)", step, steps, step * dt)
    return history('complete')


def frozen_field(ens: ParticleEnsemble, rho_b: BackgroundSpec, omega: int, cfg: KernelConfig,
                 external_field: Optional[np.ndarray] = None) -> Accel:
    """Field of a fixed source ensemble, evaluable at any positions"""
    sources = ens.positions
    weights = ens.weights

    def evaluate(targets: np.ndarray) -> np.ndarray:
        E = particle_field(sources, weights, rho_b, omega, cfg, targets)
        return E if external_field is None else E + external_field

    return evaluate


def step_map(z: np.ndarray, field: Accel, dt: float) -> np.ndarray:
    """One kick-drift-kick step of phase states z (m, 2N) in a frozen field"""
    dim = z.shape[1] // 2
    x, v = z[:, :dim], z[:, dim:]
    x_new, v_new, _ = kick_drift_kick(x, v, field(x), field, dt)
    return np.concatenate([x_new, v_new], axis=1)


def step_jacobian_determinant(x: np.ndarray, v: np.ndarray, field: Accel, dt: float,
                              h: float = 1e-5) -> np.ndarray:
    """det of the central finite-difference Jacobian of one step, per state"""
    z = np.concatenate([np.atleast_2d(x), np.atleast_2d(v)], axis=1).astype(float)
    m, d = z.shape
    jac = np.empty((m, d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = h
        jac[:, :, j] = (step_map(z + e, field, dt) - step_map(z - e, field, dt)) / (2.0 * h)
    return np.linalg.det(jac)
