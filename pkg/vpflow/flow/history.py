"""Stored characteristics Z(s, t, z) = (X, V) of a run: the discrete Lagrangian flow."""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, NamedTuple, Optional, Tuple, Union

import numpy as np

from vpflow.errors import ConfigurationError, HorizonError
from vpflow.field.background import BackgroundSpec
from vpflow.field.solver import KernelConfig, particle_field
from vpflow.flow.verlet import kick_drift_kick
from vpflow.phase_state.ensemble import ParticleEnsemble
from vpflow.utils.binary_io import read_ensemble, write_ensemble
from vpflow.utils.manifest import (
    background_from_dict,
    background_to_dict,
    kernel_from_dict,
    kernel_to_dict,
    read_manifest,
    write_manifest,
)

logger = logging.getLogger(__name__)

HISTORY_FORMAT = 'vpflow-history'
HISTORY_VERSION = 1

DensityFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass
class FlowHistory:
    """Trajectories of the particles (and of zero-weight lattice tracers) at the sample times.

    Particles and tracers move in the same field; tracers carry the
    Lebesgue cell volume of their initial lattice cell instead of mass.
    """
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    weights: np.ndarray
    kernel: KernelConfig
    background: BackgroundSpec
    omega: int
    dt: float
    sample_every: int = 1
    seed: Optional[int] = None
    tracer_positions: Optional[np.ndarray] = None
    tracer_velocities: Optional[np.ndarray] = None
    tracer_cell_volume: Optional[float] = None
    tracer_half_width: Optional[float] = None
    external_field: Optional[np.ndarray] = None
    status: str = 'complete'

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or self.times.size < 1:
            raise ConfigurationError("history needs at least one sample time")
        if np.any(np.diff(self.times) <= 0):
            raise ConfigurationError("history sample times must be strictly increasing")
        if self.positions.shape != self.velocities.shape or self.positions.shape[0] != self.times.size:
            raise ConfigurationError("history trajectories do not match its sample times")
        if self.has_tracers and self.tracer_positions.shape[0] != self.times.size:
            raise ConfigurationError("tracer trajectories do not match the sample times")

    @property
    def dim(self) -> int:
        return self.positions.shape[2]

    @property
    def count(self) -> int:
        return self.positions.shape[1]

    @property
    def samples(self) -> int:
        return self.times.size

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def has_tracers(self) -> bool:
        return self.tracer_positions is not None

    def ensemble_at(self, k: int) -> ParticleEnsemble:
        return ParticleEnsemble(self.positions[k], self.velocities[k], self.weights)

    def trajectories(self, which: str = 'particles') -> np.ndarray:
        """Phase states of shape (samples, count, 2N)"""
        if which == 'particles':
            return np.concatenate([self.positions, self.velocities], axis=2)
        if which == 'tracers':
            if not self.has_tracers:
                raise ConfigurationError("history has no lattice tracers")
            return np.concatenate([self.tracer_positions, self.tracer_velocities], axis=2)
        raise ConfigurationError(f"unknown trajectory set {which!r}")

    def seed_measure(self, which: str = 'particles') -> np.ndarray:
        """Measure carried by each seed: mass for particles, cell volume for tracers"""
        if which == 'particles':
            return np.asarray(self.weights)
        if which == 'tracers':
            if not self.has_tracers:
                raise ConfigurationError("history has no lattice tracers")
            return np.full(self.tracer_positions.shape[1], float(self.tracer_cell_volume))
        raise ConfigurationError(f"unknown trajectory set {which!r}")

    def sample_index(self, s: float) -> Optional[int]:
        """Index of a stored sample time equal to s (to roundoff), else None"""
        k = int(np.argmin(np.abs(self.times - s)))
        scale = max(abs(self.dt), 1e-300)
        return k if abs(self.times[k] - s) <= 1e-9 * scale else None

    def check_time(self, s: float) -> None:
        slack = 1e-9 * max(abs(self.dt), 1e-300)
        if not self.times[0] - slack <= s <= self.times[-1] + slack:
            raise HorizonError(f"time {s} outside the stored horizon [{self.times[0]}, {self.times[-1]}]")

    def state_at(self, s: float, which: str = 'particles') -> np.ndarray:
        """Phase states at time s, exact on samples and linear in between"""
        self.check_time(s)
        traj = self.trajectories(which)
        k = self.sample_index(s)
        if k is not None:
            return traj[k].copy()
        j = int(np.searchsorted(self.times, s))
        lo, hi = self.times[j - 1], self.times[j]
        theta = (s - lo) / (hi - lo)
        return (1.0 - theta) * traj[j - 1] + theta * traj[j]

    def field_at(self, k: int) -> Callable[[np.ndarray], np.ndarray]:
        """The field frozen at sample k, evaluable at arbitrary positions"""
        sources = self.positions[k]

        def evaluate(targets: np.ndarray) -> np.ndarray:
            E = particle_field(sources, self.weights, self.background, self.omega, self.kernel, targets)
            if self.external_field is not None:
                E = E + self.external_field
            return E

        return evaluate


def backward_eval(history: FlowHistory, s: float, t: float, which: str = 'particles') -> np.ndarray:
    """Z(s, t, .) applied to the stored states at time t.

    Every seed has one stored trajectory, so Z(s, t, Z(t, 0, z)) is the state
    of that trajectory at s and composition holds exactly on samples.
    """
    history.check_time(s)
    history.check_time(t)
    return history.state_at(s, which)


class PushForwardResult(NamedTuple):
    values: np.ndarray
    extrapolated: np.ndarray


def _outside_support(history: FlowHistory, k: int, x: np.ndarray) -> np.ndarray:
    sources = history.positions[k]
    lo, hi = sources.min(axis=0), sources.max(axis=0)
    margin = 0.25 * (hi - lo) + history.kernel.softening
    return np.any((x < lo - margin) | (x > hi + margin), axis=1)


def push_forward_eval(history: FlowHistory, f0: DensityFn, t: float,
                      x: np.ndarray, v: np.ndarray) -> PushForwardResult:
    """f(t, x, v) = f0(Z(0, t, (x, v))).

    Z(0, t, .) at arbitrary points integrates the stored per-step fields
    backward with the inverse Verlet step. Queries that leave the region
    where the fields were sourced are flagged.
    """
    if history.sample_every != 1:
        raise ConfigurationError("push-forward evaluation needs a history storing every step")
    history.check_time(t)
    k = history.sample_index(t)
    if k is None:
        raise HorizonError(f"time {t} is not a stored step of the history")
    x = np.array(np.atleast_2d(x), dtype=float)
    v = np.array(np.atleast_2d(v), dtype=float)
    if x.shape != v.shape or x.shape[1] != history.dim:
        raise ConfigurationError("query positions and velocities must both be (n, N)")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
        raise ConfigurationError("query points must be finite")
    flagged = np.zeros(x.shape[0], dtype=bool)
    if k > 0:
        a = history.field_at(k)(x)
        for j in range(k, 0, -1):
            flagged |= _outside_support(history, j, x)
            step = history.times[j] - history.times[j - 1]
            x, v, a = kick_drift_kick(x, v, a, history.field_at(j - 1), -step)
        flagged |= _outside_support(history, 0, x)
    if flagged.any():
        logger.warning("push-forward: %d of %d queries left the field support", flagged.sum(), flagged.size)
    return PushForwardResult(np.asarray(f0(x, v), dtype=float), flagged)


# -- persistence ----------------------------------------------------------

def write_history(history: FlowHistory, directory: Union[str, Path]) -> Path:
    """One VLEN snapshot per sample (plus tracer snapshots) and manifest.yaml"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    snapshots, tracer_snapshots = [], []
    for k in range(history.samples):
        name = f"particles_{k:05d}.vlen"
        write_ensemble(directory / name, history.ensemble_at(k))
        snapshots.append(name)
        if history.has_tracers:
            name = f"tracers_{k:05d}.vlen"
            tracers = ParticleEnsemble(history.tracer_positions[k], history.tracer_velocities[k],
                                       np.zeros(history.tracer_positions.shape[1]))
            write_ensemble(directory / name, tracers)
            tracer_snapshots.append(name)
    manifest = {
        'format': HISTORY_FORMAT,
        'version': HISTORY_VERSION,
        'status': history.status,
        'times': history.times,
        'dt': history.dt,
        'sample_every': history.sample_every,
        'omega': history.omega,
        'seed': history.seed,
        'kernel': kernel_to_dict(history.kernel),
        'background': background_to_dict(history.background),
        'external_field': history.external_field,
        'tracers': None if not history.has_tracers else {
            'cell_volume': history.tracer_cell_volume,
            'half_width': history.tracer_half_width,
            'snapshots': tracer_snapshots,
        },
        'snapshots': snapshots,
    }
    write_manifest(directory / 'manifest.yaml', manifest)
    logger.info("history with %d samples written to %s", history.samples, directory)
    return directory


def _stack(directory: Path, names) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    ensembles = [read_ensemble(directory / name) for name in names]
    positions = np.stack([e.positions for e in ensembles])
    velocities = np.stack([e.velocities for e in ensembles])
    return positions, velocities, np.array(ensembles[0].weights)


def read_history(directory: Union[str, Path]) -> FlowHistory:
    directory = Path(directory)
    manifest = read_manifest(directory / 'manifest.yaml')
    if manifest.get('format') != HISTORY_FORMAT or manifest.get('version') != HISTORY_VERSION:
        raise ConfigurationError(f"{directory} does not hold a version {HISTORY_VERSION} history")
    positions, velocities, weights = _stack(directory, manifest['snapshots'])
    tracers = manifest.get('tracers')
    tracer_positions = tracer_velocities = None
    if tracers:
        tracer_positions, tracer_velocities, _ = _stack(directory, tracers['snapshots'])
    external = manifest.get('external_field')
    return FlowHistory(
        times=np.asarray(manifest['times'], dtype=float),
        positions=positions,
        velocities=velocities,
        weights=weights,
        kernel=kernel_from_dict(manifest['kernel']),
        background=background_from_dict(manifest['background']),
        omega=int(manifest['omega']),
        dt=float(manifest['dt']),
        sample_every=int(manifest['sample_every']),
        seed=manifest.get('seed'),
        tracer_positions=tracer_positions,
        tracer_velocities=tracer_velocities,
        tracer_cell_volume=None if not tracers else float(tracers['cell_volume']),
        tracer_half_width=None if not tracers else tracers.get('half_width'),
        external_field=None if external is None else np.asarray(external, dtype=float),
        status=manifest.get('status', 'complete'),
    )
