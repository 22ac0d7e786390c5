"""One self-consistent run with its diagnostics series, field snapshots and solution checks."""
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

import vpflow
from vpflow.errors import ConfigurationError, SingularEncounterError
from vpflow.experiments.configuration import ExperimentConfig
from vpflow.field.diagnostics import helmholtz_identity_residual, potential_energy
from vpflow.field.solver import (
    KernelConfig,
    dt_field,
    field_gradient,
    mollified_density,
    pair_potential_energy,
    solve_field,
)
from vpflow.flow.history import FlowHistory, push_forward_eval, write_history
from vpflow.flow.integrator import advance
from vpflow.phase_state.deposition import deposit_current
from vpflow.phase_state.ensemble import kinetic_energy, momentum, second_moment, total_mass
from vpflow.phase_state.grid import GridField, GridSpec
from vpflow.phase_state.sampling import datum_density
from vpflow.utils.artifacts import ArtifactStore
from vpflow.utils.binary_io import write_grid_field

logger = logging.getLogger(__name__)

HELMHOLTZ_TOLERANCE = 5e-2
TRACE_TOLERANCE = 1e-8
PUSH_FORWARD_TOLERANCE = 1e-6
PUSH_FORWARD_POINTS = 16


@dataclass
class DiagnosticsSeries:
    """Invariants per diagnostic sample"""
    times: np.ndarray
    mass: np.ndarray
    kinetic: np.ndarray
    potential: np.ndarray
    momentum: np.ndarray
    second_moment: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.kinetic + self.potential

    @property
    def energy_drift(self) -> float:
        """max_t |E(t) - E(0)| / |E(0)|, absolute when E(0) = 0"""
        total = self.total
        scale = abs(total[0]) if total[0] != 0 else 1.0
        return float(np.max(np.abs(total - total[0])) / scale)

    @property
    def energy_excess(self) -> float:
        """max_t (E(t) - E(0)) / |E(0)|"""
        total = self.total
        scale = abs(total[0]) if total[0] != 0 else 1.0
        return float(np.max(total - total[0]) / scale)

    def rows(self) -> List[list]:
        total = self.total
        return [
            [float(self.times[k]), float(self.mass[k]), float(self.kinetic[k]), float(self.potential[k]),
             float(total[k])] + [float(p) for p in self.momentum[k]] + [float(self.second_moment[k])]
            for k in range(self.times.size)
        ]

    def header(self) -> List[str]:
        dim = self.momentum.shape[1]
        return ['t', 'mass', 'kinetic', 'potential', 'total'] + [f'momentum_{i}' for i in range(dim)] + ['second_moment']


def diagnostic_indices(samples: int, every: int) -> List[int]:
    indices = list(range(0, samples, every))
    if indices[-1] != samples - 1:
        indices.append(samples - 1)
    return indices


def compute_diagnostics(history: FlowHistory, every: int = 1) -> DiagnosticsSeries:
    """Mass, kinetic, pair-potential energy, momentum and second moment at stored samples"""
    indices = diagnostic_indices(history.samples, every)
    rows = []
    for k in indices:
        ens = history.ensemble_at(k)
        rows.append((
            total_mass(ens), kinetic_energy(ens),
            pair_potential_energy(ens, history.background, history.omega, history.kernel),
            momentum(ens), second_moment(ens),
        ))
    return DiagnosticsSeries(
        times=history.times[indices],
        mass=np.array([r[0] for r in rows]),
        kinetic=np.array([r[1] for r in rows]),
        potential=np.array([r[2] for r in rows]),
        momentum=np.stack([r[3] for r in rows]),
        second_moment=np.array([r[4] for r in rows]),
    )


def grid_kernel(cfg: KernelConfig, grid: GridSpec) -> KernelConfig:
    """The run's kernel evaluated on the nodes of `grid`"""
    if cfg.method == 'grid-convolution':
        return cfg
    return replace(cfg, grid=grid)


def field_snapshots(history: FlowHistory, grid: GridSpec, indices: Optional[List[int]] = None) -> List[Tuple[float, GridField]]:
    """E on the diagnostic grid at the first, middle and last samples"""
    if indices is None:
        indices = sorted({0, history.samples // 2, history.samples - 1})
    cfg = grid_kernel(history.kernel, grid)
    return [(float(history.times[k]), solve_field(history.ensemble_at(k), history.background, history.omega, cfg))
            for k in indices]


def _check(value: Any, threshold: Any, passed: bool, advisory: bool = False, detail: str = '') -> Dict[str, Any]:
    return {'value': value, 'threshold': threshold, 'passed': bool(passed), 'advisory': advisory, 'detail': detail}


def _trace_check(history: FlowHistory, k: int, grid: GridSpec) -> Dict[str, Any]:
    if history.kernel.softening <= 0:
        return _check(None, TRACE_TOLERANCE, True, detail='unsoftened kernel; trace identity not evaluated')
    stride = max(1, grid.node_count // 64)
    targets = grid.node_points()[::stride]
    ens = history.ensemble_at(k)
    grad = field_gradient(ens, history.background, history.kernel, history.omega, targets)
    trace = np.trace(grad, axis1=1, axis2=2)
    expected = history.omega * mollified_density(ens, history.background, history.kernel, targets)
    scale = max(float(np.abs(expected).max()), 1e-300)
    residual = float(np.abs(trace - expected).max() / scale)
    return _check(residual, TRACE_TOLERANCE, residual <= TRACE_TOLERANCE,
                  detail='div E against omega * eta_eps * (rho - rho_b) at grid nodes')


def _helmholtz_check(history: FlowHistory, k: int, grid: GridSpec, E: GridField) -> Dict[str, Any]:
    ens = history.ensemble_at(k)
    cfg = grid_kernel(history.kernel, grid)
    J = deposit_current(ens, grid).field
    dtE = dt_field(ens, history.omega, cfg)
    residual = helmholtz_identity_residual(E, dtE, J, history.omega)
    return _check(residual.value, HELMHOLTZ_TOLERANCE, residual.value <= HELMHOLTZ_TOLERANCE, advisory=True,
                  detail='degenerate' if residual.degenerate else 'int E.dtE + omega int E.J, normalized')


def _push_forward_check(history: FlowHistory, config: ExperimentConfig) -> Dict[str, Any]:
    if history.sample_every != 1 or history.samples < 2 or config.datum.kind == 'table':
        return _check(None, PUSH_FORWARD_TOLERANCE, True, detail='not evaluated for this history')
    f0 = datum_density(config.datum)
    k = history.samples - 1
    checked = np.arange(min(PUSH_FORWARD_POINTS, history.count))
    initial = f0(history.positions[0, checked], history.velocities[0, checked])
    result = push_forward_eval(history, f0, float(history.times[k]),
                               history.positions[k, checked], history.velocities[k, checked])
    scale = max(float(np.abs(initial).max()), 1e-300)
    error = float(np.abs(result.values - initial).max() / scale)
    return _check(error, PUSH_FORWARD_TOLERANCE, error <= PUSH_FORWARD_TOLERANCE,
                  detail='f(t, Z(t)) against f0(Z(0)) along stored characteristics')


def solution_checks(history: FlowHistory, diagnostics: DiagnosticsSeries, config: ExperimentConfig,
                    final_field: Optional[GridField] = None) -> Dict[str, Dict[str, Any]]:
    """Weak-solution structure of a finished run, one entry per property"""
    grid = config.diagnostic_grid
    k = history.samples - 1
    checks = {
        'nonnegative_weights': _check(float(history.weights.min()), 0.0, bool(np.all(history.weights >= 0))),
        'finite_second_moment': _check(float(diagnostics.second_moment.max()), 'finite',
                                       bool(np.all(np.isfinite(diagnostics.second_moment)))),
        'mass_conserved': _check(float(np.max(np.abs(diagnostics.mass - diagnostics.mass[0]))), 0.0,
                                 bool(np.all(diagnostics.mass == diagnostics.mass[0]))),
        'field_from_convolution': _trace_check(history, k, grid),
        'push_forward': _push_forward_check(history, config),
    }
    if final_field is not None:
        checks['current_consistency'] = _helmholtz_check(history, k, grid, final_field)
    return checks


@dataclass
class RunArtifacts:
    history: FlowHistory
    diagnostics: DiagnosticsSeries
    snapshots: List[Tuple[float, GridField]]
    checks: Dict[str, Dict[str, Any]]
    seed: int
    status: str = 'complete'
    failure: Optional[Dict[str, Any]] = None
    grid_energies: List[float] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.status == 'complete' and all(c['passed'] for c in self.checks.values() if not c['advisory'])

    def summary(self) -> Dict[str, Any]:
        return {
            'status': self.status,
            'seed': self.seed,
            'samples': int(self.history.samples),
            'horizon': float(self.history.horizon),
            'energy_drift': self.diagnostics.energy_drift,
            'initial_energy': float(self.diagnostics.total[0]),
            'checks': self.checks,
            'failure': self.failure,
        }


def run_simulation(config: ExperimentConfig, ensemble=None, snapshots: bool = True) -> RunArtifacts:
    """Advance the configured datum and collect diagnostics.

    A singular encounter does not raise: the partial history is analysed
    and the failure recorded.
    """
    run = config.run
    if config.datum.dim != config.kernel.dim:
        raise ConfigurationError("datum and kernel dimensions differ")
    ens = config.initial_ensemble() if ensemble is None else ensemble
    status, failure = 'complete', None
    try:
        history = advance(ens, config.background, run.omega, config.kernel, run.dt, run.T,
                          tracers=config.tracer_lattice(), sample_every=run.sample_every, seed=run.seed)
    except SingularEncounterError as e:
        logger.error("run aborted at step %d: %s", e.step, e)
        history, status = e.partial, 'partial'
        failure = {'step': e.step, 'message': str(e)}

    diagnostics = compute_diagnostics(history, run.diagnostic_every)
    fields = field_snapshots(history, config.diagnostic_grid) if snapshots and status == 'complete' else []
    checks = solution_checks(history, diagnostics, config, fields[-1][1] if fields else None)
    artifacts = RunArtifacts(history, diagnostics, fields, checks, run.seed, status, failure,
                             [potential_energy(E) for _, E in fields])
    logger.info("run finished (%s): energy drift %.3e over %d samples", status,
                diagnostics.energy_drift, history.samples)
    return artifacts


def write_run_artifacts(artifacts: RunArtifacts, store: ArtifactStore, run_id: str,
                        config: ExperimentConfig) -> Path:
    """history/, diagnostics.csv, field snapshots, checks.yaml and manifest.yaml"""
    directory = store.path(run_id)
    write_history(artifacts.history, directory / 'history')
    store.record(run_id, 'history')
    store.write_table(
        run_id, 'diagnostics.csv',
        't [time], mass [mass], kinetic/potential/total [energy], momentum_i [mass*velocity], '
        'second_moment [mass*length^2]',
        artifacts.diagnostics.header(), artifacts.diagnostics.rows(),
    )
    for k, (t, E) in enumerate(artifacts.snapshots):
        name = f'field_{k:02d}.vlgf'
        write_grid_field(directory / name, E)
        store.record(run_id, name)
    store.write_yaml(run_id, 'checks.yaml', {
        **artifacts.summary(),
        'snapshot_times': [t for t, _ in artifacts.snapshots],
        'grid_potential_energy': artifacts.grid_energies,
    })
    store.finish_run(run_id, artifacts.status, run_manifest(config, artifacts.seed))
    return directory


def run_manifest(config: ExperimentConfig, seed: Union[int, List[int]]) -> Dict[str, Any]:
    return {
        'package': 'vpflow',
        'version': vpflow.__version__,
        'seed': seed,
        'config': config.settings,
    }
