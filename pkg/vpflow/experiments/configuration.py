"""Typed view of a validated settings tree, shared by runs and suites."""
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from vpflow.config.simulation_settings import validate_run_settings
from vpflow.errors import ConfigurationError
from vpflow.field.background import BackgroundSpec
from vpflow.field.solver import KernelConfig
from vpflow.flow.measures import FunctionalParams
from vpflow.phase_state.ensemble import ParticleEnsemble
from vpflow.phase_state.grid import GridSpec
from vpflow.phase_state.sampling import (
    InitialDatumSpec,
    LatticeSeeding,
    lattice_ensemble,
    lattice_seeding,
    sample_ensemble,
    x1_resolved_ensemble,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RunParameters:
    dim: int
    omega: int
    dt: float
    T: float
    count: int
    seed: int
    seeds: Tuple[int, ...]
    sample_every: int = 1
    diagnostic_every: int = 1
    threads: int = 1
    deterministic: bool = True

    def __post_init__(self):
        for name in ('dt', 'T', 'count', 'sample_every', 'diagnostic_every', 'threads'):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"run parameter {name} must be positive, got {getattr(self, name)}")


@dataclass(frozen=True)
class TracerSettings:
    half_width: float
    points_per_axis: int
    seed: Optional[int] = None


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run or a suite needs, built from one validated settings tree.

    `sequence` holds mollification widths or oscillation wavenumbers;
    suites check its direction.
    """
    datum: InitialDatumSpec
    background: BackgroundSpec
    kernel: KernelConfig
    run: RunParameters
    params: FunctionalParams
    diagnostic_grid: GridSpec
    sequence: Tuple[float, ...] = ()
    sampling: str = 'random'
    lattice: Tuple[float, int] = (3.0, 6)
    x1_points: int = 96
    tracers: Optional[TracerSettings] = None
    lambdas: Tuple[float, ...] = ()
    gammas: Tuple[float, ...] = ()
    options: Dict[str, Any] = field(default_factory=dict)
    settings: Dict[str, Any] = field(default_factory=dict)
    output_dir: Optional[Path] = None

    @classmethod
    def from_settings(cls, settings: Dict[str, Any], output_dir: Optional[Path] = None) -> 'ExperimentConfig':
        settings = validate_run_settings(settings)
        run = settings['run']
        dim = run['dim']
        datum = settings['datum']
        grid_settings = settings['grid']
        grid = GridSpec.cube(dim, grid_settings['half_width'], grid_settings['cells'])
        kernel = settings['kernel']
        kernel_cfg = KernelConfig(
            dim=dim,
            softening=kernel['softening'],
            method=kernel['method'],
            grid=grid if kernel['method'] == 'grid-convolution' else None,
            threads=run['threads'],
            chunk_pairs=kernel['chunk_pairs'],
        )
        tracers = settings['tracers']
        functionals = settings['functionals']
        experiment = settings['experiment']
        sequence = tuple(experiment['sequence'])
        check_strictly_monotone(sequence)
        return cls(
            datum=InitialDatumSpec(datum['kind'], dim, datum['mass'], dict(datum['parameters'])),
            background=BackgroundSpec(settings['background']['kind'], dim, settings['background']['mass'],
                                      dict(settings['background']['parameters'])),
            kernel=kernel_cfg,
            run=RunParameters(
                dim=dim, omega=run['omega'], dt=run['dt'], T=run['T'], count=run['count'],
                seed=run['seed'], seeds=tuple(run['seeds']), sample_every=run['sample_every'],
                diagnostic_every=run['diagnostic_every'], threads=run['threads'],
                deterministic=run['deterministic'],
            ),
            params=FunctionalParams(functionals['r'], functionals['lambda'], functionals['gamma'],
                                    functionals['delta'], functionals['alpha']),
            diagnostic_grid=grid,
            sequence=sequence,
            sampling=datum['sampling'],
            lattice=(datum['lattice_half_width'], datum['lattice_points']),
            x1_points=datum['x1_points'],
            tracers=TracerSettings(tracers['half_width'], tracers['points_per_axis'], tracers['seed'])
            if tracers['enabled'] else None,
            lambdas=tuple(functionals['lambdas']),
            gammas=tuple(functionals['gammas']),
            options=dict(experiment),
            settings=settings,
            output_dir=output_dir,
        )

    def with_seed(self, seed: int) -> 'ExperimentConfig':
        return replace(self, run=replace(self.run, seed=int(seed)))

    @property
    def stability_times(self) -> Tuple[float, ...]:
        """Times s at which deviation measures are compared"""
        horizon = self.run.dt * round(self.run.T / self.run.dt)
        times = self.options.get('times') or [0.5 * horizon, horizon]
        return tuple(float(s) for s in times)

    def initial_ensemble(self, seed: Optional[int] = None) -> ParticleEnsemble:
        seed = self.run.seed if seed is None else seed
        if self.sampling == 'lattice':
            half_width, points = self.lattice
            return lattice_ensemble(self.datum, half_width, points)
        if self.sampling == 'x1-resolved':
            return x1_resolved_ensemble(self.datum, self.run.count, seed, self.x1_points)
        return sample_ensemble(self.datum, self.run.count, seed)

    def tracer_lattice(self) -> Optional[LatticeSeeding]:
        if self.tracers is None:
            return None
        return lattice_seeding(self.run.dim, self.tracers.half_width, self.tracers.points_per_axis,
                               self.tracers.seed)


def check_strictly_monotone(values: Sequence[float], direction: Optional[str] = None,
                            allow_constant: bool = True) -> str:
    """'increasing', 'decreasing' or 'constant'; anything else is a ConfigurationError.

    A constant sequence (the degenerate control) is accepted unless
    `allow_constant` is False.
    """
    values = np.asarray(values, dtype=float)
    if values.size < 2:
        found = 'constant'
    else:
        steps = np.diff(values)
        if np.all(steps > 0):
            found = 'increasing'
        elif np.all(steps < 0):
            found = 'decreasing'
        elif np.all(steps == 0):
            found = 'constant'
        else:
            raise ConfigurationError(f"sequence parameters {values.tolist()} are not strictly monotone")
    if found == 'constant' and not allow_constant:
        raise ConfigurationError("sequence parameters must not be constant")
    if direction is not None and found not in (direction, 'constant'):
        raise ConfigurationError(f"sequence parameters {values.tolist()} must be {direction}")
    return found


def resolve_seed(config: ExperimentConfig) -> ExperimentConfig:
    """Deterministic mode keeps the configured seed; otherwise a fresh one is drawn"""
    if config.run.deterministic:
        return config
    seed = int(np.random.SeedSequence().entropy % (2 ** 31))
    logger.info("non-deterministic mode: drew seed %d", seed)
    return config.with_seed(seed)
