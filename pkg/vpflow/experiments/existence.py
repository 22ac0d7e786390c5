"""Existence by mollification in the repulsive case: a rough datum, smoothed ever less.

Each member must conserve energy, the energy may not grow above its
initial value, mollified initial energies stay below the rough datum's,
and consecutive flows draw together.
"""
import logging
from typing import Dict, List, Sequence

import numpy as np

from vpflow.errors import ConfigurationError
from vpflow.experiments.configuration import ExperimentConfig
from vpflow.experiments.reporting import ExperimentReport, Verdict, monotone_verdict
from vpflow.experiments.strong_stability import abort_report, advance_members, check_sequence_suite
from vpflow.field.solver import total_energy
from vpflow.functionals.stability import deviation_measure
from vpflow.phase_state.sampling import mollify_ensemble

logger = logging.getLogger(__name__)


def check_repulsive(config: ExperimentConfig) -> None:
    if config.run.omega != 1:
        raise ConfigurationError(
            "the existence suite covers the repulsive case omega = +1 only; "
            f"omega = {config.run.omega} was requested"
        )


def mollified_existence_suite(config: ExperimentConfig) -> ExperimentReport:
    check_repulsive(config)
    degenerate = check_sequence_suite(config, 'decreasing')
    sigmas = list(config.sequence)
    if min(sigmas) <= 0:
        raise ConfigurationError("mollification widths must be positive")
    params = config.params
    s_final = config.stability_times[-1]
    tol = config.options['energy_tolerance']
    slack = config.options['mollified_energy_slack']
    seeds = list(config.run.seeds)
    report = ExperimentReport('existence', sigmas, seeds)
    rows: Dict[str, List[List[float]]] = {}
    rough_energies = []

    def put(name: str, values: Sequence[float]) -> None:
        rows.setdefault(name, []).append([float(v) for v in values])

    for seed in seeds:
        seeded = config.with_seed(seed)
        base = seeded.initial_ensemble()
        rough_energies.append(total_energy(base, config.background, 1, config.kernel))
        members = [mollify_ensemble(base, s, config.options['noise_seed'] + seed,
                                    truncate=config.options['mollifier_truncation']) for s in sigmas]
        runs = advance_members(seeded, members)
        if abort_report(report, runs):
            return report
        put('energy_drift', [r.diagnostics.energy_drift for r in runs])
        put('energy_excess', [r.diagnostics.energy_excess for r in runs])
        put('initial_energy', [r.diagnostics.total[0] for r in runs])
        put('mass', [r.diagnostics.mass[0] for r in runs])
        # consecutive members; the finest has no successor and is its own limit
        cauchy = [deviation_measure(runs[i].history, runs[i + 1].history, params.gamma, params.r, s_final)
                  for i in range(len(runs) - 1)]
        put('cauchy_deviation', cauchy + [0.0])

    for name, per_seed in rows.items():
        report.add_metric(name, per_seed)
    report.extras['rough_datum_energy'] = rough_energies

    drift = report.metrics['energy_drift']
    report.add_verdict(Verdict('energy_conserved', 'max over members and seeds of relative energy drift',
                               f'<= {tol:g}', float(drift.max()), bool(drift.max() <= tol)))
    excess = report.metrics['energy_excess']
    report.add_verdict(Verdict('energy_inequality', 'max over t, members, seeds of (E(t) - E(0)) / |E(0)|',
                               f'<= {tol:g}', float(excess.max()), bool(excess.max() <= tol)))

    initial = report.metrics['initial_energy'][:, -2:]
    rough = np.asarray(rough_energies)[:, None]
    bound = rough + slack * np.abs(rough)
    report.add_verdict(Verdict('mollified_energy_bound', 'initial energy of the two finest members',
                               f'<= rough datum energy + {slack:g} |rough datum energy|',
                               initial.tolist(), bool(np.all(initial <= bound))))

    report.add_verdict(monotone_verdict('flows_cauchy', f'deviation between consecutive members at s={s_final:g}',
                                        report.median('cauchy_deviation')[:-1], degenerate))
    return report
