"""Strong compactness: a rough datum mollified along a decreasing width sequence.

Every member is advanced from the same lattice of tracers; the finest
member stands in for the limit flow.
"""
import logging
from functools import partial
from typing import Dict, List, Sequence

import numpy as np

from vpflow.errors import ConfigurationError
from vpflow.experiments.configuration import ExperimentConfig, check_strictly_monotone
from vpflow.experiments.reporting import ExperimentReport, Verdict, monotone_verdict, run_members
from vpflow.experiments.simulation import RunArtifacts, diagnostic_indices, field_snapshots, run_simulation
from vpflow.field.diagnostics import translation_modulus
from vpflow.field.translation import fit_translation_slope, translation_exponent
from vpflow.flow.history import FlowHistory
from vpflow.functionals.stability import chebyshev_bridge, deviation_measure, phi_delta, stability_report
from vpflow.phase_state.ensemble import ParticleEnsemble, phase_space_l1_distance
from vpflow.phase_state.sampling import mollify_ensemble

logger = logging.getLogger(__name__)

SLOPE_TOLERANCE = 0.1


def check_sequence_suite(config: ExperimentConfig, direction: str) -> bool:
    """Shared preconditions; returns True for a degenerate (constant) sequence"""
    if len(config.sequence) < 2:
        raise ConfigurationError("a suite needs at least two sequence members")
    if config.tracers is None:
        raise ConfigurationError("suites compare flows on lattice tracers; enable the tracers section")
    return check_strictly_monotone(config.sequence, direction) == 'constant'


def advance_members(config: ExperimentConfig, members: Sequence[ParticleEnsemble]) -> List[RunArtifacts]:
    jobs = [partial(run_simulation, config, member, False) for member in members]
    return run_members(jobs, config.run.threads)


def abort_report(report: ExperimentReport, runs: Sequence[RunArtifacts]) -> bool:
    """Mark the report partial when any member stopped early"""
    failures = [{'member': i, **run.failure} for i, run in enumerate(runs) if run.status != 'complete']
    if failures:
        report.status = 'partial'
        report.extras.setdefault('failures', []).extend(failures)
        logger.error("%s: %d members stopped early", report.suite, len(failures))
    return bool(failures)


def record_stability(report: ExperimentReport, seed: int, runs: Sequence[RunArtifacts],
                     reference: FlowHistory, config: ExperimentConfig) -> List[float]:
    """Stability report of every member against the reference flow; returns the field-difference norms"""
    norms = []
    for member, run in zip(report.sequence, runs):
        stability = stability_report(run.history, reference, config.params, config.gammas)
        report.stability[f'seed={seed}/member={member:g}'] = stability
        norms.append(stability.field_difference)
    return norms


def sup_translation_modulus(history: FlowHistory, config: ExperimentConfig) -> Dict[float, float]:
    """sup over snapshot times of ||E(t, . + h e1) - E(t, .)||_{L^p}, per requested shift"""
    dim = config.run.dim
    p = config.options['translation_p']
    shifts = [np.eye(dim)[0] * h for h in config.options['shifts']]
    indices = diagnostic_indices(history.samples, max(1, history.samples // 4))
    best = np.zeros(len(shifts))
    lengths = None
    for _, E in field_snapshots(history, config.diagnostic_grid, indices):
        lengths, values = translation_modulus(E, shifts, p)
        best = np.maximum(best, values)
    if np.any(lengths <= 0):
        raise ConfigurationError(
            f"shifts {config.options['shifts']} round to zero on a grid of spacing {config.diagnostic_grid.spacing[0]}"
        )
    return dict(zip(lengths.tolist(), best.tolist()))


def strong_stability_suite(config: ExperimentConfig) -> ExperimentReport:
    """Mollification widths sigma_n decreasing: data, flows and fields converge together"""
    degenerate = check_sequence_suite(config, 'decreasing')
    sigmas = list(config.sequence)
    if min(sigmas) < 0:
        raise ConfigurationError("mollification widths must be >= 0")
    params = config.params
    times = config.stability_times
    seeds = list(config.run.seeds)
    report = ExperimentReport('strong-stability', sigmas, seeds)
    rows: Dict[str, List[List[float]]] = {}

    def put(name: str, values: Sequence[float]) -> None:
        rows.setdefault(name, []).append([float(v) for v in values])

    bridges_hold = True
    for seed in seeds:
        base = config.with_seed(seed).initial_ensemble()
        members = [mollify_ensemble(base, s, config.options['noise_seed'] + seed) for s in sigmas]
        runs = advance_members(config.with_seed(seed), members)
        if abort_report(report, runs):
            return report
        reference = runs[-1].history
        half_width = max(float(np.abs(m.phase).max()) for m in members + [base]) * (1.0 + 1e-9)
        bins = config.options['histogram_bins']
        put('data_distance', [phase_space_l1_distance(m, base, bins, half_width) for m in members])
        for s in times:
            put(f'deviation_s={s:g}', [deviation_measure(r.history, reference, params.gamma, params.r, s)
                                       for r in runs])
        put('field_difference', record_stability(report, seed, runs, reference, config))
        put('phi_delta_final', [phi_delta(r.history, reference, params)[-1] for r in runs])
        put('energy_drift', [r.diagnostics.energy_drift for r in runs])
        moduli = [sup_translation_modulus(r.history, config) for r in runs]
        for length in moduli[0]:
            put(f'translation_h={length:g}', [m[length] for m in moduli])
        for r in runs:
            for s in times:
                check = chebyshev_bridge(r.history, reference, params, s)
                bridges_hold = bridges_hold and check.holds

    for name, per_seed in rows.items():
        report.add_metric(name, per_seed)

    report.add_verdict(monotone_verdict('data_converges', 'data_distance (median)',
                                        report.median('data_distance'), degenerate))
    for s in times:
        report.add_verdict(monotone_verdict(f'deviation_decreases_s={s:g}', f'deviation_s={s:g} (median)',
                                            report.median(f'deviation_s={s:g}'), degenerate))
    report.add_verdict(monotone_verdict('field_difference_decreases', 'field_difference (median)',
                                        report.median('field_difference'), degenerate))
    report.add_verdict(Verdict('chebyshev_bridge', 'deviation - (phi / log(1 + gamma / delta) + excluded)',
                               '<= 0 at every member, seed and tested s', bridges_hold, bridges_hold))
    _translation_verdicts(report, config)
    return report


def _translation_verdicts(report: ExperimentReport, config: ExperimentConfig) -> None:
    names = sorted((n for n in report.metrics if n.startswith('translation_h=')),
                   key=lambda n: float(n.split('=')[1]))
    lengths = np.array([float(n.split('=')[1]) for n in names])
    table = np.stack([report.median(n) for n in names])  # (shifts, members)

    increasing = all(np.all(np.diff(table[:, j]) >= -1e-12 * table[:, j].max()) for j in range(table.shape[1]))
    report.add_verdict(Verdict('translation_monotone_in_h', 'sup_t ||E_n(. + h) - E_n||_Lp (median)',
                               'nondecreasing in |h| for every member', table.T.tolist(), increasing))

    uniform = float(table[0].max() / table[-1].max()) if table[-1].max() > 0 else 0.0
    report.add_verdict(Verdict('translation_uniform_in_n', 'max_n modulus(h_min) / max_n modulus(h_max)',
                               '< 1', uniform, uniform < 1.0))

    p = config.options['translation_p']
    dim = config.run.dim
    if dim > 1 and not 1.0 < p < dim / (dim - 1.0):
        report.extras['translation_slope'] = {'skipped': f'p={p} outside (1, N/(N-1))'}
        return
    alpha = translation_exponent(p, dim)
    slopes = []
    for j in range(table.shape[1]):
        if np.all(table[:, j] > 0) and lengths.size >= 2:
            slopes.append(fit_translation_slope(lengths, table[:, j]).slope)
    median_slope = float(np.median(slopes)) if slopes else float('nan')
    report.extras['translation_slope'] = {'alpha': alpha, 'slopes': slopes}
    report.add_verdict(Verdict('translation_slope', 'median log-log slope of the modulus in |h|',
                               f'>= {(1 - SLOPE_TOLERANCE) * alpha:.4g} (alpha = 1 - N + N/p)',
                               median_slope, bool(slopes) and median_slope >= (1 - SLOPE_TOLERANCE) * alpha))
