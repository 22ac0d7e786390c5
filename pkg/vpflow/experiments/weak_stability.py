"""Weak compactness: data f0 (1 + sin(n x1)) converge only weakly, their flows strongly."""
import logging
from typing import Callable, Dict, List, Sequence

import numpy as np

from vpflow.errors import ConfigurationError
from vpflow.experiments.configuration import ExperimentConfig
from vpflow.experiments.reporting import ExperimentReport, Verdict
from vpflow.experiments.strong_stability import (
    abort_report,
    advance_members,
    check_sequence_suite,
    record_stability,
)
from vpflow.functionals.stability import deviation_measure
from vpflow.phase_state.ensemble import ParticleEnsemble, weight_l1_distance
from vpflow.phase_state.sampling import oscillated
from vpflow.utils.summation import compensated_dot

logger = logging.getLogger(__name__)

Moment = Callable[[np.ndarray, np.ndarray], np.ndarray]

MOMENTS: Dict[str, Moment] = {
    'one': lambda x, v: np.ones(x.shape[0]),
    'x1': lambda x, v: x[:, 0],
    'v2': lambda x, v: np.sum(v ** 2, axis=1),
    'gauss': lambda x, v: np.exp(-np.sum(x ** 2, axis=1)),
    'cos_x1': lambda x, v: np.cos(x[:, 0]),
}


def weak_moment(ens: ParticleEnsemble, name: str) -> float:
    """Integral of the test function `name` against the ensemble"""
    if name not in MOMENTS:
        raise ConfigurationError(f"unknown moment {name!r}; valid moments: {', '.join(MOMENTS)}")
    return compensated_dot(ens.weights, MOMENTS[name](ens.positions, ens.velocities))


def moment_errors(member: ParticleEnsemble, reference: ParticleEnsemble, names: Sequence[str]) -> Dict[str, float]:
    return {name: abs(weak_moment(member, name) - weak_moment(reference, name)) for name in names}


def _wavenumbers(config: ExperimentConfig) -> List[int]:
    values = list(config.sequence)
    if any(n < 0 or int(n) != n for n in values):
        raise ConfigurationError(f"oscillation wavenumbers must be integers >= 0, got {values}")
    return [int(n) for n in values]


def weak_stability_suite(config: ExperimentConfig) -> ExperimentReport:
    """Oscillation wavenumbers n increasing; the unoscillated datum is the reference"""
    check_sequence_suite(config, 'increasing')
    wavenumbers = _wavenumbers(config)
    nonzero = [i for i, n in enumerate(wavenumbers) if n > 0]
    if not nonzero:
        raise ConfigurationError("the weak suite needs at least one oscillated member (n > 0)")
    first = nonzero[0]
    params = config.params
    s_final = config.stability_times[-1]
    names = list(config.options['moments'])
    seeds = list(config.run.seeds)
    report = ExperimentReport('weak-stability', [float(n) for n in wavenumbers], seeds)
    report.extras['moment_dictionary'] = {'size': len(names), 'functions': names}
    rows: Dict[str, List[List[float]]] = {}

    def put(name: str, values: Sequence[float]) -> None:
        rows.setdefault(name, []).append([float(v) for v in values])

    for seed in seeds:
        seeded = config.with_seed(seed)
        base = seeded.initial_ensemble()
        members = [oscillated(base, n) for n in wavenumbers]
        # the reference flow is the n = 0 run; reuse it when it is a member
        ensembles = members if wavenumbers[0] == 0 else [base] + members
        runs = advance_members(seeded, ensembles)
        if abort_report(report, runs):
            return report
        reference = runs[0].history
        member_runs = runs if wavenumbers[0] == 0 else runs[1:]

        put('data_l1', [weight_l1_distance(m, base) for m in members])
        errors = [moment_errors(m, base, names) for m in members]
        for name in names:
            put(f'moment_{name}', [e[name] for e in errors])
        put('moment_max', [max(e.values()) for e in errors])
        for s in config.stability_times:
            put(f'deviation_s={s:g}', [deviation_measure(r.history, reference, params.gamma, params.r, s)
                                       for r in member_runs])
        put('field_difference', record_stability(report, seed, member_runs, reference, seeded))

    for name, per_seed in rows.items():
        report.add_metric(name, per_seed)

    l1 = report.median('data_l1')
    floor = config.options['l1_floor'] * l1[first]
    report.add_verdict(Verdict('data_stay_apart', 'data_l1 (median) over oscillated members',
                               f'>= {config.options["l1_floor"]:g} x value at n={wavenumbers[first]}',
                               l1[nonzero].tolist(), bool(np.all(l1[nonzero] >= floor))))

    moments = report.median('moment_max')
    report.add_verdict(moment_rate_verdict(wavenumbers, moments, config.options['moment_rate_slack']))

    deviation = report.median(f'deviation_s={s_final:g}')
    report.add_verdict(flow_drop_verdict(wavenumbers, deviation, config.options['deviation_drop'], s_final))
    if wavenumbers[0] == 0:
        zero = float(deviation[0])
        report.add_verdict(Verdict('reference_member_exact', 'deviation of the n=0 member', '== 0',
                                   zero, zero == 0.0))
    return report


def moment_rate_verdict(wavenumbers: Sequence[int], moments: Sequence[float], slack: float) -> Verdict:
    """n |moment_n - moment_0| stays within `slack` times its value at the first oscillated member.

    A zero error at the first member cannot show a rate and fails.
    """
    n = np.asarray(wavenumbers, dtype=float)
    scaled = n * np.asarray(moments, dtype=float)
    nonzero = np.flatnonzero(n > 0)
    first, last = nonzero[0], nonzero[-1]
    threshold = f'<= {slack:g} x value at n={wavenumbers[first]}, which must be > 0'
    metric = 'n x max over the dictionary of |moment_n - moment_0| (median)'
    if not scaled[first] > 0:
        return Verdict('weak_moments_converge', metric, threshold, scaled[nonzero].tolist(), False,
                       f'inconclusive: no moment error at n={wavenumbers[first]}')
    holds = bool(np.all(scaled[nonzero] <= slack * scaled[first]) and moments[last] < moments[first])
    return Verdict('weak_moments_converge', metric, threshold, scaled[nonzero].tolist(), holds)


def flow_drop_verdict(wavenumbers: Sequence[int], deviation: Sequence[float], drop: float, s: float) -> Verdict:
    """The last member deviates at most `drop` times the first oscillated one, which must deviate"""
    deviation = np.asarray(deviation, dtype=float)
    nonzero = [i for i, n in enumerate(wavenumbers) if n > 0]
    first, last = nonzero[0], nonzero[-1]
    values = [float(deviation[first]), float(deviation[last])]
    threshold = f'last member <= {drop:g} x member n={wavenumbers[first]}, which must be > 0'
    metric = f'deviation_s={s:g} (median)'
    if not deviation[first] > 0:
        return Verdict('flows_converge', metric, threshold, values, False,
                       f'inconclusive: no tracer separates by more than gamma at n={wavenumbers[first]}')
    return Verdict('flows_converge', metric, threshold, values, bool(deviation[last] <= drop * deviation[first]))
