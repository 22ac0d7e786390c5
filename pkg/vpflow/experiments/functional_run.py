"""Flow functionals of one run: superlevel decay, beta functional, compressibility, field splits."""
import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from vpflow.errors import ConfigurationError
from vpflow.experiments.configuration import ExperimentConfig
from vpflow.experiments.simulation import RunArtifacts, run_simulation
from vpflow.field.diagnostics import hls_ratio, source_l1_norm
from vpflow.flow.measures import CompressibilityEstimate, SuperlevelCurve, compressibility_estimate, superlevel_measure
from vpflow.functionals.beta import SuperlevelFit, beta_superlevel_functional, fit_superlevel_bound
from vpflow.functionals.decomposition import R1Norms, r1_decomposition_norms
from vpflow.phase_state.integrability import IntegrabilityProfile, equi_integrability_profile
from vpflow.utils.manifest import to_plain

logger = logging.getLogger(__name__)

DOUBLING_TOLERANCE = 0.05
FRACTIONS = (0.01, 0.05, 0.1, 0.25)


def default_boxes(dim: int, half_width: float) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Central box of half the lattice width and one positive-orthant box"""
    n = 2 * dim
    a = half_width
    return [(np.full(n, -0.5 * a), np.full(n, 0.5 * a)), (np.zeros(n), np.full(n, a))]


@dataclass
class FunctionalSummary:
    run: RunArtifacts
    curve: SuperlevelCurve
    compressibility: Optional[CompressibilityEstimate]
    integrability: IntegrabilityProfile
    beta_value: Optional[float] = None
    fit: Optional[SuperlevelFit] = None
    r1: Optional[R1Norms] = None
    hls: Optional[float] = None
    doubling: Dict[str, float] = field(default_factory=dict)

    @property
    def curve_nonincreasing(self) -> bool:
        return bool(np.all(np.diff(self.curve.measures) <= 1e-12 * max(self.curve.covered_measure, 1e-300)))

    @property
    def passed(self) -> bool:
        ok = self.run.status == 'complete' and self.curve_nonincreasing
        if self.fit is not None:
            ok = ok and self.fit.holds
        if self.doubling:
            ok = ok and self.doubling['relative_change'] < DOUBLING_TOLERANCE
        return ok

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {
            'weighting': self.curve.weighting,
            'r': self.curve.r,
            'covered_measure': self.curve.covered_measure,
            'superlevel': {'lambdas': self.curve.lambdas, 'measures': self.curve.measures,
                           'nonincreasing': self.curve_nonincreasing},
            'integrability': {'fractions': self.integrability.fractions,
                              'captured_mass': self.integrability.captured_mass,
                              'total_mass': self.integrability.total_mass},
            'passed': self.passed,
        }
        if self.beta_value is not None:
            out['beta_functional'] = self.beta_value
        if self.fit is not None:
            out['superlevel_fit'] = self.fit.to_dict()
        if self.compressibility is not None:
            out['compressibility'] = {'max_ratio': self.compressibility.max_ratio,
                                      'min_ratio': self.compressibility.min_ratio,
                                      'flagged_boxes': self.compressibility.flagged}
        if self.r1 is not None:
            out['r1_split'] = self.r1._asdict()
        if self.hls is not None:
            out['hls_ratio'] = self.hls
        if self.doubling:
            out['particle_doubling'] = self.doubling
        return to_plain(out)


def analyze_flow_functionals(config: ExperimentConfig, check_doubling: bool = False) -> FunctionalSummary:
    """Run the configured datum once and evaluate the flow functionals on its history"""
    weighting = 'lattice' if config.tracers is not None else 'mass'
    artifacts = run_simulation(config)
    history = artifacts.history
    params = config.params
    lambdas = config.lambdas or (params.lam,)
    curve = superlevel_measure(history, params.r, lambdas, weighting)

    compressibility = None
    if config.tracers is not None:
        compressibility = compressibility_estimate(history, default_boxes(config.run.dim, config.tracers.half_width))

    final = history.ensemble_at(history.samples - 1)
    summary = FunctionalSummary(artifacts, curve, compressibility,
                                equi_integrability_profile(final, FRACTIONS))

    if config.run.omega == 1:
        summary.beta_value = beta_superlevel_functional(history, params.r, params.alpha, weighting)
        summary.fit = fit_superlevel_bound(curve, summary.beta_value, params.alpha, history.horizon)
        if check_doubling:
            summary.doubling = _doubling(config, summary.beta_value, weighting)
    else:
        logger.info("omega = -1: the beta superlevel functional is not evaluated")

    if artifacts.snapshots:
        E = artifacts.snapshots[-1][1]
        if config.run.dim <= 2:
            extent = max(1.5 * float(E.magnitude().max()), 1e-6)
            summary.r1 = r1_decomposition_norms(E, extent)
        if config.run.dim >= 2 and not config.background.is_comoving:
            source_l1 = source_l1_norm(final, config.background, E.grid)
            if source_l1 > 0:
                summary.hls = hls_ratio(E, source_l1)
    return summary


def _doubling(config: ExperimentConfig, value: float, weighting: str) -> Dict[str, float]:
    if config.sampling != 'random':
        raise ConfigurationError("particle doubling applies to randomly sampled data")
    doubled = replace(config, run=replace(config.run, count=2 * config.run.count))
    history = run_simulation(doubled, snapshots=False).history
    other = beta_superlevel_functional(history, config.params.r, config.params.alpha, weighting)
    change = abs(other - value) / max(abs(value), 1e-300)
    logger.info("beta functional %.6g at %d particles, %.6g at %d (change %.2f%%)",
                value, config.run.count, other, doubled.run.count, 100 * change)
    return {'count': config.run.count, 'value': value, 'doubled_value': other, 'relative_change': change}
