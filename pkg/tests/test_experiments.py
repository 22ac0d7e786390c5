"""
Tests for experiment configuration, single runs, the suites and their reports.

Suites run at toy scale (40 particles, 64 tracers, two steps); they check
structure and exact identities, not convergence rates.
"""
import numpy as np
import pytest
import yaml

from vpflow.errors import ConfigurationError
from vpflow.experiments.configuration import ExperimentConfig, check_strictly_monotone, resolve_seed
from vpflow.experiments.existence import mollified_existence_suite
from vpflow.experiments.functional_run import DOUBLING_TOLERANCE, analyze_flow_functionals
from vpflow.experiments.kernel_test import kernel_translation_test
from vpflow.experiments.reporting import ExperimentReport, monotone_verdict, run_members, write_report
from vpflow.experiments.simulation import diagnostic_indices, run_simulation, write_run_artifacts
from vpflow.experiments.strong_stability import strong_stability_suite
from vpflow.experiments.weak_stability import (
    flow_drop_verdict,
    moment_rate_verdict,
    weak_moment,
    weak_stability_suite,
)
from vpflow.phase_state.ensemble import ParticleEnsemble
from vpflow.utils.artifacts import PARTIAL_MARKER, ArtifactStore


@pytest.fixture
def free_stream_config(tiny_settings):
    return ExperimentConfig.from_settings(tiny_settings(
        background={'kind': 'comoving'}, run={'T': 0.5, 'dt': 0.05}, tracers={'enabled': False},
    ))


class TestConfiguration:
    @pytest.mark.parametrize('values,expected', [
        ([0.4, 0.2, 0.1], 'decreasing'),
        ([0, 1, 4], 'increasing'),
        ([0.1, 0.1], 'constant'),
        ([0.3], 'constant'),
    ])
    def test_sequence_direction(self, values, expected):
        assert check_strictly_monotone(values) == expected

    def test_non_monotone_sequence(self, tiny_settings):
        with pytest.raises(ConfigurationError, match='not strictly monotone'):
            ExperimentConfig.from_settings(tiny_settings(experiment={'sequence': [0.1, 0.3, 0.2]}))

    def test_wrong_direction(self):
        with pytest.raises(ConfigurationError, match='must be decreasing'):
            check_strictly_monotone([0.1, 0.2], 'decreasing')

    def test_grid_only_for_grid_convolution(self, tiny_settings):
        direct = ExperimentConfig.from_settings(tiny_settings())
        convolved = ExperimentConfig.from_settings(tiny_settings(kernel={'method': 'grid-convolution'}))
        assert direct.kernel.grid is None
        assert convolved.kernel.grid == convolved.diagnostic_grid

    def test_stability_times_default_to_half_and_full_horizon(self, tiny_settings):
        config = ExperimentConfig.from_settings(tiny_settings())
        assert config.stability_times == pytest.approx((0.05, 0.1))

    def test_deterministic_seed_is_kept(self, tiny_settings):
        config = ExperimentConfig.from_settings(tiny_settings())
        assert resolve_seed(config).run.seed == 5

    def test_fresh_seed_when_not_deterministic(self, tiny_settings):
        config = ExperimentConfig.from_settings(tiny_settings(run={'deterministic': False}))
        assert isinstance(resolve_seed(config).run.seed, int)


class TestSimulation:
    """One configured run, its diagnostics and structural checks"""

    def test_free_streaming_run(self, free_stream_config):
        artifacts = run_simulation(free_stream_config)
        assert artifacts.status == 'complete'
        assert artifacts.diagnostics.energy_drift < 1e-12
        assert artifacts.passed
        assert artifacts.checks['push_forward']['value'] < 1e-12
        assert len(artifacts.snapshots) == 3

    def test_runs_are_reproducible(self, tiny_settings):
        config = ExperimentConfig.from_settings(tiny_settings())
        first = run_simulation(config, snapshots=False)
        second = run_simulation(config, snapshots=False)
        np.testing.assert_array_equal(first.history.positions, second.history.positions)
        np.testing.assert_array_equal(first.diagnostics.total, second.diagnostics.total)

    def test_self_consistent_run_passes_checks(self, tiny_settings):
        artifacts = run_simulation(ExperimentConfig.from_settings(tiny_settings()))
        for name in ('nonnegative_weights', 'finite_second_moment', 'mass_conserved',
                     'field_from_convolution', 'push_forward'):
            assert artifacts.checks[name]['passed'], name

    def test_diagnostic_indices_keep_the_last_sample(self):
        assert diagnostic_indices(11, 4) == [0, 4, 8, 10]
        assert diagnostic_indices(9, 4) == [0, 4, 8]

    def test_singular_run_is_partial(self, tmp_path, tiny_settings):
        config = ExperimentConfig.from_settings(tiny_settings(tracers={'enabled': False}))
        ens = ParticleEnsemble(np.array([[0.0, 0.0, 0.0], [np.inf, 0.0, 0.0]]), np.zeros((2, 3)), np.ones(2))
        artifacts = run_simulation(config, ensemble=ens)
        assert artifacts.status == 'partial'
        assert artifacts.failure['step'] == 0
        assert not artifacts.passed

        store = ArtifactStore(tmp_path)
        run_id = store.create_run('simulate', tmp_path / 'partial')
        directory = write_run_artifacts(artifacts, store, run_id, config)
        assert (directory / PARTIAL_MARKER).exists()
        manifest = yaml.safe_load((directory / 'manifest.yaml').read_text())
        assert manifest['status'] == 'partial'

    def test_written_run(self, tmp_path, free_stream_config):
        artifacts = run_simulation(free_stream_config)
        store = ArtifactStore(tmp_path)
        run_id = store.create_run('simulate', tmp_path / 'run')
        directory = write_run_artifacts(artifacts, store, run_id, free_stream_config)
        manifest = yaml.safe_load((directory / 'manifest.yaml').read_text())
        assert manifest['status'] == 'complete'
        assert manifest['package'] == 'vpflow'
        assert manifest['seed'] == 5
        assert 'diagnostics.csv' in manifest['files']
        assert (directory / 'history' / 'manifest.yaml').exists()
        assert (directory / 'field_02.vlgf').exists()
        assert not (directory / PARTIAL_MARKER).exists()
        assert (directory / 'diagnostics.csv').read_text().startswith('# t [time]')


class TestReporting:
    def test_metric_shape_is_checked(self):
        report = ExperimentReport('suite', [1.0, 2.0], [1, 2, 3])
        with pytest.raises(ValueError):
            report.add_metric('x', [[1.0, 2.0]])

    def test_median_over_seeds(self):
        report = ExperimentReport('suite', [1.0, 2.0], [1, 2, 3])
        median = report.add_metric('x', [[1.0, 5.0], [2.0, 4.0], [9.0, 3.0]])
        np.testing.assert_array_equal(median, [2.0, 4.0])

    def test_degenerate_sequence_checks_constancy(self):
        assert monotone_verdict('v', 'm', [0.3, 0.3, 0.3], degenerate=True).passed
        assert not monotone_verdict('v', 'm', [0.3, 0.2], degenerate=True).passed
        assert monotone_verdict('v', 'm', [0.3, 0.2, 0.2]).passed

    def test_member_pool_keeps_order(self):
        jobs = [lambda k=k: k * k for k in range(6)]
        assert run_members(jobs, threads=3) == [0, 1, 4, 9, 16, 25]

    def test_report_files(self, tmp_path, tiny_settings):
        config = ExperimentConfig.from_settings(tiny_settings())
        report = ExperimentReport('suite', [0.2, 0.1], [1, 2, 3])
        report.add_metric('deviation', [[0.5, 0.1], [0.4, 0.2], [0.6, 0.0]])
        report.add_verdict(monotone_verdict('decreases', 'deviation', report.median('deviation')))
        store = ArtifactStore(tmp_path)
        run_id = store.create_run('suite', tmp_path / 'suite')
        directory = write_report(report, config, store, run_id, {'deviation': 'phase-space volume'})
        lines = (directory / 'deviation.csv').read_text().splitlines()
        assert lines[0] == '# seed, then deviation [phase-space volume] per member'
        assert lines[-1].startswith('median,')
        verdicts = yaml.safe_load((directory / 'verdicts.yaml').read_text())
        assert verdicts['passed'] is True


class TestStrongStability:
    def test_degenerate_sequence_gives_zero_deviation(self, tiny_settings):
        config = ExperimentConfig.from_settings(tiny_settings(experiment={'sequence': [0.1, 0.1]}))
        report = strong_stability_suite(config)
        assert report.status == 'complete'
        assert not report.metrics['deviation_s=0.1'].any()
        assert not report.metrics['field_difference'].any()
        verdicts = {v.name: v for v in report.verdicts}
        assert verdicts['deviation_decreases_s=0.1'].passed
        assert verdicts['data_converges'].passed
        assert verdicts['chebyshev_bridge'].passed

    def test_finest_member_is_the_reference(self, tiny_settings):
        config = ExperimentConfig.from_settings(tiny_settings(
            experiment={'sequence': [0.4, 0.2, 0.1]}, run={'seeds': [1]},
        ))
        report = strong_stability_suite(config)
        assert report.metrics['phi_delta_final'][0, -1] == 0.0
        assert report.metrics['data_distance'].shape == (1, 3)
        assert any(name.startswith('translation_h=') for name in report.metrics)

    def test_every_member_gets_a_stability_report(self, tmp_path, tiny_settings):
        config = ExperimentConfig.from_settings(tiny_settings(
            experiment={'sequence': [0.2, 0.1]}, run={'seeds': [1]},
        ))
        report = strong_stability_suite(config)
        assert sorted(report.stability) == ['seed=1/member=0.1', 'seed=1/member=0.2']
        assert report.stability['seed=1/member=0.1'].field_difference == 0.0
        store = ArtifactStore(tmp_path)
        run_id = store.create_run('strong', tmp_path / 'strong')
        directory = write_report(report, config, store, run_id)
        member = directory / 'stability' / 'seed=1' / 'member=0.2'
        assert (member / 'stability.csv').is_file()
        assert (member / 'stability.yaml').is_file()

    def test_increasing_widths_are_refused(self, tiny_settings):
        config = ExperimentConfig.from_settings(tiny_settings(experiment={'sequence': [0.1, 0.2]}))
        with pytest.raises(ConfigurationError):
            strong_stability_suite(config)

    def test_suite_needs_tracers(self, tiny_settings):
        config = ExperimentConfig.from_settings(tiny_settings(
            experiment={'sequence': [0.2, 0.1]}, tracers={'enabled': False},
        ))
        with pytest.raises(ConfigurationError, match='tracers'):
            strong_stability_suite(config)


class TestWeakStability:
    def test_reference_member_is_exact(self, tiny_settings):
        config = ExperimentConfig.from_settings(tiny_settings(
            experiment={'sequence': [0, 2, 8]}, run={'seeds': [1, 2]},
        ))
        report = weak_stability_suite(config)
        assert report.metrics['data_l1'][:, 0].tolist() == [0.0, 0.0]
        assert np.all(report.metrics['data_l1'][:, 1:] > 0)
        verdicts = {v.name: v for v in report.verdicts}
        assert verdicts['reference_member_exact'].passed
        assert report.extras['moment_dictionary']['size'] == 5

    def test_members_are_compared_through_stability_reports(self, tiny_settings):
        config = ExperimentConfig.from_settings(tiny_settings(
            experiment={'sequence': [0, 2]}, run={'seeds': [1]},
        ))
        report = weak_stability_suite(config)
        assert sorted(report.stability) == ['seed=1/member=0', 'seed=1/member=2']

    def test_moment_rate_holds_for_decaying_errors(self):
        verdict = moment_rate_verdict([0, 1, 2, 4], [0.0, 0.4, 0.1, 0.01], slack=2.0)
        assert verdict.passed
        assert verdict.value == pytest.approx([0.4, 0.2, 0.04])

    def test_moment_rate_fails_for_slow_decay(self):
        assert not moment_rate_verdict([0, 1, 16], [0.0, 0.4, 0.2], slack=2.0).passed

    def test_zero_first_moment_error_is_inconclusive(self):
        verdict = moment_rate_verdict([0, 1, 16], [0.0, 0.0, 0.0], slack=2.0)
        assert not verdict.passed
        assert 'inconclusive' in verdict.detail

    def test_flows_without_deviation_are_inconclusive(self):
        verdict = flow_drop_verdict([0, 1, 16], [0.0, 0.0, 0.0], 0.2, 1.0)
        assert verdict.passed is False
        assert 'inconclusive' in verdict.detail

    def test_flow_drop(self):
        assert flow_drop_verdict([0, 1, 16], [0.0, 0.5, 0.05], 0.2, 1.0).passed
        assert not flow_drop_verdict([0, 1, 16], [0.0, 0.5, 0.2], 0.2, 1.0).passed

    def test_x1_resolved_members(self, tiny_settings):
        config = ExperimentConfig.from_settings(tiny_settings(
            experiment={'sequence': [0, 1, 4]}, run={'seeds': [1], 'count': 64},
            datum={'sampling': 'x1-resolved', 'x1_points': 32},
        ))
        report = weak_stability_suite(config)
        moments = report.median('moment_max')
        assert moments[0] == 0.0
        assert 0.0 < moments[2] < moments[1]

    def test_wavenumbers_must_be_integers(self, tiny_settings):
        config = ExperimentConfig.from_settings(tiny_settings(experiment={'sequence': [0, 1.5, 3]}))
        with pytest.raises(ConfigurationError):
            weak_stability_suite(config)

    def test_unknown_moment(self, gaussian_ensemble):
        with pytest.raises(ConfigurationError, match='valid moments'):
            weak_moment(gaussian_ensemble, 'x7')


class TestExistence:
    def test_attractive_case_is_refused(self, tiny_settings):
        config = ExperimentConfig.from_settings(tiny_settings(
            run={'omega': -1}, experiment={'sequence': [0.2, 0.1]},
        ))
        with pytest.raises(ConfigurationError, match='repulsive'):
            mollified_existence_suite(config)

    def test_members_conserve_energy(self, tiny_settings):
        config = ExperimentConfig.from_settings(tiny_settings(
            experiment={'sequence': [0.2, 0.1]}, run={'seeds': [1]},
        ))
        report = mollified_existence_suite(config)
        verdicts = {v.name: v for v in report.verdicts}
        assert verdicts['energy_conserved'].passed
        assert verdicts['energy_inequality'].passed
        assert report.metrics['cauchy_deviation'][0, -1] == 0.0
        assert report.metrics['mass'][0].tolist() == pytest.approx([1.0, 1.0])


class TestFunctionalRun:
    def test_functionals_of_one_run(self, tiny_settings):
        config = ExperimentConfig.from_settings(tiny_settings())
        summary = analyze_flow_functionals(config)
        assert summary.curve_nonincreasing
        assert summary.beta_value >= summary.curve.covered_measure
        assert summary.hls is not None
        assert summary.r1 is None
        assert summary.to_dict()['r'] == 2.0

    def test_attractive_run_skips_beta(self, tiny_settings):
        config = ExperimentConfig.from_settings(tiny_settings(run={'omega': -1}))
        summary = analyze_flow_functionals(config)
        assert summary.beta_value is None
        assert summary.fit is None

    def test_doubling_the_particles_keeps_beta(self, tiny_settings):
        config = ExperimentConfig.from_settings(tiny_settings())
        summary = analyze_flow_functionals(config, check_doubling=True)
        assert summary.doubling['doubled_value'] > 0.0
        assert summary.doubling['relative_change'] < DOUBLING_TOLERANCE


class TestKernelTest:
    def test_three_dimensional_slope(self):
        result = kernel_translation_test(1.25, 3, levels=5)
        assert result.alpha == pytest.approx(0.4)
        assert result.passed
        assert result.to_dict()['passed'] is True

    def test_exponent_out_of_range(self):
        with pytest.raises(ConfigurationError):
            kernel_translation_test(2.0, 2)
