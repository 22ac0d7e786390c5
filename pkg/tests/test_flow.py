"""
Tests for the characteristic flow: Verlet steps, self-consistent runs, stored histories and flow measures.
"""
import numpy as np
import pytest

from vpflow.errors import ConfigurationError, HorizonError, SeedingError, SingularEncounterError
from vpflow.field.background import BackgroundSpec
from vpflow.field.solver import KernelConfig, total_energy
from vpflow.flow.history import backward_eval, push_forward_eval, read_history, write_history
from vpflow.flow.integrator import advance, frozen_field, leapfrog, step_jacobian_determinant
from vpflow.flow.measures import (
    FunctionalParams,
    compressibility_estimate,
    sublevel_mask,
    superlevel_measure,
)
from vpflow.phase_state.ensemble import ParticleEnsemble, momentum, total_mass
from vpflow.phase_state.sampling import InitialDatumSpec, datum_density, lattice_seeding, sample_ensemble

COMOVING_1D = BackgroundSpec('comoving', 1)


@pytest.fixture
def line_ensemble():
    spec = InitialDatumSpec('gaussian', dim=1, parameters={'sigma_x': 0.5, 'sigma_v': 0.5})
    return sample_ensemble(spec, 20, seed=2)


@pytest.fixture
def free_history(line_ensemble):
    """Free streaming in N=1 with an 8 x 8 tracer lattice on [-1, 1]^2"""
    return advance(line_ensemble, COMOVING_1D, 1, KernelConfig(dim=1, softening=0.1), 0.25, 1.0,
                   tracers=lattice_seeding(1, 1.0, 8))


class TestVerletStep:
    """Kick-drift-kick in a frozen field"""

    def test_forward_then_backward_retraces(self, gaussian_ensemble, no_background, rng):
        field = frozen_field(gaussian_ensemble, no_background, 1, KernelConfig(dim=3, softening=0.3))
        x0 = rng.normal(size=(10, 3))
        v0 = rng.normal(size=(10, 3))
        x, v, _ = leapfrog(x0, v0, field, 0.05, steps=10)
        x_back, v_back, _ = leapfrog(x, v, field, -0.05, steps=10)
        np.testing.assert_allclose(x_back, x0, atol=1e-10)
        np.testing.assert_allclose(v_back, v0, atol=1e-10)

    def test_step_preserves_phase_volume(self, gaussian_ensemble, no_background, rng):
        field = frozen_field(gaussian_ensemble, no_background, 1, KernelConfig(dim=3, softening=0.5))
        det = step_jacobian_determinant(rng.normal(size=(100, 3)), rng.normal(size=(100, 3)), field, 0.05)
        np.testing.assert_allclose(det, 1.0, atol=1e-9)

    def test_negative_step_count(self, gaussian_ensemble, no_background):
        field = frozen_field(gaussian_ensemble, no_background, 1, KernelConfig(dim=3, softening=0.3))
        with pytest.raises(ConfigurationError):
            leapfrog(np.zeros((1, 3)), np.zeros((1, 3)), field, 0.1, steps=-1)


class TestAdvance:
    """Self-consistent runs on [0, T]"""

    def test_mass_is_exactly_conserved(self, gaussian_ensemble, kernel3, no_background):
        history = advance(gaussian_ensemble, no_background, 1, kernel3, 0.05, 0.5)
        masses = [total_mass(history.ensemble_at(k)) for k in range(history.samples)]
        assert len(set(masses)) == 1
        assert history.status == 'complete'

    def test_free_streaming_is_exact(self, line_ensemble):
        history = advance(line_ensemble, COMOVING_1D, 1, KernelConfig(dim=1, softening=0.1), 0.1, 1.0)
        for k, t in enumerate(history.times):
            np.testing.assert_allclose(history.positions[k],
                                       line_ensemble.positions + t * line_ensemble.velocities, atol=1e-12)
        np.testing.assert_array_equal(history.velocities[-1], line_ensemble.velocities)

    def test_energy_is_nearly_conserved(self, gaussian_ensemble, kernel3, no_background):
        history = advance(gaussian_ensemble, no_background, 1, kernel3, 0.01, 0.2)
        energies = np.array([total_energy(history.ensemble_at(k), no_background, 1, kernel3)
                             for k in range(history.samples)])
        assert np.max(np.abs(energies - energies[0])) / abs(energies[0]) < 1e-4

    def test_tracers_do_not_source_the_field(self, gaussian_ensemble, kernel3, no_background):
        plain = advance(gaussian_ensemble, no_background, 1, kernel3, 0.05, 0.2)
        traced = advance(gaussian_ensemble, no_background, 1, kernel3, 0.05, 0.2,
                         tracers=lattice_seeding(3, 1.0, 2))
        np.testing.assert_allclose(traced.positions, plain.positions, rtol=1e-12, atol=1e-14)
        assert traced.tracer_positions.shape == (plain.samples, 64, 3)

    def test_energy_drift_is_second_order(self, no_background):
        spec = InitialDatumSpec('gaussian', dim=3, parameters={'sigma_x': 0.5, 'sigma_v': 0.5})
        ens = sample_ensemble(spec, 30, seed=12)
        cfg = KernelConfig(dim=3, softening=0.3)

        def drift(dt, every):
            history = advance(ens, no_background, 1, cfg, dt, 0.8, sample_every=every)
            energies = np.array([total_energy(history.ensemble_at(k), no_background, 1, cfg)
                                 for k in range(history.samples)])
            return np.max(np.abs(energies - energies[0]))

        assert 3.0 <= drift(0.04, 1) / drift(0.02, 2) <= 5.0

    def test_reversed_run_returns_to_the_start(self, gaussian_ensemble, kernel3, no_background):
        forward = advance(gaussian_ensemble, no_background, 1, kernel3, 0.05, 0.5)
        end = forward.ensemble_at(forward.samples - 1)
        back = advance(end.with_state(end.positions, -end.velocities), no_background, 1, kernel3, 0.05, 0.5)
        np.testing.assert_allclose(back.positions[-1], gaussian_ensemble.positions, atol=1e-9)
        np.testing.assert_allclose(back.velocities[-1], -gaussian_ensemble.velocities, atol=1e-9)

    def test_momentum_is_conserved(self, gaussian_ensemble, kernel3, no_background):
        history = advance(gaussian_ensemble, no_background, 1, kernel3, 0.05, 0.5)
        start = momentum(history.ensemble_at(0))
        for k in range(history.samples):
            np.testing.assert_allclose(momentum(history.ensemble_at(k)), start, atol=1e-12)

    def test_sample_every_keeps_the_final_step(self, gaussian_ensemble, kernel3, no_background):
        history = advance(gaussian_ensemble, no_background, 1, kernel3, 0.1, 0.5, sample_every=2)
        np.testing.assert_allclose(history.times, [0.0, 0.2, 0.4, 0.5])

    def test_horizon_shorter_than_step(self, gaussian_ensemble, kernel3, no_background):
        with pytest.raises(ConfigurationError):
            advance(gaussian_ensemble, no_background, 1, kernel3, 0.1, 0.05)

    def test_singular_state_returns_partial_history(self, kernel3, no_background):
        positions = np.array([[0.0, 0.0, 0.0], [np.inf, 0.0, 0.0]])
        ens = ParticleEnsemble(positions, np.zeros((2, 3)), np.ones(2))
        with pytest.raises(SingularEncounterError) as info:
            advance(ens, no_background, 1, kernel3, 0.1, 0.5)
        assert info.value.step == 0
        assert info.value.partial.status == 'partial'
        assert info.value.partial.samples == 1


class TestHistory:
    """Stored trajectories, persistence and evaluation"""

    def test_written_history_reads_back(self, tmp_path, free_history):
        write_history(free_history, tmp_path / 'history')
        back = read_history(tmp_path / 'history')
        np.testing.assert_array_equal(back.times, free_history.times)
        np.testing.assert_array_equal(back.positions, free_history.positions)
        np.testing.assert_array_equal(back.tracer_velocities, free_history.tracer_velocities)
        assert back.kernel == free_history.kernel
        assert back.background.kind == 'comoving'
        assert back.tracer_cell_volume == free_history.tracer_cell_volume

    def test_unknown_directory_format(self, tmp_path):
        (tmp_path / 'manifest.yaml').write_text('format: something-else\nversion: 1\n')
        with pytest.raises(ConfigurationError):
            read_history(tmp_path)

    def test_backward_evaluation_returns_initial_states(self, free_history):
        start = backward_eval(free_history, 0.0, free_history.horizon)
        np.testing.assert_array_equal(start, free_history.trajectories()[0])

    def test_state_beyond_horizon(self, free_history):
        with pytest.raises(HorizonError):
            free_history.state_at(free_history.horizon + 1.0)

    def test_state_between_samples_is_interpolated(self, free_history):
        mid = free_history.state_at(0.125)
        expected = 0.5 * (free_history.trajectories()[0] + free_history.trajectories()[1])
        np.testing.assert_allclose(mid, expected)

    def test_push_forward_carries_the_datum(self, kernel3, no_background):
        spec = InitialDatumSpec('gaussian', dim=3, parameters={'sigma_x': 0.5, 'sigma_v': 0.5})
        ens = sample_ensemble(spec, 30, seed=8)
        history = advance(ens, no_background, 1, kernel3, 0.05, 0.5)
        f0 = datum_density(spec)
        result = push_forward_eval(history, f0, history.horizon, history.positions[-1], history.velocities[-1])
        np.testing.assert_allclose(result.values, f0(ens.positions, ens.velocities), rtol=1e-6)

    def test_push_forward_needs_every_step(self, gaussian_ensemble, kernel3, no_background):
        history = advance(gaussian_ensemble, no_background, 1, kernel3, 0.1, 0.4, sample_every=2)
        f0 = datum_density(InitialDatumSpec('gaussian', dim=3))
        with pytest.raises(ConfigurationError):
            push_forward_eval(history, f0, 0.4, np.zeros((1, 3)), np.zeros((1, 3)))


class TestMeasures:
    """Sublevel sets, superlevel curves and compressibility on the tracer lattice"""

    def test_superlevel_curve_is_nonincreasing(self, free_history):
        curve = superlevel_measure(free_history, 1.0, [0.5, 1.0, 1.5, 2.0, 3.0])
        assert np.all(np.diff(curve.measures) <= 0)
        assert curve.measures[0] <= curve.covered_measure

    def test_superlevel_needs_tracers(self, line_ensemble):
        history = advance(line_ensemble, COMOVING_1D, 1, KernelConfig(dim=1, softening=0.1), 0.25, 0.5)
        with pytest.raises(SeedingError):
            superlevel_measure(history, 1.0, [2.0])

    def test_sublevel_mask_with_large_threshold(self, free_history):
        assert sublevel_mask(free_history, 1e6, 'tracers').all()

    def test_initial_compressibility_ratio_is_one(self, free_history):
        boxes = [([-0.5, -0.5], [0.5, 0.5]), ([-2.0, -2.0], [-1.5, -1.5])]
        estimate = compressibility_estimate(free_history, boxes, samples=[0])
        assert estimate.ratios[0, 0] == pytest.approx(1.0)
        assert estimate.flagged == [1]

    def test_self_consistent_flow_keeps_phase_volume(self):
        spec = InitialDatumSpec('gaussian', dim=1, parameters={'sigma_x': 0.5, 'sigma_v': 0.5})
        history = advance(sample_ensemble(spec, 40, seed=5), BackgroundSpec('zero', 1), 1,
                          KernelConfig(dim=1, softening=0.2), 0.05, 0.5, tracers=lattice_seeding(1, 2.0, 60))
        estimate = compressibility_estimate(history, [([-0.5, -0.5], [0.5, 0.5])])
        assert estimate.flagged == []
        assert 0.9 <= estimate.min_ratio <= estimate.max_ratio <= 1.1

    def test_alpha_range(self):
        with pytest.raises(ConfigurationError):
            FunctionalParams(alpha=0.4)
