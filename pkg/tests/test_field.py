"""
Tests for the softened kernels, the field solver and grid diagnostics.
"""
import numpy as np
import pytest

from vpflow.errors import ConfigurationError
from vpflow.field.background import SOURCE_CACHE_SIZE, BackgroundSpec, _build_sources, background_sources
from vpflow.field.diagnostics import (
    helmholtz_identity_residual,
    hls_ratio,
    lp_norm,
    poisson_residual,
    potential_energy,
    source_l1_norm,
    translation_modulus,
    weak_quasinorm,
)
from vpflow.field.kernels import coulomb_kernel, green_function, kernel_matrix, mollifier
from vpflow.field.solver import (
    KernelConfig,
    dt_field,
    field_gradient,
    mollified_density,
    pair_potential_energy,
    potential,
    solve_field,
)
from vpflow.field.translation import check_exponent, kernel_translation_error, translation_table
from vpflow.phase_state.deposition import deposit_current
from vpflow.phase_state.ensemble import ParticleEnsemble
from vpflow.phase_state.grid import GridField, GridSpec
from vpflow.phase_state.sampling import InitialDatumSpec, sample_ensemble


def _ensemble(positions, weights, dim):
    positions = np.asarray(positions, dtype=float).reshape(-1, dim)
    return ParticleEnsemble(positions, np.zeros_like(positions), np.asarray(weights, dtype=float))


class TestKernels:
    """Closed forms of the Plummer-softened Green function derivatives"""

    @pytest.mark.parametrize('dim', [1, 2, 3])
    def test_field_is_minus_gradient_of_green_function(self, dim, rng):
        d = rng.normal(size=(20, dim))
        eps, h = 0.3, 1e-6
        grad = np.empty_like(d)
        for j in range(dim):
            e = np.zeros(dim)
            e[j] = h
            grad[:, j] = (green_function(d + e, dim, eps) - green_function(d - e, dim, eps)) / (2 * h)
        np.testing.assert_allclose(coulomb_kernel(d, dim, eps), -grad, rtol=1e-6, atol=1e-9)

    @pytest.mark.parametrize('dim', [2, 3])
    def test_unsoftened_matrix_is_trace_free(self, dim, rng):
        K = kernel_matrix(rng.normal(size=(50, dim)), dim)
        trace = np.trace(K, axis1=1, axis2=2)
        np.testing.assert_allclose(trace, 0.0, atol=1e-12 * np.abs(K).max())

    @pytest.mark.parametrize('dim', [1, 2, 3])
    def test_softened_trace_is_minus_mollifier(self, dim, rng):
        d = rng.normal(size=(50, dim))
        trace = np.trace(kernel_matrix(d, dim, 0.2), axis1=1, axis2=2)
        np.testing.assert_allclose(trace, -mollifier(d, dim, 0.2), rtol=1e-10)

    def test_point_source_matches_coulomb_field(self):
        eps = 0.01
        cfg = KernelConfig(dim=3, softening=eps)
        targets = np.array([[0.2, 0.0, 0.0], [0.0, 0.5, 0.0], [1.0, 1.0, 1.0]])
        E = solve_field(_ensemble([0.0, 0.0, 0.0], [1.0], 3), BackgroundSpec('zero', 3), 1, cfg, targets)
        r = np.linalg.norm(targets, axis=1)
        exact = targets / (4.0 * np.pi * r[:, None] ** 3)
        np.testing.assert_allclose(E, exact, rtol=1e-2)

    @pytest.mark.parametrize('x', [-2.0, -0.5, 0.5, 2.0])
    def test_line_charge_field_is_half_sign(self, x):
        cfg = KernelConfig(dim=1, softening=1e-3)
        E = solve_field(_ensemble([0.0], [1.0], 1), BackgroundSpec('zero', 1), 1, cfg, np.array([[x]]))
        assert E[0, 0] == pytest.approx(0.5 * np.sign(x), rel=1e-5)

    def test_flux_through_unit_sphere_counts_enclosed_charge(self):
        charges = _ensemble([[0.0, 0.0, 0.3], [0.5, 0.0, 0.0], [0.0, 0.0, 2.0]], [1.0, 0.5, 2.0], 3)
        u = -1.0 + (np.arange(400) + 0.5) * 2.0 / 400
        phi = (np.arange(128) + 0.5) * 2.0 * np.pi / 128
        cos_t, ph = np.meshgrid(u, phi, indexing='ij')
        sin_t = np.sqrt(1.0 - cos_t ** 2)
        normals = np.stack([sin_t * np.cos(ph), sin_t * np.sin(ph), cos_t], axis=-1).reshape(-1, 3)
        E = solve_field(charges, BackgroundSpec('zero', 3), 1, KernelConfig(dim=3, softening=1e-3), normals)
        flux = np.sum(E * normals) * (2.0 / 400) * (2.0 * np.pi / 128)
        assert flux == pytest.approx(1.5, rel=1e-3)

    @pytest.mark.parametrize('omega', [1, -1])
    def test_point_potential(self, omega):
        targets = np.array([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]])
        U = potential(_ensemble([0.0, 0.0, 0.0], [1.0], 3), BackgroundSpec('zero', 3), omega,
                      KernelConfig(dim=3, softening=1e-4), targets)
        np.testing.assert_allclose(U, omega / (4.0 * np.pi * np.array([1.0, 2.0])), rtol=1e-6)


class TestSolver:
    """Direct sums and grid convolution of signed sources"""

    def test_omega_must_be_sign(self, gaussian_ensemble, kernel3, no_background):
        with pytest.raises(ConfigurationError):
            solve_field(gaussian_ensemble, no_background, 2, kernel3, np.zeros((1, 3)))

    def test_attractive_field_flips_sign(self, gaussian_ensemble, kernel3, no_background, rng):
        targets = rng.normal(size=(5, 3))
        repulsive = solve_field(gaussian_ensemble, no_background, 1, kernel3, targets)
        attractive = solve_field(gaussian_ensemble, no_background, -1, kernel3, targets)
        np.testing.assert_array_equal(attractive, -repulsive)

    def test_grid_convolution_matches_direct_sum_on_nodes(self):
        grid = GridSpec.cube(3, 1.0, 8)
        sources = _ensemble([[0.0, 0.0, 0.0], [0.25, -0.5, 0.5], [-0.75, 0.25, 0.0]], [1.0, 0.5, 2.0], 3)
        bg = BackgroundSpec('zero', 3)
        direct = solve_field(sources, bg, 1, KernelConfig(dim=3, softening=0.1, grid=grid))
        convolved = solve_field(sources, bg, 1,
                                KernelConfig(dim=3, softening=0.1, method='grid-convolution', grid=grid))
        scale = np.abs(direct.values).max()
        np.testing.assert_allclose(convolved.values, direct.values, rtol=0, atol=1e-10 * scale)

    def test_result_does_not_depend_on_threads(self, gaussian_ensemble, no_background, rng):
        targets = rng.normal(size=(300, 3))
        one = solve_field(gaussian_ensemble, no_background, 1,
                          KernelConfig(dim=3, softening=0.2, chunk_pairs=500), targets)
        many = solve_field(gaussian_ensemble, no_background, 1,
                           KernelConfig(dim=3, softening=0.2, chunk_pairs=500, threads=4), targets)
        np.testing.assert_array_equal(one, many)

    def test_comoving_background_gives_zero_field(self, gaussian_ensemble, kernel3, rng):
        E = solve_field(gaussian_ensemble, BackgroundSpec('comoving', 3), 1, kernel3, rng.normal(size=(10, 3)))
        assert not E.any()

    def test_neutral_background_cancels_far_field(self):
        bg = BackgroundSpec('table', 3, 1.0, {'positions': [[0.0, 0.0, 0.0]], 'weights': [1.0]})
        cfg = KernelConfig(dim=3, softening=0.1)
        E = solve_field(_ensemble([0.0, 0.0, 0.0], [1.0], 3), bg, 1, cfg, np.array([[3.0, 1.0, 0.0]]))
        np.testing.assert_allclose(E, 0.0, atol=1e-15)

    def test_background_quadrature_carries_its_mass(self):
        bg = BackgroundSpec('gaussian', 2, 1.5, {'sigma': 0.5})
        _, masses = background_sources(bg)
        assert masses.sum() == pytest.approx(1.5)
        assert np.all(masses >= 0)

    def test_trace_of_gradient_is_mollified_density(self, gaussian_ensemble, kernel3, rng):
        targets = rng.normal(size=(30, 3))
        for omega in (1, -1):
            grad = field_gradient(gaussian_ensemble, BackgroundSpec('zero', 3), kernel3, omega, targets)
            expected = omega * mollified_density(gaussian_ensemble, BackgroundSpec('zero', 3), kernel3, targets)
            np.testing.assert_allclose(np.trace(grad, axis1=1, axis2=2), expected, rtol=1e-10)

    def test_dt_field_matches_moving_sources(self, rng):
        cfg = KernelConfig(dim=2, softening=0.3)
        bg = BackgroundSpec('zero', 2)
        ens = ParticleEnsemble(rng.normal(size=(6, 2)), rng.normal(size=(6, 2)), np.full(6, 0.5))
        targets = rng.normal(size=(4, 2))
        delta = 1e-5
        ahead = ens.with_state(ens.positions + delta * ens.velocities, ens.velocities)
        behind = ens.with_state(ens.positions - delta * ens.velocities, ens.velocities)
        finite = (solve_field(ahead, bg, 1, cfg, targets) - solve_field(behind, bg, 1, cfg, targets)) / (2 * delta)
        np.testing.assert_allclose(dt_field(ens, 1, cfg, targets), finite, rtol=1e-6, atol=1e-9)

    def test_rotating_ring_field_is_steady_on_its_axis(self):
        angles = 2.0 * np.pi * np.arange(16) / 16
        positions = np.stack([np.cos(angles), np.sin(angles), np.zeros(16)], axis=1)
        velocities = np.stack([-np.sin(angles), np.cos(angles), np.zeros(16)], axis=1)
        ring = ParticleEnsemble(positions, velocities, np.full(16, 1.0 / 16))
        axis = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.5], [0.0, 0.0, -3.0]])
        np.testing.assert_allclose(dt_field(ring, 1, KernelConfig(dim=3, softening=0.1), axis), 0.0, atol=1e-14)

    def test_pair_energy_of_two_charges(self):
        eps, d = 0.1, 0.7
        ens = _ensemble([[0.0, 0.0, 0.0], [d, 0.0, 0.0]], [1.0, 1.0], 3)
        energy = pair_potential_energy(ens, BackgroundSpec('zero', 3), 1, KernelConfig(dim=3, softening=eps))
        assert energy == pytest.approx(1.0 / (4.0 * np.pi * np.sqrt(d ** 2 + eps ** 2)), rel=1e-12)

    def test_planar_potential_is_gauged_on_the_boundary(self):
        grid = GridSpec.cube(2, 2.0, 8)
        U = potential(_ensemble([0.1, -0.2], [1.0], 2), BackgroundSpec('zero', 2), 1,
                      KernelConfig(dim=2, softening=0.2, grid=grid))
        mask = np.ones(grid.node_shape, dtype=bool)
        mask[1:-1, 1:-1] = False
        assert U.values[mask].mean() == pytest.approx(0.0, abs=1e-12)


class TestGridDiagnostics:
    """Norms and identities on grid fields"""

    def test_poisson_residual_decreases_with_refinement(self):
        ens = _ensemble([0.0, 0.0, 0.0], [1.0], 3)
        residuals = [
            poisson_residual(ens, BackgroundSpec('zero', 3), 1,
                             KernelConfig(dim=3, softening=0.5, grid=GridSpec.cube(3, 2.0, cells)))
            for cells in (4, 8, 16)
        ]
        assert residuals[0] > residuals[1] > residuals[2]

    def test_weak_quasinorm_of_constant(self):
        grid = GridSpec.cube(2, 1.0, 4)
        ones = GridField(grid, np.ones(grid.node_shape), 'scalar')
        assert weak_quasinorm(ones, 2.0) == pytest.approx(np.sqrt(grid.node_count * grid.cell_volume))
        assert lp_norm(ones, np.inf) == 1.0

    def test_weak_quasinorm_is_homogeneous(self, rng):
        grid = GridSpec.cube(2, 1.0, 8)
        u = GridField(grid, rng.normal(size=grid.node_shape), 'scalar')
        scaled = GridField(grid, -3.0 * u.values, 'scalar')
        assert weak_quasinorm(scaled, 1.5) == pytest.approx(3.0 * weak_quasinorm(u, 1.5), rel=1e-12)

    def test_weak_quasinorm_of_indicator(self):
        grid = GridSpec.cube(2, 1.0, 8)
        values = np.zeros(grid.node_shape)
        values[2:5, 3:7] = 1.0
        indicator = GridField(grid, values, 'scalar')
        assert weak_quasinorm(indicator, 2.0) == pytest.approx(np.sqrt(12 * grid.cell_volume))

    def test_weak_quasinorm_of_critical_power(self):
        grid = GridSpec.cube(2, 1.0, 200)
        r = np.linalg.norm(grid.node_coordinates(), axis=-1)
        with np.errstate(divide='ignore'):
            values = np.where(r >= 0.2, 1.0 / r, 0.0)
        # sup over levels of t * |{|x| < 1/t}|^(1/2) is sqrt(pi) for |x|^-1 in the plane
        assert weak_quasinorm(GridField(grid, values, 'scalar'), 2.0) == pytest.approx(np.sqrt(np.pi), rel=0.05)

    def test_helmholtz_residual_is_unchanged_by_reversal(self):
        grid = GridSpec.cube(2, 2.0, 12)
        cfg = KernelConfig(dim=2, softening=0.3, grid=grid)
        bg = BackgroundSpec('zero', 2)
        spec = InitialDatumSpec('gaussian', dim=2, parameters={'sigma_x': 0.5, 'sigma_v': 1.0})
        ens = sample_ensemble(spec, 60, seed=3)
        reversed_ens = ens.with_state(ens.positions, -ens.velocities)
        E = solve_field(ens, bg, 1, cfg)
        forward = helmholtz_identity_residual(E, dt_field(ens, 1, cfg), deposit_current(ens, grid).field, 1)
        backward = helmholtz_identity_residual(E, dt_field(reversed_ens, 1, cfg),
                                               deposit_current(reversed_ens, grid).field, 1)
        assert not forward.degenerate
        assert backward.value == pytest.approx(forward.value, rel=1e-12)

    def test_potential_energy_of_uniform_field(self):
        grid = GridSpec.cube(2, 1.0, 4)
        values = np.zeros(grid.node_shape + (2,))
        values[..., 0] = 1.0
        assert potential_energy(GridField(grid, values, 'vector')) == pytest.approx(0.5 * 25 * 0.25)

    def test_helmholtz_residual_degenerate_for_zero_fields(self):
        zero = GridField.zeros(GridSpec.cube(2, 1.0, 4), 'vector')
        residual = helmholtz_identity_residual(zero, zero, zero, 1)
        assert residual.degenerate
        assert residual.value == 0.0

    def test_translation_modulus_of_linear_field(self):
        grid = GridSpec.cube(1, 1.0, 10)
        fld = GridField(grid, grid.node_points(), 'vector')
        lengths, values = translation_modulus(fld, [[0.2], [0.4]], 1.0)
        np.testing.assert_allclose(lengths, [0.2, 0.4])
        # |E(x + h) - E(x)| = h on the overlap of 11 - steps nodes
        np.testing.assert_allclose(values, [0.2 * 10 * 0.2, 0.4 * 9 * 0.2])

    def test_translation_shift_beyond_grid(self):
        grid = GridSpec.cube(1, 1.0, 4)
        with pytest.raises(ConfigurationError):
            translation_modulus(GridField.zeros(grid, 'vector'), [[3.0]], 1.5)

    def test_hls_ratio_is_bounded_over_random_densities(self, rng):
        grid = GridSpec.cube(3, 4.0, 16)
        cfg = KernelConfig(dim=3, softening=0.05, grid=grid)
        ratios = []
        for k in range(20):
            spec = InitialDatumSpec('gaussian', dim=3, parameters={
                'sigma_x': float(rng.uniform(0.4, 0.8)), 'center': rng.uniform(-0.5, 0.5, 3).tolist(),
            })
            E = solve_field(sample_ensemble(spec, 100, seed=k), BackgroundSpec('zero', 3), 1, cfg)
            ratios.append(hls_ratio(E, 1.0))
        assert max(ratios) <= 2.0 * np.median(ratios)

    def test_hls_ratio_needs_exponent_in_one_dimension(self):
        with pytest.raises(ConfigurationError):
            hls_ratio(GridField.zeros(GridSpec.cube(1, 1.0, 4), 'vector'), 1.0)


class TestBackgroundSources:
    """Quadrature charges of rho_b and the L1 norm of rho - rho_b"""

    def test_source_norm_without_background_is_the_mass(self, gaussian_ensemble, no_background):
        grid = GridSpec.cube(3, 2.0, 8)
        assert source_l1_norm(gaussian_ensemble, no_background, grid) == pytest.approx(1.0, rel=1e-12)

    def test_matching_background_cancels(self):
        point = [[0.1, -0.2, 0.3]]
        ens = _ensemble(point, [2.0], 3)
        bg = BackgroundSpec('table', 3, 2.0, {'positions': point, 'weights': [1.0]})
        grid = GridSpec.cube(3, 1.0, 4)
        assert source_l1_norm(ens, bg, grid) == pytest.approx(0.0, abs=1e-12)

    def test_separated_background_adds_its_mass(self):
        ens = _ensemble([[0.5, 0.5, 0.5]], [1.0], 3)
        bg = BackgroundSpec('table', 3, 1.0, {'positions': [[-0.5, -0.5, -0.5]], 'weights': [1.0]})
        assert source_l1_norm(ens, bg, GridSpec.cube(3, 1.0, 4)) == pytest.approx(2.0)

    def test_equal_specs_share_a_hash(self):
        a = BackgroundSpec('gaussian', 2, 1.0, {'sigma': 0.5})
        b = BackgroundSpec('gaussian', 2, 1.0, {'sigma': 0.5})
        assert a == b and hash(a) == hash(b)
        assert background_sources(a)[0] is background_sources(b)[0]

    def test_source_cache_is_bounded(self):
        assert _build_sources.cache_info().maxsize == SOURCE_CACHE_SIZE
        for k in range(SOURCE_CACHE_SIZE + 5):
            background_sources(BackgroundSpec('gaussian', 1, 1.0, {'sigma': 0.5 + 0.01 * k}))
        assert _build_sources.cache_info().currsize <= SOURCE_CACHE_SIZE


class TestTranslation:
    """||g(. + h) - g||_Lp ~ |h|^alpha with alpha = 1 - N + N/p"""

    @pytest.mark.slow
    @pytest.mark.parametrize('dim,p', [(3, 1.25), (2, 1.5), (1, 2.0)])
    def test_slope_matches_exponent(self, dim, p):
        _, _, fit = translation_table(p, dim, levels=5)
        alpha = 1.0 - dim + dim / p
        assert fit.slope == pytest.approx(alpha, rel=0.1)

    def test_error_grows_with_shift(self):
        assert kernel_translation_error(0.1, 1.25, 3) < kernel_translation_error(0.2, 1.25, 3)

    @pytest.mark.parametrize('dim,p', [(3, 1.5), (2, 2.0), (3, 1.0)])
    def test_exponent_out_of_range(self, dim, p):
        with pytest.raises(ConfigurationError):
            check_exponent(p, dim)
