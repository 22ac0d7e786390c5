"""Shared fixtures: tiny ensembles, kernels and settings trees."""
import numpy as np
import pytest

from vpflow.config.simulation_settings import merge_run_settings
from vpflow.field.background import BackgroundSpec
from vpflow.field.solver import KernelConfig
from vpflow.phase_state.sampling import InitialDatumSpec, sample_ensemble

TINY_SETTINGS = {
    'run': {'dim': 3, 'dt': 0.05, 'T': 0.1, 'count': 40, 'seed': 5, 'seeds': [1, 2, 3]},
    'kernel': {'softening': 0.2},
    'grid': {'half_width': 4.0, 'cells': 4},
    'tracers': {'half_width': 1.0, 'points_per_axis': 2},
    'functionals': {'r': 2.0, 'lambda': 8.0},
    'experiment': {'shifts': [2.0, 4.0], 'histogram_bins': 3},
}


@pytest.fixture(autouse=True)
def output_root(tmp_path, monkeypatch):
    """Keep every default output directory inside the test's tmp_path"""
    root = tmp_path / 'runs'
    monkeypatch.setenv('VPFLOW_OUTPUT_ROOT', str(root))
    return root


@pytest.fixture
def tiny_settings():
    def build(**sections):
        return merge_run_settings(TINY_SETTINGS, sections)
    return build


@pytest.fixture
def gaussian_ensemble():
    spec = InitialDatumSpec('gaussian', dim=3, mass=1.0, parameters={'sigma_x': 1.0, 'sigma_v': 1.0})
    return sample_ensemble(spec, 100, seed=3)


@pytest.fixture
def kernel3():
    return KernelConfig(dim=3, softening=0.2)


@pytest.fixture
def no_background():
    return BackgroundSpec('zero', dim=3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
