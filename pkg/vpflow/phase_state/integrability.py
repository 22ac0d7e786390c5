"""Equi-integrability profile: the most mass a phase-space set of given measure can carry."""
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from vpflow.errors import ConfigurationError
from vpflow.phase_state.ensemble import ParticleEnsemble, total_mass


@dataclass
class IntegrabilityProfile:
    fractions: np.ndarray
    captured_mass: np.ndarray
    total_mass: float
    box_volume: float
    cells: int


def equi_integrability_profile(ens: ParticleEnsemble, fractions: Sequence[float],
                               bins: int = 8, half_width: Optional[float] = None) -> IntegrabilityProfile:
    """Largest mass carried by a phase-space set of measure phi * |box|, per phi.

    The supremum over measurable sets is attained on superlevel sets of the
    density, so the mass is binned on a 2N-dimensional histogram of the
    reference box and the heaviest cells filling the requested volume are
    summed.
    """
    fractions = np.asarray(fractions, dtype=float)
    if np.any(fractions <= 0) or np.any(fractions > 1):
        raise ConfigurationError("set-measure fractions must lie in (0, 1]")
    if half_width is None:
        half_width = float(np.abs(ens.phase).max()) * (1.0 + 1e-9)
    dims = 2 * ens.dim
    edges = [np.linspace(-half_width, half_width, bins + 1)] * dims
    hist, _ = np.histogramdd(ens.phase, bins=edges, weights=ens.weights)
    ordered = np.sort(hist.ravel())[::-1]
    cumulative = np.concatenate([[0.0], np.cumsum(ordered)])
    n_cells = ordered.size
    taken = np.minimum(np.ceil(fractions * n_cells - 1e-9).astype(int), n_cells)
    return IntegrabilityProfile(
        fractions=fractions,
        captured_mass=cumulative[taken],
        total_mass=total_mass(ens),
        box_volume=(2.0 * half_width) ** dims,
        cells=n_cells,
    )
