"""Translation estimate of the unsoftened kernel: |h| against ||g(. + h) - g||_p."""
import logging
from dataclasses import dataclass
from typing import Any, Dict

import numpy as np

from vpflow.field.translation import SlopeFit, check_exponent, translation_exponent, translation_table
from vpflow.utils.manifest import to_plain

logger = logging.getLogger(__name__)

SLOPE_TOLERANCE = 0.1


@dataclass
class KernelTestResult:
    dim: int
    p: float
    lengths: np.ndarray
    values: np.ndarray
    fit: SlopeFit

    @property
    def alpha(self) -> float:
        return translation_exponent(self.p, self.dim)

    @property
    def relative_error(self) -> float:
        return abs(self.fit.slope - self.alpha) / self.alpha

    @property
    def passed(self) -> bool:
        return self.relative_error <= SLOPE_TOLERANCE

    def to_dict(self) -> Dict[str, Any]:
        return to_plain({
            'dim': self.dim,
            'p': self.p,
            'alpha': self.alpha,
            'slope': self.fit.slope,
            'intercept': self.fit.intercept,
            'rvalue': self.fit.rvalue,
            'relative_error': self.relative_error,
            'threshold': SLOPE_TOLERANCE,
            'passed': self.passed,
        })


def kernel_translation_test(p: float, dim: int, levels: int = 6) -> KernelTestResult:
    check_exponent(p, dim)
    lengths, values, fit = translation_table(p, dim, levels)
    result = KernelTestResult(dim, p, lengths, values, fit)
    logger.info("kernel test N=%d p=%g: slope %.4f, alpha %.4f", dim, p, fit.slope, result.alpha)
    return result
