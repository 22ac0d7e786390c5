"""Exception hierarchy shared by every vpflow module."""
from typing import Any, Optional


class VPFlowError(Exception):
    """Base class for vpflow failures"""


class ConfigurationError(VPFlowError, ValueError):
    """Invalid settings, parameters or physics guards"""


class UnsupportedDimensionError(ConfigurationError):
    """Operation not defined for the requested spatial dimension"""


class SeedingError(VPFlowError, ValueError):
    """Seeds do not cover a region, or two histories were seeded differently"""


class HorizonError(VPFlowError, ValueError):
    """Requested time lies outside a stored flow horizon"""


class SingularEncounterError(VPFlowError, RuntimeError):
    """Non-finite field value met while advancing the characteristics"""

    def __init__(self, message: str, step: int, partial: Optional[Any] = None):
        super().__init__(message)
        self.step = step
        self.partial = partial
