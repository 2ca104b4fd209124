"""Numerical lab for the linearized active-suspension mode equation on the sphere."""
from . import diagnostics, dispersion, dynamics, harmonics, volterra
from .errors import *  # noqa: F401,F403

__version__ = "0.1.0"
