"""Elliptic Calogero-Moser systems for arbitrary root systems, with their Lax pairs."""

from . import elliptic, rootsys
from .errors import (
    CMError,
    DegenerateLatticeError,
    EnumerationBoundError,
    PoleProximityError,
    RootSystemMismatchError,
    StepSizeUnderflowError,
    TorsionPoleError,
    UnsupportedRepresentationError,
    WallProximityError,
)

__version__ = "0.1.0"
