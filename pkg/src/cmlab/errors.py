"""Exception hierarchy shared by all cmlab modules."""


class CMError(Exception):
    """Base class for every error raised by cmlab."""


class DegenerateLatticeError(CMError, ValueError):
    """The two half-periods are linearly dependent over the reals."""


class PoleProximityError(CMError, ValueError):
    """An argument lies inside the pole-exclusion radius of a lattice point."""

    def __init__(self, message, argument=None, distance=None):
        super().__init__(message)
        self.argument = argument
        self.distance = distance


class WallProximityError(CMError, ValueError):
    """A root value alpha(x) came within the wall threshold of a pole of the potential."""

    def __init__(self, message, root=None, value=None, t=None):
        super().__init__(message)
        self.root = root
        self.value = value
        self.t = t


class StepSizeUnderflowError(CMError, RuntimeError):
    """The adaptive integrator could not make progress."""


class RootSystemMismatchError(CMError, ValueError):
    """Operands belong to different root systems."""


class EnumerationBoundError(CMError, ValueError):
    """A brute-force enumeration would exceed its configured bound."""


class UnsupportedRepresentationError(CMError, ValueError):
    """A Lax builder cannot be realized on the requested representation."""


class TorsionPoleError(PoleProximityError):
    """z lies near an n-torsion point, where entries built from rho0(., n z) have poles."""

    def __init__(self, message, n=None, z=None, distance=None):
        super().__init__(message, argument=z, distance=distance)
        self.n = n
        self.z = z
