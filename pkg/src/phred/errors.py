"""Exception and warning types shared across the toolkit."""


class PhredError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatch(PhredError):
    pass


class BadParams(PhredError):
    pass


class StructureViolation(PhredError):
    """A port-Hamiltonian structural invariant failed.

    Parameters
    ----------
    kind : str
        One of ``"skewness"``, ``"symmetry"``, ``"PSD"``, ``"PD"``,
        ``"dimension"``.
    """

    def __init__(self, kind, message=""):
        self.kind = kind
        super().__init__(f"{kind}: {message}" if message else kind)


class SingularPencil(PhredError):
    """sE - A is (numerically) singular at the requested point."""

    def __init__(self, point=None, message=""):
        self.point = point
        text = message or "pencil is singular"
        if point is not None:
            text += f" at s = {point}"
        super().__init__(text)


class SingularTransform(PhredError):
    pass


class SingularReducedPencil(PhredError):
    pass


class SingularSchurBlock(PhredError):
    pass


class RankDeficient(PhredError):
    pass


class NotConjugateClosed(PhredError):
    pass


class RepeatedPoles(PhredError):
    pass


class UnstableMatrix(PhredError):
    pass


class SizeLimitExceeded(PhredError):
    pass


class NotConverged(PhredError):
    pass


class MaxIterationsExceeded(PhredError):
    """IRKA ran out of iterations (or stagnated) before converging.

    Carries the trace so far and the best iterate found.
    """

    def __init__(self, message, trace=None, best=None):
        self.trace = trace
        self.best = best
        super().__init__(message)


class DefectiveEigenproblem(PhredError):
    pass


class StepSizeUnderflow(PhredError):
    pass


class NonFiniteState(PhredError):
    pass


class PhredWarning(UserWarning):
    """Base class for toolkit warnings."""


class NearNonMinimal(PhredWarning):
    pass


class IllConditionedBasis(PhredWarning):
    """Q_r = V^T Q V condition estimate exceeded the warning threshold."""


class UnstableIterate(PhredWarning):
    """An unstructured IRKA iterate was not asymptotically stable."""


class GridPointSkipped(PhredWarning):
    """An isolated frequency-grid point hit a singular pencil."""
