"""Exception hierarchy shared by all modules.

Every error raised on purpose by the toolkit derives from :class:`L2Error`, so
callers (the CLI in particular) can separate domain failures from bugs.
"""

from __future__ import annotations


class L2Error(Exception):
    """Base class for all toolkit errors."""


# finite complexes
class ShapeMismatch(L2Error):
    pass


class CochainViolation(L2Error):
    pass


class DegreeOutOfRange(L2Error):
    pass


class GridOutOfRange(L2Error):
    pass


class NotExact(L2Error):
    pass


class HypothesisViolated(L2Error):
    pass


class NotHomotopyEquivalent(L2Error):
    pass


# Z^d group rings
class NotOnTorus(L2Error):
    pass


class NotSquare(L2Error):
    pass


class QuadratureNotConverged(L2Error):
    """Raised when refinement stops before the tolerance is met.

    The best available estimate and the last observed gap are attached so
    callers can still use (or report) them.
    """

    def __init__(self, message: str, estimate=None, gap=None):
        super().__init__(message)
        self.estimate = estimate
        self.gap = gap


class InsufficientPoints(L2Error):
    pass


class IdenticallySingular(L2Error):
    pass


class NotHermitian(L2Error):
    pass


class RankMismatch(L2Error):
    pass


class NonCommutingGenerators(L2Error):
    pass


class NotDeterminantClass(L2Error):
    pass


# CW assembly
class BadEmbedding(L2Error):
    pass


# heat traces and zeta regularisation
class IndexOutOfRange(L2Error):
    pass


class AsymptoticsMismatch(L2Error):
    pass


class MissingKappas(L2Error):
    pass


class DivergentTail(L2Error):
    pass


class IllConditionedFit(L2Error):
    pass


class BadTable(L2Error):
    pass


# heat kernels on 1-D model spaces
class OutOfDomain(L2Error):
    pass


# cusp geometry
class BadRange(L2Error):
    pass


class MissingField(L2Error):
    pass


class InsufficientData(L2Error):
    pass


class NonOddDimension(L2Error):
    pass


# command line
class ConfigParseError(L2Error):
    pass


class UnknownSubcommand(L2Error):
    pass
