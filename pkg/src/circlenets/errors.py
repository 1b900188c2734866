"""Named geometric failure modes.

Every failure raised by the library is a :class:`GeometryError` subclass, so
callers (and the CLI) can report the class name as the error identifier.
"""


class GeometryError(ValueError):
    """Base class for all geometric precondition and convergence failures."""

    @property
    def name(self) -> str:
        return type(self).__name__


# geom3
class CollinearPoints(GeometryError):
    pass


class CoincidentPoints(GeometryError):
    pass


class CenterCoincidence(GeometryError):
    pass


class DegeneratePoints(GeometryError):
    pass


# conics
class ProportionalConics(GeometryError):
    pass


class CircularConic(GeometryError):
    pass


class NotACircle(GeometryError):
    pass


class DegenerateDiagonal(GeometryError):
    pass


# surface
class DegenerateMetric(GeometryError):
    pass


class NotConjugate(GeometryError):
    pass


class PlaneTooFar(GeometryError):
    pass


class UmbilicEncountered(GeometryError):
    pass


class DomainExit(GeometryError):
    pass


class NoConvergence(GeometryError):
    pass


class SurfaceSpecError(GeometryError):
    pass


# intersect
class FootPointFailure(GeometryError):
    pass


class AllOnSurface(GeometryError):
    pass


class Tangential(GeometryError):
    pass


class TangentialContact(GeometryError):
    pass


class OpenCurveTruncated(GeometryError):
    def __init__(self, message, curve=None):
        super().__init__(message)
        self.curve = curve


class CurvatureSandwichViolated(GeometryError):
    pass


# constructions
class FourthPointMissing(GeometryError):
    pass


class UmbilicRegion(GeometryError):
    pass


class DiagonalDegenerate(GeometryError):
    pass


class FourPointsNotFound(GeometryError):
    pass


class CollinearBase(GeometryError):
    pass


class ParabolicPoint(GeometryError):
    pass


class ParallelPlanes(GeometryError):
    pass


# nets
class PlaneDegenerate(GeometryError):
    pass


# harness
class TooFewSamples(GeometryError):
    pass


class AllAtFloor(GeometryError):
    pass


class UnknownExperiment(GeometryError):
    pass
