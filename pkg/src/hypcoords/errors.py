"""Exception types shared across the package."""


class HypcoordsError(Exception):
    """Base class for all package errors."""


class OutsideDomain(HypcoordsError):
    """Point rejected by the map's domain check."""


class OnSingularSet(HypcoordsError):
    """Point lies on (or too close to) the map's singular set."""


class SingularEncounter(HypcoordsError):
    """Orbit hit the singular-set guard at some step."""

    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"orbit point {index} violates the singular guard")


class OrbitEscaped(HypcoordsError):
    """Orbit left the map's domain at some step."""

    def __init__(self, index, message=None):
        self.index = index
        super().__init__(message or f"orbit point {index} left the domain")


class IndexOutOfRange(HypcoordsError):
    """Cocycle block indices outside 0 <= i <= j <= k."""


class ZeroMatrix(HypcoordsError):
    """Operation undefined on the zero matrix."""


class SingularMatrix(HypcoordsError):
    """Operation requires a positive co-norm."""


class NoHyperbolicCoordinates(HypcoordsError):
    """Co-eccentricity too close to 1: contracted/expanded directions undefined."""


class ConformalDegenerate(HypcoordsError):
    """Every direction is critical: the angle equation degenerates."""


class DegenerateCoeccentricity(HypcoordsError):
    """Some order's co-eccentricity is too close to 1 for the requested bound."""


class DegenerateStep(HypcoordsError):
    """A one-step co-eccentricity vanishes (singular step Jacobian)."""


class ZeroDeterminant(HypcoordsError):
    """A determinant needed in a denominator is zero."""


class CertificateRequired(HypcoordsError):
    """The requested bound only holds under a passing certificate."""


class Infeasible(HypcoordsError):
    """No constants ledger of the requested flavor fits the orbit data."""

    def __init__(self, reason):
        self.reason = reason
        super().__init__(reason)


class DomainViolation(HypcoordsError):
    """A ledger denominator is non-positive; structural inequalities were bypassed."""


class InvalidLedger(HypcoordsError):
    """Structural inequalities of the constants ledger fail at construction."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class FrameFlipUnresolvable(HypcoordsError):
    """Sign alignment of neighbouring frames is ambiguous (step too large)."""


class StencilDegenerate(HypcoordsError):
    """A finite-difference stencil point has no usable frame."""


class NoFrameAtStart(HypcoordsError):
    """Curve integration cannot start: no frame at the seed point."""


class ConfigError(HypcoordsError):
    """Bad key or value in a run configuration."""
