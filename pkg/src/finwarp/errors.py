"""Exception hierarchy shared across the package."""


class FinwarpError(Exception):
    """Base class for all errors raised by this package."""


# --- jet arithmetic ---------------------------------------------------------

class UnknownVariable(FinwarpError):
    """Variable name not present in the jet space."""


class OrderExceeded(FinwarpError):
    """Requested partial derivative exceeds the jet truncation order."""


class DomainError(FinwarpError):
    """Function evaluated outside its real domain (sqrt/log of non-positive base, ...)."""


class DivisionByZero(FinwarpError):
    """Division by a quantity whose base value is zero."""


class StencilOutOfDomain(FinwarpError):
    """A finite-difference stencil point could not be evaluated."""


# --- expression DSL ---------------------------------------------------------

class DslSyntaxError(FinwarpError):
    """Malformed expression text; `offset` is the byte position of the error."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UnknownIdentifier(FinwarpError):
    """Identifier is neither a reserved variable, a declared parameter, nor a function."""


class InvalidFamilyParameter(FinwarpError):
    """Built-in metric family instantiated with out-of-range parameters."""


# --- metric / validity ------------------------------------------------------

class NonPositivePhi(FinwarpError):
    """phi <= 0 at the requested point; the metric ansatz requires phi > 0."""


class EmptyGrid(FinwarpError):
    """Grid specification produces no sample points."""


# --- spray / curvature ------------------------------------------------------

class SingularLambda(FinwarpError):
    """The validity function Lambda vanishes; spray quantities are undefined."""


class SingularOmega(FinwarpError):
    """phi - z*phi_z vanishes on the s-independent shortcut path."""


class SingularPhiZZ(FinwarpError):
    """phi_zz vanishes on the s-independent shortcut path."""


class SingularMetric(FinwarpError):
    """Fundamental tensor not invertible at the requested point."""


class ZDivision(FinwarpError):
    """Curvature formulas divide by z; z = 0 is outside their domain."""


class ConsistencyError(FinwarpError):
    """Two internally redundant computations disagreed beyond tolerance."""


# --- characterization -------------------------------------------------------

class NotSIndependent(FinwarpError):
    """Operation requires an s-independent metric function."""


class DegenerateDenominator(FinwarpError):
    """Coefficient recovery divides by a vanishing quantity at the probe point."""


class RankDeficientFit(FinwarpError):
    """Too few samples to determine the polynomial ansatz coefficients."""


# --- unicorn family ---------------------------------------------------------

class NegativeDelta(FinwarpError):
    """g1*g3 - g2^2 <= 0 somewhere on the requested domain."""


class ZeroG2(FinwarpError):
    """g2 vanishes somewhere on the requested domain."""


class DegenerateAlphaBeta(FinwarpError):
    """alpha = 0: the family's defining square-completion degenerates."""


# --- CLI --------------------------------------------------------------------

class ConfigError(FinwarpError):
    """Malformed or incomplete configuration file."""
