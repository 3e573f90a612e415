"""Exception types shared across the engine."""


class QpcellsError(Exception):
    """Base class for all engine errors."""


class InsufficientPrecision(QpcellsError):
    """A decision needs more stored digits than the operand carries."""


class DomainError(QpcellsError):
    """Operand lies outside the operation's domain."""


class UnsupportedTorsion(QpcellsError):
    """Torsion units for p | e are not computed (except p = 2, e even)."""


class UnsupportedSplitting(QpcellsError):
    """A polynomial does not split into linear factors over Q_p."""


class RootExtractionError(QpcellsError):
    """A declared e-th root does not exist in Q_p (invalid input)."""


class FormulaSyntaxError(QpcellsError):
    """Parse failure; carries the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class ArityError(QpcellsError):
    """Unknown variable or arity mismatch."""


class EmptyCellError(QpcellsError):
    """A cell has no witness point."""


class UnboundedError(QpcellsError):
    """A value-group cell has no bound on the requested side."""


class EmptySetError(QpcellsError):
    """Bounds and congruence admit no member."""


class TypeZeroCellError(QpcellsError):
    """A type-0 cell has no valuation image in the value group."""


class VanishingFunctionError(QpcellsError):
    """The scanned function vanishes inside the domain."""


class UnboundedDomainError(QpcellsError):
    """The scan domain is not bounded."""


class SizeCapError(QpcellsError):
    """Requested enumeration exceeds the configured size cap."""


class PoleError(QpcellsError):
    """A rational expression was evaluated at a pole."""
