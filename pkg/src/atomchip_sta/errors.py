"""Exception and warning types raised by the toolkit."""


class AtomChipError(Exception):
    """Base class for every error raised by this package."""


class PointOnWire(AtomChipError):
    pass


class NoTrapFound(AtomChipError):
    pass


class InsufficientSamples(AtomChipError):
    pass


class PolesInDomain(AtomChipError):
    pass


class IllConditioned(AtomChipError):
    pass


class FitToleranceError(AtomChipError):
    """No rational order on the ladder reached the requested residual."""


class OutOfDomain(AtomChipError):
    pass


class NegativeDiscriminant(AtomChipError):
    pass


class RootJump(AtomChipError):
    pass


class StepTooLarge(AtomChipError):
    pass


class PerturbationTooLarge(AtomChipError):
    pass


class NonPositiveFrequency(AtomChipError):
    pass


class CollapseDetected(AtomChipError):
    pass


class NotConverged(AtomChipError):
    pass


class GridOverflow(AtomChipError):
    pass


class SeriesTooShort(AtomChipError):
    pass


class NoOscillation(AtomChipError):
    pass


class ParseError(AtomChipError):
    """Malformed configuration text. Carries the offending line and column."""

    def __init__(self, message, line=None, column=None, path=None):
        self.line = line
        self.column = column
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"col {column}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class ValidationError(AtomChipError):
    """Configuration parsed fine but violates a physical invariant."""


class UsageError(AtomChipError):
    pass


class LensBeforeExpansion(UserWarning):
    """Lens pulse applied before the cloud had time to expand."""


class ThomasFermiWarning(UserWarning):
    """Thomas-Fermi approximation is questionable for these parameters."""
