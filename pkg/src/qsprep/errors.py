"""Exception hierarchy shared by all compiler and simulator modules."""

from __future__ import annotations


class QSPrepError(Exception):
    """Base class for every error raised by this package."""


class CircuitError(QSPrepError, ValueError):
    pass


class OverlappingSupport(CircuitError):
    pass


class UnknownQubit(CircuitError):
    pass


class MissingCoupling(CircuitError):
    pass


class ParseError(CircuitError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class SimulationError(QSPrepError):
    pass


class EmptyRegistry(SimulationError, ValueError):
    pass


class UnresolvedMeasurement(SimulationError):
    pass


class ImpossibleOutcome(SimulationError):
    pass


class DimensionMismatch(SimulationError, ValueError):
    pass


class NotACnot(CircuitError):
    pass


class SpecError(QSPrepError, ValueError):
    """Invalid classical input description (state, oracle table, Hamiltonian)."""


class UnnormalizedInput(SpecError):
    pass


class UnnormalizedWord(SpecError):
    pass


class DuplicateEntries(SpecError):
    pass


class DuplicateIndices(SpecError):
    pass


class ZeroAmplitudeOnlyEntries(SpecError):
    pass


class NonpositiveCoefficient(SpecError):
    pass


class VerificationFailed(QSPrepError):
    def __init__(self, message: str, deviation: float):
        super().__init__(f"{message} (max deviation {deviation:.3e})")
        self.deviation = deviation


class BudgetUnreachable(QSPrepError):
    def __init__(self, eps: float, floor: float, max_length: int):
        super().__init__(
            f"accuracy {eps:g} unreachable: best found {floor:.4g} "
            f"with words up to length {max_length}"
        )
        self.eps = eps
        self.floor = floor
        self.max_length = max_length
