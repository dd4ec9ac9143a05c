"""
Exception hierarchy for the slot-game analyzer.

Every failure the analyzer can report derives from SlotGameError so the CLI
can map it to an exit code without catching unrelated exceptions.
"""

from typing import Optional, Tuple


Position = Tuple[int, int]  # (line, column), both 1-based


class SlotGameError(Exception):
    """Base class for all analyzer errors."""


class ParseError(SlotGameError):
    """Source text does not conform to the concrete grammar."""

    def __init__(self, message: str, position: Optional[Position] = None):
        self.position = position
        where = f" at line {position[0]}, column {position[1]}" if position else ""
        super().__init__(f"{message}{where}")


class TypeCheckError(SlotGameError):
    """A term does not have the type its context requires."""

    def __init__(
        self,
        message: str,
        expected: Optional[str] = None,
        actual: Optional[str] = None,
        position: Optional[Position] = None,
    ):
        self.expected = expected
        self.actual = actual
        self.position = position
        detail = ""
        if expected is not None or actual is not None:
            detail = f" (expected {expected}, got {actual})"
        where = f" at line {position[0]}, column {position[1]}" if position else ""
        super().__init__(f"{message}{detail}{where}")


class SecurityAnnotationError(SlotGameError):
    """Security declarations do not fit the requested check."""


class CostModelError(SlotGameError):
    """Malformed cost model file."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{message}{where}")


class NonNormalTerm(SlotGameError):
    """A term handed to the denotation still contains a beta-redex or lambda."""


class HiddenCostError(SlotGameError):
    """Attempt to hide a token or delimiter letter."""


class AlphabetMismatch(SlotGameError):
    """Shared alphabet of a composition is not part of both operands."""


class EmptyWordError(SlotGameError):
    """Operation needs every word to start with a move."""


class DelimCountError(SlotGameError):
    """An accepted word carries the wrong number of delimiters."""


class StuckError(SlotGameError):
    """The small-step interpreter found no redex in a non-terminal term."""


class StateDomainError(SlotGameError):
    """A state does not cover the var-context or holds out-of-range values."""


class ContextNotEmpty(SlotGameError):
    """A closed-term construction received a term with free non-var identifiers."""


class UnsupportedType(SlotGameError):
    """Type outside the first-order fragment the construction handles."""


class MissingLow(SlotGameError):
    """Timing-aware non-interference needs a low variable."""


class UnboundedCost(SlotGameError):
    """Worst-case cost is unbounded where a finite bound is required."""


class InconclusiveError(SlotGameError):
    """An operational run exceeded its step limit."""


class InputError(SlotGameError):
    """An input or output file cannot be read or written."""
