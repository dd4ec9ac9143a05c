"""
Data models shared across the slot-game analyzer.

Letters of the move alphabet, the cost model, phase specifications for
balance checks, and the verdicts reported by the security checks.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Mapping, Optional, Tuple, Union


DataValue = Union[int, bool]

# Mapping from var identifiers to their stored value.
GammaState = Mapping[str, DataValue]

UNBOUNDED = "unbounded"


def render_value(value: DataValue) -> str:
    """Render a data value the way it appears in moves and source text."""
    if isinstance(value, bool):
        return "tt" if value else "ff"
    return str(value)


def parse_value(text: str) -> DataValue:
    if text == "tt":
        return True
    if text == "ff":
        return False
    return int(text)


class MoveKind(str, Enum):
    """Kinds of moves in the arenas of base types."""
    Q = "q"
    RUN = "run"
    DONE = "done"
    READ = "read"
    OK = "ok"
    WRITE = "write"
    VALUE = "value"


QUESTION_KINDS = frozenset({MoveKind.Q, MoveKind.RUN, MoveKind.READ, MoveKind.WRITE})


@dataclass(frozen=True)
class Move:
    """
    A question or answer, optionally tagged with the identifier path it
    belongs to (for example ("f", "1") for the first argument of f).
    """
    kind: MoveKind
    payload: Optional[str] = None
    tag: Tuple[str, ...] = ()

    @property
    def is_question(self) -> bool:
        return self.kind in QUESTION_KINDS

    @property
    def value(self) -> DataValue:
        """Data value carried by a value or write move."""
        if self.payload is None:
            raise ValueError(f"move {self.render()} carries no value")
        return parse_value(self.payload)

    def base(self) -> str:
        if self.kind == MoveKind.VALUE:
            return self.payload or ""
        if self.kind == MoveKind.WRITE:
            return f"write({self.payload})"
        return self.kind.value

    def render(self) -> str:
        suffix = "@" + ".".join(self.tag) if self.tag else ""
        return self.base() + suffix

    def with_tag(self, tag: Tuple[str, ...]) -> "Move":
        return Move(self.kind, self.payload, tag)

    def untagged(self) -> "Move":
        return Move(self.kind, self.payload, ())

    def __str__(self) -> str:
        return self.render()


@dataclass(frozen=True)
class Token:
    """One unit of elapsed cost."""

    def render(self) -> str:
        return "$"

    def __str__(self) -> str:
        return "$"


@dataclass(frozen=True)
class Delim:
    """Phase separator between the runs of a self-composed program."""

    def render(self) -> str:
        return "#"

    def __str__(self) -> str:
        return "#"


TOKEN = Token()
DELIM = Delim()

Letter = Union[Move, Token, Delim]
Word = Tuple[Letter, ...]


def q(*tag: str) -> Move:
    return Move(MoveKind.Q, None, tuple(tag))


def run(*tag: str) -> Move:
    return Move(MoveKind.RUN, None, tuple(tag))


def done(*tag: str) -> Move:
    return Move(MoveKind.DONE, None, tuple(tag))


def read(*tag: str) -> Move:
    return Move(MoveKind.READ, None, tuple(tag))


def ok(*tag: str) -> Move:
    return Move(MoveKind.OK, None, tuple(tag))


def write(value: DataValue, *tag: str) -> Move:
    return Move(MoveKind.WRITE, render_value(value), tuple(tag))


def val(value: DataValue, *tag: str) -> Move:
    return Move(MoveKind.VALUE, render_value(value), tuple(tag))


def letter_key(letter: Letter) -> str:
    """Sort key for letters; words are compared letter by letter on it."""
    return letter.render()


def render_word(word: Word, separator: str = ".") -> str:
    return separator.join(letter.render() for letter in word)


def token_count(word: Word) -> int:
    return sum(1 for letter in word if letter == TOKEN)


def segment_tokens(word: Word) -> Tuple[int, ...]:
    """Token counts of the delimiter-separated segments of a word."""
    counts = [0]
    for letter in word:
        if letter == DELIM:
            counts.append(0)
        elif letter == TOKEN:
            counts[-1] += 1
    return tuple(counts)


def strip_costs(word: Word) -> Word:
    """Underlying play of a costed word (tokens removed)."""
    return tuple(letter for letter in word if letter != TOKEN)


COST_KEYS = ("seq", "if", "asg", "der", "app", "var")


@dataclass
class CostModel:
    """
    Non-negative costs of the elementary operations.

    Operators without an entry in op_costs fall back to op_default.
    """
    seq: int = 1
    if_: int = 1
    asg: int = 1
    der: int = 1
    app: int = 1
    var: int = 1
    op_default: int = 1
    op_costs: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        for key in COST_KEYS:
            if self.cost(key) < 0:
                raise ValueError(f"cost of {key} must be non-negative")
        if self.op_default < 0 or any(v < 0 for v in self.op_costs.values()):
            raise ValueError("operator costs must be non-negative")

    def cost(self, kind: str) -> int:
        """Cost of a construct named by its cost key (seq, if, asg, ...)."""
        if kind == "if":
            return self.if_
        if kind in COST_KEYS:
            return getattr(self, kind)
        if kind.startswith("op."):
            return self.k_op(kind[3:])
        raise KeyError(kind)

    def k_op(self, symbol: str) -> int:
        return self.op_costs.get(symbol, self.op_default)

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {key: self.cost(key) for key in COST_KEYS}
        data["op"] = self.op_default
        for symbol, cost in sorted(self.op_costs.items()):
            data[f"op.{symbol}"] = cost
        return data


@dataclass(frozen=True)
class PhaseSpec:
    """Expected delimiter count and per-segment token weights of a model."""
    delims: int
    weights: Tuple[int, ...]

    def __post_init__(self):
        if self.delims < 0:
            raise ValueError("delimiter count must be non-negative")
        if len(self.weights) != self.delims + 1:
            raise ValueError("need exactly one weight per segment")


TIMING_PHASES = PhaseSpec(1, (1, -1))
TANI_PHASES = PhaseSpec(3, (0, 1, -1, 0))


@dataclass(frozen=True)
class BalanceReport:
    """Outcome of a balance check; witness is set iff unbalanced."""
    balanced: bool
    witness: Optional[Word] = None
    segment_tokens: Tuple[int, ...] = ()


class VerdictKind(str, Enum):
    SECURE = "Secure"
    LEAK = "Leak"
    POSSIBLE_LEAK = "PossibleLeak"
    UNSAFE = "Unsafe"


class ModelOrigin(str, Enum):
    """How a security model was built; decides what a witness proves."""
    CLOSED = "closed"
    OVER = "over"
    UNDER_EXACT = "under-exact"
    UNDER_PARTIAL = "under-partial"
    TANI = "tani"
    ORACLE = "oracle"


@dataclass(frozen=True)
class Verdict:
    """Result of a security check."""
    kind: VerdictKind
    witness: Word = ()
    cost_before: int = 0
    cost_after: int = 0
    high_values: Tuple[DataValue, ...] = ()
    origin: Optional[ModelOrigin] = None
    bound: Optional[int] = None

    @property
    def is_secure(self) -> bool:
        return self.kind == VerdictKind.SECURE

    def to_record(self) -> str:
        """Single machine-readable verdict line."""
        return (
            f"verdict={self.kind.name} cost_before={self.cost_before} "
            f"cost_after={self.cost_after} witness={render_word(self.witness)}"
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "verdict": self.kind.name,
            "cost_before": self.cost_before,
            "cost_after": self.cost_after,
            "witness": render_word(self.witness),
            "high_values": [render_value(v) for v in self.high_values],
            "origin": self.origin.value if self.origin else None,
            "bound": self.bound,
        }
