"""
Slot-game timing-leak analyzer for second-order Idealized Algol.

This package:
- Parses and typechecks IA2 terms with cost-relevant annotations
- Builds their slot-game models as costed finite automata
- Checks timing leaks and timing-aware non-interference by self-composition
- Runs a costed operational semantics as a cross-check
- Exports models as DOT and CSP
"""

from slotgame.frontend import TypedTerm, normalize, parse_and_typecheck
from slotgame.gamesem import denote, denote_at_state
from slotgame.models import CostModel, Verdict, VerdictKind
from slotgame.opsem import evaluate, oracle_timing_check
from slotgame.security import (
    Approximation,
    build_tani_model,
    build_timing_model,
    check_tani,
    check_timing,
)

__all__ = [
    "TypedTerm",
    "parse_and_typecheck",
    "normalize",
    "denote",
    "denote_at_state",
    "CostModel",
    "Verdict",
    "VerdictKind",
    "evaluate",
    "oracle_timing_check",
    "Approximation",
    "build_timing_model",
    "build_tani_model",
    "check_timing",
    "check_tani",
]
