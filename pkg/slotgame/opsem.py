"""
Costed small-step operational semantics.

Reduction follows the usual call-by-name rules for Idealized Algol, each
basic rule charging its cost from the cost model. The interpreter is the
ground truth the game models are tested against.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Optional, Tuple

from slotgame.errors import ContextNotEmpty, InconclusiveError, SecurityAnnotationError, StuckError
from slotgame.frontend import TypedTerm
from slotgame.models import CostModel, DataValue, GammaState, ModelOrigin, Verdict, VerdictKind
from slotgame.syntax import (
    App,
    ArrayElem,
    Assign,
    BinOp,
    Const,
    Deref,
    Diverge,
    If,
    Lambda,
    LocalBlock,
    MkVar,
    New,
    Seq,
    Skip,
    SkipDelim,
    Term,
    Tick,
    Var,
    While,
    bound_names,
    evaluate_op,
    free_vars,
    rename,
    subst,
)

logger = logging.getLogger(__name__)

DEFAULT_STEP_LIMIT = 100000


@dataclass(frozen=True)
class Configuration:
    term: Term
    state: Dict[str, DataValue] = field(default_factory=dict)


class Outcome(str, Enum):
    TERMINATED = "terminated"
    STEP_LIMIT = "step-limit"


@dataclass(frozen=True)
class RunResult:
    outcome: Outcome
    final_state: Dict[str, DataValue]
    total_cost: int
    steps: int
    final_term: Optional[Term] = None

    @property
    def terminated(self) -> bool:
        return self.outcome == Outcome.TERMINATED


def is_terminal(term: Term) -> bool:
    return isinstance(term, (Skip, Const))


class _Reducer:
    """One reduction step; mutates its private copy of the state."""

    def __init__(self, state: Dict[str, DataValue], cost_model: CostModel):
        self.state = state
        self.cm = cost_model

    def reduce(self, t: Term) -> Tuple[Term, int]:
        method = getattr(self, f"_reduce_{type(t).__name__}", None)
        if method is None:
            raise StuckError(f"no rule applies to {type(t).__name__}")
        return method(t)

    def _reduce_Seq(self, t: Seq) -> Tuple[Term, int]:
        if isinstance(t.first, Skip):
            return t.second, self.cm.seq
        first, cost = self.reduce(t.first)
        return Seq(first, t.second, ty=t.ty, pos=t.pos), cost

    def _reduce_BinOp(self, t: BinOp) -> Tuple[Term, int]:
        if not isinstance(t.left, Const):
            left, cost = self.reduce(t.left)
            return BinOp(t.op, left, t.right, ty=t.ty, pos=t.pos), cost
        if not isinstance(t.right, Const):
            right, cost = self.reduce(t.right)
            return BinOp(t.op, t.left, right, ty=t.ty, pos=t.pos), cost
        value = evaluate_op(t.op, t.left.value, t.right.value, t.ty.data)
        return Const(value, ty=t.ty, pos=t.pos), self.cm.k_op(t.op)

    def _reduce_If(self, t: If) -> Tuple[Term, int]:
        if isinstance(t.cond, Const):
            return (t.then if t.cond.value else t.orelse), self.cm.if_
        cond, cost = self.reduce(t.cond)
        return If(cond, t.then, t.orelse, ty=t.ty, pos=t.pos), cost

    def _reduce_While(self, t: While) -> Tuple[Term, int]:
        return If(t.cond, Seq(t.body, t, pos=t.pos), Skip(), pos=t.pos), 0

    def _reduce_Assign(self, t: Assign) -> Tuple[Term, int]:
        if not isinstance(t.value, Const):
            value, cost = self.reduce(t.value)
            return Assign(t.target, value, pos=t.pos), cost
        target = t.target
        if isinstance(target, Var):
            if target.name not in self.state:
                raise StuckError(f"assignment to unallocated variable {target.name}")
            self.state[target.name] = t.value.value
            return Skip(), self.cm.asg
        if isinstance(target, MkVar):
            return App(target.writer, t.value, ty=t.ty, pos=t.pos), 0
        target, cost = self.reduce(target)
        return Assign(target, t.value, pos=t.pos), cost

    def _reduce_Deref(self, t: Deref) -> Tuple[Term, int]:
        target = t.target
        if isinstance(target, Var):
            if target.name not in self.state:
                raise StuckError(f"dereference of unallocated variable {target.name}")
            return Const(self.state[target.name], ty=t.ty, pos=t.pos), self.cm.der
        if isinstance(target, MkVar):
            return target.reader, 0
        target, cost = self.reduce(target)
        return Deref(target, ty=t.ty, pos=t.pos), cost

    def _reduce_ArrayElem(self, t: ArrayElem) -> Tuple[Term, int]:
        if isinstance(t.index, Const):
            i = t.index.value
            if 0 <= i < len(t.elements):
                return t.elements[i], 0
            return Diverge(ty=t.ty, pos=t.pos), 0
        index, cost = self.reduce(t.index)
        return ArrayElem(index, t.elements, ty=t.ty, pos=t.pos), cost

    def _reduce_App(self, t: App) -> Tuple[Term, int]:
        if isinstance(t.fun, Lambda):
            return subst(t.fun.body, t.fun.param, t.arg), self.cm.app
        if isinstance(t.fun, Var):
            raise StuckError(f"application of free identifier {t.fun.name}")
        fun, cost = self.reduce(t.fun)
        return App(fun, t.arg, ty=t.ty, pos=t.pos), cost

    def _reduce_Tick(self, t: Tick) -> Tuple[Term, int]:
        return t.body, self.cm.cost(t.kind)

    def _reduce_New(self, t: New) -> Tuple[Term, int]:
        if not isinstance(t.init, Const):
            init, cost = self.reduce(t.init)
            return New(t.name, t.data, init, t.body, ty=t.ty, pos=t.pos), cost
        name = self._fresh(t)
        self.state[name] = t.init.value
        return LocalBlock(name, rename(t.body, {t.name: name}), ty=t.ty, pos=t.pos), 0

    def _fresh(self, t: New) -> str:
        taken = set(self.state) | free_vars(t.body) | bound_names(t.body)
        i = 0
        while f"{t.name}%{i}" in taken:
            i += 1
        return f"{t.name}%{i}"

    def _reduce_LocalBlock(self, t: LocalBlock) -> Tuple[Term, int]:
        if isinstance(t.body, Skip):
            del self.state[t.name]
            return t.body, self.cm.var
        body, cost = self.reduce(t.body)
        return LocalBlock(t.name, body, ty=t.ty, pos=t.pos), cost

    def _reduce_SkipDelim(self, t: SkipDelim) -> Tuple[Term, int]:
        return Skip(pos=t.pos), 0

    def _reduce_Diverge(self, t: Diverge) -> Tuple[Term, int]:
        return t, 0


def step(c: Configuration, cost_model: CostModel) -> Optional[Tuple[Configuration, int]]:
    """
    Perform one reduction step.

    Returns None when the term is skip or a constant; otherwise the next
    configuration and the cost of the rule applied.
    """
    if is_terminal(c.term):
        return None
    state = dict(c.state)
    term, cost = _Reducer(state, cost_model).reduce(c.term)
    return Configuration(term, state), cost


def evaluate(c: Configuration, cost_model: CostModel, step_limit: int = DEFAULT_STEP_LIMIT) -> RunResult:
    """Reduce until a terminal term is reached or the step limit runs out."""
    if step_limit < 0:
        raise ValueError("step limit must be non-negative")
    total, steps = 0, 0
    while steps < step_limit:
        result = step(c, cost_model)
        if result is None:
            return RunResult(Outcome.TERMINATED, dict(c.state), total, steps, c.term)
        c, cost = result
        total += cost
        steps += 1
    if is_terminal(c.term):
        return RunResult(Outcome.TERMINATED, dict(c.state), total, steps, c.term)
    return RunResult(Outcome.STEP_LIMIT, dict(c.state), total, steps, c.term)


def run_at_state(t: TypedTerm, state: GammaState, cost_model: CostModel,
                 step_limit: int = DEFAULT_STEP_LIMIT) -> RunResult:
    return evaluate(Configuration(t.term, dict(state)), cost_model, step_limit)


def oracle_timing_check(t: TypedTerm, cost_model: CostModel, step_limit: int = DEFAULT_STEP_LIMIT) -> Verdict:
    """
    Decide timing leaks by running the term at every initial value of its
    high variable and comparing the costs of the runs.
    """
    if t.delta:
        raise ContextNotEmpty("the operational check needs a term without free context")
    if t.low_context:
        raise SecurityAnnotationError("the operational timing check takes no low variable")
    high, ty = t.high
    costs = []
    for value in ty.data.values():
        result = run_at_state(t, {high: value}, cost_model, step_limit)
        if not result.terminated:
            raise InconclusiveError(f"run with {high} = {value!r} exceeded {step_limit} steps")
        logger.debug("[oracle] %s = %r costs %d", high, value, result.total_cost)
        costs.append((value, result.total_cost))
    for i, (v1, c1) in enumerate(costs):
        for v2, c2 in costs[i + 1:]:
            if c1 != c2:
                return Verdict(
                    VerdictKind.LEAK, cost_before=c1, cost_after=c2,
                    high_values=(v1, v2), origin=ModelOrigin.ORACLE,
                )
    return Verdict(VerdictKind.SECURE, origin=ModelOrigin.ORACLE)
