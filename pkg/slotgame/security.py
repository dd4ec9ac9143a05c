"""
Self-composed security models and the timing-leak / TANI checks.

A term is run twice in one model: the two copies are separated by a
delimiter and read their secret from independent answers of a seed
identifier. The term is free of timing leaks iff every word of the model
spends as many tokens before the delimiter as after it.
"""

import logging
from collections import deque
from dataclasses import dataclass, replace
from enum import Enum
from itertools import product
from typing import Dict, List, Optional, Set, Tuple

from slotgame import automaton as fa
from slotgame.automaton import CostedAutomaton
from slotgame.errors import ContextNotEmpty, MissingLow, SecurityAnnotationError, UnsupportedType
from slotgame.frontend import TypedTerm, collect_occurrences, normalize
from slotgame.gamesem import answers, arena, denote_term, detag, questions, tag_moves
from slotgame.models import (
    DELIM,
    TANI_PHASES,
    TIMING_PHASES,
    CostModel,
    DataValue,
    ModelOrigin,
    Move,
    MoveKind,
    Verdict,
    VerdictKind,
    Word,
)
from slotgame.syntax import (
    BOOL,
    COM,
    BaseKind,
    BaseType,
    BinOp,
    Const,
    Deref,
    FunType,
    If,
    Lambda,
    New,
    Seq,
    Skip,
    SkipDelim,
    Term,
    Type,
    Var,
    While,
    bound_names,
    exp_type,
    fresh_name,
    free_vars,
    primed,
    subst,
    walk,
)

logger = logging.getLogger(__name__)


class Mode(str, Enum):
    OVER = "over"
    UNDER = "under"


@dataclass(frozen=True)
class DeltaBound:
    """Maximum number of argument evaluations per call of a free function."""
    m: int = 0

    def __post_init__(self):
        if self.m < 0:
            raise ValueError("the delta bound must be non-negative")


@dataclass(frozen=True)
class Approximation:
    mode: Mode = Mode.UNDER
    bound: DeltaBound = DeltaBound(0)

    @classmethod
    def over(cls) -> "Approximation":
        return cls(Mode.OVER)

    @classmethod
    def under(cls, m: int = 0) -> "Approximation":
        return cls(Mode.UNDER, DeltaBound(m))


@dataclass(frozen=True)
class SecurityModel:
    """A self-composed model together with what its witnesses prove."""
    automaton: CostedAutomaton
    origin: ModelOrigin
    seed: str
    bound: Optional[int] = None
    abort: Optional[str] = None


# ----------------------------------------------------------------------------
# Self-composition
# ----------------------------------------------------------------------------

def _names(t: TypedTerm) -> Set[str]:
    return set(t.context) | free_vars(t.term) | bound_names(t.term)


def _seed_name(taken: Set[str], base: str = "k") -> str:
    if base not in taken and primed(base) not in taken:
        return base
    return fresh_name(base, taken | {primed(n) for n in taken})


def prime_copy(term: Term, mapping: Dict[str, str]) -> Term:
    """
    Copy of `term` with every bound name primed and the free names of
    `mapping` renamed. Occurrence numbers are kept, so free-context
    identifiers share their tags with the original.
    """
    if isinstance(term, Var):
        return replace(term, name=mapping.get(term.name, term.name))
    if isinstance(term, New):
        fresh = primed(term.name)
        return replace(
            term, name=fresh, init=prime_copy(term.init, mapping),
            body=prime_copy(term.body, {**mapping, term.name: fresh}),
        )
    if isinstance(term, Lambda):
        fresh = primed(term.param)
        return replace(term, param=fresh, body=prime_copy(term.body, {**mapping, term.param: fresh}))
    return term.map_children(lambda child: prime_copy(child, mapping))


def _timing_term(t: TypedTerm, seed: str) -> Term:
    high, ty = t.high
    data = ty.data
    copy = prime_copy(t.term, {high: primed(high)})
    k = Var(seed, ty=exp_type(data))
    return Seq(
        New(high, data, k, t.term),
        Seq(SkipDelim(), New(primed(high), data, k, copy)),
    )


def _prepare(t: TypedTerm) -> Tuple[TypedTerm, str]:
    if t.low_context:
        raise SecurityAnnotationError("timing checks take no low variable; use the TANI check")
    t.high  # exactly one high variable
    t = normalize(t)
    return t, _seed_name(_names(t))


def _composed(t: TypedTerm, term: Term, seeds: Tuple[Tuple[str, Type], ...]) -> TypedTerm:
    return TypedTerm(
        term=term,
        delta=seeds + t.delta,
        result_type=COM,
        occurrence_map=collect_occurrences(term),
    )


def build_timing_model_closed(t: TypedTerm, cost_model: CostModel) -> SecurityModel:
    """Self-composition of a term whose only free identifier is its high variable."""
    if t.delta:
        raise ContextNotEmpty("the closed model needs a term without free context")
    t, seed = _prepare(t)
    composed = _composed(t, _timing_term(t, seed), ((seed, exp_type(t.high[1].data)),))
    automaton = fa.compact(detag(denote_term(composed.term, cost_model)))
    logger.info("[model] closed timing model: %s", automaton.describe())
    return SecurityModel(automaton, ModelOrigin.CLOSED, seed)


def build_timing_model_open(t: TypedTerm, cost_model: CostModel,
                            approximation: Approximation = Approximation()) -> SecurityModel:
    """
    Self-composition of an open term.

    The over-approximation lets the free identifiers behave independently in
    the two copies. The under-approximation forces every occurrence to
    repeat, in the second copy, the behaviour it showed in the first.
    """
    for name, ty in t.delta:
        if isinstance(ty, FunType) and any(isinstance(arg, FunType) for arg in ty.args):
            raise UnsupportedType(f"{name} : {ty.render()} is not first-order")
    t, seed = _prepare(t)
    composed = _composed(t, _timing_term(t, seed), ((seed, exp_type(t.high[1].data)),))
    raw = denote_term(composed.term, cost_model)
    if approximation.mode == Mode.OVER:
        automaton = fa.compact(detag(raw))
        logger.info("[model] over-approximation: %s", automaton.describe())
        return SecurityModel(automaton, ModelOrigin.OVER, seed)

    m = approximation.bound.m
    types = dict(t.delta)
    occurrences = collect_occurrences(t.term)
    for name, tags in occurrences.items():
        if name not in types:
            continue
        constraint = delta(types[name], m)
        for tag in tags:
            shared = arena(types[name], (tag,))
            tagged = fa.declare(tag_moves(constraint, (tag,)), shared)
            raw = fa.compact(fa.synchronize(raw, fa.optional(tagged), shared))
    automaton = fa.compact(detag(raw))
    exact = m == 0 and _exact_context(t)
    origin = ModelOrigin.UNDER_EXACT if exact else ModelOrigin.UNDER_PARTIAL
    logger.info("[model] under-approximation (m=%d, %s): %s", m, origin.value, automaton.describe())
    return SecurityModel(automaton, origin, seed, bound=None if exact else m)


def build_timing_model(t: TypedTerm, cost_model: CostModel,
                       approximation: Approximation = Approximation()) -> SecurityModel:
    if t.delta:
        return build_timing_model_open(t, cost_model, approximation)
    return build_timing_model_closed(t, cost_model)


def _exact_context(t: TypedTerm) -> bool:
    """Base-typed free context with no occurrence inside a while loop."""
    if any(isinstance(ty, FunType) for _, ty in t.delta):
        return False
    delta_names = {name for name, _ in t.delta}
    for node in walk(t.term):
        if isinstance(node, While):
            for inner in walk(node):
                if isinstance(inner, Var) and inner.name in delta_names:
                    return False
    return True


# ----------------------------------------------------------------------------
# Behaviour repetition constraints
# ----------------------------------------------------------------------------

def _repeat(call: CostedAutomaton) -> CostedAutomaton:
    return fa.concat(call, fa.optional(call))


def delta(ty: Type, m: int) -> CostedAutomaton:
    """
    One call of an identifier of type `ty` optionally followed by a second,
    identical call. For functions the shape of a call is the sequence of its
    argument interrogations (at most m) and its result answer; the answers
    its arguments receive are left free.
    """
    if m < 0:
        raise ValueError("the delta bound must be non-negative")
    if isinstance(ty, BaseType):
        calls = [
            _repeat(fa.word([question, answer]))
            for question in questions(ty)
            for answer in answers(ty, question)
        ]
        return fa.declare(fa.compact(fa.union(*calls)), arena(ty))
    if any(isinstance(arg, FunType) for arg in ty.args):
        raise UnsupportedType(f"type {ty.render()} is not first-order")

    interrogations = []
    for i, arg in enumerate(ty.args, 1):
        tag = (str(i),)
        for question in questions(arg):
            replies = fa.union(*(fa.word([a.with_tag(tag)]) for a in answers(arg, question)))
            interrogations.append(fa.concat(fa.word([question.with_tag(tag)]), replies))
    calls = []
    for question in questions(ty.result):
        for answer in answers(ty.result, question):
            for length in range(m + 1):
                for shape in product(interrogations, repeat=length):
                    call = fa.concat(fa.word([question]), *shape, fa.word([answer]))
                    calls.append(_repeat(call))
    return fa.declare(fa.compact(fa.union(*calls)), arena(ty))


# ----------------------------------------------------------------------------
# TANI
# ----------------------------------------------------------------------------

def build_tani_model(t: TypedTerm, cost_model: CostModel) -> SecurityModel:
    """
    Model of two runs that agree on the low variable and may differ on the
    high one; the epilogue calls `abort` when the final low values differ.
    """
    if t.delta:
        raise ContextNotEmpty("the TANI model needs a term without free context")
    low = t.low
    if low is None:
        raise MissingLow("the TANI check needs a low variable")
    high, high_ty = t.high
    low_name, low_ty = low
    t = normalize(t)
    taken = _names(t)
    seed = _seed_name(taken)
    seed_high = primed(seed)
    abort = "abort" if "abort" not in taken else fresh_name("abort", taken)

    copy = prime_copy(t.term, {high: primed(high), low_name: primed(low_name)})
    lows = (Var(low_name, ty=low_ty), Var(primed(low_name), ty=low_ty))
    low_exp = exp_type(low_ty.data)
    epilogue = If(
        BinOp("!=", Deref(lows[0], ty=low_exp), Deref(lows[1], ty=low_exp), ty=exp_type(BOOL)),
        Var(abort, ty=COM),
        Skip(),
    )
    body = Seq(SkipDelim(), Seq(t.term, Seq(SkipDelim(), Seq(copy, Seq(SkipDelim(), epilogue)))))
    k_low = Var(seed, ty=exp_type(low_ty.data))
    k_high = Var(seed_high, ty=exp_type(high_ty.data))
    term = New(
        low_name, low_ty.data, k_low,
        New(high, high_ty.data, k_high,
            New(primed(low_name), low_ty.data, Deref(lows[0], ty=low_exp),
                New(primed(high), high_ty.data, k_high, body))),
    )
    composed = _composed(t, term, (
        (seed, exp_type(low_ty.data)), (seed_high, exp_type(high_ty.data)), (abort, COM),
    ))
    automaton = fa.compact(detag(denote_term(composed.term, cost_model)))
    logger.info("[model] TANI model: %s", automaton.describe())
    return SecurityModel(automaton, ModelOrigin.TANI, seed_high, abort=abort)


def _unsafe_witness(a: CostedAutomaton, abort: str) -> Optional[Word]:
    """Shortest accepted word containing a move of `abort`."""
    a = fa.trim(fa.remove_epsilon(a))
    start = (a.initial, False)
    parent: Dict[tuple, Optional[Tuple[tuple, object]]] = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        state, seen = node
        if seen and state in a.accepting:
            letters = []
            while parent[node] is not None:
                node, label = parent[node]
                letters.append(label)
            return tuple(reversed(letters))
        for label, target in a.out.get(state, ()):
            hit = seen or (isinstance(label, Move) and label.tag[:1] == (abort,))
            nxt = (target, hit)
            if nxt not in parent:
                parent[nxt] = (node, label)
                queue.append(nxt)
    return None


# ----------------------------------------------------------------------------
# Verdicts
# ----------------------------------------------------------------------------

def seed_values(witness: Word, seed: str) -> Tuple[DataValue, ...]:
    """First answer of the seed identifier in each delimiter-separated segment."""
    values: List[DataValue] = []
    segment, found = 0, False
    for letter in witness:
        if letter == DELIM:
            segment, found = segment + 1, False
        elif (
            not found and isinstance(letter, Move)
            and letter.kind == MoveKind.VALUE and letter.tag == (seed,)
        ):
            values.append(letter.value)
            found = True
    return tuple(values)


def check_timing(model: SecurityModel) -> Verdict:
    """Balance check with one delimiter: tokens before and after it must agree."""
    report = fa.balance_verdict(model.automaton, TIMING_PHASES)
    if report.balanced:
        return Verdict(VerdictKind.SECURE, origin=model.origin, bound=model.bound)
    kind = VerdictKind.POSSIBLE_LEAK if model.origin == ModelOrigin.OVER else VerdictKind.LEAK
    before, after = report.segment_tokens
    return Verdict(
        kind, report.witness, before, after,
        seed_values(report.witness, model.seed), model.origin, model.bound,
    )


def check_tani(model: SecurityModel) -> Verdict:
    """Unsafe if abort can be reached; otherwise the two middle segments must balance."""
    witness = _unsafe_witness(model.automaton, model.abort or "abort")
    if witness is not None:
        return Verdict(
            VerdictKind.UNSAFE, witness, high_values=seed_values(witness, model.seed), origin=model.origin,
        )
    report = fa.balance_verdict(model.automaton, TANI_PHASES)
    if report.balanced:
        return Verdict(VerdictKind.SECURE, origin=model.origin)
    segments = report.segment_tokens
    return Verdict(
        VerdictKind.LEAK, report.witness, segments[1], segments[2],
        seed_values(report.witness, model.seed), model.origin,
    )


def instantiate_context(t: TypedTerm, witness: Word) -> TypedTerm:
    """
    Close an open term with the behaviour its free identifiers show in a
    witness: expressions become the constant they answered, commands skip.
    """
    term = t.term
    for name, ty in t.delta:
        if not isinstance(ty, BaseType) or ty.kind == BaseKind.VAR:
            raise UnsupportedType(f"cannot instantiate {name} : {ty.render()} with a constant")
        if ty.kind == BaseKind.COM:
            replacement: Term = Skip()
        else:
            answered = [
                letter.value for letter in witness
                if isinstance(letter, Move) and letter.kind == MoveKind.VALUE and letter.tag == (name,)
            ]
            value = answered[0] if answered else ty.data.values()[0]
            replacement = Const(value, ty=ty)
        term = subst(term, name, replacement)
    closed = replace(t, delta=())
    return closed.with_term(term)
