"""
Slot-game semantics: denotations of normalized terms as costed automata.

Each construct is a small constructor strategy over its own moves and the
moves of its arguments (tagged "1", "2", ...); arguments are plugged in by
composition. Free identifiers are copy-cat strategies tagged with their
occurrence, and local variables are bound to a cell and hidden.
"""

import logging
import re
from functools import lru_cache
from typing import Dict, Iterable, List, Tuple, Union

from slotgame import automaton as fa
from slotgame.automaton import CostedAutomaton
from slotgame.errors import ContextNotEmpty, NonNormalTerm, StateDomainError, UnsupportedType
from slotgame.frontend import TypedTerm, is_normal
from slotgame.models import (
    DELIM,
    TOKEN,
    CostModel,
    DataValue,
    GammaState,
    Letter,
    Move,
    MoveKind,
    done,
    ok,
    q,
    read,
    run,
    val,
    write,
)
from slotgame.syntax import (
    BOOL,
    COM,
    App,
    ArrayElem,
    Assign,
    BaseKind,
    BaseType,
    BinOp,
    Const,
    DataType,
    Deref,
    Diverge,
    FunType,
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
    Type,
    Var,
    While,
    evaluate_op,
    exp_type,
    int_data,
    subst,
    var_type,
)

logger = logging.getLogger(__name__)

Tag = Tuple[str, ...]


# ----------------------------------------------------------------------------
# Arenas
# ----------------------------------------------------------------------------

def questions(ty: BaseType) -> List[Move]:
    if ty.kind == BaseKind.COM:
        return [run()]
    if ty.kind == BaseKind.EXP:
        return [q()]
    return [read()] + [write(v) for v in ty.data.values()]


def answers(ty: BaseType, question: Move) -> List[Move]:
    if ty.kind == BaseKind.COM:
        return [done()]
    if question.kind == MoveKind.WRITE:
        return [ok()]
    return [val(v) for v in ty.data.values()]


@lru_cache(maxsize=None)
def arena(ty: Type, tag: Tag = ()) -> frozenset:
    """All moves of type `ty`, tagged with `tag` (arguments get tag + (i,))."""
    if isinstance(ty, FunType):
        letters = set(arena(ty.result, tag))
        for i, arg in enumerate(ty.args, 1):
            letters |= arena(arg, tag + (str(i),))
        return frozenset(letters)
    letters = set()
    for question in questions(ty):
        letters.add(question.with_tag(tag))
        letters.update(answer.with_tag(tag) for answer in answers(ty, question))
    return frozenset(letters)


def _tagged(move: Move, tag: Tag) -> Move:
    return move.with_tag(tag + move.tag)


def retag_own(a: CostedAutomaton, index: str) -> CostedAutomaton:
    """Tag the untagged moves of `a` as moves of argument `index`."""
    return fa.relabel(a, lambda l: l.with_tag((index,)) if isinstance(l, Move) and not l.tag else l)


def tag_moves(a: CostedAutomaton, prefix: Tag) -> CostedAutomaton:
    """Prefix the tag of every move; tokens and delimiters are untouched."""
    return fa.relabel(a, lambda l: _tagged(l, prefix) if isinstance(l, Move) else l)


_OCCURRENCE_TAG = re.compile(r"#\d+$")


def detag(a: CostedAutomaton) -> CostedAutomaton:
    """Contraction: merge the occurrence tags x#1, x#2, ... into x."""

    def strip(letter: Letter) -> Letter:
        if isinstance(letter, Move) and letter.tag and _OCCURRENCE_TAG.search(letter.tag[0]):
            return letter.with_tag((_OCCURRENCE_TAG.sub("", letter.tag[0]),) + letter.tag[1:])
        return letter

    return fa.relabel(a, strip)


def _seq(*parts: Union[CostedAutomaton, Letter]) -> CostedAutomaton:
    return fa.concat(*(p if isinstance(p, CostedAutomaton) else fa.word([p]) for p in parts))


def _choice(items: Iterable[CostedAutomaton]) -> CostedAutomaton:
    return fa.union(*items)


# ----------------------------------------------------------------------------
# Basic strategies
# ----------------------------------------------------------------------------

@lru_cache(maxsize=None)
def cell(data: DataType, initial: DataValue, tag: Tag = ()) -> CostedAutomaton:
    """Good-variable strategy: each read returns the most recently written value."""
    if not data.contains(initial):
        raise StateDomainError(f"initial value {initial!r} outside {data.render()}")
    values = data.values()
    holds = {v: i for i, v in enumerate(values)}
    count = len(values)
    transitions = set()
    for v, state in holds.items():
        after_read = count + 2 * state
        transitions.add((state, read(*tag), after_read))
        transitions.add((after_read, val(v, *tag), state))
        after_write = count + 2 * state + 1
        transitions.add((after_write, ok(*tag), state))
        for c in holds.values():
            transitions.add((c, write(v, *tag), after_write))
    result = CostedAutomaton(
        3 * count, frozenset(transitions), holds[initial], frozenset(holds.values()),
        arena(var_type(data), tag),
    )
    return fa.trim(result)


@lru_cache(maxsize=None)
def copycat(ty: Type, tag: Union[str, Tag]) -> CostedAutomaton:
    """Identity strategy relaying between the own copy of `ty` and the copy tagged `tag`."""
    tag = (tag,) if isinstance(tag, str) else tuple(tag)
    if isinstance(ty, BaseType):
        result = _choice(
            _seq(question, question.with_tag(tag), _choice(
                fa.word([answer.with_tag(tag), answer]) for answer in answers(ty, question)
            ))
            for question in questions(ty)
        )
    else:
        if any(isinstance(arg, FunType) for arg in ty.args):
            raise UnsupportedType(f"type {ty.render()} is not first-order")
        interrogations = []
        for i, arg in enumerate(ty.args, 1):
            inner, own = tag + (str(i),), (str(i),)
            for question in questions(arg):
                interrogations.append(_seq(
                    question.with_tag(inner), question.with_tag(own),
                    _choice(fa.word([a.with_tag(own), a.with_tag(inner)]) for a in answers(arg, question)),
                ))
        arguments = fa.star(_choice(interrogations))
        result = _choice(
            _seq(question, question.with_tag(tag), arguments, _choice(
                fa.word([answer.with_tag(tag), answer]) for answer in answers(ty.result, question)
            ))
            for question in questions(ty.result)
        )
    return fa.declare(fa.compact(result), arena(ty) | arena(ty, tag))


# ----------------------------------------------------------------------------
# Constructor strategies
# ----------------------------------------------------------------------------

def _declared(a: CostedAutomaton, *arenas: frozenset) -> CostedAutomaton:
    letters = frozenset().union(*arenas)
    return fa.declare(fa.compact(a), letters)


@lru_cache(maxsize=None)
def op_strategy(op: str, left: DataType, right: DataType, result: DataType, cost: int) -> CostedAutomaton:
    words = []
    for m in left.values():
        for n in right.values():
            value = evaluate_op(op, m, n, result)
            words.append(fa.word(
                [q()] + [TOKEN] * cost + [q("1"), val(m, "1"), q("2"), val(n, "2"), val(value)]
            ))
    return _declared(
        _choice(words), arena(exp_type(left), ("1",)), arena(exp_type(right), ("2",)), arena(exp_type(result)),
    )


@lru_cache(maxsize=None)
def seq_strategy(cost: int) -> CostedAutomaton:
    return _declared(
        _seq(run(), run("1"), done("1"), fa.tokens(cost), run("2"), done("2"), done()),
        arena(COM), arena(COM, ("1",)), arena(COM, ("2",)),
    )


@lru_cache(maxsize=None)
def if_strategy(cost: int) -> CostedAutomaton:
    branches = fa.union(
        fa.word([val(True, "1"), run("2"), done("2")]),
        fa.word([val(False, "1"), run("3"), done("3")]),
    )
    return _declared(
        _seq(run(), fa.tokens(cost), q("1"), branches, done()),
        arena(COM), arena(exp_type(BOOL), ("1",)), arena(COM, ("2",)), arena(COM, ("3",)),
    )


@lru_cache(maxsize=None)
def while_strategy(test_cost: int, seq_cost: int) -> CostedAutomaton:
    iteration = _seq(fa.tokens(test_cost), q("1"), val(True, "1"), run("2"), done("2"), fa.tokens(seq_cost))
    return _declared(
        _seq(run(), fa.star(iteration), fa.tokens(test_cost), q("1"), val(False, "1"), done()),
        arena(COM), arena(exp_type(BOOL), ("1",)), arena(COM, ("2",)),
    )


@lru_cache(maxsize=None)
def assign_strategy(target: DataType, value: DataType, cost: int) -> CostedAutomaton:
    words = [
        fa.word([run()] + [TOKEN] * cost + [q("2"), val(n, "2"), write(n, "1"), ok("1"), done()])
        for n in value.values()
    ]
    return _declared(
        _choice(words), arena(COM), arena(var_type(target), ("1",)), arena(exp_type(value), ("2",)),
    )


@lru_cache(maxsize=None)
def deref_strategy(data: DataType, cost: int) -> CostedAutomaton:
    words = [
        fa.word([q()] + [TOKEN] * cost + [read("1"), val(n, "1"), val(n)])
        for n in data.values()
    ]
    return _declared(_choice(words), arena(exp_type(data)), arena(var_type(data), ("1",)))


def plug(strategy: CostedAutomaton, index: str, argument: CostedAutomaton, expected: Type) -> CostedAutomaton:
    """Compose `argument` into the `index`-th argument position of `strategy`."""
    shared = arena(expected, (index,))
    argument = fa.declare(retag_own(argument, index), shared)
    return fa.compose(argument, strategy, shared)


def _after_first_move(a: CostedAutomaton) -> CostedAutomaton:
    """Words of `a` without their initial move."""
    a = fa.remove_epsilon(a)
    transitions = set(a.transitions)
    start = a.num_states
    for label, t in a.out.get(a.initial, ()):
        transitions.add((start, None, t))
    shifted = CostedAutomaton(a.num_states + 1, frozenset(transitions), start, a.accepting, a.alphabet)
    return fa.remove_epsilon(shifted)


def _before_last_move(a: CostedAutomaton, last: Move) -> CostedAutomaton:
    """Words w such that w . last is a word of `a` (last letter removed)."""
    final = a.num_states
    transitions = set(a.transitions)
    for s, label, t in a.transitions:
        if label == last and t in a.accepting:
            transitions.add((s, None, final))
    return fa.trim(fa.remove_epsilon(
        CostedAutomaton(a.num_states + 1, frozenset(transitions), a.initial, frozenset({final}), a.alphabet)
    ))


# ----------------------------------------------------------------------------
# Denotation
# ----------------------------------------------------------------------------

def _const_term(value: DataValue) -> Const:
    if isinstance(value, bool):
        return Const(value, ty=exp_type(BOOL))
    return Const(value, ty=exp_type(int_data(value + 1)))


def apply_writer(writer: Term, value: DataValue) -> Term:
    """The command run by a mkvar writer when `value` is assigned."""
    argument = _const_term(value)
    if isinstance(writer, Lambda):
        return Tick("app", subst(writer.body, writer.param, argument), ty=COM)
    if isinstance(writer, Tick):
        return Tick(writer.kind, apply_writer(writer.body, value), ty=COM)
    return App(writer, argument, ty=COM)


class Denoter:
    """Translates normalized terms under a cost model; results keep occurrence tags."""

    def __init__(self, cost_model: CostModel):
        self.cm = cost_model

    def denote(self, term: Term) -> CostedAutomaton:
        method = getattr(self, f"_denote_{type(term).__name__}", None)
        if method is None:
            raise NonNormalTerm(f"cannot denote {type(term).__name__} nodes")
        return method(term)

    def _denote_Var(self, t: Var) -> CostedAutomaton:
        return copycat(t.ty, (t.tag,))

    def _denote_Const(self, t: Const) -> CostedAutomaton:
        return fa.declare(fa.word([q(), val(t.value)]), arena(t.ty))

    def _denote_Skip(self, t: Skip) -> CostedAutomaton:
        return fa.declare(fa.word([run(), done()]), arena(COM))

    def _denote_SkipDelim(self, t: SkipDelim) -> CostedAutomaton:
        return fa.declare(fa.word([run(), DELIM, done()]), arena(COM))

    def _denote_Diverge(self, t: Diverge) -> CostedAutomaton:
        return fa.empty(arena(COM))

    def _denote_Lambda(self, t: Lambda) -> CostedAutomaton:
        raise NonNormalTerm("lambda abstraction left in a normalized term")

    def _denote_LocalBlock(self, t: LocalBlock) -> CostedAutomaton:
        raise NonNormalTerm("allocated cells only exist during evaluation")

    def _denote_Tick(self, t: Tick) -> CostedAutomaton:
        if isinstance(t.ty, FunType):
            raise NonNormalTerm("cost charge around a function")
        return fa.insert_after_initial(self.denote(t.body), self.cm.cost(t.kind))

    def _denote_BinOp(self, t: BinOp) -> CostedAutomaton:
        left, right = t.left.ty, t.right.ty
        strategy = op_strategy(t.op, left.data, right.data, t.ty.data, self.cm.k_op(t.op))
        strategy = plug(strategy, "1", self.denote(t.left), left)
        return plug(strategy, "2", self.denote(t.right), right)

    def _denote_Seq(self, t: Seq) -> CostedAutomaton:
        strategy = plug(seq_strategy(self.cm.seq), "1", self.denote(t.first), COM)
        return plug(strategy, "2", self.denote(t.second), COM)

    def _denote_If(self, t: If) -> CostedAutomaton:
        strategy = plug(if_strategy(self.cm.if_), "1", self.denote(t.cond), exp_type(BOOL))
        strategy = plug(strategy, "2", self.denote(t.then), COM)
        return plug(strategy, "3", self.denote(t.orelse), COM)

    def _denote_While(self, t: While) -> CostedAutomaton:
        strategy = while_strategy(self.cm.if_, self.cm.seq)
        strategy = plug(strategy, "1", self.denote(t.cond), exp_type(BOOL))
        return plug(strategy, "2", self.denote(t.body), COM)

    @staticmethod
    def _access_cost(target: Term, cost: int) -> int:
        # mkvar access itself is free
        while isinstance(target, Tick):
            target = target.body
        return 0 if isinstance(target, MkVar) else cost

    def _denote_Assign(self, t: Assign) -> CostedAutomaton:
        target, value = t.target.ty, t.value.ty
        strategy = assign_strategy(target.data, value.data, self._access_cost(t.target, self.cm.asg))
        strategy = plug(strategy, "1", self.denote(t.target), target)
        return plug(strategy, "2", self.denote(t.value), value)

    def _denote_Deref(self, t: Deref) -> CostedAutomaton:
        target = t.target.ty
        strategy = deref_strategy(target.data, self._access_cost(t.target, self.cm.der))
        return plug(strategy, "1", self.denote(t.target), target)

    def _denote_New(self, t: New) -> CostedAutomaton:
        body = self.denote(t.body)
        init = _after_first_move(self.denote(t.init))
        tag = (t.name,)
        hidden = arena(var_type(t.data), tag)
        branches = []
        for v in t.data.values():
            evaluated = _before_last_move(init, val(v))
            if not evaluated.accepting:
                continue
            bound = fa.restrict(fa.synchronize(body, cell(t.data, v, tag), hidden), hidden)
            branches.append(_seq(run(), fa.tokens(self.cm.var), evaluated, _after_first_move(bound)))
        return fa.declare(fa.compact(_choice(branches)) if branches else fa.empty(), arena(COM))

    def _denote_MkVar(self, t: MkVar) -> CostedAutomaton:
        data = t.ty.data
        branches = []
        for n in data.values():
            command = self.denote(apply_writer(t.writer, n))
            body = _before_last_move(_after_first_move(command), done())
            branches.append(_seq(write(n), body, ok()))
        reader = _after_first_move(self.denote(t.reader))
        for n in data.values():
            branches.append(_seq(read(), _before_last_move(reader, val(n)), val(n)))
        return fa.declare(fa.compact(_choice(branches)), arena(t.ty))

    def _denote_ArrayElem(self, t: ArrayElem) -> CostedAutomaton:
        data = t.ty.data
        index = _after_first_move(self.denote(t.index))
        branches = []
        for v in t.index.ty.data.values():
            if isinstance(v, bool) or v >= len(t.elements):
                continue
            selected = _before_last_move(index, val(v))
            if not selected.accepting:
                continue
            tag = (t.elements[v].tag,)
            branches.append(_seq(
                read(), selected, read(*tag),
                _choice(fa.word([val(n, *tag), val(n)]) for n in data.values()),
            ))
            for n in data.values():
                branches.append(_seq(write(n), selected, write(n, *tag), ok(*tag), ok()))
        return fa.declare(fa.compact(_choice(branches)) if branches else fa.empty(), arena(t.ty))

    def _denote_App(self, t: App) -> CostedAutomaton:
        args: List[Term] = []
        head: Term = t
        while isinstance(head, App):
            args.insert(0, head.arg)
            head = head.fun
        if not isinstance(head, Var):
            raise NonNormalTerm(f"application headed by {type(head).__name__}")
        ty = head.ty
        if not isinstance(ty, FunType) or len(args) != len(ty.args):
            raise UnsupportedType(f"partial application of {head.name}")
        strategy = copycat(ty, (head.tag,))
        for i, arg in enumerate(args, 1):
            strategy = plug(strategy, str(i), self.denote(arg), ty.args[i - 1])
        return fa.insert_after_initial(strategy, self.cm.app * len(args))


def denote_term(term: Term, cost_model: CostModel) -> CostedAutomaton:
    """Denotation of a normalized term, keeping occurrence tags."""
    result = Denoter(cost_model).denote(term)
    logger.debug("[denote] %s", result.describe())
    return result


def denote(t: TypedTerm, cost_model: CostModel) -> CostedAutomaton:
    """Denotation of a normalized typed term, with contracted occurrences merged."""
    if not is_normal(t.term):
        raise NonNormalTerm("normalize the term before denoting it")
    return fa.compact(detag(denote_term(t.term, cost_model)))


def state_strategy(t: TypedTerm, state: GammaState) -> Dict[str, CostedAutomaton]:
    """Cells for every var identifier of the context, initialised from `state`."""
    context = t.var_context
    others = [name for name in t.context if name not in context]
    if others:
        raise ContextNotEmpty(f"identifiers without a var type: {', '.join(others)}")
    missing = [name for name in context if name not in state]
    extra = [name for name in state if name not in context]
    if missing or extra:
        raise StateDomainError(
            f"state does not cover the var context (missing: {missing}, unexpected: {extra})"
        )
    cells = {}
    for name, ty in context.items():
        if not ty.data.contains(state[name]):
            raise StateDomainError(f"value {state[name]!r} of {name} outside {ty.data.render()}")
        cells[name] = cell(ty.data, state[name], (name,))
    return cells


def denote_at_state(t: TypedTerm, state: GammaState, cost_model: CostModel) -> CostedAutomaton:
    """Denotation evaluated at a state: the var context is bound to cells and hidden."""
    cells = state_strategy(t, state)
    model = denote(t, cost_model)
    for name, strategy in cells.items():
        hidden = arena(t.var_context[name], (name,))
        model = fa.restrict(fa.synchronize(model, strategy, hidden), hidden)
    return model
