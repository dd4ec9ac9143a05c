"""
Abstract syntax of second-order Idealized Algol.

Types, term nodes, capture-avoiding substitution and a pretty printer whose
output the frontend parses back.
"""

import itertools
import re
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from typing import Callable, Dict, Iterator, List, Optional, Set, Tuple, Union

from slotgame.models import DataValue, render_value


# ----------------------------------------------------------------------------
# Types
# ----------------------------------------------------------------------------

class DataKind(str, Enum):
    INT = "int"
    BOOL = "bool"


@dataclass(frozen=True)
class DataType:
    """Finite data set: int_n = {0..n-1} or bool."""
    kind: DataKind
    size: int = 2

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("int sizes must be at least 1")

    def values(self) -> Tuple[DataValue, ...]:
        if self.kind == DataKind.BOOL:
            return (False, True)
        return tuple(range(self.size))

    def contains(self, value: DataValue) -> bool:
        if self.kind == DataKind.BOOL:
            return isinstance(value, bool)
        return isinstance(value, int) and not isinstance(value, bool) and 0 <= value < self.size

    def render(self) -> str:
        return "bool" if self.kind == DataKind.BOOL else f"int{self.size}"


BOOL = DataType(DataKind.BOOL)


def int_data(size: int) -> DataType:
    return DataType(DataKind.INT, size)


class BaseKind(str, Enum):
    EXP = "exp"
    VAR = "var"
    COM = "com"


@dataclass(frozen=True)
class BaseType:
    kind: BaseKind
    data: Optional[DataType] = None

    @property
    def order(self) -> int:
        return 0

    def render(self) -> str:
        if self.kind == BaseKind.COM:
            return "com"
        return f"{self.kind.value}{self.data.render()}"


@dataclass(frozen=True)
class FunType:
    """Function type B1 -> ... -> Bk -> B."""
    args: Tuple["Type", ...]
    result: BaseType

    @property
    def order(self) -> int:
        return 1 + max(arg.order for arg in self.args)

    def render(self) -> str:
        parts = []
        for arg in self.args:
            text = arg.render()
            parts.append(f"({text})" if isinstance(arg, FunType) else text)
        return " -> ".join(parts + [self.result.render()])


Type = Union[BaseType, FunType]

COM = BaseType(BaseKind.COM)


def exp_type(data: DataType) -> BaseType:
    return BaseType(BaseKind.EXP, data)


def var_type(data: DataType) -> BaseType:
    return BaseType(BaseKind.VAR, data)


def fun_type(args: Tuple[Type, ...], result: Type) -> Type:
    """Curry args onto result, flattening a function-typed result."""
    if not args:
        return result
    if isinstance(result, FunType):
        return FunType(tuple(args) + result.args, result.result)
    return FunType(tuple(args), result)


def apply_type(ty: FunType) -> Type:
    """Type left after supplying the first argument."""
    if len(ty.args) == 1:
        return ty.result
    return FunType(ty.args[1:], ty.result)


def is_subtype(actual: Type, expected: Type) -> bool:
    """expint<m> is accepted where expint<n> is expected when m <= n."""
    if actual == expected:
        return True
    if isinstance(actual, BaseType) and isinstance(expected, BaseType):
        return (
            actual.kind == expected.kind == BaseKind.EXP
            and actual.data.kind == expected.data.kind == DataKind.INT
            and actual.data.size <= expected.data.size
        )
    return False


# ----------------------------------------------------------------------------
# Terms
# ----------------------------------------------------------------------------

Pos = Optional[Tuple[int, int]]


class Term:
    """Base class of all term nodes."""

    ty: Optional[Type]
    pos: Pos

    def children(self) -> List["Term"]:
        result = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, Term):
                result.append(value)
            elif isinstance(value, tuple) and value and isinstance(value[0], Term):
                result.extend(value)
        return result

    def map_children(self, fn: Callable[["Term"], "Term"]) -> "Term":
        updates = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, Term):
                updates[f.name] = fn(value)
            elif isinstance(value, tuple) and value and isinstance(value[0], Term):
                updates[f.name] = tuple(fn(item) for item in value)
        return replace(self, **updates) if updates else self

    def __str__(self) -> str:
        return pretty(self)


def _pos():
    return field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Var(Term):
    """Identifier; occurrence numbers distinguish contracted free occurrences."""
    name: str
    occurrence: Optional[int] = None
    ty: Optional[Type] = None
    pos: Pos = _pos()

    @property
    def tag(self) -> str:
        if self.occurrence is None:
            return self.name
        return f"{self.name}#{self.occurrence}"


@dataclass(frozen=True)
class Const(Term):
    value: DataValue
    ty: Optional[Type] = None
    pos: Pos = _pos()


@dataclass(frozen=True)
class Skip(Term):
    ty: Optional[Type] = COM
    pos: Pos = _pos()


@dataclass(frozen=True)
class SkipDelim(Term):
    """skip with a delimiter; only injected by the security builders."""
    ty: Optional[Type] = COM
    pos: Pos = _pos()


@dataclass(frozen=True)
class Diverge(Term):
    ty: Optional[Type] = COM
    pos: Pos = _pos()


@dataclass(frozen=True)
class BinOp(Term):
    op: str
    left: Term
    right: Term
    ty: Optional[Type] = None
    pos: Pos = _pos()


@dataclass(frozen=True)
class Seq(Term):
    first: Term
    second: Term
    ty: Optional[Type] = COM
    pos: Pos = _pos()


@dataclass(frozen=True)
class If(Term):
    cond: Term
    then: Term
    orelse: Term
    ty: Optional[Type] = COM
    pos: Pos = _pos()


@dataclass(frozen=True)
class While(Term):
    cond: Term
    body: Term
    ty: Optional[Type] = COM
    pos: Pos = _pos()


@dataclass(frozen=True)
class Assign(Term):
    target: Term
    value: Term
    ty: Optional[Type] = COM
    pos: Pos = _pos()


@dataclass(frozen=True)
class Deref(Term):
    target: Term
    ty: Optional[Type] = None
    pos: Pos = _pos()


@dataclass(frozen=True)
class New(Term):
    """new x : var D := init in body."""
    name: str
    data: DataType
    init: Term
    body: Term
    ty: Optional[Type] = COM
    pos: Pos = _pos()


@dataclass(frozen=True)
class MkVar(Term):
    writer: Term
    reader: Term
    ty: Optional[Type] = None
    pos: Pos = _pos()


@dataclass(frozen=True)
class Lambda(Term):
    param: str
    param_type: BaseType
    body: Term
    ty: Optional[Type] = None
    pos: Pos = _pos()


@dataclass(frozen=True)
class App(Term):
    fun: Term
    arg: Term
    ty: Optional[Type] = None
    pos: Pos = _pos()


@dataclass(frozen=True)
class Tick(Term):
    """Charges the cost of `kind` (a cost-model key) and continues as body."""
    kind: str
    body: Term
    ty: Optional[Type] = None
    pos: Pos = _pos()


@dataclass(frozen=True)
class ArrayElem(Term):
    """
    Array element selected by a run-time index.

    `elements` holds one identifier per element; an index outside
    0..len(elements)-1 diverges.
    """
    index: Term
    elements: Tuple[Term, ...]
    ty: Optional[Type] = None
    pos: Pos = _pos()

    @property
    def array(self) -> str:
        first = self.elements[0]
        parts = split_element(first.name) if isinstance(first, Var) else None
        return parts[0] if parts else str(first)


@dataclass(frozen=True)
class LocalBlock(Term):
    """Scope of an allocated cell during evaluation; never written by users."""
    name: str
    body: Term
    ty: Optional[Type] = COM
    pos: Pos = _pos()


def element_name(array: str, index: int) -> str:
    return f"{array}[{index}]"


_ELEMENT = re.compile(r"^(?P<base>[^\[]+)\[(?P<index>\d+)\]$")
_OCCURRENCE = re.compile(r"#\d+$")


def split_element(name: str) -> Optional[Tuple[str, int]]:
    match = _ELEMENT.match(name)
    if not match:
        return None
    return match.group("base"), int(match.group("index"))


def detag_name(tag: str) -> str:
    """Strip the occurrence suffix of a contracted identifier tag."""
    return _OCCURRENCE.sub("", tag)


def primed(name: str) -> str:
    """Name of the self-composition copy of a bound or high identifier."""
    parts = split_element(name)
    if parts:
        return element_name(parts[0] + "'", parts[1])
    return name + "'"


# ----------------------------------------------------------------------------
# Free variables, substitution, renaming
# ----------------------------------------------------------------------------

def walk(term: Term) -> Iterator[Term]:
    yield term
    for child in term.children():
        yield from walk(child)


def free_vars(term: Term) -> Set[str]:
    if isinstance(term, Var):
        return {term.name}
    if isinstance(term, Lambda):
        return free_vars(term.body) - {term.param}
    if isinstance(term, New):
        return free_vars(term.init) | (free_vars(term.body) - {term.name})
    if isinstance(term, LocalBlock):
        return free_vars(term.body) - {term.name}
    result: Set[str] = set()
    for child in term.children():
        result |= free_vars(child)
    return result


def bound_names(term: Term) -> Set[str]:
    names = set()
    for node in walk(term):
        if isinstance(node, Lambda):
            names.add(node.param)
        elif isinstance(node, (New, LocalBlock)):
            names.add(node.name)
    return names


def fresh_name(base: str, avoid: Set[str]) -> str:
    parts = split_element(base)
    for i in itertools.count(1):
        candidate = element_name(f"{parts[0]}{i}", parts[1]) if parts else f"{base}{i}"
        if candidate not in avoid:
            return candidate
    raise AssertionError("unreachable")


def subst(term: Term, name: str, replacement: Term) -> Term:
    """Capture-avoiding substitution term[replacement/name]."""
    if isinstance(term, Var):
        return replacement if term.name == name else term
    if isinstance(term, (Lambda, New)):
        if isinstance(term, New):
            term = replace(term, init=subst(term.init, name, replacement))
        bound = term.param if isinstance(term, Lambda) else term.name
        if bound == name or name not in free_vars(term.body):
            return term
        if bound in free_vars(replacement):
            avoid = free_vars(term.body) | bound_names(term.body) | free_vars(replacement) | {name}
            term = rename_binder(term, fresh_name(bound, avoid))
        return replace(term, body=subst(term.body, name, replacement))
    return term.map_children(lambda child: subst(child, name, replacement))


def rename_binder(term: Term, fresh: str) -> Term:
    if isinstance(term, Lambda):
        return replace(term, param=fresh, body=rename_free(term.body, term.param, fresh))
    return replace(term, name=fresh, body=rename_free(term.body, term.name, fresh))


def rename_free(term: Term, old: str, new: str) -> Term:
    """Rename free occurrences of identifier `old` to `new`."""
    return rename(term, {old: new})


def rename(term: Term, mapping: Dict[str, str]) -> Term:
    """Simultaneously rename free identifiers, preserving occurrence numbers."""
    if isinstance(term, Var):
        return replace(term, name=mapping[term.name]) if term.name in mapping else term
    if isinstance(term, (Lambda, New, LocalBlock)):
        if isinstance(term, New):
            term = replace(term, init=rename(term.init, mapping))
        bound = term.param if isinstance(term, Lambda) else term.name
        inner = {old: new for old, new in mapping.items() if old != bound}
        if bound in inner.values():
            avoid = free_vars(term.body) | bound_names(term.body) | set(inner.values()) | set(inner)
            term = rename_binder(term, fresh_name(bound, avoid))
            bound = term.param if isinstance(term, Lambda) else term.name
        return replace(term, body=rename(term.body, inner))
    return term.map_children(lambda child: rename(child, mapping))


# ----------------------------------------------------------------------------
# Pretty printer
# ----------------------------------------------------------------------------

_PRECEDENCE = {"||": 1, "&&": 2, "=": 3, "!=": 3, "<": 3, ">": 3, "+": 4, "-": 4, "*": 5}
_APP_LEVEL = 6
_COMPARISON = 3


def pretty(term: Term) -> str:
    return _Printer().term(term)


def render_decl_type(data: DataType) -> str:
    return "varbool" if data.kind == DataKind.BOOL else f"varint{data.size}"


class _Printer:
    """Printer for the concrete syntax; parenthesises by operator precedence."""

    def term(self, t: Term) -> str:
        if isinstance(t, Seq):
            first = t.first
            text = self.block(first) if isinstance(first, (New, Lambda)) else self.control(first)
            return f"{text}; {self.term(t.second)}"
        return self.control(t)

    def control(self, t: Term) -> str:
        if isinstance(t, If):
            return f"if {self.expr(t.cond)} then {self.block(t.then)} else {self.block(t.orelse)}"
        if isinstance(t, While):
            return f"while {self.expr(t.cond)} do {self.block(t.body)}"
        if isinstance(t, New):
            return self.new(t)
        if isinstance(t, Lambda):
            return f"\\{t.param} : {t.param_type.render()}. {self.block(t.body)}"
        if isinstance(t, Assign):
            return f"{self.prefix(t.target)} := {self.expr(t.value)}"
        if isinstance(t, Seq):
            return f"{{ {self.term(t)} }}"
        return self.expr(t)

    def new(self, t: New) -> str:
        parts = split_element(t.name)
        decl = render_decl_type(t.data)
        if parts and parts[1] == 0:
            size, body = 1, t.body
            while (
                isinstance(body, New)
                and body.name == element_name(parts[0], size)
                and body.data == t.data
                and body.init == t.init
            ):
                size, body = size + 1, body.body
            return f"new {parts[0]}[{size}] : {decl} := {self.expr(t.init)} in {self.block(body)}"
        return f"new {t.name} : {decl} := {self.expr(t.init)} in {self.block(t.body)}"

    def block(self, t: Term) -> str:
        if isinstance(t, (Seq, If, While, New, Lambda, Assign)):
            return f"{{ {self.term(t)} }}"
        return self.expr(t)

    def expr(self, t: Term, level: int = 0) -> str:
        if isinstance(t, BinOp):
            prec = _PRECEDENCE[t.op]
            left_level = prec + 1 if prec == _COMPARISON else prec
            text = f"{self.expr(t.left, left_level)} {t.op} {self.expr(t.right, prec + 1)}"
            return f"({text})" if prec < level else text
        if isinstance(t, App):
            text = f"{self.expr(t.fun, _APP_LEVEL)} {self.prefix(t.arg)}"
            return f"({text})" if level > _APP_LEVEL else text
        if isinstance(t, (If, While, New, Lambda, Assign, Seq)):
            return f"({self.term(t)})"
        return self.prefix(t)

    def prefix(self, t: Term) -> str:
        if isinstance(t, Deref):
            return f"!{self.prefix(t.target)}"
        return self.atom(t)

    def atom(self, t: Term) -> str:
        if isinstance(t, Var):
            return t.name
        if isinstance(t, Const):
            return render_value(t.value)
        if isinstance(t, Skip):
            return "skip"
        if isinstance(t, Diverge):
            return "diverge"
        if isinstance(t, ArrayElem):
            return f"{t.array}[{self.expr(t.index)}]"
        if isinstance(t, MkVar):
            return f"mkvar {self.block(t.writer)} {self.block(t.reader)}"
        if isinstance(t, SkipDelim):
            return "skip#"
        if isinstance(t, Tick):
            return f"tick[{t.kind}] {self.block(t.body)}"
        if isinstance(t, LocalBlock):
            return f"local {t.name} in {self.block(t.body)}"
        return f"({self.term(t)})"


def evaluate_op(op: str, left: DataValue, right: DataValue, result: DataType) -> DataValue:
    """Value of `left op right`; arithmetic wraps modulo the result size."""
    if op == "+":
        return (left + right) % result.size
    if op == "-":
        return (left - right) % result.size
    if op == "*":
        return (left * right) % result.size
    if op == "<":
        return left < right
    if op == ">":
        return left > right
    if op == "=":
        return left == right
    if op == "!=":
        return left != right
    if op == "&&":
        return left and right
    if op == "||":
        return left or right
    raise ValueError(f"unknown operator {op}")
