"""
Frontend: parse, typecheck, desugar and beta-normalize source programs.

Source files declare their identifiers and then give one typed term:

    high h : varint2 ;
    given f : expint2 -> com ;
    |- f (!h) : com

Undecorated declarations (`f : expint2 -> com`) also belong to the free
context. Arrays `x[k]` become k identifiers `x[0] .. x[k-1]`.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

from lark import Lark, Transformer, v_args
from lark.exceptions import UnexpectedCharacters, UnexpectedEOF, UnexpectedInput, VisitError

from slotgame.errors import ParseError, SecurityAnnotationError, TypeCheckError
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
    DataKind,
    Deref,
    Diverge,
    FunType,
    If,
    Lambda,
    MkVar,
    New,
    Pos,
    Seq,
    Skip,
    Term,
    Tick,
    Type,
    Var,
    While,
    apply_type,
    element_name,
    exp_type,
    fun_type,
    int_data,
    is_subtype,
    pretty,
    subst,
    var_type,
)

logger = logging.getLogger(__name__)


GRAMMAR = r"""
start: decl* "|-" seq ":" type

decl: role? NAME dims? ":" type _sep?
role: "high" -> high
    | "low" -> low
    | "given" -> given
dims: "[" INT "]"
_sep: ";" | "|" | ","

type: base_type ("->" base_type)*
base_type: "com" -> com
         | EXPINT -> expint
         | "expbool" -> expbool
         | VARINT -> varint
         | "varbool" -> varbool

seq: _items
_items: _last
      | control ";" _items
_last: control ";"?
     | new_block
     | lam

new_block: "new" NAME dims? ":" type ":=" orexpr "in" seq
lam: "\\" NAME ":" type "." seq

?control: "if" orexpr "then" control ";"? "else" control -> if_term
        | "while" orexpr "do" control -> while_term
        | prefix ":=" orexpr -> assign
        | orexpr

?orexpr: andexpr
       | orexpr "||" andexpr -> op_or
?andexpr: cmp
        | andexpr "&&" cmp -> op_and
?cmp: add
    | add "=" add -> op_eq
    | add "!=" add -> op_ne
    | add "<" add -> op_lt
    | add ">" add -> op_gt
?add: mul
    | add "+" mul -> op_plus
    | add "-" mul -> op_minus
?mul: app
    | mul "*" app -> op_times
?app: prefix
    | app prefix -> apply
?prefix: atom
       | "!" prefix -> deref
?atom: NAME -> ident
     | NAME "[" orexpr "]" -> index
     | INT -> int_lit
     | "tt" -> tt
     | "ff" -> ff
     | "skip" -> skip
     | "diverge" -> diverge
     | "mkvar" prefix prefix -> mkvar
     | "(" seq ")"
     | "{" seq "}"

EXPINT.2: /expint<?\d+>?/
VARINT.2: /varint<?\d+>?/
NAME: /[A-Za-z_][A-Za-z0-9_]*/
INT: /\d+/
COMMENT: /#[^\n]*/

%import common.WS
%ignore WS
%ignore COMMENT
"""

_PARSER = Lark(GRAMMAR, parser="lalr", propagate_positions=True)


# ----------------------------------------------------------------------------
# Parse-tree level nodes, resolved by the typechecker
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class Decl:
    role: str
    name: str
    dims: Optional[int]
    type: Type
    pos: Pos = None


@dataclass(frozen=True)
class Program:
    decls: Tuple[Decl, ...]
    term: Term
    declared_type: Type


@dataclass(frozen=True)
class _ArrayRef(Term):
    name: str
    index: Term
    ty: Optional[Type] = None
    pos: Pos = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class _NewDecl(Term):
    name: str
    dims: Optional[int]
    decl_type: Type
    init: Term
    body: Term
    ty: Optional[Type] = None
    pos: Pos = field(default=None, compare=False, repr=False)


def _meta_pos(meta) -> Pos:
    line = getattr(meta, "line", None)
    if line is None:
        return None
    return (line, meta.column)


def _size(token) -> int:
    digits = "".join(ch for ch in str(token) if ch.isdigit())
    return int(digits)


@v_args(meta=True)
class _AstBuilder(Transformer):
    """Turns the lark parse tree into untyped term nodes."""

    def start(self, meta, children):
        *decls, term, declared = children
        return Program(tuple(decls), term, declared)

    def decl(self, meta, children):
        role = "given"
        if isinstance(children[0], str) and children[0] in ("high", "low", "given") and len(children) > 2:
            role = children[0]
            children = children[1:]
        name = str(children[0])
        dims = children[1] if len(children) == 3 else None
        return Decl(role, name, dims, children[-1], _meta_pos(meta))

    def high(self, meta, children):
        return "high"

    def low(self, meta, children):
        return "low"

    def given(self, meta, children):
        return "given"

    def dims(self, meta, children):
        return int(children[0])

    def type(self, meta, children):
        *args, result = children
        return fun_type(tuple(args), result)

    def com(self, meta, children):
        return COM

    def expint(self, meta, children):
        return exp_type(int_data(_size(children[0])))

    def expbool(self, meta, children):
        return exp_type(BOOL)

    def varint(self, meta, children):
        return var_type(int_data(_size(children[0])))

    def varbool(self, meta, children):
        return var_type(BOOL)

    def seq(self, meta, children):
        result = children[-1]
        for item in reversed(children[:-1]):
            result = Seq(item, result, pos=item.pos)
        return result

    def new_block(self, meta, children):
        name = str(children[0])
        if len(children) == 5:
            _, dims, decl_type, init, body = children
        else:
            dims = None
            _, decl_type, init, body = children
        return _NewDecl(name, dims, decl_type, init, body, pos=_meta_pos(meta))

    def lam(self, meta, children):
        name, param_type, body = children
        return Lambda(str(name), param_type, body, pos=_meta_pos(meta))

    def if_term(self, meta, children):
        cond, then, orelse = children
        return If(cond, then, orelse, pos=_meta_pos(meta))

    def while_term(self, meta, children):
        cond, body = children
        return While(cond, body, pos=_meta_pos(meta))

    def assign(self, meta, children):
        target, value = children
        return Assign(target, value, pos=_meta_pos(meta))

    def _binop(op):
        def build(self, meta, children):
            left, right = children
            return BinOp(op, left, right, pos=_meta_pos(meta))
        return build

    op_or = _binop("||")
    op_and = _binop("&&")
    op_eq = _binop("=")
    op_ne = _binop("!=")
    op_lt = _binop("<")
    op_gt = _binop(">")
    op_plus = _binop("+")
    op_minus = _binop("-")
    op_times = _binop("*")

    def apply(self, meta, children):
        fun, arg = children
        return App(fun, arg, pos=_meta_pos(meta))

    def deref(self, meta, children):
        return Deref(children[0], pos=_meta_pos(meta))

    def ident(self, meta, children):
        return Var(str(children[0]), pos=_meta_pos(meta))

    def index(self, meta, children):
        name, index = children
        return _ArrayRef(str(name), index, pos=_meta_pos(meta))

    def int_lit(self, meta, children):
        return Const(int(children[0]), pos=_meta_pos(meta))

    def tt(self, meta, children):
        return Const(True, pos=_meta_pos(meta))

    def ff(self, meta, children):
        return Const(False, pos=_meta_pos(meta))

    def skip(self, meta, children):
        return Skip(pos=_meta_pos(meta))

    def diverge(self, meta, children):
        return Diverge(pos=_meta_pos(meta))

    def mkvar(self, meta, children):
        writer, reader = children
        return MkVar(writer, reader, pos=_meta_pos(meta))


def parse_program(text: str) -> Program:
    """Parse source text into declarations and an untyped term."""
    try:
        tree = _PARSER.parse(text)
    except UnexpectedEOF as e:
        raise ParseError("unexpected end of input") from e
    except UnexpectedCharacters as e:
        raise ParseError(f"unexpected character {e.char!r}", (e.line, e.column)) from e
    except UnexpectedInput as e:
        token = getattr(e, "token", None)
        raise ParseError(f"unexpected token {str(token)!r}", (e.line, e.column)) from e
    try:
        return _AstBuilder().transform(tree)
    except VisitError as e:
        raise ParseError(str(e.orig_exc)) from e


# ----------------------------------------------------------------------------
# Typed terms
# ----------------------------------------------------------------------------

@dataclass(frozen=True)
class TypedTerm:
    """
    A typechecked term with its split context.

    high_context and low_context list var identifiers with their types,
    delta lists the free context; occurrence_map gives, per free-context
    identifier, the tags of its contracted occurrences in term order.
    """
    term: Term
    high_context: Tuple[Tuple[str, BaseType], ...] = ()
    delta: Tuple[Tuple[str, Type], ...] = ()
    low_context: Tuple[Tuple[str, BaseType], ...] = ()
    result_type: Type = COM
    occurrence_map: Dict[str, Tuple[str, ...]] = field(default_factory=dict, compare=False)
    arrays: Dict[str, Tuple[str, ...]] = field(default_factory=dict, compare=False)

    @property
    def context(self) -> Dict[str, Type]:
        """All declared identifiers with their types."""
        result: Dict[str, Type] = {}
        for name, ty in self.high_context + self.low_context + self.delta:
            result[name] = ty
        return result

    @property
    def var_context(self) -> Dict[str, BaseType]:
        return {
            name: ty for name, ty in self.context.items()
            if isinstance(ty, BaseType) and ty.kind == BaseKind.VAR
        }

    @property
    def high(self) -> Tuple[str, BaseType]:
        if len(self.high_context) != 1:
            raise SecurityAnnotationError(
                f"timing checks need exactly one high variable, found {len(self.high_context)}"
            )
        return self.high_context[0]

    @property
    def low(self) -> Optional[Tuple[str, BaseType]]:
        if not self.low_context:
            return None
        if len(self.low_context) != 1:
            raise SecurityAnnotationError("at most one low variable may be declared")
        return self.low_context[0]

    def with_term(self, term: Term) -> "TypedTerm":
        return replace(self, term=term, occurrence_map=collect_occurrences(term))

    def render(self) -> str:
        """Source text that parses back to an alpha-equivalent typed term."""
        lines = []
        for role, entries in (("high", self.high_context), ("low", self.low_context), ("given", self.delta)):
            for name, ty in _group_arrays(entries, self.arrays):
                lines.append(f"{role} {name} : {ty.render()} ;")
        lines.append(f"|- {pretty(self.term)} : {self.result_type.render()}")
        return "\n".join(lines) + "\n"


def _group_arrays(entries, arrays):
    seen = set()
    for name, ty in entries:
        base = next((a for a, elems in arrays.items() if name in elems), None)
        if base is None:
            yield name, ty
        elif base not in seen:
            seen.add(base)
            yield f"{base}[{len(arrays[base])}]", ty


def collect_occurrences(term: Term) -> Dict[str, Tuple[str, ...]]:
    result: Dict[str, List[str]] = {}

    def visit(node: Term) -> None:
        if isinstance(node, Var) and node.occurrence is not None:
            result.setdefault(node.name, []).append(node.tag)
        for child in node.children():
            visit(child)

    visit(term)
    return {name: tuple(tags) for name, tags in result.items()}


# ----------------------------------------------------------------------------
# Typechecker
# ----------------------------------------------------------------------------

_ARITH = {"+", "-", "*"}
_ORDER = {"<", ">"}
_EQUALITY = {"=", "!="}
_LOGIC = {"&&", "||"}


@dataclass(frozen=True)
class _Binding:
    type: Type
    role: str


class TypeChecker:
    """
    Checks a parsed program and produces a TypedTerm.

    Free-context identifiers get an occurrence number per use, numbered left
    to right per identifier; these record the contraction of the term.
    """

    def __init__(self, program: Program):
        self.program = program
        self.env: Dict[str, _Binding] = {}
        self.arrays: Dict[str, Tuple[str, ...]] = {}
        self.counters: Dict[str, int] = {}

    def check(self) -> TypedTerm:
        high, low, delta = [], [], []
        declared_arrays: Dict[str, Tuple[str, ...]] = {}
        for decl in self.program.decls:
            entries = self._declare(decl, declared_arrays)
            {"high": high, "low": low, "given": delta}[decl.role].extend(entries)
        term = self.infer(self.program.term)
        if not is_subtype(term.ty, self.program.declared_type):
            raise TypeCheckError(
                "term does not have its declared type",
                self.program.declared_type.render(), term.ty.render(), term.pos,
            )
        return TypedTerm(
            term=term,
            high_context=tuple(high),
            delta=tuple(delta),
            low_context=tuple(low),
            result_type=self.program.declared_type,
            occurrence_map=collect_occurrences(term),
            arrays=declared_arrays,
        )

    def _declare(self, decl: Decl, declared_arrays) -> List[Tuple[str, Type]]:
        if decl.role in ("high", "low"):
            if not (isinstance(decl.type, BaseType) and decl.type.kind == BaseKind.VAR):
                raise SecurityAnnotationError(
                    f"{decl.role} identifier {decl.name} must have a var type, not {decl.type.render()}"
                )
        if isinstance(decl.type, FunType) and any(isinstance(a, FunType) for a in decl.type.args):
            raise TypeCheckError(f"{decl.name} has a higher-order type", position=decl.pos)
        names = [decl.name]
        if decl.dims is not None:
            if decl.dims < 1:
                raise TypeCheckError(f"array {decl.name} must have at least one element", position=decl.pos)
            names = [element_name(decl.name, i) for i in range(decl.dims)]
            self.arrays[decl.name] = tuple(names)
            declared_arrays[decl.name] = tuple(names)
        entries = []
        for name in names:
            if name in self.env:
                raise TypeCheckError(f"identifier {name} declared twice", position=decl.pos)
            role = "delta" if decl.role == "given" else decl.role
            self.env[name] = _Binding(decl.type, role)
            entries.append((name, decl.type))
        return entries

    # -- expressions ------------------------------------------------------

    def infer(self, t: Term) -> Term:
        method = getattr(self, f"_infer_{type(t).__name__}", None)
        if method is None:
            raise TypeCheckError(f"unexpected construct {type(t).__name__}", position=t.pos)
        return method(t)

    def _lookup(self, name: str, pos: Pos) -> _Binding:
        binding = self.env.get(name)
        if binding is None:
            raise TypeCheckError(f"unbound identifier {name}", position=pos)
        return binding

    def _occurrence(self, name: str, binding: _Binding) -> Optional[int]:
        if binding.role != "delta":
            return None
        self.counters[name] = self.counters.get(name, 0) + 1
        return self.counters[name]

    def _infer_Var(self, t: Var) -> Term:
        binding = self._lookup(t.name, t.pos)
        return replace(t, ty=binding.type, occurrence=self._occurrence(t.name, binding))

    def _infer__ArrayRef(self, t: _ArrayRef) -> Term:
        if isinstance(t.index, Const) and not isinstance(t.index.value, bool):
            return self._infer_Var(Var(element_name(t.name, t.index.value), pos=t.pos))
        names = self.arrays.get(t.name)
        if names is None:
            raise TypeCheckError(f"{t.name} is not an array", position=t.pos)
        index = self.infer(t.index)
        self._expect_int(index)
        elements = tuple(self._infer_Var(Var(name, pos=t.pos)) for name in names)
        return ArrayElem(index, elements, ty=elements[0].ty, pos=t.pos)

    def _infer_Const(self, t: Const) -> Term:
        if isinstance(t.value, bool):
            return replace(t, ty=exp_type(BOOL))
        return replace(t, ty=exp_type(int_data(t.value + 1)))

    def _infer_Skip(self, t: Skip) -> Term:
        return t

    def _infer_Diverge(self, t: Diverge) -> Term:
        return t

    def _infer_BinOp(self, t: BinOp) -> Term:
        left = self.infer(t.left)
        right = self.infer(t.right)
        if t.op in _LOGIC:
            self._expect(left, exp_type(BOOL))
            self._expect(right, exp_type(BOOL))
            ty = exp_type(BOOL)
        elif t.op in _EQUALITY and _is_exp_bool(left.ty):
            self._expect(right, exp_type(BOOL))
            ty = exp_type(BOOL)
        else:
            self._expect_int(left)
            self._expect_int(right)
            if t.op in _ARITH:
                ty = exp_type(int_data(max(left.ty.data.size, right.ty.data.size)))
            else:
                ty = exp_type(BOOL)
        return replace(t, left=left, right=right, ty=ty)

    def _infer_Seq(self, t: Seq) -> Term:
        first = self._check_com(t.first)
        second = self._check_com(t.second)
        return replace(t, first=first, second=second, ty=COM)

    def _infer_If(self, t: If) -> Term:
        cond = self.infer(t.cond)
        self._expect(cond, exp_type(BOOL))
        return replace(t, cond=cond, then=self._check_com(t.then), orelse=self._check_com(t.orelse))

    def _infer_While(self, t: While) -> Term:
        cond = self.infer(t.cond)
        self._expect(cond, exp_type(BOOL))
        return replace(t, cond=cond, body=self._check_com(t.body))

    def _infer_Assign(self, t: Assign) -> Term:
        target = self.infer(t.target)
        data = self._var_data(target)
        value = self.infer(t.value)
        self._expect(value, exp_type(data))
        return replace(t, target=target, value=value)

    def _infer_Deref(self, t: Deref) -> Term:
        target = self.infer(t.target)
        return replace(t, target=target, ty=exp_type(self._var_data(target)))

    def _infer__NewDecl(self, t: _NewDecl) -> Term:
        decl_type = t.decl_type
        if not (isinstance(decl_type, BaseType) and decl_type.kind == BaseKind.VAR):
            raise TypeCheckError("local variables need a var type", "var type", decl_type.render(), t.pos)
        init = self.infer(t.init)
        self._expect(init, exp_type(decl_type.data))
        names = [t.name] if t.dims is None else [element_name(t.name, i) for i in range(t.dims)]
        saved_env, saved_arrays = dict(self.env), dict(self.arrays)
        for name in names:
            self.env[name] = _Binding(decl_type, "local")
        if t.dims is not None:
            self.arrays[t.name] = tuple(names)
        elif t.name in self.arrays:
            del self.arrays[t.name]
        try:
            body = self._check_com(t.body)
        finally:
            self.env, self.arrays = saved_env, saved_arrays
        for name in reversed(names):
            body = New(name, decl_type.data, init, body, pos=t.pos)
        return body

    def _infer_MkVar(self, t: MkVar) -> Term:
        writer = self.infer(t.writer)
        reader = self.infer(t.reader)
        if not (
            isinstance(writer.ty, FunType)
            and len(writer.ty.args) == 1
            and writer.ty.result == COM
            and isinstance(writer.ty.args[0], BaseType)
            and writer.ty.args[0].kind == BaseKind.EXP
        ):
            raise TypeCheckError("mkvar writer must have type expD -> com", "expD -> com", writer.ty.render(), t.pos)
        data = writer.ty.args[0].data
        self._expect(reader, exp_type(data))
        return replace(t, writer=writer, reader=reader, ty=var_type(data))

    def _infer_Lambda(self, t: Lambda) -> Term:
        if not isinstance(t.param_type, BaseType):
            raise TypeCheckError("lambda parameters must have a base type", "base type", t.param_type.render(), t.pos)
        saved = self.env.get(t.param)
        self.env[t.param] = _Binding(t.param_type, "param")
        try:
            body = self.infer(t.body)
        finally:
            if saved is None:
                del self.env[t.param]
            else:
                self.env[t.param] = saved
        return replace(t, body=body, ty=fun_type((t.param_type,), body.ty))

    def _infer_App(self, t: App) -> Term:
        fun = self.infer(t.fun)
        if not isinstance(fun.ty, FunType):
            raise TypeCheckError("applying a non-function", "function type", fun.ty.render(), t.pos)
        arg = self.infer(t.arg)
        self._expect(arg, fun.ty.args[0])
        return replace(t, fun=fun, arg=arg, ty=apply_type(fun.ty))

    # -- helpers ----------------------------------------------------------

    def _check_com(self, t: Term) -> Term:
        typed = self.infer(t)
        self._expect(typed, COM)
        return typed

    def _expect(self, t: Term, expected: Type) -> None:
        if not is_subtype(t.ty, expected):
            raise TypeCheckError("type mismatch", expected.render(), t.ty.render(), t.pos)

    def _expect_int(self, t: Term) -> None:
        ty = t.ty
        if not (isinstance(ty, BaseType) and ty.kind == BaseKind.EXP and ty.data.kind == DataKind.INT):
            raise TypeCheckError("type mismatch", "expint", ty.render(), t.pos)

    def _var_data(self, t: Term):
        ty = t.ty
        if not (isinstance(ty, BaseType) and ty.kind == BaseKind.VAR):
            raise TypeCheckError("expected a variable", "var type", ty.render(), t.pos)
        return ty.data


def _is_exp_bool(ty: Type) -> bool:
    return isinstance(ty, BaseType) and ty.kind == BaseKind.EXP and ty.data.kind == DataKind.BOOL


def parse_and_typecheck(text: str) -> TypedTerm:
    """Parse UTF-8 source text and typecheck it."""
    program = parse_program(text)
    typed = TypeChecker(program).check()
    logger.debug(
        "typechecked term: %d high, %d low, %d free identifiers",
        len(typed.high_context), len(typed.low_context), len(typed.delta),
    )
    return typed


# ----------------------------------------------------------------------------
# Normalization
# ----------------------------------------------------------------------------

def normalize(t: TypedTerm) -> TypedTerm:
    """
    Beta-reduce every redex, leaving a Tick("app") where one was reduced.

    Applications headed by free identifiers stay. A lambda survives only as
    the writer of a mkvar. Free-context occurrences are renumbered left to
    right afterwards since substitution may copy them.
    """
    term = renumber_occurrences(_normalize(t.term))
    return t.with_term(term)


def _normalize(term: Term) -> Term:
    if isinstance(term, App):
        return _apply(_normalize(term.fun), _normalize(term.arg), term.ty)
    return term.map_children(_normalize)


def _apply(fun: Term, arg: Term, ty: Optional[Type]) -> Term:
    if isinstance(fun, Lambda):
        return Tick("app", subst(fun.body, fun.param, arg), ty=ty, pos=fun.pos)
    if isinstance(fun, Tick):
        return Tick(fun.kind, _apply(fun.body, arg, ty), ty=ty, pos=fun.pos)
    return App(fun, arg, ty=ty)


def renumber_occurrences(term: Term) -> Term:
    counters: Dict[str, int] = {}

    def visit(node: Term) -> Term:
        if isinstance(node, Var) and node.occurrence is not None:
            counters[node.name] = counters.get(node.name, 0) + 1
            return replace(node, occurrence=counters[node.name])
        return node.map_children(visit)

    return visit(term)


def is_normal(term: Term, allow_writer: bool = False) -> bool:
    """True if no lambda remains outside mkvar writers."""
    if isinstance(term, Lambda):
        return allow_writer and is_normal(term.body)
    if isinstance(term, MkVar):
        return is_normal(term.writer, allow_writer=True) and is_normal(term.reader)
    if isinstance(term, Tick) and allow_writer:
        return is_normal(term.body, allow_writer=True)
    return all(is_normal(child) for child in term.children())
