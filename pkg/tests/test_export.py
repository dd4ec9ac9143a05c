import re
from dataclasses import dataclass, field

import pytest

from slotgame import automaton as fa
from slotgame.errors import UnboundedCost
from slotgame.export import emit_csp, emit_dot
from slotgame.frontend import normalize
from slotgame.gamesem import denote
from slotgame.models import DELIM, TOKEN, UNBOUNDED, CostModel, done, q, run, val
from slotgame.security import Approximation, build_tani_model, build_timing_model


def _count(pattern, text):
    return len(re.findall(pattern, text, flags=re.MULTILINE))


def test_dot_of_a_single_play():
    text = emit_dot(fa.word([run(), done()]))
    assert _count(r"^\s*\d+ -> \d+", text) == 2
    assert _count(r"^\s*\d+( \[.*\])?$", text) == 3
    assert "doublecircle" in text
    assert "style=bold" in text


def test_dot_of_the_empty_model():
    text = emit_dot(fa.empty())
    assert _count(r"^\s*\d+ -> \d+", text) == 0
    assert _count(r"^\s*\d+( \[.*\])?$", text) == 1
    assert "doublecircle" not in text


def test_dot_quotes_tagged_moves():
    text = emit_dot(fa.word([q(), q("x"), val(1, "x"), val(1)]))
    assert 'label="q@x"' in text


def test_csp_script_structure():
    a = fa.word([run(), TOKEN, DELIM, TOKEN, done()])
    script = emit_csp(a, 1)
    assert _count(r"^P\d+ = ", script) == a.num_states
    assert "MODEL = P0" in script
    assert "P5 = SKIP" in script
    assert "PROP = [] i : {0..1} @ (TOKS(i) ; hash -> TOKS(i))" in script
    assert "channel m_done, m_run" in script


def test_csp_of_a_costless_play():
    script = emit_csp(fa.word([run(), DELIM, done()]), 0)
    assert "PROP = [] i : {0..0} @ (TOKS(i) ; hash -> TOKS(i))" in script


def test_csp_needs_a_bound():
    with pytest.raises(UnboundedCost):
        emit_csp(fa.word([run(), done()]), UNBOUNDED)


# -- DOT reader --------------------------------------------------------------

_DOT_TOKEN = re.compile(r'\s+|//[^\n]*|"((?:[^"\\]|\\.)*)"|(->)|([{}\[\]=;,])|([A-Za-z0-9_.]+)')


@dataclass
class DotGraph:
    name: str
    defaults: dict = field(default_factory=dict)
    nodes: dict = field(default_factory=dict)
    edges: list = field(default_factory=list)


def _dot_tokens(text):
    tokens, pos = [], 0
    while pos < len(text):
        match = _DOT_TOKEN.match(text, pos)
        if match is None:
            raise ValueError(f"unexpected character {text[pos]!r} at {pos}")
        quoted, arrow, punct, ident = match.groups()
        if quoted is not None:
            tokens.append(("id", quoted.replace('\\"', '"')))
        elif arrow or punct:
            tokens.append((arrow or punct, arrow or punct))
        elif ident:
            tokens.append(("id", ident))
        pos = match.end()
    return tokens


def parse_dot(text):
    """Reader for the digraph subset: attribute, node and edge statements."""
    tokens = _dot_tokens(text)
    pos = 0

    def take(kind):
        nonlocal pos
        if pos >= len(tokens) or tokens[pos][0] != kind:
            raise ValueError(f"expected {kind} at token {pos}")
        pos += 1
        return tokens[pos - 1][1]

    def peek():
        return tokens[pos][0] if pos < len(tokens) else None

    def attributes():
        attrs = {}
        while peek() == "[":
            take("[")
            while peek() != "]":
                key = take("id")
                take("=")
                attrs[key] = take("id")
                if peek() in (",", ";"):
                    take(peek())
            take("]")
        return attrs

    if take("id") != "digraph":
        raise ValueError("not a digraph")
    graph = DotGraph(take("id") if peek() == "id" else "")
    take("{")
    while peek() != "}":
        first = take("id")
        if peek() == "->":
            take("->")
            second = take("id")
            graph.edges.append((first, second, attributes()))
        elif first in ("graph", "node", "edge") and peek() == "[":
            graph.defaults.setdefault(first, {}).update(attributes())
        else:
            graph.nodes.setdefault(first, {}).update(attributes())
        if peek() == ";":
            take(";")
    take("}")
    if pos != len(tokens):
        raise ValueError("trailing tokens after the graph")
    return graph


def test_dot_reader_handles_quoting():
    graph = parse_dot('digraph g {\n\tnode [shape=circle]\n\t0 [style=bold]\n\t0 -> 1 [label="a\\"b"]\n}')
    assert graph.defaults == {"node": {"shape": "circle"}}
    assert graph.nodes == {"0": {"style": "bold"}}
    assert graph.edges == [("0", "1", {"label": 'a"b'})]


# -- golden models -----------------------------------------------------------

GOLDEN_MODELS = {
    "example1-closed": lambda program, costs: build_timing_model(
        program("example1.ia"), costs("example1.cm")).automaton,
    "example2-over": lambda program, costs: build_timing_model(
        program("example2.ia"), CostModel(), Approximation.over()).automaton,
    "two-oracle-under": lambda program, costs: build_timing_model(
        program("two_oracle.ia"), CostModel(), Approximation.under(0)).automaton,
    "tani-padding": lambda program, costs: build_tani_model(
        program("tani_padding.ia"), CostModel()).automaton,
    "example1-denotation": lambda program, costs: denote(
        normalize(program("example1.ia")), costs("example1.cm")),
}


@pytest.mark.parametrize("name", sorted(GOLDEN_MODELS))
def test_dot_describes_the_trimmed_model(program, costs, name):
    a = GOLDEN_MODELS[name](program, costs)
    trimmed = fa.trim(fa.remove_epsilon(a))
    graph = parse_dot(emit_dot(a))
    assert graph.defaults == {"graph": {"rankdir": "LR"}, "node": {"shape": "circle"}}
    assert set(graph.nodes) == {str(s) for s in range(trimmed.num_states)}
    assert sorted((src, dst, attrs["label"]) for src, dst, attrs in graph.edges) == sorted(
        (str(src), str(dst), label.render()) for src, label, dst in trimmed.transitions
    )
    doubled = {n for n, attrs in graph.nodes.items() if attrs.get("shape") == "doublecircle"}
    assert doubled == {str(s) for s in trimmed.accepting}
    bold = [n for n, attrs in graph.nodes.items() if attrs.get("style") == "bold"]
    assert bold == [str(trimmed.initial)]


@pytest.mark.parametrize("name", sorted(GOLDEN_MODELS))
def test_csp_has_one_process_per_state(program, costs, name):
    a = GOLDEN_MODELS[name](program, costs)
    n = fa.worst_case_cost(a)
    if n == UNBOUNDED:
        with pytest.raises(UnboundedCost):
            emit_csp(a, n)
        return
    assert _count(r"^P\d+ = ", emit_csp(a, n)) == fa.trim(fa.remove_epsilon(a)).num_states
