"""
Export of costed automata: DOT for viewing, CSP for an external refinement checker.
"""

import logging
import re
from typing import Dict, List, Union

from graphviz import Digraph

from slotgame import automaton as fa
from slotgame.automaton import CostedAutomaton
from slotgame.errors import UnboundedCost
from slotgame.models import DELIM, TOKEN, UNBOUNDED, Letter

logger = logging.getLogger(__name__)


def emit_dot(a: CostedAutomaton, name: str = "slotgame") -> str:
    """DOT source: initial state in bold, accepting states double-circled."""
    a = fa.trim(fa.remove_epsilon(a))
    g = Digraph(name, graph_attr={"rankdir": "LR"}, node_attr={"shape": "circle"})
    for state in range(a.num_states):
        attrs = {}
        if state in a.accepting:
            attrs["shape"] = "doublecircle"
        if state == a.initial:
            attrs["style"] = "bold"
        g.node(str(state), **attrs)
    for src, label, dst in sorted(a.transitions, key=lambda t: (t[0], t[1].render(), t[2])):
        g.edge(str(src), str(dst), label=label.render())
    return g.source


class _EventNames:
    """CSP event names for letters; tagged moves are flattened to identifiers."""

    def __init__(self):
        self.names: Dict[Letter, str] = {TOKEN: "tok", DELIM: "hash"}
        self.used = {"tok", "hash"}

    def __call__(self, letter: Letter) -> str:
        if letter not in self.names:
            text = letter.render().replace("'", "_p").replace("@", "_at_")
            base = "m_" + re.sub(r"[^A-Za-z0-9_]", "_", text)
            candidate, i = base, 1
            while candidate in self.used:
                candidate, i = f"{base}_{i}", i + 1
            self.names[letter] = candidate
            self.used.add(candidate)
        return self.names[letter]


def emit_csp(a: CostedAutomaton, n: Union[int, str]) -> str:
    """
    CSP script with one process per state and the balance property for
    models of worst-case cost n: every trace is tok^i . hash . tok^i with
    i <= n once moves are hidden.
    """
    if n == UNBOUNDED:
        raise UnboundedCost("the balance property needs a finite worst-case cost")
    a = fa.trim(fa.remove_epsilon(a))
    events = _EventNames()
    processes: List[str] = []
    for state in range(a.num_states):
        branches = [f"{events(label)} -> P{dst}" for label, dst in a.out.get(state, ())]
        if state in a.accepting:
            branches.append("SKIP")
        body = " [] ".join(branches) if branches else "STOP"
        processes.append(f"P{state} = {body}")

    moves = sorted(name for name in events.used if name not in ("tok", "hash"))
    lines = ["-- costed model and its balance property", "channel tok, hash"]
    if moves:
        lines.append("channel " + ", ".join(moves))
    lines.append("")
    lines.extend(processes)
    lines.extend([
        "",
        f"MODEL = P{a.initial}",
        "",
        "TOKS(i) = if i == 0 then SKIP else tok -> TOKS(i - 1)",
        f"PROP = [] i : {{0..{n}}} @ (TOKS(i) ; hash -> TOKS(i))",
        "",
        "assert PROP [T= MODEL \\ diff(Events, {tok, hash})",
        "",
    ])
    logger.debug("[csp] %d processes, %d move events", a.num_states, len(moves))
    return "\n".join(lines)
