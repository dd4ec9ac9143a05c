"""
Costed finite automata over moves, tokens and delimiters.

Automata are immutable; every operation returns a new automaton. Epsilon
transitions (label None) appear only inside constructions and are removed
before any decision procedure runs.
"""

import heapq
import logging
from collections import defaultdict, deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Set, Tuple, Union

import networkx as nx

from slotgame.errors import AlphabetMismatch, DelimCountError, EmptyWordError, HiddenCostError, UnboundedCost
from slotgame.models import (
    DELIM,
    TOKEN,
    UNBOUNDED,
    BalanceReport,
    Letter,
    Move,
    PhaseSpec,
    Word,
    letter_key,
    segment_tokens,
    strip_costs,
    token_count,
)

logger = logging.getLogger(__name__)

Label = Optional[Letter]
Transition = Tuple[int, Label, int]


@dataclass(frozen=True)
class CostedAutomaton:
    """
    Finite automaton whose language is a set of plays-with-costs.

    States are 0..num_states-1. The alphabet is the declared set of moves
    the automaton ranges over; it always contains the letters it uses.
    """
    num_states: int
    transitions: FrozenSet[Transition]
    initial: int
    accepting: FrozenSet[int]
    alphabet: FrozenSet[Letter] = field(default=frozenset(), compare=False)

    def __post_init__(self):
        used = frozenset(label for _, label, _ in self.transitions if label is not None)
        if not used <= self.alphabet:
            object.__setattr__(self, "alphabet", self.alphabet | used)

    @cached_property
    def out(self) -> Dict[int, List[Tuple[Label, int]]]:
        """Outgoing transitions per state, sorted by letter."""
        table: Dict[int, List[Tuple[Label, int]]] = defaultdict(list)
        for src, label, dst in self.transitions:
            table[src].append((label, dst))
        for edges in table.values():
            edges.sort(key=lambda e: ("" if e[0] is None else letter_key(e[0]), e[1]))
        return table

    @cached_property
    def letters(self) -> FrozenSet[Letter]:
        return frozenset(label for _, label, _ in self.transitions if label is not None)

    @cached_property
    def has_epsilon(self) -> bool:
        return any(label is None for _, label, _ in self.transitions)

    def describe(self) -> str:
        return f"{self.num_states} states, {len(self.transitions)} transitions"


class _Builder:
    """Mutable helper for assembling automata."""

    def __init__(self):
        self.count = 0
        self.transitions: Set[Transition] = set()
        self.accepting: Set[int] = set()
        self.alphabet: Set[Letter] = set()

    def state(self) -> int:
        self.count += 1
        return self.count - 1

    def add(self, src: int, label: Label, dst: int) -> None:
        self.transitions.add((src, label, dst))

    def embed(self, a: CostedAutomaton, keep_accepting: bool = False) -> int:
        """Copy `a` in; returns the offset of its states."""
        offset = self.count
        self.count += a.num_states
        self.transitions.update((s + offset, l, t + offset) for s, l, t in a.transitions)
        self.alphabet.update(a.alphabet)
        if keep_accepting:
            self.accepting.update(s + offset for s in a.accepting)
        return offset

    def build(self, initial: int) -> CostedAutomaton:
        return CostedAutomaton(
            num_states=self.count,
            transitions=frozenset(self.transitions),
            initial=initial,
            accepting=frozenset(self.accepting),
            alphabet=frozenset(self.alphabet),
        )


# ----------------------------------------------------------------------------
# Regular constructions
# ----------------------------------------------------------------------------

def empty(alphabet: Iterable[Letter] = ()) -> CostedAutomaton:
    return CostedAutomaton(1, frozenset(), 0, frozenset(), frozenset(alphabet))


def epsilon() -> CostedAutomaton:
    return CostedAutomaton(1, frozenset(), 0, frozenset({0}))


def word(letters: Iterable[Letter]) -> CostedAutomaton:
    letters = list(letters)
    transitions = frozenset((i, letter, i + 1) for i, letter in enumerate(letters))
    return CostedAutomaton(len(letters) + 1, transitions, 0, frozenset({len(letters)}))


def tokens(k: int) -> CostedAutomaton:
    return word([TOKEN] * k)


def union(*automata: CostedAutomaton) -> CostedAutomaton:
    if not automata:
        return empty()
    if len(automata) == 1:
        return automata[0]
    b = _Builder()
    init = b.state()
    for a in automata:
        offset = b.embed(a, keep_accepting=True)
        b.add(init, None, a.initial + offset)
    return b.build(init)


def concat(*automata: CostedAutomaton) -> CostedAutomaton:
    if not automata:
        return epsilon()
    if len(automata) == 1:
        return automata[0]
    b = _Builder()
    offset = b.embed(automata[0])
    init = automata[0].initial + offset
    ends = [s + offset for s in automata[0].accepting]
    for a in automata[1:]:
        offset = b.embed(a)
        for end in ends:
            b.add(end, None, a.initial + offset)
        ends = [s + offset for s in a.accepting]
    b.accepting.update(ends)
    return b.build(init)


def star(a: CostedAutomaton) -> CostedAutomaton:
    b = _Builder()
    init = b.state()
    offset = b.embed(a)
    b.add(init, None, a.initial + offset)
    for s in a.accepting:
        b.add(s + offset, None, init)
    b.accepting.add(init)
    return b.build(init)


def optional(a: CostedAutomaton) -> CostedAutomaton:
    return union(epsilon(), a)


def relabel(a: CostedAutomaton, fn: Callable[[Letter], Label]) -> CostedAutomaton:
    """Apply fn to every letter; letters mapped to None become epsilon."""
    cache: Dict[Letter, Label] = {}

    def mapped(label: Label) -> Label:
        if label is None:
            return None
        if label not in cache:
            cache[label] = fn(label)
        return cache[label]

    transitions = frozenset((s, mapped(l), t) for s, l, t in a.transitions)
    alphabet = frozenset(m for m in (mapped(l) for l in a.alphabet) if m is not None)
    return CostedAutomaton(a.num_states, transitions, a.initial, a.accepting, alphabet)


def declare(a: CostedAutomaton, letters: Iterable[Letter]) -> CostedAutomaton:
    """Extend the declared alphabet of `a`."""
    return CostedAutomaton(a.num_states, a.transitions, a.initial, a.accepting, a.alphabet | frozenset(letters))


# ----------------------------------------------------------------------------
# Cleanup: epsilon removal, trimming, determinization, minimization
# ----------------------------------------------------------------------------

def _epsilon_closure(a: CostedAutomaton, state: int) -> Set[int]:
    seen = {state}
    stack = [state]
    while stack:
        s = stack.pop()
        for label, t in a.out.get(s, ()):
            if label is None and t not in seen:
                seen.add(t)
                stack.append(t)
    return seen


def remove_epsilon(a: CostedAutomaton) -> CostedAutomaton:
    if not a.has_epsilon:
        return a
    b = _Builder()
    b.count = a.num_states
    b.alphabet.update(a.alphabet)
    for s in range(a.num_states):
        closure = _epsilon_closure(a, s)
        if closure & a.accepting:
            b.accepting.add(s)
        for u in closure:
            for label, t in a.out.get(u, ()):
                if label is not None:
                    b.add(s, label, t)
    return trim(b.build(a.initial))


def trim(a: CostedAutomaton) -> CostedAutomaton:
    """Keep states that are reachable and co-reachable; the initial state always stays."""
    graph = nx.DiGraph()
    graph.add_nodes_from(range(a.num_states))
    graph.add_edges_from((s, t) for s, _, t in a.transitions)
    reachable = nx.descendants(graph, a.initial) | {a.initial}
    sink = ("sink",)
    graph.add_edges_from((s, sink) for s in a.accepting)
    productive = nx.ancestors(graph, sink) if a.accepting else set()
    keep = (reachable & productive) | {a.initial}
    if len(keep) == a.num_states:
        return a
    order = [a.initial] + sorted(keep - {a.initial})
    index = {s: i for i, s in enumerate(order)}
    transitions = frozenset(
        (index[s], l, index[t]) for s, l, t in a.transitions if s in index and t in index
    )
    accepting = frozenset(index[s] for s in a.accepting if s in index)
    return CostedAutomaton(len(order), transitions, 0, accepting, a.alphabet)


def determinize(a: CostedAutomaton) -> CostedAutomaton:
    a = remove_epsilon(a)
    start = frozenset({a.initial})
    index = {start: 0}
    queue = deque([start])
    transitions: Set[Transition] = set()
    accepting: Set[int] = set()
    while queue:
        subset = queue.popleft()
        src = index[subset]
        if subset & a.accepting:
            accepting.add(src)
        moves: Dict[Letter, Set[int]] = defaultdict(set)
        for s in subset:
            for label, t in a.out.get(s, ()):
                moves[label].add(t)
        for label in sorted(moves, key=letter_key):
            target = frozenset(moves[label])
            if target not in index:
                index[target] = len(index)
                queue.append(target)
            transitions.add((src, label, index[target]))
    return CostedAutomaton(len(index), frozenset(transitions), 0, frozenset(accepting), a.alphabet)


def minimize(a: CostedAutomaton) -> CostedAutomaton:
    """Minimal deterministic automaton (Moore partition refinement)."""
    d = trim(determinize(a))
    block = [1 if s in d.accepting else 0 for s in range(d.num_states)]
    count = len(set(block))
    while True:
        signatures: Dict[tuple, int] = {}
        refined = []
        for s in range(d.num_states):
            signature = (block[s], frozenset((label, block[t]) for label, t in d.out.get(s, ())))
            refined.append(signatures.setdefault(signature, len(signatures)))
        block = refined
        if len(signatures) == count:
            break
        count = len(signatures)
    order: Dict[int, int] = {}
    for s in [d.initial] + list(range(d.num_states)):
        order.setdefault(block[s], len(order))
    transitions = frozenset((order[block[s]], l, order[block[t]]) for s, l, t in d.transitions)
    accepting = frozenset(order[block[s]] for s in d.accepting)
    return CostedAutomaton(len(order), transitions, 0, accepting, a.alphabet)


def compact(a: CostedAutomaton) -> CostedAutomaton:
    result = minimize(a)
    logger.debug("[compact] %s -> %s", a.describe(), result.describe())
    return result


# ----------------------------------------------------------------------------
# Slot-game operations
# ----------------------------------------------------------------------------

def synchronize(r: CostedAutomaton, s: CostedAutomaton, shared: FrozenSet[Letter]) -> CostedAutomaton:
    """
    Product that moves jointly on letters of `shared` and independently on
    every other letter (tokens and delimiters included). Shared letters are
    kept; callers hide them when needed.
    """
    index: Dict[Tuple[int, int], int] = {}
    queue: deque = deque()

    def node(p: int, q: int) -> int:
        key = (p, q)
        if key not in index:
            index[key] = len(index)
            queue.append(key)
        return index[key]

    s_shared: Dict[int, Dict[Letter, List[int]]] = defaultdict(lambda: defaultdict(list))
    for src, label, dst in s.transitions:
        if label is not None and label in shared:
            s_shared[src][label].append(dst)

    transitions: Set[Transition] = set()
    accepting: Set[int] = set()
    node(r.initial, s.initial)
    while queue:
        p, q = queue.popleft()
        src = index[(p, q)]
        if p in r.accepting and q in s.accepting:
            accepting.add(src)
        for label, t in r.out.get(p, ()):
            if label is None or label not in shared:
                transitions.add((src, label, node(t, q)))
            else:
                for t2 in s_shared[q].get(label, ()):
                    transitions.add((src, label, node(t, t2)))
        for label, t in s.out.get(q, ()):
            if label is None or label not in shared:
                transitions.add((src, label, node(p, t)))
    return CostedAutomaton(len(index), frozenset(transitions), 0, frozenset(accepting), r.alphabet | s.alphabet)


def shuffle(r: CostedAutomaton, s: CostedAutomaton) -> CostedAutomaton:
    """All interleavings of a word of r with a word of s."""
    return trim(synchronize(r, s, frozenset()))


def restrict(a: CostedAutomaton, hidden: Iterable[Letter]) -> CostedAutomaton:
    """Erase the letters of `hidden` from every word."""
    hidden = frozenset(hidden)
    if TOKEN in hidden or DELIM in hidden:
        raise HiddenCostError("tokens and delimiters cannot be hidden")
    if not hidden:
        return a
    result = relabel(a, lambda letter: None if letter in hidden else letter)
    result = CostedAutomaton(
        result.num_states, result.transitions, result.initial, result.accepting, a.alphabet - hidden
    )
    return compact(result)


def compose(r: CostedAutomaton, s: CostedAutomaton, shared: Iterable[Letter]) -> CostedAutomaton:
    """
    Compose r (playing in the shared arena as the argument) with s.

    r may be interrogated any number of times; the shared moves must match
    pairwise and are hidden, tokens of both sides are kept.
    """
    shared = frozenset(shared)
    if TOKEN in shared or DELIM in shared:
        raise AlphabetMismatch("the shared alphabet cannot contain tokens or delimiters")
    missing = shared - (r.alphabet & s.alphabet)
    if missing:
        sample = ", ".join(sorted(letter_key(m) for m in missing)[:5])
        raise AlphabetMismatch(f"shared letters missing from an operand alphabet: {sample}")
    product = synchronize(star(r), s, shared)
    logger.debug("[compose] %s x %s -> %s", r.describe(), s.describe(), product.describe())
    return restrict(product, shared)


def insert_after_initial(a: CostedAutomaton, k: int) -> CostedAutomaton:
    """Language { m . $^k . w | m . w in a }."""
    a = remove_epsilon(a)
    if a.initial in a.accepting:
        raise EmptyWordError("the empty word is accepted")
    if k == 0:
        return a
    b = _Builder()
    b.embed(a, keep_accepting=True)
    init = b.state()
    for label, t in a.out.get(a.initial, ()):
        if not isinstance(label, Move):
            raise EmptyWordError(f"word starts with {letter_key(label)} instead of a move")
        current = b.state()
        b.add(init, label, current)
        for i in range(k):
            nxt = t if i == k - 1 else b.state()
            b.add(current, TOKEN, nxt)
            current = nxt
    return trim(b.build(init))


# ----------------------------------------------------------------------------
# Queries
# ----------------------------------------------------------------------------

def is_empty(a: CostedAutomaton) -> bool:
    return not trim(remove_epsilon(a)).accepting


def accepts(a: CostedAutomaton, candidate: Iterable[Letter]) -> bool:
    a = remove_epsilon(a)
    current = {a.initial}
    for letter in candidate:
        current = {t for s in current for label, t in a.out.get(s, ()) if label == letter}
        if not current:
            return False
    return bool(current & a.accepting)


def enumerate_words(a: CostedAutomaton, max_len: int) -> Set[Word]:
    """All accepted words of length at most max_len."""
    if max_len < 0:
        raise ValueError("max_len must be non-negative")
    a = remove_epsilon(a)
    result: Set[Word] = set()
    stack: List[Tuple[int, Word]] = [(a.initial, ())]
    seen: Set[Tuple[int, Word]] = set()
    while stack:
        state, prefix = stack.pop()
        if (state, prefix) in seen:
            continue
        seen.add((state, prefix))
        if state in a.accepting:
            result.add(prefix)
        if len(prefix) < max_len:
            for label, t in a.out.get(state, ()):
                stack.append((t, prefix + (label,)))
    return result


def language_included(r: CostedAutomaton, s: CostedAutomaton) -> bool:
    """True iff every word of r is a word of s."""
    dr, ds = determinize(r), determinize(s)
    delta_s = {(src, label): dst for src, label, dst in ds.transitions}
    start = (dr.initial, ds.initial)
    seen = {start}
    queue = deque([start])
    while queue:
        p, q = queue.popleft()
        if p in dr.accepting and (q is None or q not in ds.accepting):
            return False
        for label, t in dr.out.get(p, ()):
            nxt = (t, None if q is None else delta_s.get((q, label)))
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return True


def language_equal(r: CostedAutomaton, s: CostedAutomaton) -> bool:
    return language_included(r, s) and language_included(s, r)


# ----------------------------------------------------------------------------
# Decision procedures
# ----------------------------------------------------------------------------

PhaseNode = Tuple[int, int]


def _phase_product(a: CostedAutomaton, spec: PhaseSpec):
    """Reachable (state, phase) nodes with their successors; checks delimiter counts."""
    start = (a.initial, 0)
    succ: Dict[PhaseNode, List[Tuple[Letter, PhaseNode]]] = {}
    queue = deque([start])
    seen = {start}
    while queue:
        q, phase = queue.popleft()
        if q in a.accepting and phase != spec.delims:
            raise DelimCountError(
                f"an accepted word has {phase} delimiters, expected {spec.delims}"
            )
        edges = []
        for label, t in a.out.get(q, ()):
            nxt_phase = phase + 1 if label == DELIM else phase
            if nxt_phase > spec.delims:
                raise DelimCountError(f"an accepted word has more than {spec.delims} delimiters")
            target = (t, nxt_phase)
            edges.append((label, target))
            if target not in seen:
                seen.add(target)
                queue.append(target)
        succ[(q, phase)] = edges
    return start, succ


def balance_verdict(a: CostedAutomaton, spec: PhaseSpec) -> BalanceReport:
    """
    Decide whether every accepted word has weighted token sum zero.

    Each token counts with the weight of the segment (delimiter phase) it
    occurs in. Potentials are assigned breadth-first over the phase product;
    a conflicting potential or a non-zero accepting potential means some
    accepted word is unbalanced, and the shortest such word (lexicographically
    least among equals) is returned as witness.
    """
    a = trim(remove_epsilon(a))
    if not a.accepting:
        return BalanceReport(True)
    start, succ = _phase_product(a, spec)

    potential = {start: 0}
    queue = deque([start])
    balanced = True
    while queue and balanced:
        node = queue.popleft()
        if node[0] in a.accepting and potential[node] != 0:
            balanced = False
            break
        for label, target in succ[node]:
            weight = spec.weights[node[1]] if label == TOKEN else 0
            expected = potential[node] + weight
            if target not in potential:
                potential[target] = expected
                queue.append(target)
            elif potential[target] != expected:
                balanced = False
                break
    if balanced:
        return BalanceReport(True)
    witness = _unbalanced_witness(a, spec, start, succ)
    logger.debug("[balance] unbalanced, witness of length %d", len(witness))
    return BalanceReport(False, witness, segment_tokens(witness))


def _unbalanced_witness(a, spec, start, succ) -> Word:
    root = (start, 0)
    parent: Dict[tuple, Tuple[tuple, Letter]] = {root: None}
    level = [root]
    while level:
        for node in level:
            (state, _), total = node
            if state in a.accepting and total != 0:
                return _path(parent, node)
        following = []
        for node in level:
            phase_node, total = node
            for label, target in succ[phase_node]:
                weight = spec.weights[phase_node[1]] if label == TOKEN else 0
                nxt = (target, total + weight)
                if nxt not in parent:
                    parent[nxt] = (node, label)
                    following.append(nxt)
        level = following
    raise AssertionError("unbalanced automaton without witness")


def _path(parent, node) -> Word:
    letters = []
    while parent[node] is not None:
        node, label = parent[node]
        letters.append(label)
    return tuple(reversed(letters))


def worst_case_cost(a: CostedAutomaton) -> Union[int, str]:
    """Maximum number of tokens over accepted words, or UNBOUNDED."""
    a = trim(remove_epsilon(a))
    if not a.accepting:
        return 0
    graph = nx.DiGraph()
    graph.add_nodes_from(range(a.num_states))
    graph.add_edges_from((s, t) for s, _, t in a.transitions)
    components = list(nx.strongly_connected_components(graph))
    condensed = nx.condensation(graph, scc=components)
    member = condensed.graph["mapping"]
    weights: Dict[Tuple[int, int], int] = {}
    for s, label, t in a.transitions:
        cost = 1 if label == TOKEN else 0
        cs, ct = member[s], member[t]
        if cs == ct:
            if cost:
                return UNBOUNDED
            continue
        weights[(cs, ct)] = max(weights.get((cs, ct), 0), cost)
    best = {member[a.initial]: 0}
    for component in nx.topological_sort(condensed):
        if component not in best:
            continue
        for successor in condensed.successors(component):
            candidate = best[component] + weights[(component, successor)]
            if candidate > best.get(successor, -1):
                best[successor] = candidate
    return max(best[member[s]] for s in a.accepting if member[s] in best)


def _min_tokens(s: CostedAutomaton, moves: Word) -> Optional[int]:
    """Fewest tokens over words of s whose move projection is `moves`."""
    frontier = {s.initial: 0}
    for position in range(len(moves) + 1):
        heap = [(cost, state) for state, cost in frontier.items()]
        heapq.heapify(heap)
        settled: Dict[int, int] = {}
        while heap:
            cost, state = heapq.heappop(heap)
            if state in settled:
                continue
            settled[state] = cost
            for label, t in s.out.get(state, ()):
                if label == TOKEN and t not in settled:
                    heapq.heappush(heap, (cost + 1, t))
        if position == len(moves):
            costs = [c for state, c in settled.items() if state in s.accepting]
            return min(costs) if costs else None
        frontier = {}
        for state, cost in settled.items():
            for label, t in s.out.get(state, ()):
                if label == moves[position] and cost < frontier.get(t, cost + 1):
                    frontier[t] = cost
        if not frontier:
            return None
    return None


def improved_by(r: CostedAutomaton, s: CostedAutomaton) -> bool:
    """
    True iff s improves r: every word of r has a word of s with the same
    moves and no more tokens. Decided for models with finitely many words.
    """
    r = trim(remove_epsilon(r))
    s = trim(remove_epsilon(s))
    graph = nx.DiGraph()
    graph.add_nodes_from(range(r.num_states))
    graph.add_edges_from((src, dst) for src, _, dst in r.transitions)
    if not nx.is_directed_acyclic_graph(graph):
        raise UnboundedCost("improvement is decided on models with finitely many words")
    longest = nx.dag_longest_path_length(graph) if r.transitions else 0
    for candidate in enumerate_words(r, longest):
        best = _min_tokens(s, strip_costs(candidate))
        if best is None or best > token_count(candidate):
            return False
    return True
