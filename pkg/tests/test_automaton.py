import pytest

from slotgame import automaton as fa
from slotgame.errors import AlphabetMismatch, DelimCountError, EmptyWordError, HiddenCostError, UnboundedCost
from slotgame.models import DELIM, TIMING_PHASES, TOKEN, UNBOUNDED, PhaseSpec, done, q, run, val

A, B = run(), done()


def test_regular_constructions():
    a = fa.concat(fa.word([A]), fa.star(fa.word([TOKEN])), fa.word([B]))
    assert fa.accepts(a, [A, B])
    assert fa.accepts(a, [A, TOKEN, TOKEN, B])
    assert not fa.accepts(a, [A, TOKEN])
    assert fa.accepts(fa.optional(fa.word([A])), [])
    assert fa.is_empty(fa.empty())
    assert not fa.is_empty(fa.epsilon())


def test_minimize_preserves_language():
    a = fa.union(fa.word([A, TOKEN, B]), fa.word([A, TOKEN, B]), fa.word([A, B]))
    m = fa.minimize(a)
    assert fa.language_equal(a, m)
    assert m.num_states == 4
    assert not m.has_epsilon


def test_language_inclusion():
    small = fa.word([A, B])
    large = fa.concat(fa.word([A]), fa.star(fa.word([TOKEN])), fa.word([B]))
    assert fa.language_included(small, large)
    assert not fa.language_included(large, small)


def test_enumerate_words():
    a = fa.concat(fa.word([A]), fa.star(fa.word([TOKEN])), fa.word([B]))
    assert fa.enumerate_words(a, 3) == {(A, B), (A, TOKEN, B)}


def test_synchronize_moves_jointly_on_shared_letters():
    r = fa.word([A, TOKEN, B])
    s = fa.word([q(), A, B])
    product = fa.synchronize(r, s, frozenset({A, B}))
    assert fa.accepts(product, [q(), A, TOKEN, B])
    assert not fa.accepts(product, [A, q(), TOKEN, B])


def test_shuffle_interleaves():
    result = fa.shuffle(fa.word([A]), fa.word([B]))
    assert fa.enumerate_words(result, 2) == {(A, B), (B, A)}


def test_compose_hides_shared_moves_and_keeps_tokens():
    argument = fa.declare(fa.word([q("1"), TOKEN, val(0, "1")]), [q("1"), val(0, "1")])
    strategy = fa.word([q(), q("1"), val(0, "1"), q("1"), val(0, "1"), val(1)])
    shared = {q("1"), val(0, "1")}
    composed = fa.compose(argument, strategy, shared)
    assert fa.enumerate_words(composed, 10) == {(q(), TOKEN, TOKEN, val(1))}
    assert q("1") not in composed.alphabet


def test_compose_rejects_tokens_and_missing_letters():
    with pytest.raises(AlphabetMismatch):
        fa.compose(fa.word([A]), fa.word([A]), {TOKEN})
    with pytest.raises(AlphabetMismatch):
        fa.compose(fa.word([A]), fa.word([B]), {A})


def test_restrict_cannot_hide_costs():
    with pytest.raises(HiddenCostError):
        fa.restrict(fa.word([A, TOKEN]), {TOKEN})
    with pytest.raises(HiddenCostError):
        fa.restrict(fa.word([A, DELIM]), {DELIM})


def test_insert_after_initial():
    a = fa.union(fa.word([A, B]), fa.word([q(), val(0)]))
    result = fa.insert_after_initial(a, 2)
    assert fa.enumerate_words(result, 4) == {(A, TOKEN, TOKEN, B), (q(), TOKEN, TOKEN, val(0))}
    with pytest.raises(EmptyWordError):
        fa.insert_after_initial(fa.epsilon(), 1)


def test_balanced_model():
    a = fa.union(
        fa.word([A, TOKEN, DELIM, TOKEN, B]),
        fa.word([A, TOKEN, TOKEN, DELIM, TOKEN, TOKEN, B]),
    )
    report = fa.balance_verdict(a, TIMING_PHASES)
    assert report.balanced
    assert report.witness is None


def test_unbalanced_model_reports_shortest_witness():
    a = fa.union(
        fa.word([A, TOKEN, DELIM, TOKEN, B]),
        fa.word([A, TOKEN, TOKEN, DELIM, TOKEN, B]),
        fa.word([A, TOKEN, TOKEN, TOKEN, DELIM, B]),
    )
    report = fa.balance_verdict(a, TIMING_PHASES)
    assert not report.balanced
    assert report.witness == (A, TOKEN, TOKEN, DELIM, TOKEN, B)
    assert report.segment_tokens == (2, 1)


def test_balance_with_cycles():
    loop = fa.star(fa.word([TOKEN]))
    a = fa.concat(fa.word([A]), loop, fa.word([DELIM]), fa.word([TOKEN, B]))
    report = fa.balance_verdict(a, TIMING_PHASES)
    assert not report.balanced
    assert report.segment_tokens == (0, 1)


def test_balance_rejects_wrong_delimiter_count():
    with pytest.raises(DelimCountError):
        fa.balance_verdict(fa.word([A, TOKEN, B]), TIMING_PHASES)
    with pytest.raises(DelimCountError):
        fa.balance_verdict(fa.word([A, DELIM, DELIM, B]), TIMING_PHASES)


def test_balance_with_weights():
    spec = PhaseSpec(3, (0, 1, -1, 0))
    a = fa.word([A, TOKEN, DELIM, TOKEN, DELIM, TOKEN, DELIM, TOKEN, TOKEN, B])
    assert fa.balance_verdict(a, spec).balanced


def test_balance_of_empty_language():
    assert fa.balance_verdict(fa.empty(), TIMING_PHASES).balanced


def test_worst_case_cost():
    a = fa.union(fa.word([A, TOKEN, B]), fa.word([A, TOKEN, TOKEN, TOKEN, B]))
    assert fa.worst_case_cost(a) == 3
    assert fa.worst_case_cost(fa.empty()) == 0
    moves_loop = fa.concat(fa.word([A]), fa.star(fa.word([q()])), fa.word([TOKEN, B]))
    assert fa.worst_case_cost(moves_loop) == 1
    token_loop = fa.concat(fa.word([A]), fa.star(fa.word([TOKEN])), fa.word([B]))
    assert fa.worst_case_cost(token_loop) == UNBOUNDED


def test_improved_by():
    slow = fa.union(fa.word([A, TOKEN, TOKEN, B]), fa.word([q(), val(0)]))
    fast = fa.union(fa.word([A, TOKEN, B]), fa.word([q(), val(0)]))
    assert fa.improved_by(slow, fast)
    assert not fa.improved_by(fast, slow)
    assert not fa.improved_by(slow, fa.word([A, B]))
    loop = fa.concat(fa.word([A]), fa.star(fa.word([TOKEN])), fa.word([B]))
    with pytest.raises(UnboundedCost):
        fa.improved_by(loop, fast)
