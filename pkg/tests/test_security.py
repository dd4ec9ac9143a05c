import pytest

from slotgame import automaton as fa
from slotgame.errors import ContextNotEmpty, MissingLow, SecurityAnnotationError
from slotgame.frontend import parse_and_typecheck
from slotgame.models import (
    DELIM,
    TOKEN,
    CostModel,
    ModelOrigin,
    Verdict,
    VerdictKind,
    done,
    ok,
    q,
    render_word,
    run,
    segment_tokens,
    val,
)
from slotgame.opsem import oracle_timing_check
from slotgame.security import (
    Approximation,
    DeltaBound,
    build_tani_model,
    build_timing_model,
    build_timing_model_closed,
    check_tani,
    check_timing,
    delta,
    instantiate_context,
    prime_copy,
    seed_values,
)
from slotgame.syntax import COM, FunType, New, Var, exp_type, int_data, var_type

INT2 = int_data(2)


def _moves(word, name):
    return [letter for letter in word if getattr(letter, "tag", ())[:1] == (name,)]


def _segments(word):
    segments = [[]]
    for letter in word:
        if letter == DELIM:
            segments.append([])
        else:
            segments[-1].append(letter)
    return segments


# -- closed terms ------------------------------------------------------------

def test_example1_leaks(program, costs):
    model = build_timing_model(program("example1.ia"), costs("example1.cm"))
    assert model.origin == ModelOrigin.CLOSED
    verdict = check_timing(model)
    assert verdict.kind == VerdictKind.LEAK
    assert render_word(verdict.witness) == "run.$.q@k.0@k.$.$.#.$.$.q@k.1@k.$.$.$.done"
    assert (verdict.cost_before, verdict.cost_after) == (3, 5)
    assert verdict.high_values == (0, 1)


def test_example1_model_language(program, costs):
    model = build_timing_model(program("example1.ia"), costs("example1.cm")).automaton
    w = fa.word
    # else-branch: der of the test; then-branch adds der and +
    first = fa.union(w([val(0, "k"), TOKEN, TOKEN, DELIM]), w([val(1, "k"), TOKEN, TOKEN, TOKEN, TOKEN, DELIM]))
    second = fa.union(w([val(0, "k"), TOKEN, done()]), w([val(1, "k"), TOKEN, TOKEN, TOKEN, done()]))
    expected = fa.concat(w([run(), TOKEN, q("k")]), first, w([TOKEN, TOKEN, q("k")]), second)
    assert fa.language_equal(model, expected)


def test_model_agrees_with_oracle(program, costs):
    typed, cm = program("example1.ia"), costs("example1.cm")
    model_verdict = check_timing(build_timing_model(typed, cm))
    oracle = oracle_timing_check(typed, cm)
    assert model_verdict.kind == oracle.kind
    assert model_verdict.cost_after - model_verdict.cost_before == oracle.cost_after - oracle.cost_before


def test_balanced_branches_are_secure():
    typed = parse_and_typecheck("high h : varint2 ; |- if !h > 0 then h := 0 else h := 1 : com")
    verdict = check_timing(build_timing_model(typed, CostModel()))
    assert verdict.kind == VerdictKind.SECURE
    assert verdict.witness == ()


def test_closed_model_rejects_free_context(program):
    with pytest.raises(ContextNotEmpty):
        build_timing_model_closed(program("example2.ia"), CostModel())


def test_timing_check_rejects_low(program):
    with pytest.raises(SecurityAnnotationError):
        build_timing_model(program("tani_const.ia"), CostModel())


def test_seed_avoids_program_names():
    typed = parse_and_typecheck("high h : varint2 ; given k : com ; |- k : com")
    model = build_timing_model(typed, CostModel(), Approximation.under(0))
    assert model.seed != "k"
    assert q(model.seed) in model.automaton.alphabet


def test_prime_copy_keeps_free_occurrences():
    x = Var("x", occurrence=1, ty=exp_type(INT2))
    term = New("z", INT2, x, Var("h", ty=var_type(INT2)))
    copy = prime_copy(term, {"h": "h'"})
    assert copy.name == "z'"
    assert copy.init == x
    assert copy.body.name == "h'"


# -- open terms --------------------------------------------------------------

EXAMPLE2_WITNESS = [
    run(), TOKEN, q("k"), val(0, "k"), TOKEN, run("f"), q("f", "1"), TOKEN, val(0, "f", "1"), done("f"),
    TOKEN, DELIM, TOKEN, TOKEN, q("k"), val(1, "k"), TOKEN, run("f"), done("f"), done(),
]


def test_example2_over_approximation_possible_leak(program):
    model = build_timing_model(program("example2.ia"), CostModel(), Approximation.over())
    assert model.origin == ModelOrigin.OVER
    assert fa.accepts(model.automaton, EXAMPLE2_WITNESS)
    verdict = check_timing(model)
    assert verdict.kind == VerdictKind.POSSIBLE_LEAK


def test_example2_under_approximation_secure(program):
    model = build_timing_model(program("example2.ia"), CostModel(), Approximation.under(1))
    assert model.origin == ModelOrigin.UNDER_PARTIAL
    assert not fa.accepts(model.automaton, EXAMPLE2_WITNESS)
    verdict = check_timing(model)
    assert verdict.kind == VerdictKind.SECURE
    assert verdict.bound == 1


def test_two_oracle_leak_is_exact(program):
    model = build_timing_model(program("two_oracle.ia"), CostModel(), Approximation.under(0))
    assert model.origin == ModelOrigin.UNDER_EXACT
    verdict = check_timing(model)
    assert verdict.kind == VerdictKind.LEAK
    assert verdict.bound is None
    first, second = _segments(verdict.witness)
    asked = sorted((len([m for m in _moves(seg, "x") if m.kind.value == "q"]),
                    len([m for m in _moves(seg, "y") if m.kind.value == "q"])) for seg in (first, second))
    assert asked == [(0, 1), (1, 0)]


def test_two_oracle_counterexample_replays(program):
    typed = program("two_oracle.ia")
    verdict = check_timing(build_timing_model(typed, CostModel(), Approximation.under(0)))
    closed = instantiate_context(typed, verdict.witness)
    assert closed.delta == ()
    assert oracle_timing_check(closed, CostModel()).kind == VerdictKind.LEAK


def test_linear_search_leaks_through_comparisons(program, costs):
    model = build_timing_model(program("linsearch_k2.ia"), costs("compare_only.cm"), Approximation.under(0))
    assert model.origin == ModelOrigin.UNDER_PARTIAL
    verdict = check_timing(model)
    assert verdict.kind == VerdictKind.LEAK
    assert sorted((verdict.cost_before, verdict.cost_after)) == [1, 2]


def test_delta_repeats_base_calls():
    d = delta(exp_type(INT2), 0)
    assert fa.accepts(d, [q(), val(0)])
    assert fa.accepts(d, [q(), val(1), q(), val(1)])
    assert not fa.accepts(d, [q(), val(0), q(), val(1)])


def test_delta_repeats_call_shapes():
    ty = FunType((exp_type(INT2),), COM)
    d = delta(ty, 1)
    assert fa.accepts(d, [run(), done(), run(), done()])
    assert fa.accepts(d, [run(), q("1"), val(0, "1"), done(), run(), q("1"), val(1, "1"), done()])
    assert not fa.accepts(d, [run(), done(), run(), q("1"), val(0, "1"), done()])
    assert not fa.accepts(delta(ty, 0), [run(), q("1"), val(0, "1"), done()])


def test_delta_bound_is_non_negative():
    with pytest.raises(ValueError):
        DeltaBound(-1)
    with pytest.raises(ValueError):
        delta(exp_type(INT2), -1)


def test_seed_values_per_segment():
    word = (run(), q("k"), val(1, "k"), DELIM, q("k"), val(0, "k"), ok(), done())
    assert seed_values(word, "k") == (1, 0)


# -- TANI --------------------------------------------------------------------

def test_tani_explicit_flow_is_unsafe(program):
    model = build_tani_model(program("tani_explicit.ia"), CostModel())
    verdict = check_tani(model)
    assert verdict.kind == VerdictKind.UNSAFE
    assert _moves(verdict.witness, model.abort)


def test_tani_constant_is_secure(program):
    verdict = check_tani(build_tani_model(program("tani_const.ia"), CostModel()))
    assert verdict.kind == VerdictKind.SECURE


def test_tani_padding_depends_on_seq_cost(program, costs):
    typed = program("tani_padding.ia")
    leak = check_tani(build_tani_model(typed, CostModel()))
    assert leak.kind == VerdictKind.LEAK
    assert abs(leak.cost_before - leak.cost_after) == 1
    assert check_tani(build_tani_model(typed, costs("no_seq_cost.cm"))).kind == VerdictKind.SECURE


def test_tani_preconditions(program):
    with pytest.raises(MissingLow):
        build_tani_model(program("example1.ia"), CostModel())
    with pytest.raises(ContextNotEmpty):
        build_tani_model(program("example2.ia"), CostModel())


@pytest.mark.slow
def test_linear_search_k4(program, costs):
    cm = costs("compare_only.cm")
    typed = program("linsearch_k4.ia")
    verdict = check_timing(build_timing_model(typed, cm, Approximation.under(0)))
    assert verdict.kind == VerdictKind.LEAK
    assert abs(verdict.cost_before - verdict.cost_after) >= 1


@pytest.mark.parametrize("kind, wire", [
    (VerdictKind.SECURE, "SECURE"),
    (VerdictKind.LEAK, "LEAK"),
    (VerdictKind.POSSIBLE_LEAK, "POSSIBLE_LEAK"),
    (VerdictKind.UNSAFE, "UNSAFE"),
])
def test_verdict_line_uses_wire_names(kind, wire):
    verdict = Verdict(kind, (run(), TOKEN, DELIM, done()), cost_before=1, cost_after=0)
    assert verdict.to_record() == f"verdict={wire} cost_before=1 cost_after=0 witness=run.$.#.done"
    assert verdict.to_dict()["verdict"] == wire


# -- approximations and witnesses --------------------------------------------

@pytest.mark.parametrize("name", ["example2.ia", "two_oracle.ia"])
def test_under_approximations_grow_towards_the_over_approximation(program, name):
    typed = program(name)
    under0, under1, over = (
        build_timing_model(typed, CostModel(), approximation).automaton
        for approximation in (Approximation.under(0), Approximation.under(1), Approximation.over())
    )
    assert fa.language_included(under0, under1)
    assert fa.language_included(under1, over)


@pytest.mark.parametrize("name, cost_file, approximation, kind", [
    ("example1.ia", "example1.cm", Approximation(), VerdictKind.LEAK),
    ("example2.ia", None, Approximation.over(), VerdictKind.POSSIBLE_LEAK),
    ("two_oracle.ia", None, Approximation.under(0), VerdictKind.LEAK),
    ("linsearch_k2.ia", "compare_only.cm", Approximation.under(0), VerdictKind.LEAK),
])
def test_timing_witness_recounts(program, costs, name, cost_file, approximation, kind):
    cm = costs(cost_file) if cost_file else CostModel()
    model = build_timing_model(program(name), cm, approximation)
    verdict = check_timing(model)
    assert verdict.kind == kind
    assert fa.accepts(model.automaton, verdict.witness)
    assert verdict.witness.count(DELIM) == 1
    assert segment_tokens(verdict.witness) == (verdict.cost_before, verdict.cost_after)


@pytest.mark.parametrize("name, kind", [
    ("tani_padding.ia", VerdictKind.LEAK),
    ("tani_explicit.ia", VerdictKind.UNSAFE),
])
def test_tani_witness_recounts(program, name, kind):
    model = build_tani_model(program(name), CostModel())
    verdict = check_tani(model)
    assert verdict.kind == kind
    assert fa.accepts(model.automaton, verdict.witness)
    assert verdict.witness.count(DELIM) == 3
    if kind == VerdictKind.LEAK:
        assert segment_tokens(verdict.witness)[1:3] == (verdict.cost_before, verdict.cost_after)
