import pytest

from slotgame import automaton as fa
from slotgame.errors import ContextNotEmpty, NonNormalTerm, StateDomainError, UnsupportedType
from slotgame.frontend import normalize, parse_and_typecheck
from slotgame.gamesem import arena, cell, copycat, denote, denote_at_state, detag, op_strategy, plug
from slotgame.models import DELIM, TOKEN, CostModel, done, ok, q, read, run, val, write
from slotgame.security import build_timing_model
from slotgame.syntax import COM, FunType, exp_type, int_data

INT2 = int_data(2)


def _denote(source: str, cm: CostModel = CostModel()):
    return denote(normalize(parse_and_typecheck(source)), cm)


def _tokens(k: int):
    return fa.tokens(k)


def _w(*letters):
    return fa.word(letters)


def test_arena_tags_arguments():
    ty = FunType((exp_type(INT2),), COM)
    moves = arena(ty, ("f",))
    assert run("f") in moves
    assert q("f", "1") in moves
    assert val(1, "f", "1") in moves


def test_cell_returns_last_written_value():
    c = cell(INT2, 0, ("x",))
    assert fa.accepts(c, [read("x"), val(0, "x")])
    assert fa.accepts(c, [write(1, "x"), ok("x"), read("x"), val(1, "x")])
    assert not fa.accepts(c, [write(1, "x"), ok("x"), read("x"), val(0, "x")])
    with pytest.raises(StateDomainError):
        cell(INT2, 5, ("x",))


def test_copycat_of_expression():
    c = copycat(exp_type(INT2), ("x",))
    assert fa.enumerate_words(c, 4) == {
        (q(), q("x"), val(0, "x"), val(0)),
        (q(), q("x"), val(1, "x"), val(1)),
    }


def test_copycat_rejects_higher_order():
    inner = FunType((exp_type(INT2),), COM)
    with pytest.raises(UnsupportedType):
        copycat(FunType((inner,), COM), ("g",))


def test_plug_constant_into_operator():
    strategy = op_strategy("+", INT2, INT2, INT2, 1)
    one = fa.word([q(), val(1)])
    strategy = plug(strategy, "1", one, exp_type(INT2))
    strategy = plug(strategy, "2", one, exp_type(INT2))
    assert fa.enumerate_words(strategy, 5) == {(q(), TOKEN, val(0))}


def test_skip_and_sequencing():
    assert fa.enumerate_words(_denote("|- skip : com"), 3) == {(run(), done())}
    assert fa.enumerate_words(_denote("|- skip ; skip : com"), 4) == {(run(), TOKEN, done())}


def test_diverge_has_no_complete_play():
    assert fa.is_empty(_denote("|- diverge : com"))


def test_deref_and_assign_of_high():
    model = _denote("high h : varint2 ; |- h := !h : com")
    # asg is charged after run, der after the hidden question to !h
    expected = fa.concat(
        _w(run()), _tokens(2), _w(read("h")),
        fa.union(
            _w(val(0, "h"), write(0, "h"), ok("h")),
            _w(val(1, "h"), write(1, "h"), ok("h")),
        ),
        _w(done()),
    )
    assert fa.language_equal(model, expected)


def test_free_function_call():
    # f(!h): f may evaluate its argument any number of times, each time
    # dereferencing h.
    model = _denote("high h : varint2 ; given f : expint2 -> com ; |- f (!h) : com")
    interrogation = fa.concat(
        _w(q("f", "1")), _tokens(1), _w(read("h")),
        fa.union(_w(val(0, "h"), val(0, "f", "1")), _w(val(1, "h"), val(1, "f", "1"))),
    )
    expected = fa.concat(_w(run()), _tokens(1), _w(run("f")), fa.star(interrogation), _w(done("f"), done()))
    assert fa.language_equal(model, expected)


def test_contracted_occurrences_share_a_tag():
    model = _denote("high h : varint3 ; given x : expint2 ; |- h := x + x : com")
    assert q("x") in model.alphabet
    assert all(not (m.tag and "#" in m.tag[0]) for m in model.alphabet if hasattr(m, "tag"))


def test_detag_merges_occurrences():
    a = fa.word([q("x#1"), val(0, "x#1"), q("x#2", "1")])
    assert fa.enumerate_words(detag(a), 3) == {(q("x"), val(0, "x"), q("x", "1"))}


def test_new_variable_is_hidden():
    model = _denote("|- new x : varint2 := 1 in x := !x + 1 : com")
    # var, asg, der and + each cost one
    assert fa.enumerate_words(model, 8) == {(run(),) + (TOKEN,) * 4 + (done(),)}


def test_while_loop_over_local_counter():
    model = _denote("|- new i : varint3 := 0 in while !i < 2 do i := !i + 1 : com")
    words = fa.enumerate_words(model, 40)
    assert len(words) == 1
    (word,) = words
    assert word[0] == run() and word[-1] == done()
    # 3 tests (if, der, <) + 2 iterations (seq, asg, der, +) + var
    assert sum(1 for letter in word if letter == TOKEN) == 3 * 3 + 2 * 4 + 1


def test_mkvar_uses_writer_and_reader():
    source = (
        "high h : varint2 ; "
        "|- (mkvar (\\v : expint2. h := v) (!h)) := 1 : com"
    )
    model = _denote(source, CostModel(seq=0, if_=0, asg=0, der=0, app=0, var=0, op_default=0))
    assert fa.enumerate_words(model, 4) == {(run(), write(1, "h"), ok("h"), done())}


def test_timing_model_of_skip():
    cm = CostModel()
    model = build_timing_model(parse_and_typecheck("high h : varint2 ; |- skip : com"), cm).automaton
    seed = fa.union(_w(val(0, "k")), _w(val(1, "k")))
    expected = fa.concat(
        _w(run()), _tokens(1), _w(q("k")), seed, _tokens(1), _w(DELIM),
        _tokens(2), _w(q("k")), seed, _w(done()),
    )
    assert fa.language_equal(model, expected)


def test_denote_at_state_hides_the_context():
    typed = normalize(parse_and_typecheck("high h : varint2 ; |- h := 1 : com"))
    model = denote_at_state(typed, {"h": 0}, CostModel())
    assert fa.enumerate_words(model, 4) == {(run(), TOKEN, done())}


def test_denote_at_state_checks_the_state():
    typed = normalize(parse_and_typecheck("high h : varint2 ; |- h := 1 : com"))
    with pytest.raises(StateDomainError):
        denote_at_state(typed, {}, CostModel())
    with pytest.raises(StateDomainError):
        denote_at_state(typed, {"h": 2}, CostModel())
    with pytest.raises(StateDomainError):
        denote_at_state(typed, {"h": 0, "z": 0}, CostModel())
    open_term = normalize(parse_and_typecheck("high h : varint2 ; given c : com ; |- c : com"))
    with pytest.raises(ContextNotEmpty):
        denote_at_state(open_term, {"h": 0}, CostModel())


def test_var_typed_free_identifier():
    model = _denote("high h : varint2 ; given y : varint2 ; |- y := !h : com")
    assert write(0, "y") in model.alphabet
    assert fa.accepts(model, [run(), TOKEN, TOKEN, read("h"), val(1, "h"), write(1, "y"), ok("y"), done()])


def test_mkvar_access_is_free():
    model = _denote("high h : varint2 ; |- h := !(mkvar (\\v : expint2. skip) 1) : com")
    assert fa.enumerate_words(model, 6) == {(run(), TOKEN, write(1, "h"), ok("h"), done())}
    writer = _denote("high h : varint2 ; |- (mkvar (\\v : expint2. h := v) (!h)) := 1 : com")
    # app of the writer and asg into h
    assert fa.enumerate_words(writer, 6) == {(run(), TOKEN, TOKEN, write(1, "h"), ok("h"), done())}


def test_denote_requires_a_normal_term():
    typed = parse_and_typecheck("high h : varint2 ; |- (\\y : expint2. h := y) 1 : com")
    with pytest.raises(NonNormalTerm):
        denote(typed, CostModel())
