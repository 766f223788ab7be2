import pytest

from progen import ProgramGen
from specrt.ir import IRSyntaxError, ValidationError, parse_program, pretty_print, validate
from specrt.ir.nodes import (
    BinOp,
    Float,
    For,
    If,
    Int,
    Program,
    Return,
    Var,
    count_stmts,
    walk_stmts,
    wrap,
)
from specrt.ir.parser import parse_forms
from specrt.specializer import PinSet, pin_and_specialize
from specrt.workloads.lpm import LPM_SOURCE
from specrt.workloads.mmul import MMUL_SOURCE


def rules(src):
    return [d.rule for d in validate(parse_forms(src))]


def test_identity_function_parses_and_is_pure():
    p = parse_program("(func id ((x i64)) (return x))")
    assert list(p.functions) == ["id"]
    assert p["id"].body == (Return(Var("x")),)
    assert p.is_pure("id")


def test_mixed_int_float_is_rejected():
    with pytest.raises(ValidationError) as e:
        parse_program("(func f ((x i64)) (return (+ x 1.0)))")
    assert e.value.function == "f"


def test_mmul_has_one_function_and_six_loops():
    p = parse_program(MMUL_SOURCE)
    assert list(p.functions) == ["matmul"]
    assert sum(isinstance(s, For) for s in walk_stmts(p["matmul"].body)) == 6


def test_lpm_validates_clean():
    assert validate(parse_forms(LPM_SOURCE)) == []


def test_loop_variable_reassignment_reported_once():
    src = "(func f ((n i64)) (for i 0 n 1 (set i 3)) (return 0))"
    diags = validate(parse_forms(src))
    assert [d.rule for d in diags] == ["loop variable reassigned"]
    assert diags[0].function == "f" and diags[0].index == "0/0"


def test_recursion_reported_once():
    src = "(func f ((n i64)) (locals (r i64)) (call f (n) into r) (return r))"
    assert rules(src) == ["recursion not allowed"]


def test_mutual_recursion_reported_once_per_cycle():
    src = """
    (func f ((n i64)) (locals (r i64)) (call g (n) into r) (return r))
    (func g ((n i64)) (locals (r i64)) (call f (n) into r) (return r))
    """
    assert rules(src).count("recursion not allowed") == 1


@pytest.mark.parametrize("src, rule", [
    ("(func f ((x i64)) (return y))", "undefined variable"),
    ("(func f ((x i64)) (locals (y i64)) (return y))", "use before definition"),
    ("(func f ((x i64)) (locals (y i64)) (if (> x 0) (then (set y 1))) (return y))", "use before definition"),
    ("(func f ((x f64)) (return (% x 2.0)))", "type mismatch"),
    ("(func f ((x bool)) (return (+ x x)))", "type mismatch"),
    ("(func f ((x bool)) (return (< x x)))", "type mismatch"),
    ("(func f ((a arr-i64)) (return (load a 1.0)))", "type mismatch"),
    ("(func f ((x i64)) (if (> x 0) (then (return 1)) (else (return 1.0))))", "inconsistent return type"),
    ("(func f ((x i64)) (if (> x 0) (then (return 1))))", "missing return"),
    ("(func f ((x i64)) (call g (x)) (return 0))", "unknown function"),
    ("(func f ((x i64) (x i64)) (return 0))", "duplicate name"),
    ("(func f ((n i64)) (for n 0 3 1 (emit \"t\" n)) (return 0))", "loop variable shadows"),
    ("(func f ((x i64)) (return x)) (specpoint f y workload)", "bad specpoint"),
])
def test_validation_rules(src, rule):
    assert rule in rules(src)


def test_definition_in_both_branches_counts():
    src = "(func f ((x i64)) (locals (y i64)) (if (> x 0) (then (set y 1)) (else (set y 2))) (return y))"
    assert rules(src) == []


def test_returning_branch_does_not_block_definition():
    src = "(func f ((x i64)) (locals (y i64)) (if (> x 0) (then (return 0)) (else (set y 2))) (return y))"
    assert rules(src) == []


def test_guard_only_allowed_first():
    src = "(func f ((x i64)) (emit \"e\" x) (guard ((== x 1))) (return x))"
    assert "misplaced guard" in rules(src)


@pytest.mark.parametrize("src, line", [
    ("(func f ((x i64))\n  (return x)", 1),
    ("(func f ((x i64))\n  (return x)))", 2),
    ("(func f ((x i64))\n\n  (frob x))", 3),
    ("(func f ((x i9)) (return x))", 1),
])
def test_syntax_errors_carry_line(src, line):
    with pytest.raises(IRSyntaxError) as e:
        parse_program(src)
    assert e.value.line == line


def test_comments_and_whitespace_are_ignored():
    a = parse_program("; head\n(func f ((x i64)) ; tail\n  (return (+ x 1)))")
    b = parse_program("(func f ((x i64)) (return (+ x 1)))")
    assert a == b


def test_nested_if_inside_for_round_trips():
    src = """
    (func f ((n i64)) (locals (t i64))
      (set t 0)
      (for i 0 n 1
        (if (> i 2)
          (then (set t (+ t i)))
          (else (if (== i 0) (then (emit "zero" i))))))
      (return t))
    """
    p = parse_program(src)
    text = pretty_print(p)
    assert parse_program(text) == p
    loop = p["f"].body[1]
    assert isinstance(loop, For) and isinstance(loop.body[0], If)
    assert isinstance(loop.body[0].else_[0], If)


def test_specialized_mmul_round_trips():
    p = parse_program(MMUL_SOURCE)
    v = pin_and_specialize(p, PinSet.of("matmul", {"s": 4}))
    q = p.replace_function(v.code)
    assert parse_program(pretty_print(q)) == q


def test_extreme_literals_round_trip():
    src = "(func f ((x f64)) (locals (k i64)) (set k -9223372036854775808) (return (* x 1e+300)))"
    p = parse_program(src)
    assert p["f"].body[0].value == Int(-(1 << 63))
    assert p["f"].body[1].value.rhs == Float(1e300)
    assert parse_program(pretty_print(p)) == p


def test_emit_tag_escapes_round_trip():
    p = parse_program('(func f ((x i64)) (emit "say \\"hi\\" \\\\ ok" x) (return x))')
    assert p["f"].body[0].tag == 'say "hi" \\ ok'
    assert parse_program(pretty_print(p)) == p


def test_generated_corpus_round_trips():
    for seed in range(100):
        p = ProgramGen(seed).program()
        text = pretty_print(p)
        assert parse_program(text) == p, seed
        assert pretty_print(parse_program(text)) == text


def test_wrap_is_twos_complement():
    assert wrap((1 << 63)) == -(1 << 63)
    assert wrap(-(1 << 63) - 1) == (1 << 63) - 1
    assert wrap(5) == 5


def test_count_stmts_counts_nested_blocks():
    body = (For("i", Int(0), Int(3), Int(1), (Return(BinOp("+", Var("i"), Int(1))),)),)
    assert count_stmts(body) == 2


def test_program_equality_is_structural():
    assert Program({}, ()) == Program({}, ())
