from __future__ import annotations

import pytest

from logsynth import lang
from logsynth.evalexpr import (UNKNOWN, EvalError, enumerate_assignments,
                               eval_expr, first_satisfying, java_div,
                               java_mod, partial_eval, render_template,
                               render_value, satisfiable)


def e(text: str):
    return lang.parse_expr_text(text)


def test_arithmetic_and_comparison():
    env = {"x": 7, "y": 2}
    assert eval_expr(e("x + y * 2"), env) == 11
    assert eval_expr(e("(x + y) * 2"), env) == 18
    assert eval_expr(e("x > y && y > 0"), env) is True
    assert eval_expr(e("x < y || y < 0"), env) is False
    assert eval_expr(e("!(x == 7)"), env) is False


def test_division_truncates_toward_zero():
    assert java_div(7, 2) == 3
    assert java_div(-7, 2) == -3
    assert java_div(7, -2) == -3
    assert java_mod(-7, 2) == -1
    assert java_mod(7, -2) == 1
    with pytest.raises(EvalError):
        java_div(1, 0)


def test_string_semantics():
    env = {"s": "ab"}
    assert eval_expr(e('s + "c"'), env) == "abc"
    assert eval_expr(e('s == "ab"'), env) is True
    assert eval_expr(e('s != "xy"'), env) is True


def test_type_errors_raise():
    with pytest.raises(EvalError):
        eval_expr(e('1 + "a"'), {})
    with pytest.raises(EvalError):
        eval_expr(e("1 < true"), {})
    with pytest.raises(EvalError):
        eval_expr(e("missing"), {})


def test_unknown_propagates():
    env = {"x": UNKNOWN}
    assert eval_expr(e("x + 1"), env) is UNKNOWN
    assert eval_expr(e("x > 0"), env) is UNKNOWN
    # short-circuit still decides when the known side is decisive
    assert eval_expr(e("false && x > 0"), env) is False
    assert eval_expr(e("true || x > 0"), env) is True


def test_render():
    assert render_value(True) == "true"
    assert render_value(False) == "false"
    assert render_value(3) == "3"
    assert render_value(UNKNOWN) == "<*>"
    assert render_template("a={} b={}", [1, "x"]) == "a=1 b=x"


def test_enumerate_assignments_deterministic():
    domains = {"b": [1, 2], "a": [True, False]}
    combos = list(enumerate_assignments(domains))
    assert combos == [{"a": True, "b": 1}, {"a": True, "b": 2},
                      {"a": False, "b": 1}, {"a": False, "b": 2}]


def test_first_satisfying_and_unsat():
    domains = {"x": [-2, 0, 3, 5]}
    assert first_satisfying([("x > 0", True)], domains) == {"x": 3}
    assert first_satisfying([("x > 0", True), ("x < 0", True)], domains) is None
    assert satisfiable([("x > 0", True), ("x < 5", True)], domains)


def test_first_satisfying_defers_unknown_vars():
    # `ret` has no domain: atoms over it are deferred, not rejected
    witness = first_satisfying([("ret > 0", True), ("x > 0", True)],
                               {"x": [1]})
    assert witness is not None
    assert witness["x"] == 1


def test_partial_eval_folds_constants():
    env = {"n": lang.Var("n")}
    value = partial_eval(e("1 + 2 * 3"), env)
    assert value == 7
    residual = partial_eval(e("n - 1 > 0"), env)
    assert lang.format_expr(residual) == "n - 1 > 0"


def test_partial_eval_substitutes_bindings():
    env = {"n": lang.Var("n")}
    env["i"] = 0
    env["i"] = partial_eval(e("i + 1"), env)
    assert env["i"] == 1
    residual = partial_eval(e("i < n"), env)
    assert lang.format_expr(residual) == "1 < n"


def test_partial_eval_concrete_decision():
    env = {"flag": False}
    assert partial_eval(e("flag"), env) is False
    assert partial_eval(e("!flag"), env) is True


def test_partial_eval_no_shortcircuit_fold_on_residual_left():
    # `left && false` must stay residual: folding would hide evaluation
    # errors the real execution performs on the left side
    env = {"x": lang.Var("x")}
    residual = partial_eval(e("x > 0 && false"), env)
    assert not isinstance(residual, bool)
    assert lang.format_expr(residual) == "x > 0 && false"
