"""Finite-domain expression evaluation for path feasibility checking.

Values are ints, strings, and booleans.  Integer division and modulo use
truncation toward zero (the convention of the analyzed language family),
which matters for negative operands.  Evaluation is unknown-tolerant: the
UNKNOWN sentinel propagates through operators, letting the per-method stage
defer conditions that depend on call returns until the interprocedural
merge supplies real values.

Satisfiability of a constraint conjunction is decided by brute-force
enumeration over declared variable domains; domains are small by design, so
this doubles as the witness-binding generator.
"""

from __future__ import annotations

import itertools
from typing import Iterator, Optional, Union

from . import lang

Value = Union[int, str, bool]


class Unknown:
    _instance: Optional["Unknown"] = None

    def __new__(cls) -> "Unknown":
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "UNKNOWN"


UNKNOWN = Unknown()


class EvalError(Exception):
    """Evaluation failed (type error, missing variable, division by zero)."""


def java_div(a: int, b: int) -> int:
    if b == 0:
        raise EvalError("division by zero")
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def java_mod(a: int, b: int) -> int:
    return a - java_div(a, b) * b


def _require_int(v) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise EvalError(f"expected int, got {v!r}")
    return v


def _require_bool(v) -> bool:
    if not isinstance(v, bool):
        raise EvalError(f"expected boolean, got {v!r}")
    return v


def eval_expr(expr: lang.Expr, env: dict):
    """Evaluate an expression; returns a Value or UNKNOWN."""
    if isinstance(expr, lang.IntLit):
        return expr.value
    if isinstance(expr, lang.StrLit):
        return expr.value
    if isinstance(expr, lang.BoolLit):
        return expr.value
    if isinstance(expr, lang.Var):
        if expr.name not in env:
            raise EvalError(f"undefined variable {expr.name!r}")
        return env[expr.name]
    if isinstance(expr, lang.Unary):
        operand = eval_expr(expr.operand, env)
        if operand is UNKNOWN:
            return UNKNOWN
        if expr.op == "!":
            return not _require_bool(operand)
        return -_require_int(operand)
    if isinstance(expr, lang.Binary):
        return _eval_binary(expr, env)
    raise EvalError(f"not an expression: {expr!r}")


def _eval_binary(expr: lang.Binary, env: dict):
    op = expr.op
    if op in ("&&", "||"):
        left = eval_expr(expr.left, env)
        if left is not UNKNOWN:
            left = _require_bool(left)
            if op == "&&" and not left:
                return False
            if op == "||" and left:
                return True
        right = eval_expr(expr.right, env)
        if left is UNKNOWN or right is UNKNOWN:
            # one side unknown and the other non-deciding
            if right is not UNKNOWN:
                right = _require_bool(right)
                if op == "&&" and not right:
                    return False
                if op == "||" and right:
                    return True
            return UNKNOWN
        return _require_bool(right)

    left = eval_expr(expr.left, env)
    right = eval_expr(expr.right, env)
    if left is UNKNOWN or right is UNKNOWN:
        return UNKNOWN
    if op == "==":
        return left == right and type(left) is type(right)
    if op == "!=":
        return not (left == right and type(left) is type(right))
    if op in ("<", "<=", ">", ">="):
        a, b = _require_int(left), _require_int(right)
        return {"<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[op]
    if op == "+":
        if isinstance(left, str) and isinstance(right, str):
            return left + right
        return _require_int(left) + _require_int(right)
    if op == "-":
        return _require_int(left) - _require_int(right)
    if op == "*":
        return _require_int(left) * _require_int(right)
    if op == "/":
        return java_div(_require_int(left), _require_int(right))
    if op == "%":
        return java_mod(_require_int(left), _require_int(right))
    raise EvalError(f"unknown operator {op!r}")


def render_value(v) -> str:
    if v is UNKNOWN:
        return "<*>"
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def render_template(template: str, values: list) -> str:
    out = []
    pos = 0
    it = iter(values)
    while True:
        idx = template.find("{}", pos)
        if idx < 0:
            out.append(template[pos:])
            break
        out.append(template[pos:idx])
        out.append(render_value(next(it)))
        pos = idx + 2
    return "".join(out)


# ---------------------------------------------------------------------------
# Finite-domain enumeration
# ---------------------------------------------------------------------------

def enumerate_assignments(domains: dict[str, list]) -> Iterator[dict]:
    """All assignments over the given domains, in deterministic order."""
    names = sorted(domains)
    if not names:
        yield {}
        return
    for combo in itertools.product(*(domains[n] for n in names)):
        yield dict(zip(names, combo))


def atom_holds(atom_text: str, required: bool, env: dict) -> Optional[bool]:
    """Check one condition atom; None means undecidable (UNKNOWN inputs)."""
    expr = lang.parse_expr_text(atom_text)
    try:
        value = eval_expr(expr, env)
    except EvalError:
        return False
    if value is UNKNOWN:
        return None
    if not isinstance(value, bool):
        return False
    return value == required


def first_satisfying(atoms: list[tuple[str, bool]],
                     domains: dict[str, list]) -> Optional[dict]:
    """Smallest (enumeration-order) assignment satisfying every atom.

    Variables referenced by atoms but missing from the domains are treated
    as UNKNOWN; atoms that come out UNKNOWN under an assignment do not
    reject it — they are exactly the deferred, call-dependent conditions.
    """
    unknown_vars: dict[str, object] = {}
    for text, _ in atoms:
        for name in lang.expr_vars(lang.parse_expr_text(text)):
            if name not in domains:
                unknown_vars[name] = UNKNOWN
    for env in enumerate_assignments(domains):
        env.update(unknown_vars)
        ok = True
        for text, required in atoms:
            verdict = atom_holds(text, required, env)
            if verdict is False:
                ok = False
                break
        if ok:
            return env
    return None


def satisfiable(atoms: list[tuple[str, bool]], domains: dict[str, list]) -> bool:
    return first_satisfying(atoms, domains) is not None


# ---------------------------------------------------------------------------
# Partial (symbolic) evaluation
# ---------------------------------------------------------------------------
# The merge stage replays a candidate execution once with the root inputs
# left symbolic.  Every assignment and argument binding is substituted and
# constant-folded, so each branch decision reduces to either a concrete
# boolean or a residual expression over root inputs only.  The conjunction
# of residual decisions is then decided by domain enumeration.

def _to_expr(value) -> lang.Expr:
    if isinstance(value, lang.IntLit | lang.StrLit | lang.BoolLit | lang.Var |
                  lang.Unary | lang.Binary):
        return value
    if isinstance(value, bool):
        return lang.BoolLit(value)
    if isinstance(value, int):
        return lang.IntLit(value)
    if isinstance(value, str):
        return lang.StrLit(value)
    raise EvalError(f"cannot lift {value!r} to an expression")


def _as_concrete(expr):
    """Expr -> python value when literal, else None."""
    if isinstance(expr, lang.IntLit):
        return expr.value
    if isinstance(expr, lang.StrLit):
        return expr.value
    if isinstance(expr, lang.BoolLit):
        return expr.value
    return None


def partial_eval(expr: lang.Expr, env: dict):
    """Substitute and fold:  returns a concrete Value, UNKNOWN, or a
    residual ``lang`` expression over the symbolic variables in ``env``.

    ``env`` maps names to concrete values, UNKNOWN, or expressions
    (a root input is typically mapped to ``Var(itself)``)."""
    if isinstance(expr, (lang.IntLit, lang.StrLit, lang.BoolLit)):
        return _as_concrete(expr)
    if isinstance(expr, lang.Var):
        if expr.name not in env:
            raise EvalError(f"undefined variable {expr.name!r}")
        bound = env[expr.name]
        if bound is UNKNOWN or isinstance(bound, (bool, int, str)):
            return bound
        return bound  # residual expression
    if isinstance(expr, lang.Unary):
        inner = partial_eval(expr.operand, env)
        if inner is UNKNOWN:
            return UNKNOWN
        if not isinstance(inner, (bool, int, str)):
            return lang.Unary(expr.op, _to_expr(inner))
        if expr.op == "!":
            return not _require_bool(inner)
        return -_require_int(inner)
    if isinstance(expr, lang.Binary):
        left = partial_eval(expr.left, env)
        if expr.op in ("&&", "||") and isinstance(left, bool):
            if expr.op == "&&" and not left:
                return False
            if expr.op == "||" and left:
                return True
            return partial_eval(expr.right, env)
        right = partial_eval(expr.right, env)
        if left is UNKNOWN or right is UNKNOWN:
            return UNKNOWN
        if isinstance(left, (bool, int, str)) and isinstance(right, (bool, int, str)):
            return _eval_binary(
                lang.Binary(expr.op, _to_expr(left), _to_expr(right)), {})
        return lang.Binary(expr.op, _to_expr(left), _to_expr(right))
    raise EvalError(f"not an expression: {expr!r}")


def residual_vars(value) -> list[str]:
    if value is UNKNOWN or isinstance(value, (bool, int, str)):
        return []
    return lang.expr_vars(value)

