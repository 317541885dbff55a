from __future__ import annotations

import ast
import math
from typing import Any, Dict, Mapping

from dally.errors import UsageError

# Functions a claim's `expect` line may call.
_FUNCS = {
    "min": min,
    "max": max,
    "abs": abs,
    "sqrt": math.sqrt,
    "log": math.log,
    "exp": math.exp,
    "isclose": lambda a, b, tol=1e-9: math.isclose(a, b, rel_tol=0.0, abs_tol=tol),
}

_NODES = (
    ast.Expression,
    ast.BoolOp,
    ast.BinOp,
    ast.UnaryOp,
    ast.Compare,
    ast.Call,
    ast.Name,
    ast.Load,
    ast.Constant,
    ast.cmpop,
    ast.boolop,
    ast.operator,
    ast.unaryop,
)

_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
_UNARYOPS = (ast.UAdd, ast.USub, ast.Not)
_CMPOPS = (ast.Eq, ast.NotEq, ast.Gt, ast.GtE, ast.Lt, ast.LtE)


def _deny(expr: str, msg: str) -> None:
    raise UsageError(f"bad claim expression {expr!r}: {msg}")


def _check(expr: str, tree: ast.AST, names: Mapping[str, Any]) -> None:
    for n in ast.walk(tree):
        if not isinstance(n, _NODES):
            _deny(expr, f"{type(n).__name__} not allowed")
        if isinstance(n, ast.Constant) and not isinstance(n.value, (int, float, bool)):
            _deny(expr, "only numeric constants allowed")
        if isinstance(n, ast.Call):
            if not isinstance(n.func, ast.Name) or n.func.id not in _FUNCS:
                _deny(expr, "unknown function")
            if n.keywords:
                _deny(expr, "keyword arguments not allowed")
        if isinstance(n, ast.BinOp) and not isinstance(n.op, _BINOPS):
            _deny(expr, f"operator {type(n.op).__name__} not allowed")
        if isinstance(n, ast.UnaryOp) and not isinstance(n.op, _UNARYOPS):
            _deny(expr, f"operator {type(n.op).__name__} not allowed")
        if isinstance(n, ast.Compare) and not all(isinstance(op, _CMPOPS) for op in n.ops):
            _deny(expr, "comparison not allowed")
        if isinstance(n, ast.Name) and n.id not in _FUNCS and n.id not in names:
            _deny(expr, f"unknown metric {n.id!r}")


def safe_eval(expr: str, metrics: Dict[str, Any]) -> Any:
    """
    Evaluate `expr` over `metrics`: arithmetic, comparisons (chains allowed),
    and/or/not, plus min/max/abs/sqrt/log/exp/isclose(a, b[, tol]).
    """
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as e:
        raise UsageError(f"bad claim expression {expr!r}: {e.msg}") from e
    _check(expr, tree, metrics)
    env: Dict[str, Any] = dict(_FUNCS)
    env.update(metrics)
    return eval(compile(tree, "<claim>", "eval"), {"__builtins__": {}}, env)
