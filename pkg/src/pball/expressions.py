"""Tiny arithmetic grammar for custom profiles and reactions in config files.

Supported: one free identifier, the functions sin, cos, sinh, cosh, exp, pow,
numeric literals, parentheses, + - * / and unary minus.  Everything else is
rejected with a message naming the offending construct.
"""

from __future__ import annotations

import ast
from typing import Callable

import numpy as np

from .errors import ExpressionError

__all__ = ["compile_expression"]

_FUNCS = {
    "sin": (np.sin, 1),
    "cos": (np.cos, 1),
    "sinh": (np.sinh, 1),
    "cosh": (np.cosh, 1),
    "exp": (np.exp, 1),
    "pow": (np.power, 2),
}

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


def _eval(node: ast.AST, var: str, x):
    if isinstance(node, ast.Expression):
        return _eval(node.body, var, x)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
            return float(node.value)
        raise ExpressionError(f"unsupported literal {node.value!r}")
    if isinstance(node, ast.Name):
        if node.id == var:
            return x
        raise ExpressionError(f"unknown identifier {node.id!r}; only {var!r} "
                              "is available")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        val = _eval(node.operand, var, x)
        return -val if isinstance(node.op, ast.USub) else val
    if isinstance(node, ast.BinOp):
        fn = _BINOPS.get(type(node.op))
        if fn is None:
            raise ExpressionError(
                f"operator {type(node.op).__name__} is not in the grammar")
        return fn(_eval(node.left, var, x), _eval(node.right, var, x))
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCS:
            raise ExpressionError("only sin, cos, sinh, cosh, exp, pow may be "
                                  "called")
        fn, arity = _FUNCS[node.func.id]
        if node.keywords or len(node.args) != arity:
            raise ExpressionError(f"{node.func.id} takes exactly {arity} "
                                  "positional argument(s)")
        return fn(*(_eval(a, var, x) for a in node.args))
    raise ExpressionError(f"construct {type(node).__name__} is not in the grammar")


def compile_expression(text: str, var: str = "r") -> Callable:
    """Compile an expression string into a numpy-aware callable of one variable."""
    if not isinstance(text, str):
        raise ExpressionError("expression must be a string")
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse expression {text!r}: {exc.msg}") from None
    _eval(tree, var, np.asarray(0.5))  # validate eagerly with a probe value

    def fn(x):
        arr = np.asarray(x, dtype=float)
        out = np.asarray(_eval(tree, var, arr), dtype=float)
        if out.shape != arr.shape:
            out = np.broadcast_to(out, arr.shape).astype(float)
        return float(out) if np.ndim(x) == 0 else out

    fn.expression = text
    return fn
