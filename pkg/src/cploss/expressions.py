"""Safe arithmetic expressions for user-supplied weights and partial losses.

The grammar is deliberately tiny: the binary operators ``+ - * / ^``, unary
minus, the functions ``log exp sqrt min max``, numeric literals, and the
single variable ``c``.  Expressions are parsed with :mod:`ast` and compiled
to a numpy-vectorised callable; anything outside the grammar is rejected.
"""

from __future__ import annotations

import ast
from typing import Callable

import numpy as np

__all__ = ["compile_expression", "ExpressionError"]


class ExpressionError(ValueError):
    """The expression uses something outside the supported grammar."""


_FUNCTIONS = {
    "log": np.log,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "min": np.minimum,
    "max": np.maximum,
}

_BINOPS = {
    ast.Add: np.add,
    ast.Sub: np.subtract,
    ast.Mult: np.multiply,
    ast.Div: np.divide,
    ast.Pow: np.power,
}


def _eval_node(node: ast.AST, c):
    if isinstance(node, ast.Expression):
        return _eval_node(node.body, c)
    if isinstance(node, ast.Constant):
        if isinstance(node.value, (int, float)):
            return float(node.value)
        raise ExpressionError(f"literal {node.value!r} is not numeric")
    if isinstance(node, ast.Name):
        if node.id == "c":
            return c
        raise ExpressionError(f"unknown variable {node.id!r}; only 'c' is allowed")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        val = _eval_node(node.operand, c)
        return -val if isinstance(node.op, ast.USub) else val
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval_node(node.left, c), _eval_node(node.right, c))
    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS:
            raise ExpressionError("only log, exp, sqrt, min, max calls are allowed")
        if node.keywords:
            raise ExpressionError("keyword arguments are not allowed")
        args = [_eval_node(a, c) for a in node.args]
        fn = _FUNCTIONS[node.func.id]
        if node.func.id in ("min", "max"):
            if len(args) != 2:
                raise ExpressionError(f"{node.func.id} takes exactly two arguments")
            return fn(*args)
        if len(args) != 1:
            raise ExpressionError(f"{node.func.id} takes exactly one argument")
        return fn(args[0])
    raise ExpressionError(f"unsupported syntax: {ast.dump(node)}")


def compile_expression(source: str) -> Callable:
    """Compile an expression in the variable ``c`` to a vectorised callable."""
    text = source.replace("^", "**")
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as err:
        raise ExpressionError(f"cannot parse expression {source!r}: {err}") from err
    # validate eagerly on a probe value so bad expressions fail at compile time
    _eval_node(tree, np.asarray(0.5))

    def fn(c):
        with np.errstate(all="ignore"):
            out = _eval_node(tree, np.asarray(c, dtype=float))
        return np.asarray(out, dtype=float) + np.zeros_like(np.asarray(c, dtype=float))

    fn.__doc__ = f"expression: {source}"
    return fn
