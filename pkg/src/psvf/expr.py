"""Tiny arithmetic expression language for user-supplied fields.

Expressions use ``+ - * / ^``, parentheses, ``sin``/``cos`` (plus ``exp``,
``sqrt``), the constants ``pi`` and ``e`` and the variables ``x`` and ``y``.
They are parsed with :mod:`ast` and only a whitelisted subset of nodes is
accepted, so evaluation never reaches arbitrary Python.
"""

from __future__ import annotations

import ast

import numpy as np

from .errors import ExpressionError

_FUNCTIONS = {"sin": np.sin, "cos": np.cos, "exp": np.exp, "sqrt": np.sqrt}
_CONSTANTS = {"pi": np.pi, "e": np.e}
_VARIABLES = ("x", "y")
_BINOPS = (ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow)
_UNARY = (ast.UAdd, ast.USub)


def _check(node):
    if isinstance(node, ast.Expression):
        _check(node.body)
    elif isinstance(node, ast.BinOp):
        if not isinstance(node.op, _BINOPS):
            raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
        _check(node.left)
        _check(node.right)
    elif isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, _UNARY):
            raise ExpressionError(f"operator {type(node.op).__name__} not allowed")
        _check(node.operand)
    elif isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in _FUNCTIONS:
            raise ExpressionError("only sin, cos, exp and sqrt may be called")
        if len(node.args) != 1 or node.keywords:
            raise ExpressionError(f"{node.func.id} takes exactly one argument")
        _check(node.args[0])
    elif isinstance(node, ast.Name):
        if node.id not in _VARIABLES and node.id not in _CONSTANTS:
            raise ExpressionError(f"unknown name {node.id!r}")
    elif isinstance(node, ast.Constant):
        if not isinstance(node.value, (int, float)) or isinstance(node.value, bool):
            raise ExpressionError(f"bad literal {node.value!r}")
    else:
        raise ExpressionError(f"syntax {type(node).__name__} not allowed")


class Expression:
    """A compiled scalar expression in ``x`` and ``y``.

    >>> Expression("x^2 - 2*y")(3.0, 1.0)
    7.0
    """

    def __init__(self, source):
        self.source = str(source)
        try:
            tree = ast.parse(self.source.replace("^", "**"), mode="eval")
        except SyntaxError as exc:
            raise ExpressionError(f"cannot parse {self.source!r}: {exc.msg}") from None
        _check(tree)
        self._code = compile(tree, "<expr>", "eval")
        self._namespace = {"__builtins__": {}, **_FUNCTIONS, **_CONSTANTS}

    def __call__(self, x, y):
        value = eval(self._code, self._namespace, {"x": x, "y": y})
        if np.ndim(x) or np.ndim(y):
            return np.broadcast_to(np.asarray(value, dtype=float), np.broadcast(x, y).shape)
        return float(value)

    def __repr__(self):
        return f"Expression({self.source!r})"
