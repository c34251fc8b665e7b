"""Tree-walking evaluator for model-language expressions.

This is the reference semantics.  The generated code in
:mod:`dagmc.modelang.codegen` must agree with it; the test-suite checks that.
"""

from __future__ import annotations

import math

import numpy as np

from ..distributions import ARITY, BUILTINS, builtin_logdensity
from ..errors import DomainError, EvaluationError, InvalidParameter, UnboundIdentifier
from . import ast

NINF = -math.inf

MATH_FUNCTIONS = {
    "exp": 1,
    "log": 1,
    "sqrt": 1,
    "abs": 1,
    "pow": 2,
    "min": None,  # variadic
    "max": None,
}


def known_function(name: str) -> bool:
    return name in MATH_FUNCTIONS or name in BUILTINS


def safe_exp(v: float) -> float:
    try:
        return math.exp(v)
    except OverflowError:
        return math.inf


def safe_pow(a: float, b: float) -> float:
    try:
        return math.pow(a, b)
    except OverflowError:
        return math.inf


def _where(e):
    return e.pos or (None, None)


def _is_vec(v) -> bool:
    return isinstance(v, np.ndarray)


def _num(v, e):
    if isinstance(v, str):
        raise EvaluationError(f"string {v!r} used as a number", *_where(e))
    return v


def eval_expr(e, env, density: bool = False):
    """Evaluate ``e`` with identifiers bound by ``env``.

    Scalars come back as ``float``, vectors as 1-D ``numpy`` arrays.  With
    ``density=True`` a domain error or invalid distribution parameter
    yields ``-inf`` instead of raising.
    """
    try:
        return _eval(e, env)
    except DomainError:
        if density:
            return NINF
        raise


def _eval(e, env):
    if isinstance(e, ast.Num):
        return float(e.value)
    if isinstance(e, ast.Str):
        return e.value
    if isinstance(e, ast.Name):
        try:
            v = env[e.id]
        except KeyError:
            raise UnboundIdentifier(f"unbound identifier {e.id!r}", *_where(e)) from None
        if _is_vec(v) or isinstance(v, str):
            return v
        return float(v)
    if isinstance(e, ast.Unary):
        return -_num(_eval(e.operand, env), e)
    if isinstance(e, ast.Binary):
        a = _num(_eval(e.left, env), e)
        b = _num(_eval(e.right, env), e)
        return _binary(e, a, b)
    if isinstance(e, ast.Cond):
        test = _num(_eval(e.test, env), e)
        if _is_vec(test):
            raise EvaluationError("condition must be a scalar", *_where(e))
        return _eval(e.then if test != 0.0 else e.orelse, env)
    if isinstance(e, ast.Call):
        return _call(e, [_num(_eval(a, env), e) for a in e.args])
    if isinstance(e, ast.Vector):
        parts = [np.atleast_1d(_num(_eval(a, env), e)) for a in e.items]
        return np.concatenate(parts).astype(float) if parts else np.zeros(0)
    if isinstance(e, ast.Index):
        target = _num(_eval(e.target, env), e)
        idx = _num(_eval(e.index, env), e)
        return index_value(target, idx, e)
    raise EvaluationError(f"cannot evaluate {type(e).__name__}")


def index_value(target, idx, e=None):
    where = _where(e) if e is not None else (None, None)
    if _is_vec(idx) or idx != int(idx):
        raise EvaluationError(f"index must be an integer, got {idx!r}", *where)
    vec = np.atleast_1d(target)
    i = int(idx)
    if not 1 <= i <= vec.shape[0]:
        raise EvaluationError(f"index {i} out of range 1..{vec.shape[0]}", *where)
    return float(vec[i - 1])


def _binary(e, a, b):
    op = e.op
    if not (_is_vec(a) or _is_vec(b)):
        if op == "+":
            return a + b
        if op == "-":
            return a - b
        if op == "*":
            return a * b
        if op == "/":
            if b == 0.0:
                raise DomainError("division by zero", *_where(e))
            return a / b
        if op == "^":
            try:
                return safe_pow(a, b)
            except ValueError:
                raise DomainError(f"{a!r}^{b!r} is undefined", *_where(e)) from None
        return 1.0 if _compare(op, a, b) else 0.0
    if _is_vec(a) and _is_vec(b) and a.shape != b.shape:
        raise EvaluationError(f"vector lengths {a.shape[0]} and {b.shape[0]} differ", *_where(e))
    if op == "/" and np.any(np.asarray(b) == 0.0):
        raise DomainError("division by zero", *_where(e))
    with np.errstate(all="ignore"):
        if op == "+":
            out = np.add(a, b)
        elif op == "-":
            out = np.subtract(a, b)
        elif op == "*":
            out = np.multiply(a, b)
        elif op == "/":
            out = np.divide(a, b)
        elif op == "^":
            out = np.power(np.asarray(a, dtype=float), b)
        else:
            return _compare(op, a, b).astype(float)
    if np.any(np.isnan(out)):
        raise DomainError("undefined vector operation", *_where(e))
    return out


def _compare(op, a, b):
    if op == "<":
        return np.less(a, b) if _is_vec(a) or _is_vec(b) else a < b
    if op == "<=":
        return np.less_equal(a, b) if _is_vec(a) or _is_vec(b) else a <= b
    if op == ">":
        return np.greater(a, b) if _is_vec(a) or _is_vec(b) else a > b
    if op == ">=":
        return np.greater_equal(a, b) if _is_vec(a) or _is_vec(b) else a >= b
    if op == "==":
        return np.equal(a, b) if _is_vec(a) or _is_vec(b) else a == b
    return np.not_equal(a, b) if _is_vec(a) or _is_vec(b) else a != b


def _call(e, args):
    name = e.func
    if name in BUILTINS:
        if len(args) != ARITY[name] + 1:
            raise EvaluationError(f"{name} takes {ARITY[name] + 1} argument(s), got {len(args)}", *_where(e))
        try:
            return builtin_logdensity(name, args[0], args[1:])
        except InvalidParameter as exc:
            raise DomainError(str(exc), *_where(e)) from None
    if name not in MATH_FUNCTIONS:
        raise EvaluationError(f"unknown function {name!r}", *_where(e))
    arity = MATH_FUNCTIONS[name]
    if arity is not None and len(args) != arity:
        raise EvaluationError(f"{name} takes {arity} argument(s), got {len(args)}", *_where(e))
    if name in ("min", "max"):
        if not args:
            raise EvaluationError(f"{name} needs at least one argument", *_where(e))
        flat = np.concatenate([np.atleast_1d(a) for a in args])
        return float(flat.min() if name == "min" else flat.max())
    if name == "pow":
        return _binary(ast.Binary("^", e.args[0], e.args[1], pos=e.pos), args[0], args[1])
    x = args[0]
    if _is_vec(x):
        with np.errstate(all="ignore"):
            if name == "exp":
                return np.exp(x)
            if name == "abs":
                return np.abs(x)
            if name == "log" and np.any(x <= 0):
                raise DomainError("log of a non-positive value", *_where(e))
            if name == "sqrt" and np.any(x < 0):
                raise DomainError("sqrt of a negative value", *_where(e))
            return np.log(x) if name == "log" else np.sqrt(x)
    if name == "exp":
        return safe_exp(x)
    if name == "abs":
        return abs(x)
    if name == "log":
        if not x > 0:
            raise DomainError(f"log of {x!r}", *_where(e))
        return math.log(x)
    if not x >= 0:
        raise DomainError(f"sqrt of {x!r}", *_where(e))
    return math.sqrt(x)
