"""Translate expression trees into Python source for fast evaluation.

The sampler evaluates block log-densities millions of times, so expressions
are compiled once into plain Python functions over a flat state list
instead of being walked on every call.  Semantics follow
:mod:`dagmc.modelang.evaluate`.
"""

from __future__ import annotations

import math

import numpy as np

from ..distributions import ARITY, BUILTINS, builtin_logdensity
from ..errors import DomainError, EvaluationError, InvalidParameter, UnboundIdentifier
from . import ast
from .evaluate import MATH_FUNCTIONS, _binary, index_value, safe_exp, safe_pow
from .printer import pretty

DENSITY_ERRORS = (ValueError, ZeroDivisionError, InvalidParameter, DomainError)
VALUE_ERRORS = (ValueError, ZeroDivisionError, InvalidParameter)


def _vlog(a):
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0):
        raise ValueError("log of a non-positive value")
    return np.log(a)


def _vsqrt(a):
    a = np.asarray(a, dtype=float)
    if np.any(a < 0):
        raise ValueError("sqrt of a negative value")
    return np.sqrt(a)


def _vmin(*args):
    return float(np.concatenate([np.atleast_1d(a) for a in args]).min())


def _vmax(*args):
    return float(np.concatenate([np.atleast_1d(a) for a in args]).max())


_OP_NODES = {op: ast.Binary(op, ast.Num(0.0), ast.Num(0.0)) for op in ast.ARITHMETIC + ast.COMPARISONS}


def _vop(op, a, b):
    return _binary(_OP_NODES[op], a, b)


def _vindex(target, idx):
    return index_value(target, idx)


def _dens(name, x, params):
    return builtin_logdensity(name, x, params)


BASE_NAMESPACE = {
    "_np": np,
    "_log": math.log,
    "_sqrt": math.sqrt,
    "_exp": safe_exp,
    "_pow": safe_pow,
    "_vexp": np.exp,
    "_vlog": _vlog,
    "_vsqrt": _vsqrt,
    "_vabs": np.abs,
    "_vmin": _vmin,
    "_vmax": _vmax,
    "_vop": _vop,
    "_vindex": _vindex,
    "_dens": _dens,
    "_NINF": -math.inf,
    "_TWO_PI": 2.0 * math.pi,
    "_DENSITY_ERRORS": DENSITY_ERRORS,
    "_VALUE_ERRORS": VALUE_ERRORS,
    "_DomainError": DomainError,
    "_array": np.array,
}
for _name, _fn in BUILTINS.items():
    BASE_NAMESPACE["_d_" + _name] = _fn


def literal(v: float) -> str:
    v = float(v)
    if math.isfinite(v):
        return repr(v)
    if math.isnan(v):
        return "float('nan')"
    return "float('inf')" if v > 0 else "(-float('inf'))"


class CodeGen:
    """Expression to source translator.

    ``resolve(name)`` returns ``(code, is_vector)`` for an identifier or
    raises :class:`UnboundIdentifier`.  ``element(name, i)`` may return
    direct source for the 1-based component ``i`` of a vector identifier,
    or ``None`` to fall back to a runtime index.
    """

    def __init__(self, resolve, element=None):
        self.resolve = resolve
        self.element = element

    def gen(self, e):
        if isinstance(e, ast.Num):
            return literal(e.value), False
        if isinstance(e, ast.Str):
            raise EvaluationError(f"string {e.value!r} used as a number", *(e.pos or (None, None)))
        if isinstance(e, ast.Name):
            return self.resolve(e.id)
        if isinstance(e, ast.Unary):
            code, vec = self.gen(e.operand)
            return f"(-{code})", vec
        if isinstance(e, ast.Binary):
            return self._binary(e)
        if isinstance(e, ast.Cond):
            test, tvec = self.gen(e.test)
            if tvec:
                raise EvaluationError("condition must be a scalar", *(e.pos or (None, None)))
            a, avec = self.gen(e.then)
            b, bvec = self.gen(e.orelse)
            return f"({a} if {test} != 0.0 else {b})", avec or bvec
        if isinstance(e, ast.Call):
            return self._call(e)
        if isinstance(e, ast.Vector):
            parts = [self.gen(a) for a in e.items]
            if all(not v for _, v in parts):
                return "_array((" + "".join(c + ", " for c, _ in parts) + "))", True
            return "_np.concatenate([" + ", ".join(f"_np.atleast_1d({c})" for c, _ in parts) + "]).astype(float)", True
        if isinstance(e, ast.Index):
            if (self.element is not None and isinstance(e.target, ast.Name)
                    and isinstance(e.index, ast.Num)):
                direct = self.element(e.target.id, e.index.value, e)
                if direct is not None:
                    return direct, False
            t, _ = self.gen(e.target)
            i, _ = self.gen(e.index)
            return f"_vindex({t}, {i})", False
        raise EvaluationError(f"cannot compile {type(e).__name__}")

    def _binary(self, e):
        a, avec = self.gen(e.left)
        b, bvec = self.gen(e.right)
        if avec or bvec:
            return f"_vop({e.op!r}, {a}, {b})", True
        if e.op in ("+", "-", "*", "/"):
            return f"({a} {e.op} {b})", False
        if e.op == "^":
            return f"_pow({a}, {b})", False
        return f"(1.0 if {a} {e.op} {b} else 0.0)", False

    def _call(self, e):
        name = e.func
        where = e.pos or (None, None)
        args = [self.gen(a) for a in e.args]
        codes = [c for c, _ in args]
        anyvec = any(v for _, v in args)
        if name in BUILTINS:
            if len(args) != ARITY[name] + 1:
                raise EvaluationError(f"{name} takes {ARITY[name] + 1} argument(s), got {len(args)}", *where)
            if anyvec:
                return f"_dens({name!r}, {codes[0]}, ({''.join(c + ', ' for c in codes[1:])}))", False
            return f"_d_{name}({', '.join(codes)})", False
        if name not in MATH_FUNCTIONS:
            raise EvaluationError(f"unknown function {name!r}", *where)
        arity = MATH_FUNCTIONS[name]
        if arity is not None and len(args) != arity:
            raise EvaluationError(f"{name} takes {arity} argument(s), got {len(args)}", *where)
        if name in ("min", "max"):
            if not args:
                raise EvaluationError(f"{name} needs at least one argument", *where)
            if anyvec or len(args) == 1:
                return f"_v{name}({', '.join(codes)})", False
            return f"{name}({', '.join(codes)})", False
        if name == "pow":
            return self._binary(ast.Binary("^", e.args[0], e.args[1], pos=e.pos))
        if anyvec:
            return f"_v{name}({codes[0]})", True
        if name == "abs":
            return f"abs({codes[0]})", False
        return f"_{name}({codes[0]})", False


def build_function(name: str, argnames, body_lines, namespace):
    """Exec a generated ``def`` and return the function object."""
    src = f"def {name}({', '.join(argnames)}):\n" + "".join("    " + line + "\n" for line in body_lines)
    ns = dict(BASE_NAMESPACE)
    ns.update(namespace)
    code = compile(src, f"<generated {name}>", "exec")
    exec(code, ns)
    fn = ns[name]
    fn.__source__ = src
    return fn


def compile_expr(expr, argnames, extra=None, density=False):
    """Compile ``expr`` into a function of ``argnames``.

    Identifiers other than the arguments are looked up in ``extra`` (a
    mapping of name to float or vector) and inlined as constants.
    """
    extra = dict(extra or {})
    namespace = {}
    args = list(argnames)

    def resolve(name):
        if name in args:
            return name, False
        if name in extra:
            v = extra[name]
            if isinstance(v, np.ndarray):
                key = f"_c{len(namespace)}"
                namespace[key] = v
                return key, True
            return literal(v), False
        raise UnboundIdentifier(f"unbound identifier {name!r}")

    code, _ = CodeGen(resolve).gen(expr)
    if density:
        body = [
            "try:",
            f"    v = {code}",
            "except _DENSITY_ERRORS:",
            "    return _NINF",
            "return v if v == v else _NINF",
        ]
    else:
        namespace["_expr_text"] = pretty(expr)
        body = [
            "try:",
            f"    return {code}",
            "except _VALUE_ERRORS as exc:",
            "    raise _DomainError(f'{exc} in expression {_expr_text}') from None",
        ]
    return build_function("_compiled", args, body, namespace)
