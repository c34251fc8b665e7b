"""Built-in log-densities usable as node densities or inside expressions.

All functions return natural-log densities.  ``dnorm`` and ``dlnorm`` are
parametrized by the *variance*.  Out-of-support values give ``-inf``;
invalid parameters raise :class:`InvalidParameter`.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import BadArity, InvalidParameter, UnknownDensity

__all__ = ["BUILTINS", "ARITY", "IMPROPER", "POSITIVE_SUPPORT", "builtin_logdensity"]

NINF = -math.inf
LOG_2PI = math.log(2.0 * math.pi)


def _positive(name, value):
    if not value > 0:
        raise InvalidParameter(f"{name} must be positive, got {value!r}")


def dnorm(x, mean, var):
    _positive("dnorm variance", var)
    d = x - mean
    return -0.5 * math.log(2.0 * math.pi * var) - d * d / (2.0 * var)


def dexp(x, rate):
    _positive("dexp rate", rate)
    if x < 0:
        return NINF
    return math.log(rate) - rate * x


def duniform(x):
    return 0.0


def dunif(x, a, b):
    if not b > a:
        raise InvalidParameter(f"dunif needs a < b, got ({a!r}, {b!r})")
    if x < a or x > b:
        return NINF
    return -math.log(b - a)


def dgamma(x, shape, rate):
    _positive("dgamma shape", shape)
    _positive("dgamma rate", rate)
    if x <= 0:
        return NINF
    return shape * math.log(rate) - math.lgamma(shape) + (shape - 1.0) * math.log(x) - rate * x


def dbeta(x, a, b):
    _positive("dbeta a", a)
    _positive("dbeta b", b)
    if x <= 0 or x >= 1:
        return NINF
    return (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
            + (a - 1.0) * math.log(x) + (b - 1.0) * math.log1p(-x))


def dlnorm(x, meanlog, varlog):
    _positive("dlnorm variance", varlog)
    if x <= 0:
        return NINF
    lx = math.log(x)
    d = lx - meanlog
    return -lx - 0.5 * math.log(2.0 * math.pi * varlog) - d * d / (2.0 * varlog)


def dt(x, mean, scale, dof):
    _positive("dt scale", scale)
    _positive("dt dof", dof)
    z = (x - mean) / scale
    return (math.lgamma(0.5 * (dof + 1.0)) - math.lgamma(0.5 * dof)
            - 0.5 * math.log(dof * math.pi) - math.log(scale)
            - 0.5 * (dof + 1.0) * math.log1p(z * z / dof))


def dpois(k, lam):
    _positive("dpois rate", lam)
    if k < 0 or k != math.floor(k):
        return NINF
    return k * math.log(lam) - lam - math.lgamma(k + 1.0)


def dbern(k, p):
    if not 0.0 <= p <= 1.0:
        raise InvalidParameter(f"dbern probability must lie in [0, 1], got {p!r}")
    if k == 1:
        return math.log(p) if p > 0 else NINF
    if k == 0:
        return math.log1p(-p) if p < 1 else NINF
    return NINF


BUILTINS = {
    "dnorm": dnorm,
    "dexp": dexp,
    "duniform": duniform,
    "dunif": dunif,
    "dgamma": dgamma,
    "dbeta": dbeta,
    "dlnorm": dlnorm,
    "dt": dt,
    "dpois": dpois,
    "dbern": dbern,
}

# number of parameters after the value argument
ARITY = {
    "dnorm": 2,
    "dexp": 1,
    "duniform": 0,
    "dunif": 2,
    "dgamma": 2,
    "dbeta": 2,
    "dlnorm": 2,
    "dt": 3,
    "dpois": 1,
    "dbern": 1,
}

IMPROPER = frozenset({"duniform"})
POSITIVE_SUPPORT = frozenset({"dexp", "dgamma", "dlnorm"})
BOUNDED_SUPPORT = frozenset({"dunif", "dbeta"})


def check_arity(name: str, nparams: int, line=None, col=None):
    if name not in BUILTINS:
        raise UnknownDensity(f"unknown density {name!r}", line, col)
    if ARITY[name] != nparams:
        raise BadArity(f"{name} takes {ARITY[name]} parameter(s) after the value, got {nparams}", line, col)


def builtin_logdensity(name: str, x, args) -> float:
    """Evaluate built-in ``name`` at ``x``.

    A vector ``x`` is handled elementwise and the log-densities summed;
    parameters broadcast against it.
    """
    check_arity(name, len(args))
    fn = BUILTINS[name]
    if np.ndim(x) == 0 and all(np.ndim(a) == 0 for a in args):
        return float(fn(float(x), *(float(a) for a in args)))
    cols = np.broadcast_arrays(np.asarray(x, dtype=float), *(np.asarray(a, dtype=float) for a in args))
    total = 0.0
    for row in zip(*(c.reshape(-1).tolist() for c in cols)):
        total += fn(*row)
        if total == NINF:
            break
    return total
