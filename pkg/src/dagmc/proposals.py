"""Symmetric proposal increments and the seeded random stream behind them."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "FAMILIES",
    "ProposalKind",
    "RngState",
    "sample_standard",
    "log_density_standard",
]

FAMILIES = ("gaussian", "student", "uniform_cube", "laplace_product")

_ALIASES = {
    "gaussian": "gaussian",
    "normal": "gaussian",
    "student": "student",
    "t": "student",
    "uniform": "uniform_cube",
    "uniform_cube": "uniform_cube",
    "laplace": "laplace_product",
    "laplace_product": "laplace_product",
}

_LOG_2PI = math.log(2.0 * math.pi)
_LOG_2 = math.log(2.0)
_CHUNK = 4096


@dataclass(frozen=True)
class ProposalKind:
    family: str = "gaussian"
    dof: float = 6.0

    def __post_init__(self):
        family = _ALIASES.get(self.family)
        if family is None:
            raise ValueError(f"unknown proposal family {self.family!r}; expected one of {FAMILIES}")
        object.__setattr__(self, "family", family)
        if family == "student" and not self.dof > 2:
            raise ValueError("student proposals need dof > 2")

    def draw_scalar(self, rng: RngState) -> float:
        """One draw for a one-dimensional block (same law as ``sample_standard(kind, 1, rng)[0]``)."""
        f = self.family
        if f == "gaussian":
            return rng.normal()
        if f == "student":
            return rng.normal() / math.sqrt(rng.chisquare(self.dof) / self.dof)
        if f == "uniform_cube":
            return 2.0 * rng.uniform() - 1.0
        return rng.laplace()

    def log_density_scalar(self, w: float) -> float:
        f = self.family
        if f == "gaussian":
            return -0.5 * _LOG_2PI - 0.5 * w * w
        if f == "student":
            nu = self.dof
            return (math.lgamma(0.5 * (nu + 1.0)) - math.lgamma(0.5 * nu)
                    - 0.5 * math.log(nu * math.pi) - 0.5 * (nu + 1.0) * math.log1p(w * w / nu))
        if f == "uniform_cube":
            return -_LOG_2 if abs(w) <= 1.0 else -math.inf
        return -_LOG_2 - abs(w)


def _stream(draw, *args):
    """Endless scalar stream served from chunks of ``draw(*args, _CHUNK)``."""
    while True:
        yield from draw(*args, _CHUNK).tolist()


class RngState:
    """Seeded PCG64 stream with buffered scalar draws.

    Each distribution is served from its own pre-drawn chunks, which keeps
    per-draw overhead low in the sampling loop.  Two instances built from the
    same seed yield identical streams as long as the same sequence of calls
    is made.  ``normals`` and ``uniforms`` are the underlying iterators, for
    hot loops that call ``next`` directly.
    """

    def __init__(self, seed: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._gen = np.random.Generator(np.random.PCG64(self.seed))
        self.normals = _stream(self._gen.standard_normal)
        self.uniforms = _stream(self._gen.random)
        self._laplaces = _stream(self._gen.laplace, 0.0, 1.0)
        self._chi2: dict = {}

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def normal(self) -> float:
        return next(self.normals)

    def uniform(self) -> float:
        return next(self.uniforms)

    def laplace(self) -> float:
        return next(self._laplaces)

    def chisquare(self, dof: float) -> float:
        it = self._chi2.get(dof)
        if it is None:
            it = self._chi2[dof] = _stream(self._gen.chisquare, dof)
        return next(it)


def sample_standard(kind: ProposalKind, d: int, rng: RngState) -> np.ndarray:
    """One draw ``W`` in ``R^d`` from the standard member of ``kind``'s family.

    The student draw is a true multivariate t: a Gaussian vector divided by a
    single ``sqrt(chi2 / dof)`` factor.
    """
    f = kind.family
    if f == "gaussian":
        return np.array([rng.normal() for _ in range(d)])
    if f == "student":
        z = np.array([rng.normal() for _ in range(d)])
        return z / math.sqrt(rng.chisquare(kind.dof) / kind.dof)
    if f == "uniform_cube":
        return np.array([2.0 * rng.uniform() - 1.0 for _ in range(d)])
    return np.array([rng.laplace() for _ in range(d)])


def log_density_standard(kind: ProposalKind, d: int, w) -> float:
    """Normalized log-density of the standard proposal at ``w``."""
    w = np.asarray(w, dtype=float).reshape(-1)
    if w.shape[0] != d:
        raise ValueError(f"expected a vector of length {d}, got {w.shape[0]}")
    f = kind.family
    if f == "gaussian":
        return float(-0.5 * d * _LOG_2PI - 0.5 * np.dot(w, w))
    if f == "student":
        nu = kind.dof
        return float(math.lgamma(0.5 * (nu + d)) - math.lgamma(0.5 * nu)
                     - 0.5 * d * math.log(nu * math.pi)
                     - 0.5 * (nu + d) * math.log1p(np.dot(w, w) / nu))
    if f == "uniform_cube":
        return -d * _LOG_2 if np.all(np.abs(w) <= 1.0) else -math.inf
    return float(-d * _LOG_2 - np.sum(np.abs(w)))
