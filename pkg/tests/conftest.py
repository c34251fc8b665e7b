import math
import os

import numpy as np
import pytest

from dagmc.model import OBSERVED, DensityRef, Node, build_graph
from dagmc.modelang import parse_expr
from dagmc.sampler import dr_log_alpha2

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
MODELS = os.path.join(ROOT, "models")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_spd(rng, d, jitter=0.5):
    a = rng.normal(size=(d, d))
    return a @ a.T + jitter * np.eye(d)


def random_lower(rng, d):
    L = np.tril(rng.normal(size=(d, d)))
    L[np.diag_indices(d)] = rng.uniform(0.5, 2.0, size=d)
    return L


def random_dag(rng):
    """Random DAG of at most 8 scalar nodes with Gaussian, Student and custom factors."""
    n = int(rng.integers(2, 9))
    decls = []
    for i in range(n):
        name = f"n{i}"
        parents = tuple(f"n{j}" for j in range(i) if rng.random() < 0.4)
        kind = rng.integers(3)
        mean = " + ".join(f"{rng.normal():.3f}*{p}" for p in parents) or "0"
        if kind == 0:
            expr = f"dnorm({name}_, {mean}, {rng.uniform(0.5, 2):.3f})"
        elif kind == 1:
            expr = f"dt({name}_, {mean}, {rng.uniform(0.5, 2):.3f}, 4)"
        else:
            expr = f"-0.5 * ({name}_ - ({mean}))^2 - 0.1 * {name}_^4"
        observed = rng.random() < 0.25 and i > 0
        value = (float(rng.normal()),)
        decls.append(Node(name, OBSERVED if observed else "stochastic", 1, parents,
                          DensityRef.custom(parse_expr(expr)),
                          None if observed else value, value if observed else None))
    g = build_graph(decls)
    if not g.free_nodes:
        return random_dag(rng)
    return g


def dr_kernel(logpi, h, s, gamma, kind, pad=20):
    """Two-stage DR transition matrix on a grid with discretized proposals.

    The first-stage point may fall up to ``pad`` cells outside the grid,
    where the target is zero.
    """
    n = len(logpi)
    ext = np.full(n + 2 * pad, -math.inf)
    ext[pad:pad + n] = logpi
    lq = kind.log_density_scalar
    offsets = np.arange(-(n + 2 * pad), n + 2 * pad + 1)
    q1 = np.exp([lq(k * h / s) for k in offsets])
    q1 /= q1.sum()
    q2 = np.exp([lq(k * h / (gamma * s)) for k in offsets])
    q2 /= q2.sum()
    o = n + 2 * pad
    P = np.zeros((n, n))
    for i in range(n):
        lx = logpi[i]
        for j in range(-pad, n + pad):
            ly1 = ext[j + pad]
            w1 = q1[o + j - i]
            a1 = 1.0 if ly1 >= lx else math.exp(ly1 - lx)
            if j != i and 0 <= j < n:
                P[i, j] += w1 * a1
            rej = w1 * (1.0 - a1)
            if rej == 0.0:
                continue
            for k in range(n):
                if k != i:
                    la = dr_log_alpha2(lx, ly1, logpi[k], lq((j - k) * h / s), lq((j - i) * h / s))
                    P[i, k] += rej * q2[o + k - i] * math.exp(la)
        P[i, i] = 1.0 - P[i].sum()
    return P


# (label, passed, detail) rows filled in by test_acceptance.py
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for label, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
