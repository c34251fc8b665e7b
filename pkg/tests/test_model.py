import math
import os

import numpy as np
import pytest
from scipy import integrate

from dagmc import distributions as dist
from dagmc.build import graph_from_model
from dagmc.errors import BadArity, CycleDetected, DuplicateName, InvalidParameter, UnknownDensity, UnknownParent
from dagmc.model import (
    OBSERVED,
    Block,
    DensityRef,
    Node,
    block_dependents,
    block_logdensity,
    build_graph,
    default_blocks,
    joint_logdensity,
    log_factor,
)
from dagmc.modelang import parse_model, parse_model_file

from conftest import MODELS, random_dag


@pytest.fixture(scope="module")
def baseball():
    return graph_from_model(parse_model_file(os.path.join(MODELS, "baseball.model")))


def graph(text):
    return graph_from_model(parse_model(text))


def test_baseball_structure(baseball):
    g = baseball
    nodes = [n for n in g.nodes if n != "v"]
    assert len(nodes) == 38
    assert g.n_free == 20
    assert sum(1 for n in nodes if g.nodes[n].kind == OBSERVED) == 18
    assert g.nodes["t7"].parents == ("mu", "a")
    assert g.nodes["y7"].parents == ("t7", "v")
    assert g.nodes["y1"].value == (0.4,)
    for n in g.topo_order:
        for p in g.nodes[n].parents:
            assert g.topo_index(p) < g.topo_index(n)
    # children is the transpose of parents
    for n, kids in g.children.items():
        for k in kids:
            assert n in g.nodes[k].parents
    for n in g.nodes:
        for p in g.nodes[n].parents:
            assert n in g.children[p]


def test_single_node():
    g = build_graph([Node("x", density=DensityRef.named("duniform"))])
    assert g.topo_order == ("x",)


def test_cycle_detected():
    decls = [Node("a", parents=("b",), density=DensityRef.named("dnorm", ("b", "b"))),
             Node("b", parents=("a",), density=DensityRef.named("dnorm", ("a", "a")))]
    with pytest.raises(CycleDetected) as info:
        build_graph(decls)
    assert set(info.value.cycle) == {"a", "b"}


def test_unknown_parent_and_duplicate():
    with pytest.raises(UnknownParent):
        build_graph([Node("a", parents=("zz",), density=DensityRef.named("dexp", ("zz",)))])
    with pytest.raises(DuplicateName):
        build_graph([Node("a", density=DensityRef.named("duniform")), Node("a", density=DensityRef.named("duniform"))])


def test_unknown_density_and_arity():
    with pytest.raises(UnknownDensity):
        graph('model { x { density = "dweird" } }')
    with pytest.raises(BadArity):
        graph('model { m { density = "duniform" } x { parents = {"m"}; density = "dnorm" } }')


def test_deterministic_topo_order():
    text = open(os.path.join(MODELS, "baseball.model")).read()
    a = graph_from_model(parse_model(text, os.path.join(MODELS, "baseball.model")))
    b = graph_from_model(parse_model(text, os.path.join(MODELS, "baseball.model")))
    assert a.topo_order == b.topo_order


def test_log_factor_examples():
    g = graph('model { u { density = "duniform" } x { parents = {"u", "s"}; density = "dnorm" } '
              's { init_val = 2.5; density = dexp(s_, 1) } }')
    state = g.initial_state()
    assert log_factor(g, "u", state) == 0.0
    state[g.position("u")] = 123.0
    assert log_factor(g, "u", state) == 0.0
    state[g.position("x")] = 123.0
    assert log_factor(g, "x", state) == pytest.approx(-0.5 * math.log(2 * math.pi * 2.5), rel=1e-14)
    state[g.position("s")] = -1.0
    assert log_factor(g, "s", state) == -math.inf


def test_block_dependents_baseball(baseball):
    g = baseball
    assert block_dependents(g, Block((("t1", 0),))) == ["t1", "y1"]
    mu = block_dependents(g, Block((("mu", 0),)))
    assert mu == ["mu"] + [f"t{i}" for i in range(1, 19)]
    everything = Block(tuple((n, 0) for n in g.free_nodes))
    assert set(block_dependents(g, everything)) == set(g.factor_nodes)


def test_block_logdensity_t1(baseball):
    g = baseball
    state = g.initial_state()
    mu, a = state[g.position("mu")], state[g.position("a")]
    v = 0.31
    want = dist.dnorm(v, mu, a) + dist.dnorm(0.4, v, 0.00434)
    got = block_logdensity(g, Block((("t1", 0),)), [v], state)
    assert got == pytest.approx(want, rel=1e-14)
    assert state == g.initial_state()


def test_block_logdensity_improper_only():
    g = graph('model { u { density = "duniform" } }')
    for v in (-1e6, 0.0, 3.3):
        assert block_logdensity(g, Block((("u", 0),)), [v]) == 0.0


def test_builtin_examples():
    assert dist.dnorm(0.0, 0.0, 1.0) == pytest.approx(-0.9189385, abs=1e-7)
    assert dist.dexp(2.0, 0.5) == pytest.approx(-1.6931472, abs=1e-7)
    with pytest.raises(InvalidParameter):
        dist.dnorm(1.0, 0.0, 0.0)
    with pytest.raises(UnknownDensity):
        dist.builtin_logdensity("dfoo", 1.0, [])


CONTINUOUS = [
    ("dnorm", (0.3, 2.0), (-np.inf, np.inf)),
    ("dexp", (1.7,), (0.0, np.inf)),
    ("dunif", (-1.0, 2.5), (-1.0, 2.5)),
    ("dgamma", (2.5, 1.5), (0.0, np.inf)),
    ("dbeta", (2.0, 3.5), (0.0, 1.0)),
    ("dlnorm", (0.2, 0.5), (0.0, np.inf)),
    ("dt", (1.0, 2.0, 5.0), (-np.inf, np.inf)),
]


@pytest.mark.parametrize("name,args,support", CONTINUOUS)
def test_continuous_normalized(name, args, support):
    f = lambda x: math.exp(dist.builtin_logdensity(name, x, args))
    total, _ = integrate.quad(f, *support, limit=200, epsabs=1e-10)
    assert total == pytest.approx(1.0, abs=1e-6)


def test_discrete_normalized():
    assert sum(math.exp(dist.dpois(k, 3.2)) for k in range(200)) == pytest.approx(1.0, abs=1e-6)
    assert math.exp(dist.dbern(0, 0.3)) + math.exp(dist.dbern(1, 0.3)) == pytest.approx(1.0, abs=1e-12)


def test_builtin_vector_elementwise():
    x = np.array([0.1, -0.4, 2.0])
    want = sum(dist.dnorm(v, 0.5, 1.5) for v in x)
    assert dist.builtin_logdensity("dnorm", x, [0.5, 1.5]) == pytest.approx(want, rel=1e-14)


def test_default_blocks():
    g = graph('model { x { dim = 3; density = dnorm(x_, 0, 1) } }')
    blocks = default_blocks(g)
    assert len(blocks) == 1 and blocks[0].dim == 3


def test_default_blocks_baseball(baseball):
    blocks = default_blocks(baseball)
    assert len(blocks) == baseball.n_free == 20
    assert all(b.dim == 1 for b in blocks)
    merged = default_blocks(baseball, [("mu", "a")])
    assert len(merged) == 19
    assert merged[0].members == (("mu", 0), ("a", 0))


def test_default_starts():
    g = graph('model { p { density = dunif(p_, 2, 4) } g { density = dgamma(g_, 2, 1) } '
              'b { density = "duniform" } }')
    s = g.initial_state()
    # custom expressions have no known support: start at 0
    assert [s[g.position(n)] for n in "pgb"] == [0.0, 0.0, 0.0]
    g2 = graph('const { lo = 2; hi = 4 } model { p { parents = {"lo", "hi"}; density = "dunif" } '
               'q { density = "dgamma"; parents = {"lo", "hi"} } }')
    s2 = g2.initial_state()
    assert s2[g2.position("p")] == 3.0
    assert s2[g2.position("q")] == 1.0


def test_markov_blanket_exact(rng):
    """Block-restricted differences equal full-joint differences (200 random DAGs)."""
    for _ in range(200):
        g = random_dag(rng)
        free = list(g.free_nodes)
        k = int(rng.integers(1, len(free) + 1))
        chosen = rng.choice(free, size=k, replace=False)
        block = Block(tuple((str(n), 0) for n in chosen))
        compiled = g.compile_block(block)
        state = g.initial_state()
        for n in free:
            state[g.position(n)] = float(rng.normal())
        for _ in range(5):
            new = rng.normal(size=k)
            old = [state[i] for i in compiled.indices]
            d_block = block_logdensity(g, compiled, new, state) - block_logdensity(g, compiled, old, state)
            moved = list(state)
            for i, v in zip(compiled.indices, new):
                moved[i] = float(v)
            d_full = joint_logdensity(g, moved) - joint_logdensity(g, state)
            assert d_block == pytest.approx(d_full, rel=1e-12, abs=1e-12)
            if compiled.pair is not None:
                a, b = compiled.pair(state, float(new[0]))
                assert b - a == pytest.approx(d_full, rel=1e-12, abs=1e-12)


def test_dependents_minimal(rng):
    for _ in range(50):
        g = random_dag(rng)
        name = str(rng.choice(g.free_nodes))
        block = Block(((name, 0),))
        state = g.initial_state()
        for dep in block_dependents(g, block):
            moved = list(state)
            moved[g.position(name)] += 0.37
            assert log_factor(g, dep, moved) != log_factor(g, dep, state)
