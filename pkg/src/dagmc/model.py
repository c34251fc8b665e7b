"""Directed acyclic graphical models and Markov-blanket restricted densities.

A :class:`Graph` is immutable.  Per-chain node values live in a flat list
of floats (see :meth:`Graph.initial_state`); ``Graph.layout`` maps every
node to its slice of that list.  Updating a block only needs the factors
of the block's own nodes and of their children, and
:meth:`Graph.compile_block` turns exactly those factors into one generated
Python function.
"""

from __future__ import annotations

import heapq
import math
import re
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import distributions as dist
from .errors import (
    BadArity,
    CycleDetected,
    DuplicateName,
    EvaluationError,
    InvalidParameter,
    UnknownParent,
)
from .modelang import ast
from .modelang.codegen import CodeGen, build_function, literal
from .modelang.evaluate import eval_expr, known_function

__all__ = [
    "STOCHASTIC",
    "OBSERVED",
    "CONSTANT",
    "DensityRef",
    "Node",
    "Block",
    "Graph",
    "CompiledBlock",
    "build_graph",
    "log_factor",
    "joint_logdensity",
    "block_dependents",
    "block_logdensity",
    "builtin_logdensity",
    "default_blocks",
    "parse_member",
]

STOCHASTIC = "stochastic"
OBSERVED = "observed"
CONSTANT = "constant"

NINF = -math.inf
builtin_logdensity = dist.builtin_logdensity


@dataclass(frozen=True)
class DensityRef:
    """Either a built-in applied to argument expressions or a custom log-density expression."""

    builtin: Optional[str] = None
    args: tuple = ()
    expr: Optional[ast.Expr] = None

    @classmethod
    def named(cls, name, parents=()):
        return cls(builtin=name, args=tuple(ast.Name(p) for p in parents))

    @classmethod
    def custom(cls, expr):
        return cls(expr=expr)

    @property
    def improper(self) -> bool:
        return self.builtin in dist.IMPROPER


@dataclass(frozen=True)
class Node:
    name: str
    kind: str = STOCHASTIC
    dim: int = 1
    parents: tuple = ()
    density: Optional[DensityRef] = None
    init_val: Optional[tuple] = None
    value: Optional[tuple] = None
    pos: Optional[tuple] = field(default=None, compare=False, repr=False)

    @property
    def self_ref(self) -> str:
        return self.name + "_"

    @property
    def free(self) -> bool:
        return self.kind == STOCHASTIC

    @property
    def has_factor(self) -> bool:
        return self.kind != CONSTANT and self.density is not None


@dataclass(frozen=True)
class Block:
    """Ordered free components ``(node name, 0-based component)`` updated jointly."""

    members: tuple

    @property
    def dim(self) -> int:
        return len(self.members)

    @property
    def nodes(self) -> tuple:
        seen = []
        for name, _ in self.members:
            if name not in seen:
                seen.append(name)
        return tuple(seen)

    def label(self, graph: Graph | None = None) -> str:
        parts = []
        for name, comp in self.members:
            if graph is not None and graph.nodes[name].dim == 1:
                parts.append(name)
            else:
                parts.append(f"{name}[{comp + 1}]")
        return " ".join(parts)


class Graph:
    """Validated model graph.  Build with :func:`build_graph`."""

    def __init__(self, nodes, topo_order, inputs):
        self.nodes = nodes
        self.topo_order = tuple(topo_order)
        self._topo_index = {n: i for i, n in enumerate(self.topo_order)}
        self.children = {n: [] for n in nodes}
        for n in self.topo_order:
            for p in nodes[n].parents:
                self.children[p].append(n)
        self.children = {n: tuple(c) for n, c in self.children.items()}
        # inputs[n]: nodes whose values factor n actually reads
        self.inputs = inputs
        self.readers = {n: [] for n in nodes}
        for n in self.topo_order:
            for p in sorted(inputs[n], key=self._topo_index.__getitem__):
                self.readers[p].append(n)
        self.layout = {}
        offset = 0
        values = []
        for n in self.topo_order:
            node = nodes[n]
            self.layout[n] = (offset, node.dim)
            offset += node.dim
            values.extend(float(v) for v in node.value)
        self.size = offset
        self._initial = tuple(values)
        self._factor_code = {}

    # -- structure ------------------------------------------------------

    @property
    def free_nodes(self) -> tuple:
        return tuple(n for n in self.topo_order if self.nodes[n].free)

    @property
    def factor_nodes(self) -> tuple:
        return tuple(n for n in self.topo_order if self.nodes[n].has_factor)

    @property
    def n_free(self) -> int:
        return sum(self.nodes[n].dim for n in self.free_nodes)

    def topo_index(self, name: str) -> int:
        return self._topo_index[name]

    def free_components(self) -> list:
        return [(n, i) for n in self.free_nodes for i in range(self.nodes[n].dim)]

    def component_name(self, name: str, comp: int) -> str:
        return name if self.nodes[name].dim == 1 else f"{name}[{comp + 1}]"

    def component_names(self) -> list:
        return [self.component_name(n, i) for n, i in self.free_components()]

    def position(self, name: str, comp: int = 0) -> int:
        offset, dim = self.layout[name]
        if not 0 <= comp < dim:
            raise IndexError(f"component {comp + 1} out of range for {name!r} of dimension {dim}")
        return offset + comp

    def improper_nodes(self) -> list:
        """Free nodes whose only factor is an improper density."""
        return [n for n in self.free_nodes
                if self.nodes[n].density is not None and self.nodes[n].density.improper
                and not any(r != n for r in self.readers[n])]

    # -- state ----------------------------------------------------------

    def initial_state(self) -> list:
        return list(self._initial)

    def value(self, state, name):
        offset, dim = self.layout[name]
        if dim == 1:
            return float(state[offset])
        return np.array(state[offset:offset + dim], dtype=float)

    def env(self, state) -> dict:
        out = {}
        for n in self.topo_order:
            v = self.value(state, n)
            out[n] = v
            out[n + "_"] = v
        return out

    def free_vector(self, state) -> list:
        return [state[self.position(n, i)] for n, i in self.free_components()]

    # -- code generation ------------------------------------------------

    def _codegen(self, namespace) -> CodeGen:
        def resolve(name):
            base = name[:-1] if name.endswith("_") and name not in self.nodes else name
            if base not in self.nodes:
                raise UnknownParent(f"unknown name {name!r}")
            node = self.nodes[base]
            offset, dim = self.layout[base]
            if node.kind != STOCHASTIC:
                if dim == 1:
                    return literal(node.value[0]), False
                key = f"_k_{base}"
                namespace[key] = np.array(node.value, dtype=float)
                return key, True
            if dim == 1:
                return f"x[{offset}]", False
            return f"_array(x[{offset}:{offset + dim}])", True

        def element(name, i, e):
            base = name[:-1] if name.endswith("_") and name not in self.nodes else name
            node = self.nodes.get(base)
            if node is None or i != int(i):
                return None
            offset, dim = self.layout[base]
            k = int(i)
            if not 1 <= k <= dim:
                raise EvaluationError(f"index {k} out of range 1..{dim} for {base!r}", *(e.pos or (None, None)))
            if node.kind != STOCHASTIC:
                return literal(node.value[k - 1])
            return f"x[{offset + k - 1}]"

        return CodeGen(resolve, element)

    def factor_code(self, name: str, namespace: dict) -> str:
        """Source of an expression computing node ``name``'s log-factor from ``x``."""
        node = self.nodes[name]
        gen = self._codegen(namespace)
        dens = node.density
        if dens.expr is not None:
            code, vec = gen.gen(dens.expr)
            if vec:
                raise EvaluationError(f"density of {name!r} evaluates to a vector", *(node.pos or (None, None)))
            return code
        xcode, xvec = gen.resolve(name)
        params = [gen.gen(a) for a in dens.args]
        if xvec or any(v for _, v in params):
            return f"_dens({dens.builtin!r}, {xcode}, ({''.join(c + ', ' for c, _ in params)}))"
        return _inline_builtin(dens.builtin, xcode, [c for c, _ in params])

    def factor_parts(self, name: str, namespace: dict) -> list:
        """Additive pieces of :meth:`factor_code`, split where the density is inlined."""
        node = self.nodes[name]
        dens = node.density
        if dens.builtin == "dnorm":
            gen = self._codegen(namespace)
            xcode, xvec = gen.resolve(name)
            params = [gen.gen(a) for a in dens.args]
            if not xvec and not any(v for _, v in params):
                (m, _), (v, _) = params
                if _is_literal(v) and float(v) > 0:
                    var = float(v)
                    return [literal(-0.5 * math.log(2.0 * math.pi * var)),
                            f"-({xcode} - {m})**2 / {literal(2.0 * var)}"]
                return [f"-0.5*_log(_TWO_PI*{v})", f"-({xcode} - {m})**2 / (2.0*{v})"]
        return [self.factor_code(name, namespace)]

    def compile_block(self, block: Block) -> CompiledBlock:
        deps = block_dependents(self, block)
        namespace = {}
        terms = [f"({self.factor_code(n, namespace)})" for n in deps]
        body = [
            "try:",
            "    s = " + (" + ".join(terms) if terms else "0.0"),
            "except _DENSITY_ERRORS:",
            "    return _NINF",
            "return s if s == s else _NINF",
        ]
        fn = build_function("_block_logdensity", ["x"], body, namespace)
        indices = tuple(self.position(n, i) for n, i in block.members)
        pair = None
        if block.dim == 1 and self.nodes[block.members[0][0]].dim == 1:
            parts = [part for n in deps for part in self.factor_parts(n, namespace)]
            pair = _compile_pair(parts, indices[0], namespace)
        return CompiledBlock(block, indices, tuple(deps), fn, block.label(self), pair)

    def compile_expression(self, expr, density=False):
        """Compile an expression over node values into ``f(x)``."""
        namespace = {}
        code, vec = self._codegen(namespace).gen(expr)
        if density:
            body = ["try:", f"    v = {code}", "except _DENSITY_ERRORS:", "    return _NINF",
                    "return v if v == v else _NINF"]
        else:
            from .modelang.printer import pretty
            namespace["_expr_text"] = pretty(expr)
            body = ["try:", f"    return {code}", "except _VALUE_ERRORS as exc:",
                    "    raise _DomainError(f'{exc} in expression {_expr_text}') from None"]
        return build_function("_expression", ["x"], body, namespace)


def _compile_pair(parts, index, namespace):
    """``pair(x, y)`` compares the block log-density at ``x`` and with ``x[index] = y``.

    Both values are returned up to one common additive constant: pieces
    that do not read ``x[index]`` are dropped and repeated pieces are
    summed once and scaled.  Only valid when position ``index`` is
    referenced as ``x[index]`` and never through a slice.
    """
    pattern = re.compile(rf"\bx\[{index}\]")
    counts = {}
    for part in parts:
        if pattern.search(part):
            counts[part] = counts.get(part, 0) + 1
    terms = [f"({p})" if c == 1 else f"{c}.0*({p})" for p, c in counts.items()]
    total = " + ".join(terms) if terms else "0.0"
    moved = pattern.sub("y", total)
    body = [
        "try:",
        f"    a = {total}",
        "    a = a if a == a else _NINF",
        "except _DENSITY_ERRORS:",
        "    a = _NINF",
        "try:",
        f"    b = {moved}",
        "    b = b if b == b else _NINF",
        "except _DENSITY_ERRORS:",
        "    b = _NINF",
        "return a, b",
    ]
    return build_function("_block_pair", ["x", "y"], body, namespace)


def _is_literal(code: str) -> bool:
    try:
        float(code)
    except ValueError:
        return False
    return True


def _inline_builtin(name, xc, pc) -> str:
    if name == "dnorm":
        m, v = pc
        if _is_literal(v) and float(v) > 0:
            var = float(v)
            c0 = -0.5 * math.log(2.0 * math.pi * var)
            return f"{literal(c0)} - ({xc} - {m})**2 / {literal(2.0 * var)}"
        return f"-0.5*_log(_TWO_PI*{v}) - ({xc} - {m})**2 / (2.0*{v})"
    if name == "dexp":
        (r,) = pc
        return f"(_log({r}) - {r}*{xc}) if {xc} >= 0.0 else _NINF"
    if name == "duniform":
        return "0.0"
    return f"_d_{name}({', '.join([xc] + pc)})"


@dataclass(frozen=True)
class CompiledBlock:
    """A block with its flat state positions and generated log-density."""

    block: Block
    indices: tuple
    dependents: tuple
    logdensity: object = field(repr=False)
    label: str = ""
    pair: object = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return len(self.indices)


def _default_start(node: Node, const_env) -> list:
    dens = node.density
    if dens is None or dens.builtin is None:
        return [0.0] * node.dim
    if dens.builtin in dist.POSITIVE_SUPPORT:
        return [1.0] * node.dim
    if dens.builtin == "dbeta":
        return [0.5] * node.dim
    if dens.builtin == "dunif":
        try:
            a, b = (eval_expr(arg, const_env) for arg in dens.args)
            mid = 0.5 * (np.asarray(a) + np.asarray(b))
            return list(np.broadcast_to(mid, (node.dim,)).astype(float))
        except EvaluationError:
            pass
    return [0.0] * node.dim


def build_graph(decls) -> Graph:
    """Validate node declarations and return the graph.

    Custom density expressions may refer to other nodes by name (those
    become parents) and to the node itself as ``<name>_``.
    """
    nodes = {}
    order = []
    for node in decls:
        if node.name in nodes:
            raise DuplicateName(f"duplicate node {node.name!r}", *(node.pos or (None, None)))
        nodes[node.name] = node
        order.append(node.name)

    inputs = {}
    fixed = {}
    for name in order:
        node = nodes[name]
        where = node.pos or (None, None)
        for p in node.parents:
            if p not in nodes:
                raise UnknownParent(f"{name!r} has unknown parent {p!r}", *where)
        if node.kind == CONSTANT:
            inputs[name] = set()
            continue
        if node.density is None:
            if node.kind == STOCHASTIC:
                raise EvaluationError(f"node {name!r} has no density", *where)
            inputs[name] = set()
            continue
        dens = node.density
        if dens.builtin is not None:
            dist.check_arity(dens.builtin, len(dens.args), *where)
            refs = set().union(*(ast.names_in(a) for a in dens.args)) if dens.args else set()
            reads = {name}
        else:
            _check_functions(dens.expr, where)
            refs = ast.names_in(dens.expr)
            reads = set()
            if node.self_ref in refs and node.self_ref not in nodes:
                refs.discard(node.self_ref)
                reads.add(name)
            if name in refs:
                refs.discard(name)
                reads.add(name)
        for r in refs:
            if r not in nodes:
                raise UnknownParent(f"density of {name!r} refers to unknown name {r!r}", *where)
        reads |= refs
        extra = tuple(sorted(r for r in refs if r not in node.parents and r != name))
        if name in node.parents:
            raise CycleDetected([name, name])
        if extra:
            node = Node(node.name, node.kind, node.dim, node.parents + extra, node.density,
                        node.init_val, node.value, node.pos)
            nodes[name] = node
        inputs[name] = reads

    topo = _toposort(nodes, order)

    const_env = {}
    for name in topo:
        node = nodes[name]
        if node.kind == STOCHASTIC:
            init = node.init_val if node.init_val is not None else _default_start(node, const_env)
            init = tuple(float(v) for v in init)
            if len(init) != node.dim:
                raise BadArity(f"init_val of {name!r} has length {len(init)}, node dimension is {node.dim}",
                               *(node.pos or (None, None)))
            node = Node(node.name, node.kind, node.dim, node.parents, node.density, node.init_val, init, node.pos)
        else:
            if node.value is None or len(node.value) != node.dim:
                raise BadArity(f"value of {name!r} does not match its dimension {node.dim}",
                               *(node.pos or (None, None)))
            value = node.value[0] if node.dim == 1 else np.array(node.value, dtype=float)
            const_env[name] = value
        fixed[name] = node
    return Graph(fixed, topo, inputs)


def _check_functions(expr, where):
    stack = [expr]
    while stack:
        e = stack.pop()
        if isinstance(e, ast.Call):
            if not known_function(e.func):
                raise EvaluationError(f"unknown function {e.func!r}", *(e.pos or where))
            if e.func in dist.BUILTINS and len(e.args) != dist.ARITY[e.func] + 1:
                raise BadArity(f"{e.func} takes {dist.ARITY[e.func] + 1} argument(s), got {len(e.args)}",
                               *(e.pos or where))
            stack.extend(e.args)
        elif isinstance(e, ast.Unary):
            stack.append(e.operand)
        elif isinstance(e, ast.Binary):
            stack.extend((e.left, e.right))
        elif isinstance(e, ast.Cond):
            stack.extend((e.test, e.then, e.orelse))
        elif isinstance(e, ast.Vector):
            stack.extend(e.items)
        elif isinstance(e, ast.Index):
            stack.extend((e.target, e.index))


def _toposort(nodes, order):
    rank = {n: i for i, n in enumerate(order)}
    indeg = {n: 0 for n in order}
    kids = {n: [] for n in order}
    for n in order:
        for p in set(nodes[n].parents):
            indeg[n] += 1
            kids[p].append(n)
    heap = [(rank[n], n) for n in order if indeg[n] == 0]
    heapq.heapify(heap)
    topo = []
    while heap:
        _, n = heapq.heappop(heap)
        topo.append(n)
        for c in kids[n]:
            indeg[c] -= 1
            if indeg[c] == 0:
                heapq.heappush(heap, (rank[c], c))
    if len(topo) < len(order):
        raise CycleDetected(_find_cycle(nodes, [n for n in order if indeg[n] > 0]))
    return topo


def _find_cycle(nodes, remaining):
    remaining = set(remaining)
    for start in sorted(remaining):
        path = [start]
        seen = {start: 0}
        cur = start
        while True:
            nxt = next((p for p in nodes[cur].parents if p in remaining), None)
            if nxt is None:
                break
            if nxt in seen:
                cyc = path[seen[nxt]:] + [nxt]
                return list(reversed(cyc))
            seen[nxt] = len(path)
            path.append(nxt)
            cur = nxt
    return sorted(remaining)


def log_factor(graph: Graph, node: str, state=None) -> float:
    """Log conditional density of ``node`` given its parents (tree-walking evaluation)."""
    n = graph.nodes[node]
    if not n.has_factor:
        return 0.0
    if state is None:
        state = graph.initial_state()
    env = graph.env(state)
    dens = n.density
    if dens.expr is not None:
        v = eval_expr(dens.expr, env, density=True)
        if isinstance(v, np.ndarray):
            raise EvaluationError(f"density of {node!r} evaluates to a vector", *(n.pos or (None, None)))
        return v if v == v else NINF
    params = [eval_expr(a, env, density=True) for a in dens.args]
    if any(isinstance(p, float) and p == NINF for p in params):
        return NINF
    try:
        v = dist.builtin_logdensity(dens.builtin, graph.value(state, node), params)
    except InvalidParameter:
        return NINF
    return v if v == v else NINF


def joint_logdensity(graph: Graph, state=None) -> float:
    total = 0.0
    for n in graph.factor_nodes:
        total += log_factor(graph, n, state)
    return total


def block_dependents(graph: Graph, block: Block) -> list:
    """Factors whose value can change when the block's components change, in topological order."""
    out = set()
    for name in block.nodes:
        out.update(graph.readers[name])
    return sorted(out, key=graph.topo_index)


def block_logdensity(graph: Graph, block, values, state=None) -> float:
    """Sum of the block's dependent factors with ``values`` substituted.

    ``state`` is left unchanged on return.
    """
    compiled = block if isinstance(block, CompiledBlock) else graph.compile_block(block)
    if state is None:
        state = graph.initial_state()
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.shape[0] != compiled.dim:
        raise ValueError(f"expected {compiled.dim} values, got {values.shape[0]}")
    saved = [state[i] for i in compiled.indices]
    try:
        for i, v in zip(compiled.indices, values.tolist()):
            state[i] = v
        return compiled.logdensity(state)
    finally:
        for i, v in zip(compiled.indices, saved):
            state[i] = v


def parse_member(graph: Graph, spec: str) -> list:
    """Resolve ``"mu"`` (all components) or ``"x[2]"`` (1-based) to member pairs."""
    spec = spec.strip()
    if spec.endswith("]") and "[" in spec:
        name, _, idx = spec[:-1].partition("[")
        name = name.strip()
        try:
            comp = int(idx) - 1
        except ValueError:
            raise ValueError(f"bad block member {spec!r}") from None
        comps = [comp]
    else:
        name = spec
        comps = None
    node = graph.nodes.get(name)
    if node is None:
        raise UnknownParent(f"block refers to unknown node {name!r}")
    if not node.free:
        raise ValueError(f"block member {spec!r} is not a free variable")
    if comps is None:
        comps = list(range(node.dim))
    for c in comps:
        if not 0 <= c < node.dim:
            raise ValueError(f"component {c + 1} out of range for {name!r}")
    return [(name, c) for c in comps]


def default_blocks(graph: Graph, groups=()) -> list:
    """One block per free node, except components claimed by explicit ``groups``.

    Blocks are ordered by the topological position of their first member.
    """
    claimed = {}
    blocks = []
    for group in groups:
        members = []
        for spec in group:
            for m in parse_member(graph, spec) if isinstance(spec, str) else [tuple(spec)]:
                if m in claimed or m in members:
                    raise ValueError(f"component {graph.component_name(*m)} appears in two blocks")
                members.append(m)
        for m in members:
            claimed[m] = True
        blocks.append(Block(tuple(members)))
    for name in graph.free_nodes:
        rest = tuple((name, i) for i in range(graph.nodes[name].dim) if (name, i) not in claimed)
        if rest:
            blocks.append(Block(rest))

    def key(b):
        return min(graph.topo_index(n) * 1_000_000 + c for n, c in b.members)

    return sorted(blocks, key=key)
