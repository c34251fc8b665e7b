"""Turn a parsed model file into a graph, update blocks and a run configuration."""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import adapt as ad
from .distributions import BUILTINS
from .errors import ConfigError, DataLengthMismatch, DagmcError, EvaluationError, UnknownDensity
from .io import read_csv
from .model import CONSTANT, OBSERVED, STOCHASTIC, DensityRef, Graph, Node, build_graph, default_blocks
from .modelang import ast
from .modelang.codegen import compile_expr
from .modelang.evaluate import eval_expr
from .modelang.transform import apply_replications
from .proposals import ProposalKind
from .sampler import FunctionalAccumulator, RunConfig

__all__ = ["Prepared", "evaluate_consts", "load_data", "graph_from_model", "run_config", "prepare"]

DEFAULT_ALGORITHM = "am"
DEFAULT_DOF = 6.0


@dataclass
class Prepared:
    graph: Graph
    blocks: list
    config: RunConfig
    functional: Optional[FunctionalAccumulator]
    consts: dict


def _where(pos):
    return pos if pos else (None, None)


def evaluate_consts(mf: ast.ModelFile) -> dict:
    """Evaluate ``const`` entries in order; each may use the earlier ones."""
    env = {}
    for name, expr in mf.consts.items():
        v = eval_expr(expr, env)
        env[name] = np.asarray(v, dtype=float) if isinstance(v, np.ndarray) else float(v)
    return env


def load_data(mf: ast.ModelFile) -> dict:
    """Read every ``data`` binding; paths are relative to the declaring file."""
    out = {}
    cache = {}
    for name, b in mf.data_bindings.items():
        path = b.path
        if not os.path.isabs(path) and b.base_dir:
            path = os.path.join(b.base_dir, path)
        if path not in cache:
            if not os.path.exists(path):
                raise FileNotFoundError(path)
            cache[path] = read_csv(path)
        table = cache[path]
        try:
            out[name] = np.asarray(table.column(b.column), dtype=float)
        except (KeyError, IndexError) as exc:
            raise DataLengthMismatch(f"{path}: {exc.args[0]}", *_where(b.pos)) from None
    return out


def _as_tuple(v) -> tuple:
    return tuple(float(a) for a in np.atleast_1d(np.asarray(v, dtype=float)))


def graph_from_model(mf: ast.ModelFile, consts=None, data=None) -> Graph:
    consts = evaluate_consts(mf) if consts is None else consts
    data = load_data(mf) if data is None else data
    for name in data:
        if name not in mf.nodes:
            b = mf.data_bindings.get(name)
            raise DataLengthMismatch(f"data bound to unknown node {name!r}", *_where(b.pos if b else None))
    decls, data = apply_replications(mf, data)
    nodes = [Node(k, CONSTANT, len(_as_tuple(v)), value=_as_tuple(v)) for k, v in consts.items()]
    for d in decls:
        where = _where(d.pos)
        parents = tuple(d.parents or ())
        density = None
        if isinstance(d.density, ast.Str):
            if d.density.value not in BUILTINS:
                raise UnknownDensity(f"unknown density {d.density.value!r}", *where)
            density = DensityRef.named(d.density.value, parents)
        elif d.density is not None:
            density = DensityRef.custom(d.density)
        init = None
        if d.init_val is not None:
            try:
                init = _as_tuple(eval_expr(d.init_val, consts))
            except EvaluationError as exc:
                raise EvaluationError(f"init_val of {d.name!r}: {exc}", *where) from None
        if d.name in data:
            value = _as_tuple(data[d.name])
            if d.dim is not None and d.dim != len(value):
                raise DataLengthMismatch(
                    f"node {d.name!r} has dimension {d.dim} but {len(value)} data values", *where)
            nodes.append(Node(d.name, OBSERVED, len(value), parents, density, None, value, d.pos))
            continue
        dim = d.dim if d.dim is not None else (len(init) if init is not None else 1)
        if init is not None and len(init) == 1 and dim > 1:
            init = init * dim
        nodes.append(Node(d.name, STOCHASTIC, dim, parents, density, init, None, d.pos))
    return build_graph(nodes)


def _param_value(params, key, consts, default=None):
    expr = params.get(key)
    if expr is None:
        return default
    if isinstance(expr, ast.Str):
        return expr.value
    try:
        v = eval_expr(expr, consts)
    except EvaluationError as exc:
        raise ConfigError(f"parameter {key}: {exc}") from None
    if isinstance(v, np.ndarray):
        raise ConfigError(f"parameter {key} must be a scalar")
    return float(v)


def _int_param(params, key, consts, default=None):
    v = _param_value(params, key, consts, default)
    if v is None:
        return None
    if isinstance(v, str) or not float(v).is_integer():
        raise ConfigError(f"parameter {key} must be an integer, got {v!r}")
    return int(v)


def _num_param(params, key, consts, default=None):
    v = _param_value(params, key, consts, default)
    if isinstance(v, str):
        raise ConfigError(f"parameter {key} must be a number, got {v!r}")
    return v


def _str_param(params, key, consts, default=None):
    v = _param_value(params, key, consts, default)
    if v is not None and not isinstance(v, str):
        raise ConfigError(f"parameter {key} must be a string")
    return v


def _weight_schedule(params, key, consts, default):
    kind = _param_value(params, key, consts)
    gamma = _num_param(params, key + "_gamma", consts)
    try:
        if kind is None:
            if gamma is None:
                return default
            return ad.WeightSchedule("power", gamma=gamma)
        if isinstance(kind, float):
            return ad.WeightSchedule("constant", eta0=kind)
        if kind == "power":
            return ad.WeightSchedule("power", gamma=0.6 if gamma is None else gamma)
        return ad.WeightSchedule(kind)
    except ValueError as exc:
        raise ConfigError(f"parameter {key}: {exc}") from None


def _mix_schedule(params, consts):
    expr = params.get("mix")
    if expr is None:
        return ad.MixSchedule()
    free = ast.names_in(expr) - set(consts)
    if not free:
        p = _num_param(params, "mix", consts)
        if not 0.0 <= p <= 1.0:
            raise ConfigError(f"mixing probability {p} outside [0, 1]")
        return ad.MixSchedule("constant", p)
    if free != {"n"}:
        raise ConfigError(f"mix expression may only use n and constants, found {sorted(free - {'n'})}")
    return ad.MixSchedule("user_sequence", sequence=compile_expr(expr, ["n"], consts))


RULE_ARGS = ["sc", "alpha", "dim", "k"]
SCALING_NAMES = {"none": "none", "ascm": "ascm", "amcmc": "amcmc_rule", "amcmc_rule": "amcmc_rule"}


def _algorithm(params, consts):
    name = _str_param(params, "algorithm", consts, DEFAULT_ALGORITHM)
    target = _num_param(params, "target_alpha", consts)
    try:
        alg = ad.AlgorithmChoice.from_name(name, target_alpha=target)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rule = params.get("scaling_adapt")
    if rule is None:
        return alg
    if isinstance(rule, ast.Str):
        kind = SCALING_NAMES.get(rule.value)
        if kind is None:
            raise ConfigError(f"unknown scaling_adapt {rule.value!r}")
        return ad.AlgorithmChoice(alg.covariance_adapt, kind, target)
    free = ast.names_in(rule) - set(consts) - set(RULE_ARGS)
    if free:
        raise ConfigError(f"scaling rule uses unknown names {sorted(free)}; allowed: {RULE_ARGS}")
    fn = compile_expr(rule, RULE_ARGS, consts)
    return ad.AlgorithmChoice(alg.covariance_adapt, "user_rule", target, fn)


def run_config(params: dict, consts=None, **overrides) -> RunConfig:
    """Map ``para`` entries to a :class:`RunConfig`; keyword overrides win."""
    consts = consts or {}
    try:
        family = _str_param(params, "proposal", consts, "gaussian")
        dof = _num_param(params, "dof", consts, DEFAULT_DOF)
        proposal = ProposalKind(family, dof)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    niter = _int_param(params, "niter", consts)
    if niter is None:
        raise ConfigError("parameter niter is required")
    kw = dict(
        niter=niter,
        nburn=_int_param(params, "nburn", consts, 0),
        algorithm=_algorithm(params, consts),
        strategy=_str_param(params, "strategy", consts, "greedy"),
        proposal=proposal,
        dr_scale=_num_param(params, "dr", consts),
        mix=_mix_schedule(params, consts),
        thin=_int_param(params, "thin", consts, 1),
        seed=_int_param(params, "seed", consts, 0),
        eta=_weight_schedule(params, "eta", consts, ad.WeightSchedule()),
        scaling_eta=_weight_schedule(params, "scaling_eta", consts, None),
        theta0=_num_param(params, "theta0", consts),
        counting=_str_param(params, "counting", consts, "block"),
        outfile=_str_param(params, "outfile", consts),
    )
    kw.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return RunConfig(**kw)
    except (ValueError, ConfigError) as exc:
        raise ConfigError(str(exc)) from None


def prepare(mf: ast.ModelFile, **overrides) -> Prepared:
    """Build everything a run needs from a (merged) model file."""
    consts = evaluate_consts(mf)
    graph = graph_from_model(mf, consts)
    if graph.n_free == 0:
        raise DagmcError("model has no free variables")
    try:
        blocks = default_blocks(graph, mf.blocks)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    cfg = run_config(mf.params, consts, **overrides)
    functional = FunctionalAccumulator.from_expr(graph, mf.functional) if mf.functional is not None else None
    return Prepared(graph, blocks, cfg, functional, consts)
