"""Metropolis-within-Gibbs driver with adaptive proposals.

Each sweep visits the blocks in a fixed order.  For every block one
random-walk proposal ``Y = X + theta * L @ W`` is made, optionally followed
by a second, down-scaled delayed-rejection try, and then the block's
adaptation state is updated.  Only the first-stage acceptance probability
feeds the scaling rules.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from . import adapt as ad
from .errors import ConfigError, DagmcError, EvaluationError
from .linalg import tri_matvec, tri_solve
from .model import CompiledBlock, Graph, log_factor
from .proposals import ProposalKind, RngState, log_density_standard, sample_standard

__all__ = [
    "RunConfig",
    "ChainState",
    "StepOutcome",
    "FunctionalAccumulator",
    "BlockReport",
    "RunReport",
    "StartupError",
    "rwm_step",
    "dr_step",
    "dr_log_alpha2",
    "sweep",
    "run",
    "trace_columns",
]

NINF = -math.inf


class StartupError(DagmcError):
    pass


@dataclass
class RunConfig:
    niter: int
    nburn: int = 0
    algorithm: ad.AlgorithmChoice = field(default_factory=ad.AlgorithmChoice)
    strategy: str = "greedy"
    proposal: ProposalKind = field(default_factory=ProposalKind)
    dr_scale: Optional[float] = None
    mix: ad.MixSchedule = field(default_factory=ad.MixSchedule)
    thin: int = 1
    seed: int = 0
    eta: ad.WeightSchedule = field(default_factory=ad.WeightSchedule)
    scaling_eta: Optional[ad.WeightSchedule] = None
    theta0: Optional[float] = None
    counting: str = "block"
    outfile: Optional[str] = None

    def __post_init__(self):
        if self.niter < 1:
            raise ConfigError("niter must be a positive integer")
        if not 0 <= self.nburn < self.niter:
            raise ConfigError("nburn must satisfy 0 <= nburn < niter")
        if self.dr_scale is not None and not 0.0 < self.dr_scale < 1.0:
            raise ConfigError("delayed-rejection scale must lie in (0, 1)")
        if self.thin < 1:
            raise ConfigError("thin must be a positive integer")
        if self.counting not in ("block", "global"):
            raise ConfigError("counting must be 'block' or 'global'")
        if self.theta0 is not None and not self.theta0 > 0:
            raise ConfigError("theta0 must be positive")
        self.burnin = ad.BurninStrategy(self.strategy, self.nburn)

    @property
    def total_sweeps(self) -> int:
        return self.nburn + self.niter


@dataclass
class ChainState:
    x: list
    iter: int = 0
    rng: RngState = field(default_factory=RngState)


class StepOutcome(NamedTuple):
    accepted: bool
    alpha1: float
    stage: str  # "first", "delayed" or "none"
    alpha2: Optional[float] = None
    x: object = None  # block value before the step
    y: object = None  # first-stage proposal
    lp_x: float = NINF
    lp_y: float = NINF


def _proposal_params(adapt: ad.AdaptState, use_initial: bool):
    if use_initial:
        return adapt.theta0, adapt.shape0
    return adapt.theta, adapt.shape


def _accept_prob(lp_x, lp_y):
    if lp_y >= lp_x:
        return 1.0
    if lp_y == NINF:
        return 0.0
    return math.exp(lp_y - lp_x)


def rwm_step(chain: ChainState, block: CompiledBlock, adapt: ad.AdaptState,
             use_initial: bool = False, proposal: ProposalKind = ProposalKind()) -> StepOutcome:
    """One random-walk Metropolis step for ``block``; ``chain.x`` is updated on acceptance."""
    theta, L = _proposal_params(adapt, use_initial)
    x = chain.x
    f = block.logdensity
    if block.dim == 1:
        i = block.indices[0]
        xi = x[i]
        lp_x = f(x)
        yi = xi + theta * float(L[0, 0]) * proposal.draw_scalar(chain.rng)
        x[i] = yi
        lp_y = f(x)
        alpha = _accept_prob(lp_x, lp_y)
        if alpha >= 1.0 or (alpha > 0.0 and chain.rng.uniform() < alpha):
            return StepOutcome(True, alpha, "first", None, xi, yi, lp_x, lp_y)
        x[i] = xi
        return StepOutcome(False, alpha, "none", None, xi, yi, lp_x, lp_y)

    idx = block.indices
    xv = np.array([x[i] for i in idx])
    lp_x = f(x)
    w = sample_standard(proposal, block.dim, chain.rng)
    yv = xv + theta * tri_matvec(L, w)
    for i, v in zip(idx, yv.tolist()):
        x[i] = v
    lp_y = f(x)
    alpha = _accept_prob(lp_x, lp_y)
    if alpha >= 1.0 or (alpha > 0.0 and chain.rng.uniform() < alpha):
        return StepOutcome(True, alpha, "first", None, xv, yv, lp_x, lp_y)
    for i, v in zip(idx, xv.tolist()):
        x[i] = v
    return StepOutcome(False, alpha, "none", None, xv, yv, lp_x, lp_y)


def _log1m_alpha(lp_from, lp_to):
    """``log(1 - min(1, exp(lp_to - lp_from)))``."""
    if lp_to >= lp_from:
        return NINF
    if lp_to == NINF:
        return 0.0
    return math.log(-math.expm1(lp_to - lp_from))


def dr_log_alpha2(lp_x, lp_y1, lp_y2, logq_y2_y1, logq_x_y1) -> float:
    """Log acceptance probability of the second delayed-rejection stage.

    ``logq_a_b`` is the first-stage proposal log-density of moving from
    ``a`` to ``b``; normalizing constants may be dropped as they cancel.
    """
    if lp_y2 == NINF or logq_y2_y1 == NINF:
        return NINF
    num_reject = _log1m_alpha(lp_y2, lp_y1)
    if num_reject == NINF:
        return NINF
    den_reject = _log1m_alpha(lp_x, lp_y1)
    log_ratio = (lp_y2 + logq_y2_y1 + num_reject) - (lp_x + logq_x_y1 + den_reject)
    return min(0.0, log_ratio)


def dr_step(chain: ChainState, block: CompiledBlock, adapt: ad.AdaptState, gamma: float,
            first: StepOutcome, use_initial: bool = False,
            proposal: ProposalKind = ProposalKind()) -> StepOutcome:
    """Second delayed-rejection stage after the rejected first stage ``first``.

    The second proposal is ``X + gamma * theta * L @ W2`` with the same
    proposal family and parameters as the first stage.
    """
    theta, L = _proposal_params(adapt, use_initial)
    x = chain.x
    f = block.logdensity
    rng = chain.rng
    if block.dim == 1:
        i = block.indices[0]
        xi = first.x
        scale = theta * float(L[0, 0])
        y2 = xi + gamma * scale * proposal.draw_scalar(rng)
        x[i] = y2
        lp_y2 = f(x)
        if lp_y2 == NINF:
            log_a2 = NINF
        else:
            y1 = first.y
            log_a2 = dr_log_alpha2(first.lp_x, first.lp_y, lp_y2,
                                   proposal.log_density_scalar((y1 - y2) / scale),
                                   proposal.log_density_scalar((y1 - xi) / scale))
        a2 = math.exp(log_a2)
        if a2 > 0.0 and (a2 >= 1.0 or rng.uniform() < a2):
            return first._replace(accepted=True, stage="delayed", alpha2=a2)
        x[i] = xi
        return first._replace(alpha2=a2)

    idx = block.indices
    xv = first.x
    w2 = sample_standard(proposal, block.dim, rng)
    y2 = xv + gamma * theta * tri_matvec(L, w2)
    for i, v in zip(idx, y2.tolist()):
        x[i] = v
    lp_y2 = f(x)
    if lp_y2 == NINF:
        log_a2 = NINF
    else:
        d = block.dim
        y1 = first.y
        log_a2 = dr_log_alpha2(first.lp_x, first.lp_y, lp_y2,
                               log_density_standard(proposal, d, tri_solve(L, y1 - y2) / theta),
                               log_density_standard(proposal, d, tri_solve(L, y1 - xv) / theta))
    a2 = math.exp(log_a2)
    if a2 > 0.0 and (a2 >= 1.0 or rng.uniform() < a2):
        return first._replace(accepted=True, stage="delayed", alpha2=a2)
    for i, v in zip(idx, xv.tolist()):
        x[i] = v
    return first._replace(alpha2=a2)


def _target_alpha(cfg: RunConfig, dim: int) -> float:
    t = cfg.algorithm.target_alpha
    return ad.default_target_alpha(dim) if t is None else t


def _adapt(state: ad.AdaptState, block: CompiledBlock, out: StepOutcome, cfg: RunConfig,
           chain: ChainState, it: int) -> ad.AdaptState:
    alg = cfg.algorithm
    n = state.step + 1 if cfg.counting == "block" else it
    cov = alg.covariance_adapt
    if cov != "none":
        eta_n = ad.eta(cfg.eta, n)
        if cov == "am":
            new = [chain.x[i] for i in block.indices]
            state = ad.am_update(state, new, eta_n)
        else:
            state = ad.rb_am_update(state, out.x, out.y, out.alpha1, eta_n)
    sc = alg.scaling_adapt
    if sc == "ascm":
        eta_n = ad.eta(cfg.scaling_eta or cfg.eta, n)
        state.theta = ad.ascm_update(state.theta, out.alpha1, eta_n, _target_alpha(cfg, block.dim))
    elif sc == "amcmc_rule":
        state.theta = ad.amcmc_scaling(state.theta, out.alpha1, n)
    elif sc == "user_rule":
        theta = float(alg.user_rule(state.theta, out.alpha1, block.dim, n))
        if not (theta > 0.0 and math.isfinite(theta)):
            raise EvaluationError(f"scaling rule returned {theta!r} for block ( {block.label} ) at step {n}")
        state.theta = theta
    state.step += 1
    return state


def _fast_path(cfg: RunConfig) -> bool:
    """Scalar blocks without delayed rejection or covariance adaptation take an inlined step."""
    return cfg.dr_scale is None and cfg.algorithm.covariance_adapt == "none"


def sweep(chain: ChainState, blocks, states, cfg: RunConfig) -> list:
    """Update every block once, in order.  ``states`` is updated in place.

    Returns the stage of each block's step: ``"first"`` or ``"delayed"``
    on acceptance, ``"none"`` on rejection.
    """
    chain.iter += 1
    it = chain.iter
    update_params, use_initial = ad.adaptation_active(cfg.burnin, it)
    update_params = update_params and cfg.algorithm.adaptive
    p_mix = ad.mix_probability(cfg.mix, it)
    rng = chain.rng
    proposal = cfg.proposal
    gamma = cfg.dr_scale
    fast = _fast_path(cfg)
    ascm = cfg.algorithm.scaling_adapt == "ascm"
    if ascm:
        weights = cfg.scaling_eta or cfg.eta
        reciprocal = weights.kind == "reciprocal" and cfg.counting == "block"
        by_block = cfg.counting == "block"
        target = _target_alpha(cfg, 1)
        if not by_block:
            eta_it = ad.eta(weights, it)
    gaussian = proposal.family == "gaussian"
    normals = rng.normals
    uniforms = rng.uniforms
    draw = proposal.draw_scalar
    x = chain.x
    stages = []
    for k, block in enumerate(blocks):
        state = states[k]
        initial = use_initial or (p_mix > 0.0 and (p_mix >= 1.0 or rng.uniform() < p_mix))
        pair = block.pair
        if fast and pair is not None:
            # same arithmetic and draw order as rwm_step + _adapt
            i = block.indices[0]
            xi = x[i]
            if initial:
                scale = state.theta0 * state.shape0.item(0)
            else:
                scale = state.theta * state.shape.item(0)
            yi = xi + scale * (next(normals) if gaussian else draw(rng))
            lp_x, lp_y = pair(x, yi)
            if lp_y >= lp_x:
                alpha = 1.0
            elif lp_y == NINF:
                alpha = 0.0
            else:
                alpha = math.exp(lp_y - lp_x)
            if alpha >= 1.0 or (alpha > 0.0 and next(uniforms) < alpha):
                x[i] = yi
                stages.append("first")
            else:
                stages.append("none")
            if update_params:
                if ascm:
                    # ad.eta and ad.ascm_update, inlined
                    step = state.step
                    if reciprocal:
                        eta_n = 1.0 / (step + 2)
                    else:
                        eta_n = ad.eta(weights, step + 1) if by_block else eta_it
                    state.theta = state.theta * (1.0 + eta_n * (alpha / target - 1.0))
                    state.step = step + 1
                else:
                    out = StepOutcome(x[i] == yi, alpha, "", None, xi, yi, lp_x, lp_y)
                    states[k] = _adapt(state, block, out, cfg, chain, it)
            continue
        out = rwm_step(chain, block, state, initial, proposal)
        if gamma is not None and not out.accepted:
            out = dr_step(chain, block, state, gamma, out, initial, proposal)
        if update_params:
            states[k] = _adapt(state, block, out, cfg, chain, it)
        stages.append(out.stage)
    return stages


class FunctionalAccumulator:
    """Running mean of a user functional over post-burn-in sweeps."""

    def __init__(self, fn, names=None):
        self.fn = fn
        self.names = names
        self.running_sum = None
        self.count = 0

    @classmethod
    def from_expr(cls, graph: Graph, expr):
        from .modelang import ast
        names = None
        if isinstance(expr, ast.Vector):
            from .modelang.printer import pretty
            names = [pretty(e) for e in expr.items]
        return cls(graph.compile_expression(expr), names)

    def evaluate(self, x) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.fn(x), dtype=float))

    def add(self, value):
        if self.running_sum is None:
            self.running_sum = np.zeros_like(value)
        self.running_sum += value
        self.count += 1

    def estimate(self):
        if self.count == 0:
            return None
        return self.running_sum / self.count


@dataclass
class BlockReport:
    label: str
    steps: int
    accepted_first: int
    accepted_delayed: int
    theta: float
    shape: np.ndarray

    @property
    def first_stage(self) -> float:
        return self.accepted_first / self.steps if self.steps else 0.0

    @property
    def delayed(self) -> float:
        return self.accepted_delayed / self.steps if self.steps else 0.0

    @property
    def acceptance(self) -> float:
        return self.first_stage + self.delayed


@dataclass
class RunReport:
    functional_average: Optional[list]
    blocks: list
    delayed_rejection: bool
    sweeps: int
    elapsed: float
    warnings: list = field(default_factory=list)
    final_state: list = field(default_factory=list, repr=False)
    states: list = field(default_factory=list, repr=False)

    def block(self, label: str) -> BlockReport:
        for b in self.blocks:
            if b.label == label:
                return b
        raise KeyError(label)


def trace_columns(graph: Graph, functional: FunctionalAccumulator | None = None) -> list:
    cols = graph.component_names()
    if functional is not None:
        probe = functional.evaluate(graph.initial_state())
        cols += [f"functional[{i + 1}]" for i in range(probe.shape[0])]
    return cols


def _check_start(graph: Graph, state):
    bad = [n for n in graph.factor_nodes if log_factor(graph, n, state) == NINF]
    if bad:
        raise StartupError("initial state has zero density; factors at -inf: " + ", ".join(bad))


def run(graph: Graph, blocks, cfg: RunConfig, functional: FunctionalAccumulator | None = None,
        sinks=(), initial_states=None) -> RunReport:
    """Run ``cfg.nburn + cfg.niter`` sweeps and summarize the post-burn-in part."""
    start = time.perf_counter()
    compiled = [b if isinstance(b, CompiledBlock) else graph.compile_block(b) for b in blocks]
    chain = ChainState(graph.initial_state(), 0, RngState(cfg.seed))
    _check_start(graph, chain.x)
    if initial_states is not None:
        states = list(initial_states)
    else:
        states = [ad.AdaptState.initial([chain.x[i] for i in cb.indices], cfg.theta0) for cb in compiled]

    nb = len(compiled)
    steps = [0] * nb
    first = [0] * nb
    delayed = [0] * nb
    positions = [graph.position(n, i) for n, i in graph.free_components()]
    sinks = list(sinks)
    nburn = cfg.nburn

    for _ in range(cfg.total_sweeps):
        stages = sweep(chain, compiled, states, cfg)
        if chain.iter <= nburn:
            continue
        for k, stage in enumerate(stages):
            steps[k] += 1
            if stage == "first":
                first[k] += 1
            elif stage == "delayed":
                delayed[k] += 1
        x = chain.x
        fval = None
        if functional is not None:
            fval = functional.evaluate(x)
            functional.add(fval)
        if sinks:
            row = [x[p] for p in positions]
            if fval is not None:
                row += fval.tolist()
            for s in sinks:
                s.write(row)

    reports = [BlockReport(cb.label, steps[k], first[k], delayed[k], states[k].theta, states[k].shape)
               for k, cb in enumerate(compiled)]
    warnings = [f"free node {n!r} has only an improper factor" for n in graph.improper_nodes()]
    est = functional.estimate() if functional is not None else None
    return RunReport(
        functional_average=None if est is None else est.tolist(),
        blocks=reports,
        delayed_rejection=cfg.dr_scale is not None,
        sweeps=chain.iter,
        elapsed=time.perf_counter() - start,
        warnings=warnings,
        final_state=list(chain.x),
        states=states,
    )
