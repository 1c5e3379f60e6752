"""Alternating maximization of total user freshness under per-node budgets.

Holding every other node fixed, one node's subproblem is

    maximize  sum_i sigma_i * x_i / (x_i + lam_i)   s.t.  sum_i x_i <= B,  x >= 0

which is concave and solved exactly by a threshold (water-filling style)
rule: ``x_i = (sqrt(sigma_i * lam_i / beta) - lam_i)^+``.  Cycling these
exact block solves never decreases the objective and stops at a KKT point.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .model import (
    MULTIUSER,
    IterationRecord,
    Node,
    RateAllocation,
    SolveTrace,
    SourceProfile,
    Topology,
    check,
    total_objective,
)

log = logging.getLogger(__name__)

BASELINES = ("lambda-proportional", "lambda-inverse")


@dataclass(frozen=True)
class InnerProblem:
    sigmas: np.ndarray
    lambdas: np.ndarray
    budget: float

    def __post_init__(self):
        sigmas = np.asarray(self.sigmas, dtype=float)
        lambdas = np.asarray(self.lambdas, dtype=float)
        if sigmas.shape != lambdas.shape:
            raise ValueError("sigmas and lambdas must have equal length")
        if np.any(sigmas < 0) or np.any(lambdas <= 0) or not self.budget > 0:
            raise ValueError("need sigma >= 0, lambda > 0 and budget > 0")
        object.__setattr__(self, "sigmas", sigmas)
        object.__setattr__(self, "lambdas", lambdas)
        object.__setattr__(self, "budget", float(self.budget))

    @property
    def phis(self) -> np.ndarray:
        return self.sigmas / self.lambdas

    def value(self, rates) -> float:
        rates = np.asarray(rates, dtype=float)
        return float(np.sum(self.sigmas * rates / (rates + self.lambdas)))


@dataclass(frozen=True)
class InnerSolution:
    rates: np.ndarray
    beta: float  # budget multiplier; 0 when the support is empty
    rounds: int
    degenerate: bool = False

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.rates > 0))


@dataclass(frozen=True)
class OptimizerSettings:
    max_outer_iterations: int = 10000
    objective_tolerance: float = 1e-10
    kkt_tolerance: float = 1e-8
    init: str = "uniform"  # or "given"

    def __post_init__(self):
        if self.max_outer_iterations < 1:
            raise ValueError("max_outer_iterations must be >= 1")
        if not (self.objective_tolerance > 0 and self.kkt_tolerance > 0):
            raise ValueError("tolerances must be positive")
        if self.init not in ("uniform", "given"):
            raise ValueError(f"unknown init policy {self.init!r}")


def threshold_inner_solve(problem: InnerProblem) -> InnerSolution:
    """Exact maximizer of one node's concave subproblem.

    Starts from every file with positive sigma, solves the budget equation
    for ``sqrt(beta)`` in closed form, drops every file whose ``phi_i`` does
    not exceed ``beta`` and repeats.  Since the support is an upper set in
    phi order, dropping all violators at once lands on the same support as
    dropping them one by one.
    """
    sig, lam, budget = problem.sigmas, problem.lambdas, problem.budget
    active = sig > 0
    rates = np.zeros_like(lam)
    if not active.any():
        return InnerSolution(rates, 0.0, 0, degenerate=True)

    root = np.sqrt(sig * lam)
    phis = problem.phis
    rounds = 0
    while True:
        rounds += 1
        sqrt_beta = root[active].sum() / (budget + lam[active].sum())
        beta = sqrt_beta * sqrt_beta
        keep = active & (phis > beta)
        if keep.sum() == active.sum():
            break
        active = keep
    rates[active] = np.maximum(root[active] / sqrt_beta - lam[active], 0.0)
    return InnerSolution(rates, beta, rounds)


def _hop_factors(profile: SourceProfile, alloc: RateAllocation):
    lam = profile.lambdas
    cache = alloc.cache_rates * profile.cache_success
    user = alloc.user_rates * profile.user_success
    return cache / (cache + lam), user / (user + lam)


def build_sigma(topo: Topology, profile: SourceProfile, alloc: RateAllocation, node: Node) -> InnerProblem:
    """Coefficients of ``node``'s subproblem with every other node held fixed.

    A cache sees the product of the other caches' hop factors times the
    SUM of the users' hop factors (a single term unless the cache is shared
    by several users); a user sees the product of all cache hop factors.
    Lossy links enter through an effective source rate ``lam / success``.
    """
    if node not in topo.nodes:
        raise ValueError(f"unknown node {node!r} for topology with m={topo.m}, d={topo.d}")
    cache_f, user_f = _hop_factors(profile, alloc)
    if node.kind == "cache":
        others = np.delete(cache_f, node.index, axis=0)
        sigma = np.prod(others, axis=0) * user_f.sum(axis=0)
        success = profile.cache_success
    else:
        sigma = np.prod(cache_f, axis=0)
        success = profile.user_success
    # p*c / (p*c + lam) == c / (c + lam / p)
    return InnerProblem(sigma * profile.weights, profile.lambdas / success, topo.budget(node))


def _block_order(topo: Topology) -> list[Node]:
    caches = [Node("cache", r) for r in range(topo.m)]
    users = [Node("user", k) for k in range(topo.d)]
    # the star is seeded from a uniform cache, so its users move first
    return users + caches if topo.kind == MULTIUSER else caches + users


def _enforce_pairing(topo: Topology, alloc: RateAllocation) -> RateAllocation:
    """Zero a file everywhere once it can no longer reach any user fresh."""
    cache, user = np.array(alloc.cache_rates), np.array(alloc.user_rates)
    dead = np.any(cache == 0, axis=0) | np.all(user == 0, axis=0)
    if not dead.any():
        return alloc
    cache[:, dead] = 0.0
    user[:, dead] = 0.0
    return RateAllocation(cache, user)


def _supports(alloc: RateAllocation) -> tuple[tuple[int, ...], ...]:
    return tuple(tuple(int(i) for i in np.flatnonzero(row > 0)) for row in alloc.matrix())


def kkt_residuals(topo: Topology, profile: SourceProfile, alloc: RateAllocation) -> np.ndarray:
    """Stationarity gap per node (caches first, then users).

    With ``g_i`` the partial derivative of the weighted objective in the
    node's rate for file ``i``, the gap is the spread of ``g`` over the
    node's support around its mean (the implied multiplier) plus how far
    any zero-rate file's ``g`` rises above that multiplier.
    """
    out = []
    for node in topo.nodes:
        prob = build_sigma(topo, profile, alloc, node)
        x = alloc.rates(node)
        grad = prob.sigmas * prob.lambdas / (x + prob.lambdas) ** 2
        support = x > 0
        if support.any():
            mult = grad[support].mean()
            spread = float(np.max(np.abs(grad[support] - mult)))
        else:
            mult, spread = 0.0, 0.0
        excess = float(np.max(grad[~support] - mult, initial=0.0))
        out.append(spread + max(excess, 0.0))
    return np.array(out)


def alternating_maximize(topo: Topology, profile: SourceProfile,
                         settings: OptimizerSettings | None = None,
                         init: RateAllocation | None = None) -> tuple[RateAllocation, SolveTrace]:
    """Cycle exact block solves over all nodes until the objective settles.

    Convergence needs both an objective change below
    ``settings.objective_tolerance`` over one full cycle and the worst KKT
    gap below ``settings.kkt_tolerance``.  If the iteration cap is hit the
    best allocation seen is returned with ``trace.converged`` False.
    """
    settings = settings or OptimizerSettings()
    if init is None:
        if settings.init == "given":
            raise ValueError("init policy 'given' needs an initial allocation")
        init = RateAllocation.uniform(topo)
    check(profile, topo, init)

    alloc = init
    trace = SolveTrace()
    prev = total_objective(profile, topo, alloc)
    trace.block_objectives.append(prev)
    best, best_obj = alloc, prev
    order = _block_order(topo)

    for it in range(settings.max_outer_iterations):
        for node in order:
            sol = threshold_inner_solve(build_sigma(topo, profile, alloc, node))
            alloc = _enforce_pairing(topo, alloc.replace(node, sol.rates))
            trace.block_objectives.append(total_objective(profile, topo, alloc))
        obj = trace.block_objectives[-1]
        resid = float(np.max(kkt_residuals(topo, profile, alloc)))
        trace.iterations.append(IterationRecord(obj, resid, _supports(alloc)))
        if obj >= best_obj:
            best, best_obj = alloc, obj
        if abs(obj - prev) < settings.objective_tolerance and resid < settings.kkt_tolerance:
            trace.converged = True
            log.debug("converged after %d cycles, objective %.12g", it + 1, obj)
            return alloc, trace
        prev = obj

    log.warning("alternating maximization hit %d cycles without converging",
                settings.max_outer_iterations)
    return best, trace


def baseline_allocation(policy: str, topo: Topology, profile: SourceProfile) -> RateAllocation:
    """Every node splits its budget in proportion to ``lam_i`` or ``1 / lam_i``."""
    check(profile, topo)
    if policy == "lambda-proportional":
        share = profile.lambdas / profile.lambdas.sum()
    elif policy == "lambda-inverse":
        inv = 1.0 / profile.lambdas
        share = inv / inv.sum()
    else:
        raise ValueError(f"unknown baseline {policy!r}; expected one of {BASELINES}")
    return RateAllocation(
        np.outer(topo.cache_budgets, share),
        np.outer(topo.user_budgets, share),
    )
