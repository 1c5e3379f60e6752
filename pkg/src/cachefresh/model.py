"""Domain types for source -> cache(s) -> user(s) update networks.

Every supported topology is a serial chain of ``m`` caches whose last cache
feeds ``d`` users: the single-cache system is ``m = d = 1``, the serial chain
has ``d = 1`` and the multi-user star has ``m = 1``.  Rows of a rate or
freshness matrix are nodes (caches first, then users), columns are files.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

BUDGET_RTOL = 1e-9

SINGLE = "single"
CHAIN = "chain"
MULTIUSER = "multiuser"
KINDS = (SINGLE, CHAIN, MULTIUSER)


class ValidationError(ValueError):
    """Raised when an operation needs a valid (profile, topology, allocation)."""

    def __init__(self, errors: Sequence[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


class Node(NamedTuple):
    kind: str  # "cache" or "user"
    index: int  # 0-based position among nodes of that kind

    @property
    def label(self) -> str:
        return f"{self.kind}{self.index + 1}"


@dataclass(frozen=True)
class SourceProfile:
    """Per-file source update rates plus optional weights and link reliabilities."""

    lambdas: np.ndarray
    weights: np.ndarray | None = None
    cache_success: np.ndarray | None = None
    user_success: np.ndarray | None = None

    def __post_init__(self):
        lam = _frozen(np.atleast_1d(self.lambdas))
        object.__setattr__(self, "lambdas", lam)
        for name in ("weights", "cache_success", "user_success"):
            value = getattr(self, name)
            if value is None:
                value = np.ones_like(lam)
            object.__setattr__(self, name, _frozen(np.atleast_1d(value)))

    @property
    def n(self) -> int:
        return len(self.lambdas)

    def errors(self) -> list[str]:
        errs = []
        n = self.n
        if n < 1:
            errs.append("profile: at least one file required")
        if np.any(~np.isfinite(self.lambdas)) or np.any(self.lambdas <= 0):
            bad = [i for i, v in enumerate(self.lambdas) if not v > 0]
            errs.append(f"profile: nonpositive lambda at files {bad}")
        for name in ("weights", "cache_success", "user_success"):
            arr = getattr(self, name)
            if len(arr) != n:
                errs.append(f"profile: {name} has length {len(arr)}, expected {n}")
                continue
            if name == "weights":
                if np.any(~(arr >= 0)):
                    errs.append("profile: negative importance weight")
            elif np.any(~((arr > 0) & (arr <= 1))):
                errs.append(f"profile: {name} must lie in (0, 1]")
        return errs


@dataclass(frozen=True)
class Topology:
    """Network shape and per-node total request-rate budgets."""

    kind: str
    cache_budgets: tuple[float, ...]
    user_budgets: tuple[float, ...]
    n: int

    def __post_init__(self):
        object.__setattr__(self, "cache_budgets", tuple(float(b) for b in self.cache_budgets))
        object.__setattr__(self, "user_budgets", tuple(float(b) for b in self.user_budgets))
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def single_cache(cls, cache_budget: float, user_budget: float, n: int) -> "Topology":
        return cls(SINGLE, (cache_budget,), (user_budget,), n)

    @classmethod
    def serial_chain(cls, cache_budgets: Sequence[float], user_budget: float, n: int) -> "Topology":
        return cls(CHAIN, tuple(cache_budgets), (user_budget,), n)

    @classmethod
    def multi_user(cls, cache_budget: float, user_budgets: Sequence[float], n: int) -> "Topology":
        return cls(MULTIUSER, (cache_budget,), tuple(user_budgets), n)

    @property
    def m(self) -> int:
        return len(self.cache_budgets)

    @property
    def d(self) -> int:
        return len(self.user_budgets)

    @property
    def nodes(self) -> list[Node]:
        return [Node("cache", r) for r in range(self.m)] + [Node("user", k) for k in range(self.d)]

    def budget(self, node: Node) -> float:
        return self.cache_budgets[node.index] if node.kind == "cache" else self.user_budgets[node.index]

    def errors(self) -> list[str]:
        errs = []
        if self.kind not in KINDS:
            errs.append(f"topology: unknown kind {self.kind!r}")
        if self.m < 1:
            errs.append("topology: at least one cache required")
        if self.d < 1:
            errs.append("topology: at least one user required")
        if self.kind in (SINGLE, MULTIUSER) and self.m != 1:
            errs.append(f"topology: {self.kind} has exactly one cache, got {self.m}")
        if self.kind in (SINGLE, CHAIN) and self.d != 1:
            errs.append(f"topology: {self.kind} has exactly one user, got {self.d}")
        if any(not b > 0 for b in self.cache_budgets + self.user_budgets):
            errs.append("topology: budgets must be strictly positive")
        if self.n < 1:
            errs.append("topology: file count must be >= 1")
        return errs


@dataclass(frozen=True)
class RateAllocation:
    """Request rates: ``cache_rates`` is (m, n), ``user_rates`` is (d, n)."""

    cache_rates: np.ndarray
    user_rates: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "cache_rates", _frozen(np.atleast_2d(self.cache_rates)))
        object.__setattr__(self, "user_rates", _frozen(np.atleast_2d(self.user_rates)))

    @classmethod
    def uniform(cls, topo: Topology) -> "RateAllocation":
        n = topo.n
        return cls(
            np.array([[b / n] * n for b in topo.cache_budgets]),
            np.array([[b / n] * n for b in topo.user_budgets]),
        )

    def rates(self, node: Node) -> np.ndarray:
        return self.cache_rates[node.index] if node.kind == "cache" else self.user_rates[node.index]

    def replace(self, node: Node, rates) -> "RateAllocation":
        cache, user = np.array(self.cache_rates), np.array(self.user_rates)
        if node.kind == "cache":
            cache[node.index] = rates
        else:
            user[node.index] = rates
        return RateAllocation(cache, user)

    def matrix(self) -> np.ndarray:
        """All node rows stacked, caches first."""
        return np.vstack([self.cache_rates, self.user_rates])


@dataclass(frozen=True)
class FreshnessReport:
    per_node_per_file: np.ndarray  # (m + d, n), caches first
    total_per_user: np.ndarray  # (d,), weighted by importance
    grand_total: float


@dataclass(frozen=True)
class IterationRecord:
    objective: float
    kkt_residual: float
    supports: tuple[tuple[int, ...], ...]  # per node, file indices with positive rate


@dataclass
class SolveTrace:
    iterations: list[IterationRecord] = field(default_factory=list)
    block_objectives: list[float] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations_used(self) -> int:
        return len(self.iterations)

    @property
    def objectives(self) -> list[float]:
        return [rec.objective for rec in self.iterations]


def validate(profile: SourceProfile, topo: Topology, alloc: RateAllocation | None = None) -> list[str]:
    """Return every violated invariant; an empty list means the inputs are consistent."""
    errs = profile.errors() + topo.errors()
    if topo.n != profile.n:
        errs.append(f"dimension mismatch: topology has n={topo.n}, profile has {profile.n} files")
    if alloc is None:
        return errs
    for name, arr, budgets in (
        ("cache_rates", alloc.cache_rates, topo.cache_budgets),
        ("user_rates", alloc.user_rates, topo.user_budgets),
    ):
        if arr.shape != (len(budgets), topo.n):
            errs.append(f"dimension mismatch: {name} has shape {arr.shape}, "
                        f"expected {(len(budgets), topo.n)}")
            continue
        if np.any(~np.isfinite(arr)) or np.any(arr < 0):
            errs.append(f"negative rate in {name}")
        for row, (rates, budget) in enumerate(zip(arr, budgets)):
            total = float(np.sum(rates))
            if total > budget + BUDGET_RTOL * budget:
                errs.append(f"budget exceeded: {name}[{row}] sums to {total:.12g} > {budget:.12g}")
    return errs


def check(profile: SourceProfile, topo: Topology, alloc: RateAllocation | None = None) -> None:
    errs = validate(profile, topo, alloc)
    if errs:
        raise ValidationError(errs)


def freshness_report(profile: SourceProfile, topo: Topology, alloc: RateAllocation) -> FreshnessReport:
    from .analytics import network_freshness

    check(profile, topo, alloc)
    table = network_freshness(profile, alloc)
    users = table[topo.m:]
    per_user = users @ profile.weights
    return FreshnessReport(_frozen(table), _frozen(per_user), float(per_user.sum()))


def total_objective(profile: SourceProfile, topo: Topology, alloc: RateAllocation) -> float:
    """Importance-weighted freshness summed over all files and users."""
    return freshness_report(profile, topo, alloc).grand_total
