"""Monte Carlo estimate of time-average binary freshness.

Each file is simulated on its own (files share nothing), as a race of
exponential clocks: the source update at rate ``lam``, each cache's request
at its rate and each user's request at its rate.  A source event makes every
copy stale; a successful request copies the upstream node's bit.  Clocks
whose firing cannot change any bit in the current state are left out of the
race, which by memorylessness leaves the law of the freshness path unchanged
and saves most of the work when requests far outpace source changes.

The event loop lives in a compiled extension when available and in
``_kernel_py`` otherwise; set ``CACHEFRESH_PURE_PYTHON=1`` to force the
fallback.  Both use the same generator and return identical numbers.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from statistics import NormalDist
from typing import Sequence

import numpy as np

from .model import RateAllocation, SourceProfile, Topology, check

if os.environ.get("CACHEFRESH_PURE_PYTHON"):
    from ._kernel_py import simulate_path as _simulate_path

    BACKEND = "python"
else:
    try:
        from ._kernel import simulate_path as _simulate_path

        BACKEND = "compiled"
    except ImportError:
        from ._kernel_py import simulate_path as _simulate_path

        BACKEND = "python"

CONFIDENCE = 0.99
DEFAULT_SOURCE_EVENTS = 1e5


class StalenessOrderError(AssertionError):
    """A downstream node was fresh while an upstream one was stale."""


@dataclass(frozen=True)
class SimConfig:
    """Simulation length and randomness.

    ``horizon=None`` picks a per-file horizon of
    ``1e5 * max(1, 1 / lam)``; ``source_events`` instead fixes the horizon
    to that many expected source updates, ``source_events / lam``.
    """

    horizon: float | None = None
    replications: int = 20
    seed: int = 0
    warmup: float = 0.0
    source_events: float | None = None

    def __post_init__(self):
        if self.horizon is not None and not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.source_events is not None and not self.source_events > 0:
            raise ValueError("source_events must be positive")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.warmup < 0:
            raise ValueError("warmup must be >= 0")

    def horizon_for(self, lam: float) -> float:
        if self.source_events is not None:
            horizon = self.source_events / lam
        elif self.horizon is not None:
            horizon = self.horizon
        else:
            horizon = DEFAULT_SOURCE_EVENTS * max(1.0, 1.0 / lam)
        if not horizon > self.warmup:
            raise ValueError(f"horizon {horizon} must exceed warmup {self.warmup}")
        return horizon


@dataclass(frozen=True)
class SimEstimate:
    """Across-replication mean and 99% normal half-width.

    For a single file ``mean`` has one entry per node (caches first, then
    users); for a whole system it is ``(nodes, files)``.
    """

    mean: np.ndarray
    half_width: np.ndarray
    replications: int
    horizon: np.ndarray
    samples: np.ndarray  # per-replication values, replication axis first
    events: int = 0
    total_per_user: np.ndarray | None = None
    total_per_user_hw: np.ndarray | None = None
    grand_total: float | None = None
    grand_total_hw: float | None = None

    def covers(self, values) -> np.ndarray:
        return np.abs(np.asarray(values) - self.mean) <= self.half_width


def _z() -> float:
    return NormalDist().inv_cdf(0.5 + CONFIDENCE / 2)


def _summarize(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    reps = samples.shape[0]
    mean = samples.mean(axis=0)
    if reps < 2:
        return mean, np.zeros_like(mean)
    return mean, _z() * samples.std(axis=0, ddof=1) / np.sqrt(reps)


def stream_state(seed: int, file_index: int, replication: int) -> list[int]:
    """Generator state for one (file, replication) pair, independent of run order."""
    seq = np.random.SeedSequence(entropy=seed, spawn_key=(file_index, replication))
    return [int(v) for v in seq.generate_state(4, dtype=np.uint64)]


def _as_probs(values, count, name) -> np.ndarray:
    arr = np.ones(count) if values is None else np.array(values, dtype=float).reshape(count)
    if np.any(~((arr > 0) & (arr <= 1))):
        raise ValueError(f"{name} success probabilities must lie in (0, 1]")
    return arr


def simulate_file(lam: float, chain_rates: Sequence[float], user_rates: Sequence[float],
                  cfg: SimConfig, losses: tuple[Sequence[float], Sequence[float]] | None = None,
                  file_index: int = 0) -> SimEstimate:
    """Estimate one file's freshness at every cache and user.

    ``losses`` is an optional pair ``(cache_success, user_success)`` of
    per-node request success probabilities.
    """
    if not lam > 0:
        raise ValueError("source update rate must be positive")
    chain = np.ascontiguousarray(chain_rates, dtype=float)
    users = np.ascontiguousarray(user_rates, dtype=float)
    if np.any(chain < 0) or np.any(users < 0):
        raise ValueError("request rates must be nonnegative")
    cache_p, user_p = (None, None) if losses is None else losses
    cache_p = _as_probs(cache_p, len(chain), "cache")
    user_p = _as_probs(user_p, len(users), "user")

    horizon = cfg.horizon_for(lam)
    span = horizon - cfg.warmup
    samples = np.empty((cfg.replications, len(chain) + len(users)))
    events = 0
    for rep in range(cfg.replications):
        fresh_time, n_events, violations = _simulate_path(
            float(lam), chain, cache_p, users, user_p, horizon, cfg.warmup,
            stream_state(cfg.seed, file_index, rep),
        )
        if violations:
            raise StalenessOrderError(
                f"{violations} events left a node fresher than its upstream (file {file_index})")
        samples[rep] = fresh_time / span
        events += n_events
    mean, hw = _summarize(samples)
    return SimEstimate(mean, hw, cfg.replications, np.array(horizon), samples, events)


def simulate_system(profile: SourceProfile, topo: Topology, alloc: RateAllocation,
                    cfg: SimConfig) -> SimEstimate:
    """Simulate every file of an allocated network and aggregate weighted totals."""
    check(profile, topo, alloc)
    per_file = [
        simulate_file(
            profile.lambdas[i], alloc.cache_rates[:, i], alloc.user_rates[:, i], cfg,
            losses=(np.full(topo.m, profile.cache_success[i]),
                    np.full(topo.d, profile.user_success[i])),
            file_index=i,
        )
        for i in range(topo.n)
    ]
    samples = np.stack([est.samples for est in per_file], axis=-1)  # (reps, nodes, files)
    mean, hw = _summarize(samples)
    user_totals = samples[:, topo.m:, :] @ profile.weights  # (reps, d)
    tot_mean, tot_hw = _summarize(user_totals)
    grand_mean, grand_hw = _summarize(user_totals.sum(axis=1))
    return SimEstimate(
        mean, hw, cfg.replications,
        np.array([est.horizon for est in per_file]), samples,
        events=sum(est.events for est in per_file),
        total_per_user=tot_mean, total_per_user_hw=tot_hw,
        grand_total=float(grand_mean), grand_total_hw=float(grand_hw),
    )
