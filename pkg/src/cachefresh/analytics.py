"""Closed-form long-term average freshness.

A node that requests a file from an always-fresh upstream at Poisson rate
``c`` while the source changes at rate ``lam`` is fresh a fraction
``c / (c + lam)`` of the time.  Downstream of other caches the factors
multiply, one per hop.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

POLICIES = ("fixed-order", "random-order", "purely-random")


def _check_lambda(lam) -> None:
    if np.any(~(np.asarray(lam, dtype=float) > 0)):
        raise ValueError("source update rate must be positive")


def single_hop_freshness(c, lam):
    """Fraction of time a node refreshing at rate ``c`` holds the current version.

    Works elementwise on arrays; zero request rate gives zero freshness.
    """
    _check_lambda(lam)
    c = np.asarray(c, dtype=float)
    out = c / (c + lam)
    return float(out) if out.ndim == 0 else out


def two_hop_user_freshness(u, c, lam, p=1.0, q=1.0):
    """User freshness behind one cache.

    ``p`` and ``q`` are the success probabilities of the cache and user
    links; a lossy link behaves like a perfect one at the thinned rate.
    """
    return single_hop_freshness(np.multiply(q, u), lam) * single_hop_freshness(np.multiply(p, c), lam)


def chain_freshness(chain_rates: Sequence[float], u: float, lam: float,
                    p: float = 1.0, q: float = 1.0) -> tuple[list[float], float]:
    """Per-stage cache freshness along a serial chain, and the user's freshness."""
    if len(chain_rates) == 0:
        raise ValueError("chain must contain at least one cache")
    _check_lambda(lam)
    stages = []
    running = 1.0
    for c in chain_rates:
        running *= single_hop_freshness(p * c, lam)
        stages.append(running)
    return stages, running * single_hop_freshness(q * u, lam)


def multi_user_freshness(c: float, user_rates: Sequence[float], lam: float,
                         p: float = 1.0, q: float = 1.0) -> list[float]:
    cache = single_hop_freshness(p * c, lam)
    return [single_hop_freshness(q * u, lam) * cache for u in user_rates]


def alt_single_hop_freshness(policy: str, c: float, lam: float) -> float:
    """Single-hop freshness under the alternative refresh disciplines.

    ``fixed-order`` revisits each file every ``1/c`` time units in a fixed
    cycle, ``random-order`` reshuffles the cycle each round, and
    ``purely-random`` is the Poisson policy used everywhere else.
    """
    _check_lambda(lam)
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; expected one of {POLICIES}")
    if c <= 0:
        return 0.0
    if policy == "purely-random":
        return single_hop_freshness(c, lam)
    ratio = c / lam
    # 1 - exp(-x) loses precision for small x
    decay = -math.expm1(-lam / c)
    if policy == "fixed-order":
        return ratio * decay
    return ratio * (1.0 - ratio * ratio * decay * decay)


def network_freshness(profile, alloc) -> np.ndarray:
    """Freshness of every node for every file, shape ``(m + d, n)``.

    Cache rows are running products along the chain; user rows multiply the
    last cache's row by their own hop factor.  Link success probabilities
    from ``profile`` thin the corresponding request rates.
    """
    lam = profile.lambdas
    cache_hops = single_hop_freshness(alloc.cache_rates * profile.cache_success, lam)
    caches = np.cumprod(np.atleast_2d(cache_hops), axis=0)
    users = single_hop_freshness(alloc.user_rates * profile.user_success, lam) * caches[-1]
    return np.vstack([caches, np.atleast_2d(users)])
