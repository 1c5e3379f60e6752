"""Pure-Python twin of the compiled event loop in ``_kernel.pyx``.

Same RNG (xoshiro256**), same arithmetic order, so for a given stream state
the output matches the compiled kernel bit for bit.
"""

from math import log

import numpy as np

_MASK = 0xFFFFFFFFFFFFFFFF
_SCALE = 1.0 / 9007199254740992.0


def simulate_path(lam, chain_rates, chain_success, user_rates, user_success,
                  horizon, warmup, state):
    m = len(chain_rates)
    d = len(user_rates)
    nn = m + d
    s0, s1, s2, s3 = (int(v) & _MASK for v in state)

    chain_rates = [float(v) for v in chain_rates]
    user_rates = [float(v) for v in user_rates]
    success = [float(v) for v in chain_success] + [float(v) for v in user_success]

    fresh = [False] * nn
    upstream = True
    for r in range(m):
        upstream = upstream and chain_rates[r] > 0.0
        fresh[r] = upstream
    for k in range(d):
        fresh[m + k] = (m == 0 or fresh[m - 1]) and user_rates[k] > 0.0

    acc = [0.0] * nn
    active = [0.0] * nn
    t = 0.0
    events = 0
    violations = 0

    while True:
        src = lam if any(fresh) else 0.0
        total = src
        for r in range(m):
            if not fresh[r] and (r == 0 or fresh[r - 1]):
                active[r] = chain_rates[r]
            else:
                active[r] = 0.0
            total += active[r]
        last_fresh = m == 0 or fresh[m - 1]
        for k in range(d):
            active[m + k] = user_rates[k] if (not fresh[m + k] and last_fresh) else 0.0
            total += active[m + k]

        if total > 0.0:
            # inline xoshiro256** step
            result = (((((s1 * 5) & _MASK) << 7) | (((s1 * 5) & _MASK) >> 57)) & _MASK) * 9 & _MASK
            tt = (s1 << 17) & _MASK
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= tt
            s3 = ((s3 << 45) | (s3 >> 19)) & _MASK
            dt = -log(1.0 - (result >> 11) * _SCALE) / total
            t_end = t + dt
        else:
            t_end = horizon
        hi = t_end if t_end < horizon else horizon
        lo = t if t > warmup else warmup
        if hi > lo:
            span = hi - lo
            for j in range(nn):
                if fresh[j]:
                    acc[j] += span
        if t_end >= horizon:
            break
        t = t_end

        result = (((((s1 * 5) & _MASK) << 7) | (((s1 * 5) & _MASK) >> 57)) & _MASK) * 9 & _MASK
        tt = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= tt
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK
        x = (result >> 11) * _SCALE * total

        cum = src
        pick = -1
        if x >= cum:
            for j in range(nn):
                if active[j] > 0.0:
                    pick = j
                    cum += active[j]
                    if x < cum:
                        break
        events += 1
        if pick < 0:
            fresh = [False] * nn
        else:
            prob = success[pick]
            if prob >= 1.0:
                fresh[pick] = True
            else:
                result = (((((s1 * 5) & _MASK) << 7) | (((s1 * 5) & _MASK) >> 57)) & _MASK) * 9 & _MASK
                tt = (s1 << 17) & _MASK
                s2 ^= s0
                s3 ^= s1
                s1 ^= s2
                s0 ^= s3
                s2 ^= tt
                s3 = ((s3 << 45) | (s3 >> 19)) & _MASK
                if (result >> 11) * _SCALE < prob:
                    fresh[pick] = True

        for r in range(1, m):
            if fresh[r] and not fresh[r - 1]:
                violations += 1
        for k in range(d):
            if fresh[m + k] and m > 0 and not fresh[m - 1]:
                violations += 1

    return np.array(acc), events, violations
