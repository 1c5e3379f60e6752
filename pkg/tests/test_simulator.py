import numpy as np
import pytest

from cachefresh import (
    RateAllocation,
    SimConfig,
    SourceProfile,
    Topology,
    alternating_maximize,
    baseline_allocation,
    simulate_file,
    simulate_system,
)
from cachefresh import _kernel_py, simulator
from cachefresh.analytics import network_freshness
from conftest import geometric

try:
    from cachefresh import _kernel as compiled
except ImportError:
    compiled = None

needs_compiled = pytest.mark.skipif(compiled is None, reason="compiled kernel not built")

CASES = [
    (1.0, [2.0], [1.0], [], []),
    (1.0, [1.0, 1.0], [1.0, 1.0], [1.0], [1.0]),
    (0.7, [3.0, 0.5, 2.0], [0.6, 1.0, 0.9], [1.0, 4.0], [0.5, 1.0]),
    (2.0, [0.0, 1.0], [1.0, 1.0], [1.0, 2.0], [1.0, 1.0]),
    (5.0, [1.0], [1.0], [0.0, 3.0, 1.0], [1.0, 0.3, 1.0]),
]


@needs_compiled
@pytest.mark.parametrize("case", CASES)
@pytest.mark.parametrize("warmup", [0.0, 50.0])
def test_backends_bit_identical(case, warmup):
    lam, chain, cp, users, up = case
    args = (lam, np.array(chain), np.array(cp), np.array(users, dtype=float), np.array(up, dtype=float),
            600.0, warmup, simulator.stream_state(11, 2, 3))
    fast = compiled.simulate_path(*args)
    slow = _kernel_py.simulate_path(*args)
    assert np.array_equal(fast[0], slow[0])
    assert fast[1:] == slow[1:]
    assert fast[2] == 0


def test_single_cache_matches_formula():
    est = simulate_file(1.0, [2.0], [], SimConfig(horizon=1e5, replications=10, seed=1))
    assert abs(est.mean[0] - 2 / 3) <= est.half_width[0]
    assert est.half_width[0] < 5e-3


def test_chain_matches_formula():
    est = simulate_file(1.0, [1.0, 1.0], [1.0], SimConfig(horizon=1e5, replications=10, seed=2))
    assert abs(est.mean[2] - 0.125) <= est.half_width[2]
    np.testing.assert_array_less(np.abs(est.mean - [0.5, 0.25, 0.125]), est.half_width)


def test_zero_rate_node_never_fresh():
    est = simulate_file(1.0, [2.0, 0.0, 3.0], [1.0, 0.0], SimConfig(horizon=2e3, replications=3))
    assert est.mean[0] > 0
    assert np.all(est.mean[1:4] == 0.0) and est.mean[4] == 0.0
    est = simulate_file(1.0, [2.0], [0.0, 4.0], SimConfig(horizon=2e3, replications=3))
    assert est.mean[1] == 0.0 and est.mean[2] > 0


def test_losses_thin_request_rates():
    est = simulate_file(1.0, [2.0], [3.0], SimConfig(horizon=5e4, replications=10, seed=5),
                        losses=([0.5], [0.8]))
    target = [1 / 2, (2.4 / 3.4) * 0.5]
    assert np.all(est.covers(target))


def test_deterministic_and_seed_sensitive():
    cfg = SimConfig(horizon=500, replications=4, seed=9)
    a = simulate_file(1.0, [2.0], [1.0], cfg)
    b = simulate_file(1.0, [2.0], [1.0], cfg)
    c = simulate_file(1.0, [2.0], [1.0], SimConfig(horizon=500, replications=4, seed=10))
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, c.samples)


def test_replications_are_independent_streams():
    est = simulate_file(1.0, [2.0], [1.0], SimConfig(horizon=500, replications=6, seed=9))
    assert len({tuple(row) for row in est.samples}) == 6
    longer = simulate_file(1.0, [2.0], [1.0], SimConfig(horizon=500, replications=8, seed=9))
    assert np.array_equal(longer.samples[:6], est.samples)


@pytest.mark.parametrize("kwargs", [dict(horizon=0.0), dict(replications=0), dict(warmup=-1.0),
                                    dict(source_events=0.0)])
def test_bad_config(kwargs):
    with pytest.raises(ValueError):
        SimConfig(**kwargs)


def test_bad_inputs():
    cfg = SimConfig(horizon=10)
    with pytest.raises(ValueError):
        simulate_file(0.0, [1.0], [1.0], cfg)
    with pytest.raises(ValueError):
        simulate_file(1.0, [1.0], [1.0], cfg, losses=([1.5], [1.0]))
    with pytest.raises(ValueError):
        simulate_file(1.0, [1.0], [1.0], SimConfig(horizon=10, warmup=20))


def test_default_horizon_rule():
    assert SimConfig().horizon_for(0.5) == pytest.approx(2e5)
    assert SimConfig().horizon_for(4.0) == pytest.approx(1e5)
    assert SimConfig(source_events=1e3).horizon_for(4.0) == pytest.approx(250)


def test_symmetric_files_overlap():
    prof = SourceProfile([1.0, 1.0])
    topo = Topology.single_cache(2, 2, 2)
    est = simulate_system(prof, topo, RateAllocation([[1, 1]], [[1, 1]]),
                          SimConfig(horizon=2e4, replications=10, seed=3))
    gap = np.abs(est.mean[:, 0] - est.mean[:, 1])
    assert np.all(gap <= est.half_width[:, 0] + est.half_width[:, 1])


def test_example1_allocation_matches_formulas(example1):
    prof, topo = example1
    alloc, _ = alternating_maximize(topo, prof)
    est = simulate_system(prof, topo, alloc, SimConfig(source_events=2e4, replications=20, seed=4))
    target = network_freshness(prof, alloc)
    covered = est.covers(target)
    assert covered[-1].sum() >= 14  # 15 files at 99% each
    assert np.all(est.mean[:, :4] == 0)
    assert abs(est.grand_total - target[-1].sum()) <= est.grand_total_hw


def test_lambda_proportional_is_one_sixth():
    prof = SourceProfile(geometric(10, 0.7, 15))
    topo = Topology.single_cache(5, 10, 15)
    alloc = baseline_allocation("lambda-proportional", topo, prof)
    est = simulate_system(prof, topo, alloc, SimConfig(source_events=2e4, replications=20, seed=6))
    assert est.covers(np.full(15, 1 / 6))[-1].sum() >= 14


def test_weighted_totals():
    prof = SourceProfile([1.0, 2.0], weights=[2.0, 0.0])
    topo = Topology.multi_user(2, [1, 3], 2)
    alloc = RateAllocation([[1, 1]], [[0.5, 0.5], [1.5, 1.5]])
    est = simulate_system(prof, topo, alloc, SimConfig(horizon=300, replications=3))
    np.testing.assert_allclose(est.total_per_user, 2 * est.mean[1:, 0])
    assert est.grand_total == pytest.approx(est.total_per_user.sum())


@needs_compiled
def test_backend_selection_env():
    import os
    import subprocess
    import sys

    code = "from cachefresh import simulator; print(simulator.BACKEND)"
    env = dict(os.environ, CACHEFRESH_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    env.pop("CACHEFRESH_PURE_PYTHON")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "compiled"
