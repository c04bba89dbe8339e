from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qroute.skr_model import (
    ChainSpec,
    PhysicalParams,
    QueryCounter,
    SkrEstimator,
    attempt_duration,
    attenuation_success_prob,
    binary_entropy,
    initial_werner,
    link_limit,
    max_links,
    qber_threshold,
    sample_geometric,
    simulate_skr,
    skf_from_werner,
    werner_threshold,
)

PERFECT = PhysicalParams(fidelity=1.0, coherence_time=math.inf)


# -- closed forms --------------------------------------------------------


def test_success_probability():
    assert attenuation_success_prob(0) == 1.0
    assert attenuation_success_prob(50, 0.2) == pytest.approx(0.1)
    assert attenuation_success_prob(100, 0.2) == pytest.approx(0.01)


def test_attempt_duration():
    assert attempt_duration((50,)) == pytest.approx(2.5e-4)
    assert attempt_duration((25, 50)) == pytest.approx(2.5e-4)
    assert attempt_duration((10, 10)) == pytest.approx(5e-5)


def test_initial_werner():
    assert initial_werner(1.0) == 1.0
    assert initial_werner(0.94) == pytest.approx(0.92)
    assert initial_werner(0.96) == pytest.approx(0.946666666666)
    with pytest.raises(ValueError):
        initial_werner(0.2)


def test_binary_entropy():
    assert binary_entropy(0.5) == pytest.approx(1.0)
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.04) == pytest.approx(0.242292, abs=1e-6)
    with pytest.raises(ValueError):
        binary_entropy(1.2)


def test_qber_threshold():
    q = qber_threshold()
    assert 0.110027 <= q <= 0.110029
    assert binary_entropy(q) == pytest.approx(0.5, abs=1e-8)


def test_skf_from_werner():
    assert skf_from_werner(1.0) == pytest.approx(1.0)
    assert skf_from_werner(1 - 2 * qber_threshold()) == 0.0
    assert skf_from_werner(werner_threshold()) == 0.0
    assert skf_from_werner(0.92) == pytest.approx(0.515416, abs=1e-5)
    assert skf_from_werner(0.3) == 0.0
    with pytest.raises(ValueError):
        skf_from_werner(-0.1)


def test_max_links():
    assert max_links(0.94) == pytest.approx(2.9807, abs=1e-3)
    assert max_links(0.96) == pytest.approx(4.5346, abs=1e-3)
    assert max_links(0.834958) == pytest.approx(1.0, abs=1e-4)
    with pytest.raises(ValueError):
        max_links(1.0)
    assert link_limit(1.0) == math.inf


def test_geometric_sampling():
    rng = np.random.default_rng(0)
    assert np.all(sample_geometric(1.0, rng, 100) == 1)
    n = 100_000
    x = sample_geometric(0.5, rng, n)
    assert x.min() >= 1
    assert abs(x.mean() - 2.0) < 3 * math.sqrt(0.5 / 0.25) / math.sqrt(n)
    x = sample_geometric(0.1, rng, n)
    p = 0.9**10
    assert abs(np.mean(x > 10) - p) < 3 * math.sqrt(p * (1 - p) / n)
    with pytest.raises(ValueError):
        sample_geometric(0.0, rng)


def test_params_and_chain_validation():
    with pytest.raises(ValueError):
        PhysicalParams(fidelity=0.25)
    with pytest.raises(ValueError):
        PhysicalParams(coherence_time=0)
    with pytest.raises(ValueError):
        ChainSpec(())
    with pytest.raises(ValueError):
        ChainSpec((1.0, -2.0))
    with pytest.raises(ValueError):
        ChainSpec((1.0, 2.0), (True, False))


# -- Monte-Carlo estimator ----------------------------------------------


def test_single_link_closed_form():
    est = simulate_skr(ChainSpec((50.0,)), PERFECT, 10_000, seed=1)
    assert est.skr_hz == pytest.approx(0.1 / 2.5e-4, rel=0.04)
    assert est.skr_hz == pytest.approx(est.sum_skf / est.total_sim_time)


def test_two_link_oracle():
    p = 10 ** (-0.5)
    expected_rounds = 2 / p - 1 / (2 * p - p * p)
    oracle = 1 / (attempt_duration((25, 25)) * expected_rounds)
    assert oracle == pytest.approx(1799, abs=1)
    est = simulate_skr(ChainSpec((25.0, 25.0)), PERFECT, 10_000, seed=2)
    assert est.skr_hz == pytest.approx(oracle, rel=0.04)


def test_three_links_at_094_are_zero():
    params = PhysicalParams(0.94, 10.0)
    for seed in range(20):
        assert simulate_skr(ChainSpec((1.0, 2.0, 3.0)), params, 500, seed).skr_hz == 0.0


@given(st.floats(0.26, 0.99), st.lists(st.floats(1, 150), min_size=1, max_size=3),
       st.integers(0, 2**63))
def test_zero_beyond_link_limit(fidelity, extra, seed):
    n = math.ceil(max_links(fidelity))
    lengths = tuple(extra) + (10.0,) * max(0, n - len(extra))
    params = PhysicalParams(fidelity, 5.0)
    assert simulate_skr(ChainSpec(lengths), params, 256, seed).skr_hz == 0.0


@given(st.lists(st.floats(1, 80), min_size=2, max_size=4), st.data(), st.integers(0, 2**63))
def test_perfect_memory_never_hurts(lengths, data, seed):
    n = len(lengths) - 1
    base = data.draw(st.lists(st.booleans(), min_size=n, max_size=n))
    k = data.draw(st.integers(0, n - 1))
    better = list(base)
    better[k] = True
    params = PhysicalParams(0.99, 0.05)
    lo = simulate_skr(ChainSpec(tuple(lengths), tuple(base)), params, 512, seed)
    hi = simulate_skr(ChainSpec(tuple(lengths), tuple(better)), params, 512, seed)
    assert hi.sum_skf >= lo.sum_skf
    assert hi.skr_hz >= lo.skr_hz


def test_worker_count_does_not_change_result():
    chain = ChainSpec((20.0, 35.0, 12.0))
    params = PhysicalParams(0.99, 1.0)
    a = simulate_skr(chain, params, 10_000, seed=5, workers=1)
    b = simulate_skr(chain, params, 10_000, seed=5, workers=4)
    assert a == b


def test_homogeneous_split_is_fastest():
    hom = simulate_skr(ChainSpec((30.0, 30.0)), PERFECT, 10_000, seed=11)
    for split in ((10.0, 50.0), (20.0, 40.0)):
        other = simulate_skr(ChainSpec(split), PERFECT, 10_000, seed=12)
        se = math.hypot(hom.stderr_hz, other.stderr_hz)
        assert hom.skr_hz - other.skr_hz > 3 * se


def _cdf_max(ps, k):
    return math.prod(1 - (1 - p) ** k for p in ps)


@given(st.sampled_from([2, 3]), st.floats(5, 200), st.data())
def test_homogeneous_attempts_stochastically_dominate(n, total, data):
    cuts = sorted(data.draw(st.lists(st.floats(0.05, 0.95), min_size=n - 1, max_size=n - 1)))
    fractions = np.diff([0.0, *cuts, 1.0])
    split = [total * f for f in fractions]
    hom = [attenuation_success_prob(total / n)] * n
    inh = [attenuation_success_prob(x) for x in split]
    for k in range(1, 201):
        assert _cdf_max(hom, k) >= _cdf_max(inh, k) - 1e-12


def test_doubling_samples_is_consistent():
    changes = []
    for seed in range(30):
        a = simulate_skr(ChainSpec((50.0,)), PERFECT, 5_000, seed).skr_hz
        b = simulate_skr(ChainSpec((50.0,)), PERFECT, 10_000, seed + 1000).skr_hz
        changes.append(abs(b - a) / a)
    assert np.mean(changes) < 0.02


def test_stderr_is_calibrated():
    truth = 0.1 / 2.5e-4
    z = []
    for seed in range(40):
        est = simulate_skr(ChainSpec((50.0,)), PERFECT, 2_000, seed)
        z.append((est.skr_hz - truth) / est.stderr_hz)
    assert 0.6 < np.std(z) < 1.5


# -- estimator wrapper ---------------------------------------------------


def test_counter_counts_every_call_including_cache_hits():
    est = SkrEstimator(PhysicalParams(0.96, 10.0), n_samples=1000)
    est.skr((40.0, 20.0))
    est.skr((40.0, 20.0))
    est.skr((20.0, 40.0))
    assert est.queries == 3
    assert len(est.cache) == 1


def test_matched_seeds_are_orientation_free():
    est = SkrEstimator(PhysicalParams(0.96, 10.0), n_samples=2000, cache=None)
    assert est.skr((10.0, 30.0, 25.0)) == est.skr((25.0, 30.0, 10.0))


def test_fork_shares_cache_not_counter():
    est = SkrEstimator(PhysicalParams(0.96, 10.0), n_samples=1000)
    est.skr((30.0,))
    other = est.fork()
    assert other.queries == 0 and other.cache is est.cache
    assert other.skr((30.0,)) == est.skr((30.0,))


def test_query_counter_is_monotone():
    c = QueryCounter()
    assert [c.increment() for _ in range(3)] == [1, 2, 3]
    assert c.count == 3
