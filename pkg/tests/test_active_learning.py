import math
from fractions import Fraction

import numpy as np
import pytest

from gatedsurrogate import gp
from gatedsurrogate.active_learning import (
    PHYSICS,
    SURROGATE,
    ThresholdState,
    compute_metrics,
    query_max_variance,
    query_random,
    run_offline_al,
    run_online,
    run_physics_baseline,
    split_dataset,
    update_threshold,
)
from gatedsurrogate.bayes_opt import run_bo
from gatedsurrogate.errors import InputError
from gatedsurrogate.kernels import KernelParams
from gatedsurrogate.oracle import Bounds, PowerFunctionConfig, PowerOracle, sample_uniform

BO_PARAMS = KernelParams(2.5, 2.0)


# metrics


def test_metrics_perfect_prediction():
    m = compute_metrics([3.0, 5.0, 7.0], [3.0, 5.0, 7.0])
    assert (m.rmse, m.r_squared, m.mape, m.max_error) == (0.0, 1.0, 0.0, 0.0)


def test_metrics_two_points():
    m = compute_metrics([1, 2], [2, 2])
    assert m.rmse == pytest.approx(math.sqrt(0.5), abs=1e-9)
    assert m.r_squared == pytest.approx(-1.0, abs=1e-9)
    assert m.mape == pytest.approx(0.5, abs=1e-9)
    assert m.max_error == pytest.approx(1.0, abs=1e-9)


def test_metrics_three_points():
    # exact rational oracle: sse = 9, sst = 200
    m = compute_metrics([10, 20, 30], [10, 20, 33])
    assert m.rmse == pytest.approx(math.sqrt(3), abs=1e-9)
    assert m.r_squared == pytest.approx(float(1 - Fraction(9, 200)), abs=1e-9)
    assert m.mape == pytest.approx(float(Fraction(1, 30)), abs=1e-9)
    assert m.max_error == pytest.approx(3.0, abs=1e-9)


def test_metrics_constant_target_and_zero_guard():
    m = compute_metrics([2.0, 2.0], [2.0, 3.0])
    assert math.isnan(m.r_squared)
    assert compute_metrics([0.0], [1e-8]).mape == pytest.approx(1.0)
    with pytest.raises(ValueError):
        compute_metrics([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        compute_metrics([], [])


# queries


def _model(n=6, d=3, seed=0):
    b = Bounds.unit(d)
    x = sample_uniform(b, n, seed)
    return gp.fit(x, np.sin(x).sum(axis=1), KernelParams(0.5, 0.75), b), x


def test_max_variance_singleton():
    m, _ = _model()
    assert query_max_variance(m, [[0.3, 0.3, 0.3]]) == 0


def test_max_variance_prefers_far_point():
    b = Bounds((0.0,) * 3, (100.0,) * 3)
    x = np.array([[1.0, 1.0, 1.0], [3.0, 2.0, 1.0]])
    m = gp.fit(x, [1.0, 2.0], KernelParams(0.5, 0.1), b)
    assert query_max_variance(m, [x[0], [95.0, 95.0, 95.0]]) == 1


def test_max_variance_is_exhaustive_argmax(rng):
    m, _ = _model(10, 3, 1)
    pool = rng.random((50, 3))
    k = query_max_variance(m, pool)
    variances = [gp.predict(m, p).variance for p in pool]
    assert variances[k] == pytest.approx(max(variances), abs=1e-15)


def test_max_variance_ties_take_lowest_index():
    m, _ = _model()
    p = [0.9, 0.1, 0.5]
    assert query_max_variance(m, [p, p, p]) == 0


def test_random_query():
    assert query_random([[0.0]], 5) == 0
    pool = list(range(9))
    assert query_random(pool, 3) == query_random(pool, 3)
    rng = np.random.default_rng(2024)
    counts = np.bincount([query_random(range(4), rng) for _ in range(10_000)], minlength=4)
    freq = counts / counts.sum()
    assert np.all((freq >= 0.22) & (freq <= 0.28))
    with pytest.raises(ValueError):
        query_random([], 0)


# offline loop


@pytest.fixture(scope="module")
def corpus():
    # BO-generated corpus on the coupled oracle, as the CLI writes it
    b = Bounds.unit(12)
    res = run_bo(PowerOracle(b), b, 20, 130, BO_PARAMS, seed=77)
    return b, np.array([s.x for s in res.trace]), np.array([s.power for s in res.trace])


def test_split_is_partition():
    test, init, pool = split_dataset(50, 0.2, 5, 1)
    assert len(test) == 10 and len(init) == 5 and len(pool) == 35
    assert sorted(test + init + pool) == list(range(50))
    with pytest.raises(ValueError):
        split_dataset(6, 0.2, 5, 0)


def test_zero_rounds(corpus):
    b, xs, ys = corpus
    st = run_offline_al(xs, ys, b, "max_variance", 5, 0, seed=0)
    assert len(st.curve) == 1 and st.curve[0].n_labeled == 5


@pytest.mark.parametrize("strategy", ["max_variance", "random"])
def test_rounds_and_disjointness(corpus, strategy):
    b, xs, ys = corpus
    st = run_offline_al(xs, ys, b, strategy, 5, 12, seed=3)
    assert [c.n_labeled for c in st.curve] == list(range(5, 18))
    assert not set(st.labeled) & set(st.pool)
    assert not set(st.labeled) & set(st.test)
    assert len(st.labeled) + len(st.pool) + len(st.test) == len(ys)
    assert not st.truncated


def test_pool_exhaustion_truncates():
    b = Bounds.unit(2)
    xs = sample_uniform(b, 20, 0)
    ys = xs.sum(axis=1)
    st = run_offline_al(xs, ys, b, "random", 5, 50, seed=0)
    assert st.truncated and not st.pool
    assert len(st.curve) == 1 + 11


def test_sigma_bands_bracket_mean(corpus):
    b, xs, ys = corpus
    st = run_offline_al(xs, ys, b, "max_variance", 5, 3, seed=1)
    for c in st.curve:
        assert c.plus_sigma.rmse >= 0 and c.minus_sigma.rmse >= 0
        assert c.plus_sigma != c.metrics


def test_shared_split_across_strategies(corpus):
    b, xs, ys = corpus
    a = run_offline_al(xs, ys, b, "max_variance", 5, 0, seed=4)
    r = run_offline_al(xs, ys, b, "random", 5, 0, seed=4)
    assert a.test == r.test and a.labeled == r.labeled
    assert a.curve[0].metrics == r.curve[0].metrics


def test_unknown_strategy(corpus):
    b, xs, ys = corpus
    with pytest.raises(ValueError):
        run_offline_al(xs, ys, b, "greedy", 5, 1)


@pytest.mark.slow
def test_max_variance_final_not_worse_than_first(corpus):
    b, xs, ys = corpus
    ok = 0
    for seed in range(20):
        st = run_offline_al(xs, ys, b, "max_variance", 5, 40, seed=seed)
        ok += st.curve[-1].metrics.rmse <= st.curve[0].metrics.rmse
    assert ok >= 19


@pytest.mark.slow
def test_max_variance_dominates_random_at_30_percent(corpus):
    b, xs, ys = corpus
    mv, rd = [], []
    for seed in range(20):
        test, init, pool = split_dataset(len(ys), 0.2, 5, seed)
        k = int(round(0.3 * (len(init) + len(pool)))) - 5
        mv.append(run_offline_al(xs, ys, b, "max_variance", 5, k, seed=seed).curve[-1].metrics.rmse)
        rd.append(run_offline_al(xs, ys, b, "random", 5, k, seed=seed).curve[-1].metrics.rmse)
    assert np.median(mv) <= np.median(rd)


# threshold


def test_threshold_examples():
    ts = update_threshold(ThresholdState(), 2.0)
    assert ThresholdState().ub == 0.0 and ts.ub == 2.0
    assert update_threshold(ts, 4.0).ub == 3.0
    with pytest.raises(ValueError):
        update_threshold(ts, -1e-3)


def test_threshold_long_stream():
    values = np.random.default_rng(99).exponential(size=1000)
    ts = ThresholdState()
    for v in values:
        ts = update_threshold(ts, v)
    assert ts.ub == pytest.approx(math.fsum(values) / 1000, abs=1e-12)
    assert ts.count == 1000


# online gate


def _online(seed=0, n_pt=10, n_tot=30, **kw):
    b = Bounds.unit(12)
    o = PowerOracle(b, PowerFunctionConfig(mode="quadratic"))
    kw.setdefault("optimizer_params", BO_PARAMS)
    res = run_online(o, b, n_pt, n_tot, KernelParams(0.5, 0.75), seed=seed, n_init=5, **kw)
    return res, o


def _running_means(trace):
    return np.cumsum([r.variance for r in trace]) / np.arange(1, len(trace) + 1)


@pytest.mark.parametrize("how", ["in_sample", "loo", "prequential"])
def test_online_invariants(how):
    res, o = _online(seed=2, n_pt=12, n_tot=40, pretrain_variance=how)
    assert res.error is None and len(res.trace) == 40
    pre = [r for r in res.trace if r.phase == "pretrain"]
    post = [r for r in res.trace if r.phase == "online"]
    assert len(pre) == 12 and all(r.source == PHYSICS for r in pre)
    assert all(r.source in (PHYSICS, SURROGATE) for r in post)
    n_phys_post = sum(r.source == PHYSICS for r in post)
    assert res.physics_calls == o.stats.call_count == 12 + n_phys_post
    assert res.gp_answers + n_phys_post == 40 - 12
    # gate soundness
    assert all(r.variance < r.ub for r in post if r.source == SURROGATE)
    # training set grows exactly on physics answers
    cum = [r.physics_calls_cum for r in res.trace]
    steps = np.diff([0] + cum)
    assert all(s == (r.source == PHYSICS) for s, r in zip(steps, res.trace))
    # ub recomputable from the trace
    means = _running_means(res.trace)
    assert all(r.ub == pytest.approx(m, abs=1e-9) for r, m in zip(pre, means[:12]))
    for i, r in enumerate(post, start=12):
        assert r.ub == pytest.approx(means[i - 1], abs=1e-9)


def test_ub_zero_matches_physics_baseline():
    for seed in range(3):
        res, _ = _online(seed, ub_override=0.0)
        b = Bounds.unit(12)
        base = run_physics_baseline(PowerOracle(b, PowerFunctionConfig(mode="quadratic")), b, 30,
                                    seed=seed, optimizer_params=BO_PARAMS, n_init=5)
        bo = run_bo(PowerOracle(b, PowerFunctionConfig(mode="quadratic")), b, 5, 25, BO_PARAMS,
                    seed=seed)
        assert res.physics_calls == 30 and res.gp_answers == 0
        assert [(r.x, r.power) for r in res.trace] == [(r.x, r.power) for r in base.trace]
        assert [r.x for r in res.trace] == [s.x for s in bo.trace]
        assert [r.power for r in res.trace] == [s.power for s in bo.trace]


def test_ub_infinite_never_calls_physics_after_pretrain():
    res, o = _online(1, ub_override=math.inf)
    assert res.physics_calls == o.stats.call_count == 10
    assert res.gp_answers == 20


def test_stop_target_counts_physics_only():
    res, _ = _online(0, n_pt=5, n_tot=60, ub_override=math.inf, stop_target=10000.5)
    assert res.iters_to_target is None
    assert res.physics_calls == 5


def test_online_rejects_bad_npt():
    for n_pt, n_tot in ((1, 10), (10, 10), (200, 100)):
        with pytest.raises(ValueError):
            _online(n_pt=n_pt, n_tot=n_tot)


def test_online_partial_result_on_oracle_failure():
    b = Bounds.unit(12)
    o = PowerOracle(b, PowerFunctionConfig(mode="quadratic"))
    calls = {"n": 0}

    def flaky(x):
        calls["n"] += 1
        if calls["n"] > 14:
            raise InputError("simulator died")
        return o(x)

    res = run_online(flaky, b, 10, 40, seed=0, optimizer_params=BO_PARAMS, n_init=5,
                     ub_override=0.0)
    assert isinstance(res.error, InputError)
    assert res.physics_calls == 14 and len(res.trace) == 14
