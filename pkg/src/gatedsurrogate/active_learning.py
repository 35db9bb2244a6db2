"""Pool-based and stream-based active learning around the GP surrogate."""
from dataclasses import dataclass, field
import math
import time

import numpy as np

from . import gp
from .bayes_opt import CandidateConfig, EIOptimizer
from .kernels import KernelParams
from .oracle import Bounds

MAPE_EPS = 1e-8

PHYSICS = "Physics"
SURROGATE = "GP"


@dataclass(frozen=True)
class Metrics:
    rmse: float
    r_squared: float  # nan when the targets are constant
    mape: float
    max_error: float

    def as_dict(self):
        return {"rmse": self.rmse, "r2": self.r_squared, "mape": self.mape,
                "max_err": self.max_error}


def compute_metrics(y_true, y_pred) -> Metrics:
    t = np.asarray(y_true, dtype=np.float64).ravel()
    p = np.asarray(y_pred, dtype=np.float64).ravel()
    if t.shape != p.shape or t.size == 0:
        raise ValueError(f"need equal nonzero lengths, got {t.size} and {p.size}")
    err = t - p
    sse = float(np.dot(err, err))
    centred = t - t.mean()
    sst = float(np.dot(centred, centred))
    r2 = 1.0 - sse / sst if sst > 0 else float("nan")
    return Metrics(
        rmse=math.sqrt(sse / t.size),
        r_squared=r2,
        mape=float(np.mean(np.abs(err) / np.maximum(np.abs(t), MAPE_EPS))),
        max_error=float(np.max(np.abs(err))),
    )


# --------------------------------------------------------------------------
# pool-based queries


def query_max_variance(model: gp.GPModel, pool) -> int:
    """Index of the pool point with the largest predictive variance (first on ties)."""
    pool = np.array(pool, dtype=np.float64, ndmin=2)
    if pool.shape[0] == 0:
        raise ValueError("empty pool")
    _, _, var = gp.predict_arrays(model, pool)
    return int(np.argmax(var))


def query_random(pool, seed) -> int:
    n = len(pool)
    if n == 0:
        raise ValueError("empty pool")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return int(rng.integers(n))


STRATEGIES = ("max_variance", "random")


@dataclass
class CurvePoint:
    n_labeled: int
    metrics: Metrics
    plus_sigma: Metrics
    minus_sigma: Metrics


@dataclass
class ALState:
    labeled: list
    pool: list
    test: list
    model: gp.GPModel
    curve: list = field(default_factory=list)
    truncated: bool = False


def split_dataset(n, test_fraction, init_size, seed):
    """Seeded partition of ``range(n)`` into (test, initial labels, pool)."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_test = int(round(n * test_fraction))
    if n_test < 1 or n - n_test < init_size + 1:
        raise ValueError(
            f"dataset of {n} cannot hold a {test_fraction:.0%} test split plus {init_size} initial labels"
        )
    test = perm[:n_test]
    rest = perm[n_test:]
    return test.tolist(), rest[:init_size].tolist(), rest[init_size:].tolist()


def _curve_point(model, x_test, y_test, n_labeled):
    mean, sd, _ = gp.predict_arrays(model, x_test)
    return CurvePoint(
        n_labeled,
        compute_metrics(y_test, mean),
        compute_metrics(y_test, mean + sd),
        compute_metrics(y_test, mean - sd),
    )


def run_offline_al(xs, ys, bounds: Bounds, strategy, init_size, n_rounds,
                   test_fraction=0.2, params: KernelParams = None, seed=0) -> ALState:
    """Sequential single-sample querying with a learning curve on a held-out split.

    The split and the initial labels depend only on ``seed``, so the two
    strategies see identical starting conditions for the same seed.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
    params = params or KernelParams()
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    test, labeled, pool = split_dataset(len(ys), test_fraction, init_size, seed)
    x_test, y_test = xs[test], ys[test]
    query_rng = np.random.default_rng([seed, 1])

    model = gp.fit(xs[labeled], ys[labeled], params, bounds)
    state = ALState(labeled, pool, test, model)
    state.curve.append(_curve_point(model, x_test, y_test, len(labeled)))
    for _ in range(n_rounds):
        if not state.pool:
            state.truncated = True
            break
        if strategy == "max_variance":
            k = query_max_variance(state.model, xs[state.pool])
        else:
            k = query_random(state.pool, query_rng)
        state.labeled.append(state.pool.pop(k))
        state.model = gp.fit(xs[state.labeled], ys[state.labeled], params, bounds)
        state.curve.append(_curve_point(state.model, x_test, y_test, len(state.labeled)))
    return state


def full_data_rmse(xs, ys, bounds, test_fraction, init_size, params, seed):
    """Test RMSE of a model trained on every non-test sample of the same split."""
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    test, labeled, pool = split_dataset(len(ys), test_fraction, init_size, seed)
    train = labeled + pool
    model = gp.fit(xs[train], ys[train], params, bounds)
    mean, _, _ = gp.predict_arrays(model, xs[test])
    return compute_metrics(ys[test], mean).rmse


def budget_fraction_to_reach(curve, target_rmse, n_train):
    """Smallest labeled fraction whose RMSE is within ``target_rmse``; nan if never."""
    for point in curve:
        if point.metrics.rmse <= target_rmse:
            return point.n_labeled / n_train
    return float("nan")


# --------------------------------------------------------------------------
# stream-based gate


@dataclass(frozen=True)
class ThresholdState:
    """Running mean of every variance fed so far; ``ub`` is 0 before any."""

    total: float = 0.0
    count: int = 0

    @property
    def ub(self):
        return self.total / self.count if self.count else 0.0


def update_threshold(ts: ThresholdState, new_variance) -> ThresholdState:
    if new_variance < 0:
        raise ValueError(f"variance must be >= 0, got {new_variance}")
    return ThresholdState(ts.total + float(new_variance), ts.count + 1)


@dataclass
class TraceRow:
    iter: int
    phase: str  # "pretrain" or "online"
    source: str
    power: float
    variance: float
    ub: float
    physics_calls_cum: int
    x: tuple = ()


@dataclass
class OnlineResult:
    trace: list
    physics_calls: int
    gp_answers: int
    best_power: float
    pretrain_s: float
    total_s: float
    iters_to_target: int = None
    physics_calls_to_target: int = None
    pretrain_calls: int = 0
    error: Exception = None


def run_online(oracle, bounds: Bounds, n_pt, n_tot, params: KernelParams = None,
               stop_target=None, seed=0, optimizer_params: KernelParams = None,
               n_init=20, candidates: CandidateConfig = None, ub_override=None,
               pretrain_variance="in_sample", confirm_improvements=False) -> OnlineResult:
    """Uncertainty-gated optimization loop.

    Iterations ``1..n_pt`` are always labeled by ``oracle``. Afterwards a
    proposal is answered by the gate GP when its standardized predictive
    variance is strictly below the running threshold, otherwise by the
    oracle (followed by a refit). Both branches feed the threshold.
    ``ub_override`` replaces the threshold at decision time (0 disables the
    surrogate, ``inf`` disables the oracle).

    The optimizer receives every answer as-is; only oracle values can meet
    ``stop_target``.
    """
    if not 2 <= n_pt < n_tot:
        raise ValueError(f"need 2 <= n_pt < n_tot, got n_pt={n_pt}, n_tot={n_tot}")
    params = params or KernelParams()
    opt = EIOptimizer(bounds, optimizer_params or params, n_init, candidates, seed)
    trace = []
    phys_x, phys_y = [], []
    best_phys = math.inf
    hit_iter = hit_calls = None
    error = None
    t0 = time.perf_counter()

    def physics(x):
        y = float(oracle(x))
        phys_x.append(np.array(x))
        phys_y.append(y)
        return y

    pretrain_s = 0.0
    try:
        for i in range(1, n_pt + 1):
            x = opt.ask()
            y = physics(x)
            opt.tell(x, y)
            best_phys = min(best_phys, y)
            trace.append(TraceRow(i, "pretrain", PHYSICS, y, 0.0, 0.0, len(phys_y), tuple(x)))
            if stop_target is not None and best_phys <= stop_target:
                hit_iter, hit_calls = i, len(phys_y)
                break
        model = gp.fit(np.asarray(phys_x), np.asarray(phys_y), params, bounds)
        pre_var = _pretrain_variances(model, phys_x, phys_y, params, bounds, pretrain_variance)
        ts = ThresholdState()
        for row, v in zip(trace, pre_var):
            ts = update_threshold(ts, v)
            row.variance, row.ub = float(v), ts.ub
        pretrain_s = time.perf_counter() - t0

        i = len(trace)
        while hit_iter is None and i < n_tot:
            i += 1
            x = opt.ask()
            pred = gp.predict(model, x)
            ub = ts.ub if ub_override is None else float(ub_override)
            if pred.variance < ub and not (confirm_improvements and pred.mean < best_phys):
                y, source = pred.mean, SURROGATE
            else:
                y, source = physics(x), PHYSICS
                model = gp.fit(np.asarray(phys_x), np.asarray(phys_y), params, bounds)
                best_phys = min(best_phys, y)
            ts = update_threshold(ts, pred.variance)
            opt.tell(x, y)
            trace.append(TraceRow(i, "online", source, y, pred.variance, ub, len(phys_y), tuple(x)))
            if stop_target is not None and best_phys <= stop_target:
                hit_iter, hit_calls = i, len(phys_y)
    except Exception as exc:  # oracle or numerical failure: keep the partial result
        error = exc
        if not pretrain_s:
            pretrain_s = time.perf_counter() - t0

    gp_answers = sum(1 for r in trace if r.source == SURROGATE)
    return OnlineResult(
        trace=trace,
        physics_calls=len(phys_y),
        gp_answers=gp_answers,
        best_power=best_phys,
        pretrain_s=pretrain_s,
        total_s=time.perf_counter() - t0,
        iters_to_target=hit_iter,
        physics_calls_to_target=hit_calls,
        pretrain_calls=sum(1 for r in trace if r.phase == "pretrain"),
        error=error,
    )


def _pretrain_variances(model, xs, ys, params, bounds, how):
    if how == "in_sample":
        return gp.predict_arrays(model, np.asarray(xs))[2]
    if how == "loo":
        return gp.loo_variances(model)
    if how == "prequential":
        out = [params.signal_variance]
        for i in range(1, len(xs)):
            m = gp.fit(np.asarray(xs[:i]), np.asarray(ys[:i]), params, bounds)
            out.append(gp.predict_arrays(m, xs[i])[2][0])
        return np.asarray(out)
    raise ValueError(f"unknown pretrain_variance {how!r}")


def run_physics_baseline(oracle, bounds: Bounds, n_tot, stop_target=None, seed=0,
                         optimizer_params: KernelParams = None, n_init=20,
                         candidates: CandidateConfig = None) -> OnlineResult:
    """The same optimizer with every proposal sent to the oracle."""
    opt = EIOptimizer(bounds, optimizer_params or KernelParams(), n_init, candidates, seed)
    trace = []
    best = math.inf
    hit_iter = None
    error = None
    t0 = time.perf_counter()
    try:
        for i in range(1, n_tot + 1):
            x = opt.ask()
            y = float(oracle(x))
            opt.tell(x, y)
            best = min(best, y)
            trace.append(TraceRow(i, "online", PHYSICS, y, float("nan"), 0.0, i, tuple(x)))
            if stop_target is not None and best <= stop_target:
                hit_iter = i
                break
    except Exception as exc:
        error = exc
    return OnlineResult(
        trace=trace,
        physics_calls=len(trace),
        gp_answers=0,
        best_power=best,
        pretrain_s=0.0,
        total_s=time.perf_counter() - t0,
        iters_to_target=hit_iter,
        physics_calls_to_target=hit_iter,
        error=error,
    )


def initial_gap_target(oracle, bounds: Bounds, n_init, seed, fraction=0.01):
    """``P0 + fraction * (best initial-design power - P0)`` for the optimizer's seed.

    Uses the oracle's closed form directly, so no calls are counted.
    """
    p0 = oracle.minimum
    if p0 is None:
        raise ValueError("stop target from the initial gap needs a known optimum")
    initial = EIOptimizer(bounds, KernelParams(), n_init, seed=seed)._initial
    best0 = min(oracle.power(x) for x in initial)
    return p0 + fraction * (best0 - p0)
