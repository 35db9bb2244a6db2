"""Expected-Improvement Bayesian optimization over a box.

The acquisition is maximized by scoring a finite candidate set: uniform
draws over the box mixed with Gaussian perturbations of the incumbent at
several scales. No gradient refinement.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from . import gp
from .kernels import KernelParams
from .oracle import Bounds, LabeledSample, sample_uniform

_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class CandidateConfig:
    n_candidates: int = 512
    # share of candidates drawn around the incumbent instead of uniformly
    local_fraction: float = 0.5
    # perturbation scales as a fraction of each box side
    local_scales: tuple = (0.2, 0.05, 0.01)


@dataclass
class BOState:
    model: gp.GPModel
    best_x: np.ndarray
    best_y: float
    history: list = field(default_factory=list)
    rng_seed: int = 0


def expected_improvement(mean, stddev, best_y):
    """EI for minimization; works on scalars or arrays.

    ``max(best_y - mean, 0)`` where the standard deviation is zero.
    """
    mean = np.asarray(mean, dtype=np.float64)
    sd = np.asarray(stddev, dtype=np.float64)
    imp = best_y - mean
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(sd > 0, imp / np.where(sd > 0, sd, 1.0), 0.0)
        ei = imp * ndtr(z) + sd * _INV_SQRT_2PI * np.exp(-0.5 * z * z)
    ei = np.where(sd > 0, ei, np.maximum(imp, 0.0))
    ei = np.maximum(ei, 0.0)
    return float(ei) if ei.ndim == 0 else ei


def expected_improvement_of(pred: gp.Prediction, best_y: float) -> float:
    return expected_improvement(pred.mean, pred.stddev, best_y)


def candidate_points(bounds: Bounds, best_x, n_candidates, rng, config=CandidateConfig()):
    n_local = int(round(n_candidates * config.local_fraction)) if best_x is not None else 0
    n_uniform = n_candidates - n_local
    parts = []
    if n_uniform:
        parts.append(sample_uniform(bounds, n_uniform, rng))
    if n_local:
        lows = np.asarray(bounds.lows)
        highs = np.asarray(bounds.highs)
        scales = np.asarray(config.local_scales)[np.arange(n_local) % len(config.local_scales)]
        step = rng.standard_normal((n_local, bounds.dim)) * scales[:, None] * (highs - lows)
        parts.append(np.clip(np.asarray(best_x) + step, lows, highs))
    return np.vstack(parts)


def propose_next(state: BOState, bounds: Bounds, n_candidates: int, seed,
                 config: CandidateConfig = None) -> np.ndarray:
    """Return the EI-argmax among freshly drawn candidates (first index on ties)."""
    config = config or CandidateConfig(n_candidates=n_candidates)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    cands = candidate_points(bounds, state.best_x, n_candidates, rng, config)
    mean, sd, _ = gp.predict_arrays(state.model, cands)
    ei = expected_improvement(mean, sd, state.best_y)
    return cands[int(np.argmax(ei))]


class EIOptimizer:
    """Ask/tell optimizer: ``n_init`` uniform points, then EI proposals.

    The model is refit with fixed kernel parameters after every ``tell``.
    The optimizer takes every told value at face value, whatever its source.
    """

    def __init__(self, bounds: Bounds, params: KernelParams = None, n_init=20,
                 candidates: CandidateConfig = None, seed=0):
        if n_init < 2:
            raise ValueError(f"n_init must be >= 2, got {n_init}")
        self.bounds = bounds
        self.params = params or KernelParams()
        self.n_init = n_init
        self.candidates = candidates or CandidateConfig()
        self.seed = seed
        self._rng = np.random.default_rng(seed)
        self._initial = sample_uniform(bounds, n_init, self._rng)
        self.xs = []
        self.ys = []
        self._model = None

    @property
    def best_index(self):
        return int(np.argmin(self.ys))  # first occurrence on ties

    @property
    def best_y(self):
        return self.ys[self.best_index]

    @property
    def best_x(self):
        return self.xs[self.best_index]

    def state(self) -> BOState:
        if self._model is None:
            self._model = gp.fit(np.asarray(self.xs), np.asarray(self.ys), self.params, self.bounds)
        return BOState(
            model=self._model,
            best_x=self.best_x,
            best_y=self.best_y,
            history=[LabeledSample(tuple(x), y) for x, y in zip(self.xs, self.ys)],
            rng_seed=self.seed,
        )

    def ask(self) -> np.ndarray:
        i = len(self.xs)
        if i < self.n_init:
            return self._initial[i].copy()
        c = self.candidates
        return propose_next(self.state(), self.bounds, c.n_candidates, self._rng, c)

    def tell(self, x, y):
        self.xs.append(np.array(x, dtype=np.float64))
        self.ys.append(float(y))
        self._model = None


@dataclass
class BOResult:
    state: BOState
    trace: list
    error: Exception = None


def run_bo(oracle, bounds: Bounds, n_init: int, n_iters: int, params: KernelParams = None,
           candidates: CandidateConfig = None, seed=0) -> BOResult:
    """Initial uniform design followed by ``n_iters`` propose/evaluate/refit rounds.

    An oracle failure stops the loop; the partial trace is kept and the
    exception is stored on the result.
    """
    opt = EIOptimizer(bounds, params, n_init, candidates, seed)
    trace = []
    error = None
    for _ in range(n_init + n_iters):
        x = opt.ask()
        try:
            y = oracle(x)
        except Exception as exc:
            error = exc
            break
        opt.tell(x, y)
        trace.append(LabeledSample(tuple(float(v) for v in x), float(y)))
    state = opt.state() if opt.xs else None
    return BOResult(state, trace, error)
