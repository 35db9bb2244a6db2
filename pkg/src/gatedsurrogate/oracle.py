"""Synthetic stand-in for the expensive power simulator.

The power function is

    P(x) = P0 + sum_j w_j (x_j - c_j)^2
              + kappa * sum_j (x_j - c_j)(x_{j+1} - c_{j+1})
              + A * sum_j sin(omega_j x_j)

With ``kappa = 0`` and ``A = 0`` its minimizer is exactly ``c`` and the
minimum is exactly ``P0``.
"""
from dataclasses import dataclass
import threading
import time

import numpy as np

from .errors import InputError

DEFAULT_DIM = 12


@dataclass(frozen=True)
class Bounds:
    lows: tuple
    highs: tuple

    def __post_init__(self):
        lows = tuple(float(v) for v in self.lows)
        highs = tuple(float(v) for v in self.highs)
        if len(lows) != len(highs) or not lows:
            raise InputError("lows and highs must be non-empty and of equal length")
        bad = [j for j, (lo, hi) in enumerate(zip(lows, highs)) if not lo < hi]
        if bad:
            raise InputError(f"lows must be < highs; violated in dimensions {bad}")
        object.__setattr__(self, "lows", lows)
        object.__setattr__(self, "highs", highs)

    @classmethod
    def unit(cls, dim=DEFAULT_DIM):
        return cls((0.0,) * dim, (1.0,) * dim)

    @property
    def dim(self):
        return len(self.lows)

    @property
    def midpoint(self):
        return tuple((lo + hi) / 2.0 for lo, hi in zip(self.lows, self.highs))

    def contains(self, x):
        x = np.asarray(x, dtype=np.float64)
        return bool(np.all(x >= self.lows) and np.all(x <= self.highs))


@dataclass(frozen=True)
class LabeledSample:
    x: tuple
    power: float


def sample_uniform(bounds: Bounds, n: int, seed) -> np.ndarray:
    """``n`` i.i.d. uniform points in the box, shape ``(n, dim)``."""
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    lows = np.asarray(bounds.lows)
    highs = np.asarray(bounds.highs)
    pts = lows + rng.random((n, bounds.dim)) * (highs - lows)
    # guard against rounding past the upper edge
    return np.minimum(pts, highs)


@dataclass
class OracleStats:
    call_count: int = 0
    total_wall_time: float = 0.0
    per_call_latency: float = 0.0


@dataclass(frozen=True)
class PowerFunctionConfig:
    mode: str = "quadratic"
    base_power: float = 10000.0
    weights: tuple = None
    center: tuple = None
    coupling: float = 10.0
    amplitude: float = 0.0
    frequencies: tuple = None

    def __post_init__(self):
        if self.mode not in ("quadratic", "coupled"):
            raise InputError(f"unknown oracle mode {self.mode!r}")


class PowerOracle:
    """Callable evaluator with thread-safe call accounting.

    In ``quadratic`` mode the coupling and sine terms are switched off; in
    ``coupled`` mode the configured ``coupling`` and ``amplitude`` apply.
    """

    def __init__(self, bounds: Bounds = None, config: PowerFunctionConfig = None,
                 latency: float = 0.0):
        self.bounds = bounds or Bounds.unit()
        self.config = config or PowerFunctionConfig()
        d = self.bounds.dim
        cfg = self.config
        self.base_power = float(cfg.base_power)
        self.weights = _vector(cfg.weights, d, 50.0, "weights")
        self.center = _vector(cfg.center, d, None, "center", default=self.bounds.midpoint)
        self.frequencies = _vector(cfg.frequencies, d, 2.0 * np.pi, "frequencies")
        if cfg.mode == "quadratic":
            self.coupling, self.amplitude = 0.0, 0.0
        else:
            self.coupling, self.amplitude = float(cfg.coupling), float(cfg.amplitude)
        self.stats = OracleStats(per_call_latency=float(latency))
        self._lock = threading.Lock()

    def power(self, x) -> float:
        """The closed form, without bounds checks or accounting."""
        x = np.asarray(x, dtype=np.float64)
        dx = x - self.center
        p = self.base_power + float(np.dot(self.weights, dx * dx))
        if self.coupling:
            p += self.coupling * float(np.dot(dx[:-1], dx[1:]))
        if self.amplitude:
            p += self.amplitude * float(np.sum(np.sin(self.frequencies * x)))
        return p

    def evaluate(self, x) -> float:
        x = np.asarray(x, dtype=np.float64).ravel()
        if x.shape[0] != self.bounds.dim:
            raise InputError(f"expected a {self.bounds.dim}-d point, got {x.shape[0]}")
        if not np.all(np.isfinite(x)) or not self.bounds.contains(x):
            raise InputError(f"design point outside bounds: {x.tolist()}")
        start = time.perf_counter()
        value = self.power(x)
        if self.stats.per_call_latency > 0:
            time.sleep(self.stats.per_call_latency)
        elapsed = time.perf_counter() - start
        with self._lock:
            self.stats.call_count += 1
            self.stats.total_wall_time += elapsed
        return value

    def __call__(self, x) -> float:
        return self.evaluate(x)

    @property
    def minimum(self):
        """Known optimum, only valid with no coupling or sine term."""
        if self.coupling or self.amplitude:
            return None
        return self.base_power


def _vector(value, d, fill, name, default=None):
    if value is None:
        value = default if default is not None else (fill,) * d
    arr = np.asarray(value, dtype=np.float64).ravel()
    if arr.shape[0] == 1:
        arr = np.full(d, arr[0])
    if arr.shape[0] != d:
        raise InputError(f"{name} has length {arr.shape[0]}, expected {d}")
    return arr
