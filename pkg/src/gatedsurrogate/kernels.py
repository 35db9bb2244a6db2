"""Matérn covariance functions with a compiled core and a numpy fallback.

The compiled extension ``_ckernels`` is used when it is importable. Set
``GATEDSURROGATE_BACKEND=python`` to force the numpy implementation.
"""
import os
from dataclasses import dataclass

import numpy as np

from . import _pykernels
from .errors import InputError

SUPPORTED_NU = (0.5, 1.5, 2.5)


def _load_backend():
    if os.environ.get("GATEDSURROGATE_BACKEND", "").lower() == "python":
        return _pykernels, "python"
    try:
        from . import _ckernels
    except ImportError:
        return _pykernels, "python"
    return _ckernels, "cython"


_impl, BACKEND = _load_backend()


@dataclass(frozen=True)
class KernelParams:
    """Hyperparameters of an isotropic Matérn kernel.

    ``length_scale`` acts on inputs normalized to the unit hypercube and the
    two variances on standardized outputs.
    """

    nu: float = 0.5
    length_scale: float = 0.75
    signal_variance: float = 1.0
    noise_variance: float = 1e-6

    def __post_init__(self):
        if self.nu not in SUPPORTED_NU:
            raise InputError(f"nu must be one of {SUPPORTED_NU}, got {self.nu}")
        if not self.length_scale > 0:
            raise InputError(f"length_scale must be > 0, got {self.length_scale}")
        if not self.signal_variance > 0:
            raise InputError(f"signal_variance must be > 0, got {self.signal_variance}")
        if not self.noise_variance >= 1e-10:
            raise InputError(f"noise_variance must be >= 1e-10, got {self.noise_variance}")

    def with_noise(self, noise_variance):
        return KernelParams(self.nu, self.length_scale, self.signal_variance, noise_variance)

    def as_dict(self):
        return {
            "nu": self.nu,
            "length_scale": self.length_scale,
            "signal_variance": self.signal_variance,
            "noise_variance": self.noise_variance,
        }


def _as_2d(x):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise InputError(f"expected a point or a 2-d array of points, got shape {x.shape}")
    return x


def kernel_eval(a, b, p: KernelParams) -> float:
    """Covariance between two single points."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise InputError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    return float(cross_cov(a, b, p)[0, 0])


def cross_cov(a, b, p: KernelParams) -> np.ndarray:
    """Matrix ``K[i, j] = k(a_i, b_j)``."""
    a, b = _as_2d(a), _as_2d(b)
    if a.shape[1] != b.shape[1]:
        raise InputError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    return _impl.cross_cov(a, b, p.nu, p.length_scale, p.signal_variance)


def gram(a, p: KernelParams, noise_variance=None) -> np.ndarray:
    """``K(a, a) + noise * I``; noise defaults to ``p.noise_variance``."""
    noise = p.noise_variance if noise_variance is None else noise_variance
    return _impl.gram(_as_2d(a), p.nu, p.length_scale, p.signal_variance, noise)
