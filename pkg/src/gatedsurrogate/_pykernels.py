"""Pure numpy fallback for the Matérn covariance kernels."""
import numpy as np

SQRT3 = np.sqrt(3.0)
SQRT5 = np.sqrt(5.0)


def matern(t, nu):
    if nu == 0.5:
        return np.exp(-t)
    if nu == 1.5:
        return (1.0 + SQRT3 * t) * np.exp(-SQRT3 * t)
    if nu == 2.5:
        return (1.0 + SQRT5 * t + 5.0 * t * t / 3.0) * np.exp(-SQRT5 * t)
    raise ValueError(f"unsupported nu={nu}")


def _distances(a, b):
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def cross_cov(a, b, nu, length_scale, signal_variance):
    if a.shape[1] != b.shape[1]:
        raise ValueError("dimension mismatch")
    return signal_variance * matern(_distances(a, b) / length_scale, nu)


def gram(a, nu, length_scale, signal_variance, noise_variance):
    k = cross_cov(a, a, nu, length_scale, signal_variance)
    # exact symmetry and an exact diagonal, as in the compiled path
    k = np.tril(k, -1)
    k = k + k.T
    k[np.diag_indices_from(k)] = signal_variance + noise_variance
    return k
