"""Geometry of symmetric positive-definite matrices and the minimum
distance to mean classifier built on it.

All operations use the affine-invariant metric. Matrix functions are
computed by eigendecomposition in float64.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh, eigvalsh

logger = logging.getLogger(__name__)

__all__ = [
    "estimate_covariance",
    "riemannian_distance",
    "geometric_mean",
    "RmdmModel",
    "rmdm_fit",
    "rmdm_predict",
]

SYMMETRY_TOL = 1e-10


def _check_spd(a, name="matrix"):
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be square")
    scale = max(1.0, np.abs(a).max())
    if np.abs(a - a.T).max() > SYMMETRY_TOL * scale:
        raise ValueError(f"{name} is not symmetric")
    return a


def _eig_spd(a, name="matrix"):
    w, v = eigh(a)
    if w[0] <= 0.0:
        raise ValueError(
            f"{name} is not positive definite (min eigenvalue {w[0]:.3e})")
    return w, v


def _sym_apply(a, fn):
    """V f(w) V^T for a symmetric matrix with eigendecomposition (w, V)."""
    w, v = _eig_spd(a)
    return (v * fn(w)) @ v.T


def sqrtm(a):
    return _sym_apply(a, np.sqrt)


def invsqrtm(a):
    return _sym_apply(a, lambda w: 1.0 / np.sqrt(w))


def logm(a):
    return _sym_apply(a, np.log)


def expm_sym(a):
    """Matrix exponential of a symmetric (not necessarily definite) matrix."""
    w, v = eigh(np.asarray(a, dtype=np.float64))
    return (v * np.exp(w)) @ v.T


def estimate_covariance(window, shrinkage=0.1):
    """Shrunk sample covariance of a (channels, time) window.

    The window mean is removed per channel, then
    (1 - shrinkage) * X X^T / (T - 1) + shrinkage * (tr/C) * I.
    Shrinkage > 0 guarantees positive definiteness for rank-deficient
    windows.
    """
    if not 0.0 <= shrinkage <= 1.0:
        raise ValueError("shrinkage must be in [0, 1]")
    x = np.asarray(window, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("window contains non-finite samples")
    c, t = x.shape
    if t < 2:
        raise ValueError("window too short for covariance estimation")
    x = x - x.mean(axis=1, keepdims=True)
    s = (x @ x.T) / (t - 1)
    s = 0.5 * (s + s.T)
    if shrinkage == 0.0:
        return s
    mu = np.trace(s) / c
    return (1.0 - shrinkage) * s + shrinkage * mu * np.eye(c)


def _distance_prechecked(a, b):
    """Distance core: generalized eigenvalues of (B, A) give the log
    spectrum of the whitened matrix."""
    w = eigvalsh(b, a)
    if w[0] <= 0.0:
        raise ValueError("matrix is not positive definite")
    return float(np.sqrt(np.sum(np.log(w) ** 2)))


def riemannian_distance(a, b):
    """Affine-invariant distance ||log(A^{-1/2} B A^{-1/2})||_F.

    Computed from the generalized eigenvalues of (B, A), whose logs are the
    eigenvalues of the whitened matrix.
    """
    a = _check_spd(a, "A")
    b = _check_spd(b, "B")
    _eig_spd(a, "A")
    return _distance_prechecked(a, b)


def geometric_mean(mats, tol=1e-8, max_iter=50):
    """Riemannian (Karcher) mean of SPD matrices by fixed-point iteration.

    Starting from the arithmetic mean, iterate
    G <- G^{1/2} exp(mean_i log(G^{-1/2} C_i G^{-1/2})) G^{1/2}
    with unit step until the Frobenius norm of the mean log falls to
    ``tol``.

    Returns
    -------
    (ndarray, bool)
        The mean and a convergence flag. On non-convergence the best
        (smallest-residual) iterate is returned with the flag False.
    """
    mats = [_check_spd(m, f"matrix {i}") for i, m in enumerate(mats)]
    if not mats:
        raise ValueError("need at least one matrix")
    if len(mats) == 1:
        return mats[0].copy(), True
    stack = np.stack(mats)
    g = stack.mean(axis=0)
    best = g
    best_crit = np.inf
    for _ in range(max_iter):
        g12 = sqrtm(g)
        gm12 = invsqrtm(g)
        whitened = gm12 @ stack @ gm12
        j = np.zeros_like(g)
        for wm in whitened:
            j += logm(0.5 * (wm + wm.T))
        j /= len(mats)
        crit = np.linalg.norm(j, ord="fro")
        if crit < best_crit:
            best, best_crit = g, crit
        if crit <= tol:
            return g, True
        g = g12 @ expm_sym(j) @ g12
        g = 0.5 * (g + g.T)
    logger.warning("geometric mean did not converge after %d iterations "
                   "(residual %.3e)", max_iter, best_crit)
    return best, False


@dataclass(frozen=True)
class RmdmModel:
    """Per-class Riemannian geometric means for nearest-mean classification."""

    classes: tuple            # label order; ties resolve toward the first
    class_means: tuple        # SPD matrix per class
    shrinkage: float
    converged: tuple          # per-class convergence flag
    tie_count: int = 0


def rmdm_fit(windows, labels, shrinkage=0.1, tol=1e-8, max_iter=50):
    """Fit per-class geometric means of shrunk window covariances.

    Parameters
    ----------
    windows : (n, channels, time) array
    labels : (n,) integer array, exactly two distinct values
    """
    windows = np.asarray(windows, dtype=np.float64)
    labels = np.asarray(labels)
    classes = tuple(sorted(set(labels.tolist())))
    means = []
    flags = []
    for cls in classes:
        members = windows[labels == cls]
        if len(members) < 2:
            raise ValueError(f"class {cls} has fewer than 2 epochs")
        covs = [estimate_covariance(w, shrinkage) for w in members]
        mean, ok = geometric_mean(covs)
        means.append(mean)
        flags.append(ok)
    return RmdmModel(classes, tuple(means), float(shrinkage), tuple(flags))


def rmdm_predict(model, windows):
    """Assign each window to the class with the nearest geometric mean.

    Distance ties resolve toward the first class in label order.

    Returns
    -------
    (labels, tie_count)
    """
    windows = np.asarray(windows, dtype=np.float64)
    if windows.ndim == 2:
        windows = windows[np.newaxis]
    means = [_check_spd(m, "class mean") for m in model.class_means]
    out = np.empty(len(windows), dtype=np.int64)
    ties = 0
    for i, w in enumerate(windows):
        cov = estimate_covariance(w, model.shrinkage)
        dists = [_distance_prechecked(m, cov) for m in means]
        k = int(np.argmin(dists))  # argmin takes the first on exact ties
        if dists.count(min(dists)) > 1:
            ties += 1
        out[i] = model.classes[k]
    return out, ties
