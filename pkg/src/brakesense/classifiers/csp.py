"""Common spatial patterns with a linear discriminant on log-variance
features.

The spatial filters solve the generalized eigenproblem
S_a v = lambda (S_a + S_b) v on the averaged class covariances; eigenvalues
near 1 or 0 mark directions whose variance ratio discriminates the classes.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, eigh

from .spd import estimate_covariance

logger = logging.getLogger(__name__)

__all__ = [
    "csp_fit",
    "csp_features",
    "lda_fit",
    "lda_predict",
    "CspLdaModel",
    "csp_lda_fit",
    "csp_lda_predict",
]

LDA_RIDGE = 1e-6


def csp_fit(class_a_covs, class_b_covs, k_pairs=3):
    """Fit CSP spatial filters from two lists of class covariances.

    Keeps ``k_pairs`` generalized eigenvectors from each end of the
    spectrum, ordered by |eigenvalue - 0.5| descending. The returned
    filters W satisfy W (S_a + S_b) W^T = I and W S_a W^T diagonal.

    Returns
    -------
    (filters, eigenvalues)
        filters is (2 * k_pairs, channels); eigenvalues are the generalized
        eigenvalues of the kept filters, in the same order.
    """
    if not len(class_a_covs) or not len(class_b_covs):
        raise ValueError("both classes need at least one covariance")
    sa = np.mean(np.asarray(class_a_covs, dtype=np.float64), axis=0)
    sb = np.mean(np.asarray(class_b_covs, dtype=np.float64), axis=0)
    c = sa.shape[0]
    if 2 * k_pairs > c:
        raise ValueError(f"2*k_pairs={2 * k_pairs} exceeds {c} channels")
    total = sa + sb
    try:
        w, v = eigh(sa, total)
    except LinAlgError:
        ridge = 1e-8 * np.trace(total) / c
        logger.warning("composite covariance singular; adding ridge %.3e",
                       ridge)
        total = total + ridge * np.eye(c)
        w, v = eigh(sa, total)
    # k from each spectral end, then sort the kept 2k by |lambda - 0.5|
    idx = np.concatenate([np.arange(c - k_pairs, c)[::-1],
                          np.arange(k_pairs)])
    idx = idx[np.argsort(-np.abs(w[idx] - 0.5), kind="stable")]
    filters = v[:, idx].T
    return filters, w[idx]


def csp_features(window, filters):
    """Normalized log-variance of each spatially filtered projection.

    f_i = log(var(w_i X) / sum_j var(w_j X)).
    """
    x = np.asarray(window, dtype=np.float64)
    proj = filters @ x
    proj = proj - proj.mean(axis=1, keepdims=True)
    var = (proj ** 2).mean(axis=1)
    total = var.sum()
    if total <= 0.0:
        raise ValueError("zero total variance after spatial filtering")
    return np.log(var / total)


def lda_fit(features, labels):
    """Two-class LDA: w = S_w^{-1} (mu_1 - mu_0), boundary at the midpoint.

    The pooled within-class covariance gets a relative ridge of 1e-6 times
    its mean diagonal so near-degenerate feature sets stay solvable.

    Returns
    -------
    (w, b, classes)
        Scores f @ w + b are positive for the second class in label order.
    """
    f = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    classes = tuple(sorted(set(y.tolist())))
    if len(classes) != 2:
        raise ValueError(f"LDA needs exactly 2 classes, got {len(classes)}")
    f0 = f[y == classes[0]]
    f1 = f[y == classes[1]]
    mu0 = f0.mean(axis=0)
    mu1 = f1.mean(axis=0)
    n = len(f)
    scatter = ((f0 - mu0).T @ (f0 - mu0) + (f1 - mu1).T @ (f1 - mu1))
    sw = scatter / max(n - 2, 1)
    ridge = LDA_RIDGE * max(np.mean(np.diag(sw)), np.finfo(float).tiny)
    sw = sw + ridge * np.eye(sw.shape[0])
    w = np.linalg.solve(sw, mu1 - mu0)
    b = -0.5 * float(w @ (mu0 + mu1))
    return w, b, classes


def lda_predict(model, features):
    """Labels and signed scores for a fitted LDA.

    Zero scores (degenerate fits) fall to the first class in label order.
    """
    w, b, classes = model
    f = np.asarray(features, dtype=np.float64)
    scores = f @ w + b
    labels = np.where(scores > 0.0, classes[1], classes[0])
    return labels, scores


@dataclass(frozen=True)
class CspLdaModel:
    classes: tuple
    filters: np.ndarray       # (2 * k_pairs, channels)
    eigenvalues: np.ndarray
    lda_w: np.ndarray
    lda_b: float
    shrinkage: float
    k_pairs: int


def csp_lda_fit(windows, labels, k_pairs=3, shrinkage=0.1):
    """Fit the full CSP + LDA pipeline on (n, channels, time) windows."""
    windows = np.asarray(windows, dtype=np.float64)
    y = np.asarray(labels)
    classes = tuple(sorted(set(y.tolist())))
    if len(classes) != 2:
        raise ValueError("CSP+LDA is a two-class pipeline")
    covs = {cls: [estimate_covariance(w, shrinkage)
                  for w in windows[y == cls]] for cls in classes}
    filters, eigvals = csp_fit(covs[classes[0]], covs[classes[1]], k_pairs)
    feats = np.stack([csp_features(w, filters) for w in windows])
    w, b, lda_classes = lda_fit(feats, y)
    assert lda_classes == classes
    return CspLdaModel(classes, filters, eigvals, w, float(b),
                       float(shrinkage), int(k_pairs))


def csp_lda_predict(model, windows):
    """Predict labels for (n, channels, time) windows."""
    windows = np.asarray(windows, dtype=np.float64)
    if windows.ndim == 2:
        windows = windows[np.newaxis]
    feats = np.stack([csp_features(w, model.filters) for w in windows])
    labels, _ = lda_predict((model.lda_w, model.lda_b, model.classes), feats)
    return labels
