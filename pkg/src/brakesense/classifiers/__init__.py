"""Three window decoders behind one fit/predict contract.

All classifiers consume (n, channels, time) float windows in microvolts and
integer class labels; fits are deterministic given (data, config, seed).
"""

from dataclasses import dataclass

import numpy as np

from .cnn import (CnnConfig, CnnModel, NumericalError, cnn_loss,
                  cnn_loss_and_grads, cnn_predict, fit_cnn, init_cnn)
from .csp import (CspLdaModel, csp_features, csp_fit, csp_lda_fit,
                  csp_lda_predict, lda_fit, lda_predict)
from .spd import (RmdmModel, estimate_covariance, geometric_mean,
                  riemannian_distance, rmdm_fit, rmdm_predict)

__all__ = [
    "CLASSIFIER_KINDS",
    "CspLdaConfig",
    "RmdmConfig",
    "CnnConfig",
    "default_config",
    "fit_classifier",
    "predict_classifier",
    "CspLdaModel",
    "RmdmModel",
    "CnnModel",
    "NumericalError",
    "estimate_covariance",
    "riemannian_distance",
    "geometric_mean",
    "rmdm_fit",
    "rmdm_predict",
    "csp_fit",
    "csp_features",
    "csp_lda_fit",
    "csp_lda_predict",
    "lda_fit",
    "lda_predict",
    "fit_cnn",
    "cnn_predict",
    "init_cnn",
    "cnn_loss",
    "cnn_loss_and_grads",
]

CLASSIFIER_KINDS = ("csp-lda", "rmdm", "cnn")


@dataclass(frozen=True)
class CspLdaConfig:
    k_pairs: int = 3
    shrinkage: float = 0.1


@dataclass(frozen=True)
class RmdmConfig:
    shrinkage: float = 0.1
    tol: float = 1e-8
    max_iter: int = 50


def default_config(kind):
    if kind == "csp-lda":
        return CspLdaConfig()
    if kind == "rmdm":
        return RmdmConfig()
    if kind == "cnn":
        return CnnConfig()
    raise ValueError(
        f"unknown classifier {kind!r}; valid kinds: {CLASSIFIER_KINDS}")


def fit_classifier(kind, windows, labels, config=None, sample_rate=200,
                   seed=0):
    """Fit one of the three decoders on training windows."""
    if config is None:
        config = default_config(kind)
    if kind == "csp-lda":
        return csp_lda_fit(windows, labels, k_pairs=config.k_pairs,
                           shrinkage=config.shrinkage)
    if kind == "rmdm":
        return rmdm_fit(windows, labels, shrinkage=config.shrinkage,
                        tol=config.tol, max_iter=config.max_iter)
    if kind == "cnn":
        return fit_cnn(windows, labels, config=config,
                       sample_rate=sample_rate, seed=seed)
    raise ValueError(
        f"unknown classifier {kind!r}; valid kinds: {CLASSIFIER_KINDS}")


def predict_classifier(model, windows):
    """Predicted labels for (n, channels, time) windows."""
    if isinstance(model, CspLdaModel):
        return csp_lda_predict(model, windows)
    if isinstance(model, RmdmModel):
        labels, _ = rmdm_predict(model, windows)
        return labels
    if isinstance(model, CnnModel):
        labels, _ = cnn_predict(model, windows)
        return labels
    raise TypeError(f"not a fitted model: {type(model)!r}")
