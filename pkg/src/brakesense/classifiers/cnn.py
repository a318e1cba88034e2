"""Compact convolutional network for two-class EEG window decoding.

The architecture follows the standard compact EEG-decoding design: a
temporal convolution bank, a depthwise spatial convolution, and a separable
temporal convolution, each followed by batch normalization, with ELU
activations, average pooling, dropout, and a softmax readout.

Forward and backward passes are written directly in numpy (float64 by
default) so gradients are exact and checkable against finite differences.
Training is plain mini-batch SGD with momentum on the cross-entropy loss,
fully deterministic given a seed.
"""

from dataclasses import dataclass, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.fft import irfft, next_fast_len, rfft

from ..core import make_rng, split_seed

__all__ = [
    "CnnConfig",
    "CnnModel",
    "NumericalError",
    "init_cnn",
    "fit_cnn",
    "cnn_predict",
    "cnn_loss_and_grads",
    "cnn_loss",
]

BN_EPS = 1e-5
BN_MOMENTUM = 0.01  # running stats move this fraction toward batch stats


class NumericalError(RuntimeError):
    """Raised when training produces a non-finite loss."""


@dataclass(frozen=True)
class CnnConfig:
    """Architecture and training hyperparameters.

    ``kernel_length`` of None resolves to sample_rate // 2 at fit time.
    ``standardize`` picks the input normalization: "train-channel" scales
    every window by per-channel statistics of the training set (preserves
    between-window variance structure), "per-epoch" standardizes each
    window by its own channel statistics, "none" feeds raw microvolts.
    """

    n_temporal_filters: int = 8      # F1
    depth_multiplier: int = 2        # D
    n_separable_filters: int = 16    # F2
    kernel_length: "int | None" = None
    separable_kernel_length: int = 16
    pool1: int = 4
    pool2: int = 8
    dropout: float = 0.25
    epochs: int = 100
    batch_size: int = 16
    learning_rate: float = 1e-3
    momentum: float = 0.9
    weight_decay: float = 0.0     # L2 penalty; 0 keeps plain cross-entropy
    depthwise_max_norm: float = 1.0   # per-filter norm cap, 0 disables
    dense_max_norm: float = 0.25      # per-row norm cap, 0 disables
    standardize: str = "train-channel"
    dtype: str = "float64"

    def __post_init__(self):
        if self.standardize not in ("train-channel", "per-epoch", "none"):
            raise ValueError(f"unknown standardize {self.standardize!r}")


@dataclass(frozen=True)
class CnnModel:
    classes: tuple
    config: CnnConfig
    n_channels: int
    n_samples: int
    kernel_length: int
    params: dict          # name -> ndarray
    running: dict         # batchnorm running mean/var per stage
    norm_mean: np.ndarray = None   # (C, 1) train-channel normalization
    norm_std: np.ndarray = None
    history: tuple = ()   # mean training loss per epoch
    seed: int = 0


# Parameter tensor names in a fixed order (serialization + gradient checks).
PARAM_NAMES = (
    "w_temporal",
    "bn1_gamma", "bn1_beta",
    "w_depth",
    "bn2_gamma", "bn2_beta",
    "w_sep", "w_point",
    "bn3_gamma", "bn3_beta",
    "w_dense", "b_dense",
)


def _glorot(rng, shape, fan_in, fan_out, dtype):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def _band_filter_bank(rng, n_filters, k, sample_rate, dtype):
    """Hann-windowed cosine bank, log-spaced center frequencies.

    Starting the temporal stage from band-selective filters gives the
    optimizer immediate access to band-power features, which random init
    reaches only after many epochs on small EEG training sets.
    """
    t = (np.arange(k) - (k - 1) / 2.0) / sample_rate
    window = 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(k) / (k - 1))
    lo, hi = 2.0, min(40.0, 0.45 * sample_rate)
    centers = np.exp(np.linspace(np.log(lo), np.log(hi), n_filters))
    phases = rng.uniform(0.0, 2.0 * np.pi, n_filters)
    bank = np.stack([window * np.cos(2.0 * np.pi * fc * t + ph)
                     for fc, ph in zip(centers, phases)])
    bank *= np.sqrt(2.0 / k) / np.linalg.norm(bank, axis=1, keepdims=True)
    return bank.astype(dtype)


def init_cnn(config, n_channels, n_samples, sample_rate, classes, seed):
    """Fresh model with Glorot-uniform weights and identity batch norms."""
    cfg = config
    k = cfg.kernel_length if cfg.kernel_length is not None else sample_rate // 2
    if k < 1 or k > n_samples:
        raise ValueError(f"temporal kernel of {k} does not fit {n_samples} "
                         "samples")
    f1, d, f2 = cfg.n_temporal_filters, cfg.depth_multiplier, \
        cfg.n_separable_filters
    m = f1 * d
    t1 = (n_samples // cfg.pool1)
    t2 = t1 // cfg.pool2
    if t2 < 1:
        raise ValueError("input too short for the pooling pyramid")
    dtype = np.dtype(cfg.dtype)
    rng = make_rng(seed)
    params = {
        "w_temporal": _band_filter_bank(rng, f1, k, sample_rate, dtype),
        "bn1_gamma": np.ones(f1, dtype=dtype),
        "bn1_beta": np.zeros(f1, dtype=dtype),
        "w_depth": _glorot(rng, (f1, d, n_channels), n_channels,
                           n_channels * d, dtype),
        "bn2_gamma": np.ones(m, dtype=dtype),
        "bn2_beta": np.zeros(m, dtype=dtype),
        "w_sep": _glorot(rng, (m, cfg.separable_kernel_length),
                         cfg.separable_kernel_length,
                         cfg.separable_kernel_length, dtype),
        "w_point": _glorot(rng, (f2, m), m, f2, dtype),
        "bn3_gamma": np.ones(f2, dtype=dtype),
        "bn3_beta": np.zeros(f2, dtype=dtype),
        "w_dense": _glorot(rng, (len(classes), f2 * t2), f2 * t2,
                           len(classes), dtype),
        "b_dense": np.zeros(len(classes), dtype=dtype),
    }
    running = {
        "bn1_mean": np.zeros(f1, dtype=dtype),
        "bn1_var": np.ones(f1, dtype=dtype),
        "bn2_mean": np.zeros(m, dtype=dtype),
        "bn2_var": np.ones(m, dtype=dtype),
        "bn3_mean": np.zeros(f2, dtype=dtype),
        "bn3_var": np.ones(f2, dtype=dtype),
    }
    # identity normalization until fit computes training statistics
    return CnnModel(tuple(classes), cfg, n_channels, n_samples, int(k),
                    params, running,
                    norm_mean=np.zeros((n_channels, 1), dtype=dtype),
                    norm_std=np.ones((n_channels, 1), dtype=dtype),
                    seed=int(seed))


def _standardize_per_epoch(x):
    mu = x.mean(axis=-1, keepdims=True)
    sd = x.std(axis=-1, keepdims=True)
    return (x - mu) / (sd + 1e-7)


def _train_channel_stats(x):
    """Per-channel mean/std over all training windows and samples."""
    mu = x.mean(axis=(0, 2))[:, np.newaxis]
    sd = x.std(axis=(0, 2))[:, np.newaxis] + 1e-7
    return mu, sd


# ---------------------------------------------------------------------------
# Temporal convolution via FFT ("same" padding, correlation orientation)
# ---------------------------------------------------------------------------

def _conv_fft_size(t, k):
    """Transform length for the "same" temporal convolution.

    Full linear convolution needs t + k - 1 points, but only the slice
    starting at lo = k - 1 - (k-1)//2 is extracted, so any length
    >= t + lo leaves both the sliced output and every kernel lag of the
    weight-gradient correlation untouched by circular wrap-around. A power
    of two is preferred when that allows one.
    """
    lo = k - 1 - (k - 1) // 2
    need = t + k - 1
    p2 = 1 << (need - 1).bit_length()
    if p2 // 2 >= t + lo:
        return p2 // 2
    return min(p2, next_fast_len(need))


def _temporal_conv_forward(x, w, xf=None, size=None):
    """x (N, C, T) with kernel bank w (F, k) -> (N, F, C, T).

    ``xf``/``size`` allow reusing input spectra across batches.
    """
    n, c, t = x.shape
    f, k = w.shape
    pad_l = (k - 1) // 2
    if size is None:
        size = _conv_fft_size(t, k)
    if xf is None:
        xf = rfft(x, size, axis=-1)
    wf = rfft(w[:, ::-1], size, axis=-1)
    prod = xf[:, np.newaxis, :, :] * wf[np.newaxis, :, np.newaxis, :]
    full = irfft(prod, size, axis=-1)
    lo = k - 1 - pad_l
    return np.ascontiguousarray(full[..., lo:lo + t], dtype=x.dtype), xf, size


def _temporal_conv_grad_w(xf_conj, dy, k, t, size, dtype):
    """Gradient of the kernel bank given conjugated input spectra."""
    pad_l = (k - 1) // 2
    dyf = rfft(dy, size, axis=-1)
    # correlate input with output gradient, accumulated over batch/channels;
    # sum conj(X) * dY and conjugate once at the end
    acc = np.einsum("ncl,nfcl->fl", xf_conj, dyf).conj()
    corr = irfft(acc, size, axis=-1)
    lags = (np.arange(k) - pad_l) % size
    return np.ascontiguousarray(corr[:, lags], dtype=dtype)


# ---------------------------------------------------------------------------
# Small layers
# ---------------------------------------------------------------------------

def _channel_dot(a, b):
    """sum over all axes but 1 of a * b, without a materialized product."""
    spec = "nfct,nfct->f" if a.ndim == 4 else "nft,nft->f"
    return np.einsum(spec, a, b)


def _bn_normalize_inplace(x, running_mean, running_var, axes, train):
    """Normalize x to zero mean / unit variance per feature map, in place.

    Returns (xhat, inv, (new_running_mean, new_running_var)); the affine
    gamma/beta step is left to the caller so it can be folded into the next
    linear stage.
    """
    shape = [1] * x.ndim
    shape[1] = x.shape[1]
    if train:
        mean = x.mean(axis=axes, keepdims=True)
        x -= mean
        m = x.size // x.shape[1]
        var = _channel_dot(x, x) / m
        inv = (1.0 / np.sqrt(var + BN_EPS)).reshape(shape).astype(x.dtype)
        x *= inv
        unbiased = var * m / max(m - 1, 1)
        new_mean = (1 - BN_MOMENTUM) * running_mean \
            + BN_MOMENTUM * mean.reshape(-1)
        new_var = (1 - BN_MOMENTUM) * running_var + BN_MOMENTUM * unbiased
        return x, inv, (new_mean, new_var)
    inv = (1.0 / np.sqrt(running_var.reshape(shape) + BN_EPS)) \
        .astype(x.dtype)
    x -= running_mean.reshape(shape).astype(x.dtype)
    x *= inv
    return x, inv, (running_mean, running_var)


def _bn_backward_from_xhat(dxhat, xhat, inv, axes, train):
    """Gradient through the normalization given dL/dxhat, in place."""
    if not train:
        dxhat *= inv
        return dxhat
    m = dxhat.size // dxhat.shape[1]
    s1 = dxhat.sum(axis=axes, keepdims=True)
    s2 = (_channel_dot(dxhat, xhat) / m).reshape(inv.shape)
    dxhat -= s1 / m
    dxhat -= xhat * s2
    dxhat *= inv
    return dxhat


def _bn_forward(x, gamma, beta, running_mean, running_var, axes, train):
    shape = [1] * x.ndim
    shape[1] = x.shape[1]
    g = gamma.reshape(shape)
    b = beta.reshape(shape)
    if train:
        mean = x.mean(axis=axes, keepdims=True)
        xhat = x - mean
        m = x.size // x.shape[1]
        var = _channel_dot(xhat, xhat) / m
        inv = (1.0 / np.sqrt(var + BN_EPS)).reshape(shape)
        xhat *= inv
        unbiased = var * m / max(m - 1, 1)
        new_mean = (1 - BN_MOMENTUM) * running_mean \
            + BN_MOMENTUM * mean.reshape(-1)
        new_var = (1 - BN_MOMENTUM) * running_var + BN_MOMENTUM * unbiased
        out = xhat * g
        out += b
        return out, (xhat, inv, g, axes), (new_mean, new_var)
    inv = 1.0 / np.sqrt(running_var.reshape(shape) + BN_EPS)
    xhat = (x - running_mean.reshape(shape)) * inv
    out = xhat * g
    out += b
    return out, (xhat, inv, g, axes), (running_mean, running_var)


def _bn_backward(dy, cache, train):
    xhat, inv, g, axes = cache
    dgamma = _channel_dot(dy, xhat)
    dbeta = dy.sum(axis=axes).reshape(-1)
    dxhat = dy * g
    if not train:
        dxhat *= inv
        return dxhat, dgamma, dbeta
    m = dy.size // dy.shape[1]
    shape = inv.shape
    s1 = dxhat.sum(axis=axes, keepdims=True)
    s2 = (_channel_dot(dxhat, xhat) / m).reshape(shape)
    dxhat -= s1 / m
    dxhat -= xhat * s2
    dxhat *= inv
    return dxhat, dgamma, dbeta


def _elu_forward(x):
    neg = np.exp(np.minimum(x, 0.0)) - 1.0
    out = np.where(x > 0.0, x, neg)
    return out, (x > 0.0, neg)


def _elu_backward(dy, cache):
    pos, neg = cache
    return dy * np.where(pos, 1.0, neg + 1.0)


def _avgpool_forward(x, p):
    t = x.shape[-1]
    t_out = t // p
    y = x[..., :t_out * p].reshape(*x.shape[:-1], t_out, p).mean(axis=-1)
    return y, (x.shape, p)


def _avgpool_backward(dy, cache):
    shape, p = cache
    dx = np.zeros(shape, dtype=dy.dtype)
    t_out = dy.shape[-1]
    dx[..., :t_out * p] = np.repeat(dy / p, p, axis=-1)
    return dx


def _dropout_mask(rng, shape, p, dtype):
    if rng is None or p <= 0.0:
        return None
    return (rng.random(shape) >= p).astype(dtype) / (1.0 - p)


# ---------------------------------------------------------------------------
# Full network forward / backward
# ---------------------------------------------------------------------------

def _forward(params, running, cfg, kernel_length, x, train, drop_rng,
             xf=None, xf_conj=None):
    """Returns (logits, cache, new_running)."""
    dtype = x.dtype
    new_running = {}

    y1, xf, fft_size = _temporal_conv_forward(x, params["w_temporal"],
                                              xf=xf)
    # normalize temporal maps in place; the gamma/beta affine is folded
    # into the depthwise contraction below (it is constant per map, so it
    # commutes with the channel sum)
    xhat1, inv1, (new_running["bn1_mean"], new_running["bn1_var"]) = \
        _bn_normalize_inplace(y1, running["bn1_mean"], running["bn1_var"],
                              (0, 2, 3), train)

    # depthwise spatial collapse: (N, F1, C, T) x (F1, D, C) -> (N, F1*D, T)
    wd = params["w_depth"]
    g1 = params["bn1_gamma"]
    b1 = params["bn1_beta"]
    n, f1, c, t = xhat1.shape
    d = wd.shape[1]
    xt = np.ascontiguousarray(xhat1.transpose(1, 2, 0, 3)).reshape(f1, c,
                                                                   n * t)
    zt = np.matmul(wd, xt)
    swd = wd.sum(axis=2)
    z4 = zt.reshape(f1, d, n, t) * g1[:, None, None, None] \
        + (b1[:, None] * swd)[:, :, None, None]
    z = np.ascontiguousarray(z4.transpose(2, 0, 1, 3)).reshape(n, f1 * d, t)
    zbn, bn2_cache, (new_running["bn2_mean"], new_running["bn2_var"]) = \
        _bn_forward(z, params["bn2_gamma"], params["bn2_beta"],
                    running["bn2_mean"], running["bn2_var"], (0, 2), train)
    a2, elu2_cache = _elu_forward(zbn)
    p2, pool1_cache = _avgpool_forward(a2, cfg.pool1)
    mask1 = _dropout_mask(drop_rng, p2.shape, cfg.dropout if train else 0.0,
                          dtype)
    h2 = p2 if mask1 is None else p2 * mask1

    # separable: depthwise temporal then pointwise
    ws = params["w_sep"]
    ks = ws.shape[1]
    pad_l = (ks - 1) // 2
    hpad = np.pad(h2, ((0, 0), (0, 0), (pad_l, ks - 1 - pad_l)))
    view = sliding_window_view(hpad, ks, axis=-1)
    u = np.einsum("nmtk,mk->nmt", view, ws)
    v = np.einsum("om,nmt->not", params["w_point"], u)
    vbn, bn3_cache, (new_running["bn3_mean"], new_running["bn3_var"]) = \
        _bn_forward(v, params["bn3_gamma"], params["bn3_beta"],
                    running["bn3_mean"], running["bn3_var"], (0, 2), train)
    a3, elu3_cache = _elu_forward(vbn)
    p3, pool2_cache = _avgpool_forward(a3, cfg.pool2)
    mask2 = _dropout_mask(drop_rng, p3.shape, cfg.dropout if train else 0.0,
                          dtype)
    h3 = p3 if mask2 is None else p3 * mask2

    flat = h3.reshape(n, -1)
    logits = flat @ params["w_dense"].T + params["b_dense"]
    cache = dict(xf=xf, xf_conj=xf_conj, fft_size=fft_size, t=t, n=n,
                 xhat1=xhat1, inv1=inv1, xt=xt, zt=zt, swd=swd,
                 bn2=bn2_cache, elu2=elu2_cache, pool1=pool1_cache,
                 mask1=mask1, h2=h2, view_shape=hpad.shape, pad_l=pad_l,
                 u=u, bn3=bn3_cache, elu3=elu3_cache, pool2=pool2_cache,
                 mask2=mask2, flat=flat, train=train)
    return logits, cache, new_running


def _backward(params, cfg, kernel_length, cache, dlogits):
    grads = {}
    train = cache["train"]
    dtype = dlogits.dtype

    grads["w_dense"] = dlogits.T @ cache["flat"]
    grads["b_dense"] = dlogits.sum(axis=0)
    dflat = dlogits @ params["w_dense"]
    n = dflat.shape[0]
    f2 = params["bn3_gamma"].shape[0]
    dh3 = dflat.reshape(n, f2, -1)
    if cache["mask2"] is not None:
        dh3 = dh3 * cache["mask2"]
    da3 = _avgpool_backward(dh3, cache["pool2"])
    dvbn = _elu_backward(da3, cache["elu3"])
    dv, grads["bn3_gamma"], grads["bn3_beta"] = \
        _bn_backward(dvbn, cache["bn3"], train)

    grads["w_point"] = np.einsum("not,nmt->om", dv, cache["u"])
    du = np.einsum("om,not->nmt", params["w_point"], dv)

    ws = params["w_sep"]
    ks = ws.shape[1]
    pad_l = cache["pad_l"]
    hpad = np.zeros(cache["view_shape"], dtype=dtype)
    hpad[:, :, pad_l:pad_l + cache["h2"].shape[-1]] = cache["h2"]
    view = sliding_window_view(hpad, ks, axis=-1)
    grads["w_sep"] = np.einsum("nmt,nmtk->mk", du, view)
    # transpose convolution back to the block-2 output
    dupad = np.pad(du, ((0, 0), (0, 0), (ks - 1 - pad_l, pad_l)))
    duview = sliding_window_view(dupad, ks, axis=-1)
    dh2 = np.einsum("nmtk,mk->nmt", duview, ws[:, ::-1])

    if cache["mask1"] is not None:
        dh2 = dh2 * cache["mask1"]
    da2 = _avgpool_backward(dh2, cache["pool1"])
    dzbn = _elu_backward(da2, cache["elu2"])
    dz, grads["bn2_gamma"], grads["bn2_beta"] = \
        _bn_backward(dzbn, cache["bn2"], train)

    wd = params["w_depth"]
    g1 = params["bn1_gamma"]
    b1 = params["bn1_beta"]
    f1, d, c = wd.shape
    t = cache["t"]
    dz4 = dz.reshape(n, f1, d, t)
    dzt = np.ascontiguousarray(dz4.transpose(1, 2, 0, 3)).reshape(f1, d,
                                                                  n * t)
    # gradients through the folded depthwise + bn1 affine
    grads["bn1_gamma"] = np.einsum("fdk,fdk->f", dzt, cache["zt"])
    sdz = dzt.sum(axis=2)
    grads["bn1_beta"] = (sdz * cache["swd"]).sum(axis=1)
    gd = dzt * g1[:, None, None]
    grads["w_depth"] = np.matmul(gd, cache["xt"].transpose(0, 2, 1)) \
        + b1[:, None, None] * sdz[:, :, None]
    dxhat = np.ascontiguousarray(
        np.matmul(wd.transpose(0, 2, 1), gd)
        .reshape(f1, c, n, t).transpose(2, 0, 1, 3))
    dy1 = _bn_backward_from_xhat(dxhat, cache["xhat1"], cache["inv1"],
                                 (0, 2, 3), train)

    xf_conj = cache["xf_conj"]
    if xf_conj is None:
        xf_conj = cache["xf"].conj()
    grads["w_temporal"] = _temporal_conv_grad_w(
        xf_conj, dy1, kernel_length, t, cache["fft_size"], dtype)
    return grads


def _softmax(logits):
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _prepare(model, windows):
    x = np.asarray(windows, dtype=np.dtype(model.config.dtype))
    if x.ndim == 2:
        x = x[np.newaxis]
    if x.shape[1:] != (model.n_channels, model.n_samples):
        raise ValueError(
            f"expected windows of shape (*, {model.n_channels}, "
            f"{model.n_samples}), got {x.shape}")
    mode = model.config.standardize
    if mode == "per-epoch":
        x = _standardize_per_epoch(x)
    elif mode == "train-channel":
        if model.norm_mean is None:
            raise ValueError("model has no training normalization stats")
        x = (x - model.norm_mean.astype(x.dtype)) \
            / model.norm_std.astype(x.dtype)
    return x


def cnn_loss_and_grads(model, windows, labels, drop_rng=None, train=True):
    """Cross-entropy loss and exact parameter gradients for one batch.

    Dropout is off unless ``drop_rng`` is given; batch statistics are used
    when ``train`` is True. Running batch-norm stats are not updated.
    """
    x = _prepare(model, windows)
    y01 = _encode_labels(model.classes, labels)
    logits, cache, _ = _forward(model.params, model.running, model.config,
                                model.kernel_length, x, train, drop_rng)
    probs = _softmax(logits)
    n = len(x)
    loss = -np.log(probs[np.arange(n), y01] + 1e-300).mean()
    dlogits = probs.copy()
    dlogits[np.arange(n), y01] -= 1.0
    dlogits /= n
    grads = _backward(model.params, model.config, model.kernel_length,
                      cache, dlogits.astype(x.dtype))
    return float(loss), grads


def cnn_loss(model, windows, labels, train=True):
    """Loss only (used by finite-difference oracles)."""
    x = _prepare(model, windows)
    y01 = _encode_labels(model.classes, labels)
    logits, _, _ = _forward(model.params, model.running, model.config,
                            model.kernel_length, x, train, None)
    probs = _softmax(logits)
    n = len(x)
    return float(-np.log(probs[np.arange(n), y01] + 1e-300).mean())


def _apply_max_norms(params, cfg):
    """Project the spatial and dense weights onto their norm balls."""
    if cfg.depthwise_max_norm > 0.0:
        w = params["w_depth"]
        norms = np.linalg.norm(w, axis=2, keepdims=True)
        np.multiply(w, np.minimum(1.0, cfg.depthwise_max_norm
                                  / np.maximum(norms, 1e-12)), out=w)
    if cfg.dense_max_norm > 0.0:
        w = params["w_dense"]
        norms = np.linalg.norm(w, axis=1, keepdims=True)
        np.multiply(w, np.minimum(1.0, cfg.dense_max_norm
                                  / np.maximum(norms, 1e-12)), out=w)


def _encode_labels(classes, labels):
    lookup = {cls: i for i, cls in enumerate(classes)}
    try:
        return np.array([lookup[int(v)] for v in np.asarray(labels).ravel()])
    except KeyError as exc:
        raise ValueError(f"label {exc} not in model classes {classes}")


def fit_cnn(windows, labels, config=CnnConfig(), sample_rate=200, seed=0):
    """Train the network with mini-batch SGD + momentum on cross-entropy.

    Deterministic given (data, config, seed): weight init, batch shuffling,
    and dropout masks all derive from ``seed``.
    """
    windows = np.asarray(windows)
    y = np.asarray(labels)
    classes = tuple(sorted(set(y.tolist())))
    if len(classes) != 2:
        raise ValueError("CNN training expects exactly 2 classes")
    n, c, t = windows.shape
    model = init_cnn(config, c, t, sample_rate, classes,
                     split_seed(seed, 0))
    if config.standardize == "train-channel":
        dtype = np.dtype(config.dtype)
        mu, sd = _train_channel_stats(np.asarray(windows, dtype=dtype))
        model = replace(model, norm_mean=mu, norm_std=sd)
    shuffle_rng = make_rng(split_seed(seed, 1))
    drop_rng = make_rng(split_seed(seed, 2))
    params = {k: v.copy() for k, v in model.params.items()}
    running = {k: v.copy() for k, v in model.running.items()}
    velocity = {k: np.zeros_like(v) for k, v in params.items()}
    x_all = _prepare(model, windows)
    y01 = _encode_labels(classes, y)
    fft_size = _conv_fft_size(t, model.kernel_length)
    xf_all = rfft(x_all, fft_size, axis=-1)
    xfc_all = xf_all.conj()
    cfg = config
    history = []
    for _ in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        epoch_losses = []
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            xb, yb = x_all[idx], y01[idx]
            logits, cache, new_running = _forward(
                params, running, cfg, model.kernel_length, xb, True,
                drop_rng if cfg.dropout > 0 else None,
                xf=xf_all[idx], xf_conj=xfc_all[idx])
            running = new_running
            probs = _softmax(logits)
            loss = -np.log(probs[np.arange(len(xb)), yb] + 1e-300).mean()
            if not np.isfinite(loss):
                raise NumericalError(
                    f"non-finite training loss {loss} at epoch "
                    f"{len(history)}; last finite epoch losses: "
                    f"{history[-3:]}")
            epoch_losses.append(float(loss))
            dlogits = probs
            dlogits[np.arange(len(xb)), yb] -= 1.0
            dlogits /= len(xb)
            grads = _backward(params, cfg, model.kernel_length, cache,
                              dlogits.astype(xb.dtype))
            lr = np.asarray(cfg.learning_rate, dtype=xb.dtype)
            for name in PARAM_NAMES:
                g = grads[name]
                if cfg.weight_decay > 0.0 and name.startswith("w_"):
                    g = g + np.asarray(cfg.weight_decay,
                                       dtype=xb.dtype) * params[name]
                velocity[name] = cfg.momentum * velocity[name] + g
                params[name] = params[name] - lr * velocity[name]
            _apply_max_norms(params, cfg)
        history.append(float(np.mean(epoch_losses)))
    return replace(model, params=params, running=running,
                   history=tuple(history), seed=int(seed))


def cnn_predict(model, windows):
    """Class labels and softmax probabilities for (n, C, T) windows.

    Runs the forward pass in inference mode (running batch-norm statistics,
    no dropout).
    """
    x = _prepare(model, windows)
    logits, _, _ = _forward(model.params, model.running, model.config,
                            model.kernel_length, x, False, None)
    probs = _softmax(logits)
    labels = np.array([model.classes[i] for i in probs.argmax(axis=1)],
                      dtype=np.int64)
    return labels, probs
