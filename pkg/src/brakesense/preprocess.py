"""Signal chain: FIR band-pass filtering, epoch extraction, artifact
rejection, and baseline correction.

Defaults mirror the acquisition setup this toolkit models: 1-45 Hz band-pass,
epochs from -3000 ms to +1000 ms around the pedal press, 300 uV rejection,
baseline over the first 500 ms of the epoch window.
"""

from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve, firwin

from .core import (ClassLabel, ContinuousRecording, Epoch, EpochSet,
                   EventKind, make_rng)

__all__ = [
    "FirFilter",
    "EpochWindowSpec",
    "design_bandpass",
    "apply_filter",
    "extract_brake_epochs",
    "extract_no_brake_epochs",
    "reject_artifacts",
    "baseline_correct",
    "InsufficientDataError",
]


class InsufficientDataError(ValueError):
    """Not enough eligible data to satisfy a request."""


def _ms_to_n(ms, rate):
    return int(round(ms * rate / 1000.0))


@dataclass(frozen=True)
class FirFilter:
    """Linear-phase FIR filter: symmetric taps plus the design parameters."""

    coefficients: np.ndarray
    design: tuple  # (low_hz, high_hz, num_taps, sample_rate)

    def __post_init__(self):
        coeffs = np.asarray(self.coefficients, dtype=np.float64)
        object.__setattr__(self, "coefficients", coeffs)
        if len(coeffs) % 2 != 1:
            raise ValueError("FIR filter must have an odd tap count")
        if not np.allclose(coeffs, coeffs[::-1], atol=1e-12):
            raise ValueError("FIR taps must be symmetric (linear phase)")

    @property
    def num_taps(self):
        return len(self.coefficients)

    @property
    def group_delay(self):
        return (self.num_taps - 1) // 2


def design_bandpass(low_hz, high_hz, sample_rate, num_taps=401):
    """Windowed-sinc (Hamming) band-pass filter.

    Parameters
    ----------
    low_hz, high_hz : float
        Band edges; must satisfy 0 < low < high < sample_rate / 2.
    sample_rate : float
        Sampling rate in Hz.
    num_taps : int
        Filter length, odd. 401 taps give adequate transition width for a
        1 Hz low edge at 200 Hz.
    """
    if num_taps % 2 != 1:
        raise ValueError("num_taps must be odd")
    if not (0.0 < low_hz < high_hz < sample_rate / 2.0):
        raise ValueError(
            f"band edges must satisfy 0 < {low_hz} < {high_hz} < "
            f"{sample_rate / 2}")
    taps = firwin(num_taps, [low_hz, high_hz], pass_zero=False,
                  window="hamming", fs=sample_rate)
    return FirFilter(taps, (float(low_hz), float(high_hz), int(num_taps),
                            float(sample_rate)))


def apply_filter(rec, filt):
    """Zero-phase application of a linear-phase FIR filter.

    A single forward pass is compensated by the (num_taps-1)/2 sample group
    delay; edges are handled by reflection padding, so the output has the
    same length as the input. Events pass through unchanged.
    """
    d = filt.group_delay
    x = rec.samples.astype(np.float64)
    if x.shape[1] < filt.num_taps:
        raise ValueError(
            f"recording of {x.shape[1]} samples is shorter than the "
            f"{filt.num_taps}-tap filter")
    padded = np.pad(x, ((0, 0), (d, d)), mode="reflect")
    y = fftconvolve(padded, filt.coefficients[np.newaxis, :], mode="valid")
    return ContinuousRecording(rec.montage, rec.sample_rate,
                               y.astype(np.float32), rec.events)


@dataclass(frozen=True)
class EpochWindowSpec:
    """Epoching parameters (all in ms except the amplitude threshold)."""

    pre_ms: float = 3000.0
    post_ms: float = 1000.0
    baseline_ms: float = 500.0
    artifact_threshold_uv: float = 300.0
    no_brake_min_separation_ms: float = 3000.0
    no_brake_window_ms: float = 4000.0

    def __post_init__(self):
        vals = (self.pre_ms, self.post_ms, self.baseline_ms,
                self.artifact_threshold_uv, self.no_brake_min_separation_ms,
                self.no_brake_window_ms)
        if any(v <= 0 for v in vals):
            raise ValueError("all window parameters must be positive")
        if self.baseline_ms > self.pre_ms + self.post_ms:
            raise ValueError("baseline longer than the epoch window")


def extract_brake_epochs(rec, spec=EpochWindowSpec()):
    """Cut one labeled epoch per pedal press.

    Epochs run from pre_ms before to post_ms after the press. Presses whose
    window does not fit inside the recording are skipped and counted.

    Returns
    -------
    (EpochSet, int)
        The extracted epochs and the number of skipped presses.
    """
    rate = rec.sample_rate
    n_epoch = _ms_to_n(spec.pre_ms + spec.post_ms, rate)
    t0_offset = int(round(spec.pre_ms))
    epochs = []
    skipped = 0
    for ev in rec.events:
        if ev.kind is not EventKind.BRAKE_PEDAL_PRESS:
            continue
        start = _ms_to_n(ev.t_ms - spec.pre_ms, rate)
        if start < 0 or start + n_epoch > rec.n_samples:
            skipped += 1
            continue
        window = rec.samples[:, start:start + n_epoch]
        epochs.append(Epoch(ev.label, np.array(window), t0_offset))
    return EpochSet(rec.montage, rate, tuple(epochs)), skipped


def _eligible_no_brake_starts(rec, spec):
    """Sample indices where a no-braking window keeps the required distance
    from every logged event."""
    rate = rec.sample_rate
    w = _ms_to_n(spec.no_brake_window_ms, rate)
    n_starts = rec.n_samples - w + 1
    if n_starts <= 0:
        return np.empty(0, dtype=np.int64), w
    ok = np.ones(n_starts, dtype=bool)
    w_ms = w * 1000.0 / rate
    sep = spec.no_brake_min_separation_ms
    for ev in rec.events:
        # allowed: start_ms >= ev + sep, or start_ms + w_ms <= ev - sep
        lo_ms = ev.t_ms - sep - w_ms
        hi_ms = ev.t_ms + sep
        lo = int(np.floor(lo_ms * rate / 1000.0 + 1e-9)) + 1
        hi = int(np.ceil(hi_ms * rate / 1000.0 - 1e-9))
        ok[max(lo, 0):min(hi, n_starts)] = False
    return np.flatnonzero(ok), w


def extract_no_brake_epochs(rec, spec, count, seed):
    """Randomly place ``count`` no-braking windows away from all events.

    Window positions are drawn uniformly without replacement from every
    start position whose window stays at least no_brake_min_separation_ms
    from every event in the log. Deterministic given ``seed``.
    """
    if count <= 0:
        raise ValueError("count must be positive")
    starts, w = _eligible_no_brake_starts(rec, spec)
    if len(starts) < count:
        raise InsufficientDataError(
            f"requested {count} no-braking windows but only {len(starts)} "
            f"eligible positions exist (short by {count - len(starts)})")
    rng = make_rng(seed)
    chosen = np.sort(rng.choice(starts, size=count, replace=False))
    t0_offset = int(round(spec.pre_ms))
    epochs = tuple(
        Epoch(ClassLabel.NO_BRAKING, np.array(rec.samples[:, s:s + w]),
              t0_offset)
        for s in chosen)
    return EpochSet(rec.montage, rec.sample_rate, epochs)


def reject_artifacts(epochset, threshold_uv=300.0):
    """Drop epochs containing any sample strictly above the threshold.

    The comparison is |value| > threshold (absolute amplitude, strict), so a
    sample at exactly the threshold survives. Order of survivors is
    preserved.

    Returns
    -------
    (EpochSet, int)
        Surviving epochs and the number rejected.
    """
    if threshold_uv <= 0:
        raise ValueError("threshold must be positive")
    keep = [ep for ep in epochset.epochs
            if not np.any(np.abs(ep.samples) > threshold_uv)]
    survivors = EpochSet(epochset.montage, epochset.sample_rate, tuple(keep),
                         epochset.provenance)
    return survivors, len(epochset.epochs) - len(keep)


def baseline_correct(epochset, baseline_ms=500.0):
    """Subtract each channel's mean over the first ``baseline_ms`` of the
    epoch from the whole channel. Output samples are float64."""
    rate = epochset.sample_rate
    n_base = _ms_to_n(baseline_ms, rate)
    if epochset.epochs and n_base > epochset.n_samples:
        raise ValueError("baseline window longer than the epoch")
    corrected = []
    for ep in epochset.epochs:
        x = ep.samples.astype(np.float64)
        x = x - x[:, :n_base].mean(axis=1, keepdims=True)
        corrected.append(Epoch(ep.label, x, ep.t0_offset_ms))
    return EpochSet(epochset.montage, rate, tuple(corrected),
                    epochset.provenance)
