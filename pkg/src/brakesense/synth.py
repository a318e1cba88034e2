"""Synthetic driving-session generator.

Produces continuous 28-channel EEG with a braking event log so the full
pipeline can be exercised without human recordings. Each session combines:

* spatially mixed pink background noise,
* frontal blink artifacts and rare large-amplitude outlier spikes,
* class-conditional brain responses time-locked to every pedal press. Each
  response has an evoked part (deterministic raised-cosine templates whose
  peak amplitudes are the configuration values) and an induced part
  (random-phase narrow-band bursts with the same scalp weighting), because
  phase-locked averages and window covariance both need class structure for
  the downstream decoders to have something real to find.

Event scheduling and reaction times follow the modeled protocol: braking
onsets are spaced uniformly in the configured interval, and emergency
presses trail their brake-light cue by a shifted truncated log-normal
reaction time fitted to the reported response-time percentiles.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.fft import irfft, rfftfreq
from scipy.special import ndtr, ndtri

from .core import (ClassLabel, ContinuousRecording, Event, EventKind,
                   default_montage, make_rng, split_seed)

__all__ = [
    "ScenarioConfig",
    "ReactionTimeModel",
    "ErpTemplateConfig",
    "NoiseConfig",
    "fit_default_rt_model",
    "sample_reaction_time",
    "erp_value",
    "generate_session",
]

# Fitted constants of the shifted truncated log-normal reaction-time model.
# Least-squares over the five reported percentiles (520/660/750/850/1020 ms
# at p = 5/25/50/75/95); rms residual 4.3 ms, truncated mean 758 ms.
RT_SHIFT_MS = -818.887083
RT_MU = 7.358679708
RT_SIGMA = 0.095492924
RT_TRUNCATION_MS = (300.0, 1490.0)

# Evoked-component timing (ms relative to the pedal press). The occipital
# positivity rises from -400 ms to a flat top around -300 ms and is followed
# by an undershoot that cancels most of its sub-passband mass, so the
# configured peak survives the 1-45 Hz filtering of the analysis chain.
OCCIPITAL_ONSET_MS = -400.0
OCCIPITAL_TOP_MS = (-325.0, -275.0)
OCCIPITAL_PEAK_MS = -300.0
OCCIPITAL_FALL_END_MS = -250.0
OCCIPITAL_UNDERSHOOT = 5.0 / 6.0   # relative depth, spans fall end .. 0 ms
MOTOR_ONSET_MS = -200.0
MOTOR_HOLD_END_MS = 300.0
MOTOR_END_MS = 700.0
NORMAL_ONSET_MS = -900.0
NORMAL_PEAK_MS = -650.0
NORMAL_END_MS = -400.0

OCCIPITAL_WEIGHTS = {"O1": 0.8, "Oz": 1.0, "O2": 0.8}
CENTRAL_WEIGHTS = {"Cz": 1.0, "C3": 0.8, "C4": 0.8}

# Induced-burst envelopes (ms relative to the press): rise start, plateau
# start, plateau end, fall end.
OCCIPITAL_BURST_ENV = (-400.0, -300.0, 200.0, 400.0)
MOTOR_BURST_ENV = (-200.0, 0.0, 300.0, 600.0)
NORMAL_BURST_ENV = (-900.0, -700.0, -400.0, -200.0)

BLINK_DURATION_MS = 400.0
OUTLIER_REFERENCE_MS = 4000.0  # epoch length the outlier probability refers to


@dataclass(frozen=True)
class ScenarioConfig:
    """Driving-task parameters; speed and gap are metadata only."""

    session_minutes: float = 30.0
    inter_event_s: tuple = (15.0, 60.0)
    mode: str = "emergency"
    lead_speed_kmh: float = 60.0
    gap_m: tuple = (6.0, 12.0)

    def __post_init__(self):
        if self.mode not in ("emergency", "normal"):
            raise ValueError(f"unknown mode {self.mode!r}")
        lo, hi = self.inter_event_s
        if not (0 < lo <= hi) or self.session_minutes <= 0:
            raise ValueError("scenario ranges must be positive and ordered")


@dataclass(frozen=True)
class ReactionTimeModel:
    """Shifted log-normal truncated to the observed response-time range."""

    shift_ms: float = RT_SHIFT_MS
    mu: float = RT_MU
    sigma: float = RT_SIGMA
    truncation_ms: tuple = RT_TRUNCATION_MS

    def _trunc_z(self):
        lo, hi = self.truncation_ms
        a = (math.log(lo - self.shift_ms) - self.mu) / self.sigma
        b = (math.log(hi - self.shift_ms) - self.mu) / self.sigma
        return a, b

    def quantile(self, p):
        """Inverse CDF of the truncated distribution."""
        if self.sigma == 0.0:
            val = self.shift_ms + math.exp(self.mu)
            return float(np.clip(val, *self.truncation_ms))
        a, b = self._trunc_z()
        u = ndtr(a) + np.asarray(p) * (ndtr(b) - ndtr(a))
        return self.shift_ms + np.exp(self.mu + self.sigma * ndtri(u))

    def mean(self):
        """Closed-form mean of the truncated distribution."""
        if self.sigma == 0.0:
            return self.quantile(0.5)
        a, b = self._trunc_z()
        z = ndtr(b) - ndtr(a)
        scale = (ndtr(b - self.sigma) - ndtr(a - self.sigma)) / z
        return self.shift_ms + math.exp(self.mu + self.sigma ** 2 / 2) * scale

    def sample(self, rng, size=None):
        """Inverse-CDF draws; always inside the truncation bounds."""
        u = rng.random(size)
        return self.quantile(u)


def fit_default_rt_model():
    """Reaction-time model with the frozen percentile-fit constants."""
    return ReactionTimeModel()


def sample_reaction_time(model, seed, size=None):
    """Seeded draw(s) from a reaction-time model, in milliseconds."""
    return model.sample(make_rng(seed), size)


@dataclass(frozen=True)
class ErpTemplateConfig:
    """Class-conditional response amplitudes, all in microvolts.

    The three ``*_uv`` values are the evoked template peaks (occipital
    positivity and central negativity for emergency braking, a weaker
    central negativity for normal braking). The ``*_burst_rms_uv`` values
    set the plateau RMS of the induced narrow-band bursts that accompany
    each evoked component. ``amplitude_scale`` multiplies everything; at 0
    the three classes are distributionally identical.
    """

    occipital_peak_uv: float = 6.0
    motor_negativity_uv: float = -3.0
    normal_negativity_uv: float = -1.5
    amplitude_scale: float = 1.0
    occipital_burst_rms_uv: float = 18.0
    motor_burst_rms_uv: float = 10.0
    normal_burst_rms_uv: float = 5.0
    burst_band_hz: tuple = (8.0, 13.0)
    trial_gain_sd: float = 0.25

    def __post_init__(self):
        if self.amplitude_scale < 0:
            raise ValueError("amplitude_scale must be >= 0")


@dataclass(frozen=True)
class NoiseConfig:
    """Background and artifact model."""

    rms_uv: float = 10.0
    mixing_strength: float = 0.4
    blink_rate_per_min: float = 2.0
    blink_amplitude_uv: float = 80.0
    outlier_epoch_prob: float = 0.02

    def __post_init__(self):
        if self.rms_uv <= 0:
            raise ValueError("noise rms must be positive")


# ---------------------------------------------------------------------------
# Evoked templates
# ---------------------------------------------------------------------------

def _raised_cosine(t, start, peak, end):
    """0 -> 1 -> 0 bump with half-cosine rise and fall; vectorized in t."""
    t = np.asarray(t, dtype=np.float64)
    up = 0.5 - 0.5 * np.cos(np.pi * (t - start) / (peak - start))
    down = 0.5 + 0.5 * np.cos(np.pi * (t - peak) / (end - peak))
    out = np.where(t < peak, up, down)
    return np.where((t <= start) | (t >= end), 0.0, out)


def _flat_top(t, start, top_lo, top_hi, end):
    """0 -> 1 plateau -> 0 with half-cosine rise and fall."""
    t = np.asarray(t, dtype=np.float64)
    up = 0.5 - 0.5 * np.cos(np.pi * (t - start) / (top_lo - start))
    down = 0.5 + 0.5 * np.cos(np.pi * (t - top_hi) / (end - top_hi))
    out = np.ones_like(t)
    out = np.where(t < top_lo, up, out)
    out = np.where(t > top_hi, down, out)
    return np.where((t <= start) | (t >= end), 0.0, out)


def _occipital_shape(t):
    """Flat-top positivity with a biphasic undershoot toward the press."""
    top_lo, top_hi = OCCIPITAL_TOP_MS
    bump = _flat_top(t, OCCIPITAL_ONSET_MS, top_lo, top_hi,
                     OCCIPITAL_FALL_END_MS)
    under = _raised_cosine(t, OCCIPITAL_FALL_END_MS,
                           OCCIPITAL_FALL_END_MS / 2.0, 0.0)
    return bump - OCCIPITAL_UNDERSHOOT * under


def _plateau_envelope(t, rise_start, plateau_start, plateau_end, fall_end):
    """0 -> 1 plateau -> 0 envelope with half-cosine transitions."""
    t = np.asarray(t, dtype=np.float64)
    up = 0.5 - 0.5 * np.cos(np.pi * (t - rise_start)
                            / (plateau_start - rise_start))
    down = 0.5 + 0.5 * np.cos(np.pi * (t - plateau_end)
                              / (fall_end - plateau_end))
    out = np.ones_like(t)
    out = np.where(t < plateau_start, up, out)
    out = np.where(t > plateau_end, down, out)
    return np.where((t <= rise_start) | (t >= fall_end), 0.0, out)


def _motor_shape(t):
    """Ramp to full amplitude at the press, hold, then release."""
    t = np.asarray(t, dtype=np.float64)
    up = 0.5 - 0.5 * np.cos(np.pi * (t - MOTOR_ONSET_MS) / -MOTOR_ONSET_MS)
    down = 0.5 + 0.5 * np.cos(np.pi * (t - MOTOR_HOLD_END_MS)
                              / (MOTOR_END_MS - MOTOR_HOLD_END_MS))
    out = np.ones_like(t)
    out = np.where(t < 0.0, up, out)
    out = np.where(t > MOTOR_HOLD_END_MS, down, out)
    return np.where((t <= MOTOR_ONSET_MS) | (t >= MOTOR_END_MS), 0.0, out)


def _class_components(erp, label):
    """(channel weights, amplitude, shape fn) triples for one class."""
    if label == ClassLabel.EMERGENCY:
        return (
            (OCCIPITAL_WEIGHTS, erp.occipital_peak_uv, _occipital_shape),
            (CENTRAL_WEIGHTS, erp.motor_negativity_uv, _motor_shape),
        )
    if label == ClassLabel.NORMAL:
        return (
            (CENTRAL_WEIGHTS, erp.normal_negativity_uv,
             lambda t: _raised_cosine(t, NORMAL_ONSET_MS, NORMAL_PEAK_MS,
                                      NORMAL_END_MS)),
        )
    return ()


def erp_value(erp, label, channel, t_rel_ms, montage=None):
    """Evoked template value in microvolts for one class/channel/time.

    ``t_rel_ms`` is relative to the pedal press. Induced bursts are
    stochastic and do not contribute to the deterministic template.
    """
    montage = montage if montage is not None else default_montage()
    if channel not in montage.names:
        raise KeyError(f"unknown channel {channel!r}")
    total = 0.0
    for weights, amp, shape in _class_components(erp, label):
        total += weights.get(channel, 0.0) * amp * float(shape(t_rel_ms))
    return erp.amplitude_scale * total


# ---------------------------------------------------------------------------
# Session assembly
# ---------------------------------------------------------------------------

def _pink_noise(rng, n_channels, n_samples, rate, rms):
    """Independent 1/f-amplitude noise channels, unit knee at 1 Hz."""
    freqs = rfftfreq(n_samples, 1.0 / rate)
    shape = np.zeros_like(freqs)
    shape[1:] = 1.0 / np.sqrt(np.maximum(freqs[1:], 1.0))
    spec = (rng.standard_normal((n_channels, len(freqs)))
            + 1j * rng.standard_normal((n_channels, len(freqs)))) * shape
    x = irfft(spec, n_samples, axis=1)
    x /= x.std(axis=1, keepdims=True)
    return x * rms


def _mixing_matrix(rng, n_channels, strength):
    """Symmetric full-rank mixing with a bounded spectrum.

    Built as Q diag(s) Q^T with random orthogonal Q and log-uniform
    singular values in [1/(1+strength), 1+strength], so the background
    covariance is anisotropic in random directions for every subject while
    its condition number stays controlled.
    """
    q, _ = np.linalg.qr(rng.standard_normal((n_channels, n_channels)))
    log_hi = np.log1p(strength)
    s = np.exp(rng.uniform(-log_hi, log_hi, n_channels))
    m = (q * s) @ q.T
    return m / np.sqrt(np.mean(s ** 2))


def _schedule_onsets(rng, scenario, duration_ms):
    lo, hi = scenario.inter_event_s
    onsets = []
    t = 5000.0 + rng.uniform(lo, hi) * 1000.0
    # leave room for the slowest reaction and a post-press epoch tail
    while t < duration_ms - 8000.0:
        onsets.append(t)
        t += rng.uniform(lo, hi) * 1000.0
    return onsets


def _weight_vector(montage, weights):
    v = np.zeros(montage.n_channels)
    for name, w in weights.items():
        v[montage.index(name)] = w
    return v


def _unit_mean_lognormal(rng, sd, size=None):
    if sd <= 0:
        return np.ones(size) if size is not None else 1.0
    s2 = math.log(1.0 + sd * sd)
    return rng.lognormal(-0.5 * s2, math.sqrt(s2), size)


def _add_component(samples, rate, t_press_ms, weight_vec, values_fn,
                   lo_ms, hi_ms):
    """Add values_fn(t_rel_ms) x weight_vec around one press, clipped to
    the recording."""
    n = samples.shape[1]
    i0 = max(int(np.floor((t_press_ms + lo_ms) * rate / 1000.0)), 0)
    i1 = min(int(np.ceil((t_press_ms + hi_ms) * rate / 1000.0)) + 1, n)
    if i1 <= i0:
        return
    t_rel = np.arange(i0, i1) * (1000.0 / rate) - t_press_ms
    samples[:, i0:i1] += np.outer(weight_vec, values_fn(t_rel))


def _burst_values(rng, band, rms, env_fn):
    """Random-phase two-tone oscillation under an envelope."""
    f = rng.uniform(band[0], band[1], 2)
    phase = rng.uniform(0.0, 2.0 * np.pi, 2)

    def values(t_rel):
        osc = sum(np.cos(2.0 * np.pi * fi * t_rel / 1000.0 + pi)
                  for fi, pi in zip(f, phase))
        return rms * osc * env_fn(t_rel)

    return values


def generate_session(scenario=ScenarioConfig(), erp=ErpTemplateConfig(),
                     noise=NoiseConfig(), rt_model=None, seed=0,
                     montage=None, sample_rate=200):
    """Simulate one driving session as a ContinuousRecording.

    Emergency mode emits a brake-light event followed by a pedal press
    after a sampled reaction time; normal mode emits spontaneous presses
    only. Fully deterministic given ``seed``.
    """
    montage = montage if montage is not None else default_montage()
    rt_model = rt_model if rt_model is not None else fit_default_rt_model()
    rate = sample_rate
    duration_ms = scenario.session_minutes * 60000.0
    n = int(round(duration_ms * rate / 1000.0))
    c = montage.n_channels

    rng_sched = make_rng(split_seed(seed, 0))
    rng_rt = make_rng(split_seed(seed, 1))
    rng_noise = make_rng(split_seed(seed, 2))
    rng_mix = make_rng(split_seed(seed, 3))
    rng_blink = make_rng(split_seed(seed, 4))
    rng_outlier = make_rng(split_seed(seed, 5))
    rng_erp = make_rng(split_seed(seed, 6))

    mixing = _mixing_matrix(rng_mix, c, noise.mixing_strength)
    samples = mixing @ _pink_noise(rng_noise, c, n, rate, noise.rms_uv)

    # blinks: frontal-weighted positive lobes
    blink_w = np.zeros(c)
    for i, name in enumerate(montage.names):
        if name.startswith(("FT", "FC")):
            blink_w[i] = 0.35
        elif name.startswith("F"):
            blink_w[i] = 1.0
    n_blinks = rng_blink.poisson(noise.blink_rate_per_min
                                 * scenario.session_minutes)
    for t_blink in np.sort(rng_blink.uniform(0.0, duration_ms, n_blinks)):
        amp = noise.blink_amplitude_uv * rng_blink.uniform(0.7, 1.3)
        _add_component(
            samples, rate, t_blink, blink_w * amp,
            lambda t: np.cos(np.pi * t / BLINK_DURATION_MS) ** 2
            * (np.abs(t) < BLINK_DURATION_MS / 2),
            -BLINK_DURATION_MS / 2, BLINK_DURATION_MS / 2)

    # outlier spikes sized so the configured fraction of 4 s epochs trips
    # the amplitude-rejection threshold
    expected = noise.outlier_epoch_prob * duration_ms / OUTLIER_REFERENCE_MS
    n_spikes = rng_outlier.poisson(expected)
    for t_spike in np.sort(rng_outlier.uniform(0.0, duration_ms, n_spikes)):
        chans = rng_outlier.choice(c, size=3, replace=False)
        w = np.zeros(c)
        w[chans] = rng_outlier.uniform(0.8, 1.0, 3)
        amp = rng_outlier.uniform(330.0, 600.0) * rng_outlier.choice([-1, 1])
        _add_component(samples, rate, t_spike, w * amp,
                       lambda t: np.maximum(1.0 - np.abs(t) / 15.0, 0.0),
                       -15.0, 15.0)

    # braking events with class-conditional responses
    onsets = _schedule_onsets(rng_sched, scenario, duration_ms)
    events = []
    scale = erp.amplitude_scale
    label = (ClassLabel.EMERGENCY if scenario.mode == "emergency"
             else ClassLabel.NORMAL)
    if label == ClassLabel.EMERGENCY:
        bursts = ((OCCIPITAL_WEIGHTS, erp.occipital_burst_rms_uv,
                   OCCIPITAL_BURST_ENV),
                  (CENTRAL_WEIGHTS, erp.motor_burst_rms_uv,
                   MOTOR_BURST_ENV))
    else:
        bursts = ((CENTRAL_WEIGHTS, erp.normal_burst_rms_uv,
                   NORMAL_BURST_ENV),)
    for onset in onsets:
        if label == ClassLabel.EMERGENCY:
            press = onset + float(rt_model.sample(rng_rt))
            events.append(Event(onset, EventKind.BRAKE_LIGHT_ON))
        else:
            press = onset
        events.append(Event(press, EventKind.BRAKE_PEDAL_PRESS, label))

        gain = _unit_mean_lognormal(rng_erp, erp.trial_gain_sd)
        for weights, amp, shape in _class_components(erp, label):
            wv = _weight_vector(montage, weights) * amp * scale * gain
            _add_component(samples, rate, press, wv, shape, -1000.0, 800.0)
        for weights, rms, env in bursts:
            bgain = _unit_mean_lognormal(rng_erp, 0.4)
            vals = _burst_values(
                rng_erp, erp.burst_band_hz, rms * scale * bgain,
                lambda t, e=env: _plateau_envelope(t, *e))
            wv = _weight_vector(montage, weights)
            _add_component(samples, rate, press, wv, vals, env[0], env[3])

    events.sort(key=lambda ev: ev.t_ms)
    return ContinuousRecording(montage, rate, samples.astype(np.float32),
                               tuple(events))
