import numpy as np
import pytest

from brakesense.core import (ClassLabel, ContinuousRecording, Event,
                             EventKind, default_montage)
from brakesense.preprocess import (EpochWindowSpec, InsufficientDataError,
                                   apply_filter, baseline_correct,
                                   design_bandpass, extract_brake_epochs,
                                   extract_no_brake_epochs, reject_artifacts)

from conftest import make_epochs

RATE = 200


def make_recording(montage, duration_s=60.0, events=(), seed=0, rms=5.0):
    rng = np.random.default_rng(seed)
    n = int(duration_s * RATE)
    samples = (rms * rng.standard_normal((montage.n_channels, n))) \
        .astype(np.float32)
    return ContinuousRecording(montage, RATE, samples, tuple(events))


def press(t_ms, label=ClassLabel.EMERGENCY):
    return Event(t_ms, EventKind.BRAKE_PEDAL_PRESS, label)


# ---------------------------------------------------------------------------
# filter design
# ---------------------------------------------------------------------------

def test_taps_symmetric_and_odd():
    f = design_bandpass(1.0, 45.0, RATE, 401)
    assert f.num_taps == 401
    assert np.allclose(f.coefficients, f.coefficients[::-1], atol=1e-15)


def test_dc_rejection_vs_passband_center():
    f = design_bandpass(1.0, 45.0, RATE, 401)
    # independent oracle: evaluate the DFT of the taps directly
    def mag(freq):
        k = np.arange(f.num_taps)
        return np.abs(np.sum(f.coefficients
                             * np.exp(-2j * np.pi * freq * k / RATE)))
    assert mag(0.0) / mag(20.0) <= 1e-2
    assert mag(100.0) / mag(20.0) <= 1e-2  # Nyquist


def test_design_errors():
    with pytest.raises(ValueError):
        design_bandpass(45.0, 1.0, RATE, 401)
    with pytest.raises(ValueError):
        design_bandpass(1.0, 45.0, RATE, 400)
    with pytest.raises(ValueError):
        design_bandpass(1.0, 120.0, RATE, 401)


# ---------------------------------------------------------------------------
# zero-phase application
# ---------------------------------------------------------------------------

def _sine_recording(montage, freq, duration_s=30.0, amp=10.0):
    t = np.arange(int(duration_s * RATE)) / RATE
    wave = amp * np.sin(2 * np.pi * freq * t)
    samples = np.tile(wave, (montage.n_channels, 1)).astype(np.float32)
    return ContinuousRecording(montage, RATE, samples, ())


def _fit_sine(x, freq):
    """Least-squares amplitude and phase of a sinusoid, an independent
    probe of gain and delay."""
    t = np.arange(len(x)) / RATE
    basis = np.column_stack([np.sin(2 * np.pi * freq * t),
                             np.cos(2 * np.pi * freq * t)])
    coef, *_ = np.linalg.lstsq(basis, x, rcond=None)
    amp = np.hypot(*coef)
    phase = np.arctan2(coef[1], coef[0])
    return amp, phase


def test_passband_amplitude_and_phase(montage):
    f = design_bandpass(1.0, 45.0, RATE, 401)
    rec = _sine_recording(montage, 20.0)
    out = apply_filter(rec, f)
    trim = f.num_taps
    amp, phase = _fit_sine(out.samples[0, trim:-trim].astype(float), 20.0)
    assert abs(amp - 10.0) / 10.0 < 0.05
    # phase shift below one sample of 20 Hz
    max_phase = 2 * np.pi * 20.0 / RATE
    assert abs(phase) < max_phase


def test_dc_input_removed(montage):
    f = design_bandpass(1.0, 45.0, RATE, 401)
    samples = np.full((montage.n_channels, 20 * RATE), 10.0, np.float32)
    rec = ContinuousRecording(montage, RATE, samples, ())
    out = apply_filter(rec, f)
    trim = f.num_taps
    assert np.abs(out.samples[:, trim:-trim]).max() < 0.1


def test_stopband_attenuation(montage):
    f = design_bandpass(1.0, 45.0, RATE, 401)
    rec = _sine_recording(montage, 60.0)
    out = apply_filter(rec, f)
    trim = f.num_taps
    amp, _ = _fit_sine(out.samples[0, trim:-trim].astype(float), 60.0)
    assert amp <= 1.0  # >= 90% attenuation of the 10 uV probe


def test_filter_preserves_events_and_length(montage):
    f = design_bandpass(1.0, 45.0, RATE, 401)
    events = (press(5000.0),)
    rec = make_recording(montage, 20.0, events)
    out = apply_filter(rec, f)
    assert out.events == events
    assert out.n_samples == rec.n_samples


def test_filter_rejects_short_recording(montage):
    f = design_bandpass(1.0, 45.0, RATE, 401)
    rec = make_recording(montage, 1.0)
    with pytest.raises(ValueError):
        apply_filter(rec, f)


# ---------------------------------------------------------------------------
# epoch extraction
# ---------------------------------------------------------------------------

def test_brake_epoch_window_arithmetic(montage):
    rec = make_recording(montage, 60.0, (press(10_000.0),))
    out, skipped = extract_brake_epochs(rec)
    assert skipped == 0 and len(out) == 1
    ep = out.epochs[0]
    assert ep.samples.shape == (28, 800)
    assert ep.t0_offset_ms == 3000
    # epoch must cover [7000, 11000) ms = samples [1400, 2200)
    assert np.array_equal(ep.samples, rec.samples[:, 1400:2200])
    assert ep.label == ClassLabel.EMERGENCY


def test_brake_epoch_boundary_skip(montage):
    rec = make_recording(montage, 60.0,
                         (press(1000.0), press(30_000.0),
                          press(59_500.0, ClassLabel.NORMAL)))
    out, skipped = extract_brake_epochs(rec)
    assert len(out) == 1 and skipped == 2
    assert len(out) + skipped == 3


def test_no_brake_separation_brute_force(montage):
    events = [press(t) for t in (20_000.0, 40_000.0, 55_000.0)]
    events.insert(0, Event(19_300.0, EventKind.BRAKE_LIGHT_ON))
    rec = make_recording(montage, 120.0, events)
    spec = EpochWindowSpec()
    out = extract_no_brake_epochs(rec, spec, count=40, seed=5)
    assert len(out) == 40
    # brute-force distance check of every window against every event
    starts = sorted(
        {tuple(ep.samples[0, :4].tolist()): None for ep in out.epochs})
    for ep in out.epochs:
        # recover window position by matching the first channel
        pattern = ep.samples[0]
        idx = _find_offset(rec.samples[0], pattern)
        w_start = idx * 1000.0 / RATE
        w_end = (idx + ep.samples.shape[1]) * 1000.0 / RATE
        for ev in rec.events:
            dist = max(0.0, w_start - ev.t_ms, ev.t_ms - w_end)
            assert dist >= spec.no_brake_min_separation_ms


def _find_offset(signal, pattern):
    n = len(pattern)
    candidates = np.flatnonzero(signal == pattern[0])
    for c in candidates:
        if c + n <= len(signal) and np.array_equal(signal[c:c + n], pattern):
            return c
    raise AssertionError("window not found in recording")


def test_no_brake_determinism(montage):
    rec = make_recording(montage, 120.0, (press(50_000.0),))
    spec = EpochWindowSpec()
    a = extract_no_brake_epochs(rec, spec, count=10, seed=77)
    b = extract_no_brake_epochs(rec, spec, count=10, seed=77)
    for x, y in zip(a.epochs, b.epochs):
        assert np.array_equal(x.samples, y.samples)
    c = extract_no_brake_epochs(rec, spec, count=10, seed=78)
    assert any(not np.array_equal(x.samples, y.samples)
               for x, y in zip(a.epochs, c.epochs))


def test_no_brake_infeasible_names_deficit(montage):
    # events every 5 s with 3 s separation leave no room for 4 s windows
    events = [press(float(t)) for t in range(5_000, 115_000, 5_000)]
    rec = make_recording(montage, 120.0, events)
    with pytest.raises(InsufficientDataError, match="0 eligible"):
        extract_no_brake_epochs(rec, EpochWindowSpec(), count=5, seed=0)


# ---------------------------------------------------------------------------
# artifact rejection
# ---------------------------------------------------------------------------

def test_rejection_strict_threshold(montage):
    base = make_epochs(montage, [ClassLabel.NORMAL] * 3, scale=0.0)
    eps = list(base.epochs)
    hot = eps[1].samples.copy()
    hot[5, 7] = 301.0
    warm = eps[2].samples.copy()
    warm[0, 0] = -300.0
    from brakesense.core import Epoch, EpochSet
    s = EpochSet(montage, 200, (
        eps[0], Epoch(ClassLabel.NORMAL, hot, 100),
        Epoch(ClassLabel.NORMAL, warm, 100)))
    kept, rejected = reject_artifacts(s, 300.0)
    assert rejected == 1 and len(kept) == 2
    assert np.array_equal(kept.epochs[1].samples, warm)  # order preserved


def test_rejection_identity_and_total(montage):
    s = make_epochs(montage, [ClassLabel.NORMAL] * 5, scale=20.0)
    kept, rejected = reject_artifacts(s, np.inf)
    assert rejected == 0 and len(kept) == 5
    kept, rejected = reject_artifacts(s, 1e-12)
    assert rejected == 5 and len(kept) == 0


# ---------------------------------------------------------------------------
# baseline correction
# ---------------------------------------------------------------------------

def test_baseline_constant_channel(montage):
    s = make_epochs(montage, [ClassLabel.NORMAL], n_samples=800, scale=0.0)
    x = s.epochs[0].samples.copy()
    x[:] = 5.0
    from brakesense.core import Epoch, EpochSet
    s = EpochSet(montage, 200, (Epoch(ClassLabel.NORMAL, x, 3000),))
    out = baseline_correct(s, 500.0)
    assert np.abs(out.epochs[0].samples).max() == 0.0


def test_baseline_zero_leading_window(montage):
    from brakesense.core import Epoch, EpochSet
    x = np.zeros((montage.n_channels, 800), np.float32)
    x[:, 100:] = 0.0
    x[:, 200:] = 10.0
    x[:, :100] = 0.0
    s = EpochSet(montage, 200, (Epoch(ClassLabel.NORMAL, x, 3000),))
    out = baseline_correct(s, 500.0)
    # first 100 samples = first 500 ms at 200 Hz; their mean is... nonzero
    # here because 500 ms = 100 samples but x[:,200:] starts after it
    assert np.array_equal(out.epochs[0].samples, x.astype(np.float64))


def test_baseline_mean_and_idempotence(montage):
    s = make_epochs(montage, [ClassLabel.NORMAL] * 3, n_samples=800,
                    scale=7.0, seed=4)
    out = baseline_correct(s, 500.0)
    n_base = 100
    for orig, ep in zip(s.epochs, out.epochs):
        # independent recomputation of the subtracted means
        expected = orig.samples.astype(np.float64) \
            - orig.samples[:, :n_base].astype(np.float64).mean(
                axis=1, keepdims=True)
        assert np.allclose(ep.samples, expected, atol=1e-12)
        assert np.abs(ep.samples[:, :n_base].mean(axis=1)).max() < 1e-9
    twice = baseline_correct(out, 500.0)
    for a, b in zip(out.epochs, twice.epochs):
        assert np.abs(a.samples - b.samples).max() < 1e-12


def test_baseline_longer_than_epoch(montage):
    s = make_epochs(montage, [ClassLabel.NORMAL], n_samples=50)
    with pytest.raises(ValueError):
        baseline_correct(s, 5000.0)
