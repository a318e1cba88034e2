"""Evaluation protocol: class balancing, repeated stratified splits,
sliding-window accuracy curves, prediction time, response-time statistics,
and topographic-map export.

The classifier is trained once per repetition on the 1000 ms window ending
at the pedal press; test accuracy is then evaluated with a sliding window
whose END point is the curve abscissa. No-braking epochs carry the same
nominal press offset, so their windows sit at identical relative positions.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .classifiers import default_config, fit_classifier, predict_classifier
from .core import ClassLabel, EventKind, make_rng, split_seed

__all__ = [
    "EvalProtocol",
    "AccuracyCurve",
    "CurvePoint",
    "RunReport",
    "EbrtStats",
    "ProtocolAudit",
    "balance_classes",
    "split_half",
    "accuracy",
    "run_protocol",
    "aggregate_curves",
    "prediction_time",
    "collect_ebrt",
    "ebrt_stats",
    "topomap_export",
]


@dataclass(frozen=True)
class EvalProtocol:
    """Repeated-split sliding-window evaluation parameters."""

    repetitions: int = 10
    train_fraction: float = 0.5
    train_window_ms: float = 1000.0    # ends at the press
    test_window_len_ms: float = 1000.0
    window_end_range_ms: tuple = (-2000.0, 1000.0)
    window_step_ms: float = 50.0
    classifier: str = "rmdm"
    classifier_config: object = None
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be in (0, 1)")
        if self.repetitions < 1:
            raise ValueError("need at least one repetition")
        lo, hi = self.window_end_range_ms
        if lo > hi or self.window_step_ms <= 0:
            raise ValueError("bad window end range or step")

    def window_ends(self):
        lo, hi = self.window_end_range_ms
        n = int(round((hi - lo) / self.window_step_ms))
        ends = lo + self.window_step_ms * np.arange(n + 1)
        return ends[ends <= hi + 1e-9]


@dataclass(frozen=True)
class CurvePoint:
    end_ms: float
    mean: float
    std: float
    n: int


@dataclass(frozen=True)
class AccuracyCurve:
    """Mean/std accuracy against the test-window end point."""

    points: tuple

    def __post_init__(self):
        ends = [p.end_ms for p in self.points]
        if any(b <= a for a, b in zip(ends, ends[1:])):
            raise ValueError("curve points must be ordered by time")
        if any(not 0.0 <= p.mean <= 1.0 for p in self.points):
            raise ValueError("accuracies must lie in [0, 1]")

    def at(self, end_ms):
        for p in self.points:
            if abs(p.end_ms - end_ms) < 1e-9:
                return p
        raise KeyError(f"no curve point at {end_ms} ms")

    def ends(self):
        return np.array([p.end_ms for p in self.points])

    def means(self):
        return np.array([p.mean for p in self.points])


@dataclass
class RunReport:
    classifier: str
    repetitions: int
    input_counts: dict
    train_size: int
    test_size: int
    window_ends_ms: tuple
    per_repetition_accuracy: tuple   # reps x points
    tie_count: int = 0
    nonconverged_means: int = 0
    wall_time_s: float = 0.0


@dataclass
class ProtocolAudit:
    """Instrumentation: which epoch indices each phase touched, per rep."""

    fit_indices: list = field(default_factory=list)
    predict_indices: list = field(default_factory=list)


def balance_classes(epochset, classes, seed):
    """Subset to two classes and downsample the larger to the smaller.

    The survivors of the downsampled class are drawn uniformly without
    replacement; chronological order is preserved. Deterministic given
    ``seed``.
    """
    labels = epochset.labels()
    idx_by_class = []
    for cls in classes:
        idx = np.flatnonzero(labels == int(cls))
        if len(idx) == 0:
            raise ValueError(f"class {cls} absent from the epoch set")
        idx_by_class.append(idx)
    m = min(len(idx) for idx in idx_by_class)
    rng = make_rng(seed)
    kept = []
    for idx in idx_by_class:
        if len(idx) > m:
            idx = np.sort(rng.choice(idx, size=m, replace=False))
        kept.append(idx)
    order = np.sort(np.concatenate(kept))
    return epochset.select(order)


def _split_indices(labels, classes, train_fraction, rng):
    """Stratified index split: nearest-count rounding (ties up), with at
    least one epoch per class on each side."""
    train, test = [], []
    for cls in classes:
        idx = np.flatnonzero(labels == int(cls))
        n = len(idx)
        if n < 2:
            raise ValueError(f"class {cls} has fewer than 2 epochs")
        n_train = int(np.floor(n * train_fraction + 0.5))
        n_train = min(max(n_train, 1), n - 1)
        perm = rng.permutation(idx)
        train.append(perm[:n_train])
        test.append(perm[n_train:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def split_half(epochset, train_fraction=0.5, seed=0):
    """Stratified random split into train and test EpochSets."""
    labels = epochset.labels()
    classes = sorted(set(labels.tolist()))
    rng = make_rng(seed)
    tr, te = _split_indices(labels, classes, train_fraction, rng)
    return epochset.select(tr), epochset.select(te)


def accuracy(predictions, labels):
    """Fraction of correct predictions, exactly matches / total."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ValueError("predictions and labels differ in length")
    if predictions.size == 0:
        raise ValueError("empty prediction list")
    return int(np.sum(predictions == labels)) / predictions.size


def _window_slice(t0_idx, end_ms, length_n, rate):
    end_idx = t0_idx + int(round(end_ms * rate / 1000.0))
    return end_idx - length_n, end_idx


def run_protocol(epochset, protocol, audit=None):
    """Repeated split / fit / sliding-window evaluation on one subject.

    Returns
    -------
    (AccuracyCurve, RunReport)
    """
    t_start = time.perf_counter()
    rate = epochset.sample_rate
    labels = epochset.labels()
    classes = sorted(set(labels.tolist()))
    if len(classes) != 2:
        raise ValueError(f"protocol needs a two-class set, got {classes}")
    t0_idx = int(round(epochset.epochs[0].t0_offset_ms * rate / 1000.0))
    n_total = epochset.n_samples
    train_n = int(round(protocol.train_window_ms * rate / 1000.0))
    test_n = int(round(protocol.test_window_len_ms * rate / 1000.0))
    ends = protocol.window_ends()

    if t0_idx - train_n < 0 or t0_idx > n_total:
        raise ValueError("training window does not fit inside the epochs")
    for e in ends:
        lo, hi = _window_slice(t0_idx, e, test_n, rate)
        if lo < 0 or hi > n_total:
            raise ValueError(
                f"test window ending at {e} ms falls outside the epochs")
    if protocol.classifier == "cnn" and train_n != test_n:
        raise ValueError("the CNN requires equal train and test windows")

    config = protocol.classifier_config
    if config is None:
        config = default_config(protocol.classifier)
    data = epochset.data()
    acc = np.zeros((protocol.repetitions, len(ends)))
    ties = 0
    nonconverged = 0
    for rep in range(protocol.repetitions):
        rng = make_rng(split_seed(protocol.seed, rep))
        tr_idx, te_idx = _split_indices(labels, classes,
                                        protocol.train_fraction, rng)
        if audit is not None:
            audit.fit_indices.append(set(tr_idx.tolist()))
            audit.predict_indices.append(set(te_idx.tolist()))
        x_train = data[tr_idx][:, :, t0_idx - train_n:t0_idx]
        model = fit_classifier(
            protocol.classifier, x_train, labels[tr_idx], config,
            sample_rate=rate,
            seed=split_seed(protocol.seed, 10_000 + rep))
        ties += getattr(model, "tie_count", 0)
        if hasattr(model, "converged"):
            nonconverged += sum(1 for ok in model.converged if not ok)
        x_test = data[te_idx]
        y_test = labels[te_idx]
        for j, e in enumerate(ends):
            lo, hi = _window_slice(t0_idx, e, test_n, rate)
            pred = predict_classifier(model, x_test[:, :, lo:hi])
            acc[rep, j] = accuracy(pred, y_test)

    n_test = len(te_idx)
    points = []
    for j, e in enumerate(ends):
        col = acc[:, j]
        std = float(col.std(ddof=1)) if len(col) > 1 else 0.0
        points.append(CurvePoint(float(e), float(col.mean()), std,
                                 n_test * protocol.repetitions))
    report = RunReport(
        classifier=protocol.classifier,
        repetitions=protocol.repetitions,
        input_counts={int(k): int(v)
                      for k, v in epochset.class_counts().items()},
        train_size=len(tr_idx),
        test_size=n_test,
        window_ends_ms=tuple(float(e) for e in ends),
        per_repetition_accuracy=tuple(tuple(row) for row in acc),
        tie_count=int(ties),
        nonconverged_means=int(nonconverged),
        wall_time_s=time.perf_counter() - t_start,
    )
    return AccuracyCurve(tuple(points)), report


def aggregate_curves(curves):
    """Grand curve across subjects: mean of subject means, std across
    subjects, pooled n. All curves must share the same end grid."""
    if not curves:
        raise ValueError("no curves to aggregate")
    ends = curves[0].ends()
    for c in curves[1:]:
        if not np.allclose(c.ends(), ends):
            raise ValueError("curves have mismatched window grids")
    means = np.stack([c.means() for c in curves])
    ns = np.array([[p.n for p in c.points] for c in curves])
    std = means.std(axis=0, ddof=1) if len(curves) > 1 \
        else np.zeros(len(ends))
    points = tuple(
        CurvePoint(float(e), float(m), float(s), int(n))
        for e, m, s, n in zip(ends, means.mean(axis=0), std, ns.sum(axis=0)))
    return AccuracyCurve(points)


def prediction_time(curve, threshold):
    """Earliest window end t* <= 0 with accuracy >= threshold sustained
    through 0 ms; None when even the last nonpositive point is below."""
    if not 0.5 < threshold <= 1.0:
        raise ValueError("threshold must be in (0.5, 1]")
    past = [p for p in curve.points if p.end_ms <= 1e-9]
    t_star = None
    for p in reversed(past):
        if p.mean >= threshold:
            t_star = p.end_ms
        else:
            break
    return t_star


# ---------------------------------------------------------------------------
# Response-time statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EbrtStats:
    n: int
    mean_ms: float
    std_ms: float
    min_ms: float
    max_ms: float
    percentiles: dict  # {5, 25, 50, 75, 95} -> ms

    def __post_init__(self):
        p = self.percentiles
        seq = [self.min_ms, p[5], p[25], p[50], p[75], p[95], self.max_ms]
        if any(b < a - 1e-9 for a, b in zip(seq, seq[1:])):
            raise ValueError("percentiles must be monotone")


def collect_ebrt(events):
    """Light-to-press delays from one recording's event log, in ms.

    Every emergency pedal press must follow an unconsumed brake-light
    event; anything unmatched raises.
    """
    delays = []
    pending = None
    for ev in sorted(events, key=lambda e: e.t_ms):
        if ev.kind is EventKind.BRAKE_LIGHT_ON:
            if pending is not None:
                raise ValueError(
                    f"brake light at {pending} ms has no pedal press")
            pending = ev.t_ms
        elif ev.kind is EventKind.BRAKE_PEDAL_PRESS \
                and ev.label == ClassLabel.EMERGENCY:
            if pending is None:
                raise ValueError(
                    f"emergency press at {ev.t_ms} ms has no brake light")
            delays.append(ev.t_ms - pending)
            pending = None
    if pending is not None:
        raise ValueError(f"brake light at {pending} ms has no pedal press")
    return np.array(delays)


def ebrt_stats(event_logs):
    """Descriptive statistics of emergency braking response times.

    Parameters
    ----------
    event_logs : iterable of event sequences, one per recording
    """
    values = np.concatenate([collect_ebrt(log) for log in event_logs])
    if len(values) == 0:
        raise ValueError("no emergency light/press pairs found")
    pct = np.percentile(values, [5, 25, 50, 75, 95])  # linear interpolation
    std = float(values.std(ddof=1)) if len(values) > 1 else 0.0
    return EbrtStats(
        n=int(len(values)),
        mean_ms=float(values.mean()),
        std_ms=std,
        min_ms=float(values.min()),
        max_ms=float(values.max()),
        percentiles={5: float(pct[0]), 25: float(pct[1]), 50: float(pct[2]),
                     75: float(pct[3]), 95: float(pct[4])},
    )


# ---------------------------------------------------------------------------
# Topographic-map export
# ---------------------------------------------------------------------------

def topomap_export(set_a, set_b, times_ms, half_window_ms=25.0):
    """Grand-average difference map, set_a minus set_b, per channel.

    Values are averaged over +-half_window_ms around each requested time
    (relative to the press). Returns a list of rows
    (channel, x, y, time_ms, value_uv) suitable for CSV export.
    """
    if set_a.montage.names != set_b.montage.names:
        raise ValueError("epoch sets use different montages")
    if set_a.sample_rate != set_b.sample_rate or \
            set_a.n_samples != set_b.n_samples:
        raise ValueError("epoch sets have mismatched shapes")
    rate = set_a.sample_rate
    t0_idx = int(round(set_a.epochs[0].t0_offset_ms * rate / 1000.0))
    half_n = int(round(half_window_ms * rate / 1000.0))
    ga = set_a.data().mean(axis=0)
    gb = set_b.data().mean(axis=0)
    montage = set_a.montage
    rows = []
    for t in times_ms:
        center = t0_idx + int(round(t * rate / 1000.0))
        lo, hi = center - half_n, center + half_n + 1
        if lo < 0 or hi > set_a.n_samples:
            raise ValueError(f"time {t} ms falls outside the epoch window")
        diff = (ga[:, lo:hi] - gb[:, lo:hi]).mean(axis=1)
        for i, name in enumerate(montage.names):
            rows.append((name, float(montage.positions[i, 0]),
                         float(montage.positions[i, 1]), float(t),
                         float(diff[i])))
    return rows
