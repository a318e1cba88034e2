"""Batch command-line front end: `brakesense` with subcommands
simulate / preprocess / evaluate / report / topomap / ebrt.

Every command is driven by a JSON pipeline configuration plus a 64-bit
seed (flag, else $BRAKESENSE_SEED, else 0) and writes its outputs
atomically under --out. Exit codes: 0 success, 2 usage or configuration
error, 3 data error, 4 numerical failure (with --strict).
"""

import argparse
import hashlib
import json
import os
import struct
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace

import numpy as np

from . import evaluation as ev
from .classifiers import (CLASSIFIER_KINDS, CnnConfig, CspLdaConfig,
                          NumericalError, RmdmConfig)
from .core import (ChannelMontage, ClassLabel, ContinuousRecording, EpochSet,
                   Event, EventKind, EpoFormatError, default_montage,
                   read_epochset, split_seed, write_epochset)
from .preprocess import (EpochWindowSpec, InsufficientDataError, apply_filter,
                         baseline_correct, design_bandpass,
                         extract_brake_epochs, extract_no_brake_epochs,
                         reject_artifacts)
from .synth import (ErpTemplateConfig, NoiseConfig, ScenarioConfig,
                    fit_default_rt_model, generate_session)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

PAIRS = {
    "emergency-vs-none": (ClassLabel.EMERGENCY, ClassLabel.NO_BRAKING),
    "normal-vs-none": (ClassLabel.NORMAL, ClassLabel.NO_BRAKING),
    "emergency-vs-normal": (ClassLabel.EMERGENCY, ClassLabel.NORMAL),
}


class ConfigError(ValueError):
    """Configuration file violates the schema; message names the path."""


class DataError(RuntimeError):
    """Missing or malformed input artifacts."""


# ---------------------------------------------------------------------------
# Pipeline configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FilterSpec:
    low_hz: float = 1.0
    high_hz: float = 45.0
    num_taps: int = 401


@dataclass(frozen=True)
class ProtocolSpec:
    repetitions: int = 10
    train_fraction: float = 0.5
    train_window_ms: float = 1000.0
    test_window_len_ms: float = 1000.0
    window_end_range_ms: tuple = (-2000.0, 1000.0)
    window_step_ms: float = 50.0


@dataclass(frozen=True)
class PipelineConfig:
    subjects: int = 11
    sample_rate: int = 200
    no_brake_epochs_per_recording: int = 100
    scenario: ScenarioConfig = ScenarioConfig()
    erp: ErpTemplateConfig = ErpTemplateConfig()
    noise: NoiseConfig = NoiseConfig()
    filter: FilterSpec = FilterSpec()
    epoching: EpochWindowSpec = EpochWindowSpec()
    protocol: ProtocolSpec = ProtocolSpec()
    # classifier settings tuned for the synthetic defaults; the CNN runs in
    # float32 with max-norm regularization and a high SGD rate, which the
    # small per-subject training sets need
    csp_lda: CspLdaConfig = CspLdaConfig()
    rmdm: RmdmConfig = RmdmConfig()
    cnn: CnnConfig = CnnConfig(epochs=60, learning_rate=0.1, dropout=0.5,
                               dtype="float32")


_TUPLE_FIELDS = {"inter_event_s", "gap_m", "burst_band_hz",
                 "window_end_range_ms", "truncation_ms"}


def _build_section(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object")
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in known:
            raise ConfigError(f"{path}.{key}: unknown key")
        if key in _TUPLE_FIELDS:
            if not isinstance(value, (list, tuple)) or len(value) != 2:
                raise ConfigError(f"{path}.{key}: expected a 2-element list")
            value = tuple(float(v) for v in value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


_SECTIONS = {
    "scenario": ScenarioConfig,
    "erp": ErpTemplateConfig,
    "noise": NoiseConfig,
    "filter": FilterSpec,
    "epoching": EpochWindowSpec,
    "protocol": ProtocolSpec,
    "csp_lda": CspLdaConfig,
    "rmdm": RmdmConfig,
    "cnn": CnnConfig,
}
_SCALARS = {"subjects": int, "sample_rate": int,
            "no_brake_epochs_per_recording": int}


def parse_config(data):
    """Validate a configuration document; unknown keys are rejected."""
    if not isinstance(data, dict):
        raise ConfigError("$: expected a JSON object")
    kwargs = {}
    for key, value in data.items():
        if key in _SCALARS:
            try:
                kwargs[key] = _SCALARS[key](value)
            except (TypeError, ValueError):
                raise ConfigError(f"$.{key}: expected {_SCALARS[key].__name__}")
        elif key in _SECTIONS:
            kwargs[key] = _build_section(_SECTIONS[key], value, f"$.{key}")
        else:
            raise ConfigError(f"$.{key}: unknown key")
    return replace(PipelineConfig(), **kwargs)


def load_config(path):
    if path is None:
        return PipelineConfig()
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"$: invalid JSON ({exc})")
    return parse_config(data)


def config_hash(config, seed):
    def encode(obj):
        if hasattr(obj, "__dataclass_fields__"):
            return {f.name: encode(getattr(obj, f.name))
                    for f in fields(obj)}
        if isinstance(obj, tuple):
            return list(obj)
        return obj

    blob = json.dumps({"config": encode(config), "seed": int(seed)},
                      sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# Output helpers
# ---------------------------------------------------------------------------

def sig6(x):
    """Round a float for printing with 6 significant digits."""
    return float(f"{float(x):.6g}")


def _atomic_bytes(path, blob):
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(blob)
    os.replace(tmp, path)


def write_json(path, obj):
    _atomic_bytes(path, (json.dumps(obj, indent=2, sort_keys=True) + "\n")
                  .encode())


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(
            f"{v:.6g}" if isinstance(v, float) else str(v) for v in row))
    _atomic_bytes(path, ("\n".join(lines) + "\n").encode())


def write_curve_csv(path, curve):
    write_csv(path, ["window_end_ms", "mean_acc", "std_acc", "n"],
              [(p.end_ms, p.mean, p.std, p.n) for p in curve.points])


# ---------------------------------------------------------------------------
# REC1 recording container (flat binary, byte-stable across runs)
# ---------------------------------------------------------------------------

REC_MAGIC = b"REC1"
_EVENT_KIND_CODE = {EventKind.BRAKE_LIGHT_ON: 0, EventKind.BRAKE_PEDAL_PRESS: 1}
_EVENT_KIND_BACK = {v: k for k, v in _EVENT_KIND_CODE.items()}


def write_recording(rec, path):
    parts = [REC_MAGIC, struct.pack("<HHII", 1, rec.montage.n_channels,
                                    rec.n_samples, rec.sample_rate)]
    for name in rec.montage.names:
        raw = name.encode()
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
    parts.append(np.ascontiguousarray(rec.montage.positions,
                                      dtype="<f4").tobytes())
    parts.append(struct.pack("<I", len(rec.events)))
    for evnt in rec.events:
        label = 255 if evnt.label is None else int(evnt.label)
        parts.append(struct.pack("<dBB", evnt.t_ms,
                                 _EVENT_KIND_CODE[evnt.kind], label))
    parts.append(np.ascontiguousarray(rec.samples, dtype="<f4").tobytes())
    _atomic_bytes(path, b"".join(parts))


def read_recording(path):
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except FileNotFoundError:
        raise DataError(f"recording not found: {path}")
    if blob[:4] != REC_MAGIC:
        raise DataError(f"{path}: not a REC1 recording")
    version, c, t, rate = struct.unpack("<HHII", blob[4:16])
    if version != 1:
        raise DataError(f"{path}: unsupported recording version {version}")
    off = 16
    names = []
    for _ in range(c):
        (ln,) = struct.unpack_from("<H", blob, off)
        off += 2
        names.append(blob[off:off + ln].decode())
        off += ln
    pos = np.frombuffer(blob, dtype="<f4", count=2 * c, offset=off) \
        .reshape(c, 2).astype(np.float64)
    off += 8 * c
    (n_events,) = struct.unpack_from("<I", blob, off)
    off += 4
    events = []
    for _ in range(n_events):
        t_ms, kind, label = struct.unpack_from("<dBB", blob, off)
        off += 10
        events.append(Event(t_ms, _EVENT_KIND_BACK[kind],
                            None if label == 255 else ClassLabel(label)))
    samples = np.frombuffer(blob, dtype="<f4", count=c * t, offset=off) \
        .reshape(c, t).copy()
    return ContinuousRecording(ChannelMontage(tuple(names), pos), rate,
                               samples, tuple(events))


def write_events_csv(rec, path):
    rows = []
    for evnt in rec.events:
        kind = "brake_light_on" if evnt.kind is EventKind.BRAKE_LIGHT_ON \
            else "brake_pedal_press"
        label = "" if evnt.label is None else evnt.label.name.lower()
        rows.append((sig6(evnt.t_ms), kind, label))
    write_csv(path, ["timestamp_ms", "kind", "class"], rows)


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _simulate_one(args):
    config, seed, out_dir, subject, mode = args
    scenario = replace(config.scenario, mode=mode)
    rec = generate_session(
        scenario, config.erp, config.noise, fit_default_rt_model(),
        seed=split_seed(seed, subject * 2 + (0 if mode == "emergency" else 1)),
        sample_rate=config.sample_rate)
    stem = f"s{subject:02d}_{mode}"
    rec_path = os.path.join(out_dir, f"recording_{stem}.rec")
    csv_path = os.path.join(out_dir, f"events_{stem}.csv")
    write_recording(rec, rec_path)
    write_events_csv(rec, csv_path)
    return {"subject": subject, "mode": mode,
            "recording": os.path.basename(rec_path),
            "events_csv": os.path.basename(csv_path),
            "n_events": len(rec.events)}


def cmd_simulate(config, seed, out_dir, jobs=1):
    os.makedirs(out_dir, exist_ok=True)
    tasks = [(config, seed, out_dir, subject, mode)
             for subject in range(config.subjects)
             for mode in ("emergency", "normal")]
    items = _run_tasks(_simulate_one, tasks, jobs)
    manifest = {
        "kind": "simulate",
        "config_hash": config_hash(config, seed),
        "seed": int(seed),
        "sample_rate": config.sample_rate,
        "recordings": sorted(items, key=lambda d: (d["subject"], d["mode"])),
    }
    write_json(os.path.join(out_dir, "manifest.json"), manifest)
    return manifest


# ---------------------------------------------------------------------------
# preprocess
# ---------------------------------------------------------------------------

def _preprocess_one(args):
    config, seed, in_dir, out_dir, item, threshold = args
    rec = read_recording(os.path.join(in_dir, item["recording"]))
    filt = design_bandpass(config.filter.low_hz, config.filter.high_hz,
                           rec.sample_rate, config.filter.num_taps)
    rec = apply_filter(rec, filt)
    spec = config.epoching
    brake, skipped = extract_brake_epochs(rec, spec)
    epochs = list(brake.epochs)
    if config.no_brake_epochs_per_recording > 0:
        nb_seed = split_seed(seed, 7_000 + item["subject"] * 2
                             + (0 if item["mode"] == "emergency" else 1))
        epochs.extend(extract_no_brake_epochs(
            rec, spec, config.no_brake_epochs_per_recording, nb_seed).epochs)
    merged = EpochSet(rec.montage, rec.sample_rate, tuple(epochs))
    kept, rejected = reject_artifacts(merged, threshold)
    clean = baseline_correct(kept, spec.baseline_ms)
    stem = f"s{item['subject']:02d}_{item['mode']}"
    out_path = os.path.join(out_dir, f"epochs_{stem}.epo")
    tmp = out_path + ".tmp"
    write_epochset(clean, tmp)
    os.replace(tmp, out_path)
    counts = {k.name.lower(): v for k, v in clean.class_counts().items()}
    return {"subject": item["subject"], "mode": item["mode"],
            "epochs": os.path.basename(out_path),
            "total": len(merged), "rejected": rejected,
            "skipped_presses": skipped, "kept_per_class": counts}


def cmd_preprocess(config, seed, manifest_path, out_dir, jobs=1,
                   threshold=None):
    manifest = _load_manifest(manifest_path, "simulate")
    in_dir = os.path.dirname(os.path.abspath(manifest_path))
    if not manifest.get("recordings"):
        raise ConfigError("$.recordings: empty recording list")
    os.makedirs(out_dir, exist_ok=True)
    threshold = config.epoching.artifact_threshold_uv if threshold is None \
        else threshold
    tasks = [(config, seed, in_dir, out_dir, item, threshold)
             for item in manifest["recordings"]]
    items = _run_tasks(_preprocess_one, tasks, jobs)
    items.sort(key=lambda d: (d["subject"], d["mode"]))
    report = {
        "total": sum(d["total"] for d in items),
        "rejected": sum(d["rejected"] for d in items),
        "kept_per_class": _sum_counts(items),
    }
    out_manifest = {
        "kind": "preprocess",
        "config_hash": config_hash(config, seed),
        "source_hash": manifest.get("config_hash", ""),
        "items": items,
        "report": report,
    }
    write_json(os.path.join(out_dir, "manifest.json"), out_manifest)
    write_json(os.path.join(out_dir, "rejection_report.json"), report)
    return out_manifest


def _sum_counts(items):
    total = {}
    for item in items:
        for name, count in item["kept_per_class"].items():
            total[name] = total.get(name, 0) + count
    return total


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

def _classifier_config(config, kind):
    return {"csp-lda": config.csp_lda, "rmdm": config.rmdm,
            "cnn": config.cnn}[kind]


def _subject_sets(manifest_path):
    manifest = _load_manifest(manifest_path, "preprocess")
    in_dir = os.path.dirname(os.path.abspath(manifest_path))
    subjects = {}
    for item in manifest["items"]:
        try:
            eset = read_epochset(os.path.join(in_dir, item["epochs"]))
        except (OSError, EpoFormatError) as exc:
            raise DataError(f"cannot read {item['epochs']}: {exc}")
        subjects.setdefault(item["subject"], []).append(eset)
    merged = {}
    for subject, sets in sorted(subjects.items()):
        first = sets[0]
        epochs = tuple(ep for s in sets for ep in s.epochs)
        merged[subject] = EpochSet(first.montage, first.sample_rate, epochs)
    return merged


def _evaluate_subject(args):
    subject, eset, pair, protocol_spec, clf, clf_config, seed, strict = args
    balanced = ev.balance_classes(eset, PAIRS[pair],
                                  split_seed(seed, 500 + subject))
    protocol = ev.EvalProtocol(
        repetitions=protocol_spec.repetitions,
        train_fraction=protocol_spec.train_fraction,
        train_window_ms=protocol_spec.train_window_ms,
        test_window_len_ms=protocol_spec.test_window_len_ms,
        window_end_range_ms=protocol_spec.window_end_range_ms,
        window_step_ms=protocol_spec.window_step_ms,
        classifier=clf,
        classifier_config=clf_config,
        seed=split_seed(seed, 900 + subject),
    )
    curve, report = ev.run_protocol(balanced, protocol)
    if strict and report.nonconverged_means:
        raise NumericalError(
            f"subject {subject}: {report.nonconverged_means} geometric "
            "means did not converge")
    return subject, curve, report


def cmd_evaluate(config, seed, manifest_path, out_dir, pair, clf_names,
                 jobs=1, strict=False):
    subjects = _subject_sets(manifest_path)
    if not subjects:
        raise DataError("no epoch sets found in the manifest")
    os.makedirs(out_dir, exist_ok=True)
    results = {}
    for clf in clf_names:
        tasks = [(subject, eset, pair, config.protocol, clf,
                  _classifier_config(config, clf), seed, strict)
                 for subject, eset in subjects.items()]
        out = _run_tasks(_evaluate_subject, tasks, jobs)
        out.sort(key=lambda r: r[0])
        curves = [curve for _, curve, _ in out]
        grand = ev.aggregate_curves(curves)
        clf_dir = os.path.join(out_dir, clf)
        os.makedirs(clf_dir, exist_ok=True)
        write_curve_csv(os.path.join(clf_dir, "curve.csv"), grand)
        report = {
            "pair": pair,
            "classifier": clf,
            "config_hash": config_hash(config, seed),
            "subjects": [
                {
                    "subject": subject,
                    "input_counts": rep.input_counts,
                    "train_size": rep.train_size,
                    "test_size": rep.test_size,
                    "tie_count": rep.tie_count,
                    "nonconverged_means": rep.nonconverged_means,
                    "wall_time_s": sig6(rep.wall_time_s),
                    "per_repetition_accuracy": [
                        [sig6(a) for a in row]
                        for row in rep.per_repetition_accuracy],
                }
                for (subject, _, rep) in out
            ],
            "window_ends_ms": [sig6(e) for e in grand.ends()],
            "grand_mean": [sig6(p.mean) for p in grand.points],
            "grand_std": [sig6(p.std) for p in grand.points],
        }
        write_json(os.path.join(clf_dir, "report.json"), report)
        results[clf] = (grand, report)
    return results


# ---------------------------------------------------------------------------
# report / topomap / ebrt
# ---------------------------------------------------------------------------

def cmd_report(run_dirs, out_dir):
    rows = []
    for run_dir in run_dirs:
        found = 0
        for root, _, files in sorted(os.walk(run_dir)):
            if "report.json" not in files or "curve.csv" not in files:
                continue
            found += 1
            with open(os.path.join(root, "report.json")) as fh:
                report = json.load(fh)
            ends = np.array(report["window_ends_ms"], dtype=float)
            means = np.array(report["grand_mean"], dtype=float)
            stds = np.array(report["grand_std"], dtype=float)
            row = {"pair": report["pair"], "classifier": report["classifier"]}
            for target, name in ((0.0, "acc_at_0ms"), (-100.0, "acc_at_m100ms")):
                idx = np.flatnonzero(np.abs(ends - target) < 1e-6)
                if len(idx):
                    row[name] = means[idx[0]]
                    row[name + "_std"] = stds[idx[0]]
                else:
                    row[name] = float("nan")
                    row[name + "_std"] = float("nan")
            rows.append(row)
        if not found:
            raise DataError(
                f"no completed runs (report.json + curve.csv) under "
                f"{run_dir}")
    rows.sort(key=lambda r: (r["pair"], r["classifier"]))
    os.makedirs(out_dir, exist_ok=True)
    header = ["pair", "classifier", "acc_at_0ms", "acc_at_0ms_std",
              "acc_at_m100ms", "acc_at_m100ms_std"]
    write_csv(os.path.join(out_dir, "summary.csv"), header,
              [tuple(r[h] for h in header) for r in rows])
    lines = [f"{'pair':22s} {'classifier':10s} {'acc@0ms':>16s} "
             f"{'acc@-100ms':>16s}"]
    for r in rows:
        lines.append(
            f"{r['pair']:22s} {r['classifier']:10s} "
            f"{r['acc_at_0ms']:.4f} +- {r['acc_at_0ms_std']:.4f} "
            f"{r['acc_at_m100ms']:.4f} +- {r['acc_at_m100ms_std']:.4f}")
    text = "\n".join(lines)
    print(text)
    _atomic_bytes(os.path.join(out_dir, "summary.txt"),
                  (text + "\n").encode())
    return rows


def cmd_topomap(manifest_path, out_dir, pair, times_ms, seed):
    subjects = _subject_sets(manifest_path)
    if not subjects:
        raise DataError("no epoch sets found in the manifest")
    label_a, label_b = PAIRS[pair]
    montage = default_montage()
    epochs_a, epochs_b = [], []
    sample_rate = None
    for eset in subjects.values():
        montage = eset.montage
        sample_rate = eset.sample_rate
        for ep in eset.epochs:
            if ep.label == label_a:
                epochs_a.append(ep)
            elif ep.label == label_b:
                epochs_b.append(ep)
    if not epochs_a or not epochs_b:
        raise DataError(f"pair {pair}: one of the classes is empty")
    set_a = EpochSet(montage, sample_rate, tuple(epochs_a))
    set_b = EpochSet(montage, sample_rate, tuple(epochs_b))
    rows = ev.topomap_export(set_a, set_b, times_ms)
    os.makedirs(out_dir, exist_ok=True)
    write_csv(os.path.join(out_dir, "topomap.csv"),
              ["channel", "x", "y", "time_ms", "value_uv"], rows)
    return rows


def cmd_ebrt(manifest_path, out_path):
    manifest = _load_manifest(manifest_path, "simulate")
    in_dir = os.path.dirname(os.path.abspath(manifest_path))
    logs = []
    for item in manifest["recordings"]:
        rec = read_recording(os.path.join(in_dir, item["recording"]))
        logs.append(rec.events)
    try:
        stats = ev.ebrt_stats(logs)
    except ValueError as exc:
        raise DataError(str(exc))
    payload = {
        "n": stats.n,
        "mean_ms": sig6(stats.mean_ms),
        "std_ms": sig6(stats.std_ms),
        "min_ms": sig6(stats.min_ms),
        "max_ms": sig6(stats.max_ms),
        "percentiles": {str(k): sig6(v)
                        for k, v in sorted(stats.percentiles.items())},
    }
    os.makedirs(os.path.dirname(os.path.abspath(out_path)), exist_ok=True)
    write_json(out_path, payload)
    return stats


# ---------------------------------------------------------------------------
# plumbing
# ---------------------------------------------------------------------------

def _load_manifest(path, expected_kind):
    try:
        with open(path) as fh:
            manifest = json.load(fh)
    except FileNotFoundError:
        raise DataError(f"manifest not found: {path}")
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})")
    if manifest.get("kind") != expected_kind:
        raise DataError(f"{path}: expected a {expected_kind} manifest")
    return manifest


def _run_tasks(fn, tasks, jobs):
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def _resolve_seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("BRAKESENSE_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"$BRAKESENSE_SEED: not an integer: {env!r}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="brakesense",
        description="Synthetic EEG braking-intention decoding pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", help="pipeline config JSON")
        p.add_argument("--seed", type=int, default=None,
                       help="64-bit seed (default $BRAKESENSE_SEED or 0)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--jobs", type=int, default=1,
                       help="parallel subject workers")
        p.add_argument("--strict", action="store_true",
                       help="escalate numerical warnings to errors")

    p = sub.add_parser("simulate", help="generate synthetic recordings")
    common(p)

    p = sub.add_parser("preprocess", help="filter, epoch, reject, baseline")
    common(p)
    p.add_argument("--recordings", required=True,
                   help="manifest.json from simulate")
    p.add_argument("--threshold-uv", type=float, default=None,
                   help="override artifact rejection threshold "
                        "(inf disables)")

    p = sub.add_parser("evaluate", help="run the evaluation protocol")
    common(p)
    p.add_argument("--epochs", required=True,
                   help="manifest.json from preprocess")
    p.add_argument("--pair", choices=sorted(PAIRS), required=True)
    p.add_argument("--clf", default="rmdm",
                   help="csp-lda | rmdm | cnn | all")

    p = sub.add_parser("report", help="consolidate evaluation runs")
    p.add_argument("runs", nargs="+", help="evaluation output directories")
    p.add_argument("--out", required=True)

    p = sub.add_parser("topomap", help="export grand-average difference maps")
    common(p)
    p.add_argument("--epochs", required=True,
                   help="manifest.json from preprocess")
    p.add_argument("--pair", choices=sorted(PAIRS),
                   default="emergency-vs-none")
    p.add_argument("--times", default="-1000:0:100",
                   help="start:stop:step in ms (inclusive)")

    p = sub.add_parser("ebrt", help="braking response-time statistics")
    p.add_argument("--recordings", required=True,
                   help="manifest.json from simulate")
    p.add_argument("--out", required=True, help="output JSON path")

    return parser


def _parse_times(spec):
    try:
        start, stop, step = (float(v) for v in spec.split(":"))
        if step <= 0 or stop < start:
            raise ValueError
    except ValueError:
        raise ConfigError(f"--times: bad range spec {spec!r}")
    n = int(round((stop - start) / step))
    return [start + i * step for i in range(n + 1)]


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "report":
            cmd_report(args.runs, args.out)
            return EXIT_OK
        if args.command == "ebrt":
            cmd_ebrt(args.recordings, args.out)
            return EXIT_OK
        seed = _resolve_seed(args)
        config = load_config(args.config)
        if args.command == "simulate":
            manifest = cmd_simulate(config, seed, args.out, jobs=args.jobs)
            print(f"wrote {len(manifest['recordings'])} recordings to "
                  f"{args.out} (config {manifest['config_hash']})")
        elif args.command == "preprocess":
            manifest = cmd_preprocess(config, seed, args.recordings,
                                      args.out, jobs=args.jobs,
                                      threshold=args.threshold_uv)
            rep = manifest["report"]
            print(f"kept {rep['total'] - rep['rejected']} of {rep['total']} "
                  f"epochs ({rep['rejected']} rejected)")
        elif args.command == "evaluate":
            if args.clf == "all":
                clf_names = list(CLASSIFIER_KINDS)
            elif args.clf in CLASSIFIER_KINDS:
                clf_names = [args.clf]
            else:
                raise ConfigError(
                    f"--clf: unknown classifier {args.clf!r}; valid: "
                    f"{', '.join(CLASSIFIER_KINDS)} or all")
            results = cmd_evaluate(config, seed, args.epochs, args.out,
                                   args.pair, clf_names, jobs=args.jobs,
                                   strict=args.strict)
            for clf, (grand, _) in results.items():
                try:
                    point = grand.at(0.0)
                except KeyError:
                    point = grand.points[-1]
                print(f"{args.pair} {clf}: acc at {point.end_ms:g} ms = "
                      f"{point.mean:.4f} +- {point.std:.4f}")
        elif args.command == "topomap":
            rows = cmd_topomap(args.epochs, args.out, args.pair,
                               _parse_times(args.times), seed)
            print(f"wrote {len(rows)} topomap rows to {args.out}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, InsufficientDataError, EpoFormatError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
