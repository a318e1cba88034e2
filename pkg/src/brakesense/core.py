"""Shared domain types, the EPO1 epoch-set file format, and seeded RNG streams.

Samples are kept in microvolts. On disk they are 32-bit floats (channel-major
per epoch); all downstream covariance / classifier math promotes to float64.
"""

import json
import struct
from dataclasses import dataclass, field
from enum import Enum, IntEnum

import numpy as np

__all__ = [
    "ClassLabel",
    "EventKind",
    "Event",
    "ChannelMontage",
    "ContinuousRecording",
    "Epoch",
    "EpochSet",
    "default_montage",
    "write_epochset",
    "read_epochset",
    "EpoFormatError",
    "BadMagicError",
    "VersionError",
    "TruncatedError",
    "ShapeError",
    "split_seed",
    "make_rng",
]

# 28 recording electrodes of the 10-20 montage used throughout.
CHANNEL_NAMES = (
    "F5", "F3", "Fz", "F4", "F6",
    "FT7", "FC5", "FC1", "FC2", "FC6", "FT8",
    "T7", "C3", "Cz", "C4", "T8",
    "CP5", "CP1", "CP2", "CP6",
    "P5", "P3", "Pz", "P4", "P6",
    "O1", "Oz", "O2",
)

# Approximate 2-D scalp projection (x toward right ear, y toward nasion),
# normalized to the unit disc.  Used only for topographic-map export.
CHANNEL_POSITIONS = {
    "F5": (-0.60, 0.42), "F3": (-0.32, 0.41), "Fz": (0.00, 0.40),
    "F4": (0.32, 0.41), "F6": (0.60, 0.42),
    "FT7": (-0.77, 0.24), "FC5": (-0.52, 0.21), "FC1": (-0.18, 0.20),
    "FC2": (0.18, 0.20), "FC6": (0.52, 0.21), "FT8": (0.77, 0.24),
    "T7": (-0.80, 0.00), "C3": (-0.40, 0.00), "Cz": (0.00, 0.00),
    "C4": (0.40, 0.00), "T8": (0.80, 0.00),
    "CP5": (-0.52, -0.21), "CP1": (-0.18, -0.20),
    "CP2": (0.18, -0.20), "CP6": (0.52, -0.21),
    "P5": (-0.55, -0.42), "P3": (-0.32, -0.41), "Pz": (0.00, -0.40),
    "P4": (0.32, -0.41), "P6": (0.55, -0.42),
    "O1": (-0.25, -0.76), "Oz": (0.00, -0.80), "O2": (0.25, -0.76),
}

DEFAULT_SAMPLE_RATE = 200


class ClassLabel(IntEnum):
    """Trial class. Integer values match the on-disk label byte."""

    EMERGENCY = 0
    NORMAL = 1
    NO_BRAKING = 2


class EventKind(Enum):
    BRAKE_LIGHT_ON = "brake_light_on"
    BRAKE_PEDAL_PRESS = "brake_pedal_press"


@dataclass(frozen=True)
class Event:
    """Time-stamped marker in a continuous recording.

    ``label`` carries the braking class for pedal presses and is None for
    brake-light events.
    """

    t_ms: float
    kind: EventKind
    label: "ClassLabel | None" = None

    def __post_init__(self):
        if self.kind is EventKind.BRAKE_PEDAL_PRESS and self.label is None:
            raise ValueError("pedal-press events need a class label")


@dataclass(frozen=True)
class ChannelMontage:
    """Ordered channel labels with 2-D unit-disc scalp coordinates."""

    names: tuple
    positions: np.ndarray  # (C, 2) float64

    def __post_init__(self):
        names = tuple(self.names)
        object.__setattr__(self, "names", names)
        pos = np.asarray(self.positions, dtype=np.float64)
        object.__setattr__(self, "positions", pos)
        if len(names) < 2:
            raise ValueError("montage needs at least 2 channels")
        if len(set(names)) != len(names):
            raise ValueError("duplicate channel names in montage")
        if pos.shape != (len(names), 2):
            raise ValueError("positions must be (n_channels, 2)")
        if np.any(np.hypot(pos[:, 0], pos[:, 1]) > 1.0 + 1e-9):
            raise ValueError("positions must lie within the unit disc")

    @property
    def n_channels(self):
        return len(self.names)

    def index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown channel {name!r}") from None


def default_montage():
    """The 28-electrode montage used for all default configurations."""
    # Snap to f32 once so montages survive the f32 on-disk positions exactly.
    pos = np.array([CHANNEL_POSITIONS[n] for n in CHANNEL_NAMES],
                   dtype=np.float32).astype(np.float64)
    return ChannelMontage(CHANNEL_NAMES, pos)


@dataclass(frozen=True)
class ContinuousRecording:
    """Multichannel EEG time series with a time-stamped event log.

    ``samples`` is a (channels, time) array in microvolts. Events are kept
    sorted by timestamp and must fall inside the recording.
    """

    montage: ChannelMontage
    sample_rate: int
    samples: np.ndarray
    events: tuple

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        samples = np.asarray(self.samples)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "events", tuple(self.events))
        if samples.ndim != 2 or samples.shape[0] != self.montage.n_channels:
            raise ValueError("samples must be (n_channels, n_samples)")
        dur = self.duration_ms
        last = -np.inf
        for ev in self.events:
            if not 0.0 <= ev.t_ms <= dur:
                raise ValueError(f"event at {ev.t_ms} ms outside recording")
            if ev.t_ms < last:
                raise ValueError("events must be nondecreasing in time")
            last = ev.t_ms

    @property
    def n_samples(self):
        return self.samples.shape[1]

    @property
    def duration_ms(self):
        return self.n_samples * 1000.0 / self.sample_rate


@dataclass(frozen=True)
class Epoch:
    """Fixed-length labeled segment time-locked to a brake-pedal press.

    ``t0_offset_ms`` is the position of the press within the epoch; it is
    kept (at the default pre-window) for no-braking epochs too, so window
    arithmetic is uniform across classes.
    """

    label: ClassLabel
    samples: np.ndarray  # (C, T)
    t0_offset_ms: int

    def __post_init__(self):
        samples = np.asarray(self.samples)
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 2:
            raise ValueError("epoch samples must be 2-D")


@dataclass(frozen=True)
class EpochSet:
    """Uniformly shaped collection of epochs sharing montage and rate."""

    montage: ChannelMontage
    sample_rate: int
    epochs: tuple
    provenance: str = ""

    def __post_init__(self):
        object.__setattr__(self, "epochs", tuple(self.epochs))
        c = self.montage.n_channels
        shape = None
        for ep in self.epochs:
            if ep.samples.shape[0] != c:
                raise ValueError("epoch channel count does not match montage")
            if shape is None:
                shape = ep.samples.shape
            elif ep.samples.shape != shape:
                raise ValueError("all epochs in a set must share one shape")

    def __len__(self):
        return len(self.epochs)

    @property
    def n_samples(self):
        return self.epochs[0].samples.shape[1] if self.epochs else 0

    def labels(self):
        return np.array([ep.label for ep in self.epochs], dtype=np.int64)

    def class_counts(self):
        counts = {}
        for ep in self.epochs:
            counts[ep.label] = counts.get(ep.label, 0) + 1
        return counts

    def select(self, indices):
        """New set containing the epochs at ``indices`` (order preserved)."""
        eps = tuple(self.epochs[i] for i in indices)
        return EpochSet(self.montage, self.sample_rate, eps, self.provenance)

    def data(self, dtype=np.float64):
        """Stack epochs into an (n, C, T) array."""
        return np.stack([ep.samples for ep in self.epochs]).astype(dtype)


# ---------------------------------------------------------------------------
# EPO1 binary container
# ---------------------------------------------------------------------------

EPO_MAGIC = b"EPO1"
EPO_VERSION = 1


class EpoFormatError(Exception):
    """Base class for epoch-set container errors."""


class BadMagicError(EpoFormatError):
    pass


class VersionError(EpoFormatError):
    pass


class TruncatedError(EpoFormatError):
    pass


class ShapeError(EpoFormatError):
    pass


def write_epochset(epochset, path):
    """Serialize an EpochSet to the EPO1 container.

    Layout (all integers little-endian): magic ``EPO1``; u16 version; u16
    channel count C; u32 samples per epoch T; u32 sample rate; u32 epoch
    count N; C channel names (u16 byte length + UTF-8); C (f32 x, f32 y)
    positions; N records of [u8 label, u32 t0_offset_ms, C*T little-endian
    f32, channel-major].  Provenance is bookkeeping metadata and does not
    travel in the container; pipeline manifests carry it instead.
    """
    c = epochset.montage.n_channels
    t = epochset.n_samples
    parts = [
        EPO_MAGIC,
        struct.pack("<HHIII", EPO_VERSION, c, t, epochset.sample_rate,
                    len(epochset.epochs)),
    ]
    for name in epochset.montage.names:
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
    pos = np.ascontiguousarray(epochset.montage.positions, dtype="<f4")
    parts.append(pos.tobytes())
    for ep in epochset.epochs:
        if ep.samples.shape != (c, t):
            raise ShapeError("epoch shape inconsistent with set header")
        parts.append(struct.pack("<BI", int(ep.label), int(ep.t0_offset_ms)))
        parts.append(np.ascontiguousarray(ep.samples, dtype="<f4").tobytes())
    blob = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(blob)


class _Cursor:
    def __init__(self, blob):
        self.blob = blob
        self.off = 0

    def take(self, n):
        if self.off + n > len(self.blob):
            raise TruncatedError(
                f"need {n} bytes at offset {self.off}, file has "
                f"{len(self.blob)}")
        out = self.blob[self.off:self.off + n]
        self.off += n
        return out

    def unpack(self, fmt):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def read_epochset(path):
    """Read an EPO1 container written by :func:`write_epochset`."""
    with open(path, "rb") as fh:
        blob = fh.read()
    cur = _Cursor(blob)
    if cur.take(4) != EPO_MAGIC:
        raise BadMagicError(f"{path}: not an EPO1 file")
    version, c, t, rate, n = cur.unpack("<HHIII")
    if version != EPO_VERSION:
        raise VersionError(f"unsupported EPO version {version}")
    names = []
    for _ in range(c):
        (ln,) = cur.unpack("<H")
        names.append(cur.take(ln).decode("utf-8"))
    pos = np.frombuffer(cur.take(8 * c), dtype="<f4").reshape(c, 2)
    try:
        montage = ChannelMontage(tuple(names), pos.astype(np.float64))
    except ValueError as exc:
        raise ShapeError(str(exc)) from exc
    epochs = []
    for _ in range(n):
        label_byte, t0 = cur.unpack("<BI")
        try:
            label = ClassLabel(label_byte)
        except ValueError:
            raise ShapeError(f"unknown class label byte {label_byte}")
        data = np.frombuffer(cur.take(4 * c * t), dtype="<f4")
        epochs.append(Epoch(label, data.reshape(c, t).copy(), t0))
    if cur.off != len(blob):
        raise ShapeError(f"{len(blob) - cur.off} trailing bytes after payload")
    return EpochSet(montage, rate, tuple(epochs))


# ---------------------------------------------------------------------------
# Seeded randomness
# ---------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1


def split_seed(seed, stream_id):
    """Derive an independent 64-bit child seed for a numbered stream.

    Same (seed, stream_id) always gives the same child; distinct stream ids
    give statistically independent streams.
    """
    ss = np.random.SeedSequence(entropy=int(seed) & _MASK64,
                                spawn_key=(int(stream_id),))
    return int(ss.generate_state(2, np.uint32).view(np.uint64)[0])


def make_rng(seed):
    """PCG64 generator for a 64-bit seed."""
    return np.random.Generator(np.random.PCG64(int(seed) & _MASK64))


def provenance_json(**fields):
    """Canonical provenance string for EpochSet bookkeeping."""
    return json.dumps(fields, sort_keys=True)


def parse_provenance(text):
    try:
        return json.loads(text) if text else {}
    except json.JSONDecodeError:
        return {}
