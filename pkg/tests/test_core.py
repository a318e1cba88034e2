import struct

import numpy as np
import pytest

from brakesense.core import (BadMagicError, ChannelMontage, ClassLabel,
                             ContinuousRecording, Epoch, EpochSet, Event,
                             EventKind, ShapeError, TruncatedError,
                             VersionError, default_montage, make_rng,
                             read_epochset, split_seed, write_epochset)

from conftest import make_epochs


def test_default_montage_shape(montage):
    assert montage.n_channels == 28
    assert montage.names[0] == "F5" and montage.names[-1] == "O2"
    assert np.all(np.hypot(*montage.positions.T) <= 1.0)


def test_montage_validation():
    with pytest.raises(ValueError):
        ChannelMontage(("A", "A"), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        ChannelMontage(("A",), np.zeros((1, 2)))
    with pytest.raises(ValueError):
        ChannelMontage(("A", "B"), np.array([[0.0, 0.0], [2.0, 0.0]]))


def test_montage_index(montage):
    assert montage.index("Oz") == 26
    with pytest.raises(KeyError):
        montage.index("Cz9")


def test_recording_event_validation(montage):
    samples = np.zeros((28, 100), dtype=np.float32)
    ev_ok = (Event(10.0, EventKind.BRAKE_LIGHT_ON),
             Event(400.0, EventKind.BRAKE_PEDAL_PRESS, ClassLabel.EMERGENCY))
    ContinuousRecording(montage, 200, samples, ev_ok)
    with pytest.raises(ValueError):
        ContinuousRecording(montage, 200, samples,
                            (Event(600.0, EventKind.BRAKE_LIGHT_ON),))
    with pytest.raises(ValueError):
        ContinuousRecording(montage, 200, samples, ev_ok[::-1])
    with pytest.raises(ValueError):
        Event(1.0, EventKind.BRAKE_PEDAL_PRESS)  # press without class


def test_epochset_uniform_shape(montage):
    a = Epoch(ClassLabel.NORMAL, np.zeros((28, 10), np.float32), 5)
    b = Epoch(ClassLabel.NORMAL, np.zeros((28, 12), np.float32), 5)
    with pytest.raises(ValueError):
        EpochSet(montage, 200, (a, b))
    with pytest.raises(ValueError):
        EpochSet(montage, 200,
                 (Epoch(ClassLabel.NORMAL, np.zeros((27, 10)), 5),))


def test_epo_roundtrip_identity(tmp_path, montage):
    original = make_epochs(
        montage, [ClassLabel.EMERGENCY, ClassLabel.NORMAL,
                  ClassLabel.NO_BRAKING], seed=3)
    path = tmp_path / "x.epo"
    write_epochset(original, path)
    loaded = read_epochset(path)
    assert loaded.montage.names == original.montage.names
    assert np.array_equal(loaded.montage.positions,
                          original.montage.positions)
    assert loaded.sample_rate == original.sample_rate
    assert len(loaded) == len(original)
    for a, b in zip(loaded.epochs, original.epochs):
        assert a.label == b.label
        assert a.t0_offset_ms == b.t0_offset_ms
        assert a.samples.dtype == np.float32
        assert np.array_equal(a.samples, b.samples)
    # second trip is byte-identical
    path2 = tmp_path / "y.epo"
    write_epochset(loaded, path2)
    assert path.read_bytes() == path2.read_bytes()


def test_epo_payload_size(tmp_path, montage):
    # size computed independently from the container layout
    n, c, t = 189, 28, 800
    eps = tuple(Epoch(ClassLabel.EMERGENCY, np.zeros((c, t), np.float32),
                      3000) for _ in range(n))
    path = tmp_path / "big.epo"
    write_epochset(EpochSet(montage, 200, eps), path)
    header = 4 + 2 + 2 + 4 + 4 + 4
    names = sum(2 + len(name.encode()) for name in montage.names)
    positions = c * 8
    records = n * (1 + 4 + c * t * 4)
    assert path.stat().st_size == header + names + positions + records


def test_epo_bad_magic(tmp_path):
    path = tmp_path / "bad.epo"
    path.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(BadMagicError):
        read_epochset(path)


def test_epo_version_mismatch(tmp_path, montage):
    original = make_epochs(montage, [ClassLabel.NORMAL])
    path = tmp_path / "v.epo"
    write_epochset(original, path)
    blob = bytearray(path.read_bytes())
    blob[4:6] = struct.pack("<H", 9)
    path.write_bytes(bytes(blob))
    with pytest.raises(VersionError):
        read_epochset(path)


def test_epo_truncated(tmp_path, montage):
    original = make_epochs(montage, [ClassLabel.NORMAL] * 2)
    path = tmp_path / "t.epo"
    write_epochset(original, path)
    blob = path.read_bytes()
    path.write_bytes(blob[:len(blob) - 37])
    with pytest.raises(TruncatedError):
        read_epochset(path)


def test_epo_trailing_garbage(tmp_path, montage):
    original = make_epochs(montage, [ClassLabel.NORMAL])
    path = tmp_path / "g.epo"
    write_epochset(original, path)
    path.write_bytes(path.read_bytes() + b"xx")
    with pytest.raises(ShapeError):
        read_epochset(path)


def test_epo_bad_label_byte(tmp_path, montage):
    original = make_epochs(montage, [ClassLabel.NORMAL], n_samples=4)
    path = tmp_path / "l.epo"
    write_epochset(original, path)
    blob = bytearray(path.read_bytes())
    # label byte of the first record sits right after header+names+positions
    offset = 20 + sum(2 + len(n.encode()) for n in montage.names) + 28 * 8
    blob[offset] = 7
    path.write_bytes(bytes(blob))
    with pytest.raises(ShapeError):
        read_epochset(path)


def test_split_seed_deterministic_and_distinct():
    assert split_seed(123, 0) == split_seed(123, 0)
    seen = {split_seed(123, k) for k in range(64)}
    assert len(seen) == 64
    assert split_seed(124, 0) != split_seed(123, 0)


def test_make_rng_reproducible():
    a = make_rng(99).standard_normal(8)
    b = make_rng(99).standard_normal(8)
    assert np.array_equal(a, b)
