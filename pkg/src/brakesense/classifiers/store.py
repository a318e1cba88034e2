"""Versioned binary container for fitted models (magic ``MDL1``).

Same endianness conventions as the epoch container: all integers
little-endian. After the header comes a named tensor dump; float64 and
int64 payloads round-trip bit-exactly.
"""

import struct

import numpy as np

from .cnn import PARAM_NAMES, CnnConfig, CnnModel
from .csp import CspLdaModel
from .spd import RmdmModel

__all__ = ["save_model", "load_model", "ModelFormatError"]

MDL_MAGIC = b"MDL1"
MDL_VERSION = 1
KIND_BYTES = {"csp-lda": 0, "rmdm": 1, "cnn": 2}
KIND_NAMES = {v: k for k, v in KIND_BYTES.items()}
_DTYPES = {0: "<f8", 1: "<i8"}


class ModelFormatError(Exception):
    pass


def _pack_tensors(tensors):
    parts = [struct.pack("<I", len(tensors))]
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        if arr.dtype.kind == "f":
            code, arr = 0, arr.astype("<f8")
        elif arr.dtype.kind in "iub":
            code, arr = 1, arr.astype("<i8")
        else:
            raise ModelFormatError(f"cannot serialize dtype {arr.dtype}")
        raw = name.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<BB", code, arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr).tobytes())
    return b"".join(parts)


def _unpack_tensors(blob, off):
    def take(n):
        nonlocal off
        if off + n > len(blob):
            raise ModelFormatError("truncated model file")
        out = blob[off:off + n]
        off += n
        return out

    (count,) = struct.unpack("<I", take(4))
    tensors = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode("utf-8")
        code, ndim = struct.unpack("<BB", take(2))
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim))
        if code not in _DTYPES:
            raise ModelFormatError(f"unknown tensor dtype code {code}")
        dt = np.dtype(_DTYPES[code])
        n_bytes = int(np.prod(shape, dtype=np.int64)) * dt.itemsize
        tensors[name] = np.frombuffer(take(n_bytes), dtype=dt) \
            .reshape(shape).copy()
    if off != len(blob):
        raise ModelFormatError("trailing bytes after model payload")
    return tensors


def _model_tensors(model):
    if isinstance(model, CspLdaModel):
        return "csp-lda", {
            "classes": np.array(model.classes, dtype=np.int64),
            "filters": model.filters,
            "eigenvalues": model.eigenvalues,
            "lda_w": model.lda_w,
            "lda_b": np.array([model.lda_b]),
            "shrinkage": np.array([model.shrinkage]),
            "k_pairs": np.array([model.k_pairs], dtype=np.int64),
        }
    if isinstance(model, RmdmModel):
        return "rmdm", {
            "classes": np.array(model.classes, dtype=np.int64),
            "means": np.stack(model.class_means),
            "shrinkage": np.array([model.shrinkage]),
            "converged": np.array(model.converged, dtype=np.int64),
            "tie_count": np.array([model.tie_count], dtype=np.int64),
        }
    if isinstance(model, CnnModel):
        cfg = model.config
        std_code = ("none", "per-epoch", "train-channel").index(
            cfg.standardize)
        tensors = {
            "classes": np.array(model.classes, dtype=np.int64),
            "shape": np.array([model.n_channels, model.n_samples,
                               model.kernel_length], dtype=np.int64),
            "cfg_ints": np.array([
                cfg.n_temporal_filters, cfg.depth_multiplier,
                cfg.n_separable_filters, cfg.separable_kernel_length,
                cfg.pool1, cfg.pool2, cfg.epochs, cfg.batch_size,
                std_code, int(cfg.dtype == "float32"),
            ], dtype=np.int64),
            "cfg_floats": np.array([cfg.dropout, cfg.learning_rate,
                                    cfg.momentum, cfg.weight_decay,
                                    cfg.depthwise_max_norm,
                                    cfg.dense_max_norm]),
            "norm_mean": model.norm_mean,
            "norm_std": model.norm_std,
            "history": np.array(model.history),
            "seed": np.array([model.seed], dtype=np.int64),
        }
        for name in PARAM_NAMES:
            tensors["param." + name] = model.params[name]
        for name, arr in model.running.items():
            tensors["running." + name] = arr
        return "cnn", tensors
    raise TypeError(f"not a serializable model: {type(model)!r}")


def save_model(model, path):
    kind, tensors = _model_tensors(model)
    blob = MDL_MAGIC + struct.pack("<HB", MDL_VERSION, KIND_BYTES[kind]) \
        + _pack_tensors(tensors)
    with open(path, "wb") as fh:
        fh.write(blob)


def load_model(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MDL_MAGIC:
        raise ModelFormatError(f"{path}: not an MDL1 file")
    version, kind_byte = struct.unpack("<HB", blob[4:7])
    if version != MDL_VERSION:
        raise ModelFormatError(f"unsupported model version {version}")
    if kind_byte not in KIND_NAMES:
        raise ModelFormatError(f"unknown model kind byte {kind_byte}")
    tensors = _unpack_tensors(blob, 7)
    kind = KIND_NAMES[kind_byte]
    try:
        if kind == "csp-lda":
            return CspLdaModel(
                classes=tuple(int(v) for v in tensors["classes"]),
                filters=tensors["filters"],
                eigenvalues=tensors["eigenvalues"],
                lda_w=tensors["lda_w"],
                lda_b=float(tensors["lda_b"][0]),
                shrinkage=float(tensors["shrinkage"][0]),
                k_pairs=int(tensors["k_pairs"][0]),
            )
        if kind == "rmdm":
            return RmdmModel(
                classes=tuple(int(v) for v in tensors["classes"]),
                class_means=tuple(m for m in tensors["means"]),
                shrinkage=float(tensors["shrinkage"][0]),
                converged=tuple(bool(v) for v in tensors["converged"]),
                tie_count=int(tensors["tie_count"][0]),
            )
        ints = tensors["cfg_ints"]
        floats = tensors["cfg_floats"]
        cfg = CnnConfig(
            n_temporal_filters=int(ints[0]), depth_multiplier=int(ints[1]),
            n_separable_filters=int(ints[2]), kernel_length=None,
            separable_kernel_length=int(ints[3]), pool1=int(ints[4]),
            pool2=int(ints[5]), dropout=float(floats[0]),
            epochs=int(ints[6]), batch_size=int(ints[7]),
            learning_rate=float(floats[1]), momentum=float(floats[2]),
            weight_decay=float(floats[3]),
            depthwise_max_norm=float(floats[4]),
            dense_max_norm=float(floats[5]),
            standardize=("none", "per-epoch", "train-channel")[int(ints[8])],
            dtype="float32" if ints[9] else "float64",
        )
        dtype = np.dtype(cfg.dtype)
        params = {name: tensors["param." + name].astype(dtype)
                  for name in PARAM_NAMES}
        running = {key[len("running."):]: arr.astype(dtype)
                   for key, arr in tensors.items()
                   if key.startswith("running.")}
        return CnnModel(
            classes=tuple(int(v) for v in tensors["classes"]),
            config=cfg,
            n_channels=int(tensors["shape"][0]),
            n_samples=int(tensors["shape"][1]),
            kernel_length=int(tensors["shape"][2]),
            params=params,
            running=running,
            norm_mean=tensors["norm_mean"].astype(dtype),
            norm_std=tensors["norm_std"].astype(dtype),
            history=tuple(float(v) for v in tensors["history"]),
            seed=int(tensors["seed"][0]),
        )
    except KeyError as exc:
        raise ModelFormatError(f"model file missing tensor {exc}") from exc
