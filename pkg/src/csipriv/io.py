"""Binary file formats and CSV outputs.

Every binary file opens with an 8-byte magic string, a little-endian uint64
header length and a JSON header, followed by little-endian payload blocks.

Dataset (``CSIPRIV1``): float32 (real, imag) pairs for all records in
row-major ``(L, B, M_r, M_c, N_sub)`` order, then one float64 triple
``(x1, x2, t)`` per record.

Features (``CSIFEAT1``): float32 rows ``(L, F)``, then float64 ``(x1, x2, t)``
per record.

Model (``CSIMLP01``): float32 ``W`` (fan_in x fan_out, row-major) then ``b``
for every layer, then the input standardization mean and std.

Dissimilarity cache (``CSIDISS1``): float32 strict upper triangle, row-major.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .channel_sim import Dataset, Scene
from .features import TapWindow
from .mlp import MlpModel

DATASET_MAGIC = b"CSIPRIV1"
FEATURE_MAGIC = b"CSIFEAT1"
MODEL_MAGIC = b"CSIMLP01"
DISS_MAGIC = b"CSIDISS1"
FORMAT_VERSION = 1


class DataFormatError(ValueError):
    pass


def _write(path, magic: bytes, header: dict, blocks) -> None:
    head = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<Q", len(head)))
        fh.write(head)
        for block in blocks:
            fh.write(np.ascontiguousarray(block).tobytes())


def _read(path, magic: bytes):
    raw = Path(path).read_bytes()
    if raw[:8] != magic:
        raise DataFormatError(f"{path}: expected magic {magic!r}, found {raw[:8]!r}")
    if len(raw) < 16:
        raise DataFormatError(f"{path}: truncated header")
    (n,) = struct.unpack("<Q", raw[8:16])
    try:
        header = json.loads(raw[16:16 + n])
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise DataFormatError(f"{path}: unreadable header ({exc})") from exc
    return header, memoryview(raw)[16 + n:]


def _take(buf, offset: int, dtype: str, count: int, path):
    size = np.dtype(dtype).itemsize * count
    if offset + size > len(buf):
        raise DataFormatError(f"{path}: payload shorter than the header declares")
    return np.frombuffer(buf[offset:offset + size], dtype=dtype).copy(), offset + size


def _meta_block(positions, timestamps) -> np.ndarray:
    return np.column_stack([positions, timestamps]).astype("<f8")


def save_dataset(ds: Dataset, path) -> None:
    header = {
        "format_version": FORMAT_VERSION,
        "dims": list(ds.dims),
        "n_records": len(ds),
        "scene": ds.scene.to_dict(),
        "notes": _jsonable(ds.notes),
    }
    pairs = np.stack([ds.csi.real, ds.csi.imag], axis=-1).astype("<f4")
    _write(path, DATASET_MAGIC, header, [pairs, _meta_block(ds.positions, ds.timestamps)])


def load_dataset(path) -> Dataset:
    header, buf = _read(path, DATASET_MAGIC)
    try:
        dims = tuple(int(d) for d in header["dims"])
        n = int(header["n_records"])
        scene = Scene.from_dict(header["scene"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"{path}: invalid dataset header ({exc})") from exc
    count = n * int(np.prod(dims)) * 2
    pairs, off = _take(buf, 0, "<f4", count, path)
    meta, off = _take(buf, off, "<f8", 3 * n, path)
    if off != len(buf):
        raise DataFormatError(f"{path}: {len(buf) - off} trailing bytes")
    pairs = pairs.reshape(n, *dims, 2).astype(float)
    meta = meta.reshape(n, 3)
    return Dataset(pairs[..., 0] + 1j * pairs[..., 1], meta[:, :2], meta[:, 2], scene,
                   header.get("notes", {}))


def save_features(path, features: np.ndarray, positions, timestamps, dims,
                  window: TapWindow, variant: str = "original") -> None:
    features = np.asarray(features)
    header = {
        "format_version": FORMAT_VERSION,
        "dims": list(dims),
        "window": [window.tau_min, window.tau_max],
        "n_records": len(features),
        "n_features": features.shape[1],
        "variant": variant,
    }
    _write(path, FEATURE_MAGIC, header,
           [features.astype("<f4"), _meta_block(positions, timestamps)])


def load_features(path):
    """Returns ``(features, positions, timestamps, header)``."""
    header, buf = _read(path, FEATURE_MAGIC)
    try:
        n, f = int(header["n_records"]), int(header["n_features"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"{path}: invalid feature header ({exc})") from exc
    feats, off = _take(buf, 0, "<f4", n * f, path)
    meta, off = _take(buf, off, "<f8", 3 * n, path)
    if off != len(buf):
        raise DataFormatError(f"{path}: {len(buf) - off} trailing bytes")
    meta = meta.reshape(n, 3)
    return feats.reshape(n, f).astype(float), meta[:, :2], meta[:, 2], header


def save_model(model: MlpModel, path, kind: str = "fingerprint") -> None:
    header = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "widths": model.widths,
        "activations": model.activations,
        "standardized": model.feature_mean is not None,
        "loss_history": [float(v) for v in model.loss_history],
    }
    blocks = [p.astype("<f4") for p in model.parameters()]
    if model.feature_mean is not None:
        blocks += [model.feature_mean.astype("<f4"), model.feature_std.astype("<f4")]
    _write(path, MODEL_MAGIC, header, blocks)


def load_model(path) -> MlpModel:
    header, buf = _read(path, MODEL_MAGIC)
    widths = [int(w) for w in header["widths"]]
    off = 0
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        w, off = _take(buf, off, "<f4", fan_in * fan_out, path)
        b, off = _take(buf, off, "<f4", fan_out, path)
        weights.append(w.reshape(fan_in, fan_out).astype(float))
        biases.append(b.astype(float))
    model = MlpModel(widths, weights, biases, list(header["activations"]),
                     loss_history=list(header.get("loss_history", [])))
    if header.get("standardized"):
        mean, off = _take(buf, off, "<f4", widths[0], path)
        std, off = _take(buf, off, "<f4", widths[0], path)
        model.feature_mean, model.feature_std = mean.astype(float), std.astype(float)
    if off != len(buf):
        raise DataFormatError(f"{path}: {len(buf) - off} trailing bytes")
    return model


def save_dissimilarity(d: np.ndarray, path) -> None:
    n = len(d)
    iu = np.triu_indices(n, k=1)
    _write(path, DISS_MAGIC, {"format_version": FORMAT_VERSION, "n": n},
           [np.asarray(d)[iu].astype("<f4")])


def load_dissimilarity(path) -> np.ndarray:
    header, buf = _read(path, DISS_MAGIC)
    n = int(header["n"])
    tri, off = _take(buf, 0, "<f4", n * (n - 1) // 2, path)
    if off != len(buf):
        raise DataFormatError(f"{path}: {len(buf) - off} trailing bytes")
    d = np.zeros((n, n))
    d[np.triu_indices(n, k=1)] = tri
    return d + d.T


def _fmt(x: float) -> str:
    return repr(float(x))


def write_positions_csv(path, predicted, truth) -> None:
    predicted = np.asarray(predicted)
    truth = np.asarray(truth)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["record_index", "x1_hat", "x2_hat", "x1_true", "x2_true"])
        for i, (p, t) in enumerate(zip(predicted, truth)):
            w.writerow([i, _fmt(p[0]), _fmt(p[1]), _fmt(t[0]), _fmt(t[1])])


def read_positions_csv(path):
    rows = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return rows[:, 1:3], rows[:, 3:5]


def write_plotdata_csv(path, predicted, errors) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x1", "x2", "error"])
        for p, e in zip(np.asarray(predicted), np.asarray(errors)):
            w.writerow([_fmt(p[0]), _fmt(p[1]), _fmt(e)])


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj
