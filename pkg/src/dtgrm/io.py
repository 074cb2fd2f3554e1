"""On-disk dataset and checkpoint formats.

Dataset directory layout::

    manifest.txt            num_classes / d_in header, then one id per line
    features/<id>.bin       b"DTGRMFV1", uint32 T, uint32 D (little endian),
                            then T*D float32 little endian, row-major
    labels/<id>.txt         one integer class index per line

Checkpoint file::

    DTGRMCKPT 1\\n
    <header byte length>\\n
    <JSON header>           epoch, config, per-blob name/dtype/shape/offset,
                            Adam step counters, sha256 of the blob section
    <blobs>                 raw little-endian arrays, concatenated
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from .synthetic import LabeledSequence

FEATURE_MAGIC = b"DTGRMFV1"
CKPT_MAGIC = b"DTGRMCKPT 1\n"


class FormatError(ValueError):
    pass


# ---------------------------------------------------------------- features


def write_features(path, features):
    x = np.ascontiguousarray(features, dtype="<f4")
    if x.ndim != 2:
        raise ValueError("features must be (T, D)")
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<II", *x.shape))
        fh.write(x.tobytes())


def read_features(path):
    raw = Path(path).read_bytes()
    if raw[:8] != FEATURE_MAGIC:
        raise FormatError(f"{path}: bad magic")
    T, D = struct.unpack("<II", raw[8:16])
    body = raw[16:]
    if len(body) != 4 * T * D:
        raise FormatError(f"{path}: expected {T}x{D} floats, found {len(body) // 4}")
    return np.frombuffer(body, dtype="<f4").reshape(T, D).astype(np.float32)


def write_dataset(directory, sequences, num_classes):
    directory = Path(directory)
    (directory / "features").mkdir(parents=True, exist_ok=True)
    (directory / "labels").mkdir(parents=True, exist_ok=True)
    d_in = sequences[0].features.shape[1]
    lines = [f"num_classes = {num_classes}", f"d_in = {d_in}", "[ids]"]
    for seq in sequences:
        if seq.features.shape[1] != d_in:
            raise ValueError("sequences disagree on feature width")
        write_features(directory / "features" / f"{seq.id}.bin", seq.features)
        (directory / "labels" / f"{seq.id}.txt").write_text("".join(f"{int(c)}\n" for c in seq.labels))
        lines.append(seq.id)
    (directory / "manifest.txt").write_text("\n".join(lines) + "\n")


def read_manifest(directory):
    path = Path(directory) / "manifest.txt"
    if not path.exists():
        raise FileNotFoundError(f"no dataset manifest at {path}")
    header, ids, in_ids = {}, [], False
    for line in path.read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line == "[ids]":
            in_ids = True
        elif in_ids:
            ids.append(line)
        else:
            key, _, value = line.partition("=")
            header[key.strip()] = int(value)
    if "num_classes" not in header or "d_in" not in header:
        raise FormatError(f"{path}: missing num_classes or d_in")
    return header["num_classes"], header["d_in"], ids


def read_dataset(directory):
    """Returns ``(sequences, num_classes)``."""
    directory = Path(directory)
    C, d_in, ids = read_manifest(directory)
    out = []
    for sid in ids:
        x = read_features(directory / "features" / f"{sid}.bin")
        y = np.loadtxt(directory / "labels" / f"{sid}.txt", dtype=np.int64, ndmin=1)
        if x.shape[1] != d_in or len(y) != len(x):
            raise FormatError(f"sequence {sid}: shape {x.shape} vs {len(y)} labels, d_in {d_in}")
        if y.min() < 0 or y.max() >= C:
            raise FormatError(f"sequence {sid}: label outside [0, {C})")
        out.append(LabeledSequence(x, y, sid))
    return out, C


# ---------------------------------------------------------------- checkpoints


def save_checkpoint(path, model, epoch, config_sections, extra=None):
    blobs, entries, offset = [], [], 0
    steps = {}
    for name, p in model.named_parameters().items():
        steps[name] = p.step
        for kind, arr in (("param", p.data), ("adam_m", p.m), ("adam_v", p.v)):
            a = np.ascontiguousarray(arr)
            a = a.astype(a.dtype.newbyteorder("<"), copy=False)
            raw = a.tobytes()
            entries.append(
                {"name": f"{kind}/{name}", "dtype": a.dtype.str, "shape": list(a.shape), "offset": offset, "nbytes": len(raw)}
            )
            blobs.append(raw)
            offset += len(raw)
    body = b"".join(blobs)
    header = {
        "format_version": 1,
        "epoch": int(epoch),
        "config": config_sections,
        "entries": entries,
        "adam_steps": steps,
        "extra": extra or {},
        "sha256": hashlib.sha256(body).hexdigest(),
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(f"{len(head)}\n".encode())
        fh.write(head)
        fh.write(body)


def read_checkpoint(path):
    """Parse and verify a checkpoint. Returns ``(header, arrays)``."""
    raw = Path(path).read_bytes()
    if not raw.startswith(CKPT_MAGIC):
        raise FormatError(f"{path}: not a checkpoint")
    rest = raw[len(CKPT_MAGIC):]
    nl = rest.index(b"\n")
    n = int(rest[:nl])
    header = json.loads(rest[nl + 1 : nl + 1 + n])
    body = rest[nl + 1 + n :]
    if hashlib.sha256(body).hexdigest() != header["sha256"]:
        raise FormatError(f"{path}: checksum mismatch")
    arrays = {}
    for e in header["entries"]:
        chunk = body[e["offset"] : e["offset"] + e["nbytes"]]
        arrays[e["name"]] = np.frombuffer(chunk, dtype=np.dtype(e["dtype"])).reshape(e["shape"]).copy()
    return header, arrays


def load_into(model, header, arrays):
    params = model.named_parameters()
    names = {e["name"].split("/", 1)[1] for e in header["entries"]}
    if names != set(params):
        missing = sorted(set(params) - names)[:3]
        unexpected = sorted(names - set(params))[:3]
        raise FormatError(f"checkpoint does not match model (missing {missing}, unexpected {unexpected})")
    for name, p in params.items():
        data = arrays[f"param/{name}"]
        if data.shape != p.shape:
            raise FormatError(f"{name}: checkpoint shape {data.shape} vs model {p.shape}")
        p.data = data.astype(data.dtype.newbyteorder("="))
        p.m = arrays[f"adam_m/{name}"].astype(p.data.dtype)
        p.v = arrays[f"adam_v/{name}"].astype(p.data.dtype)
        p.step = int(header["adam_steps"][name])
        p.grad = None
    model.dtype = next(iter(params.values())).data.dtype
