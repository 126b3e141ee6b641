"""On-disk formats and atomic writes.

* Model: a single JSON file with dimensions, activation tag and row-major
  weight arrays in decimal (round-trip exact).
* Dataset: a directory with ``meta.json`` plus ``train.bin``/``test.bin``;
  each .bin starts with the magic ``URNNDS1``, four little-endian uint64
  counts (n_seq, T, m, p), then per sequence the inputs (T x m) and the
  targets (T x p) as little-endian float64, row-major. ``meta.json`` is
  written last and doubles as the completeness marker.
* Reports: canonical JSON (sorted keys, 2-space indent, trailing newline)
  so identical runs produce byte-identical files.

Every write goes through a temp file in the target directory followed by
an atomic rename.
"""

import json
import os
import struct
import tempfile
from typing import Optional, Tuple

import numpy as np

from .errors import InvalidInputError
from .rnn import RnnParams, Sequence
from .synth import Dataset

MODEL_FORMAT_VERSION = 1
REPORT_FORMAT_VERSION = 1
DATASET_MAGIC = b"URNNDS1"
_HEADER = struct.Struct("<4Q")


def _atomic_write_bytes(path: str, payload: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str, payload: dict) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    _atomic_write_bytes(path, text.encode("utf-8"))


def read_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def recorded_wall_time(seconds: float) -> Optional[float]:
    """Wall time is only persisted when URNN_EQUIV_RECORD_TIMING is set;
    otherwise reports stay byte-identical across reruns."""
    if os.environ.get("URNN_EQUIV_RECORD_TIMING"):
        return float(seconds)
    return None


def model_to_dict(params: RnnParams, metadata: Optional[dict] = None) -> dict:
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": "rnn_model",
        "activation": params.activation,
        "n": params.n,
        "m": params.m,
        "p": params.p,
        "w": params.w.tolist(),
        "f": params.f.tolist(),
        "b": params.b.tolist(),
        "c": params.c.tolist(),
        "h_init": params.h_init.tolist(),
    }
    if metadata is not None:
        doc["metadata"] = metadata
    return doc


def write_model(path: str, params: RnnParams, metadata: Optional[dict] = None) -> None:
    write_json(path, model_to_dict(params, metadata))


def read_model(path: str) -> Tuple[RnnParams, dict]:
    doc = read_json(path)
    if doc.get("kind") != "rnn_model":
        raise InvalidInputError(f"{path} is not a model file")
    params = RnnParams(
        w=np.array(doc["w"], dtype=np.float64),
        f=np.array(doc["f"], dtype=np.float64),
        b=np.array(doc["b"], dtype=np.float64),
        c=np.array(doc["c"], dtype=np.float64),
        h_init=np.array(doc["h_init"], dtype=np.float64),
        activation=doc["activation"],
    )
    if (params.n, params.m, params.p) != (doc["n"], doc["m"], doc["p"]):
        raise InvalidInputError(f"{path}: recorded dimensions do not match the arrays")
    return params, doc.get("metadata", {})


def _sequences_to_bytes(sequences) -> bytes:
    if not sequences:
        return DATASET_MAGIC + _HEADER.pack(0, 0, 0, 0)
    t_len = sequences[0].t_len
    m = sequences[0].x.shape[1]
    p = sequences[0].y.shape[1] if sequences[0].y is not None else 0
    chunks = [DATASET_MAGIC, _HEADER.pack(len(sequences), t_len, m, p)]
    for seq in sequences:
        if seq.t_len != t_len or seq.x.shape[1] != m:
            raise InvalidInputError("all sequences in a file must share (T, m, p)")
        if seq.y is None or seq.y.shape[1] != p:
            raise InvalidInputError("all sequences in a file must carry targets")
        chunks.append(np.ascontiguousarray(seq.x, dtype="<f8").tobytes())
        chunks.append(np.ascontiguousarray(seq.y, dtype="<f8").tobytes())
    return b"".join(chunks)


def _sequences_from_bytes(payload: bytes, path: str):
    if payload[: len(DATASET_MAGIC)] != DATASET_MAGIC:
        raise InvalidInputError(f"{path}: bad magic; not a sequence file")
    offset = len(DATASET_MAGIC)
    n_seq, t_len, m, p = _HEADER.unpack_from(payload, offset)
    offset += _HEADER.size
    expected = offset + n_seq * t_len * (m + p) * 8
    if len(payload) != expected:
        raise InvalidInputError(
            f"{path}: truncated file ({len(payload)} bytes, expected {expected})"
        )
    sequences = []
    for _ in range(n_seq):
        x = np.frombuffer(payload, dtype="<f8", count=t_len * m, offset=offset)
        offset += t_len * m * 8
        y = np.frombuffer(payload, dtype="<f8", count=t_len * p, offset=offset)
        offset += t_len * p * 8
        sequences.append(
            Sequence(x=x.reshape(t_len, m).copy(), y=y.reshape(t_len, p).copy())
        )
    return sequences


def write_dataset(directory: str, dataset: Dataset) -> None:
    """Write train.bin/test.bin first and meta.json last, each atomically."""
    os.makedirs(directory, exist_ok=True)
    _atomic_write_bytes(os.path.join(directory, "train.bin"), _sequences_to_bytes(dataset.train))
    _atomic_write_bytes(os.path.join(directory, "test.bin"), _sequences_to_bytes(dataset.test))
    write_json(os.path.join(directory, "meta.json"), dataset.metadata)


def read_dataset(directory: str) -> Dataset:
    meta_path = os.path.join(directory, "meta.json")
    if not os.path.exists(meta_path):
        raise FileNotFoundError(f"no meta.json in {directory}; dataset missing or incomplete")
    metadata = read_json(meta_path)
    with open(os.path.join(directory, "train.bin"), "rb") as fh:
        train = _sequences_from_bytes(fh.read(), "train.bin")
    with open(os.path.join(directory, "test.bin"), "rb") as fh:
        test = _sequences_from_bytes(fh.read(), "test.bin")
    return Dataset(
        train=train,
        test=test,
        snr_db=metadata["snr_db"],
        clean_signal_power=metadata["clean_signal_power"],
        metadata=metadata,
    )
