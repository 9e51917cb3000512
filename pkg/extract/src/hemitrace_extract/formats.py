"""Writers and readers for the file formats shared with the analysis toolkit.

The two packages communicate only through these formats (raw float32
matrices with JSON sidecars, onset files, suite and log-prob JSONL,
trajectory CSV), so this module implements them independently rather than
importing the analysis package. Byte-level conventions match: little-endian
row-major float32, sidecars as sorted two-space-indented JSON with a
trailing newline, onsets and CSV values via repr for full precision, and
temp-file-plus-rename writes.
"""

import csv
import io
import json
import os
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

MATRIX_DTYPE = np.dtype("<f4")

SUITE_KEYS = ("id", "good", "bad", "paradigm")


def atomic_write_bytes(path: "str | Path", data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def atomic_write_text(path: "str | Path", text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def sidecar_path(matrix_path: "str | Path") -> Path:
    return Path(matrix_path).with_suffix(".json")


def write_matrix(path: "str | Path", data: np.ndarray, kind: str, **meta) -> None:
    if kind not in ("bold", "features"):
        raise ValueError(f"kind must be 'bold' or 'features', got {kind!r}")
    data = np.asarray(data)
    if data.ndim != 2:
        raise ValueError(f"matrix must be 2-D, got ndim={data.ndim}")
    path = Path(path)
    atomic_write_bytes(path, np.ascontiguousarray(data, dtype=MATRIX_DTYPE).tobytes())
    sidecar = {"rows": int(data.shape[0]), "cols": int(data.shape[1]), "kind": kind}
    for key, value in meta.items():
        if value is not None:
            sidecar[key] = value
    atomic_write_text(
        sidecar_path(path), json.dumps(sidecar, sort_keys=True, indent=2) + "\n"
    )


def read_matrix(path: "str | Path") -> tuple[np.ndarray, dict]:
    path = Path(path)
    with open(sidecar_path(path), encoding="utf-8") as fh:
        sidecar = json.load(fh)
    rows, cols = int(sidecar["rows"]), int(sidecar["cols"])
    raw = path.read_bytes()
    expected = rows * cols * MATRIX_DTYPE.itemsize
    if len(raw) != expected:
        raise ValueError(
            f"{path}: expected {expected} bytes for {rows}x{cols} float32, got {len(raw)}"
        )
    return np.frombuffer(raw, dtype=MATRIX_DTYPE).reshape(rows, cols), sidecar


def write_onsets(path: "str | Path", onsets: Sequence[float]) -> None:
    atomic_write_text(path, "".join(f"{float(t)!r}\n" for t in onsets))


def read_onsets(path: "str | Path") -> list[float]:
    values = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                values.append(float(line))
            except ValueError as err:
                raise ValueError(f"{path}:{lineno}: not a number: {line!r}") from err
    return values


def read_suite(path: "str | Path") -> list[dict]:
    """Read a minimal-pair suite JSONL into plain dicts."""
    pairs = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as err:
                raise ValueError(f"{path}:{lineno}: malformed JSON ({err.msg})") from err
            for key in SUITE_KEYS:
                if key not in record:
                    raise ValueError(f"{path}:{lineno}: missing key {key!r}")
            if record["id"] in seen:
                raise ValueError(f"{path}:{lineno}: duplicate pair id {record['id']!r}")
            seen.add(record["id"])
            pairs.append(record)
    return pairs


def logprob_dump_lines(records: Iterable[tuple[str, str, Sequence[float]]]) -> str:
    """Serialize (pair_id, side, logprobs) records as dump JSONL."""
    lines = [
        json.dumps(
            {"pair_id": pair_id, "side": side, "logprobs": [float(x) for x in logprobs]},
            ensure_ascii=False,
        )
        for pair_id, side, logprobs in records
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def trajectory_csv(points: Mapping[str, Sequence[tuple[int, float]]]) -> str:
    """Serialize {label: [(tokens, value), ...]} as tokens,value,label CSV."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["tokens", "value", "label"])
    for label, rows in points.items():
        for tokens, value in rows:
            writer.writerow([int(tokens), repr(float(value)), label])
    return buf.getvalue()


def write_json(path: "str | Path", doc) -> None:
    atomic_write_text(path, json.dumps(doc, sort_keys=True, indent=2) + "\n")
