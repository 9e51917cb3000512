"""On-disk formats shared across the toolkit and with external extractors.

Matrices are raw little-endian float32, row-major, no header; a JSON sidecar
with the same basename carries shapes and metadata. Onset files hold one
float per line; region masks are small JSON documents. All writes go through
a temp-file-and-rename so partially written artifacts never appear.
"""

import hashlib
import json
import os
from pathlib import Path
from typing import Sequence

import numpy as np

from .encoding import BoldRun, FeatureMatrix, RegionMask

MATRIX_DTYPE = np.dtype("<f4")


def atomic_write_bytes(path: "str | Path", data: bytes) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


def atomic_write_text(path: "str | Path", text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def config_hash(obj) -> str:
    """Truncated sha256 of the canonical JSON form of a configuration."""
    canon = json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def sidecar_path(matrix_path: "str | Path") -> Path:
    return Path(matrix_path).with_suffix(".json")


def write_matrix(path: "str | Path", data: np.ndarray, kind: str, **meta) -> None:
    """Write a 2-D matrix as raw float32 plus its JSON sidecar.

    `meta` lands in the sidecar next to rows/cols/kind (tr_seconds,
    onsets_path, layer_index, checkpoint_tokens, run_index as applicable).
    """
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
    """Read a raw float32 matrix and its sidecar; validates the byte count."""
    path = Path(path)
    with open(sidecar_path(path), encoding="utf-8") as fh:
        sidecar = json.load(fh)
    for key in ("rows", "cols", "kind"):
        if key not in sidecar:
            raise ValueError(f"{sidecar_path(path)}: missing key {key!r}")
    rows, cols = int(sidecar["rows"]), int(sidecar["cols"])
    raw = path.read_bytes()
    expected = rows * cols * MATRIX_DTYPE.itemsize
    if len(raw) != expected:
        raise ValueError(
            f"{path}: expected {expected} bytes for {rows}x{cols} float32, got {len(raw)}"
        )
    data = np.frombuffer(raw, dtype=MATRIX_DTYPE).reshape(rows, cols).astype(np.float64)
    return data, sidecar


def write_onsets(path: "str | Path", onsets: Sequence[float]) -> None:
    atomic_write_text(path, "".join(f"{float(t)!r}\n" for t in onsets))


def read_onsets(path: "str | Path") -> np.ndarray:
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
    return np.asarray(values, dtype=np.float64)


def write_bold_run(path: "str | Path", run: BoldRun) -> None:
    write_matrix(
        path, run.data, kind="bold", tr_seconds=run.tr_seconds, run_index=run.run_index
    )


def read_bold_run(path: "str | Path") -> BoldRun:
    data, sidecar = read_matrix(path)
    if sidecar["kind"] != "bold":
        raise ValueError(f"{path}: sidecar kind {sidecar['kind']!r}, expected 'bold'")
    for key in ("tr_seconds", "run_index"):
        if key not in sidecar:
            raise ValueError(f"{sidecar_path(path)}: missing key {key!r}")
    return BoldRun(
        data=data,
        tr_seconds=float(sidecar["tr_seconds"]),
        run_index=int(sidecar["run_index"]),
    )


def write_feature_matrix(path: "str | Path", fm: FeatureMatrix, run_index: int) -> None:
    """Write the feature matrix, its onsets file, and the linking sidecar."""
    path = Path(path)
    onsets_name = path.stem + ".onsets.txt"
    write_onsets(path.with_name(onsets_name), fm.onsets)
    write_matrix(
        path,
        fm.data,
        kind="features",
        onsets_path=onsets_name,
        layer_index=fm.layer_index,
        checkpoint_tokens=fm.checkpoint_tokens,
        run_index=run_index,
    )


def read_feature_matrix(path: "str | Path") -> tuple[FeatureMatrix, int]:
    """Read a feature matrix; returns (matrix, run_index).

    The sidecar's onsets_path is resolved relative to the matrix file.
    """
    path = Path(path)
    data, sidecar = read_matrix(path)
    if sidecar["kind"] != "features":
        raise ValueError(f"{path}: sidecar kind {sidecar['kind']!r}, expected 'features'")
    for key in ("onsets_path", "layer_index", "checkpoint_tokens", "run_index"):
        if key not in sidecar:
            raise ValueError(f"{sidecar_path(path)}: missing key {key!r}")
    onsets = read_onsets(path.parent / sidecar["onsets_path"])
    fm = FeatureMatrix(
        data=data,
        onsets=onsets,
        layer_index=int(sidecar["layer_index"]),
        checkpoint_tokens=int(sidecar["checkpoint_tokens"]),
    )
    return fm, int(sidecar["run_index"])


def write_mask(path: "str | Path", mask: RegionMask) -> None:
    doc = {"name": mask.name, "labels": [str(l) for l in mask.labels]}
    atomic_write_text(path, json.dumps(doc, sort_keys=True, indent=2) + "\n")


def read_mask(path: "str | Path") -> RegionMask:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    for key in ("name", "labels"):
        if key not in doc:
            raise ValueError(f"{path}: missing key {key!r}")
    return RegionMask(name=doc["name"], labels=np.array(doc["labels"], dtype=object))
