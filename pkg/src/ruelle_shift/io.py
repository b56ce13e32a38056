"""Artifact I/O: atomic JSON reports, JSONL particle streams and flat binary grid dumps.

Every writer goes through a temporary file in the target directory followed by
``os.replace``, so a reader never sees a partial artifact.  JSON has no
representation for non-finite floats; they are written as the strings
``"inf"``, ``"-inf"`` and ``"nan"``.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import tempfile
from enum import Enum
from pathlib import Path

import numpy as np

from .grid import GridFunction


def to_jsonable(obj):
    """Plain JSON types with non-finite floats mapped to strings."""
    if isinstance(obj, Enum):
        return to_jsonable(obj.value)
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if isinstance(obj, str) or obj is None:
        return obj
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if hasattr(obj, "as_dict"):
        return to_jsonable(obj.as_dict())
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable({f.name: getattr(obj, f.name) for f in dataclasses.fields(obj)})
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_atomic(path: str | Path, data: bytes) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_json(path: str | Path, obj) -> Path:
    return write_atomic(path, dumps(obj).encode())


def read_json(path: str | Path):
    return json.loads(Path(path).read_text())


def write_jsonl(path: str | Path, rows: np.ndarray) -> Path:
    """One particle per line as a JSON array (shortest round-trip float repr)."""
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    lines = [json.dumps(to_jsonable(r.tolist()), allow_nan=False) for r in rows]
    return write_atomic(path, ("\n".join(lines) + "\n").encode())


def read_jsonl(path: str | Path) -> np.ndarray:
    rows = [json.loads(line) for line in Path(path).read_text().splitlines() if line.strip()]
    if not rows:
        raise ValueError(f"{path} holds no particles")
    width = max(len(r) for r in rows)
    out = np.zeros((len(rows), width))
    for i, r in enumerate(rows):
        out[i, : len(r)] = [float(v) for v in r]
    return out


def write_grid(path: str | Path, grid: GridFunction, meta: dict | None = None) -> tuple[Path, Path]:
    """Flat little-endian float64 dump plus a JSON sidecar (``<path>.json``).

    Layout: ``[rank, n_1..n_rank, axis_1.., .., axis_rank.., values (C order)]``.
    """
    path = Path(path)
    shape = [len(a) for a in grid.axes]
    flat = np.concatenate([[float(grid.rank)], np.asarray(shape, float)] + [np.asarray(a, float) for a in grid.axes]
                          + [np.asarray(grid.values, float).ravel()])
    binp = write_atomic(path, flat.astype("<f8").tobytes())
    side = {"layout": "rank, shape, axes, values (C order); little-endian float64",
            "rank": grid.rank, "shape": shape, "count": int(flat.size), "meta": meta or {}}
    jsonp = write_json(path.with_name(path.name + ".json"), side)
    return binp, jsonp


def read_grid(path: str | Path) -> GridFunction:
    flat = np.frombuffer(Path(path).read_bytes(), dtype="<f8")
    rank = int(flat[0])
    shape = [int(v) for v in flat[1 : 1 + rank]]
    pos = 1 + rank
    axes = []
    for n in shape:
        axes.append(flat[pos : pos + n].copy())
        pos += n
    values = flat[pos:].reshape(shape) if rank else flat[pos:].reshape(())
    return GridFunction(tuple(axes), values.copy())
