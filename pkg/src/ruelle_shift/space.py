"""Truncated points of c0 and l^p, the weighted shift, its preimages and the metrics.

A point is a finite coefficient vector with an implicit zero tail.  Bulk work
(particle clouds) uses 2-D arrays with one row per point and columns for the
coordinates; the functions ending in ``_rows`` operate on those.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.spatial.distance import cdist

from .errors import SpaceMismatch
from .weights import WeightSequence


@dataclass(frozen=True)
class SpaceKind:
    """``c0`` (``p is None``) or ``l^p`` with ``p >= 1``."""

    p: float | None = None

    def __post_init__(self):
        if self.p is not None:
            if not (self.p >= 1 and math.isfinite(self.p)):
                raise ValueError(f"l^p needs finite p >= 1, got {self.p}")
            object.__setattr__(self, "p", float(self.p))

    @classmethod
    def c0(cls) -> "SpaceKind":
        return cls(None)

    @classmethod
    def lp(cls, p: float) -> "SpaceKind":
        return cls(p)

    @classmethod
    def parse(cls, spec) -> "SpaceKind":
        """Accepts ``"c0"``, ``"l2"``, a number, or ``{"kind": "lp", "p": 2}``."""
        if isinstance(spec, SpaceKind):
            return spec
        if isinstance(spec, dict):
            if spec.get("kind") == "c0":
                return cls.c0()
            return cls.lp(spec["p"])
        if isinstance(spec, str):
            if spec == "c0":
                return cls.c0()
            if spec.startswith("l"):
                return cls.lp(float(spec[1:]))
            return cls.lp(float(spec))
        return cls.lp(float(spec))

    @property
    def is_c0(self) -> bool:
        return self.p is None

    @property
    def label(self) -> str:
        if self.p is None:
            return "c0"
        return f"l{self.p:g}"

    def norm_rows(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] == 0:
            return np.zeros(X.shape[0])
        if self.p is None:
            return np.abs(X).max(axis=1)
        return np.linalg.norm(X, ord=self.p, axis=1)


def _canonical(coords: Iterable[float]) -> tuple[float, ...]:
    c = [float(v) for v in coords]
    while c and c[-1] == 0.0:
        c.pop()
    # -0.0 and 0.0 compare equal but should not break tuple equality either way
    return tuple(0.0 if v == 0.0 else v for v in c)


@dataclass(frozen=True)
class Point:
    """Finitely supported sequence in ``space``; trailing zeros are stripped."""

    coords: tuple[float, ...]
    space: SpaceKind = SpaceKind(2.0)

    def __post_init__(self):
        c = _canonical(self.coords)
        if any(not math.isfinite(v) for v in c):
            raise ValueError("point coordinates must be finite")
        object.__setattr__(self, "coords", c)

    @classmethod
    def of(cls, *coords: float, space: SpaceKind | None = None) -> "Point":
        return cls(tuple(coords), space or SpaceKind(2.0))

    @classmethod
    def basis(cls, n: int, space: SpaceKind | None = None) -> "Point":
        if n < 1:
            raise ValueError("basis vectors are indexed from 1")
        return cls((0.0,) * (n - 1) + (1.0,), space or SpaceKind(2.0))

    @classmethod
    def zero(cls, space: SpaceKind | None = None) -> "Point":
        return cls((), space or SpaceKind(2.0))

    def __len__(self) -> int:
        return len(self.coords)

    def __getitem__(self, i: int) -> float:
        """1-based coordinate access with the implicit zero tail."""
        if i < 1:
            raise IndexError("coordinates are indexed from 1")
        return self.coords[i - 1] if i <= len(self.coords) else 0.0

    def array(self, depth: int | None = None) -> np.ndarray:
        """Coordinates as an array padded (or truncated) to ``depth``."""
        depth = len(self.coords) if depth is None else depth
        out = np.zeros(depth)
        k = min(depth, len(self.coords))
        out[:k] = self.coords[:k]
        return out

    def truncate(self, n: int) -> "Point":
        return Point(self.coords[:n], self.space)

    def to_json(self) -> list[float]:
        return list(self.coords)


def _check_same(x: Point, y: Point):
    if x.space != y.space:
        raise SpaceMismatch(f"points live in {x.space.label} and {y.space.label}")


def norm(x: Point) -> float:
    if not x.coords:
        return 0.0
    return float(x.space.norm_rows(np.asarray(x.coords)[None, :])[0])


@dataclass(frozen=True)
class MetricSpec:
    """``norm``: ``||x-y||``; ``holder``: ``||x-y||^alpha``;
    ``bounded``: ``min(1, a ||x-y||^alpha)``; ``shift``: the weighted-coordinate metric."""

    kind: str = "norm"
    alpha: float = 1.0
    a: float = 1.0

    def __post_init__(self):
        if self.kind not in ("norm", "holder", "bounded", "shift"):
            raise ValueError(f"unknown metric kind {self.kind!r}")
        if not (0 < self.alpha <= 1):
            raise ValueError("alpha must lie in (0, 1]")
        if not self.a > 0:
            raise ValueError("a must be positive")

    @classmethod
    def norm_metric(cls) -> "MetricSpec":
        return cls("norm")

    @classmethod
    def holder(cls, alpha: float) -> "MetricSpec":
        return cls("holder", alpha)

    @classmethod
    def bounded(cls, a: float, alpha: float = 1.0) -> "MetricSpec":
        return cls("bounded", alpha, a)

    @classmethod
    def shift_metric(cls) -> "MetricSpec":
        return cls("shift")

    def from_norm(self, d: np.ndarray | float):
        """Map raw norm distances to this metric (not valid for ``shift``)."""
        if self.kind == "norm":
            return d
        if self.kind == "holder":
            return np.power(d, self.alpha)
        if self.kind == "bounded":
            return np.minimum(1.0, self.a * np.power(d, self.alpha))
        raise ValueError("the shift metric is not a function of the norm")


def _pad(X: np.ndarray, depth: int) -> np.ndarray:
    if X.shape[1] >= depth:
        return X
    return np.pad(X, ((0, 0), (0, depth - X.shape[1])))


def shift_dist_rows(X: np.ndarray, Y: np.ndarray, space: SpaceKind) -> np.ndarray:
    """Row-wise shift metric between aligned rows of ``X`` and ``Y``."""
    depth = max(X.shape[1], Y.shape[1])
    diff = np.abs(_pad(X, depth) - _pad(Y, depth))
    w = 0.5 ** np.arange(1, depth + 1)
    if space.is_c0:
        if depth == 0:
            return np.zeros(len(diff))
        return (np.minimum(1.0, diff) * w).max(axis=1)
    p = space.p
    return np.power((np.minimum(1.0, diff ** p) * w).sum(axis=1), 1.0 / p)


def dist(x: Point, y: Point, spec: MetricSpec = MetricSpec()) -> float:
    _check_same(x, y)
    depth = max(len(x), len(y))
    X, Y = x.array(depth)[None, :], y.array(depth)[None, :]
    if spec.kind == "shift":
        return float(shift_dist_rows(X, Y, x.space)[0])
    d = float(x.space.norm_rows(X - Y)[0]) if depth else 0.0
    return float(spec.from_norm(d))


def pairwise_norm(X: np.ndarray, Y: np.ndarray, space: SpaceKind) -> np.ndarray:
    depth = max(X.shape[1], Y.shape[1], 1)
    X, Y = _pad(np.asarray(X, float), depth), _pad(np.asarray(Y, float), depth)
    if space.is_c0:
        return cdist(X, Y, "chebyshev")
    if space.p == 2.0:
        return cdist(X, Y, "euclidean")
    if space.p == 1.0:
        return cdist(X, Y, "cityblock")
    return cdist(X, Y, "minkowski", p=space.p)


def pairwise_dist(X: np.ndarray, Y: np.ndarray, space: SpaceKind, spec: MetricSpec) -> np.ndarray:
    """Cost matrix ``C[i, j] = dist(X[i], Y[j])``."""
    X, Y = np.asarray(X, float), np.asarray(Y, float)
    if spec.kind == "shift":
        depth = max(X.shape[1], Y.shape[1])
        X, Y = _pad(X, depth), _pad(Y, depth)
        out = np.empty((len(X), len(Y)))
        for i in range(len(X)):
            out[i] = shift_dist_rows(np.broadcast_to(X[i], Y.shape), Y, space)
        return out
    return spec.from_norm(pairwise_norm(X, Y, space))


# -- the shift and its preimages ---------------------------------------------


def apply_L(w: WeightSequence, x: Point) -> Point:
    """``L(x)_i = alpha_i x_{i+1}``."""
    if len(x) <= 1:
        return Point((), x.space)
    tail = np.asarray(x.coords[1:])
    return Point(tuple(w.values(1, len(tail)) * tail), x.space)


def preimage(w: WeightSequence, x: Point, r: float) -> Point:
    """``(r, x_1/alpha_1, x_2/alpha_2, ...)``, the branch of ``L^{-1}`` through ``r e_1``."""
    if not x.coords:
        return Point((float(r),), x.space)
    body = np.asarray(x.coords) / w.values(1, len(x))
    return Point((float(r),) + tuple(body), x.space)


def shift_rows(w: WeightSequence, X: np.ndarray) -> np.ndarray:
    """Apply ``L`` to every row; the output keeps the input width (last column zero)."""
    X = np.asarray(X, dtype=float)
    out = np.zeros_like(X)
    M = X.shape[1]
    if M > 1:
        out[:, : M - 1] = X[:, 1:] * w.values(1, M - 1)
    return out


def preimage_rows(w: WeightSequence, X: np.ndarray, r: np.ndarray, depth: int | None = None) -> np.ndarray:
    """Row-wise preimage: row ``i`` becomes ``(r_i, X[i,0]/alpha_1, ...)``.

    The result has ``X.shape[1] + 1`` columns, or ``depth`` columns when given
    (the dropped coordinates are simply discarded).
    """
    X = np.asarray(X, dtype=float)
    M = X.shape[1]
    width = M + 1 if depth is None else depth
    out = np.zeros((X.shape[0], width))
    out[:, 0] = r
    keep = min(M, width - 1)
    if keep > 0:
        out[:, 1 : keep + 1] = X[:, :keep] / w.values(1, keep)
    return out


def points_to_rows(points: list[Point], depth: int | None = None) -> np.ndarray:
    depth = max((len(p) for p in points), default=0) if depth is None else depth
    return np.vstack([p.array(depth) for p in points]) if points else np.zeros((0, depth))
