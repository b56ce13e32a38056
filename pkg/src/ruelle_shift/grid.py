"""Tensor-grid functions of the first few coordinates with clamped multilinear interpolation."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np
from scipy import sparse


@dataclass(frozen=True, eq=False)
class GridFunction:
    """A function of ``x_1..x_N`` stored on a tensor grid.

    ``axes[i]`` is a strictly increasing node array for coordinate ``i+1``;
    ``values`` has shape ``tuple(len(a) for a in axes)``.  A rank-0 grid is a
    constant.  Queries outside the box are clamped to the boundary.
    """

    axes: tuple[np.ndarray, ...]
    values: np.ndarray

    def __post_init__(self):
        axes = tuple(np.asarray(a, dtype=float) for a in self.axes)
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", vals)
        if vals.shape != tuple(len(a) for a in axes):
            raise ValueError(f"values shape {vals.shape} does not match axes")
        for a in axes:
            if len(a) == 0 or np.any(np.diff(a) <= 0):
                raise ValueError("grid axes must be non-empty and strictly increasing")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid values must be finite")

    @property
    def rank(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @classmethod
    def constant(cls, value: float, axes=()) -> "GridFunction":
        axes = tuple(np.asarray(a, float) for a in axes)
        return cls(axes, np.full(tuple(len(a) for a in axes), float(value)))

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.axes, np.asarray(values, float).reshape(self.shape))

    def nodes(self) -> np.ndarray:
        """All grid nodes as rows, in C order of ``values``."""
        if self.rank == 0:
            return np.zeros((1, 0))
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def _cells(self, X: np.ndarray):
        """Per-axis lower indices and fractional offsets for clamped interpolation."""
        idx, frac = [], []
        for i, a in enumerate(self.axes):
            x = X[:, i] if i < X.shape[1] else np.zeros(len(X))
            if len(a) == 1:
                idx.append(np.zeros(len(X), dtype=np.int64))
                frac.append(np.zeros(len(X)))
                continue
            j = np.clip(np.searchsorted(a, x, side="right") - 1, 0, len(a) - 2)
            t = (x - a[j]) / (a[j + 1] - a[j])
            idx.append(j)
            frac.append(np.clip(t, 0.0, 1.0))
        return idx, frac

    def interp_weights(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Flat node indices and weights, each of shape ``(len(X), 2**rank)``."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        n = len(X)
        if self.rank == 0:
            return np.zeros((n, 1), dtype=np.int64), np.ones((n, 1))
        idx, frac = self._cells(X)
        corners = list(product((0, 1), repeat=self.rank))
        flat = np.empty((n, len(corners)), dtype=np.int64)
        wts = np.empty((n, len(corners)))
        for c, bits in enumerate(corners):
            sub = []
            wc = np.ones(n)
            for i, b in enumerate(bits):
                if len(self.axes[i]) == 1:
                    sub.append(idx[i])
                    if b:
                        wc = wc * 0.0
                    continue
                sub.append(idx[i] + b)
                wc = wc * (frac[i] if b else 1.0 - frac[i])
            flat[:, c] = np.ravel_multi_index(sub, self.shape)
            wts[:, c] = wc
        return flat, wts

    def interp_matrix(self, X: np.ndarray) -> sparse.csr_matrix:
        """Sparse matrix ``P`` with ``P @ values.ravel() == self(X)``."""
        flat, wts = self.interp_weights(X)
        n, k = flat.shape
        rows = np.repeat(np.arange(n), k)
        P = sparse.csr_matrix((wts.ravel(), (rows, flat.ravel())), shape=(n, self.values.size))
        P.sum_duplicates()
        return P

    def __call__(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.rank == 0:
            return np.full(len(X), float(self.values))
        flat, wts = self.interp_weights(X)
        return np.einsum("ij,ij->i", self.values.ravel()[flat], wts)

    def at_origin(self) -> float:
        return float(self(np.zeros((1, max(self.rank, 1))))[0])

    def lipschitz_sup(self) -> float:
        """Lipschitz bound of the interpolant w.r.t. the sup norm (sum of max slopes per axis)."""
        total = 0.0
        for i, a in enumerate(self.axes):
            if len(a) < 2:
                continue
            d = np.diff(self.values, axis=i)
            h = np.diff(a).reshape([-1 if j == i else 1 for j in range(self.rank)])
            total += float(np.abs(d / h).max())
        return total

    def map(self, f) -> "GridFunction":
        return GridFunction(self.axes, f(self.values))
