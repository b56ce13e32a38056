"""Wasserstein-1 distances between equal-weight particle clouds.

Exact values come from the assignment problem (uniform weights and equal
counts make an optimal plan a permutation).  Larger clouds fall back to a
log-domain Sinkhorn solver whose regularization bias is reported, never hidden.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import logsumexp

from .errors import BudgetExceeded, LipschitzAuditFailed, NonConvergence, SizeMismatch
from .space import MetricSpec, SpaceKind, pairwise_dist, shift_dist_rows

EXACT_THRESHOLD = 2048
# dense cost-matrix cells allowed for the entropic solver (several such arrays are live at once)
MAX_CELLS = 16_000_000


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Equal-weight cloud; ``particles`` has one row per point (implicit zero tail)."""

    particles: np.ndarray
    space: SpaceKind = SpaceKind(2.0)
    generation: int = 0
    seed: int | None = None
    stream: int = 0
    dropped_tail: float = 0.0

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.particles, dtype=float))
        if P.ndim != 2 or len(P) == 0:
            raise ValueError("a cloud needs at least one particle")
        if not np.all(np.isfinite(P)):
            raise ValueError("particles must be finite")
        object.__setattr__(self, "particles", P)

    def __len__(self) -> int:
        return len(self.particles)

    @property
    def depth(self) -> int:
        return self.particles.shape[1]

    @classmethod
    def dirac(cls, x, n: int, space: SpaceKind | None = None, depth: int | None = None, **kw):
        x = np.asarray(getattr(x, "coords", x), dtype=float).ravel()
        depth = max(depth or 0, len(x), 1)
        row = np.zeros(depth)
        row[: len(x)] = x
        return cls(np.tile(row, (n, 1)), space or SpaceKind(2.0), **kw)

    def head(self, n: int) -> "EmpiricalMeasure":
        """First ``n`` particles; particles are exchangeable, so this is a fair subsample."""
        return EmpiricalMeasure(self.particles[:n], self.space, self.generation, self.seed, self.stream,
                                self.dropped_tail)

    def mean(self, f) -> float:
        return float(np.mean(f(self.particles)))


def _rows(mu) -> np.ndarray:
    return mu.particles if isinstance(mu, EmpiricalMeasure) else np.atleast_2d(np.asarray(mu, dtype=float))


def _space(mu, nu, space):
    if space is not None:
        return space
    for c in (mu, nu):
        if isinstance(c, EmpiricalMeasure):
            return c.space
    return SpaceKind(2.0)


@dataclass(frozen=True, eq=False)
class TransportPlan:
    cost: float
    method: str
    assignment: np.ndarray | None = None
    coupling: np.ndarray | None = None
    reg: float | None = None
    marginal_error: float = 0.0
    dual_value: float | None = None

    @property
    def duality_gap(self) -> float | None:
        return None if self.dual_value is None else self.cost - self.dual_value


@dataclass(frozen=True)
class W1Result:
    value: float
    plan: TransportPlan


def w1(mu, nu, metric: MetricSpec, space: SpaceKind | None = None, method: str = "auto",
       exact_threshold: int = EXACT_THRESHOLD, reg: float = 0.01, tol: float = 1e-6,
       max_iter: int = 20_000) -> W1Result:
    """``W_D(mu, nu)`` for equal-weight clouds under ``metric``."""
    X, Y = _rows(mu), _rows(nu)
    sp = _space(mu, nu, space)
    if method == "auto":
        method = "exact" if (len(X) == len(Y) and len(X) <= exact_threshold) else "entropic"
    if method == "entropic" and len(X) * len(Y) > MAX_CELLS:
        raise BudgetExceeded(f"{len(X)}x{len(Y)} cost matrix exceeds {MAX_CELLS} cells; subsample the clouds")
    C = pairwise_dist(X, Y, sp, metric)
    if method == "exact":
        if len(X) != len(Y):
            raise SizeMismatch(f"exact assignment needs equal counts, got {len(X)} and {len(Y)}")
        r, c = linear_sum_assignment(C)
        cost = float(C[r, c].sum() / len(X))
        return W1Result(cost, TransportPlan(cost, "exact_assignment", assignment=c))
    if method == "entropic":
        return _sinkhorn(C, reg, tol, max_iter)
    raise ValueError(f"unknown method {method!r}")


def _sinkhorn(C: np.ndarray, reg: float, tol: float, max_iter: int) -> W1Result:
    """Log-domain Sinkhorn with uniform marginals; reports transport cost and dual value."""
    n, m = C.shape
    la, lb = -math.log(n) * np.ones(n), -math.log(m) * np.ones(m)
    f, g = np.zeros(n), np.zeros(m)
    K = -C / reg
    err = math.inf
    for _ in range(max_iter):
        f = -reg * logsumexp(K + g[None, :] / reg + lb[None, :], axis=1)
        g = -reg * logsumexp(K + f[:, None] / reg + la[:, None], axis=0)
        logP = K + f[:, None] / reg + g[None, :] / reg + la[:, None] + lb[None, :]
        err = float(np.abs(np.exp(logsumexp(logP, axis=1)) - 1.0 / n).sum())
        if err <= tol:
            break
    else:
        raise NonConvergence(f"Sinkhorn marginal error {err:.3e} after {max_iter} iterations")
    P = np.exp(logP)
    cost = float((P * C).sum())
    # c-transforms make (f, g) feasible (f_i + g_j <= C_ij), so the dual value
    # is a certified lower bound on the unregularized optimum
    g = (C - f[:, None]).min(axis=0)
    f = (C - g[None, :]).min(axis=1)
    dual = float(f.mean() + g.mean())
    return W1Result(cost, TransportPlan(cost, "entropic", coupling=P, reg=reg, marginal_error=err,
                                        dual_value=dual))


def w1_1d(x: np.ndarray, y: np.ndarray) -> float:
    """1-D W1 between equal-size samples: mean gap of order statistics."""
    return float(np.mean(np.abs(np.sort(np.asarray(x).ravel()) - np.sort(np.asarray(y).ravel()))))


def kantorovich_lb(mu, nu, metric: MetricSpec, test_functions, space: SpaceKind | None = None,
                   audit_pairs: int = 2000, seed: int = 0) -> float:
    """``max_phi |int phi dmu - int phi dnu|`` over declared 1-Lipschitz test functions.

    Each function is audited on sampled pairs from the pooled particles; a
    violation raises :class:`LipschitzAuditFailed`.
    """
    X, Y = _rows(mu), _rows(nu)
    sp = _space(mu, nu, space)
    depth = max(X.shape[1], Y.shape[1])
    pool = np.vstack([np.pad(X, ((0, 0), (0, depth - X.shape[1]))), np.pad(Y, ((0, 0), (0, depth - Y.shape[1])))])
    rng = np.random.default_rng(seed)
    i = rng.integers(0, len(pool), audit_pairs)
    j = rng.integers(0, len(pool), audit_pairs)
    if metric.kind == "shift":
        d = shift_dist_rows(pool[i], pool[j], sp)
    else:
        d = metric.from_norm(sp.norm_rows(pool[i] - pool[j]))
    best = 0.0
    for k, phi in enumerate(test_functions):
        fi, fj = np.asarray(phi(pool[i]), float), np.asarray(phi(pool[j]), float)
        excess = np.abs(fi - fj) - d
        if excess.max() > 1e-12:
            raise LipschitzAuditFailed(f"test function {k} exceeds Lipschitz constant 1 by {excess.max():.3e}")
        gap = abs(float(np.mean(phi(X))) - float(np.mean(phi(Y))))
        best = max(best, gap)
    return best


def w1_subsample(mu: EmpiricalMeasure, nu: EmpiricalMeasure, metric: MetricSpec,
                 n: int = EXACT_THRESHOLD) -> float:
    """Exact W1 between the first ``n`` particles of each cloud."""
    n = min(n, len(mu), len(nu))
    return w1(mu.head(n), nu.head(n), metric, method="exact").value
