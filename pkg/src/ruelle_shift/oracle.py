"""Exact finite reductions: constant weights, atomic a-priori measure, finite-rank potential.

States are index tuples ``(i_1, ..., i_K)`` standing for the collocation point
``(a_{i_1}, a_{i_2}/alpha, ..., a_{i_K}/alpha^{K-1})``.  The preimage of a state
under atom ``j`` is again a state, ``(j, i_1, ..., i_{K-1})``, so the transfer
operator restricted to functions of the first ``K`` coordinates is an exact
``k^K x k^K`` matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .errors import ClosureViolation, NotStochastic
from .potential import Potential

MAX_STATES = 100_000


@dataclass(frozen=True, eq=False)
class FiniteInstance:
    alpha: float
    values: np.ndarray
    probs: np.ndarray
    rank: int
    state_rank: int
    states: np.ndarray  # (S, K) atom indices
    collocation: np.ndarray  # (S, K) coordinates
    matrix: sparse.csr_matrix
    normalized: bool = False

    @property
    def size(self) -> int:
        return len(self.states)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def origin_state(self) -> int:
        """Index of the collocation point nearest to the origin (first on ties)."""
        if self.collocation.shape[1] == 0:
            return 0
        return int(np.argmin(np.abs(self.collocation).max(axis=1)))


def _axes(values: np.ndarray, alpha: float, K: int) -> list[np.ndarray]:
    axes = [values]
    for _ in range(1, K):
        axes.append(axes[-1] / alpha)
    return axes


def build(alpha: float, atoms, A: Potential, state_rank: int | None = None) -> FiniteInstance:
    """Exact matrix of the transfer operator on functions of the first ``K`` coordinates.

    ``atoms`` is a list of ``(value, prob)`` pairs; ``K = max(rank - 1, state_rank)``.
    """
    if A.rank is None:
        raise ValueError("oracle needs a finite-rank potential")
    vals = np.array([float(v) for v, _ in atoms])
    probs = np.array([float(p) for _, p in atoms])
    order = np.argsort(vals)
    vals, probs = vals[order], probs[order]
    k = len(vals)
    if k < 2:
        raise ValueError("oracle needs at least two atoms")
    if abs(probs.sum() - 1.0) > 1e-12 or np.any(probs <= 0):
        raise ValueError("atom probabilities must be positive and sum to one")
    N = A.rank
    K = max(N - 1, state_rank or 0)
    S = k ** K
    if S > MAX_STATES:
        raise ValueError(f"{S} states exceed the cap of {MAX_STATES}")
    axes = _axes(vals, alpha, K)
    states = np.array(np.unravel_index(np.arange(S), (k,) * K)).T.reshape(S, K)
    coll = np.stack([axes[i][states[:, i]] for i in range(K)], axis=1) if K else np.zeros((1, 0))

    # preimage of state s under atom j: (a_j, x_1/alpha, ..., x_K/alpha)
    rows, cols, pre = [], [], []
    for j in range(k):
        v = np.empty((S, K + 1))
        v[:, 0] = vals[j]
        v[:, 1:] = coll / alpha
        succ = np.concatenate([np.full((S, 1), j), states[:, : K - 1]], axis=1) if K else np.zeros((S, 0), int)
        tgt = np.ravel_multi_index(succ.T, (k,) * K) if K else np.zeros(S, dtype=int)
        if K and not np.array_equal(v[:, :K], coll[tgt]):
            raise ClosureViolation("a preimage left the collocation set")
        rows.append(np.arange(S))
        cols.append(tgt)
        width = max(N, K + 1)
        vv = np.pad(v, ((0, 0), (0, width - v.shape[1]))) if v.shape[1] < width else v
        pre.append(probs[j] * np.exp(A(vv)))
    M = sparse.csr_matrix((np.concatenate(pre), (np.concatenate(rows), np.concatenate(cols))), shape=(S, S))
    M.sum_duplicates()
    return FiniteInstance(float(alpha), vals, probs, N, K, states, coll, M)


@dataclass(frozen=True)
class ExactEigen:
    lam: float
    psi: np.ndarray
    bracket: tuple[float, float]
    iterations: int


def exact_eigen(inst: FiniteInstance, tol: float = 1e-13, max_iter: int = 100_000) -> ExactEigen:
    """Perron pair by power iteration with a Collatz-Wielandt bracket.

    ``psi`` is normalized to 1 at the state nearest the origin.
    """
    M = inst.matrix
    psi = np.ones(inst.size)
    for it in range(1, max_iter + 1):
        y = M @ psi
        ratio = y / psi
        lo, hi = float(ratio.min()), float(ratio.max())
        psi = y / np.abs(y).max()
        if hi - lo <= tol * hi:
            break
    else:
        raise RuntimeError("oracle power iteration did not converge")
    psi = psi / psi[inst.origin_state()]
    # the bracket contains the spectral radius; report its midpoint
    return ExactEigen(0.5 * (lo + hi), psi, (lo, hi), it)


def normalized_instance(inst: FiniteInstance, eig: ExactEigen | None = None) -> FiniteInstance:
    """Stochastic matrix ``P[s, t] = M[s, t] psi[t] / (lam psi[s])``."""
    eig = eig or exact_eigen(inst)
    M = inst.matrix.tocoo()
    data = M.data * eig.psi[M.col] / (eig.lam * eig.psi[M.row])
    P = sparse.csr_matrix((data, (M.row, M.col)), shape=M.shape)
    return FiniteInstance(inst.alpha, inst.values, inst.probs, inst.rank, inst.state_rank, inst.states,
                          inst.collocation, P, normalized=True)


def exact_stationary(inst: FiniteInstance, tol: float = 1e-15, max_iter: int = 1_000_000) -> np.ndarray:
    """Left Perron vector of a stochastic instance, as a probability vector."""
    P = inst.matrix
    rows = np.asarray(P.sum(axis=1)).ravel()
    if np.abs(rows - 1.0).max() > 1e-12:
        raise NotStochastic(f"row sums deviate from 1 by {np.abs(rows - 1.0).max():.3e}")
    PT = P.T.tocsr()
    v = np.full(inst.size, 1.0 / inst.size)
    for _ in range(max_iter):
        new = PT @ v
        new /= new.sum()
        if np.abs(new - v).max() <= tol:
            return new
        v = new
    raise RuntimeError("stationary iteration did not converge")


def discounted_fixed_point(inst: FiniteInstance, s: float, tol: float = 1e-13, max_iter: int = 1_000_000) -> np.ndarray:
    """Plain Picard iteration of ``u = log(M e^{s u})`` on the states."""
    M = inst.matrix
    u = np.zeros(inst.size)
    for _ in range(max_iter):
        # shift for stability; the shift cancels exactly in the log
        c = s * u.max()
        new = np.log(M @ np.exp(s * u - c)) + c
        if np.abs(new - u).max() <= tol * (1 - s):
            return new
        u = new
    raise RuntimeError("oracle Picard iteration did not converge")


def marginal(inst: FiniteInstance, dist: np.ndarray, coord: int) -> np.ndarray:
    """Distribution of the atom index in coordinate ``coord`` (1-based) under ``dist``."""
    k = len(inst.values)
    out = np.zeros(k)
    np.add.at(out, inst.states[:, coord - 1], dist)
    return out
