"""The dual transfer operator on particle clouds and diagnostics of the Gibbs measure.

One step of ``L_A*`` for a normalized ``A`` moves a particle ``x`` to the preimage
``(r, x_1/alpha_1, ...)`` with ``r`` drawn from ``e^{A(preimage)} dm(r)``.  The
draw uses ``K`` candidates from ``m`` and a softmax choice among them (bias of
order ``1/K``).

Randomness is counter based: particle ``i`` at generation ``g`` of stream
``s`` reads a fixed block of a Philox stream keyed by ``(seed, s)``, so results
do not depend on chunking or on the number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.integrate import cumulative_trapezoid

from .apriori import AprioriMeasure
from .errors import NotNormalized
from .potential import Potential, is_normalized
from .space import MetricSpec, SpaceKind, preimage_rows, shift_rows
from .wasserstein import EXACT_THRESHOLD, EmpiricalMeasure, w1_subsample
from .weights import WeightSequence

CHUNK = 1024
DEFAULT_DEPTH = 40


def _key(seed: int, stream: int) -> np.ndarray:
    return np.random.SeedSequence([seed, stream]).generate_state(2, np.uint64)


def uniform_block(seed: int, stream: int, generation: int, start: int, count: int, width: int) -> np.ndarray:
    """Uniforms in (0, 1) for particles ``start..start+count-1``, ``width`` per particle.

    Particle ``i`` owns counter blocks ``[i*S/4, (i+1)*S/4)`` with ``S = 4*ceil(width/4)``
    in word 0 and the generation in word 1 of the Philox counter.
    """
    S = 4 * math.ceil(width / 4)
    bg = np.random.Philox(key=_key(seed, stream), counter=[start * S // 4, generation, 0, 0])
    raw = bg.random_raw(count * S).reshape(count, S)[:, :width]
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def _push_chunk(A: Potential, m: AprioriMeasure, w: WeightSequence, X: np.ndarray, K: int, seed: int,
                stream: int, generation: int, start: int, depth: int):
    n = len(X)
    U = uniform_block(seed, stream, generation, start, n, K + 1)
    R = m.ppf(U[:, :K])
    if K == 1:
        r = R[:, 0]
    else:
        width = min(A.rank, X.shape[1] + 1) if A.rank is not None else X.shape[1] + 1
        base = preimage_rows(w, X, np.zeros(n), depth=width)
        V = np.repeat(base, K, axis=0)
        V[:, 0] = R.ravel()
        logits = A(V).reshape(n, K)
        logits -= logits.max(axis=1, keepdims=True)
        cw = np.cumsum(np.exp(logits), axis=1)
        pick = (cw < (U[:, K] * cw[:, -1])[:, None]).sum(axis=1)
        r = R[np.arange(n), np.minimum(pick, K - 1)]
    out = preimage_rows(w, X, r)
    dropped = 0.0
    if out.shape[1] > depth:
        dropped = float(np.abs(out[:, depth:]).max())
        out = out[:, :depth]
    return out, dropped


def push_dual(A: Potential, m: AprioriMeasure, w: WeightSequence, mu: EmpiricalMeasure, K: int = 32,
              seed: int | None = None, threads: int = 1, max_depth: int = DEFAULT_DEPTH,
              tol: float = 1e-6, check: bool = True) -> EmpiricalMeasure:
    """One step of the dual operator applied to a cloud.

    ``check`` audits ``L_A(1) = 1`` on a few particles (or uses the residual
    recorded on a normalized potential) and raises :class:`NotNormalized`.
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    if seed is None:
        seed = mu.seed
    if seed is None:
        raise ValueError("push_dual needs a seed")
    if check:
        res = getattr(A, "residual", None)
        if res is None or not math.isfinite(res):
            res = is_normalized(A, m, w, mu.particles[:8])
        if res > tol:
            raise NotNormalized(f"L_A(1) deviates from 1 by {res:.3e} (tolerance {tol:.1e})")
    X = mu.particles
    starts = list(range(0, len(X), CHUNK))

    def work(s):
        return _push_chunk(A, m, w, X[s : s + CHUNK], K, seed, mu.stream, mu.generation, s, max_depth)

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(work, starts))
    else:
        parts = [work(s) for s in starts]
    out = np.vstack([p[0] for p in parts])
    dropped = max([mu.dropped_tail] + [p[1] for p in parts])
    return EmpiricalMeasure(out, mu.space, mu.generation + 1, seed, mu.stream, dropped)


def iterate(A: Potential, m: AprioriMeasure, w: WeightSequence, mu: EmpiricalMeasure, n: int, K: int = 32,
            seed: int | None = None, threads: int = 1, max_depth: int = DEFAULT_DEPTH,
            tol: float = 1e-6, callback=None) -> EmpiricalMeasure:
    for _ in range(n):
        mu = push_dual(A, m, w, mu, K, seed, threads, max_depth, tol)
        if callback is not None:
            callback(mu)
    return mu


# -- closed-form laws -------------------------------------------------------------


def product_law_sample(w: WeightSequence, ppf, n: int, depth: int, seed: int, stream: int = 99) -> np.ndarray:
    """Samples with independent coordinates ``Z_k / beta_1^{k-1}``, ``Z_k`` drawn through ``ppf``.

    This is the Gibbs law of every potential that depends on ``x_1`` only.
    """
    U = uniform_block(seed, stream, 0, 0, n, depth)
    scale = np.exp(np.concatenate([[0.0], np.cumsum(w.log_values(1, depth - 1))])) if depth > 1 else np.ones(1)
    return ppf(U) / scale[None, :]


def tilted_ppf(f, m: AprioriMeasure, points: int = 200_001):
    """Inverse CDF of ``e^{f(r)} dm(r)`` (normalized); ``f`` acts on 1-D arrays."""
    if m.kind == "atoms":
        v = np.asarray(m.values)
        p = np.asarray(m.probs) * np.exp(f(v))
        p = p / p.sum()
        cum = np.cumsum(p)
        cum[-1] = 1.0
        return lambda u: v[np.minimum(np.searchsorted(cum, u, side="right"), len(v) - 1)]
    lo = m.tail_quantile(math.log(1e-14))
    r = np.linspace(-lo, lo, points)
    if m.kind == "gaussian":
        r = r + m.mean
    dens = np.exp(f(r)) * _density(m, r)
    cdf = cumulative_trapezoid(dens, r, initial=0.0)
    cdf /= cdf[-1]
    keep = np.concatenate([[True], np.diff(cdf) > 0])
    return lambda u: np.interp(u, cdf[keep], r[keep])


def _density(m: AprioriMeasure, r: np.ndarray) -> np.ndarray:
    if m.kind == "gaussian":
        return stats.norm.pdf(r, m.mean, m.sd)
    return stats.t.pdf(r / m.scale, m.df) / m.scale


def first_coord_function(A: Potential):
    """``r -> A(r, 0, 0, ...)`` for a potential depending on ``x_1`` only."""
    if A.rank != 1:
        raise ValueError("closed-form law needs a potential of rank 1")
    return lambda r: A(np.asarray(r, float).reshape(-1, 1)).reshape(np.shape(r))


def gibbs_oracle_sample(A: Potential, m: AprioriMeasure, w: WeightSequence, n: int, depth: int, seed: int,
                        stream: int = 99, space: SpaceKind | None = None) -> EmpiricalMeasure:
    """Exact sample of the Gibbs law of a normalized rank-1 potential."""
    if A.rank != 1:
        raise ValueError("closed-form law needs a potential of rank 1")
    trivial = A.lip == 0.0 and A.sup_bound == 0.0
    ppf = m.ppf if trivial else tilted_ppf(first_coord_function(A), m)
    return EmpiricalMeasure(product_law_sample(w, ppf, n, depth, seed, stream), space or SpaceKind(2.0), 0, seed, stream)


def noise_floor(sampler, metric: MetricSpec, n: int = EXACT_THRESHOLD, space: SpaceKind | None = None) -> float:
    """W1 between two independent samples of the same law at the same count.

    ``sampler(stream)`` must return an ``(n, depth)`` array for each stream id.
    """
    space = space or SpaceKind(2.0)
    a = EmpiricalMeasure(sampler(0)[:n], space)
    b = EmpiricalMeasure(sampler(1)[:n], space)
    return w1_subsample(a, b, metric, n)


# -- diagnostics --------------------------------------------------------------------


def invariance_gap(mu: EmpiricalMeasure, w: WeightSequence, metric: MetricSpec, n: int = EXACT_THRESHOLD) -> float:
    """``W(L_# mu, mu)``: zero for an invariant law up to sampling noise."""
    pushed = EmpiricalMeasure(shift_rows(w, mu.particles), mu.space)
    return w1_subsample(pushed, mu, metric, n)


def mixing_correlation(mu: EmpiricalMeasure, w: WeightSequence, f, g, n: int) -> float:
    """``|mean(f * g o L^n) - mean(f) mean(g)|`` over the cloud."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    X = mu.particles
    Y = X
    for _ in range(n):
        Y = shift_rows(w, Y)
    fx = np.asarray(f(X), dtype=float)
    gy = np.asarray(g(Y), dtype=float)
    return float(abs(np.mean(fx * gy) - np.mean(fx) * np.mean(gy)))


@dataclass(frozen=True)
class SupportProbe:
    hit_fraction: float
    cylinder_fraction: float
    lower_bound: float
    stderr: float
    applicable: bool


def support_probe(mu: EmpiricalMeasure, x, eps: float, m: AprioriMeasure, A: Potential) -> SupportProbe:
    """Ball and one-step cylinder frequencies around ``x``.

    Invariance gives ``mu(|x_1 - c| <= eps) >= e^{inf A} m([c - eps, c + eps])``
    for a fixed point of the dual operator; ``lower_bound`` is that value.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    xr = np.asarray(getattr(x, "coords", x), dtype=float).ravel()
    P = mu.particles
    row = np.zeros(P.shape[1])
    row[: min(len(xr), len(row))] = xr[: len(row)]
    hit = float(np.mean(mu.space.norm_rows(P - row) < eps))
    c = row[0] if len(row) else 0.0
    cyl = np.abs(P[:, 0] - c) <= eps
    frac = float(cyl.mean())
    lb = math.exp(A.inf_bound) * m.mass(c - eps, c + eps) if math.isfinite(A.inf_bound) else 0.0
    se = math.sqrt(max(frac * (1 - frac), 1e-300) / len(P))
    return SupportProbe(hit, frac, lb, se, m.full_support)


@dataclass
class GibbsRunReport:
    generations: list[int] = field(default_factory=list)
    w_trace: list[float] = field(default_factory=list)
    uniqueness_trace: list[float] = field(default_factory=list)
    invariance_gap: float | None = None
    support_hits: dict | None = None
    mixing_trace: dict = field(default_factory=dict)
    dropped_tail: float = 0.0
    final: EmpiricalMeasure | None = None
    final_prime: EmpiricalMeasure | None = None

    def as_dict(self) -> dict:
        return {
            "generations": self.generations,
            "w_trace": self.w_trace,
            "uniqueness_trace": self.uniqueness_trace,
            "invariance_gap": self.invariance_gap,
            "support_hits": self.support_hits,
            "mixing_trace": self.mixing_trace,
            "dropped_tail": self.dropped_tail,
            "particles": None if self.final is None else len(self.final),
            "depth": None if self.final is None else self.final.depth,
        }


def iterate_to_gibbs(A: Potential, m: AprioriMeasure, w: WeightSequence, nu0: EmpiricalMeasure, n_iters: int,
                     K: int = 32, seed: int = 0, threads: int = 1, metric: MetricSpec | None = None,
                     nu0_prime: EmpiricalMeasure | None = None, record_every: int = 5,
                     max_depth: int = DEFAULT_DEPTH, w_particles: int = EXACT_THRESHOLD,
                     mixing_lags=(0, 1, 2, 4, 8), tol: float = 1e-6) -> GibbsRunReport:
    """Run the dual operator from ``nu0`` (and optionally an independent ``nu0_prime``).

    Every ``record_every`` generations the report stores W between successive
    iterates and, with a second start, W between the two chains.  The second
    chain uses stream ``nu0.stream + 1`` so its randomness is independent.
    """
    if n_iters < 0:
        raise ValueError("n_iters must be nonnegative")
    metric = metric or MetricSpec.bounded(1.0, 1.0)
    rep = GibbsRunReport()
    mu = EmpiricalMeasure(nu0.particles, nu0.space, nu0.generation, seed, nu0.stream, nu0.dropped_tail)
    nu = None
    if nu0_prime is not None:
        nu = EmpiricalMeasure(nu0_prime.particles, nu0_prime.space, nu0_prime.generation, seed,
                              nu0.stream + 1, nu0_prime.dropped_tail)
    prev = mu
    for g in range(1, n_iters + 1):
        mu = push_dual(A, m, w, mu, K, seed, threads, max_depth, tol)
        if nu is not None:
            nu = push_dual(A, m, w, nu, K, seed, threads, max_depth, tol)
        if g % record_every == 0 or g == n_iters:
            rep.generations.append(g)
            rep.w_trace.append(w1_subsample(prev, mu, metric, w_particles))
            if nu is not None:
                rep.uniqueness_trace.append(w1_subsample(mu, nu, metric, w_particles))
        prev = mu
    rep.final, rep.final_prime = mu, nu
    rep.dropped_tail = mu.dropped_tail
    if n_iters > 0:
        rep.invariance_gap = invariance_gap(mu, w, metric, w_particles)
        f = lambda X: np.tanh(X[:, 0])
        rep.mixing_trace = {int(n): mixing_correlation(mu, w, f, f, n) for n in mixing_lags if n < mu.depth}
        probe = support_probe(mu, np.zeros(1), 1.0, m, A)
        rep.support_hits = {"hit_fraction": probe.hit_fraction, "cylinder_fraction": probe.cylinder_fraction,
                            "lower_bound": probe.lower_bound, "stderr": probe.stderr,
                            "applicable": probe.applicable}
    return rep
