"""The Ruelle operator of a weighted shift, the discounted operator and the eigenpair solver.

``L_A(phi)(x) = int e^{A(v)} phi(v) dm(r)`` with ``v = (r, x_1/alpha_1, x_2/alpha_2, ...)``.

For a potential of rank ``N`` the discounted fixed point depends only on
``x_1..x_{N-1}``, so the solver works on a tensor grid of rank ``N - 1``.  Grid
axes are built so that the preimage map sends nodes to nodes in every
coordinate except the first (``axis_{i+1} = axis_i / alpha_i``); for atomic
a-priori measures the first axis holds the atoms and the discretization is
exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .apriori import AprioriMeasure, QuadratureRule
from .errors import BudgetExceeded, NonFinite, NonConvergence, ScheduleDiverged, Stagnation
from .grid import GridFunction
from .potential import Potential, as_rows
from .space import SpaceKind, preimage_rows
from .weights import WeightSequence, log_d_values

DEFAULT_SCHEDULE = (0.9, 0.99, 0.999, 0.9999)


def _eval(phi, V: np.ndarray) -> np.ndarray:
    if phi is None:
        return np.ones(len(V))
    return np.asarray(phi(V), dtype=float).reshape(len(V))


def apply_rows(A: Potential, m: AprioriMeasure, w: WeightSequence, phi, X: np.ndarray,
               rule: QuadratureRule | None = None, chunk: int = 4096) -> np.ndarray:
    """``L_A(phi)`` at every row of ``X``; ``phi=None`` means the constant 1."""
    rule = rule or m.quadrature()
    X = as_rows(X)
    n, Q = len(X), len(rule)
    out = np.empty(n)
    for lo in range(0, n, chunk):
        Xc = X[lo : lo + chunk]
        k = len(Xc)
        V = preimage_rows(w, np.repeat(Xc, Q, axis=0), np.tile(rule.nodes, k))
        vals = np.exp(A(V)) * _eval(phi, V)
        out[lo : lo + k] = vals.reshape(k, Q) @ rule.weights
    return out


def apply(A: Potential, m: AprioriMeasure, w: WeightSequence, phi, x, rule: QuadratureRule | None = None) -> float:
    return float(apply_rows(A, m, w, phi, as_rows(x), rule)[0])


@dataclass(frozen=True)
class IterateEstimate:
    value: float
    stderr: float
    method: str


def apply_n(A: Potential, m: AprioriMeasure, w: WeightSequence, phi, x, n: int, method: str = "nested",
            samples: int = 100_000, seed: int | None = None, budget: int = 5_000_000,
            rule: QuadratureRule | None = None) -> IterateEstimate:
    """``L_A^n(phi)(x)`` by tensorized quadrature or Monte Carlo over ``(r_1..r_n) ~ m^n``."""
    if n < 1:
        raise ValueError("n must be positive")
    X = as_rows(x)
    if len(X) != 1:
        raise ValueError("apply_n takes a single point")
    if method == "nested":
        rule = rule or m.quadrature()
        Q = len(rule)
        if Q ** n > budget:
            raise BudgetExceeded(f"{Q}^{n} quadrature points exceed the budget of {budget}")
        return IterateEstimate(float(nested_iterate_rows(A, w, phi, X, n, rule)[0]), 0.0, method)
    if method == "monte_carlo":
        if seed is None:
            raise ValueError("monte_carlo needs a seed")
        rng = np.random.default_rng(seed)
        r = m.sample(rng, (samples, n))
        V = np.repeat(X, samples, axis=0)
        S = np.zeros(samples)
        for j in range(n):
            V = preimage_rows(w, V, r[:, j])
            S += A(V)
        vals = np.exp(S) * _eval(phi, V)
        return IterateEstimate(float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(samples)), method)
    raise ValueError(f"unknown method {method!r}")


def nested_iterate_rows(A: Potential, w: WeightSequence, phi, X: np.ndarray, n: int,
                        rule: QuadratureRule) -> np.ndarray:
    """``L_A^n(phi)`` at each row of ``X`` for the discrete measure given by ``rule``."""
    X = as_rows(X)
    k, Q = len(X), len(rule)
    V = X
    S = np.zeros(k)
    logw = np.zeros(k)
    lw = np.log(rule.weights)
    for _ in range(n):
        cnt = len(V)
        V = preimage_rows(w, np.repeat(V, Q, axis=0), np.tile(rule.nodes, cnt))
        S = np.repeat(S, Q) + A(V)
        logw = np.repeat(logw, Q) + np.tile(lw, cnt)
    vals = np.exp(S + logw) * _eval(phi, V)
    return vals.reshape(k, Q ** n).sum(axis=1)


# -- grids and kernels ---------------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    """Collocation grid for functions of ``x_1..x_{rank-1}``.

    ``size`` nodes per axis (odd, so the origin is a node) for continuous
    a-priori measures; atoms use the atom values.  ``clamp_mass`` bounds the
    a-priori mass falling outside the first axis.  ``rank`` truncates
    potentials of unbounded rank.
    """

    size: int = 41
    clamp_mass: float = 1e-6
    rank: int | None = None

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("grid size must be positive")
        if not (0 < self.clamp_mass < 1):
            raise ValueError("clamp_mass must lie in (0, 1)")


def effective_rank(A: Potential, spec: GridSpec) -> int:
    if A.rank is not None:
        return A.rank if spec.rank is None else min(A.rank, spec.rank)
    if spec.rank is None:
        raise ValueError("potential has unbounded rank; set GridSpec.rank to truncate it")
    return spec.rank


def build_axes(m: AprioriMeasure, w: WeightSequence, grid_rank: int, spec: GridSpec) -> tuple[tuple, dict]:
    """Axes for a rank-``grid_rank`` grid and a log of how they were chosen."""
    if grid_rank == 0:
        return (), {"grid_rank": 0}
    if m.kind == "atoms":
        first = np.unique(np.asarray(m.values, dtype=float))
        info = {"grid_rank": grid_rank, "first_axis": "atoms", "clamped_mass": 0.0}
    else:
        n = spec.size + (spec.size % 2 == 0)
        R = abs(m.mean if m.kind == "gaussian" else 0.0) + m.tail_quantile(math.log(spec.clamp_mass))
        first = np.linspace(-R, R, n)
        info = {"grid_rank": grid_rank, "first_axis": "uniform", "half_width": R, "size": n,
                "clamped_mass": m.tail(R)}
    axes = [first]
    for i in range(1, grid_rank):
        axes.append(axes[-1] / w.value(i))
    return tuple(axes), info


class Kernel:
    """Discretized operator on a grid: ``L_A(phi)(node) = sum_q w_q e^{A_pre} (P phi)``."""

    def __init__(self, A: Potential, m: AprioriMeasure, w: WeightSequence, axes: tuple,
                 rule: QuadratureRule | None = None, rank: int | None = None):
        self.rule = rule or m.quadrature()
        self.axes = axes
        self.template = GridFunction.constant(0.0, axes)
        nodes = self.template.nodes()
        G, Q = len(nodes), len(self.rule)
        self.G, self.Q = G, Q
        V = preimage_rows(w, np.repeat(nodes, Q, axis=0), np.tile(self.rule.nodes, G))
        rank = rank or (A.rank or V.shape[1])
        if V.shape[1] < rank:
            V = np.pad(V, ((0, 0), (0, rank - V.shape[1])))
        self.A_pre = A(V).reshape(G, Q)
        if not np.all(np.isfinite(self.A_pre)):
            raise NonFinite("potential is not finite at some preimage node")
        self.logK = np.log(self.rule.weights)[None, :] + self.A_pre
        self.P = self.template.interp_matrix(V[:, : self.template.rank]) if self.template.rank else None
        flat, wts = self.template.interp_weights(np.zeros((1, max(self.template.rank, 1))))
        self._anchor = (flat[0], wts[0])

    def pull(self, h: np.ndarray) -> np.ndarray:
        """Values of a grid vector at all preimages, shape ``(G, Q)``."""
        if self.P is None:
            return np.full((self.G, self.Q), float(h.ravel()[0]))
        return (self.P @ h.ravel()).reshape(self.G, self.Q)

    def anchor(self, h: np.ndarray) -> float:
        flat, wts = self._anchor
        return float(h.ravel()[flat] @ wts)

    def log_apply(self, log_phi: np.ndarray, s: float = 1.0) -> np.ndarray:
        """``log L_A(e^{s log_phi})`` at the nodes."""
        return logsumexp(self.logK + s * self.pull(log_phi), axis=1)

    def grid(self, values: np.ndarray) -> GridFunction:
        return self.template.with_values(values)


def make_kernel(A: Potential, m: AprioriMeasure, w: WeightSequence, grid_spec: GridSpec | None = None):
    spec = grid_spec or GridSpec()
    N = effective_rank(A, spec)
    axes, info = build_axes(m, w, N - 1, spec)
    return Kernel(A, m, w, axes, rank=N), info


# -- discounted operator ----------------------------------------------------------------


def discounted_step(A: Potential, m: AprioriMeasure, w: WeightSequence, s: float, u: GridFunction,
                    kernel: Kernel | None = None) -> GridFunction:
    """``T_{s,A}(u)(x) = log int e^{A(v) + s u(v)} dm(r)`` on the nodes of ``u``."""
    if not (0 < s < 1):
        raise ValueError("s must lie in (0, 1)")
    kernel = kernel or Kernel(A, m, w, u.axes)
    return u.with_values(kernel.log_apply(u.values.ravel(), s))


@dataclass(frozen=True)
class DiscountedSolution:
    u: GridFunction
    s: float
    kappa_s: float  # (1 - s) u_s(0)
    h: np.ndarray  # u_s - u_s(0), flattened
    iterations: int
    residual: float
    error_bound: float
    certified: bool


def _relative_iteration(kernel: Kernel, s: float, tol: float, h0: np.ndarray | None, max_iter: int):
    """Relative value iteration for ``u = T_s(u)``.

    With ``g = T_s(h)`` and ``kappa = g(0)``, a vector satisfying ``h = g - kappa``
    gives the exact fixed point ``u_s = h + kappa/(1-s)``; the residual
    ``max |g - kappa - h|`` bounds ``||u - u_s|| (1 - s)``.
    """
    h = np.zeros(kernel.G) if h0 is None else h0.copy()
    target = tol * (1.0 - s)
    best, stall = math.inf, 0
    for it in range(1, max_iter + 1):
        g = kernel.log_apply(h, s)
        if not np.all(np.isfinite(g)):
            raise NonFinite(f"non-finite value in discounted iteration at s={s}")
        kappa = kernel.anchor(g)
        new = g - kappa
        res = float(np.abs(new - h).max())
        h = new
        if res <= target:
            return h, kappa, it, res
        # stop at the rounding floor rather than spinning
        scale = 1.0 + float(np.abs(g).max())
        if res < best * 0.999:
            best, stall = res, 0
        else:
            stall += 1
        if stall >= 20 and res < 1e3 * np.finfo(float).eps * scale:
            return h, kappa, it, res
    raise NonConvergence(f"discounted iteration did not converge at s={s} in {max_iter} steps (residual {res:.3e})")


def solve_discounted(A: Potential, m: AprioriMeasure, w: WeightSequence, s: float,
                     grid_spec: GridSpec | None = None, tol: float = 1e-10, method: str = "relative",
                     max_iter: int = 100_000, kernel: Kernel | None = None,
                     h0: np.ndarray | None = None) -> DiscountedSolution:
    """Fixed point ``u_s`` of ``T_{s,A}`` on the collocation grid, error ``<= tol`` when certified."""
    if not (0 < s < 1):
        raise ValueError("s must lie in (0, 1)")
    if not tol > 0:
        raise ValueError("tol must be positive")
    if kernel is None:
        kernel, _ = make_kernel(A, m, w, grid_spec)
    if method == "relative":
        h, kappa, it, res = _relative_iteration(kernel, s, tol, h0, max_iter)
        u = h + kappa / (1.0 - s)
    elif method == "picard":
        u = np.zeros(kernel.G)
        res = math.inf
        for it in range(1, max_iter + 1):
            new = kernel.log_apply(u, s)
            if not np.all(np.isfinite(new)):
                raise NonFinite(f"non-finite value in Picard iteration at s={s}")
            res = float(np.abs(new - u).max())
            u = new
            if res <= tol * (1.0 - s):
                break
        else:
            raise NonConvergence(f"Picard iteration did not converge at s={s}")
        kappa = (1.0 - s) * kernel.anchor(u)
        h = u - kernel.anchor(u)
    else:
        raise ValueError(f"unknown method {method!r}")
    bound = res / (1.0 - s)
    return DiscountedSolution(kernel.grid(u), s, float(kappa), h, it, res, bound, bound <= tol)


def _neville(ts: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Polynomial extrapolation of ``ys[i]`` (rows) sampled at ``ts[i]`` to ``t = 0``."""
    P = [np.asarray(y, dtype=float) for y in ys]
    n = len(ts)
    for k in range(1, n):
        for i in range(n - k):
            P[i] = (ts[i + k] * P[i] - ts[i] * P[i + 1]) / (ts[i + k] - ts[i])
    return P[0]


@dataclass(frozen=True)
class EigenPair:
    lam: float
    psi: GridFunction
    kappa_trace: list[tuple[float, float]]
    residual: float
    kappa: float
    method: str
    grid_info: dict = field(default_factory=dict)
    lam_power: float | None = None
    iterations: int = 0

    @property
    def log_psi(self) -> GridFunction:
        return self.psi.map(np.log)

    def as_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "kappa": self.kappa,
            "kappa_trace": [[s, k] for s, k in self.kappa_trace],
            "residual": self.residual,
            "method": self.method,
            "lambda_power": self.lam_power,
            "grid": self.grid_info,
            "psi_min": float(self.psi.values.min()),
            "psi_max": float(self.psi.values.max()),
            "iterations": self.iterations,
        }


def eigen_residual(A: Potential, m: AprioriMeasure, w: WeightSequence, lam: float, psi: GridFunction,
                   rank: int, points: np.ndarray | None = None, rule: QuadratureRule | None = None) -> float:
    """``max |L_A psi - lam psi|`` over ``points`` (default: the grid nodes)."""
    X = psi.nodes() if points is None else as_rows(points)
    if X.shape[1] < rank:
        X = np.pad(X, ((0, 0), (0, rank - X.shape[1])))
    lhs = apply_rows(A, m, w, psi, X, rule)
    return float(np.abs(lhs - lam * psi(X)).max())


def eigenpair(A: Potential, m: AprioriMeasure, w: WeightSequence, grid_spec: GridSpec | None = None,
              s_schedule=DEFAULT_SCHEDULE, tol: float = 1e-10, cross_check: bool = True) -> EigenPair:
    """Leading eigenpair by the discounted method.

    ``(1-s) u_s(0)`` and ``u_s - u_s(0)`` are extrapolated to ``s = 1`` with
    polynomial (Richardson) extrapolation over the schedule; ``lam = e^kappa``
    and ``psi = e^u`` with ``psi(0) = 1``.
    """
    sched = np.asarray(s_schedule, dtype=float)
    if len(sched) < 2 or np.any(np.diff(sched) <= 0) or sched[0] <= 0 or sched[-1] >= 1:
        raise ValueError("s_schedule must be increasing inside (0, 1) with at least two entries")
    spec = grid_spec or GridSpec()
    kernel, info = make_kernel(A, m, w, spec)
    N = effective_rank(A, spec)
    trace, hs = [], []
    h = None
    iters = 0
    for s in sched:
        sol = solve_discounted(A, m, w, float(s), tol=tol, kernel=kernel, h0=h)
        h = sol.h
        iters += sol.iterations
        trace.append((float(s), sol.kappa_s))
        hs.append(sol.h)
    ks = np.array([k for _, k in trace])
    diffs = np.abs(np.diff(ks))
    slack = 10 * tol + 1e-12 * (1 + np.abs(ks).max())
    if len(diffs) >= 2 and np.any(diffs[1:] > diffs[:-1] + slack):
        raise ScheduleDiverged(f"kappa trace is not Cauchy along the schedule: {ks.tolist()}")
    t = 1.0 - sched
    kappa = float(_neville(t, ks))
    h_star = _neville(t, np.vstack(hs))
    h_star = h_star - kernel.anchor(h_star)
    lam = math.exp(kappa)
    psi = kernel.grid(np.exp(h_star))
    residual = eigen_residual(A, m, w, lam, psi, N, rule=kernel.rule)
    lam_power = None
    if cross_check:
        lam_power = power_iterate(A, m, w, spec, kernel=kernel).lam
    info = dict(info, rank=N, truncated=A.rank is None or (spec.rank is not None and spec.rank < A.rank))
    return EigenPair(lam, psi, trace, residual, kappa, "discounted", info, lam_power, iters)


def power_iterate(A: Potential, m: AprioriMeasure, w: WeightSequence, grid_spec: GridSpec | None = None,
                  iters: int = 10_000, tol: float = 1e-13, kernel: Kernel | None = None,
                  init: np.ndarray | None = None) -> EigenPair:
    """Independent check: ``phi <- L_A phi / (L_A phi)(0)`` in log space on the grid."""
    if iters < 1:
        raise ValueError("iters must be positive")
    spec = grid_spec or GridSpec()
    info = {}
    if kernel is None:
        kernel, info = make_kernel(A, m, w, spec)
    ell = np.zeros(kernel.G) if init is None else np.log(np.asarray(init, float).ravel())
    c_prev = math.nan
    trace = []
    for it in range(1, iters + 1):
        g = kernel.log_apply(ell)
        c = kernel.anchor(g)
        new = g - c
        delta = float(np.abs(new - ell).max())
        ell = new
        trace.append(c)
        if abs(c - c_prev) <= tol and delta <= tol * 10:
            break
        c_prev = c
    else:
        raise Stagnation(f"power iteration ratio did not settle in {iters} steps")
    lam = math.exp(c)
    psi = kernel.grid(np.exp(ell))
    N = effective_rank(A, spec)
    residual = eigen_residual(A, m, w, lam, psi, N, rule=kernel.rule)
    return EigenPair(lam, psi, [], residual, c, "power", info, lam, it)


# -- Hoelder certificates ---------------------------------------------------------------


@dataclass(frozen=True)
class HolderCertificate:
    n: int
    delta: float
    D_n: float
    d_n: float
    bound_global: float
    bound_local: float
    empirical_ratio: float
    empirical_ratio_local: float
    pairs: int
    local_pairs: int
    violations_global: int
    violations_local: int

    @property
    def ok(self) -> bool:
        return self.violations_global == 0 and self.violations_local == 0


def holder_bounds(A: Potential, phi: Potential, w: WeightSequence, n: int, delta: float) -> tuple[float, float, float, float]:
    """Right-hand sides of the global and local Hoelder propagation bounds.

    Returns ``(bound_global, bound_local, D_n, d_n)`` for the iterate ``L_A^n`` with
    ``C_A = Lip_{A, D_X^alpha}`` and ``D_n = sum_{j<=n} d_j^{-alpha}``.
    """
    alpha = A.holder_alpha
    log_d, _ = log_d_values(w, n)
    D_n = float(np.exp(-alpha * log_d).sum())
    d_n = float(np.exp(log_d[-1]))
    head = d_n ** (-alpha) * phi.lip
    sup_phi = phi.sup_bound
    C_A, normA = A.lip, A.sup_bound
    if C_A == 0.0:
        g = 0.0
        loc = 0.0
    else:
        x = 2 * n * normA
        g = C_A * D_n * (math.expm1(x) / x if x > 0 else 1.0)
        da = delta ** alpha
        loc = math.expm1(C_A * D_n * da) / da
    return head + sup_phi * g, head + sup_phi * loc, D_n, d_n


def holder_certificate(A: Potential, m: AprioriMeasure, w: WeightSequence, phi: Potential, n: int,
                       delta: float = 0.5, space: SpaceKind | None = None, pairs: int = 10_000,
                       seed: int = 0, quadrature_order: int = 6, depth: int | None = None) -> HolderCertificate:
    """Compare sampled Hoelder ratios of ``L_A^n(phi)`` against both propagation bounds.

    Iterates use a low-order quadrature of ``m`` shared by ``x`` and ``y``.  The
    bounds hold for every probability measure in place of ``m``, so they must
    hold exactly (up to rounding) for the discretized operator as well.
    """
    if phi.lip == math.inf or not phi.bounded or not A.bounded:
        raise ValueError("certificates need declared finite constants")
    space = space or SpaceKind(2.0)
    alpha = A.holder_alpha
    bg, bl, D_n, d_n = holder_bounds(A, phi, w, n, delta)
    depth = depth or max(A.rank or 1, phi.rank or 1) + 2
    rng = np.random.default_rng([seed, n])
    X = rng.standard_normal((pairs, depth)) * 1.5
    scale = 10.0 ** rng.uniform(-3, 1, size=(pairs, 1))
    Y = X + rng.standard_normal((pairs, depth)) * scale
    q = AprioriMeasure(m.kind, m.mean, m.variance, m.df, m.scale, m.values, m.probs,
                       quadrature_order=quadrature_order if m.kind != "atoms" else m.quadrature_order)
    rule = q.quadrature()
    fx = nested_iterate_rows(A, w, phi, X, n, rule)
    fy = nested_iterate_rows(A, w, phi, Y, n, rule)
    one = nested_iterate_rows(A, w, None, X, n, rule)
    dist = space.norm_rows(X - Y)
    ratio = np.abs(fx - fy) / (dist ** alpha * one)
    local = dist < delta
    slack = 1e-9 * max(bg, 1.0)
    return HolderCertificate(
        n=n, delta=delta, D_n=D_n, d_n=d_n, bound_global=bg, bound_local=bl,
        empirical_ratio=float(ratio.max()),
        empirical_ratio_local=float(ratio[local].max()) if local.any() else 0.0,
        pairs=pairs, local_pairs=int(local.sum()),
        violations_global=int((ratio > bg + slack).sum()),
        violations_local=int((ratio[local] > bl + slack).sum()),
    )
