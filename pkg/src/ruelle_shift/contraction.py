"""Contraction of the dual operator in the bounded metric ``min{1, a ||x-y||^alpha}``.

Constants:

* ``sum_d = sum_i d_i^{-alpha}`` (tail-bounded via :func:`weights.summability`);
* ``c_contr = sup_{0<t<=1} (e^{lip_A sum_d t} - 1)/t``, found numerically;
* the metric scale ``a = max{8 c_contr / 3, 1}``.

Experiments push Dirac clouds through the dual operator and compare exact
W1 distances with the local (factor 3/4) and global bounds, using an
empirically calibrated noise floor as statistical tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .apriori import AprioriMeasure
from .errors import PremiseViolated
from .gibbs import DEFAULT_DEPTH, iterate
from .potential import Potential
from .space import MetricSpec, SpaceKind
from .wasserstein import EmpiricalMeasure, w1
from .weights import Verdict, WeightSequence, d_n, summability

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_max(f, lo: float, hi: float, tol: float = 1e-10) -> tuple[float, float]:
    """Maximize a unimodal ``f`` on ``[lo, hi]``; endpoints are compared as well."""
    a, b = lo, hi
    c, d = b - _INVPHI * (b - a), a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    cands = [(fc, c), (fd, d), (f(lo), lo), (f(hi), hi)]
    val, t = max(cands)
    return t, val


def sum_d(w: WeightSequence, alpha: float, N: int = 200) -> float:
    """``sum_i d_i^{-alpha}`` as partial sum plus rigorous tail bound."""
    rep = summability(w, alpha, N)
    if rep.verdict is not Verdict.HOLDS:
        raise PremiseViolated("summable_d", f"sum of d_n^-{alpha} is {rep.verdict.value}")
    return rep.total


def c_contr(lip: float, total: float, tol: float = 1e-10) -> float:
    """``sup_{0<t<=1} (e^{lip * total * t} - 1)/t``."""
    L = lip * total
    if L == 0.0:
        return 0.0
    if not math.isfinite(L):
        return math.inf
    f = lambda t: math.expm1(L * t) / t
    _, val = golden_max(f, 1e-12, 1.0, tol)
    return val


def metric_scale(lip: float, w: WeightSequence, alpha: float = 1.0) -> dict:
    """The metric scale ``a = max{8 c_contr/3, 1}`` with its ingredients."""
    total = sum_d(w, alpha)
    cc = c_contr(lip, total)
    return {"a": max(8.0 * cc / 3.0, 1.0), "c_contr": cc, "sum_d": total, "lip": lip, "alpha": alpha}


def bounded_dist(x, y, a: float, alpha: float, space: SpaceKind) -> tuple[float, float]:
    """``(||x-y||^alpha, min{1, a ||x-y||^alpha})`` for coordinate arrays."""
    x, y = np.asarray(x, float).ravel(), np.asarray(y, float).ravel()
    k = max(len(x), len(y), 1)
    diff = np.zeros(k)
    diff[: len(x)] += x
    diff[: len(y)] -= y
    D = float(space.norm_rows(diff[None, :])[0]) ** alpha
    return D, min(1.0, a * D)


@dataclass
class ContractionReport:
    kind: str
    a: float
    n: int
    premise_flags: dict
    d_tilde_xy: float
    measured: float
    measured_ratio: float
    bound: float
    noise_floor: float
    stat_tol: float
    passes: bool
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {k: getattr(self, k) for k in ("kind", "a", "n", "premise_flags", "d_tilde_xy", "measured",
                                             "measured_ratio", "bound", "noise_floor", "stat_tol",
                                             "passes")}
        out.update(self.extra)
        return out


def _clouds(A, m, w, x, n, particles, seed, stream, K, space, threads, max_depth):
    mu = EmpiricalMeasure.dirac(x, particles, space, seed=seed, stream=stream)
    return iterate(A, m, w, mu, n, K, seed, threads, max_depth)


def _coupled_channel(A, m, w, x, y, n, particles, seed, K, space, a, alpha, threads, max_depth, dt_xy):
    """Common random numbers for both starts; exact for potentials that ignore the state."""
    cx = _clouds(A, m, w, x, n, particles, seed, 0, K, space, threads, max_depth)
    cy = _clouds(A, m, w, y, n, particles, seed, 0, K, space, threads, max_depth)
    depth = max(cx.depth, cy.depth)
    X = np.pad(cx.particles, ((0, 0), (0, depth - cx.depth)))
    Y = np.pad(cy.particles, ((0, 0), (0, depth - cy.depth)))
    per = np.minimum(1.0, a * space.norm_rows(X - Y) ** alpha)
    coupled = float(per.mean())
    xs, ys = np.asarray(x, float).ravel(), np.asarray(y, float).ravel()
    k = max(len(xs), len(ys))
    diff = np.zeros(k)
    diff[: len(xs)] += xs
    diff[: len(ys)] -= ys
    # after n steps coordinate j moves to j+n and is divided by beta_j^n
    logb = np.array([np.sum(w.log_values(j, j + n - 1)) for j in range(1, k + 1)])
    moved = diff / np.exp(logb)
    analytic = min(1.0, a * float(space.norm_rows(moved[None, :])[0]) ** alpha)
    return {
        "coupled_ratio": coupled / dt_xy,
        "analytic_ratio": analytic / dt_xy,
        "coupled_gap": abs(coupled - analytic) / dt_xy,
        "assignment_ratio": w1(cx, cy, MetricSpec.bounded(a, alpha), space, method="exact").value / dt_xy
        if particles <= 2048 else None,
    }


def local_contraction_experiment(A: Potential, m: AprioriMeasure, w: WeightSequence, x, y, n_grid,
                                 particles: int = 2048, seed: int = 0, alpha: float = 1.0,
                                 space: SpaceKind | None = None, K: int = 32, a: float | None = None,
                                 threads: int = 1, max_depth: int = DEFAULT_DEPTH,
                                 coupled: bool | None = None) -> list[ContractionReport]:
    """Measured W between ``n``-fold dual pushes of ``delta_x`` and ``delta_y`` against factor 3/4.

    Premises: ``D~(x, y) < 1`` and ``d_n^{-alpha} <= 3/8``; each ``n`` in ``n_grid``
    that meets the second is run.  Pass rule: ``W <= 0.75 D~(x,y) + 3 floor`` where
    ``floor`` is W between two independent clouds of the same law.
    """
    space = space or SpaceKind(2.0)
    scale = metric_scale(A.lip, w, alpha)
    a = scale["a"] if a is None else a
    if a < scale["a"]:
        raise PremiseViolated("metric_scale", f"a={a} is below max(8 c_contr/3, 1)={scale['a']}")
    D, dt = bounded_dist(x, y, a, alpha, space)
    if dt >= 1.0:
        raise PremiseViolated("local", f"D~(x,y) = {dt} is not below 1")
    ns = [n for n in n_grid if d_n(w, n) ** (-alpha) <= 3.0 / 8.0]
    if not ns:
        raise PremiseViolated("d_n_small", f"no n in {list(n_grid)} has d_n^-alpha <= 3/8")
    metric = MetricSpec.bounded(a, alpha)
    if coupled is None:
        coupled = A.lip == 0.0 and A.sup_bound == 0.0
    out = []
    for n in ns:
        flags = {"d_n_small": True, "local": True, "d_n_pow": d_n(w, n) ** (-alpha)}
        if D == 0.0:
            out.append(ContractionReport("local", a, n, flags, 0.0, 0.0, 0.0, 0.75, 0.0, 0.0, True, dict(scale)))
            continue
        cx = _clouds(A, m, w, x, n, particles, seed, 0, K, space, threads, max_depth)
        cy = _clouds(A, m, w, y, n, particles, seed, 1, K, space, threads, max_depth)
        cx2 = _clouds(A, m, w, x, n, particles, seed, 2, K, space, threads, max_depth)
        measured = w1(cx, cy, metric, space, method="exact").value
        floor = w1(cx, cx2, metric, space, method="exact").value
        tol = 3.0 * floor
        extra = dict(scale)
        if coupled:
            extra.update(_coupled_channel(A, m, w, x, y, n, particles, seed, K, space, a, alpha, threads,
                                          max_depth, dt))
        out.append(ContractionReport("local", a, n, flags, dt, measured, measured / dt, 0.75, floor, tol,
                                     measured <= 0.75 * dt + tol, extra))
    return out


def global_bound(total: float, a: float, dn_pow: float, D: float, lip: float = 1.0) -> float:
    """``1 - e^{-lip * total * D} (1 - a d_n^{-alpha} D)``; ``lip = 1`` is the displayed form."""
    return 1.0 - math.exp(-lip * total * D) * (1.0 - min(1.0, a * dn_pow * D))


def global_contraction_experiment(A: Potential, m: AprioriMeasure, w: WeightSequence, x, y, n: int,
                                  particles: int = 2048, seed: int = 0, alpha: float = 1.0,
                                  space: SpaceKind | None = None, K: int = 32, a: float | None = None,
                                  threads: int = 1, max_depth: int = DEFAULT_DEPTH) -> ContractionReport:
    """Measured W for a pair at bounded distance 1 against the global bound.

    Premises: ``D~(x,y) = 1`` and ``a D(x,y) < d_n^alpha``.  ``passes`` compares with
    the displayed bound, whose exponent carries no Lipschitz factor; ``bound_lip``
    restores ``lip_A`` in the exponent and ``passes_lip`` compares with it.
    """
    space = space or SpaceKind(2.0)
    scale = metric_scale(A.lip, w, alpha)
    a = scale["a"] if a is None else a
    D, dt = bounded_dist(x, y, a, alpha, space)
    if dt < 1.0:
        raise PremiseViolated("global", f"D~(x,y) = {dt} is below 1")
    dn_alpha = d_n(w, n) ** alpha
    if not a * D < dn_alpha:
        raise PremiseViolated("a_D_below_d_n", f"a D(x,y) = {a * D} is not below d_n^alpha = {dn_alpha}")
    total = scale["sum_d"]
    displayed = global_bound(total, a, 1.0 / dn_alpha, D)
    with_lip = global_bound(total, a, 1.0 / dn_alpha, D, A.lip)
    metric = MetricSpec.bounded(a, alpha)
    cx = _clouds(A, m, w, x, n, particles, seed, 0, K, space, threads, max_depth)
    cy = _clouds(A, m, w, y, n, particles, seed, 1, K, space, threads, max_depth)
    cx2 = _clouds(A, m, w, x, n, particles, seed, 2, K, space, threads, max_depth)
    measured = w1(cx, cy, metric, space, method="exact").value
    floor = w1(cx, cx2, metric, space, method="exact").value
    tol = 3.0 * floor
    extra = dict(scale, bound_displayed=displayed, bound_lip=with_lip,
                 passes_lip=measured <= with_lip + tol)
    flags = {"global": True, "a_D_below_d_n": True, "D": D}
    return ContractionReport("global", a, n, flags, dt, measured, measured, displayed, floor, tol,
                             measured <= displayed + tol, extra)


@dataclass(frozen=True)
class RnProfile:
    t: list[float]
    values: list[float]
    left_at_threshold: float
    right_at_threshold: float


def rn_profile(w: WeightSequence, alpha: float, a: float, n: int, t_grid, lip: float = 1.0) -> RnProfile:
    """Piecewise contraction profile: 3/4 below ``1/a``, the global bound from ``1/a`` on."""
    dn_alpha = d_n(w, n) ** alpha
    if dn_alpha < 8.0 / 3.0:
        raise PremiseViolated("d_n_large", f"d_n^alpha = {dn_alpha} is below 8/3")
    total = sum_d(w, alpha)

    def r(t):
        if t < 1.0 / a:
            return 0.75
        return global_bound(total, a, 1.0 / dn_alpha, t, lip)

    ts = [float(t) for t in t_grid]
    return RnProfile(ts, [r(t) for t in ts], 0.75, r(1.0 / a))


@dataclass(frozen=True)
class TailsFactor:
    factor: float
    epsilon: float | None = None
    in_class: bool | None = None


def tails_contraction_factor(gamma: float, w: WeightSequence, alpha: float, a: float, n: int, lip: float = 1.0,
                             mu: EmpiricalMeasure | None = None, nu: EmpiricalMeasure | None = None) -> TailsFactor:
    """Uniform contraction factor for clouds whose mass beyond ``D(x, 0) > gamma`` is small.

    With ``mu`` and ``nu`` the context ``epsilon = W(mu, nu)/4`` is computed and the
    membership of both clouds in the tail class is checked empirically.
    """
    if gamma < 1.0 / a:
        raise PremiseViolated("gamma", f"gamma = {gamma} is below 1/a = {1.0 / a}")
    dn_alpha = d_n(w, n) ** alpha
    if dn_alpha < 8.0 / 3.0:
        raise PremiseViolated("d_n_large", f"d_n^alpha = {dn_alpha} is below 8/3")
    total = sum_d(w, alpha)
    factor = 1.0 - (1.0 - min(1.0, 2.0 * a * gamma / dn_alpha)) / (2.0 * math.exp(2.0 * gamma * lip * total))
    if mu is None or nu is None:
        return TailsFactor(factor)
    metric = MetricSpec.bounded(a, alpha)
    eps = w1(mu, nu, metric).value / 4.0

    def mass_out(c):
        return float(np.mean(c.space.norm_rows(c.particles) ** alpha > gamma))

    return TailsFactor(factor, eps, mass_out(mu) < eps and mass_out(nu) < eps)
