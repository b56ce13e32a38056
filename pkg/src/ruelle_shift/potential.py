"""Potentials ``A: X -> R``, their regularity data, variations and normalization.

A potential evaluates on 2-D row arrays (one point per row).  ``rank`` is the
number of leading coordinates it depends on, or ``None`` when it depends on
the whole sequence.  Regularity constants refer to the metric ``D_X^alpha``;
they are either declared (a proven bound) or estimated (a sampled lower bound),
as recorded in ``provenance``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .apriori import AprioriMeasure
from .errors import NonpositiveEigenfunction
from .grid import GridFunction
from .space import Point, SpaceKind, shift_rows
from .weights import Verdict, WeightSequence

RowFunc = Callable[[np.ndarray], np.ndarray]


def as_rows(x, width: int | None = None) -> np.ndarray:
    """Coerce a Point, a coordinate list or a row array to a 2-D float array."""
    if isinstance(x, Point):
        X = np.asarray(x.coords, dtype=float)[None, :]
    else:
        X = np.atleast_2d(np.asarray(x, dtype=float))
    if width is not None and X.shape[1] < width:
        X = np.pad(X, ((0, 0), (0, width - X.shape[1])))
    return X


@dataclass(frozen=True, eq=False)
class Potential:
    func: RowFunc
    rank: int | None
    sup_bound: float
    holder_alpha: float = 1.0
    lip: float = math.inf
    provenance: str = "declared"
    inf_bound: float | None = None
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.rank is not None and self.rank < 1:
            raise ValueError("rank must be a positive integer or None")
        if not (0 < self.holder_alpha <= 1):
            raise ValueError("holder_alpha must lie in (0, 1]")
        if self.provenance not in ("declared", "estimated"):
            raise ValueError("provenance must be 'declared' or 'estimated'")
        if self.inf_bound is None:
            object.__setattr__(self, "inf_bound", -self.sup_bound)

    def __call__(self, x) -> np.ndarray:
        X = as_rows(x, self.rank)
        if self.rank is not None:
            X = X[:, : self.rank]
        return np.asarray(self.func(X), dtype=float).reshape(len(X))

    def value(self, x) -> float:
        return float(self(x)[0])

    @property
    def bounded(self) -> bool:
        return math.isfinite(self.sup_bound)

    def describe(self) -> dict:
        return {
            "name": self.name,
            "rank": self.rank,
            "sup_bound": self.sup_bound,
            "inf_bound": self.inf_bound,
            "holder_alpha": self.holder_alpha,
            "lip": self.lip,
            "provenance": self.provenance,
            "params": self.params,
        }


# -- builtins ------------------------------------------------------------------


def zero() -> Potential:
    return Potential(lambda X: np.zeros(len(X)), 1, 0.0, 1.0, 0.0, name="zero")


def constant(c: float) -> Potential:
    c = float(c)
    return Potential(lambda X: np.full(len(X), c), 1, abs(c), 1.0, 0.0, inf_bound=c,
                     name="constant", params={"c": c})


def quadratic_first_coord(coef: float = -0.25) -> Potential:
    """``coef * x_1^2``; unbounded on one side, so ``sup_bound`` is infinite."""
    coef = float(coef)
    inf_b = 0.0 if coef >= 0 else -math.inf
    return Potential(lambda X: coef * X[:, 0] ** 2, 1, math.inf, 1.0, math.inf, inf_bound=inf_b,
                     name="quadratic_first_coord", params={"coef": coef})


def tanh_first_coord(scale: float = 1.0, m: AprioriMeasure | None = None) -> Potential:
    """``scale * tanh(x_1)``, shifted by ``-log int e^{scale tanh} dm`` when ``m`` is given.

    With the shift the potential is normalized for any weights.
    """
    scale = float(scale)
    shift = 0.0
    if m is not None:
        rule = m.quadrature()
        shift = -math.log(rule.integrate(lambda r: np.exp(scale * np.tanh(r))))
    sup = abs(scale) + abs(shift)
    return Potential(lambda X: scale * np.tanh(X[:, 0]) + shift, 1, sup, 1.0, abs(scale),
                     inf_bound=-abs(scale) + shift, name="tanh_first_coord",
                     params={"scale": scale, "normalized": m is not None, "shift": shift})


def tanh_sum(coeffs, alpha: float = 1.0, space: SpaceKind | None = None) -> Potential:
    """``sum_i c_i tanh(x_i)``, rank ``len(coeffs)``.

    For ``alpha = 1`` the Lipschitz constant is the dual norm of ``c`` (``l^q`` with
    ``1/p + 1/q = 1``, ``l^1`` on ``c0``); for ``alpha < 1`` the bound
    ``|tanh a - tanh b| <= 2^{1-alpha} |a-b|^alpha`` gives ``2^{1-alpha} ||c||_1``.
    """
    c = np.asarray(coeffs, dtype=float)
    space = space or SpaceKind(2.0)
    if alpha == 1.0:
        if space.is_c0 or space.p == 1.0:
            lip = float(np.abs(c).sum()) if space.is_c0 else float(np.abs(c).max())
        else:
            q = space.p / (space.p - 1.0)
            lip = float(np.linalg.norm(c, ord=q))
    else:
        lip = 2.0 ** (1.0 - alpha) * float(np.abs(c).sum())
    return Potential(lambda X: np.tanh(X) @ c, len(c), float(np.abs(c).sum()), alpha, lip,
                     name="tanh_sum", params={"coeffs": c.tolist()})


def arctan_norm(space: SpaceKind | None = None) -> Potential:
    """``arctan ||x||``: bounded and Lipschitz but without summable variation."""
    space = space or SpaceKind(2.0)
    return Potential(lambda X: np.arctan(space.norm_rows(X)), None, math.pi / 2, 1.0, 1.0,
                     inf_bound=0.0, name="arctan_norm", params={"space": space.label})


_EXPR_NAMES = {
    name: getattr(np, name)
    for name in ("sin", "cos", "tan", "tanh", "sinh", "cosh", "exp", "log", "sqrt", "abs",
                 "arctan", "minimum", "maximum", "clip", "where", "pi", "e")
}


def cylinder_expression(expr: str, rank: int, sup_bound: float | None = None, lip: float | None = None,
                        alpha: float = 1.0, sampler=None) -> Potential:
    """Rank-``rank`` potential from a numpy expression in ``x1..xN``.

    Undeclared ``sup_bound`` / ``lip`` are estimated by sampling and the result is
    tagged ``estimated``.
    """
    code = compile(expr, "<potential>", "eval")
    for n in code.co_names:
        if n not in _EXPR_NAMES and not (n.startswith("x") and n[1:].isdigit() and 1 <= int(n[1:]) <= rank):
            raise ValueError(f"name {n!r} not allowed in potential expression")

    def func(X):
        env = dict(_EXPR_NAMES)
        env.update({f"x{i + 1}": X[:, i] for i in range(rank)})
        out = eval(code, {"__builtins__": {}}, env)
        return np.broadcast_to(np.asarray(out, dtype=float), (len(X),)).copy()

    prov = "declared"
    if sup_bound is None or lip is None:
        prov = "estimated"
        rng = np.random.default_rng(0)
        X = sampler(rng, 20000, rank) if sampler else rng.standard_normal((20000, rank)) * 3.0
        vals = func(X)
        if sup_bound is None:
            sup_bound = float(np.abs(vals).max())
        if lip is None:
            Y = X + rng.standard_normal(X.shape) * 1e-3
            dx = np.abs(X - Y).max(axis=1) ** alpha
            lip = float((np.abs(vals - func(Y)) / dx).max())
    return Potential(func, rank, float(sup_bound), alpha, float(lip), prov, name="cylinder",
                     params={"expression": expr})


def cylinder_table(grid: GridFunction, lip: float | None = None) -> Potential:
    """Rank-N potential interpolated from a tabulated grid (clamped multilinear)."""
    lip = grid.lipschitz_sup() if lip is None else float(lip)
    return Potential(grid, grid.rank, float(np.abs(grid.values).max()), 1.0, lip,
                     name="cylinder_table", params={"shape": list(grid.shape)})


BUILTINS = {
    "zero": zero,
    "constant": constant,
    "quadratic_first_coord": quadratic_first_coord,
    "tanh_first_coord": tanh_first_coord,
    "tanh_sum": tanh_sum,
    "arctan_norm": arctan_norm,
}


# -- variations ---------------------------------------------------------------


def default_variation_sampler(rng: np.random.Generator, size: int, depth: int) -> np.ndarray:
    """Points whose coordinate scales are log-uniform over many decades.

    Pairs built from these reach both nearly-zero and very large tails, which
    is what sup-type oscillation estimates need.
    """
    scale = 10.0 ** rng.uniform(-6, 6, size=(size, 1))
    return rng.standard_normal((size, depth)) * scale


def variation(A: Potential, n: int, sampler=None, samples: int = 10_000, seed: int = 0,
              depth: int | None = None) -> float:
    """Monte-Carlo lower estimate of ``V_n(A)``; exactly zero once ``n >= rank``."""
    if n < 1:
        raise ValueError("n must be positive")
    if A.rank is not None and n >= A.rank:
        return 0.0
    sampler = sampler or default_variation_sampler
    depth = depth or max(n + 8, (A.rank or 0))
    rng = np.random.default_rng([seed, n])
    head = sampler(rng, samples, n)
    t1 = sampler(rng, samples, depth - n)
    t2 = sampler(rng, samples, depth - n)
    X = np.hstack([head, t1])
    Y = np.hstack([head, t2])
    return float(np.abs(A(X) - A(Y)).max())


@dataclass(frozen=True)
class VariationReport:
    terms: list[float]
    partial_V: float
    verdict: Verdict


def summable_variation_check(A: Potential, N: int = 20, sampler=None, samples: int = 10_000, seed: int = 0,
                             divergence_threshold: float = 5.0, floor: float = 1e-2) -> VariationReport:
    """Partial sum of variation estimates with a tri-state verdict.

    Finite rank settles the question.  Otherwise the verdict is ``fails`` only
    when every term in the second half stays above ``floor`` and the partial
    sum exceeds ``divergence_threshold``; geometric decay of the terms gives
    ``holds``.
    """
    if A.rank is not None:
        terms = [variation(A, n, sampler, samples, seed) for n in range(1, min(N, A.rank) + 1)]
        return VariationReport(terms, math.fsum(terms), Verdict.HOLDS)
    terms = [variation(A, n, sampler, samples, seed) for n in range(1, N + 1)]
    total = math.fsum(terms)
    second = np.asarray(terms[N // 2 :])
    if np.all(second >= floor) and total > divergence_threshold:
        return VariationReport(terms, total, Verdict.FAILS)
    pos = np.asarray(terms) > 0
    if pos.all() and N >= 4:
        h = N // 2
        root = (terms[-1] / terms[h - 1]) ** (1.0 / (N - h))
        if root < 0.999:
            return VariationReport(terms, total, Verdict.HOLDS)
    elif not pos[N // 2 :].any():
        return VariationReport(terms, total, Verdict.HOLDS)
    return VariationReport(terms, total, Verdict.INCONCLUSIVE)


# -- normalization --------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NormalizedPotential(Potential):
    """``A + log psi - log psi o L - log lambda`` with its audit residual."""

    base: Potential | None = None
    psi: GridFunction | None = None
    lam: float = 1.0
    residual: float = math.nan


def normalize(A: Potential, psi: GridFunction, lam: float, w: WeightSequence, m: AprioriMeasure,
              audit_points: np.ndarray | None = None, seed: int = 0) -> NormalizedPotential:
    """Normalize ``A`` with an eigenpair ``(lam, psi)`` and audit ``L(1) = 1``.

    ``psi`` is a grid function of ``x_1..x_{rank-1}``.  The Lipschitz constant
    of the result is bounded by ``lip_A + Lip(log psi) (1 + c')`` (sup-norm
    Lipschitz constant of the interpolant), valid for ``alpha = 1``.
    """
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if np.any(psi.values <= 0):
        raise NonpositiveEigenfunction(f"psi has minimum {psi.values.min()!r} on its grid")
    log_psi = psi.map(np.log)
    log_lam = math.log(lam)
    width = max(A.rank or 0, log_psi.rank + 1, 1)

    def func(X):
        X = as_rows(X, width)
        return A(X) + log_psi(X) - log_psi(shift_rows(w, X)) - log_lam

    rank = None if A.rank is None else max(A.rank, log_psi.rank + 1)
    osc = float(log_psi.values.max() - log_psi.values.min())
    sup = A.sup_bound + osc + abs(log_lam)
    lip_log_psi = log_psi.lipschitz_sup()
    if lip_log_psi == 0.0:
        lip, prov = A.lip, A.provenance
    else:
        lip = A.lip + lip_log_psi * (1.0 + w.c_prime)
        prov = A.provenance if A.holder_alpha == 1.0 else "estimated"
    out = NormalizedPotential(func, rank, sup, A.holder_alpha, lip, prov,
                              inf_bound=A.inf_bound - osc - log_lam, name=f"normalized({A.name})",
                              params={"lambda": lam}, base=A, psi=psi, lam=lam)
    if audit_points is None:
        if m.kind == "atoms" and log_psi.rank:
            # with atoms the eigen equation only holds on the support, i.e. the grid nodes
            audit_points = as_rows(log_psi.nodes(), width)
        else:
            rng = np.random.default_rng(seed)
            audit_points = rng.standard_normal((64, max(width, 1)))
    res = is_normalized(out, m, w, audit_points)
    object.__setattr__(out, "residual", res)
    return out


def is_normalized(A: Potential, m: AprioriMeasure, w: WeightSequence, audit_points) -> float:
    """``max |L_A(1)(x) - 1|`` over the audit points."""
    from .transfer import apply_rows

    X = as_rows(audit_points)
    vals = apply_rows(A, m, w, None, X)
    return float(np.abs(vals - 1.0).max())


def potential_from_dict(spec: dict, m: AprioriMeasure | None = None, space: SpaceKind | None = None) -> Potential:
    kind = spec.get("kind", "builtin")
    params = dict(spec.get("params") or {})
    if kind == "builtin":
        name = spec["name"]
        if name not in BUILTINS:
            raise ValueError(f"unknown builtin potential {name!r}")
        if name == "tanh_first_coord" and params.pop("normalize", False):
            params["m"] = m
        if name in ("tanh_sum", "arctan_norm") and space is not None:
            params.setdefault("space", space)
        return BUILTINS[name](**params)
    if kind == "cylinder":
        rank = int(spec["rank"])
        if spec.get("expression") is not None:
            return cylinder_expression(spec["expression"], rank, spec.get("sup_bound"), spec.get("lip"),
                                       spec.get("alpha", 1.0))
        table = spec["table"]
        grid = GridFunction(tuple(np.asarray(a, float) for a in table["axes"]), np.asarray(table["values"], float))
        if grid.rank != rank:
            raise ValueError("table rank does not match declared rank")
        return cylinder_table(grid, spec.get("lip"))
    raise ValueError(f"unknown potential kind {kind!r}")
