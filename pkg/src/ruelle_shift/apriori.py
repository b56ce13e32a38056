"""The a-priori probability ``m`` on the kernel of the shift (identified with R).

Three families are supported: Gaussian, Student-t (polynomial tails) and finite
atoms.  Sampling goes through :meth:`AprioriMeasure.ppf` so that any uniform
stream (in particular the counter-based one used by the Gibbs sampler) can
drive it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss
from scipy import stats
from scipy.optimize import brentq
from scipy.special import ndtr, ndtri, ndtri_exp

from .errors import MissingTailClass, UnsupportedKind
from .space import SpaceKind
from .weights import Verdict, WeightSequence, log_d_values, series_verdict, tail_model

_AUTO = "auto"


@dataclass(frozen=True)
class TailClass:
    """Declared tail behaviour: ``polynomial`` with order ``gamma > 1`` or ``exponential``."""

    kind: str
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in ("polynomial", "exponential"):
            raise ValueError(f"unknown tail class {self.kind!r}")
        if self.kind == "polynomial" and not (self.gamma and self.gamma > 1):
            raise ValueError("polynomial tails need an order gamma > 1")


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    degree: float  # polynomial degree integrated exactly; inf for atoms

    def __post_init__(self):
        if self.nodes.shape != self.weights.shape:
            raise ValueError("nodes and weights differ in length")
        if np.any(self.weights < 0):
            raise ValueError("quadrature weights must be nonnegative")

    def __len__(self) -> int:
        return len(self.nodes)

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


@dataclass(frozen=True, eq=False)
class AprioriMeasure:
    kind: str
    mean: float = 0.0
    variance: float = 1.0
    df: float | None = None
    scale: float = 1.0
    values: tuple[float, ...] = ()
    probs: tuple[float, ...] = ()
    quadrature_order: int = 40
    tail_class: TailClass | str | None = _AUTO

    def __post_init__(self):
        if self.kind == "gaussian":
            if not self.variance > 0:
                raise ValueError("gaussian variance must be positive")
        elif self.kind == "student_t":
            if not (self.df and self.df > 0):
                raise ValueError("student_t needs df > 0")
            if not self.scale > 0:
                raise ValueError("student_t scale must be positive")
        elif self.kind == "atoms":
            if len(self.values) != len(self.probs) or not self.values:
                raise ValueError("atoms need matching non-empty values and probs")
            p = np.asarray(self.probs, dtype=float)
            if np.any(p <= 0):
                raise ValueError("atom probabilities must be positive")
            if abs(p.sum() - 1.0) > 1e-12:
                raise ValueError(f"atom probabilities sum to {p.sum()!r}, not 1")
            if len(set(self.values)) != len(self.values):
                raise ValueError("atom values must be distinct")
        else:
            raise ValueError(f"unknown a-priori kind {self.kind!r}")
        if self.quadrature_order < 1:
            raise ValueError("quadrature_order must be positive")

    # -- constructors -------------------------------------------------------

    @classmethod
    def gaussian(cls, mean: float = 0.0, variance: float = 1.0, quadrature_order: int = 40, **kw):
        return cls("gaussian", mean=float(mean), variance=float(variance),
                   quadrature_order=quadrature_order, **kw)

    @classmethod
    def student_t(cls, df: float, scale: float = 1.0, quadrature_order: int = 64, **kw):
        return cls("student_t", df=float(df), scale=float(scale), quadrature_order=quadrature_order, **kw)

    @classmethod
    def atoms(cls, values: Sequence[float], probs: Sequence[float], **kw):
        order = np.argsort(values)
        v = tuple(float(values[i]) for i in order)
        p = tuple(float(probs[i]) for i in order)
        return cls("atoms", values=v, probs=p, quadrature_order=len(v), **kw)

    # -- basic properties ---------------------------------------------------

    @property
    def full_support(self) -> bool:
        return self.kind != "atoms"

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)

    @property
    def declared_tail(self) -> TailClass:
        tc = self.tail_class
        if tc is None:
            raise MissingTailClass(f"no tail class declared for the {self.kind} a-priori measure")
        if isinstance(tc, TailClass):
            return tc
        if tc != _AUTO:
            raise ValueError(f"bad tail class {tc!r}")
        if self.kind == "student_t":
            if self.df <= 1:
                raise MissingTailClass("student_t with df <= 1 has no polynomial tail order > 1")
            return TailClass("polynomial", self.df)
        # gaussian tails and bounded support are both exponential
        return TailClass("exponential")

    # -- distribution functions ---------------------------------------------

    def cdf(self, z):
        z = np.asarray(z, dtype=float)
        if self.kind == "gaussian":
            return ndtr((z - self.mean) / self.sd)
        if self.kind == "student_t":
            return stats.t.cdf(z / self.scale, self.df)
        v, p = np.asarray(self.values), np.asarray(self.probs)
        return np.sum(p[None, :] * (v[None, :] <= np.atleast_1d(z)[:, None]), axis=1).reshape(z.shape)

    def mass(self, lo: float, hi: float) -> float:
        """``m([lo, hi])``."""
        if hi < lo:
            return 0.0
        if self.kind == "atoms":
            v, p = np.asarray(self.values), np.asarray(self.probs)
            return float(p[(v >= lo) & (v <= hi)].sum())
        return float(self.cdf(hi) - self.cdf(lo))

    def tail(self, z: float) -> float:
        """``m(|x| > z)``."""
        if z < 0:
            raise ValueError("tail needs z >= 0")
        if math.isinf(z):
            return 0.0
        if self.kind == "gaussian":
            s = self.sd
            return float(ndtr((-z - self.mean) / s) + ndtr((self.mean - z) / s))
        if self.kind == "student_t":
            return float(2.0 * stats.t.sf(z / self.scale, self.df))
        v, p = np.abs(np.asarray(self.values)), np.asarray(self.probs)
        return float(p[v > z].sum())

    def log_tail(self, z: float) -> float:
        if self.kind == "gaussian" and self.mean == 0.0:
            return math.log(2.0) + float(stats.norm.logsf(z / self.sd))
        if self.kind == "student_t":
            return math.log(2.0) + float(stats.t.logsf(z / self.scale, self.df))
        t = self.tail(z)
        return math.log(t) if t > 0 else -math.inf

    def tail_quantile(self, log_t: float) -> float:
        """Smallest ``z >= 0`` with ``m(|x| > z) <= exp(log_t)``; log input avoids underflow."""
        if log_t >= 0:
            return 0.0
        if self.kind == "atoms":
            v, p = np.abs(np.asarray(self.values)), np.asarray(self.probs)
            t = math.exp(log_t)
            for z in np.unique(np.concatenate([[0.0], v])):
                if p[v > z].sum() <= t * (1 + 1e-12):
                    return float(z)
            return float(v.max())
        if self.kind == "gaussian" and self.mean == 0.0:
            return float(-self.sd * ndtri_exp(log_t - math.log(2.0)))
        if self.kind == "student_t":
            return float(self.scale * stats.t.isf(math.exp(log_t) / 2.0, self.df)) if log_t > -700 \
                else self._bracket_quantile(log_t)
        return self._bracket_quantile(log_t)

    def _bracket_quantile(self, log_t: float) -> float:
        hi = 1.0
        while self.log_tail(hi) > log_t:
            hi *= 2.0
            if hi > 1e300:
                raise ValueError("tail quantile out of range")
        return brentq(lambda z: self.log_tail(z) - log_t, 0.0, hi, xtol=1e-14, rtol=1e-14)

    def ppf(self, u):
        """Inverse CDF applied to uniforms in (0, 1)."""
        u = np.asarray(u, dtype=float)
        if self.kind == "gaussian":
            return self.mean + self.sd * ndtri(u)
        if self.kind == "student_t":
            return self.scale * stats.t.ppf(u, self.df)
        v = np.asarray(self.values)
        cum = np.cumsum(self.probs)
        cum[-1] = 1.0
        return v[np.minimum(np.searchsorted(cum, u, side="right"), len(v) - 1)]

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return self.ppf(rng.random(size))

    # -- quadrature ---------------------------------------------------------

    def quadrature(self, degree: int | None = None) -> QuadratureRule:
        """Probability-weighted rule for ``int f dm``.

        Gaussian: probabilists' Gauss-Hermite, exact to degree ``2*order - 1``.
        Student-t: Gauss-Legendre in probability space (nodes at quantiles); it
        converges for bounded integrands but only constants are integrated
        exactly.  ``degree`` is checked against moment existence.
        Atoms: the atoms themselves.
        """
        n = self.quadrature_order
        if self.kind == "gaussian":
            x, wts = hermegauss(n)
            wts = wts / wts.sum()
            return QuadratureRule(self.mean + self.sd * x, wts, 2 * n - 1)
        if self.kind == "student_t":
            if degree is not None and degree >= self.df:
                max_deg = math.ceil(self.df) - 1
                raise UnsupportedKind(
                    f"moments of order {degree} do not exist for student_t(df={self.df}); "
                    f"max usable degree is {max_deg}", max_deg)
            x, wts = leggauss(n)
            return QuadratureRule(self.ppf((x + 1.0) / 2.0), wts / wts.sum(), 0)
        return QuadratureRule(np.asarray(self.values, float), np.asarray(self.probs, float), math.inf)

    def to_dict(self) -> dict:
        if self.kind == "gaussian":
            d = {"kind": "gaussian", "mean": self.mean, "variance": self.variance}
        elif self.kind == "student_t":
            d = {"kind": "student_t", "df": self.df, "scale": self.scale}
        else:
            d = {"kind": "atoms", "values": list(self.values), "probs": list(self.probs)}
        d["quadrature_order"] = self.quadrature_order
        d["full_support"] = self.full_support
        return d


def apriori_from_dict(spec: dict) -> AprioriMeasure:
    spec = dict(spec)
    kind = spec.pop("kind")
    spec.pop("full_support", None)
    tc = spec.pop("tail_class", _AUTO)
    if isinstance(tc, dict):
        tc = TailClass(tc["kind"], tc.get("gamma"))
    if kind == "gaussian":
        return AprioriMeasure.gaussian(spec.get("mean", 0.0), spec.get("variance", 1.0),
                                       spec.get("quadrature_order", 40), tail_class=tc)
    if kind == "student_t":
        return AprioriMeasure.student_t(spec["df"], spec.get("scale", 1.0),
                                        spec.get("quadrature_order", 64), tail_class=tc)
    if kind == "atoms":
        return AprioriMeasure.atoms(spec["values"], spec["probs"], tail_class=tc)
    raise ValueError(f"unknown a-priori kind {kind!r}")


# -- adapted tails -------------------------------------------------------------


@dataclass(frozen=True)
class TailReport:
    epsilon: float
    kappa: list[float]
    tail_sum: float
    kappa_in_X: Verdict
    tail_condition: bool
    verdict: Verdict
    horizon: int

    def as_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "kappa_head": self.kappa[:10],
            "kappa_last": self.kappa[-1],
            "tail_sum": self.tail_sum,
            "kappa_in_X": self.kappa_in_X.value,
            "tail_condition": self.tail_condition,
            "verdict": self.verdict.value,
            "horizon": self.horizon,
        }


def sequence_in_space(log_seq: np.ndarray, space: SpaceKind) -> Verdict:
    """Decide at horizon whether a positive sequence lies in ``c0`` or ``l^p``.

    Geometric tails are settled by their rate; power tails by the decay exponent
    against ``0`` (``c0``) or ``-1/p`` (``l^p``) with a margin of 0.05.
    """
    thresh = 0.0 if space.is_c0 else -1.0 / space.p
    return series_verdict(np.asarray(log_seq, dtype=float), thresh)


def adapted_tails_check(m: AprioriMeasure, w: WeightSequence, space: SpaceKind, epsilon: float,
                        N: int = 100) -> TailReport:
    """Explicit construction for adapted tails with the split ``epsilon * 2^{-(n+1)}``.

    ``kappa_n`` is the smallest value with ``m(|x| > beta_1^n kappa_n) <= epsilon 2^{-(n+1)}``,
    so the full series is at most ``epsilon / 2`` (the terms beyond the horizon add
    at most ``epsilon 2^{-(N+1)}``, which is included in the check).
    The verdict holds when the resulting tail sum is below ``epsilon`` and
    ``(kappa_n)`` is judged to lie in ``X``; any failure leaves the question open
    because other constructions could still succeed.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if N < 4:
        raise ValueError("horizon must be at least 4")
    logb = np.cumsum(w.log_values(1, N))
    log_eps = math.log(epsilon)
    log_kappa = np.empty(N)
    tails = np.empty(N)
    for n in range(1, N + 1):
        z = m.tail_quantile(log_eps - (n + 1) * math.log(2.0))
        if z <= 0:
            # a point mass at zero only; any positive kappa works, take a geometric one
            log_kappa[n - 1] = -n * math.log(2.0)
            tails[n - 1] = m.tail(0.0)
        else:
            log_kappa[n - 1] = math.log(z) - logb[n - 1]
            tails[n - 1] = m.tail(z)
    tail_sum = math.fsum(tails)
    tail_ok = tail_sum + epsilon * 2.0 ** -(N + 1) < epsilon
    in_X = sequence_in_space(log_kappa, space)
    verdict = Verdict.HOLDS if (tail_ok and in_X is Verdict.HOLDS) else Verdict.INCONCLUSIVE
    return TailReport(epsilon, [float(v) for v in np.exp(log_kappa)], tail_sum, in_X, tail_ok, verdict, N)


@dataclass(frozen=True)
class GrowthLaw:
    """Asymptotic growth of ``d_n``: ``power`` (``d_n ~ n^rate``), ``exponential`` or ``bounded``."""

    kind: str
    rate: float = 0.0

    def __post_init__(self):
        if self.kind not in ("power", "exponential", "bounded"):
            raise ValueError(f"unknown growth kind {self.kind!r}")

    @classmethod
    def power(cls, ell: float) -> "GrowthLaw":
        return cls("power", float(ell))

    @classmethod
    def exponential(cls, rate: float) -> "GrowthLaw":
        if not rate > 0:
            raise ValueError("exponential growth needs a positive rate")
        return cls("exponential", float(rate))

    @classmethod
    def from_weights(cls, w: WeightSequence, N: int = 200) -> "GrowthLaw":
        """Read the growth of ``d_n`` off a weight sequence (exact for periodic tails)."""
        if w.closed_form:
            lg = math.log(w.geometric_mean)
            return cls.exponential(lg) if lg > 1e-12 else cls("bounded")
        n = min(N, w.length // 2)
        log_d, _ = log_d_values(w, n)
        kind, v = tail_model(log_d)
        if kind == "geometric" and v > 0:
            return cls.exponential(v)
        ell = v if kind == "power" else 0.0
        return cls.power(ell) if ell > 0 else cls("bounded")


def fast_tail_criteria(m: AprioriMeasure, growth: WeightSequence | GrowthLaw, space: SpaceKind) -> Verdict:
    """Sufficient conditions for adapted tails from the tail class and the growth of ``d_n``.

    Polynomial order ``gamma``: ``d_n`` must beat ``n^ell`` with ``ell > 1/gamma`` on
    ``c0`` and ``ell > 1/gamma + 1/p`` on ``l^p``.  Exponential tails: ``(log n / d_n)``
    must lie in ``X``.  A failed condition is reported as inconclusive, never as
    a proof that the tails are not adapted.
    """
    tc = m.declared_tail
    g = growth if isinstance(growth, GrowthLaw) else GrowthLaw.from_weights(growth)
    if g.kind == "exponential":
        return Verdict.HOLDS
    if g.kind == "bounded":
        return Verdict.INCONCLUSIVE
    ell = g.rate
    if tc.kind == "polynomial":
        need = 1.0 / tc.gamma + (0.0 if space.is_c0 else 1.0 / space.p)
    else:
        # log n / n^ell is in c0 for ell > 0 and in l^p for ell > 1/p
        need = 0.0 if space.is_c0 else 1.0 / space.p
    return Verdict.HOLDS if ell > need else Verdict.INCONCLUSIVE
