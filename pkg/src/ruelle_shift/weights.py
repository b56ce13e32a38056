"""Weight sequences of a weighted backward shift and their scalar analytics.

A weight sequence ``(alpha_n)`` defines ``L(x)_n = alpha_n * x_{n+1}``.  Everything
downstream is driven by the window products ``beta_k^n = alpha_k ... alpha_{k+n-1}``
and their infima ``d_n = inf_k beta_k^n``.

Sequences whose tail repeats (constant, periodic, eventually periodic and the
alternating block family) are *closed form*: infima over ``k`` reduce to one
period and asymptotic verdicts are decided exactly from the geometric mean of
the period.  Finite explicit lists are handled numerically at a horizon and the
results carry ``exact=False``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

#: Ratio/root-test threshold used before any asymptotic claim is made.
RATIO_MARGIN = 0.999

_LOG_MARGIN = -math.log(RATIO_MARGIN)
_UNIT_TOL = 1e-12


class Verdict(str, Enum):
    HOLDS = "holds"
    FAILS = "fails"
    INCONCLUSIVE = "inconclusive-at-horizon"


def ratio_verdict(rho: float) -> Verdict:
    """Verdict for a root/ratio-test estimate ``rho`` with the package margin."""
    if rho < RATIO_MARGIN:
        return Verdict.HOLDS
    if rho > 1.0 / RATIO_MARGIN:
        return Verdict.FAILS
    return Verdict.INCONCLUSIVE


@dataclass(frozen=True, eq=False)
class WeightSequence:
    """Weights ``alpha_1, alpha_2, ...`` with ``c < alpha_n < c_prime``.

    Use the constructors :meth:`constant`, :meth:`periodic`, :meth:`explicit`
    and :meth:`block_family` rather than the raw initializer.
    """

    kind: str
    prefix: tuple[float, ...]
    cycle: tuple[float, ...] | None
    c: float
    c_prime: float
    horizon_K: int = 1000
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = list(self.prefix) + list(self.cycle or ())
        if not vals:
            raise ValueError("weight sequence has no values")
        if not (0 < self.c < self.c_prime):
            raise ValueError(f"need 0 < c < c_prime, got c={self.c}, c_prime={self.c_prime}")
        for v in vals:
            if not (self.c < v < self.c_prime):
                raise ValueError(f"weight {v} outside ({self.c}, {self.c_prime})")
        if self.horizon_K < 1:
            raise ValueError("horizon_K must be positive")
        object.__setattr__(self, "_prefix", np.asarray(self.prefix, dtype=float))
        object.__setattr__(self, "_log_prefix", np.log(self._prefix))
        if self.cycle is not None:
            object.__setattr__(self, "_cycle", np.asarray(self.cycle, dtype=float))
            object.__setattr__(self, "_log_cycle", np.log(self._cycle))

    # -- constructors -------------------------------------------------------

    @staticmethod
    def _bounds(values, c, c_prime):
        lo, hi = min(values), max(values)
        return (lo / 2.0 if c is None else c), (max(2.0 * hi, 2.0) if c_prime is None else c_prime)

    @classmethod
    def constant(cls, alpha: float, c=None, c_prime=None, horizon_K: int = 1000):
        c, c_prime = cls._bounds([alpha], c, c_prime)
        return cls("constant", (), (float(alpha),), c, c_prime, horizon_K, {"alpha": float(alpha)})

    @classmethod
    def periodic(cls, values: Sequence[float], c=None, c_prime=None, horizon_K: int = 1000):
        values = tuple(float(v) for v in values)
        c, c_prime = cls._bounds(values, c, c_prime)
        return cls("periodic", (), values, c, c_prime, horizon_K, {"values": list(values)})

    @classmethod
    def explicit(cls, values: Sequence[float], period: int | None = None, c=None, c_prime=None,
                 horizon_K: int = 1000):
        """Explicit list; if ``period`` is given the last ``period`` entries repeat forever."""
        values = tuple(float(v) for v in values)
        c, c_prime = cls._bounds(values, c, c_prime)
        if period is None:
            return cls("explicit", values, None, c, c_prime, horizon_K,
                       {"values": list(values), "period": None})
        if not (1 <= period <= len(values)):
            raise ValueError("period must be between 1 and len(values)")
        return cls("explicit", values[:-period], values[-period:], c, c_prime, horizon_K,
                   {"values": list(values), "period": period})

    @classmethod
    def block_family(cls, a: float, b: float, runs: Sequence[int] = (1, 1), c=None, c_prime=None,
                     horizon_K: int = 1000):
        """Alternating low blocks (value ``a < 1``) and high blocks (value ``b > 1``).

        ``runs`` lists block lengths starting with a low block and is cycled; it
        must have even length so low and high blocks alternate.  The block-length
        bound is ``e = max(runs)``.
        """
        runs = tuple(int(r) for r in runs)
        if len(runs) % 2 or any(r < 1 for r in runs):
            raise ValueError("runs must be an even-length list of positive integers")
        if not (a < 1 < b):
            raise ValueError("block family needs a < 1 < b")
        cycle: list[float] = []
        for i, r in enumerate(runs):
            cycle += [float(a if i % 2 == 0 else b)] * r
        c, c_prime = cls._bounds(cycle, c, c_prime)
        return cls("block_family", (), tuple(cycle), c, c_prime, horizon_K,
                   {"a": float(a), "b": float(b), "runs": list(runs), "e": max(runs)})

    # -- basic access -------------------------------------------------------

    @property
    def closed_form(self) -> bool:
        return self.cycle is not None

    @property
    def length(self) -> int | None:
        """Number of available weights, ``None`` when the sequence is total."""
        return None if self.cycle is not None else len(self.prefix)

    @property
    def geometric_mean(self) -> float:
        """Geometric mean of the repeating period (closed-form kinds only)."""
        if self.cycle is None:
            raise ValueError("geometric mean is only defined for periodic tails")
        return math.exp(float(np.mean(self._log_cycle)))

    def _gather(self, start: int, stop: int, head: np.ndarray, cyc: np.ndarray | None) -> np.ndarray:
        if start < 1:
            raise ValueError("weights are indexed from 1")
        idx = np.arange(start - 1, stop)
        npre = len(head)
        if cyc is None:
            if stop > npre:
                raise IndexError(f"explicit weights only known up to n={npre}, asked for {stop}")
            return head[idx]
        out = np.empty(idx.shape, dtype=float)
        front = idx < npre
        out[front] = head[idx[front]]
        out[~front] = cyc[(idx[~front] - npre) % len(cyc)]
        return out

    def log_values(self, start: int, stop: int) -> np.ndarray:
        """``log alpha_j`` for ``start <= j <= stop`` (1-based, inclusive)."""
        return self._gather(start, stop, self._log_prefix, getattr(self, "_log_cycle", None))

    def values(self, start: int, stop: int) -> np.ndarray:
        """The weights themselves (not round-tripped through logs)."""
        return self._gather(start, stop, self._prefix, getattr(self, "_cycle", None))

    def value(self, n: int) -> float:
        return float(self.values(n, n)[0])

    def log_beta(self, k: int, n: int) -> float:
        if k < 1 or n < 1:
            raise ValueError("beta needs k >= 1 and n >= 1")
        return float(np.sum(self.log_values(k, k + n - 1)))

    def _k_range(self, n: int) -> tuple[int, bool]:
        """Largest ``k`` to scan for an infimum over windows of length ``n`` and exactness."""
        if self.cycle is not None:
            return len(self.prefix) + len(self.cycle), True
        kmax = min(self.horizon_K, len(self.prefix) - n + 1)
        if kmax < 1:
            raise IndexError(f"explicit weights too short for windows of length {n}")
        return kmax, False

    def log_beta_table(self, N: int, kmax: int) -> np.ndarray:
        """``log beta_k^n`` for ``k = 1..kmax`` (rows) and ``n = 1..N`` (columns)."""
        logs = self.log_values(1, kmax + N - 1)
        cs = np.concatenate([[0.0], np.cumsum(logs)])
        k = np.arange(1, kmax + 1)[:, None]
        n = np.arange(1, N + 1)[None, :]
        return cs[k + n - 1] - cs[k - 1]


def beta(w: WeightSequence, k: int, n: int) -> float:
    """``alpha_k * ... * alpha_{k+n-1}``; log-space guards overflow, small products are exact."""
    lb = w.log_beta(k, n)
    if abs(lb) < 700:
        return float(np.prod(w.values(k, k + n - 1)))
    return math.exp(lb)


def log_d_values(w: WeightSequence, N: int) -> tuple[np.ndarray, bool]:
    """``log d_n`` for ``n = 1..N`` and whether the infima are exact."""
    if N < 1:
        raise ValueError("N must be positive")
    kmax, exact = w._k_range(N)
    return w.log_beta_table(N, kmax).min(axis=0), exact


def d_n_info(w: WeightSequence, n: int) -> tuple[float, bool]:
    """``(d_n, exact)``: exact for periodic tails, horizon-truncated otherwise."""
    if n < 1:
        raise ValueError("n must be positive")
    kmax, exact = w._k_range(n)
    k = int(np.argmin(w.log_beta_table(n, kmax)[:, -1])) + 1
    return beta(w, k, n), exact


def d_n(w: WeightSequence, n: int) -> float:
    """``inf_k beta_k^n``."""
    return d_n_info(w, n)[0]


def _root_estimate(log_seq: np.ndarray) -> float:
    """``lim a_n^{1/n}`` estimated from the second half of ``log a_n`` (prefactor-free)."""
    N = len(log_seq)
    if N < 2:
        raise ValueError("need at least two terms")
    h = N // 2
    return math.exp((log_seq[N - 1] - log_seq[h - 1]) / (N - h))


def tail_model(log_seq: np.ndarray) -> tuple[str, float]:
    """Classify the tail of ``log a_n`` as ``("geometric", rate)`` or ``("power", exponent)``.

    Linear slopes over ``[N/4, N/2]`` and ``[N/2, N]`` agree for geometric
    sequences and halve for power laws; a root test alone confuses slow power
    growth with a small geometric rate at any finite horizon.
    """
    L = np.asarray(log_seq, dtype=float)
    N = len(L)
    if N < 8:
        raise ValueError("need at least eight terms")
    q, h = N // 4, N // 2
    s1 = (L[h - 1] - L[q - 1]) / (h - q)
    s2 = (L[N - 1] - L[h - 1]) / (N - h)
    if abs(s2) > _LOG_MARGIN and s1 * s2 > 0 and 0.75 < s2 / s1 < 4.0 / 3.0:
        return "geometric", float(s2)
    return "power", float((L[N - 1] - L[h - 1]) / (math.log(N) - math.log(h)))


def series_verdict(log_terms: np.ndarray, threshold: float = -1.0, margin: float = 0.05) -> Verdict:
    """Tri-state verdict for ``a_n`` with power decay beyond ``n^threshold`` or geometric decay.

    ``threshold = -1`` decides ``sum a_n < inf``; ``threshold = 0`` decides ``a_n -> 0``.
    """
    kind, v = tail_model(log_terms)
    if kind == "geometric":
        return Verdict.HOLDS if v < 0 else Verdict.FAILS
    if v < threshold - margin:
        return Verdict.HOLDS
    if v > threshold + margin:
        return Verdict.FAILS
    return Verdict.INCONCLUSIVE


@dataclass(frozen=True)
class SummabilityReport:
    alpha: float
    horizon: int
    partial_sum: float
    tail_bound: float | None
    root_limit: float
    verdict: Verdict
    exact: bool

    @property
    def total(self) -> float:
        """Partial sum plus tail bound: an upper bound on the full series when it converges."""
        return self.partial_sum + (self.tail_bound or 0.0) if self.tail_bound is not None else math.inf


def summability(w: WeightSequence, alpha: float, N: int = 200) -> SummabilityReport:
    """Partial sum of ``(d_n)^{-alpha}`` up to ``N`` with a tail bound when convergent.

    The tail bound uses super-multiplicativity ``d_{N+j} >= d_N d_j``:
    ``T <= d_N^{-alpha} (P + T)`` hence ``T <= d_N^{-alpha} P / (1 - d_N^{-alpha})``.
    """
    if not (0 < alpha <= 1):
        raise ValueError("Hoelder exponent must lie in (0, 1]")
    if N < 2:
        raise ValueError("N must be at least 2")
    log_d, exact = log_d_values(w, N)
    terms = np.exp(-alpha * log_d)
    partial = math.fsum(terms)
    if w.closed_form:
        G = w.geometric_mean
        rho = 1.0 / G
        verdict = Verdict.HOLDS if math.log(G) > _UNIT_TOL else Verdict.FAILS
    else:
        rho = 1.0 / _root_estimate(log_d)
        verdict = ratio_verdict(rho)
    tail = None
    if verdict is Verdict.HOLDS:
        q = float(terms[-1])
        if q < 1.0:
            tail = q * partial / (1.0 - q)
        else:
            verdict = Verdict.INCONCLUSIVE
    return SummabilityReport(alpha, N, partial, tail, rho, verdict, exact)


@dataclass(frozen=True)
class ClassifierFlags:
    transitive: Verdict
    mixing: Verdict
    freq_hypercyclic: Verdict
    chaotic: Verdict
    pos_expansive: Verdict
    p: float | str = 2.0

    def as_dict(self) -> dict:
        return {
            "transitive": self.transitive.value,
            "mixing": self.mixing.value,
            "freq_hypercyclic": self.freq_hypercyclic.value,
            "chaotic": self.chaotic.value,
            "pos_expansive": self.pos_expansive.value,
            "p": self.p,
        }


def classify(w: WeightSequence, p: float | str = 2.0, N: int = 200) -> ClassifierFlags:
    """Linear-dynamics verdicts from the growth of ``beta_1^n``.

    Criteria: transitive iff ``limsup beta_1^n = inf``; mixing iff ``lim beta_1^n = inf``;
    frequently hypercyclic and chaotic on ``l^p`` iff ``sum (beta_1^n)^{-p} < inf``;
    positively expansive iff ``sup beta_1^n = inf``.  On ``c0`` (``p="c0"``) the
    summability ``sum (beta_1^n)^{-1} < inf`` is used as a sufficient condition only.
    """
    if N < 2:
        raise ValueError("N must be at least 2")
    is_c0 = p == "c0"
    if not is_c0 and float(p) < 1:
        raise ValueError("p must be >= 1 or 'c0'")

    if w.closed_form:
        slope = math.log(w.geometric_mean)
        # periodic tails: log beta_1^n = n log G + bounded
        if slope > _UNIT_TOL:
            growth = Verdict.HOLDS
        else:
            growth = Verdict.FAILS
        # geometric growth settles every criterion at once; decay or boundedness
        # refutes transitivity, which every other property implies
        summable = growth
    else:
        n_max = min(N, w.length)
        logb = np.cumsum(w.log_values(1, n_max))
        # beta_1^n -> inf  iff  (beta_1^n)^{-1} -> 0
        growth = series_verdict(-logb, threshold=0.0)
        summable = series_verdict(-(1.0 if is_c0 else float(p)) * logb) if growth is Verdict.HOLDS else growth
        if is_c0 and growth is Verdict.HOLDS and summable is Verdict.FAILS:
            # the c0 series test is only sufficient
            summable = Verdict.INCONCLUSIVE
    return ClassifierFlags(
        transitive=growth,
        mixing=growth,
        freq_hypercyclic=summable,
        chaotic=summable,
        pos_expansive=growth,
        p=p if is_c0 else float(p),
    )


@dataclass(frozen=True)
class RghReport:
    i_root: float
    i_sum: float
    i_sup_sum: float
    root_verdict: Verdict
    sum_verdict: Verdict
    sup_sum_verdict: Verdict
    consistent: bool
    exact: bool


def rgh_indicators(w: WeightSequence, N: int = 200) -> RghReport:
    """The three equivalent summability indicators of the inverse weight products.

    ``lim (d_n)^{-1/n}``, ``sum_n (d_n)^{-1}`` and ``sup_k sum_n (beta_k^n)^{-1}``, each
    with its own convergence verdict; ``consistent`` when the verdicts agree.
    """
    if N < 2:
        raise ValueError("N must be at least 2")
    summ = summability(w, 1.0, N)
    kmax, exact = w._k_range(N)
    table = w.log_beta_table(N, kmax)
    rows = np.exp(-table)
    row_sums = np.array([math.fsum(r) for r in rows])
    i_sup_sum = float(row_sums.max())
    if w.closed_form:
        G = w.geometric_mean
        i_root = 1.0 / G
        root_v = Verdict.HOLDS if i_root < 1.0 - _UNIT_TOL else Verdict.FAILS
        # each row is a periodic-tail product sequence with the same geometric mean
        sup_v = _rows_verdict_exact(G)
    else:
        i_root = summ.root_limit
        root_v = ratio_verdict(i_root)
        row_v = {series_verdict(-np.asarray(r)) for r in table}
        if Verdict.FAILS in row_v:
            sup_v = Verdict.FAILS
        elif row_v == {Verdict.HOLDS}:
            sup_v = Verdict.HOLDS
        else:
            sup_v = Verdict.INCONCLUSIVE
    verdicts = (root_v, summ.verdict, sup_v)
    return RghReport(i_root, summ.partial_sum, i_sup_sum, root_v, summ.verdict, sup_v,
                     len(set(verdicts)) == 1, exact and summ.exact)


def _rows_verdict_exact(G: float) -> Verdict:
    # every row of a periodic-tail sequence grows like G^n up to bounded factors;
    # the sum of inverses converges iff G > 1, and a non-decaying row diverges
    if math.log(G) > _UNIT_TOL:
        return Verdict.HOLDS
    return Verdict.FAILS


def spectral_radius(w: WeightSequence, N: int = 200) -> float:
    """``lim (sup_k beta_k^N)^{1/N}``; the period's geometric mean for closed-form kinds."""
    if N < 2:
        raise ValueError("N must be at least 2")
    if w.closed_form:
        return w.geometric_mean
    kmax = min(w.horizon_K, w.length - N + 1)
    if kmax < 1:
        raise IndexError("explicit weights too short for the requested horizon")
    return math.exp(float(w.log_beta_table(N, kmax)[:, -1].max()) / N)


@dataclass(frozen=True)
class WeightReport:
    d_values: list[float]
    d_sum_alpha: float
    root_limit: float
    spectral_radius: float
    flags: ClassifierFlags
    horizon_truncated: bool


def weight_report(w: WeightSequence, alpha: float = 1.0, p: float | str = 2.0, N: int = 50) -> WeightReport:
    log_d, exact = log_d_values(w, N)
    summ = summability(w, alpha, N)
    return WeightReport(
        d_values=[float(v) for v in np.exp(log_d)],
        d_sum_alpha=summ.partial_sum,
        root_limit=summ.root_limit,
        spectral_radius=spectral_radius(w, N),
        flags=classify(w, p, N),
        horizon_truncated=not exact,
    )


def weights_from_dict(spec: dict) -> WeightSequence:
    """Build a :class:`WeightSequence` from a config mapping ``{"kind": ..., params}``."""
    spec = dict(spec)
    kind = spec.pop("kind")
    common = {k: spec.pop(k) for k in ("c", "c_prime", "horizon_K") if k in spec and spec[k] is not None}
    spec = {k: v for k, v in spec.items() if v is not None}
    if kind == "constant":
        return WeightSequence.constant(spec["alpha"], **common)
    if kind == "periodic":
        return WeightSequence.periodic(spec["values"], **common)
    if kind == "explicit":
        return WeightSequence.explicit(spec["values"], spec.get("period"), **common)
    if kind == "block_family":
        return WeightSequence.block_family(spec["a"], spec["b"], spec.get("runs", (1, 1)), **common)
    raise ValueError(f"unknown weight kind {kind!r}")
