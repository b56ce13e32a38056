import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ruelle_shift.apriori import (
    AprioriMeasure,
    GrowthLaw,
    TailClass,
    adapted_tails_check,
    apriori_from_dict,
    fast_tail_criteria,
    sequence_in_space,
)
from ruelle_shift.errors import MissingTailClass, UnsupportedKind
from ruelle_shift.space import SpaceKind
from ruelle_shift.weights import Verdict, WeightSequence

L1, L2, C0 = SpaceKind(1.0), SpaceKind(2.0), SpaceKind(None)


def test_gaussian_tail_values():
    m = AprioriMeasure.gaussian()
    assert m.tail(0.0) == pytest.approx(1.0)
    assert m.tail(1.96) == pytest.approx(0.05, abs=1e-4)
    assert m.log_tail(40.0) == pytest.approx(math.log(2) - 800 - math.log(40 * math.sqrt(2 * math.pi)), abs=1e-3)


def test_student_and_atom_tails():
    t = AprioriMeasure.student_t(2.0)
    # df = 2: P(|T| > z) = 1 - z / sqrt(2 + z^2)
    assert t.tail(3.0) == pytest.approx(1 - 3 / math.sqrt(11))
    a = AprioriMeasure.atoms([-2.0, 1.0], [0.3, 0.7])
    assert a.tail(1.5) == pytest.approx(0.3)
    assert a.tail(2.0) == 0.0
    assert not a.full_support


def test_gaussian_quadrature_closed_form():
    m = AprioriMeasure.gaussian()
    q = m.quadrature()
    assert q.integrate(lambda x: np.exp(-x**2 / 4)) == pytest.approx(math.sqrt(2 / 3), abs=1e-8)
    assert q.integrate(lambda x: x**4) == pytest.approx(3.0, abs=1e-10)


def test_student_quadrature_rejects_missing_moments():
    t = AprioriMeasure.student_t(3.0)
    with pytest.raises(UnsupportedKind):
        t.quadrature(degree=3)
    assert t.quadrature().integrate(np.tanh) == pytest.approx(0.0, abs=1e-12)
    assert t.quadrature().integrate(lambda x: 1 / (1 + x**2)) == pytest.approx(
        _t_expect_lorentz(3.0), abs=1e-3)


def _t_expect_lorentz(df):
    from scipy import integrate, stats
    return integrate.quad(lambda x: stats.t.pdf(x, df) / (1 + x**2), -np.inf, np.inf)[0]


@settings(max_examples=30)
@given(st.floats(-60.0, -0.01))
def test_tail_quantile_inverts_tail(log_t):
    for m in (AprioriMeasure.gaussian(variance=2.0), AprioriMeasure.student_t(2.5)):
        z = m.tail_quantile(log_t)
        assert m.log_tail(z) == pytest.approx(log_t, abs=1e-6)


def test_ppf_matches_cdf():
    m = AprioriMeasure.atoms([0.0, 1.0, 5.0], [0.2, 0.5, 0.3])
    assert list(m.ppf([0.1, 0.3, 0.69, 0.71, 0.999])) == [0.0, 1.0, 1.0, 5.0, 5.0]
    g = AprioriMeasure.gaussian(mean=1.0)
    assert g.cdf(g.ppf(0.3)) == pytest.approx(0.3)


def test_invalid_measures():
    with pytest.raises(ValueError):
        AprioriMeasure.atoms([0.0, 1.0], [0.5, 0.6])
    with pytest.raises(ValueError):
        AprioriMeasure.gaussian(variance=0.0)
    with pytest.raises(ValueError):
        TailClass("polynomial", 0.5)


def test_missing_tail_class():
    with pytest.raises(MissingTailClass):
        AprioriMeasure.gaussian(tail_class=None).declared_tail
    with pytest.raises(MissingTailClass):
        AprioriMeasure.student_t(1.0).declared_tail
    assert AprioriMeasure.student_t(3.0).declared_tail == TailClass("polynomial", 3.0)


def test_dict_round_trip():
    for m in (AprioriMeasure.gaussian(0.5, 2.0), AprioriMeasure.student_t(4.0, 0.5),
              AprioriMeasure.atoms([1.0, -1.0], [0.4, 0.6])):
        back = apriori_from_dict(m.to_dict())
        assert back.to_dict() == m.to_dict()


def test_sequence_in_space_power_laws():
    n = np.arange(1, 401)
    assert sequence_in_space(-0.5 * np.log(n), C0) is Verdict.HOLDS
    assert sequence_in_space(-0.5 * np.log(n), L2) is Verdict.INCONCLUSIVE
    assert sequence_in_space(-0.5 * np.log(n), L1) is Verdict.FAILS
    assert sequence_in_space(-0.8 * np.log(n), L2) is Verdict.HOLDS
    assert sequence_in_space(-0.01 * n, L1) is Verdict.HOLDS
    assert sequence_in_space(0.5 * np.log(n), C0) is Verdict.FAILS
    # a constant sequence sits on the c0 boundary: no finite horizon can tell n^0 from n^-0.01
    assert sequence_in_space(np.zeros(400), C0) is Verdict.INCONCLUSIVE


def test_adapted_tails_construction():
    rep = adapted_tails_check(AprioriMeasure.gaussian(), WeightSequence.constant(2.0), L1, 0.5)
    assert rep.verdict is Verdict.HOLDS
    assert rep.tail_sum < 0.5
    # kappa_n decreases geometrically once beta_1^n dominates the quantile growth
    k = np.asarray(rep.kappa)
    assert np.all(np.diff(k[5:]) < 0)


def test_adapted_tails_smaller_epsilon_needs_larger_kappa():
    m, w = AprioriMeasure.gaussian(), WeightSequence.constant(2.0)
    a = adapted_tails_check(m, w, L1, 0.5)
    b = adapted_tails_check(m, w, L1, 0.05)
    assert np.all(np.asarray(b.kappa) >= np.asarray(a.kappa))


def test_adapted_tails_not_refuted_without_growth():
    rep = adapted_tails_check(AprioriMeasure.gaussian(), WeightSequence.constant(1.0), L1, 0.5)
    assert rep.verdict is Verdict.INCONCLUSIVE
    assert rep.kappa_in_X is Verdict.FAILS


def test_fast_criteria():
    g, t = AprioriMeasure.gaussian(), AprioriMeasure.student_t(2.0)
    assert fast_tail_criteria(g, WeightSequence.constant(2.0), L1) is Verdict.HOLDS
    assert fast_tail_criteria(t, GrowthLaw.power(0.4), L1) is Verdict.INCONCLUSIVE
    assert fast_tail_criteria(t, GrowthLaw.power(0.6), C0) is Verdict.HOLDS
    assert fast_tail_criteria(t, GrowthLaw.power(1.6), L1) is Verdict.HOLDS
    assert fast_tail_criteria(g, GrowthLaw("bounded"), L1) is Verdict.INCONCLUSIVE


def test_growth_law_from_weights():
    g = GrowthLaw.from_weights(WeightSequence.explicit([1.5] * 1000), N=200)
    assert g.kind == "exponential" and g.rate == pytest.approx(math.log(1.5), rel=1e-9)
    assert GrowthLaw.from_weights(WeightSequence.constant(3.0)).rate == pytest.approx(math.log(3.0))
    assert GrowthLaw.from_weights(WeightSequence.periodic([2.0, 0.5])).kind == "bounded"


def test_fast_path_consistent_with_construction():
    # whenever the fast path holds, the explicit construction agrees
    for m, w, X in [(AprioriMeasure.gaussian(), WeightSequence.constant(2.0), L1),
                    (AprioriMeasure.student_t(3.0), WeightSequence.constant(1.5), L2),
                    (AprioriMeasure.atoms([-1.0, 1.0], [0.5, 0.5]), WeightSequence.periodic([2.0, 1.0]), C0)]:
        assert fast_tail_criteria(m, w, X) is Verdict.HOLDS
        assert adapted_tails_check(m, w, X, 0.5).verdict is Verdict.HOLDS
