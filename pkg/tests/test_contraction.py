import math

import numpy as np
import pytest

from ruelle_shift import potential as pot
from ruelle_shift.apriori import AprioriMeasure
from ruelle_shift.contraction import (
    bounded_dist,
    c_contr,
    global_bound,
    global_contraction_experiment,
    golden_max,
    local_contraction_experiment,
    metric_scale,
    rn_profile,
    sum_d,
    tails_contraction_factor,
)
from ruelle_shift.errors import PremiseViolated
from ruelle_shift.space import SpaceKind
from ruelle_shift.wasserstein import EmpiricalMeasure
from ruelle_shift.weights import WeightSequence

G = AprioriMeasure.gaussian()
W2 = WeightSequence.constant(2.0)


def test_golden_max_finds_interior_peak():
    t, v = golden_max(lambda t: -(t - 0.3) ** 2 + 1, 0.0, 1.0)
    assert t == pytest.approx(0.3, abs=1e-6) and v == pytest.approx(1.0)


@pytest.mark.parametrize("L", [0.1, 1.0, 3.0])
def test_c_contr_is_attained_at_one(L):
    # (e^{Lt} - 1)/t increases in t, so the supremum is e^L - 1
    assert c_contr(L, 1.0) == pytest.approx(math.expm1(L), rel=1e-9)
    assert c_contr(0.0, 1.0) == 0.0


def test_metric_scale_constant_two():
    s = metric_scale(1.0, W2)
    assert s["sum_d"] == pytest.approx(1.0, abs=1e-14)
    assert s["a"] == pytest.approx(8 * (math.e - 1) / 3)
    assert metric_scale(0.0, W2)["a"] == 1.0


def test_sum_d_needs_summability():
    with pytest.raises(PremiseViolated):
        sum_d(WeightSequence.constant(0.5), 1.0)


def test_bounded_dist():
    D, dt = bounded_dist([0.3, 0.1], [-0.1], 2.0, 1.0, SpaceKind(2.0))
    assert D == pytest.approx(math.hypot(0.4, 0.1))
    assert dt == pytest.approx(2 * D)
    assert bounded_dist([5.0], [0.0], 2.0, 0.5, SpaceKind(2.0))[1] == 1.0


def test_tails_factor_worked_example():
    f = tails_contraction_factor(1.0, W2, 1.0, 1.0, 4)
    assert f.factor == pytest.approx(1 - 0.875 / (2 * math.e**2), abs=1e-12)
    assert f.factor == pytest.approx(0.94079, abs=5e-6)
    # saturation leaves no contraction
    assert tails_contraction_factor(8.0, W2, 1.0, 1.0, 4).factor == 1.0


def test_tails_factor_premises_and_context():
    with pytest.raises(PremiseViolated):
        tails_contraction_factor(0.1, W2, 1.0, 2.0, 4)
    with pytest.raises(PremiseViolated):
        tails_contraction_factor(1.0, W2, 1.0, 1.0, 1)
    mu = EmpiricalMeasure(np.zeros((10, 1)))
    nu = EmpiricalMeasure(np.full((10, 1), 0.5))
    f = tails_contraction_factor(1.0, W2, 1.0, 1.0, 4, mu=mu, nu=nu)
    assert f.epsilon == pytest.approx(0.125) and f.in_class


def test_rn_profile_is_piecewise():
    a = 4.0
    prof = rn_profile(W2, 1.0, a, 3, [0.1, 0.2, 0.25, 0.5, 1.0])
    assert prof.values[:2] == [0.75, 0.75]
    assert prof.values[2] == pytest.approx(global_bound(1.0, a, 1 / 8, 0.25))
    assert all(v < 1 for v in prof.values)
    assert prof.values[2:] == sorted(prof.values[2:])
    with pytest.raises(PremiseViolated):
        rn_profile(W2, 1.0, a, 1, [0.5])


def test_global_bound_lip_variant():
    assert global_bound(1.0, 2.0, 0.1, 0.5, lip=0.0) == pytest.approx(0.1)
    assert global_bound(1.0, 2.0, 0.1, 0.5, lip=2.0) > global_bound(1.0, 2.0, 0.1, 0.5)


def test_local_contraction_zero_potential_coupled_channel():
    reps = local_contraction_experiment(pot.zero(), G, W2, [0.3, 0.1], [-0.1], [1, 2, 3], particles=512, seed=1)
    assert [r.n for r in reps] == [2, 3]
    for r in reps:
        assert r.passes
        # with common random numbers the cloud distance is exactly the analytic one
        assert r.extra["coupled_gap"] < 1e-12
        assert r.extra["analytic_ratio"] <= 0.75


def test_local_premises():
    with pytest.raises(PremiseViolated):
        local_contraction_experiment(pot.zero(), G, W2, [3.0], [-3.0], [2], particles=16)
    with pytest.raises(PremiseViolated):
        local_contraction_experiment(pot.zero(), G, W2, [0.1], [0.0], [1], particles=16)
    with pytest.raises(PremiseViolated):
        local_contraction_experiment(pot.zero(), G, W2, [0.1], [0.0], [2], particles=16, a=0.5)


def test_global_contraction_zero_potential():
    r = global_contraction_experiment(pot.zero(), G, W2, [1.0], [0.0], 3, particles=512, seed=2)
    assert r.d_tilde_xy == 1.0
    assert r.bound == r.extra["bound_displayed"]
    assert r.passes
    with pytest.raises(PremiseViolated):
        global_contraction_experiment(pot.zero(), G, W2, [0.1], [0.0], 3, particles=16)
    with pytest.raises(PremiseViolated):
        global_contraction_experiment(pot.zero(), G, W2, [10.0], [0.0], 3, particles=16)
