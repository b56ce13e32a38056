import math

import numpy as np
import pytest

from ruelle_shift import potential as pot
from ruelle_shift.apriori import AprioriMeasure
from ruelle_shift.errors import BudgetExceeded
from ruelle_shift.transfer import (
    GridSpec,
    apply,
    apply_n,
    eigenpair,
    holder_certificate,
    make_kernel,
    power_iterate,
    solve_discounted,
)
from ruelle_shift.weights import WeightSequence

G = AprioriMeasure.gaussian()
W2 = WeightSequence.constant(2.0)


def test_zero_potential_eigenpair():
    eig = eigenpair(pot.zero(), G, W2)
    assert abs(eig.lam - 1.0) <= 1e-10
    assert np.allclose(eig.psi.values, 1.0)


def test_first_coordinate_quadratic():
    eig = eigenpair(pot.quadratic_first_coord(-0.25), G, W2)
    assert eig.lam == pytest.approx(math.sqrt(2 / 3), abs=1e-10)
    assert eig.lam_power == pytest.approx(eig.lam, abs=1e-10)


def test_constant_potential_shifts_kappa():
    eig = eigenpair(pot.constant(0.7), G, W2)
    assert eig.kappa == pytest.approx(0.7, abs=1e-10)


def test_apply_matches_closed_form():
    # L_A 1 (x) = int exp(tanh(r)) dm(r), independent of x for a first-coordinate potential
    A = pot.tanh_first_coord(1.0)
    expect = G.quadrature().integrate(lambda r: np.exp(np.tanh(r)))
    assert apply(A, G, W2, None, [3.0, -1.0]) == pytest.approx(expect)


def test_nested_iterate_agrees_with_monte_carlo():
    A = pot.tanh_sum([0.5, -0.4])
    phi = pot.tanh_first_coord(1.0)
    G8 = AprioriMeasure.gaussian(quadrature_order=12)
    exact = apply_n(A, G8, W2, phi, [0.3, 0.2], 3).value
    mc = apply_n(A, G8, W2, phi, [0.3, 0.2], 3, method="monte_carlo", samples=200_000, seed=5)
    assert abs(mc.value - exact) < 5 * mc.stderr


def test_budget_is_enforced():
    with pytest.raises(BudgetExceeded):
        apply_n(pot.zero(), G, W2, None, [0.0], 6, budget=1000)
    with pytest.raises(ValueError):
        apply_n(pot.zero(), G, W2, None, [0.0], 2, method="monte_carlo")


def test_relative_iteration_matches_picard():
    A = pot.tanh_sum([0.6, -0.5])
    kernel, _ = make_kernel(A, G, W2, GridSpec(size=41))
    r = solve_discounted(A, G, W2, 0.9, kernel=kernel, tol=1e-11)
    p = solve_discounted(A, G, W2, 0.9, kernel=kernel, tol=1e-11, method="picard")
    assert r.certified and p.certified
    assert np.abs(r.u.values - p.u.values).max() < 1e-9
    assert r.iterations < p.iterations


def test_discounted_eigen_matches_power_iteration():
    A = pot.tanh_sum([0.8, 0.4])
    eig = eigenpair(A, G, W2, GridSpec(size=101))
    pw = power_iterate(A, G, W2, GridSpec(size=101))
    assert eig.lam == pytest.approx(pw.lam, abs=1e-8)
    assert np.abs(eig.psi.values - pw.psi.values).max() < 1e-6


def test_grid_refinement_converges():
    A = pot.tanh_sum([0.8, -0.6])
    lams = [eigenpair(A, G, W2, GridSpec(size=n), cross_check=False).lam for n in (51, 201, 801)]
    assert abs(lams[2] - lams[1]) < abs(lams[1] - lams[0])
    assert abs(lams[2] - lams[1]) < 1e-5


def test_schedule_validation():
    with pytest.raises(ValueError):
        eigenpair(pot.zero(), G, W2, s_schedule=[0.9])
    with pytest.raises(ValueError):
        eigenpair(pot.zero(), G, W2, s_schedule=[0.99, 0.9])
    with pytest.raises(ValueError):
        eigenpair(pot.arctan_norm(), G, W2)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_holder_certificates_hold(n):
    A = pot.tanh_sum([0.6, -0.5])
    cert = holder_certificate(A, G, W2, pot.tanh_first_coord(1.0), n, pairs=2000)
    assert cert.ok
    assert cert.empirical_ratio <= cert.bound_global


def test_certificate_needs_finite_constants():
    with pytest.raises(ValueError):
        holder_certificate(pot.quadratic_first_coord(), G, W2, pot.tanh_first_coord(1.0), 1)
