import numpy as np
import pytest

from ruelle_shift import oracle
from ruelle_shift import potential as pot
from ruelle_shift.apriori import AprioriMeasure
from ruelle_shift.errors import NotStochastic
from ruelle_shift.transfer import eigenpair
from ruelle_shift.weights import WeightSequence

ATOMS = [(-1.0, 0.4), (1.0, 0.6)]


def instance(coeffs=(0.6, -0.5), alpha=2.0):
    return oracle.build(alpha, ATOMS, pot.tanh_sum(list(coeffs)))


def test_shape_and_closure():
    inst = oracle.build(2.0, [(-1.0, 0.2), (0.5, 0.5), (2.0, 0.3)], pot.tanh_sum([0.7, -0.4, 0.3]))
    assert inst.size == 9 and inst.state_rank == 2
    assert inst.matrix.nnz == 27


def test_bracket_contains_numpy_eigenvalue():
    inst = instance()
    eig = oracle.exact_eigen(inst)
    rho = max(abs(np.linalg.eigvals(inst.dense())))
    lo, hi = eig.bracket
    assert lo - 1e-12 <= rho <= hi + 1e-12
    assert eig.lam == pytest.approx(rho, rel=1e-12)
    assert eig.psi[inst.origin_state()] == 1.0


def test_normalized_instance_is_stochastic():
    P = oracle.normalized_instance(instance())
    assert np.allclose(np.asarray(P.matrix.sum(axis=1)).ravel(), 1.0)
    pi = oracle.exact_stationary(P)
    assert pi.sum() == pytest.approx(1.0)
    assert np.allclose(pi @ P.dense(), pi)


def test_stationary_requires_stochastic():
    with pytest.raises(NotStochastic):
        oracle.exact_stationary(instance())


def test_product_potential_has_product_marginals():
    # a first-coordinate potential tilts each coordinate independently
    inst = oracle.build(2.0, ATOMS, pot.tanh_sum([0.9]), state_rank=2)
    pi = oracle.exact_stationary(oracle.normalized_instance(inst))
    tilt = np.array([0.4 * np.exp(0.9 * np.tanh(-1.0)), 0.6 * np.exp(0.9 * np.tanh(1.0))])
    tilt /= tilt.sum()
    assert np.allclose(oracle.marginal(inst, pi, 1), tilt)
    assert np.allclose(oracle.marginal(inst, pi, 2), tilt)


def test_transfer_solver_agrees_with_oracle():
    A = pot.tanh_sum([0.6, -0.5])
    inst = oracle.build(2.0, ATOMS, A)
    ex = oracle.exact_eigen(inst)
    m = AprioriMeasure.atoms([v for v, _ in ATOMS], [p for _, p in ATOMS])
    eig = eigenpair(A, m, WeightSequence.constant(2.0))
    assert eig.lam == pytest.approx(ex.lam, abs=1e-10)
    # the two solvers pin psi at different points (interpolated origin vs nearest state)
    psi = eig.psi(inst.collocation)
    assert np.allclose(psi / psi[inst.origin_state()], ex.psi, rtol=1e-9)


def test_discounted_fixed_point_kappa():
    inst = instance()
    u = oracle.discounted_fixed_point(inst, 0.999)
    assert (1 - 0.999) * u[inst.origin_state()] == pytest.approx(np.log(oracle.exact_eigen(inst).lam), abs=2e-3)


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        oracle.build(2.0, [(0.0, 1.0)], pot.zero())
    with pytest.raises(ValueError):
        oracle.build(2.0, ATOMS, pot.arctan_norm())
