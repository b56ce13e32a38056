import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ruelle_shift.errors import BudgetExceeded, LipschitzAuditFailed, SizeMismatch
from ruelle_shift.space import MetricSpec, SpaceKind
from ruelle_shift.wasserstein import EmpiricalMeasure, kantorovich_lb, w1, w1_1d, w1_subsample

clouds = arrays(np.float64, (12, 3), elements=st.floats(-4, 4))
METRICS = [MetricSpec(), MetricSpec.bounded(0.8, 0.5), MetricSpec.shift_metric()]


@settings(max_examples=25, deadline=None)
@given(clouds, clouds, clouds)
def test_metric_axioms(a, b, c):
    for spec in METRICS:
        ab, bc, ac = (w1(x, y, spec).value for x, y in ((a, b), (b, c), (a, c)))
        assert w1(a, a, spec).value == pytest.approx(0.0, abs=1e-12)
        assert ab == pytest.approx(w1(b, a, spec).value, abs=1e-12)
        assert ac <= ab + bc + 1e-12


@given(arrays(np.float64, 20, elements=st.floats(-5, 5)), arrays(np.float64, 20, elements=st.floats(-5, 5)))
def test_one_dimensional_sorted_formula(x, y):
    assert w1(x[:, None], y[:, None], MetricSpec()).value == pytest.approx(w1_1d(x, y), abs=1e-10)


def test_permutation_invariance():
    rng = np.random.default_rng(0)
    X, Y = rng.normal(size=(50, 4)), rng.normal(size=(50, 4))
    a = w1(X, Y, MetricSpec()).value
    assert w1(X[rng.permutation(50)], Y[rng.permutation(50)], MetricSpec()).value == pytest.approx(a, abs=1e-12)


def test_kantorovich_lower_bound():
    rng = np.random.default_rng(1)
    spec = MetricSpec.bounded(0.7)
    X, Y = rng.normal(size=(200, 2)), rng.normal(1.0, size=(200, 2))
    x0 = np.array([0.0, 0.0])
    fns = [lambda P: spec.from_norm(np.linalg.norm(P - x0, axis=1)), lambda P: np.minimum(1.0, 0.7 * np.abs(P[:, 0]))]
    assert kantorovich_lb(X, Y, spec, fns) <= w1(X, Y, spec).value + 1e-12


def test_kantorovich_tight_for_diracs():
    spec = MetricSpec.bounded(0.6)
    x, y = np.array([0.5, -1.0]), np.array([-0.2, 0.3])
    mu, nu = EmpiricalMeasure.dirac(x, 4), EmpiricalMeasure.dirac(y, 4)
    phi = lambda P: spec.from_norm(np.linalg.norm(P - x, axis=1))
    assert abs(w1(mu, nu, spec).value - kantorovich_lb(mu, nu, spec, [phi])) <= 1e-9


def test_lipschitz_audit():
    X = np.random.default_rng(2).normal(size=(100, 1))
    with pytest.raises(LipschitzAuditFailed):
        kantorovich_lb(X, X + 1, MetricSpec(), [lambda P: 3.0 * P[:, 0]])


def test_sinkhorn_close_to_exact():
    rng = np.random.default_rng(3)
    X, Y = rng.normal(size=(60, 2)), rng.normal(0.5, size=(60, 2))
    spec = MetricSpec.bounded(0.5)
    ex = w1(X, Y, spec, method="exact").value
    reg = 0.01
    sk = w1(X, Y, spec, method="entropic", reg=reg)
    # the entropic plan is feasible, and its transport cost exceeds the optimum by at most reg * log n
    assert sk.value >= ex - 1e-6
    assert sk.value <= ex + reg * np.log(60)
    assert sk.plan.dual_value <= ex + 1e-12
    assert 0 <= sk.plan.duality_gap <= reg * np.log(60)


def test_size_mismatch_and_auto_method():
    X, Y = np.zeros((3, 1)), np.ones((4, 1))
    with pytest.raises(SizeMismatch):
        w1(X, Y, MetricSpec(), method="exact")
    assert w1(X, Y, MetricSpec.bounded(1.0)).plan.method == "entropic"
    big = np.zeros((5000, 1))
    with pytest.raises(BudgetExceeded):
        w1(big, np.zeros((4000, 1)), MetricSpec())


def test_subsample_uses_heads():
    mu = EmpiricalMeasure(np.arange(10.0)[:, None], SpaceKind(2.0))
    nu = EmpiricalMeasure(np.arange(10.0)[:, None] + 1, SpaceKind(2.0))
    assert w1_subsample(mu, nu, MetricSpec(), 4) == pytest.approx(1.0)
