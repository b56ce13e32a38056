import math

import numpy as np
import pytest

from ruelle_shift import potential as pot
from ruelle_shift.apriori import AprioriMeasure
from ruelle_shift.errors import NonpositiveEigenfunction
from ruelle_shift.grid import GridFunction
from ruelle_shift.potential import (
    is_normalized,
    normalize,
    potential_from_dict,
    summable_variation_check,
    variation,
)
from ruelle_shift.transfer import GridSpec, eigenpair
from ruelle_shift.weights import Verdict, WeightSequence

G = AprioriMeasure.gaussian()
W2 = WeightSequence.constant(2.0)


def test_builtins_evaluate():
    assert pot.zero()([1.0, 2.0])[0] == 0.0
    assert pot.constant(-0.3).value([5.0]) == -0.3
    assert pot.quadratic_first_coord().value([2.0, 9.0]) == pytest.approx(-1.0)
    assert not pot.quadratic_first_coord().bounded
    assert pot.tanh_sum([1.0, -2.0]).value([0.5, 0.25]) == pytest.approx(math.tanh(0.5) - 2 * math.tanh(0.25))


def test_variation_vanishes_beyond_rank():
    A = pot.tanh_sum([1.0, 0.5, 0.25])
    assert variation(A, 3) == 0.0
    assert 0 < variation(A, 2) <= 0.5 + 0.25 * 2


def test_arctan_norm_variation_does_not_decay():
    A = pot.arctan_norm()
    terms = [variation(A, n) for n in (1, 5, 10)]
    # the sup-oscillation is pi/2 for every n; sampling must get close
    assert all(t >= 1.5 for t in terms)
    assert all(t <= math.pi / 2 + 1e-12 for t in terms)
    assert summable_variation_check(A, N=12).verdict is Verdict.FAILS


def test_finite_rank_variation_is_summable():
    assert summable_variation_check(pot.tanh_sum([1.0, 1.0])).verdict is Verdict.HOLDS


def test_normalized_tanh_first_coord():
    A = pot.tanh_first_coord(0.8, G)
    X = np.random.default_rng(0).normal(size=(16, 3))
    assert is_normalized(A, G, W2, X) < 1e-12


def test_expression_whitelist():
    A = pot.cylinder_expression("0.5*sin(x1) - tanh(x2)", 2, 1.5, 1.5)
    assert A.value([0.0, 0.0]) == 0.0 and A.provenance == "declared"
    with pytest.raises(ValueError):
        pot.cylinder_expression("__import__('os')", 1)
    with pytest.raises(ValueError):
        pot.cylinder_expression("x3", 2)
    est = pot.cylinder_expression("tanh(x1)", 1)
    assert est.provenance == "estimated" and est.sup_bound <= 1.0 and est.lip == pytest.approx(1.0, abs=0.05)


def test_normalize_with_eigenpair():
    # the residual is the interpolation error of psi, second order in the grid step
    A = pot.tanh_sum([0.6, -0.5])
    res = []
    for size in (201, 801):
        eig = eigenpair(A, G, W2, GridSpec(size=size), cross_check=False)
        N = normalize(A, eig.psi, eig.lam, W2, G)
        assert N.rank == 2 and N.lam == eig.lam
        res.append(N.residual)
    assert res[1] < res[0] / 8
    assert res[1] < 5e-6


def test_normalize_rejects_nonpositive_psi():
    psi = GridFunction((np.array([-1.0, 1.0]),), np.array([1.0, -0.1]))
    with pytest.raises(NonpositiveEigenfunction):
        normalize(pot.tanh_sum([1.0, 1.0]), psi, 1.0, W2, G)
    with pytest.raises(ValueError):
        normalize(pot.zero(), GridFunction.constant(1.0), 0.0, W2, G)


def test_from_dict():
    assert potential_from_dict({"name": "tanh_first_coord", "params": {"scale": 2.0}}).value([0.0]) == 0.0
    t = potential_from_dict({"name": "tanh_first_coord", "params": {"scale": 1.0, "normalize": True}}, G)
    assert t.params["normalized"]
    table = {"axes": [[-1.0, 1.0]], "values": [0.0, 2.0]}
    c = potential_from_dict({"kind": "cylinder", "rank": 1, "table": table, "expression": None})
    assert c.value([0.0]) == pytest.approx(1.0) and c.lip == pytest.approx(1.0)
    with pytest.raises(ValueError):
        potential_from_dict({"name": "nope"})
    with pytest.raises(ValueError):
        potential_from_dict({"kind": "cylinder", "rank": 2, "table": table})
