import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ruelle_shift.errors import SpaceMismatch
from ruelle_shift.space import (
    MetricSpec,
    Point,
    SpaceKind,
    apply_L,
    dist,
    norm,
    pairwise_dist,
    points_to_rows,
    preimage,
    preimage_rows,
    shift_rows,
)
from ruelle_shift.weights import WeightSequence

coords = st.lists(st.floats(-5, 5, allow_nan=False), min_size=0, max_size=6)
W = WeightSequence.periodic([2.0, 0.5, 3.0])


def test_space_parse_forms():
    assert SpaceKind.parse("c0").is_c0
    assert SpaceKind.parse("l2") == SpaceKind.lp(2)
    assert SpaceKind.parse({"kind": "lp", "p": 1}).p == 1.0
    assert SpaceKind.parse(3).label == "l3"
    with pytest.raises(ValueError):
        SpaceKind(0.5)


def test_trailing_zeros_are_canonical():
    assert Point.of(1.0, 0.0, 0.0) == Point.of(1.0)
    assert Point.of(0.0, -0.0) == Point.zero()
    assert Point.basis(3)[3] == 1.0 and Point.basis(3)[7] == 0.0
    with pytest.raises(ValueError):
        Point.of(math.inf)


def test_norms():
    x = Point.of(3.0, -4.0)
    assert norm(x) == pytest.approx(5.0)
    assert norm(Point.of(3.0, -4.0, space=SpaceKind.c0())) == 4.0
    assert norm(Point.of(3.0, -4.0, space=SpaceKind.lp(1))) == 7.0
    assert norm(Point.zero()) == 0.0


def test_space_mismatch_raises():
    with pytest.raises(SpaceMismatch):
        dist(Point.of(1.0), Point.of(1.0, space=SpaceKind.c0()))


@given(coords, st.floats(-5, 5))
def test_apply_L_inverts_preimage(c, r):
    x = Point.of(*c)
    back = apply_L(W, preimage(W, x, r))
    assert np.allclose(back.array(len(x)), x.array())


def test_apply_L_definition():
    x = Point.of(1.0, 2.0, 3.0)
    assert apply_L(W, x).coords == (2.0 * 2.0, 0.5 * 3.0)


@given(st.lists(coords, min_size=1, max_size=4), st.floats(-3, 3))
def test_shift_rows_undo_preimage_rows(rows, r):
    X = points_to_rows([Point.of(*c) for c in rows], depth=6)
    P = preimage_rows(W, X, np.full(len(X), r))
    assert np.allclose(shift_rows(W, P)[:, :6], X)


def test_metric_kinds():
    x, y = Point.of(1.0), Point.of(-1.0)
    assert dist(x, y) == pytest.approx(2.0)
    assert dist(x, y, MetricSpec.holder(0.5)) == pytest.approx(math.sqrt(2.0))
    assert dist(x, y, MetricSpec.bounded(0.25)) == pytest.approx(0.5)
    assert dist(x, y, MetricSpec.bounded(10.0)) == 1.0
    with pytest.raises(ValueError):
        MetricSpec("weird")


@given(coords, coords, coords)
def test_triangle_inequality_shift_metric(a, b, c):
    s = MetricSpec.shift_metric()
    x, y, z = Point.of(*a), Point.of(*b), Point.of(*c)
    assert dist(x, z, s) <= dist(x, y, s) + dist(y, z, s) + 1e-12


def test_pairwise_matches_pointwise():
    pts = [Point.of(1.0, 2.0), Point.of(-0.5), Point.of(0.0, 0.0, 3.0)]
    X = points_to_rows(pts)
    for spec in (MetricSpec(), MetricSpec.bounded(0.7, 0.5), MetricSpec.shift_metric()):
        C = pairwise_dist(X, X, SpaceKind(2.0), spec)
        for i, p in enumerate(pts):
            for j, q in enumerate(pts):
                assert C[i, j] == pytest.approx(dist(p, q, spec), abs=1e-12)
