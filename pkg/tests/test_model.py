import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from homoclinic.interval import Interval, mat_mul
from homoclinic.linalg import enclose_spectrum
from homoclinic.model import LocalChart, QuadraticField, lorenz84, lorenz84_field, lorenz84_jacobian

A, B, F = 0.25, 4.0, 4.0
THETA = Interval(0.0752761095, 0.07527611625)
REFERENCE_BOX = Interval(np.array([3.9999144633, -0.0008521960, 0.0045450712]),
                     np.array([3.9999144654, -0.0008521939, 0.0045450733]))
Q0 = np.array([3.9999144643281, -0.00085219497131102, 0.0045450722448356])
C = np.array([[1, -0.00016604653053618, 0.00040407899883959],
              [0.00016384655297642, -0.28235213046095, 0.71764786953905],
              [-0.0011562746220118, 0.71764798264861, 0.28235189601999]])


def point_field(p, g):
    X, Y, Z = p
    return np.array([-Y * Y - Z * Z - A * X + A * F, X * Y - B * X * Z - Y + g, B * X * Y + X * Z - Z])


@pytest.fixture(scope="module")
def fwd():
    return lorenz84(A, B, F, THETA)


def test_origin_evaluation(fwd):
    g = 0.0752761095
    v = fwd.evaluate(np.zeros(3), Interval(g))
    assert v.contains(np.array([1.0, g, 0.0]))
    assert lorenz84_field(np.zeros(3), A, B, F, g).contains(np.array([1.0, g, 0.0]))


def test_fixed_point_box_contains_zero(fwd):
    assert fwd.evaluate(REFERENCE_BOX, THETA).contains_zero().all()


def test_quadratic_form_matches_handwritten(fwd):
    rng = np.random.default_rng(0)
    for _ in range(50):
        c = rng.normal(size=3) * 3
        box = Interval(c - 1e-3, c + 1e-3)
        generic = fwd.evaluate(box, THETA)
        hand = lorenz84_field(box, A, B, F, THETA)
        assert generic.overlaps(hand)
        J = fwd.jacobian(box, THETA)
        Jh = lorenz84_jacobian(box, A, B, F, THETA)
        assert J.overlaps(Jh)


def test_box_evaluation_contains_samples(fwd):
    rng = np.random.default_rng(1)
    lo = np.array([3.5, -0.5, -0.5])
    hi = np.array([4.5, 0.5, 0.5])
    box = Interval(lo, hi)
    th = Interval(0.07, 0.08)
    v = fwd.evaluate(box, th)
    for _ in range(1000):
        p = rng.uniform(lo, hi)
        assert v.contains(point_field(p, rng.uniform(0.07, 0.08)))


def test_jacobian_against_central_differences(fwd):
    rng = np.random.default_rng(2)
    h = 1e-6
    for _ in range(1000):
        p = rng.normal(size=3) * 4
        g = rng.uniform(0.07, 0.08)
        box = Interval(p - 1e-6, p + 1e-6)
        J = fwd.jacobian(box, Interval(g))
        fd = np.empty((3, 4))
        for k in range(3):
            e = np.zeros(3)
            e[k] = h
            fd[:, k] = (point_field(p + e, g) - point_field(p - e, g)) / (2 * h)
        fd[:, 3] = (point_field(p, g + h) - point_field(p, g - h)) / (2 * h)
        # quadratic field: central differences are exact up to rounding
        slack = 1e-7 * (1 + np.abs(fd))
        assert np.all(J.lo - slack <= fd) and np.all(fd <= J.hi + slack)


def test_reverse_twice_is_identity(fwd):
    twice = fwd.reverse_time().reverse_time()
    for name in ("c0", "c1", "A0", "A1", "Q"):
        assert getattr(twice, name).same(getattr(fwd, name))
    assert twice.unstable_idx == fwd.unstable_idx


def test_linear_saddle_reversal():
    f = QuadraticField.linear(np.diag([1.0, -1.0]), unstable_dim=1)
    r = f.reverse_time()
    assert r.A0.same(Interval(np.diag([-1.0, 1.0])))
    assert r.unstable_idx == [1] and r.stable_idx == [0]


def test_reversed_eigenvalues_are_negated(fwd):
    rev = lorenz84(A, B, F, THETA, time_direction=-1)
    Jf = fwd.state_jacobian(REFERENCE_BOX, THETA)
    Jr = rev.state_jacobian(REFERENCE_BOX, THETA)
    ef = enclose_spectrum(Jf)
    er = enclose_spectrum(Jr)
    real_f = [e for e in ef if e.kind == "real"][0]
    real_r = [e for e in er if e.kind == "real"][0]
    assert (-real_f.lambda_re).overlaps(real_r.lambda_re)
    cf = [e for e in ef if e.kind == "complex"][0]
    cr = [e for e in er if e.kind == "complex"][0]
    assert (-cf.lambda_re).overlaps(cr.lambda_re) and cf.lambda_im.overlaps(cr.lambda_im)


def test_extended_field_structure(fwd):
    ext = fwd.extended()
    assert ext.state_dim == 4 and ext.static == (3,)
    rng = np.random.default_rng(3)
    for _ in range(50):
        p = rng.normal(size=3)
        g = rng.uniform(0.07, 0.08)
        v = ext.evaluate(np.append(p, g))
        assert v[3].same(Interval(0.0))
        assert v[:3].overlaps(fwd.evaluate(p, Interval(g)))
        J = ext.jacobian(Interval(np.append(p, g)))
        assert J[3].same(Interval(np.zeros(5)))


def test_extended_matches_parameter_form_on_boxes(fwd):
    ext = fwd.extended()
    box = Interval(np.array([3.9, -0.1, -0.1, 0.075]), np.array([4.1, 0.1, 0.1, 0.0753]))
    v = ext.evaluate(box)
    assert v[:3].overlaps(fwd.evaluate(box[:3], box[3]))


def test_chart_round_trip_and_inverse():
    chart = LocalChart.from_arrays(Q0, C)
    assert mat_mul(Interval(C), chart.C_inv_enclosure).contains(np.eye(3))
    rng = np.random.default_rng(4)
    for _ in range(100):
        p = Q0 + rng.normal(size=3) * 1e-3
        assert chart.from_local(chart.to_local(p)).contains(p)
    assert chart.to_local(Q0).contains(np.zeros(3))


def test_fixed_point_is_near_chart_origin():
    chart = LocalChart.from_arrays(Q0, C)
    loc = chart.to_local(REFERENCE_BOX)
    assert float(np.max(loc.mag())) < 1e-4


def test_field_in_chart_matches_pushforward(fwd):
    chart = LocalChart.from_arrays(Q0, C)
    fl = fwd.in_chart(chart)
    rng = np.random.default_rng(5)
    for _ in range(50):
        x = rng.normal(size=3) * 1e-3
        g = rng.uniform(0.0752761095, 0.07527611625)
        local = fl.evaluate(x, Interval(g))
        direct = np.linalg.solve(C, point_field(C @ x + Q0, g))
        assert local.inflate(1e-12).contains(direct)


def test_split_bookkeeping(fwd):
    assert fwd.unstable_idx == [1, 2] and fwd.stable_idx == [0]
    rev = fwd.reverse_time()
    assert rev.unstable_idx == [0] and rev.stable_idx == [1, 2]
    with pytest.raises(ValueError):
        lorenz84(A, B, F, THETA, time_direction=2)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.floats(1e-8, 1e-2))
def test_evaluation_is_inclusion_monotone(c, r):
    f = lorenz84(A, B, F, THETA)
    c = np.array(c)
    small = Interval(c - r / 2, c + r / 2)
    big = Interval(c - r, c + r)
    assert f.evaluate(small, THETA).subset(f.evaluate(big, THETA))
    assert f.jacobian(small, THETA).subset(f.jacobian(big, THETA))
