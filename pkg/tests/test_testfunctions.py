import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from horolab.boundary import frame_from_endpoints
from horolab.errors import InvalidArgument, InvalidBox
from horolab.schottky import fixed_points
from horolab.testfunctions import (
    BumpSum,
    QuotientFunction,
    TestFunction as Box,
    bump,
    bump_integral,
    derivative_sup,
    make_bump,
    rotation_matrix,
)


@pytest.fixture(scope="module")
def centre(group):
    plus, _ = fixed_points(group.word_matrix([0, 2]))
    _, minus = fixed_points(group.word_matrix([1, 3]))
    return frame_from_endpoints(plus, minus, 0.0)


def test_bump_shape():
    u = np.array([-1.5, -1.0, 0.0, 0.5, 1.0])
    assert np.allclose(bump(u, 3), [0, 0, 1, 0.75 ** 4, 0])
    # int_{-1}^{1} (1 - u^2)^4 du = 256/315
    assert np.isclose(bump_integral(3), 256 / 315)
    assert derivative_sup(3, 0) == pytest.approx(1.0)


unit = st.floats(-0.9, 0.9)


@given(t=unit, s=unit, r=unit)
@settings(max_examples=100, deadline=None)
def test_box_coordinates_roundtrip(centre, t, s, r):
    psi = Box(centre, 0.3, 0.3)
    w = psi.box_frame(0.3 * t, 0.3 * s, 0.3 * r)
    c = psi.coordinates(w[None])
    assert c.ok[0]
    assert np.allclose([c.t[0, 0], c.sigma[0], c.r[0, 0]], [0.3 * t, 0.3 * s, 0.3 * r], atol=1e-9)
    expected = bump(np.array(t), 3) * bump(np.array(s), 3) * bump(np.array(r), 3)
    assert np.isclose(psi.lift(w[None])[0], expected, atol=1e-9)


def test_box_coordinates_in_three_dimensions():
    g = np.eye(4)
    psi = Box(g, 0.2, 0.2)
    w = psi.box_frame([0.1, -0.05], 0.07, [0.02, 0.1], 0.12)
    c = psi.coordinates(w[None])
    assert np.allclose(c.t[0], [0.1, -0.05]) and np.isclose(c.sigma[0], 0.07)
    assert np.allclose(c.r[0], [0.02, 0.1]) and np.isclose(c.angle[0], 0.12)
    assert np.allclose(rotation_matrix(0.0, 3), np.eye(4))


def test_lift_vanishes_outside_box(centre):
    psi = Box(centre, 0.3, 0.3)
    assert psi.lift(psi.box_frame(0.31, 0.0, 0.0)[None])[0] == 0.0
    assert psi.lift(psi.box_frame(0.0, 0.0, -0.31)[None])[0] == 0.0


def test_sobolev_scaling(centre):
    # the sup-norm Sobolev bound grows like eta^-l
    vals = [Box(centre, eta, eta).sobolev_bound * eta ** 3 for eta in (0.2, 0.1, 0.05)]
    assert max(vals) / min(vals) < 1.1


def test_invalid_boxes(group, centre):
    with pytest.raises(InvalidBox):
        Box(centre, 0.0, 0.1)
    with pytest.raises(InvalidBox):
        make_bump(centre, 3.0, 1.0, group=group)
    with pytest.raises(InvalidArgument):
        Box(np.eye(6), 0.1, 0.1)


def test_quotient_function_is_invariant(group, centre, rng):
    psi = make_bump(centre, 0.3, 0.3, group=group)
    q = QuotientFunction(psi, group)
    frames = np.array([psi.box_frame(*rng.uniform(-0.25, 0.25, 3)) for _ in range(20)])
    direct = psi.lift(frames)
    assert np.all(direct > 0)
    for letters in ([0], [2, 2], [1, 3, 0]):
        gamma = group.word_matrix(letters)
        assert np.allclose(q(frames @ gamma), direct, atol=1e-9)


def test_bump_sum_adds(group, ctx):
    bumps = ctx.bumps[:3]
    total = BumpSum(bumps, group)
    frames = np.array([b.frame for b in bumps])
    parts = sum(QuotientFunction(b, group)(frames) for b in bumps)
    assert np.allclose(total(frames), parts)
    assert len(total) == 3 and total.sobolev_bound > 0


def test_scattered_bumps_are_separated(ctx):
    from horolab.boundary import basepoint
    from horolab.lorentz import pairing

    o = basepoint(2)
    pts = np.array([o @ b.frame for b in ctx.bumps])
    d = np.arccosh(np.maximum(-pairing(pts[:, None], pts[None]), 1.0))
    np.fill_diagonal(d, np.inf)
    assert len(ctx.bumps) == 40
    assert d.min() >= 0.3
