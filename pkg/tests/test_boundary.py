import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from horolab.boundary import (
    BoundaryPoint,
    HyperbolicPoint,
    ball_to_lorentz,
    basepoint,
    busemann,
    busemann_ray_limit,
    check_on_sheet,
    endpoints,
    frame_basepoint,
    frame_from_endpoints,
    gromov_distance,
    gromov_distance_closed,
    hopf_coordinates,
    horosphere_coordinates,
    horosphere_projection,
    hyp_distance,
    lorentz_to_ball,
    model_convert,
    normalize_null,
    ray_point,
    reorthonormalize,
    sphere_to_null,
)
from horolab.errors import InvalidArgument
from horolab.lorentz import lorentz_residual, make_flow, make_u, make_v, pairing

angle = st.floats(0, 2 * np.pi)
inner = st.floats(0, 0.95)


def circle(a):
    return sphere_to_null([np.cos(a), np.sin(a)])


def disk(r, a):
    return ball_to_lorentz([r * np.cos(a), r * np.sin(a)])


def test_basepoint():
    o = basepoint(2)
    assert np.allclose(o, [2 ** -0.5, 0, 2 ** -0.5])
    assert np.isclose(pairing(o, o), -1)
    assert np.allclose(lorentz_to_ball(o), 0)


@given(r=inner, a=angle)
def test_ball_roundtrip(r, a):
    x = disk(r, a)
    assert abs(pairing(x, x) + 1) < 1e-8 * max(1, float(np.max(np.abs(x))) ** 2)
    assert np.allclose(lorentz_to_ball(x), [r * np.cos(a), r * np.sin(a)], atol=1e-9)


def test_model_convert_and_value_types():
    xi = model_convert([0.0, 1.0], "ball")
    assert abs(pairing(xi, xi)) < 1e-14
    assert np.allclose(model_convert(xi, "lorentz"), [0, 1])
    p = HyperbolicPoint.from_ball([0.3, 0.1])
    assert np.allclose(p.ball, [0.3, 0.1])
    assert np.allclose(BoundaryPoint.from_ball([0.6, 0.8]).ball, [0.6, 0.8])
    with pytest.raises(InvalidArgument):
        BoundaryPoint.from_ball([0.6, 0.7])
    with pytest.raises(InvalidArgument):
        model_convert([0.1, 0.2], "klein")
    with pytest.raises(InvalidArgument):
        check_on_sheet(np.array([1.0, 0, 1.0]))


def test_distance_from_origin():
    r = 0.5
    assert np.isclose(hyp_distance(basepoint(2), disk(r, 1.0)), 2 * np.arctanh(r))


@given(a=angle, r1=inner, a1=angle, r2=inner, a2=angle, r3=inner, a3=angle)
@settings(max_examples=200)
def test_busemann_cocycle(a, r1, a1, r2, a2, r3, a3):
    xi = circle(a)
    x, y, z = disk(r1, a1), disk(r2, a2), disk(r3, a3)
    assert abs(busemann(xi, x, z) - busemann(xi, x, y) - busemann(xi, y, z)) < 1e-8


@given(a=angle, r1=st.floats(0, 0.8), a1=angle, r2=st.floats(0, 0.8), a2=angle)
@settings(max_examples=100)
def test_busemann_ray_limit(a, r1, a1, r2, a2):
    xi = circle(a)
    x, y = disk(r1, a1), disk(r2, a2)
    assert abs(busemann(xi, x, y) - busemann_ray_limit(xi, x, y, 30.0)) < 1e-6


def test_busemann_along_ray():
    xi = circle(0.3)
    o = basepoint(2)
    assert np.isclose(busemann(xi, o, ray_point(o, xi, 2.5)), 2.5)


@given(a=angle, b=angle, r=inner, c=angle)
@settings(max_examples=200)
def test_gromov_identities(a, b, r, c):
    if abs(np.sin((a - b) / 2)) < 1e-3:
        return
    xi, eta, o = circle(a), circle(b), basepoint(2)
    d = gromov_distance(o, xi, eta)
    # at the centre of the disk the visual distance is half the chord
    assert abs(d - abs(np.sin((a - b) / 2))) < 1e-8
    assert abs(d - gromov_distance_closed(o, xi, eta)) < 1e-10
    x = disk(r, c)
    dx = gromov_distance(x, xi, eta)
    lip = np.exp(2 * np.arctanh(r))
    assert dx <= lip * d * (1 + 1e-9) and d <= lip * dx * (1 + 1e-9)


def test_normalize_null_rejects_past():
    with pytest.raises(InvalidArgument):
        normalize_null(-circle(0.2))


def test_frame_from_endpoints_roundtrip():
    xp, xm = circle(0.2), circle(2.5)
    g = frame_from_endpoints(xp, xm, s=0.7)
    assert lorentz_residual(g) < 1e-12
    gp, gm, s = hopf_coordinates(g)
    assert np.allclose(gp, xp) and np.allclose(gm, xm) and np.isclose(s, 0.7)
    with pytest.raises(InvalidArgument):
        frame_from_endpoints(xp, xp)


def test_horocycles_fix_one_endpoint():
    g = frame_from_endpoints(circle(0.2), circle(2.5), 0.3)
    u, v = make_u([0.8]) @ g, make_v([0.8]) @ g
    assert np.allclose(endpoints(u)[1], endpoints(g)[1])
    assert not np.allclose(endpoints(u)[0], endpoints(g)[0])
    assert np.allclose(endpoints(v)[0], endpoints(g)[0])
    assert np.allclose(horosphere_projection(g, np.array([[0.8]]))[0], endpoints(u)[0])


@given(t=st.floats(-20, 20))
def test_horosphere_chart_inverse(t):
    g = frame_from_endpoints(circle(1.0), circle(4.0), -0.4)
    xi = horosphere_projection(g, np.array([[t]]))
    t2, z0 = horosphere_coordinates(g, xi)
    assert abs(t2[0, 0] - t) < 1e-8 * max(1, t * t)
    _, zm = horosphere_coordinates(g, endpoints(g)[1])
    assert abs(zm[0]) < 1e-12


def test_flow_moves_along_geodesic():
    g = frame_from_endpoints(circle(1.0), circle(4.0), 0.0)
    d = hyp_distance(frame_basepoint(g), frame_basepoint(make_flow(1.3) @ g))
    assert np.isclose(d, 1.3)


def test_reorthonormalize_repairs_drift(rng):
    g = frame_from_endpoints(circle(1.0), circle(4.0), 0.5)
    noisy = g + 1e-9 * rng.normal(size=g.shape)
    fixed = reorthonormalize(noisy)
    assert lorentz_residual(noisy) > 1e-10
    assert lorentz_residual(fixed) < 1e-13
    assert np.max(np.abs(fixed - g)) < 1e-7
