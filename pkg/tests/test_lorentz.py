import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from horolab.errors import DecompositionFailed, InvalidArgument, SingularConfiguration
from horolab.lorentz import (
    ParabolicElement,
    decompose_PU,
    decompose_PU_stack,
    flow_left,
    lorentz_form,
    lorentz_inverse,
    lorentz_residual,
    make_flow,
    make_horo,
    make_rotation,
    make_u,
    make_v,
    pairing,
    rho_flow_factor,
    rho_p,
    u_stack,
)

reals = st.floats(-3, 3, allow_nan=False)
small = st.floats(-1, 1, allow_nan=False)
vec2 = st.lists(small, min_size=2, max_size=2).map(np.array)


def test_form_shape():
    J = lorentz_form(3)
    assert J[0, 3] == J[3, 0] == -1
    assert np.allclose(J[1:3, 1:3], np.eye(2))
    with pytest.raises(InvalidArgument):
        lorentz_form(1)


def test_pairing_matches_form(rng):
    x, y = rng.normal(size=(2, 4))
    assert np.isclose(pairing(x, y), x @ lorentz_form(3) @ y)


@given(s=reals, t=small)
def test_generators_preserve_form(s, t):
    for g in (make_flow(s), make_u([t]), make_v([t])):
        assert lorentz_residual(g) < 1e-12


@given(s=reals, t=vec2)
def test_flow_conjugates_horocycles(s, t):
    a = make_flow(s, 3)
    lhs = a @ make_u(t) @ np.linalg.inv(a)
    assert np.max(np.abs(lhs - make_u(np.exp(s) * t))) < 1e-10 * np.exp(2 * abs(s))
    lhs = a @ make_v(t) @ np.linalg.inv(a)
    assert np.max(np.abs(lhs - make_v(np.exp(-s) * t))) < 1e-10 * np.exp(2 * abs(s))


@given(t1=vec2, t2=vec2)
def test_horocycles_form_groups(t1, t2):
    assert np.allclose(make_u(t1) @ make_u(t2), make_u(t1 + t2), atol=1e-12)
    assert np.allclose(make_v(t1) @ make_v(-t1), np.eye(4), atol=1e-12)


def test_rotation_commutes_with_flow():
    c, s = np.cos(0.4), np.sin(0.4)
    m = make_rotation([[c, -s], [s, c]])
    assert np.allclose(m @ make_flow(1.2, 3), make_flow(1.2, 3) @ m)
    assert lorentz_residual(m) < 1e-15


def test_make_horo_rejects_bad_input():
    with pytest.raises(InvalidArgument):
        make_horo("sideways", [0.1])
    with pytest.raises(InvalidArgument):
        make_u([np.inf])


def test_inverse_and_flow_left(rng):
    g = make_flow(0.3) @ make_u([0.7]) @ make_v([-0.4])
    assert np.allclose(lorentz_inverse(g) @ g, np.eye(3), atol=1e-13)
    assert np.allclose(flow_left(0.9, g), make_flow(0.9) @ g)
    ts = rng.normal(size=(5, 2))
    assert np.allclose(u_stack(ts)[3], make_u(ts[3]))


@given(s=st.floats(-2, 2), r=vec2, t=vec2)
@settings(max_examples=200)
def test_pu_roundtrip(s, r, t):
    g = ParabolicElement(s, r * 0.1).matrix @ make_u(t)
    p, t2 = decompose_PU(g)
    assert np.allclose(t2, t, atol=1e-10)
    assert np.allclose(p.matrix @ make_u(t2), g, atol=1e-10)


@given(s=st.floats(-0.15, 0.15), r=st.lists(st.floats(-0.1, 0.1), min_size=1, max_size=1).map(np.array),
       t=st.lists(small, min_size=1, max_size=1).map(np.array))
@settings(max_examples=300)
def test_rho_matches_factorization(s, r, t):
    p = ParabolicElement(s, r)
    p2, t2 = decompose_PU(make_u(t) @ np.linalg.inv(p.matrix))
    assert np.allclose(rho_p(p, t), t2, atol=1e-10)
    assert np.isclose(rho_flow_factor(p, t), np.exp(p2.s), atol=1e-10)


def test_rho_frozen_value():
    # frozen from decompose_PU at s=0, r=0.1, t=0.5
    p = ParabolicElement(0.0, [0.1])
    assert np.isclose(rho_p(p, [0.5])[0], 0.4875 / 0.950625, atol=1e-12)


def test_rho_singular():
    with pytest.raises(SingularConfiguration):
        rho_p(ParabolicElement(0.0, [2.0]), [1.0])


def test_decomposition_outside_cell():
    w = np.array([[0.0, 0, 1], [0, -1, 0], [1, 0, 0]])
    with pytest.raises(DecompositionFailed):
        decompose_PU(w)
    s, r, R, t = decompose_PU_stack(np.stack([w, make_u([0.2])]))
    assert np.isnan(t[0]).all() and np.allclose(t[1], 0.2)
