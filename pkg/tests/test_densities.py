import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from horolab.boundary import basepoint, frame_from_endpoints, sphere_to_null
from horolab.densities import (
    CUMULATIVE,
    LEBESGUE,
    PS,
    PS_MINUS,
    LeafMeasure,
    conformality_residual,
    conjugate_leaf,
    cylinder_mask,
    integrate,
    lebesgue_boundary_scale,
    leaf_mass_profile,
    leaf_measure,
    patterson_density,
)
from horolab.errors import EmptyMeasure, InvalidArgument, InvalidExponent
from horolab.lorentz import flow_left, make_flow
from horolab.schottky import fixed_points


@pytest.fixture(scope="module")
def frame(group):
    plus, _ = fixed_points(group.word_matrix([0, 2, 2]))
    _, minus = fixed_points(group.word_matrix([3, 1]))
    return frame_from_endpoints(plus, minus, 0.2)


def test_density_is_probability(density, group):
    assert np.isclose(density.weights.sum(), 1.0)
    assert len(density) == 4 * 3 ** 7
    assert group.in_limit_set(density.atoms[:200]).all()


def test_density_errors(group):
    with pytest.raises(InvalidArgument):
        patterson_density(group, 0.6, 0)
    with pytest.raises(InvalidArgument):
        patterson_density(group, 0.6, 3, scheme="spiral")
    with pytest.raises(InvalidExponent):
        patterson_density(group, -1.0, 3)


def test_conformality_improves_with_length(group, ctx):
    cells = [list(w) for w in group.shell(3)[0]]
    coarse = max(conformality_residual(group, ctx.density_at(4), [a], cells) for a in range(4))
    fine = max(conformality_residual(group, ctx.density, [a], cells) for a in range(4))
    # frozen from the shell scheme at the estimated exponent
    assert 0.005 < coarse < 0.03
    assert fine < 1e-4 < coarse


def test_cumulative_scheme_is_worse(group, ctx):
    cells = [list(w) for w in group.shell(3)[0]]
    cum = patterson_density(group, ctx.exponent + 0.01, 6, scheme=CUMULATIVE)
    assert conformality_residual(group, cum, [0], cells) > 0.1


def test_cylinders_partition(group, density):
    cells = [list(w) for w in group.shell(2)[0]]
    counts = sum(cylinder_mask(group, density.atoms, c).astype(int) for c in cells)
    assert np.all(counts == 1)


@given(s=st.floats(-2, 2), T=st.floats(0.5, 10))
@settings(max_examples=25, deadline=None)
def test_leaf_scaling_under_conjugation(density, frame, s, T):
    for kind in (PS, PS_MINUS, LEBESGUE):
        leaf = leaf_measure(kind, frame, T, density, resolution=T / 20)
        conj = conjugate_leaf(leaf, s)
        if kind == LEBESGUE:
            expected = (2 * T) * np.exp(-s)
            assert abs(conj.total() - expected) < 1e-10 * expected
            continue
        direct = leaf_measure(kind, flow_left(-s, frame), conj.window, density)
        assert len(direct) == len(conj)
        assert np.allclose(direct.masses, conj.masses, rtol=1e-10, atol=0)
        assert np.allclose(direct.points, conj.points, rtol=1e-10, atol=1e-12)


def test_leaf_profile_and_shadow_growth(density, frame, ctx):
    T = np.logspace(0, 2, 9)
    prof = leaf_mass_profile(density, frame, T)
    assert np.all(np.diff(prof) >= 0)
    assert np.isclose(prof[3], leaf_measure(PS, frame, T[3], density).total())
    slope = np.polyfit(np.log(T), np.log(prof), 1)[0]
    assert abs(slope - ctx.exponent) < 0.15


def test_basepoint_change(group, density, frame):
    o2 = basepoint(2) @ make_flow(1.0)
    moved = patterson_density(group, density.exponent, density.word_cutoff, point=o2)
    scale = density.transported(o2).sum()
    T = np.array([1.0, 5.0])
    a = leaf_mass_profile(density, frame, T)
    b = leaf_mass_profile(moved, frame, T) * scale
    assert np.all(np.abs(b - a) / a < 0.02)


def test_lebesgue_leaf_and_boundary_scale():
    g = frame_from_endpoints(sphere_to_null([1.0, 0.0]), sphere_to_null([-1.0, 0.0]))
    leaf = leaf_measure(LEBESGUE, g, 2.0, resolution=0.01)
    assert np.isclose(leaf.total(), 4.0)
    assert np.isclose(leaf.integrate(lambda t: t[:, 0] ** 2), 16 / 3, rtol=1e-4)
    assert np.isclose(lebesgue_boundary_scale(2), 2 * np.pi / np.sqrt(2))
    assert integrate(leaf, lambda t: np.ones(len(t)))[1] == 0.0


def test_leaf_errors(density, frame):
    with pytest.raises(InvalidArgument):
        leaf_measure("Haar", frame, 1.0, density)
    with pytest.raises(InvalidArgument):
        leaf_measure(PS, frame, 0.0, density)
    with pytest.raises(InvalidArgument):
        leaf_measure(PS, frame, 1.0)


def test_single_atom_at_backward_endpoint(frame, density):
    from dataclasses import replace

    xm = frame[-1] / (frame[-1][0] + frame[-1][-1]) * np.sqrt(2)
    lonely = replace(density, atoms=xm[None], weights=np.ones(1))
    with pytest.raises(EmptyMeasure):
        leaf_measure(PS, frame, 1.0, lonely)


def test_leaf_text_roundtrip(density, frame):
    leaf = leaf_measure(PS, frame, 3.0, density)
    back = LeafMeasure.from_text(leaf.to_text())
    assert np.array_equal(back.points, leaf.points)
    assert np.array_equal(back.masses, leaf.masses)
    assert np.array_equal(back.frame, leaf.frame)
    assert back.kind == PS and back.window == 3.0
