import numpy as np
import pytest

from horolab.boundary import endpoints, frame_basepoint, hopf_coordinates
from horolab.densities import patterson_density
from horolab.errors import InvalidArgument
from horolab.global_measures import (
    BMS,
    BR,
    GlobalSample,
    domain_length,
    frames_from_hopf,
    global_sampler,
    product_integral,
    total_mass,
)
from horolab.lorentz import lorentz_residual
from horolab.schottky import distance_to_core


@pytest.fixture(scope="module")
def coarse(group, ctx):
    return patterson_density(group, ctx.exponent, 5)


def test_frames_from_hopf(density, rng):
    i = rng.choice(len(density), size=(50, 2))
    xp, xm = density.atoms[i[:, 0]], density.atoms[i[:, 1]]
    s = rng.uniform(-2, 2, 50)
    g = frames_from_hopf(xp, xm, s)
    # nearly coincident endpoints give frames far from o; round-off scales with |g|^2
    for h in g:
        assert lorentz_residual(h) < 1e-13 * max(1.0, np.abs(h).max() ** 2)
    gp, gm, s2 = hopf_coordinates(g)
    assert np.allclose(gp, xp) and np.allclose(gm, xm) and np.allclose(s2, s)


def test_bms_sample_lives_on_core(group, density, ctx):
    sample = global_sampler(BMS, group, density, 2000, seed=3)
    # geodesics that miss the fundamental domain carry zero weight
    assert np.all(sample.weights >= 0) and np.mean(sample.weights > 0) > 0.3
    reduced, _ = group.reduce(sample.frames[sample.weights > 0])
    d = distance_to_core(group, frame_basepoint(reduced), ctx.core)
    assert d.max() <= ctx.core.radius_bound
    gp, gm = endpoints(reduced[:100])
    assert group.in_limit_set(gp).all() and group.in_limit_set(gm).all()


def test_domain_length_positive(group, density, rng):
    i = rng.choice(len(density), size=(200, 2))
    ok = i[:, 0] != i[:, 1]
    length = domain_length(group, density.atoms[i[ok, 0]], density.atoms[i[ok, 1]])
    assert np.all(length >= 0) and np.any(length > 0)


def test_total_mass_routes_agree(group, coarse):
    exact, _ = total_mass(group, coarse, method="exact")
    est, se = total_mass(group, coarse, N=200_000, seed=11)
    assert abs(est - exact) < 4 * se
    assert se < 0.01 * exact


def test_total_mass_frozen(ctx):
    # exact pair sum for the bundled example at L = 8
    z, se = ctx.normalisation
    assert abs(z - 1.8382) < 4 * se + 1e-3


def test_sampler_is_seeded(group, density):
    a = global_sampler(BMS, group, density, 500, seed=7)
    b = global_sampler(BMS, group, density, 500, seed=7)
    c = global_sampler(BMS, group, density, 500, seed=8)
    assert np.array_equal(a.frames, b.frames) and not np.array_equal(a.frames, c.frames)


def test_sampler_errors(group, density):
    with pytest.raises(InvalidArgument):
        global_sampler(BR, group, density, 10, seed=0)
    with pytest.raises(InvalidArgument):
        global_sampler("Liouville", group, density, 10, seed=0)
    with pytest.raises(InvalidArgument):
        total_mass(group, density, method="guess")


def test_sample_text_roundtrip(group, density):
    a = global_sampler(BMS, group, density, 50, seed=5)
    b = GlobalSample.from_text(a.to_text())
    assert np.array_equal(a.frames, b.frames) and np.array_equal(a.weights, b.weights)
    assert b.kind == BMS and b.seed == 5


@pytest.mark.parametrize("kind", [BMS, BR])
def test_hopf_and_product_routes_agree(group, density, ctx, kind):
    psi = ctx.bumps[0]
    product = product_integral(kind, density, psi)
    hopf, se = global_sampler(kind, group, density, 50_000, seed=21, region=psi).integrate(psi.lift)
    assert product > 0
    assert abs(hopf - product) < 3.5 * se
