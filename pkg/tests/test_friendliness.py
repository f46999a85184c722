import numpy as np
import pytest

from horolab.densities import LEBESGUE
from horolab.errors import InvalidArgument
from horolab.friendliness import friendliness_report, shadow_fit


def test_lebesgue_shadow_slope():
    fit = shadow_fit(None, np.eye(3), np.logspace(0, 2, 10), kind=LEBESGUE)
    assert abs(fit.slope - 1) < 1e-12


def test_shadow_fit_ps(ctx):
    x = ctx.frames[0]
    fit = shadow_fit(ctx.density, x, np.logspace(0, 2, 25))
    assert abs(fit.slope - ctx.exponent) < 0.1
    assert fit.band[0] < fit.slope < fit.band[1]


def test_shadow_fit_errors(density):
    with pytest.raises(InvalidArgument):
        shadow_fit(density, np.eye(3), [1, 2])
    with pytest.raises(InvalidArgument):
        shadow_fit(density, np.eye(3), [-1, 1, 2])


def test_lebesgue_friendliness_controls():
    rep = friendliness_report(None, np.eye(3), np.logspace(-3, 0, 7), kind=LEBESGUE)
    assert np.allclose(rep.doubling, 2.0, rtol=0.05)
    assert abs(rep.decay_exponent - 1) < 0.1
    assert rep.boundary_ratio_exponent > 0


def test_ps_friendliness(ctx):
    rep = friendliness_report(ctx.fine_density, np.eye(3), np.logspace(-3, 0, 10), seed=4)
    assert np.all(np.isfinite(rep.doubling))
    assert rep.doubling_stability <= 2.0
    assert rep.decay_band[0] > 0
    assert rep.boundary_ratio_exponent > 0
