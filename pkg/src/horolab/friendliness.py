"""Shadow-lemma growth and friendliness statistics of leaf measures.

Balls are sup-norm boxes ``B_U(eta)`` in horospherical coordinates.  The
PS leaf is computed once per frame; the Lebesgue control is regridded for
every ball so that small scales are resolved.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from horolab.densities import LEBESGUE, PS, PattersonDensity, leaf_coordinates, leaf_mass_profile
from horolab.errors import InvalidArgument

MIN_BALL_ATOMS = 100
# cusp-rank corrections of the shadow lemma; always zero for convex-cocompact groups
K1 = 0
K2 = 0


@dataclass(frozen=True)
class ShadowFit:
    slope: float
    stderr: float
    band: tuple
    intercept: float
    T: np.ndarray
    masses: np.ndarray


def _linfit(x, y, level: float = 0.95):
    res = stats.linregress(x, y)
    q = stats.t.ppf(0.5 + level / 2, max(len(x) - 2, 1))
    return res.slope, res.stderr, (res.slope - q * res.stderr, res.slope + q * res.stderr), res.intercept


def shadow_fit(density: PattersonDensity | None, x, T_grid, kind: str = PS) -> ShadowFit:
    """Least-squares slope of ``log mu_x(B_U(T))`` against ``log T``.

    ``kind=LEBESGUE`` (with ``density=None``) gives the box-volume control.
    """
    T = np.asarray(T_grid, dtype=float)
    if len(T) < 3:
        raise InvalidArgument("shadow fit needs at least 3 window sizes")
    if np.any(T <= 0):
        raise InvalidArgument("window sizes must be positive")
    if kind == LEBESGUE:
        n = np.shape(x)[0] - 1
        masses = (2 * T) ** (n - 1)
    else:
        masses = leaf_mass_profile(density, x, T, kind)
    if np.any(masses <= 0):
        raise InvalidArgument("a window carries no mass; the frame is not in the support")
    slope, se, band, icept = _linfit(np.log(T), np.log(masses))
    return ShadowFit(float(slope), float(se), tuple(map(float, band)), float(icept), T, masses)


class _Leaf:
    """Ball queries on a PS leaf (fixed atoms) or on Lebesgue measure (exact or gridded)."""

    def __init__(self, density, x, kind, resolution=None):
        self.kind = kind
        self.dim = np.shape(x)[0] - 1
        self.resolution = resolution or (2000 if self.dim == 2 else 300)
        if kind == PS:
            self.points, self.masses, _ = leaf_coordinates(density, x, PS)

    def ball(self, centre, eta):
        if self.kind == PS:
            keep = np.max(np.abs(self.points - centre), axis=1) <= eta
            return self.points[keep], self.masses[keep]
        k = self.resolution
        ax = -eta + (np.arange(k) + 0.5) * (2 * eta / k)
        grid = np.stack(np.meshgrid(*([ax] * (self.dim - 1)), indexing="ij"), axis=-1)
        grid = grid.reshape(-1, self.dim - 1) + centre
        return grid, np.full(len(grid), (2 * eta / k) ** (self.dim - 1))

    def mass(self, centre, eta) -> float:
        if self.kind == PS:
            return float(self.ball(centre, eta)[1].sum())
        return float((2 * eta) ** (self.dim - 1))

    def centres(self, count, radius, rng):
        if self.kind != PS:
            return rng.uniform(-radius, radius, size=(count, self.dim - 1))
        inside = np.max(np.abs(self.points), axis=1) <= radius
        p = self.masses * inside
        idx = rng.choice(len(p), size=count, p=p / p.sum())
        return self.points[idx]


@dataclass
class FriendlinessReport:
    scales: np.ndarray
    doubling: np.ndarray
    doubling_max_ratio: float
    doubling_stability: float
    decay_exponent: float
    decay_band: tuple
    boundary_ratio_exponent: float
    boundary_band: tuple
    low_confidence: bool
    epsilons: np.ndarray = field(repr=False, default=None)
    decay_profile: np.ndarray = field(repr=False, default=None)


def _normals(dim, count, rng):
    """Coordinate directions first, then random orientations."""
    if dim == 1:
        return np.ones((count, 1))
    coord = np.eye(dim)
    rand = rng.normal(size=(max(count - dim, 0), dim))
    rand /= np.linalg.norm(rand, axis=1, keepdims=True)
    return np.concatenate([coord, rand])[:count]


def friendliness_report(density: PattersonDensity | None, x, scales, hyperplanes: int = 20,
                        centres: int = 10, k: float = 2.0, epsilons=None, ratios=None,
                        kind: str = PS, seed: int = 0, radius: float = 1.0) -> FriendlinessReport:
    """Doubling, absolute-decay and boundary-ratio statistics at the given ball sizes.

    Doubling: ``max_c mu(B(c, k eta)) / mu(B(c, eta))`` over mass-typical
    centres ``c`` in ``B_U(radius)``.  Decay: the worst relative mass of an
    ``eps*eta``-neighbourhood of a hyperplane through an atom of the ball,
    fitted as a power of ``eps``.  Boundary ratio: ``mu(B(eta + xi)) /
    mu(B(eta)) - 1`` averaged over centres and scales, fitted as a power of
    ``xi / eta``.  Slopes come with 95% bands.
    """
    scales = np.asarray(scales, dtype=float)
    eps = np.logspace(-2.5, -0.5, 9) if epsilons is None else np.asarray(epsilons, dtype=float)
    rat = np.logspace(-2, -0.3, 8) if ratios is None else np.asarray(ratios, dtype=float)
    rng = np.random.default_rng(seed)
    leaf = _Leaf(density, x, kind)
    m = leaf.dim - 1
    C = leaf.centres(centres, radius, rng)
    doubling = np.zeros(len(scales))
    decay = np.zeros((len(scales), len(eps)))
    boundary = np.zeros((len(scales), len(rat)))
    low = False
    for a, eta in enumerate(scales):
        ratios_here = []
        for c in C:
            pts, ms = leaf.ball(c, eta)
            base = ms.sum()
            if kind == PS and len(ms) < MIN_BALL_ATOMS:
                low = True
            if base <= 0:
                continue
            ratios_here.append(leaf.mass(c, k * eta) / base)
            boundary[a] += [leaf.mass(c, eta * (1 + r)) / base - 1 for r in rat]
            normals = _normals(m, hyperplanes, rng)
            anchors = pts[rng.integers(0, len(pts), hyperplanes)]
            # signed distance of each atom to each hyperplane through an anchor
            dist = np.abs((pts[None] - anchors[:, None]) @ normals[..., None])[..., 0]
            for b, e in enumerate(eps):
                worst = np.max((dist <= e * eta) @ ms) / base
                decay[a, b] = max(decay[a, b], worst)
        doubling[a] = max(ratios_here) if ratios_here else np.inf
        boundary[a] /= max(len(ratios_here), 1)
    per_decade = _decade_max(scales, doubling)
    stability = float(per_decade.max() / per_decade.min())
    prof = decay.max(axis=0)
    ok = prof > 0
    alpha, _, a_band, _ = _linfit(np.log(eps[ok]), np.log(prof[ok]))
    bprof = boundary.mean(axis=0)
    ok = bprof > 0
    beta, _, b_band, _ = _linfit(np.log(rat[ok]), np.log(bprof[ok]))
    return FriendlinessReport(scales, doubling, float(doubling.max()), stability, float(alpha),
                              tuple(map(float, a_band)), float(beta), tuple(map(float, b_band)), low,
                              eps, prof)


def _decade_max(scales, values) -> np.ndarray:
    decades = np.floor(np.log10(scales) + 1e-9)
    return np.array([values[decades == d].max() for d in np.unique(decades)])
