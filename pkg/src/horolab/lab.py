"""Window averages, translate integrals, mixing correlations and sublevel tests.

Functions on the quotient are passed as callables on stacks of frames (for
example :class:`~horolab.testfunctions.QuotientFunction`); functions on the
horosphere take an ``(N, n-1)`` array of coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from horolab.boundary import frame_basepoint
from horolab.densities import PS, LeafMeasure, PattersonDensity, conjugate_leaf, leaf_measure
from horolab.errors import EmptyMeasure, InvalidArgument
from horolab.friendliness import _linfit
from horolab.global_measures import BMS, global_sampler
from horolab.lorentz import flow_left, u_stack
from horolab.schottky import CoreApproximation, SchottkyGroup, distance_to_core
from horolab.testfunctions import BumpSum, QuotientFunction

HAAR = "Haar"
CHUNK = 20_000


def orbit_frames(x, t) -> np.ndarray:
    """``u_t x`` for a stack of ``t``."""
    return u_stack(np.asarray(t, dtype=float)) @ np.asarray(x, dtype=float)


def _evaluate(psi, frames) -> np.ndarray:
    out = np.empty(len(frames))
    for i in range(0, len(frames), CHUNK):
        out[i : i + CHUNK] = psi(frames[i : i + CHUNK])
    return out


def _grid(T: float, h: float, dim: int) -> tuple[np.ndarray, float]:
    k = max(int(np.ceil(2 * T / h)), 1)
    ax = -T + (np.arange(k) + 0.5) * (2 * T / k)
    pts = np.stack(np.meshgrid(*([ax] * (dim - 1)), indexing="ij"), axis=-1).reshape(-1, dim - 1)
    return pts, (2 * T / k) ** (dim - 1)


def _haar_integral(x, T: float, psi, h: float, weight=None, s: float = 0.0):
    """Midpoint rule for ``int_{B_U(T)} psi(a_s u_t x) weight(t) dt`` with a step-doubling error."""
    dim = np.shape(x)[0] - 1
    vals = []
    for step in (h, 2 * h):
        pts, cell = _grid(T, step, dim)
        frames = orbit_frames(x, pts)
        if s:
            frames = flow_left(s, frames)
        f = _evaluate(psi, frames)
        if weight is not None:
            f = f * weight(pts)
        vals.append(float(f.sum() * cell))
    return vals[0], abs(vals[0] - vals[1]) / 3


def window_average(kind: str, x, T: float, psi, density: PattersonDensity, resolution: float = 0.01):
    """PS or Haar average of ``psi`` along ``u_t x`` over ``B_U(T)``, normalised by PS mass.

    Returns ``(value, error)``: the PS kind is an exact sum over atoms
    (error 0); the Haar kind reports a step-doubling quadrature error.
    """
    leaf = leaf_measure(PS, x, T, density)
    mass = leaf.total()
    if mass <= 0:
        raise EmptyMeasure("the window carries no PS mass")
    if kind == PS:
        vals = _evaluate(psi, orbit_frames(x, leaf.points))
        return float(vals @ leaf.masses / mass), 0.0
    if kind == HAAR:
        val, err = _haar_integral(x, T, psi, resolution)
        return val / mass, err / mass
    raise InvalidArgument(f"unknown window kind {kind!r}")


def translate_integral(kind: str, x, s: float, f, psi, density: PattersonDensity, r: float,
                       resolution: float | None = None):
    """``int psi(a_s u_t x) f(t) dmu_x(t)`` (PS) or ``e^{(n-1-delta)s} int psi(a_s u_t x) f(t) dt`` (Haar).

    ``f`` is supported in ``B_U(r)`` with ``r < 1``.  The Haar grid step
    defaults to a twentieth of the ``t``-width of one pass through the box.
    Returns ``(value, error)``.
    """
    if not 0 < r < 1:
        raise InvalidArgument("the horospherical test function must live in B_U(r) with r < 1")
    if kind == PS:
        leaf = leaf_measure(PS, x, r, density)
        frames = flow_left(s, orbit_frames(x, leaf.points))
        vals = _evaluate(psi, frames) * f(leaf.points)
        return float(vals @ leaf.masses), 0.0
    if kind == HAAR:
        n = np.shape(x)[0] - 1
        if resolution is None:
            width = getattr(getattr(psi, "psi", psi), "eta_u", 0.3)
            resolution = min(0.01, 0.1 * width * np.exp(-s))
        val, err = _haar_integral(x, r, psi, resolution, weight=f, s=s)
        pre = np.exp((n - 1 - density.exponent) * s)
        return pre * val, pre * err
    raise InvalidArgument(f"unknown translate kind {kind!r}")


def leaf_integral(f, x, r: float, density: PattersonDensity) -> float:
    """``mu^PS_x(f)`` for ``f`` supported in ``B_U(r)``."""
    return leaf_measure(PS, x, r, density).integrate(f)


def flow_conjugation_residual(x, T: float, s: float, psi, density: PattersonDensity) -> float:
    """Compare the PS window average at ``x`` with the one computed on ``x0 = a_{-s} x``.

    The leaf of ``x0`` is obtained by conjugating atoms; the integrand is
    evaluated at ``a_s u_t x0``.
    """
    leaf = leaf_measure(PS, x, T, density)
    direct = _evaluate(psi, orbit_frames(x, leaf.points)) @ leaf.masses / leaf.total()
    leaf0 = conjugate_leaf(leaf, s)
    frames = flow_left(s, orbit_frames(leaf0.frame, leaf0.points))
    conj = _evaluate(psi, frames) @ leaf0.masses / leaf0.total()
    return float(abs(direct - conj) / max(abs(direct), 1e-300))


@dataclass(frozen=True)
class Correlation:
    s: np.ndarray
    value: np.ndarray
    stderr: np.ndarray
    inconclusive: bool


def _parts(phi):
    return list(phi.bumps) if isinstance(phi, BumpSum) else [phi]


def mixing_correlation(group: SchottkyGroup, density: PattersonDensity, s_grid, psi_q, phi,
                       N: int, seed: int, total: float, m_psi: float, m_phi: float) -> Correlation:
    """``int psi(a_s x) phi(x) dm(x) - m(psi) m(phi)`` for the BMS probability measure.

    ``phi`` is a bump or a :class:`BumpSum`; each of its boxes gets its own
    BMS sample (``N`` frames split evenly, seeds spawned from ``seed``) that
    is reused across ``s``.  ``psi_q`` is evaluated on the quotient.
    ``m_psi`` and ``m_phi`` are the normalised means, ``total`` the BMS mass of X.
    """
    parts = _parts(phi)
    s_grid = np.asarray(s_grid, dtype=float)
    mean = np.zeros(len(s_grid))
    var = np.zeros(len(s_grid))
    per = max(N // len(parts), 2)
    for bump_k, child in zip(parts, np.random.SeedSequence(seed).spawn(len(parts))):
        sample = global_sampler(BMS, group, density, per, int(child.generate_state(1)[0]), region=bump_k)
        base = bump_k.lift(sample.frames) * sample.weights / total
        hit = np.nonzero(base)[0]
        frames = sample.frames[hit]
        for a, s in enumerate(s_grid):
            prod = np.zeros(per)
            if len(hit):
                prod[hit] = base[hit] * _evaluate(psi_q, flow_left(s, frames))
            mean[a] += prod.mean()
            var[a] += prod.var(ddof=1) / per
    vals = mean - m_psi * m_phi
    errs = np.sqrt(var)
    return Correlation(s_grid, vals, errs, bool(np.all(errs >= np.abs(vals))))


def swapped_correlation(group, density, s_grid, psi, phi_q, N, seed, total, m_psi, m_phi) -> Correlation:
    """The same correlation estimated on ``psi``'s boxes via ``int psi(y) phi(a_{-s} y) dm(y)``."""
    res = mixing_correlation(group, density, -np.asarray(s_grid, dtype=float), phi_q, psi, N, seed,
                             total, m_phi, m_psi)
    return Correlation(-res.s, res.value, res.stderr, res.inconclusive)


def box_mean(kind: str, group: SchottkyGroup, density: PattersonDensity, phi, N: int, seed: int,
             total: float):
    """Normalised ``m(phi)`` and its standard error by per-box Hopf sampling."""
    parts = _parts(phi)
    per = max(N // len(parts), 2)
    val, var = 0.0, 0.0
    for bump_k, child in zip(parts, np.random.SeedSequence(seed).spawn(len(parts))):
        sample = global_sampler(kind, group, density, per, int(child.generate_state(1)[0]), region=bump_k)
        v, e = sample.integrate(bump_k.lift)
        val += v
        var += e * e
    return val / total, float(np.sqrt(var)) / total


@dataclass(frozen=True)
class CorrelationEnsemble:
    """Pairwise correlations ``C[a, i, j]`` of ``psi_i(a_s x)`` against ``phi_j(x)``."""

    s: np.ndarray
    value: np.ndarray
    variance: np.ndarray

    def rms(self) -> np.ndarray:
        """Root mean square over pairs, with the Monte Carlo variance subtracted."""
        ms = (self.value**2 - self.variance).mean(axis=(1, 2))
        return np.sqrt(np.maximum(ms, 0.0))

    def floor(self) -> np.ndarray:
        """Root mean square standard error over pairs."""
        return np.sqrt(self.variance.mean(axis=(1, 2)))


def correlation_ensemble(group: SchottkyGroup, density: PattersonDensity, s_grid, bumps, N: int,
                         seed: int, total: float, means) -> CorrelationEnsemble:
    """All pairwise correlations among single bumps, one BMS sample of size ``N`` per box.

    ``means`` are the normalised ``m(psi_i)``.  A flowed sample is folded
    once and every bump is evaluated on the folded frames.
    """
    s_grid = np.asarray(s_grid, dtype=float)
    quot = [QuotientFunction(b, group) for b in bumps]
    K = len(bumps)
    M = np.zeros((len(s_grid), K, K))
    V = np.zeros_like(M)
    seeds = np.random.SeedSequence(seed).spawn(K)
    for j, b in enumerate(bumps):
        sample = global_sampler(BMS, group, density, N, int(seeds[j].generate_state(1)[0]), region=b)
        base = b.lift(sample.frames) * sample.weights / total
        hit = np.nonzero(base)[0]
        for a, s in enumerate(s_grid):
            reduced, _ = group.reduce(flow_left(s, sample.frames[hit]))
            for i, q in enumerate(quot):
                prod = np.zeros(N)
                prod[hit] = base[hit] * q.evaluate_reduced(reduced)
                M[a, i, j] = prod.mean()
                V[a, i, j] = prod.var(ddof=1) / N
    means = np.asarray(means, dtype=float)
    return CorrelationEnsemble(s_grid, M - means[:, None] * means[None, :], V)


@dataclass(frozen=True)
class GoodnessFit:
    beta: float
    band: tuple
    degenerate: bool
    eps: np.ndarray
    ratios: np.ndarray


def good_function_check(leaf: LeafMeasure, f, centre, radius: float, eps_grid=None) -> GoodnessFit:
    """Sublevel masses ``mu({t in B : |f(t)| < eps}) / mu(B)`` against ``eps / ||f||_B``.

    ``||f||_B`` is the largest ``|f|`` over the atoms of ``B``.  A constant
    ``f`` gives a single jump and is reported as degenerate.
    """
    centre = np.asarray(centre, dtype=float)
    keep = np.max(np.abs(leaf.points - centre), axis=1) <= radius
    pts, ms = leaf.points[keep], leaf.masses[keep]
    if ms.sum() <= 0:
        raise EmptyMeasure("the ball carries no mass")
    vals = np.abs(np.asarray(f(pts), dtype=float))
    norm = vals.max()
    if norm == 0:
        raise InvalidArgument("f vanishes on the ball")
    eps = np.logspace(-3, -0.3, 12) if eps_grid is None else np.asarray(eps_grid, dtype=float)
    ratios = np.array([ms[vals < e * norm].sum() for e in eps]) / ms.sum()
    if np.ptp(vals) <= 1e-12 * norm:
        return GoodnessFit(float("nan"), (float("nan"), float("nan")), True, eps, ratios)
    ok = ratios > 0
    if ok.sum() < 3:
        return GoodnessFit(float("nan"), (float("nan"), float("nan")), True, eps, ratios)
    beta, _, band, _ = _linfit(np.log(eps[ok]), np.log(ratios[ok]))
    return GoodnessFit(float(beta), tuple(map(float, band)), False, eps, ratios)


def nondivergence_mass(group: SchottkyGroup, x, T: float, s: float, R: float, density: PattersonDensity,
                       core: CoreApproximation) -> float:
    """PS mass of ``B_U(T/s)`` at ``a_{-log s} x`` whose orbit points lie at distance ``>= R`` from the core.

    For convex-cocompact groups this is the trivial case of the
    nondivergence estimate: it vanishes once ``R`` exceeds the core
    diameter plus the mesh.  Cusped groups would need the height function.
    """
    return float(nondivergence_profile(group, x, T, s, [R], density, core)[0])


def nondivergence_profile(group: SchottkyGroup, x, T: float, s: float, R_grid, density: PattersonDensity,
                          core: CoreApproximation) -> np.ndarray:
    """:func:`nondivergence_mass` for every threshold in ``R_grid`` from one pass over the leaf."""
    if not s > 0:
        raise InvalidArgument("s must be positive")
    R_grid = np.asarray(R_grid, dtype=float)
    x0 = flow_left(-np.log(s), np.asarray(x, dtype=float))
    leaf = leaf_measure(PS, x0, T / s, density)
    out = np.zeros(len(R_grid))
    out[R_grid <= 0] = leaf.total()
    mid = (R_grid > 0) & (R_grid <= core.diameter + core.radius_bound)
    if mid.any():
        d = distance_to_core(group, frame_basepoint(orbit_frames(x0, leaf.points)), core)
        out[mid] = [leaf.masses[d >= r].sum() for r in R_grid[mid]]
    return out
