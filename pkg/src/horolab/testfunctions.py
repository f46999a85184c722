"""Smooth bump functions in admissible-box coordinates.

A frame ``w`` near ``x0`` is written ``w = u_t a_sigma v_r m x0``; the bump
is a tensor product of ``b(u) = (1 - u^2)^(l+1)`` profiles in ``t / eta_u``,
``sigma / eta_p``, ``r / eta_p`` and (for ``n = 3``) the rotation angle of
``m`` over ``eta_p``.  ``b`` is ``C^l`` across the boundary of its support.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.polynomial import Polynomial

from horolab.boundary import basepoint, busemann, endpoints, null_to_sphere
from horolab.errors import InvalidArgument, InvalidBox
from horolab.lorentz import (
    decompose_PU_stack,
    lorentz_inverse,
    make_flow,
    make_rotation,
    make_u,
    make_v,
    pairing,
    u_stack,
)


def bump_polynomial(smoothness: int) -> Polynomial:
    return Polynomial([1.0, 0.0, -1.0]) ** (smoothness + 1)


def bump(u, smoothness: int) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    base = np.clip(1 - u * u, 0, None)
    # integer power by squaring; much faster than a float pow on large arrays
    out, k = np.ones_like(base), smoothness + 1
    while k:
        if k & 1:
            out = out * base
        base = base * base
        k >>= 1
    return out


def derivative_sup(smoothness: int, order: int) -> float:
    """Exact ``max |b^(order)|`` on ``[-1, 1]``."""
    p = bump_polynomial(smoothness).deriv(order) if order else bump_polynomial(smoothness)
    crit = p.deriv().roots() if p.degree() > 0 else np.array([])
    crit = np.real(crit[np.abs(np.imag(crit)) < 1e-12])
    pts = np.concatenate([[-1.0, 0.0, 1.0], crit[np.abs(crit) <= 1]])
    return float(np.max(np.abs(p(pts))))


def bump_integral(smoothness: int) -> float:
    anti = bump_polynomial(smoothness).integ()
    return float(anti(1.0) - anti(-1.0))


def rotation_angle(R) -> np.ndarray:
    R = np.asarray(R)
    return np.arctan2(R[..., 1, 0], R[..., 0, 0])


def rotation_matrix(theta, n: int) -> np.ndarray:
    """Element of M rotating the first two middle coordinates (identity for ``n = 2``)."""
    m = np.eye(n - 1)
    if n >= 3:
        m[:2, :2] = [[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]]
    return make_rotation(m)


@dataclass(frozen=True)
class BoxCoordinates:
    t: np.ndarray
    sigma: np.ndarray
    r: np.ndarray
    angle: np.ndarray
    ok: np.ndarray


@dataclass(frozen=True)
class TestFunction:
    """Bump ``psi`` supported in the box ``B_U(eta_u) P_{eta_p} frame``."""

    frame: np.ndarray
    eta_u: float
    eta_p: float
    smoothness: int = 3
    peak: float = 1.0
    sobolev_bound: float = field(init=False)

    def __post_init__(self):
        if self.frame.shape[0] not in (3, 4):
            raise InvalidArgument("test functions are implemented for n = 2 and n = 3")
        if not (0 < self.eta_u and 0 < self.eta_p < np.pi):
            raise InvalidBox("box sizes must be positive")
        object.__setattr__(self, "sobolev_bound", self._sobolev())

    @property
    def dim(self) -> int:
        return self.frame.shape[0] - 1

    @property
    def scales(self) -> list:
        n = self.dim
        return [self.eta_u] * (n - 1) + [self.eta_p] * n + ([self.eta_p] if n == 3 else [])

    def _sobolev(self) -> float:
        """``sum_{|alpha| <= l} sup |d^alpha psi|`` in box coordinates."""
        sups = [derivative_sup(self.smoothness, k) for k in range(self.smoothness + 1)]
        total = 0.0
        scales = self.scales
        for alpha in itertools.product(range(self.smoothness + 1), repeat=len(scales)):
            if sum(alpha) <= self.smoothness:
                total += np.prod([sups[a] * h ** (-a) for a, h in zip(alpha, scales)])
        return float(self.peak * total)

    def coordinates(self, frames) -> BoxCoordinates:
        """Box coordinates of frames ``w = u_t a_sigma v_r m frame`` (stack of ``(n+1, n+1)``)."""
        W = np.asarray(frames, dtype=float)
        n = self.dim
        M = self.frame @ lorentz_inverse(W)
        _, _, _, tp = decompose_PU_stack(M)
        ok = np.isfinite(tp).all(axis=1)
        tp = np.where(ok[:, None], tp, 0.0)
        p = lorentz_inverse(M @ u_stack(-tp))
        with np.errstate(divide="ignore", invalid="ignore"):
            sigma = np.log(np.where(p[:, 0, 0] > 0, p[:, 0, 0], np.nan))
        ok &= np.isfinite(sigma)
        angle = rotation_angle(p[:, 1:n, 1:n]) if n == 3 else np.zeros(len(W))
        return BoxCoordinates(-tp, sigma, p[:, 1:n, 0], angle, ok)

    def profile(self, t, sigma, r, angle=0.0) -> np.ndarray:
        l = self.smoothness
        val = np.prod(bump(np.asarray(t) / self.eta_u, l), axis=-1)
        val = val * bump(np.asarray(sigma) / self.eta_p, l)
        val = val * np.prod(bump(np.asarray(r) / self.eta_p, l), axis=-1)
        if self.dim == 3:
            val = val * bump(np.asarray(angle) / self.eta_p, l)
        return self.peak * val

    def lift(self, frames) -> np.ndarray:
        """``psi`` as a function on G (zero outside the box around ``frame``)."""
        c = self.coordinates(frames)
        out = np.zeros(len(c.ok))
        idx = np.nonzero(c.ok)[0]
        out[idx] = self.profile(c.t[idx], c.sigma[idx], c.r[idx], c.angle[idx])
        return out

    def box_frame(self, t, sigma, r, angle=0.0) -> np.ndarray:
        n = self.dim
        return (make_u(np.atleast_1d(t)) @ make_flow(sigma, n) @ make_v(np.atleast_1d(r))
                @ rotation_matrix(angle, n) @ self.frame)

    @cached_property
    def box_sample(self) -> np.ndarray:
        """Frames on a grid covering the closed box (corners included)."""
        n = self.dim
        ticks_u = np.linspace(-self.eta_u, self.eta_u, 5)
        ticks_p = np.linspace(-self.eta_p, self.eta_p, 5)
        axes = [ticks_u] * (n - 1) + [ticks_p] * n + ([ticks_p] if n == 3 else [])
        frames = []
        for v in itertools.product(*axes):
            t = np.array(v[: n - 1])
            sigma = v[n - 1]
            r = np.array(v[n : 2 * n - 1])
            angle = v[2 * n - 1] if n == 3 else 0.0
            frames.append(self.box_frame(t, sigma, r, angle))
        return np.array(frames)

    @cached_property
    def radius(self) -> float:
        """Largest distance from the centre basepoint to a box basepoint."""
        o = basepoint(self.dim)
        c = np.maximum(-pairing(o @ self.frame, o @ self.box_sample), 1.0)
        return float(np.max(np.log(c + np.sqrt(c * c - 1))))

    @cached_property
    def hopf_region(self):
        """Caps around ``frame^+`` and ``frame^-`` and an ``s``-interval containing every box frame.

        Returns ``(center_plus, angle_plus, center_minus, angle_minus, s_lo, s_hi)``
        with ball-model centres; generous margins because the grid only samples the box.
        """
        gp, gm = endpoints(self.box_sample)
        cp, cm = endpoints(self.frame)
        dp, dm = null_to_sphere(gp), null_to_sphere(gm)
        up, um = null_to_sphere(cp), null_to_sphere(cm)
        ang_p = np.arccos(np.clip(dp @ up, -1, 1)).max()
        ang_m = np.arccos(np.clip(dm @ um, -1, 1)).max()
        o = basepoint(self.dim)
        s = busemann(gm, o, o @ self.box_sample)
        pad = 0.25 * (s.max() - s.min()) + 0.05
        return (up, min(np.pi, 1.5 * ang_p + 0.02), um, min(np.pi, 1.5 * ang_m + 0.02),
                float(s.min() - pad), float(s.max() + pad))


def make_bump(frame, eta_u: float, eta_p: float, smoothness: int = 3, peak: float = 1.0,
              group=None) -> TestFunction:
    """Build a bump and, given a group, check that its box embeds in the quotient.

    The box is admissible when no non-trivial translate of the centre
    basepoint by words of length at most 3 comes within twice the box radius.
    """
    psi = TestFunction(np.asarray(frame, dtype=float), float(eta_u), float(eta_p), int(smoothness), float(peak))
    if group is not None:
        o = basepoint(psi.dim)
        x = o @ psi.frame
        for k in range(1, 4):
            pts = x @ group.shell(k)[1]
            c = np.maximum(-pairing(x, pts), 1.0)
            if np.min(np.log(c + np.sqrt(c * c - 1))) <= 2 * psi.radius:
                raise InvalidBox("box is not injective: it overlaps one of its translates")
    return psi


class QuotientFunction:
    """A test function evaluated on ``G / Gamma``: fold, then try the nearby translates."""

    def __init__(self, psi: TestFunction, group, neighbours: int = 2):
        self.psi = psi
        self.group = group
        mats = [group.shell(k)[1] for k in range(neighbours + 1)]
        self.translates = np.concatenate(mats)
        o = basepoint(psi.dim)
        self._centre = o @ psi.frame
        self._reach = np.cosh(psi.radius + 1e-6)

    def __call__(self, frames) -> np.ndarray:
        reduced, _ = self.group.reduce(np.asarray(frames, dtype=float))
        return self.evaluate_reduced(reduced)

    def evaluate_reduced(self, reduced) -> np.ndarray:
        out = np.zeros(len(reduced))
        base = basepoint(self.psi.dim) @ reduced
        for g in self.translates:
            near = -pairing(base @ g, self._centre) <= self._reach
            if near.any():
                idx = np.nonzero(near)[0]
                out[idx] += self.psi.lift(reduced[idx] @ g)
        return out


class BumpSum:
    """A finite sum of bumps, each in its own admissible box, evaluated on the quotient."""

    def __init__(self, bumps, group, neighbours: int = 2):
        self.bumps = list(bumps)
        self.parts = [QuotientFunction(b, group, neighbours) for b in self.bumps]

    def __len__(self):
        return len(self.bumps)

    @property
    def sobolev_bound(self) -> float:
        return float(sum(b.sobolev_bound for b in self.bumps))

    def __call__(self, frames) -> np.ndarray:
        frames = np.asarray(frames, dtype=float)
        reduced, _ = self.parts[0].group.reduce(frames)
        out = np.zeros(len(frames))
        for q in self.parts:
            out += q.evaluate_reduced(reduced)
        return out


def scatter_bumps(group, frames, weights, count: int, eta_u: float, eta_p: float, smoothness: int = 3,
                  separation: float = 0.0, seed: int = 0):
    """Pick up to ``count`` admissible box centres from weighted candidate frames.

    Candidates are drawn in proportion to ``weights`` and kept when their
    box is admissible and their basepoint is at least ``separation`` away
    from the centres already chosen.
    """
    rng = np.random.default_rng(seed)
    p = np.asarray(weights, dtype=float)
    order = rng.choice(len(p), size=len(p), replace=False, p=p / p.sum())
    o = basepoint(np.shape(frames)[-1] - 1)
    chosen, centres = [], []
    for i in order:
        if len(chosen) == count:
            break
        x = o @ frames[i]
        if centres and np.min(np.arccosh(np.maximum(-pairing(x, np.array(centres)), 1.0))) < separation:
            continue
        try:
            chosen.append(make_bump(frames[i], eta_u, eta_p, smoothness, group=group))
        except InvalidBox:
            continue
        centres.append(x)
    return chosen
