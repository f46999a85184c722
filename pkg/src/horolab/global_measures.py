"""BMS and Burger-Roblin measures on frames.

Both are handled in Hopf coordinates ``(w+, w-, s)`` with
``s = beta_{w-}(o, pi(w))``:

* BMS: ``d_o(w+, w-)^(-2 delta) dnu(w+) dnu(w-) ds``
* BR:  ``d_o(w+, w-)^(-2(n-1)) e^{(delta-(n-1)) s} dm_o(w+) dnu(w-) ds``

times the probability Haar measure on M.  ``m_o`` is the round measure
scaled by :func:`lebesgue_boundary_scale`, so its leaf measure is ``dt``.
Quotient integrals are normalised by the total BMS mass of one fundamental
domain, computed from the lengths of geodesic segments inside it.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from horolab.boundary import SQRT2, basepoint, normalize_null, null_to_sphere, sphere_to_null
from horolab.densities import (
    PS,
    PS_MINUS,
    PattersonDensity,
    _split_header,
    leaf_coordinates,
    lebesgue_boundary_scale,
)
from horolab.errors import EmptyMeasure, InvalidArgument
from horolab.lorentz import lorentz_inverse, pairing, u_stack
from horolab.schottky import SchottkyGroup, _form
from horolab.testfunctions import TestFunction, bump, bump_integral, rotation_matrix

BMS = "BMS"
BR = "BR"


# -- Hopf coordinates ----------------------------------------------------------


def frames_from_hopf(xi_plus, xi_minus, s, angle=None) -> np.ndarray:
    """Vectorised frames with given endpoints and Hopf time (M-part from ``angle``, n = 3)."""
    xp = normalize_null(np.atleast_2d(xi_plus))
    xm = normalize_null(np.atleast_2d(xi_minus))
    N, d = xp.shape
    n = d - 1
    c = -pairing(xp, xm)
    lam = SQRT2 * np.exp(-np.asarray(s, dtype=float)) / c
    r0 = lam[:, None] * xp
    rn = xm / (lam * c)[:, None]
    # project the standard basis onto the spacelike complement and orthonormalise
    E = np.broadcast_to(np.eye(d), (N, d, d))
    V = E + pairing(E, rn[:, None, :])[..., None] * r0[:, None, :] \
        + pairing(E, r0[:, None, :])[..., None] * rn[:, None, :]
    J = np.eye(d)
    J[0, 0] = J[-1, -1] = 0
    J[0, -1] = J[-1, 0] = -1
    gram = V @ J @ np.swapaxes(V, 1, 2)
    w, Q = np.linalg.eigh(gram)
    Q, w = Q[:, :, -(n - 1):], w[:, -(n - 1):]
    mid = np.swapaxes(Q, 1, 2) @ V / np.sqrt(w)[:, :, None]
    g = np.concatenate([r0[:, None, :], mid, rn[:, None, :]], axis=1)
    flip = np.linalg.det(g) < 0
    g[flip, 1] *= -1
    if angle is not None and n >= 3:
        g = rotation_matrix_stack(angle, n) @ g
    return g


def rotation_matrix_stack(angle, n: int) -> np.ndarray:
    angle = np.asarray(angle, dtype=float)
    out = np.broadcast_to(np.eye(n + 1), angle.shape + (n + 1, n + 1)).copy()
    c, s = np.cos(angle), np.sin(angle)
    out[..., 1, 1], out[..., 1, 2], out[..., 2, 1], out[..., 2, 2] = c, -s, s, c
    return out


def gromov_factor(xi, eta) -> np.ndarray:
    """``d_o(xi, eta)^2`` for normalised null vectors."""
    return -pairing(xi, eta) / 2


def domain_interval(group: SchottkyGroup, xi_plus, xi_minus):
    """Range of ``tau`` for which ``e^tau a + e^-tau b`` lies in the fundamental domain.

    ``a, b`` are the endpoints scaled so the curve is unit speed; ``tau``
    is then ``const - s``.  Returns ``(lo, hi)`` with ``hi <= lo`` when the
    geodesic misses the domain.
    """
    faces = _form(group.dim) @ group.normals.T
    P = normalize_null(np.atleast_2d(xi_plus)) @ faces
    Q = normalize_null(np.atleast_2d(xi_minus)) @ faces
    return _interval(P, Q)


def _interval(P, Q):
    # face k: P e^tau + Q e^-tau <= 0 (the unit-speed scale is a common positive factor)
    with np.errstate(divide="ignore", invalid="ignore"):
        upper = np.where((P > 0) & (Q <= 0), 0.5 * np.log(-Q / P), np.inf)
        lower = np.where((P <= 0) & (Q > 0), 0.5 * np.log(Q / -P), -np.inf)
    hi = upper.min(axis=-1)
    lo = lower.max(axis=-1)
    miss = ((P > 0) & (Q > 0)).any(axis=-1) | ~(hi > lo)
    return np.where(miss, 0.0, lo), np.where(miss, 0.0, hi)


def domain_length(group: SchottkyGroup, xi_plus, xi_minus) -> np.ndarray:
    lo, hi = domain_interval(group, xi_plus, xi_minus)
    return hi - lo


def bms_total_mass(group: SchottkyGroup, density: PattersonDensity, chunk: int = 512) -> float:
    """``m^BMS(X)`` as the exact double sum over atom pairs."""
    atoms, w = density.atoms, density.weights
    faces = _form(group.dim) @ group.normals.T
    F = atoms @ faces
    total = 0.0
    for i in range(0, len(atoms), chunk):
        blk = slice(i, i + chunk)
        d2 = gromov_factor(atoms[blk, None, :], atoms[None])
        lo, hi = _interval(F[blk, None, :], F[None])
        with np.errstate(divide="ignore"):
            dens = np.where(d2 > 1e-14, np.maximum(d2, 1e-300) ** (-density.exponent), 0.0)
        total += float(np.einsum("i,ij,j->", w[blk], dens * (hi - lo), w))
    return total


# -- samples -------------------------------------------------------------------


@dataclass(frozen=True)
class GlobalSample:
    """Weighted frames: ``integral psi ~ mean(weights * psi(frames))``."""

    kind: str
    frames: np.ndarray
    weights: np.ndarray
    seed: int | None = None

    def __len__(self):
        return len(self.weights)

    def integrate(self, psi):
        vals = np.asarray(psi(self.frames), dtype=float) * self.weights
        n = len(vals)
        return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(n)) if n > 1 else float("inf")

    def footpoints(self) -> np.ndarray:
        return basepoint(self.frames.shape[-1] - 1) @ self.frames

    def to_text(self) -> str:
        buf = io.StringIO()
        d = self.frames.shape[-1]
        buf.write(f"# kind: {self.kind}\n# seed: {self.seed}\n# dim: {d - 1}\n")
        cols = [f"g{i}{j}" for i in range(d) for j in range(d)] + ["weight"]
        buf.write("\t".join(cols) + "\n")
        np.savetxt(buf, np.column_stack([self.frames.reshape(len(self), -1), self.weights]),
                   fmt="%.17g", delimiter="\t")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "GlobalSample":
        meta, body = _split_header(text)
        d = int(meta["dim"]) + 1
        data = np.loadtxt(io.StringIO(body), delimiter="\t", skiprows=1, ndmin=2)
        seed = None if meta["seed"] == "None" else int(meta["seed"])
        return cls(meta["kind"], data[:, :-1].reshape(-1, d, d).copy(), data[:, -1].copy(), seed)


def cap_sample(center, angle: float, size: int, rng):
    """Uniform directions in a spherical cap; returns ``(points, fraction_of_sphere)``."""
    center = np.asarray(center, dtype=float)
    n = len(center)
    if angle >= np.pi:
        v = rng.normal(size=(size, n))
        return v / np.linalg.norm(v, axis=1, keepdims=True), 1.0
    if n == 2:
        phi = np.arctan2(center[1], center[0]) + rng.uniform(-angle, angle, size)
        return np.column_stack([np.cos(phi), np.sin(phi)]), angle / np.pi
    if n == 3:
        z = rng.uniform(np.cos(angle), 1.0, size)
        phi = rng.uniform(0, 2 * np.pi, size)
        rho = np.sqrt(1 - z * z)
        local = np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])
        # orthonormal basis with last vector = center
        q, _ = np.linalg.qr(np.column_stack([center, np.eye(3)]))
        basis = np.column_stack([q[:, 1], q[:, 2], center])
        return local @ basis.T, (1 - np.cos(angle)) / 2
    raise InvalidArgument("cap sampling is implemented for n = 2 and n = 3")


def _in_cap(xi, center, angle) -> np.ndarray:
    return null_to_sphere(xi) @ center >= np.cos(angle) - 1e-12


def _draw_atoms(density: PattersonDensity, mask, size: int, rng):
    w = np.where(mask, density.weights, 0.0)
    mass = float(w.sum())
    if mass <= 0:
        raise EmptyMeasure("no atoms in the requested region")
    idx = rng.choice(len(w), size=size, p=w / mass)
    return density.atoms[idx], mass


def global_sampler(kind: str, group: SchottkyGroup, density: PattersonDensity, N: int, seed: int,
                   region: TestFunction | None = None) -> GlobalSample:
    """Hopf-coordinate sample of ``m^BMS`` or ``m^BR``.

    Without ``region`` the BMS sample covers one fundamental domain (``s``
    uniform on the segment of each geodesic inside it), so its total weight
    estimates :func:`bms_total_mass`.  With a test function as ``region`` the
    endpoints are drawn from caps containing every frame of its box and
    ``s`` from an interval covering it; the sample then integrates functions
    supported in the box, lifted to G.
    """
    if kind not in (BMS, BR):
        raise InvalidArgument(f"unknown global measure {kind!r}")
    rng = np.random.default_rng(seed)
    n = density.dim
    delta = density.exponent
    if region is None:
        if kind == BR:
            raise InvalidArgument("the BR measure is infinite; pass a region")
        xp, mp = _draw_atoms(density, np.ones(len(density), bool), N, rng)
        xm, mm = _draw_atoms(density, np.ones(len(density), bool), N, rng)
        xp, xm = _redraw_coincident(density, xp, xm, rng)
        lo, hi = domain_interval(group, xp, xm)
        length = hi - lo
        tau = lo + rng.uniform(size=N) * length
        s = _tau0_shift(xp, xm) - tau
        weights = mp * mm * gromov_factor(xp, xm) ** (-delta) * length
    else:
        cp, ap, cm, am, s_lo, s_hi = region.hopf_region
        xm, mm = _draw_atoms(density, _in_cap(density.atoms, cm, am), N, rng)
        if kind == BMS:
            xp, mp = _draw_atoms(density, _in_cap(density.atoms, cp, ap), N, rng)
            xp, xm = _redraw_coincident(density, xp, xm, rng)
        else:
            dirs, frac = cap_sample(cp, ap, N, rng)
            xp, mp = sphere_to_null(dirs), lebesgue_boundary_scale(n) * frac
        s = rng.uniform(s_lo, s_hi, N)
        d2 = gromov_factor(xp, xm)
        if kind == BMS:
            weights = mp * mm * (s_hi - s_lo) * d2 ** (-delta)
        else:
            weights = mp * mm * (s_hi - s_lo) * d2 ** (-(n - 1)) * np.exp((delta - (n - 1)) * s)
    angle = rng.uniform(-np.pi, np.pi, N) if n == 3 else None
    frames = frames_from_hopf(xp, xm, s, angle)
    return GlobalSample(kind, frames, np.asarray(weights, dtype=float), seed)


def _tau0_shift(xp, xm) -> np.ndarray:
    """Hopf time of ``(xp + xm) / k``, the point ``tau = 0`` of the unit-speed parametrisation."""
    k = np.sqrt(2 * -pairing(xp, xm))
    return np.log(2 / k)


def _redraw_coincident(density, xp, xm, rng):
    same = gromov_factor(xp, xm) <= 1e-14
    while same.any():
        idx = rng.choice(len(density), size=int(same.sum()), p=density.weights / density.weights.sum())
        xm = xm.copy()
        xm[same] = density.atoms[idx]
        same = gromov_factor(xp, xm) <= 1e-14
    return xp, xm


# -- product structure ------------------------------------------------------------


def _gauss(eta: float, nodes: int):
    x, w = np.polynomial.legendre.leggauss(nodes)
    return eta * x, eta * w


def product_integral(kind: str, density: PattersonDensity, psi: TestFunction, nodes: int = 24,
                     angle_nodes: int = 16) -> float:
    """Unnormalised ``m(psi)`` from the product structure of the measure in box coordinates.

    BMS: ``int dm k sum_j h(r_j) m-_j sum_i w'_ij int g(sigma) f(e^sigma t'_ij) dsigma``,
    where ``(t'_ij, w'_ij)`` is the PS leaf of ``v_{r_j} m x0``.
    BR:  ``int dm k sum_j h(r_j) m-_j * int g e^{-delta sigma} dsigma * int f dt``.
    Gauss-Legendre quadrature in ``sigma`` and the rotation angle; the
    horospherical directions are summed exactly over atoms.
    """
    if kind not in (BMS, BR):
        raise InvalidArgument(f"unknown global measure {kind!r}")
    n = psi.dim
    l = psi.smoothness
    delta = density.exponent
    sig, sw = _gauss(psi.eta_p, nodes)
    g_sig = bump(sig / psi.eta_p, l)
    if n == 3:
        ang, aw = _gauss(psi.eta_p, angle_nodes)
        aw = aw * bump(ang / psi.eta_p, l) / (2 * np.pi)
    else:
        ang, aw = np.zeros(1), np.ones(1)
    total = 0.0
    for theta, weight in zip(ang, aw):
        base = rotation_matrix(theta, n) @ psi.frame
        r, mminus, _ = leaf_coordinates(density, base, PS_MINUS)
        h = np.prod(bump(r / psi.eta_p, l), axis=1)
        keep = h > 0
        if not keep.any():
            continue
        if kind == BR:
            f_int = (psi.eta_u * bump_integral(l)) ** (n - 1)
            g_int = float(np.sum(sw * g_sig * np.exp(-delta * sig)))
            total += weight * float(np.sum(h[keep] * mminus[keep])) * g_int * f_int
            continue
        inner = 0.0
        rj, hj, mj = r[keep], h[keep], mminus[keep]
        reach = psi.eta_u * np.exp(psi.eta_p)
        # forward endpoints of box frames lie in this cap
        cp, ap = psi.hopf_region[:2]
        cand = _in_cap(density.atoms, cp, ap)
        atoms, cand_w = density.atoms[cand], density.weights[cand]
        for c in range(0, len(hj), 32):
            # PS leaves of v_{r_j} m x0 for a block of j at once
            ys = _v_stack(rj[c : c + 32]) @ base
            zeta = np.einsum("ni,jik->jnk", atoms, lorentz_inverse(ys))
            z0 = zeta[..., 0]
            with np.errstate(divide="ignore", invalid="ignore"):
                t = zeta[..., 1:-1] / z0[..., None]
            near = (z0 > 1e-14 * np.abs(zeta).max(axis=-1)) & (np.max(np.abs(t), axis=-1) < reach)
            jj, ii = np.nonzero(near)
            cocycle = SQRT2 * (-pairing(density.point, atoms[ii])) / z0[jj, ii]
            w = cand_w[ii] * cocycle**delta
            f = np.prod(bump(np.exp(sig)[:, None, None] * t[jj, ii][None] / psi.eta_u, l), axis=2)
            per = (sw * g_sig) @ f * w
            inner += float(np.sum((hj[c : c + 32] * mj[c : c + 32])[jj] * per))
        total += weight * inner
    return psi.peak * total


def _v_stack(r) -> np.ndarray:
    """``v_r`` for a stack of ``r`` (the transpose of ``u_r``)."""
    return u_stack(np.asarray(r, dtype=float)).transpose(0, 2, 1)


def total_mass(group: SchottkyGroup, density: PattersonDensity, method: str = "sample",
               N: int = 1_000_000, seed: int = 0):
    """``(m^BMS(X), standard_error)``; ``method="exact"`` runs the quadratic pair sum."""
    if method == "exact":
        return bms_total_mass(group, density), 0.0
    if method != "sample":
        raise InvalidArgument(f"unknown method {method!r}")
    total, var = 0.0, 0.0
    chunks = [N // 4] * 3 + [N - 3 * (N // 4)]
    for size, child in zip(chunks, np.random.SeedSequence(seed).spawn(len(chunks))):
        w = global_sampler(BMS, group, density, size, int(child.generate_state(1)[0])).weights
        total += w.sum()
        var += size * w.var(ddof=1)
    return float(total / N), float(np.sqrt(var) / N)
