"""Hyperbolic space, its boundary, and the horospherical projection.

Points of H^n are row vectors ``x`` with ``<x, x> = -1`` and ``x_0 + x_n > 0``.
Boundary points are future null rays, normalised so that ``-<o, xi> = 1``
for the basepoint ``o``; in the ball model this is the unit vector
``X / T`` of standard coordinates.

A frame ``g`` in G has basepoint ``o g`` and endpoints ``g^+ = e_0 g`` and
``g^- = e_n g``.  Left multiplication by ``a_s`` is the geodesic flow and
left multiplication by ``u_t`` moves along the unstable horosphere, which
keeps ``g^-`` fixed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from horolab.errors import InvalidArgument
from horolab.lorentz import lorentz_inverse, pairing

SHEET_TOL = 1e-8
SQRT2 = np.sqrt(2.0)


def basepoint(n: int) -> np.ndarray:
    o = np.zeros(n + 1)
    o[0] = o[n] = 1.0 / SQRT2
    return o


def to_standard(x) -> np.ndarray:
    """Light-cone coordinates to standard Minkowski ``(T, X_1, ..., X_n)``."""
    x = np.asarray(x, dtype=float)
    out = x.copy()
    out[..., 0] = (x[..., 0] + x[..., -1]) / SQRT2
    out[..., 1] = (x[..., 0] - x[..., -1]) / SQRT2
    out[..., 2:] = x[..., 1:-1]
    return out


def from_standard(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    out = np.empty_like(X)
    out[..., 0] = (X[..., 0] + X[..., 1]) / SQRT2
    out[..., -1] = (X[..., 0] - X[..., 1]) / SQRT2
    out[..., 1:-1] = X[..., 2:]
    return out


def standard_change_of_basis(n: int) -> np.ndarray:
    """Matrix ``C`` with ``to_standard(x) == x @ C``."""
    return to_standard(np.eye(n + 1))


def standard_to_group(H: np.ndarray) -> np.ndarray:
    """Convert a left-acting matrix in standard coordinates to this package's convention.

    ``H`` acts on standard column vectors.  The returned ``g`` satisfies
    ``to_standard(x @ g) == H @ to_standard(x)``.
    """
    n = H.shape[-1] - 1
    C = standard_change_of_basis(n)
    return C @ np.swapaxes(H, -1, -2) @ np.linalg.inv(C)


# -- interior points ---------------------------------------------------------


def sheet_residual(x) -> np.ndarray:
    return np.abs(pairing(x, x) + 1.0)


def check_on_sheet(x, tol=SHEET_TOL):
    x = np.asarray(x, dtype=float)
    scale = np.maximum(1.0, np.max(np.abs(x), axis=-1) ** 2)
    if np.any(sheet_residual(x) > tol * scale) or np.any(x[..., 0] + x[..., -1] <= 0):
        raise InvalidArgument("point is not on the upper sheet of the hyperboloid")
    return x


def ball_to_lorentz(y) -> np.ndarray:
    """Poincare ball point(s) to hyperboloid row vectors."""
    y = np.asarray(y, dtype=float)
    r2 = np.sum(y * y, axis=-1)
    if np.any(r2 >= 1.0):
        raise InvalidArgument("ball point must lie in the open unit ball")
    X = np.concatenate([((1 + r2) / (1 - r2))[..., None], 2 * y / (1 - r2)[..., None]], axis=-1)
    return from_standard(X)


def lorentz_to_ball(x) -> np.ndarray:
    X = to_standard(x)
    return X[..., 1:] / (1.0 + X[..., :1])


def _arccosh_pairing(c):
    # arccosh(c) for c >= 1, tolerant of round-off just below 1
    c = np.maximum(c, 1.0)
    return np.log(c + np.sqrt(c * c - 1.0))


def hyp_distance(x, y, check: bool = True):
    """Hyperbolic distance ``arccosh(-<x, y>)`` on stacks of points."""
    if check:
        check_on_sheet(x)
        check_on_sheet(y)
    return _arccosh_pairing(-pairing(x, y))


# -- boundary ---------------------------------------------------------------


def normalize_null(xi) -> np.ndarray:
    """Rescale null vector(s) so that ``-<o, xi> = 1``."""
    xi = np.asarray(xi, dtype=float)
    scale = (xi[..., 0] + xi[..., -1]) / SQRT2
    if np.any(scale <= 0):
        raise InvalidArgument("null vector is not future-pointing")
    return xi / scale[..., None]


def sphere_to_null(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    ones = np.ones(theta.shape[:-1] + (1,))
    return from_standard(np.concatenate([ones, theta], axis=-1))


def null_to_sphere(xi) -> np.ndarray:
    X = to_standard(xi)
    return X[..., 1:] / X[..., :1]


def busemann(xi, x, y):
    """Busemann cocycle ``beta_xi(x, y) = log(<x, xi> / <y, xi>)``.

    Positive when ``y`` is closer to ``xi`` than ``x``.  Broadcasts over stacks.
    """
    px = pairing(x, xi)
    py = pairing(y, xi)
    if np.any(px >= 0) or np.any(py >= 0):
        raise InvalidArgument("degenerate null vector for Busemann function")
    return np.log(px / py)


def ray_point(x, xi, t):
    """Point at distance ``t`` from ``x`` on the geodesic ray toward ``xi``."""
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    c = np.asarray(-pairing(x, xi))[..., None]
    t = np.asarray(t, dtype=float)[..., None]
    return np.cosh(t) * x + np.sinh(t) * (xi / c - x)


def busemann_ray_limit(xi, x, y, t: float = 30.0, origin=None):
    """Truncated form of the defining limit ``d(x, xi_t) - d(y, xi_t)``.

    Test oracle only; the ray starts at ``origin`` (the basepoint by default).
    """
    x = np.asarray(x, dtype=float)
    if origin is None:
        origin = basepoint(x.shape[-1] - 1)
    p = ray_point(origin, xi, t)
    return _arccosh_pairing(-pairing(x, p)) - _arccosh_pairing(-pairing(y, p))


def geodesic_point(xi, eta, x=None):
    """A point on the geodesic joining boundary points ``xi`` and ``eta``.

    With ``x=None`` the symmetric ("midpoint") combination of the
    basepoint-normalised null vectors is used; otherwise the orthogonal
    projection of ``x`` onto the geodesic.
    """
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if x is not None:
        xi, eta = xi * -pairing(x, eta)[..., None], eta * -pairing(x, xi)[..., None]
    q = -2.0 * pairing(xi, eta)
    if np.any(q <= 1e-300):
        raise InvalidArgument("boundary points coincide")
    return (xi + eta) / np.sqrt(q)[..., None]


def gromov_distance(x, xi, eta, y=None):
    """Visual distance ``exp(-beta_xi(x,y)/2 - beta_eta(x,y)/2)``.

    ``y`` is any point of the geodesic from ``xi`` to ``eta``; the value
    does not depend on that choice.
    """
    if y is None:
        y = geodesic_point(xi, eta)
    return np.exp(-0.5 * busemann(xi, x, y) - 0.5 * busemann(eta, x, y))


def gromov_distance_closed(x, xi, eta):
    """Closed form ``sqrt(-<xi,eta> / (2 <x,xi><x,eta>) )`` used as a cross-check."""
    return np.sqrt(-pairing(xi, eta) / (2.0 * pairing(x, xi) * pairing(x, eta)))


# -- frames ------------------------------------------------------------------


def frame_basepoint(g) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    return basepoint(g.shape[-1] - 1) @ g


def endpoints(g):
    """Forward and backward endpoints ``(e_0 g, e_n g)`` as normalised null vectors."""
    g = np.asarray(g, dtype=float)
    return normalize_null(g[..., 0, :]), normalize_null(g[..., -1, :])


def horosphere_projection(g, t):
    """``(u_t g)^+``: the forward endpoint after moving along the horosphere."""
    t = np.asarray(t, dtype=float)
    ones = np.ones(t.shape[:-1] + (1,))
    row = np.concatenate([ones, t, 0.5 * np.sum(t * t, axis=-1, keepdims=True)], axis=-1)
    return normalize_null(row @ np.asarray(g, dtype=float))


def horosphere_coordinates(g, xi):
    """Invert :func:`horosphere_projection`: the ``t`` with ``(u_t g)^+ ~ xi``.

    Returns ``(t, zeta0)`` where ``zeta0 = (xi g^{-1})_0``; ``zeta0 == 0``
    exactly when ``xi`` is the backward endpoint ``g^-`` and the chart is
    undefined there (``t`` is then NaN).
    """
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    zeta = xi @ lorentz_inverse(g)
    z0 = zeta[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = zeta[:, 1:-1] / z0[:, None]
    t[z0 <= 0] = np.nan
    return t, z0


def contracting_coordinates(g, xi):
    """The ``r`` with ``(v_r g)^- ~ xi``, plus ``zeta_n`` (zero at ``g^+``)."""
    xi = np.atleast_2d(np.asarray(xi, dtype=float))
    zeta = xi @ lorentz_inverse(g)
    zn = zeta[:, -1]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = zeta[:, 1:-1] / zn[:, None]
    r[zn <= 0] = np.nan
    return r, zn


def frame_from_endpoints(xi_plus, xi_minus, s: float = 0.0, rotation=None, middle=None) -> np.ndarray:
    """A frame ``g`` with ``g^+ = xi_plus``, ``g^- = xi_minus`` and ``beta_{g^-}(o, o g) = s``.

    The middle rows are an orthonormal basis of the spacelike complement,
    built by Gram-Schmidt from ``middle`` (default: standard basis vectors)
    and optionally rotated by ``rotation`` (the M-component).  Orientation
    is fixed so that ``det g = 1``.
    """
    xp = normalize_null(xi_plus)
    xm = normalize_null(xi_minus)
    n = xp.shape[-1] - 1
    c = -pairing(xp, xm)
    if c <= 1e-15:
        raise InvalidArgument("endpoints coincide")
    # rows lam*xp and mu*xm with lam*mu*c = 1; the basepoint is their sum over sqrt2,
    # so beta_{xm}(o, o g) = log(sqrt2 / (lam c))
    lam = SQRT2 * np.exp(-s) / c
    r0 = lam * xp
    rn = xm / (lam * c)
    seeds = list(np.eye(n + 1)) if middle is None else list(middle) + list(np.eye(n + 1))
    basis = []
    for e in seeds:
        v = e + pairing(e, rn) * r0 + pairing(e, r0) * rn
        for b in basis:
            v = v - pairing(v, b) * b
        q = pairing(v, v)
        if q > 1e-8:
            basis.append(v / np.sqrt(q))
        if len(basis) == n - 1:
            break
    mid = np.array(basis).reshape(n - 1, n + 1)
    if rotation is not None:
        mid = np.asarray(rotation, dtype=float) @ mid
    g = np.vstack([r0, mid, rn])
    if np.linalg.det(g) < 0:
        g[1] = -g[1]
    return g


def reorthonormalize(g) -> np.ndarray:
    """Project an approximate frame back onto the group, keeping its Hopf data and M-part."""
    g = np.asarray(g, dtype=float)
    xp = _snap_null(g[0])
    xm = _snap_null(g[-1])
    s = float(busemann(xm, basepoint(g.shape[-1] - 1), (g[0] + g[-1]) / SQRT2))
    return frame_from_endpoints(xp, xm, s, middle=g[1:-1])


def _snap_null(v):
    d = null_to_sphere(v)
    return sphere_to_null(d / np.linalg.norm(d))


def hopf_coordinates(g):
    """``(g^+, g^-, beta_{g^-}(o, o g))`` for a frame or stack of frames."""
    gp, gm = endpoints(g)
    o = basepoint(np.shape(g)[-1] - 1)
    return gp, gm, busemann(gm, o, frame_basepoint(g))


# -- value types -------------------------------------------------------------


@dataclass(frozen=True)
class HyperbolicPoint:
    lorentz: np.ndarray

    def __post_init__(self):
        x = check_on_sheet(np.asarray(self.lorentz, dtype=float))
        object.__setattr__(self, "lorentz", x)

    @classmethod
    def from_ball(cls, y) -> "HyperbolicPoint":
        return cls(ball_to_lorentz(y))

    @property
    def ball(self) -> np.ndarray:
        return lorentz_to_ball(self.lorentz)

    @property
    def dim(self) -> int:
        return self.lorentz.shape[-1] - 1


@dataclass(frozen=True)
class BoundaryPoint:
    null: np.ndarray

    def __post_init__(self):
        xi = np.asarray(self.null, dtype=float)
        if abs(pairing(xi, xi)) > 1e-10 * max(1.0, float(np.max(np.abs(xi))) ** 2):
            raise InvalidArgument("boundary representative is not null")
        object.__setattr__(self, "null", normalize_null(xi))

    @classmethod
    def from_ball(cls, theta) -> "BoundaryPoint":
        theta = np.asarray(theta, dtype=float)
        norm = np.linalg.norm(theta)
        if abs(norm - 1.0) > 1e-12:
            raise InvalidArgument("ball-model boundary point must be a unit vector")
        return cls(sphere_to_null(theta))

    @property
    def ball(self) -> np.ndarray:
        return null_to_sphere(self.null)


def model_convert(x, source: str):
    """Convert between the ball model and the Lorentz model.

    ``source="ball"``: an ``n``-vector in the closed unit ball; unit vectors
    are boundary points and come back as normalised null vectors.
    ``source="lorentz"``: an ``(n+1)``-vector on the upper sheet or on the
    future light cone.
    """
    x = np.asarray(x, dtype=float)
    if source == "ball":
        norm = np.linalg.norm(x, axis=-1)
        if np.all(np.abs(norm - 1.0) <= 1e-12):
            return sphere_to_null(x / norm[..., None])
        return ball_to_lorentz(x)
    if source == "lorentz":
        q = pairing(x, x)
        scale = np.max(np.abs(x), axis=-1) ** 2
        if np.all(np.abs(q) <= 1e-12 * scale):
            return null_to_sphere(normalize_null(x))
        return lorentz_to_ball(check_on_sheet(x))
    raise InvalidArgument(f"unknown model {source!r}")
