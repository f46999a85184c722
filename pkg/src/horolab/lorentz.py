"""Linear algebra for SO(n,1)° in light-cone coordinates.

Matrices act on row vectors from the right, so ``x @ g`` is the image of
``x`` under ``g``.  The invariant form is

    J = [[0, 0, -1], [0, I, 0], [-1, 0, 0]]

i.e. ``<x, y> = x_mid . y_mid - x_0 y_n - x_n y_0``.  This is the unique
form (up to scale) preserved by the flow ``a_s = diag(e^s, I, e^-s)`` and
by the unipotent families ``u_t`` and ``v_t = u_t^T``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from horolab.errors import DecompositionFailed, InvalidArgument, SingularConfiguration

FORM_TOL = 1e-12
IDENTITY_TOL = 1e-10

EXPANDING = "expanding"
CONTRACTING = "contracting"


def lorentz_form(n: int) -> np.ndarray:
    if n < 2:
        raise InvalidArgument(f"dimension must be >= 2, got {n}")
    J = np.eye(n + 1)
    J[0, 0] = J[n, n] = 0.0
    J[0, n] = J[n, 0] = -1.0
    return J


def pairing(x, y) -> np.ndarray:
    """Lorentz pairing of (stacks of) row vectors, broadcasting over leading axes."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    mid = np.sum(x[..., 1:-1] * y[..., 1:-1], axis=-1)
    return mid - x[..., 0] * y[..., -1] - x[..., -1] * y[..., 0]


def _check_param(t, n=None) -> np.ndarray:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if t.ndim != 1:
        raise InvalidArgument("horospherical parameter must be a vector")
    if n is not None and t.shape[0] != n - 1:
        raise InvalidArgument(f"expected a vector of length {n - 1}, got {t.shape[0]}")
    if not np.all(np.isfinite(t)):
        raise InvalidArgument("horospherical parameter must be finite")
    return t


def make_flow(s: float, n: int = 2) -> np.ndarray:
    """Return ``a_s = diag(e^s, I_{n-1}, e^-s)``."""
    if not np.isfinite(s):
        raise InvalidArgument(f"flow time must be finite, got {s}")
    d = np.ones(n + 1)
    d[0] = np.exp(s)
    d[n] = np.exp(-s)
    return np.diag(d)


def make_horo(direction: str, t) -> np.ndarray:
    """Expanding ``u_t`` or contracting ``v_t`` horospherical element.

    The dimension is inferred from ``len(t) + 1``.  The corner entry uses the
    Euclidean norm of ``t``; the sup-norm only enters through window shapes.
    """
    t = _check_param(t)
    n = t.shape[0] + 1
    g = np.eye(n + 1)
    g[0, 1:n] = t
    g[1:n, n] = t
    g[0, n] = 0.5 * float(t @ t)
    if direction == EXPANDING:
        return g
    if direction == CONTRACTING:
        return g.T.copy()
    raise InvalidArgument(f"unknown direction {direction!r}")


def make_u(t) -> np.ndarray:
    return make_horo(EXPANDING, t)


def make_v(t) -> np.ndarray:
    return make_horo(CONTRACTING, t)


def make_rotation(R) -> np.ndarray:
    """Embed ``R`` in SO(n-1) as an element of M (fixes e_0 and e_n)."""
    R = np.atleast_2d(np.asarray(R, dtype=float))
    k = R.shape[0]
    g = np.eye(k + 2)
    g[1 : k + 1, 1 : k + 1] = R
    return g


def u_stack(ts: np.ndarray) -> np.ndarray:
    """Batched ``u_t`` for an array of parameters of shape (N, n-1)."""
    ts = np.asarray(ts, dtype=float)
    N, k = ts.shape
    n = k + 1
    g = np.broadcast_to(np.eye(n + 1), (N, n + 1, n + 1)).copy()
    g[:, 0, 1:n] = ts
    g[:, 1:n, n] = ts
    g[:, 0, n] = 0.5 * np.sum(ts * ts, axis=1)
    return g


def flow_left(s, g: np.ndarray) -> np.ndarray:
    """Compute ``a_s @ g`` by row scaling; ``g`` may be a stack."""
    g = np.array(g, dtype=float, copy=True)
    s = np.asarray(s, dtype=float)
    scale = np.exp(s)[..., None] if s.ndim else np.exp(s)
    g[..., 0, :] *= scale
    g[..., -1, :] /= scale
    return g


def lorentz_residual(g) -> float:
    """Max-norm residual ``|| g J g^T - J ||`` (zero for exact elements)."""
    g = np.asarray(g, dtype=float)
    n = g.shape[-1] - 1
    J = lorentz_form(n)
    return float(np.max(np.abs(g @ J @ np.swapaxes(g, -1, -2) - J)))


def lorentz_inverse(g: np.ndarray) -> np.ndarray:
    """Exact inverse ``J g^T J`` for elements of O(J); works on stacks."""
    g = np.asarray(g, dtype=float)
    J = lorentz_form(g.shape[-1] - 1)
    return J @ np.swapaxes(g, -1, -2) @ J


def group_distance(g) -> float:
    """Distance to the identity, realised as the operator norm of ``g - I``."""
    g = np.asarray(g, dtype=float)
    return float(np.linalg.norm(g - np.eye(g.shape[-1]), ord=2))


@dataclass(frozen=True)
class ParabolicElement:
    """``p = a_s v_r m`` with ``m = diag(1, R, 1)``."""

    s: float
    r: np.ndarray
    m: np.ndarray = field(default=None)

    def __post_init__(self):
        r = _check_param(self.r)
        object.__setattr__(self, "r", r)
        if self.m is None:
            object.__setattr__(self, "m", np.eye(r.shape[0]))
        else:
            object.__setattr__(self, "m", np.atleast_2d(np.asarray(self.m, dtype=float)))

    @property
    def dim(self) -> int:
        return self.r.shape[0] + 1

    @property
    def matrix(self) -> np.ndarray:
        return make_flow(self.s, self.dim) @ make_v(self.r) @ make_rotation(self.m)

    @classmethod
    def from_matrix(cls, p: np.ndarray) -> "ParabolicElement":
        """Read (s, r, R) off a matrix in P; no membership check."""
        p = np.asarray(p, dtype=float)
        n = p.shape[0] - 1
        if p[0, 0] <= 0:
            raise DecompositionFailed("P-part has non-positive (0,0) entry")
        return cls(float(np.log(p[0, 0])), p[1:n, 0].copy(), p[1:n, 1:n].copy())


def rho_p(p: ParabolicElement, t) -> np.ndarray:
    """The chart map with ``u_t p^{-1} in P u_{rho_p(t)}`` for ``p = a_s v_r``.

    Matching the top row of ``u_t p^{-1}`` against that of ``p' u_{t'}`` gives
    ``e^{s'} t' = t - |t|^2 r / 2`` with ``e^{s'} = e^{-s}(1 - t.r + |r|^2|t|^2/4)``,
    hence ``rho_p(t) = e^s (t - |t|^2 r / 2) / (1 - t.r + |r|^2 |t|^2 / 4)``.
    """
    t = _check_param(t, p.dim)
    if not np.allclose(p.m, np.eye(p.r.shape[0]), atol=IDENTITY_TOL):
        raise InvalidArgument("rho_p is defined for p = a_s v_r (trivial M-part)")
    r = p.r
    tt = float(t @ t)
    denom = 1.0 - float(t @ r) + 0.25 * float(r @ r) * tt
    if abs(denom) < 1e-14:
        raise SingularConfiguration("u_t p^-1 leaves the P.U chart")
    return np.exp(p.s) * (t - 0.5 * tt * r) / denom


def rho_flow_factor(p: ParabolicElement, t) -> float:
    """``e^{s'} = e^{-s}(1 - t.r + |r|^2 |t|^2 / 4)``, the flow part of the P-factor."""
    t = _check_param(t, p.dim)
    r = p.r
    return float(np.exp(-p.s) * (1.0 - t @ r + 0.25 * (r @ r) * (t @ t)))


def decompose_PU(g) -> tuple[ParabolicElement, np.ndarray]:
    """Factor ``g = p u_t`` with ``p = a_s v_r m`` in P and ``u_t`` in U.

    The factorization exists exactly when ``g[0, 0] > 0`` and is then unique.
    """
    g = np.asarray(g, dtype=float)
    n = g.shape[-1] - 1
    g00 = g[0, 0]
    if not g00 > 1e-300:
        raise DecompositionFailed(f"g[0,0] = {g00:.3g}; g is outside the open cell P.U")
    t = g[0, 1:n] / g00
    p = g @ make_u(-t)
    return ParabolicElement.from_matrix(p), t


def decompose_PU_stack(g: np.ndarray):
    """Vectorised :func:`decompose_PU` returning arrays ``(s, r, R, t)``.

    Rows with ``g[0,0] <= 0`` get NaNs instead of raising.
    """
    g = np.asarray(g, dtype=float)
    n = g.shape[-1] - 1
    g00 = g[:, 0, 0]
    ok = g00 > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = g[:, 0, 1:n] / g00[:, None]
        p = g @ u_stack(-t)
        s = np.log(np.where(ok, p[:, 0, 0], np.nan))
    r = p[:, 1:n, 0]
    R = p[:, 1:n, 1:n]
    t[~ok] = np.nan
    return s, r, R, t
