"""Patterson-Sullivan densities and the leaf measures they induce on horospheres.

A density is a finite list of boundary atoms with positive weights.  Leaf
measures pull those atoms back to horospherical coordinates of a frame:
an atom ``xi`` sits at the ``t`` with ``(u_t g)^+ = xi`` and carries mass

    w * exp(delta * beta_xi(y, pi(u_t g)))

where ``y`` is the point the density is attached to.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field, replace

import numpy as np

from horolab.boundary import (
    SQRT2,
    basepoint,
    busemann,
    normalize_null,
    null_to_sphere,
    sphere_to_null,
)
from horolab.errors import EmptyMeasure, InvalidArgument, InvalidExponent
from horolab.lorentz import lorentz_inverse, pairing
from horolab.schottky import SchottkyGroup

PS = "PS"
PS_MINUS = "PS-minus"
LEBESGUE = "Lebesgue"
LEAF_KINDS = (PS, PS_MINUS, LEBESGUE)

SHELL = "shell"
CUMULATIVE = "cumulative"


def ray_endpoint(y, z) -> np.ndarray:
    """Boundary endpoint of the geodesic ray from ``y`` through ``z`` (normalised null vectors)."""
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    c = -pairing(y, z)[..., None]
    tangent = z - c * y
    norm = np.sqrt(np.maximum(pairing(tangent, tangent), 0.0))[..., None]
    if np.any(norm == 0):
        raise InvalidArgument("ray direction undefined for coincident points")
    return normalize_null(y + tangent / norm)


@dataclass(frozen=True)
class PattersonDensity:
    """Atomic approximation of the conformal density attached to ``point``."""

    atoms: np.ndarray
    weights: np.ndarray
    exponent: float
    word_cutoff: int
    scheme: str = SHELL
    point: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.point is None:
            object.__setattr__(self, "point", basepoint(self.atoms.shape[1] - 1))

    @property
    def dim(self) -> int:
        return self.atoms.shape[1] - 1

    @property
    def directions(self) -> np.ndarray:
        return null_to_sphere(self.atoms)

    def __len__(self):
        return len(self.weights)

    def transported(self, x) -> np.ndarray:
        """Weights of the density at ``x``: ``w_i exp(-delta beta_xi(x, y))``."""
        return self.weights * np.exp(-self.exponent * busemann(self.atoms, x, self.point))

    def mass(self, mask=None, at=None) -> float:
        w = self.weights if at is None else self.transported(at)
        return float(w.sum() if mask is None else w[mask].sum())


def patterson_density(group: SchottkyGroup, s: float, L: int, scheme: str = SHELL,
                      point=None, estimate=None) -> PattersonDensity:
    """Orbit-sum approximation of the Patterson-Sullivan density at exponent ``s``.

    ``scheme="shell"`` uses the orbit points ``y @ w`` with ``|w| = L``;
    ``scheme="cumulative"`` uses all ``|w| <= L``.  Atoms sit at the
    endpoints of the rays from ``y`` through the orbit points, with weights
    ``exp(-s d(y, y @ w))`` normalised to total mass one.

    If a critical-exponent ``estimate`` is given, exponents more than
    0.05 + its band below it are rejected: the orbit sum would be dominated
    by the longest words.
    """
    if L < 1:
        raise InvalidArgument("word cutoff must be at least 1")
    if scheme not in (SHELL, CUMULATIVE):
        raise InvalidArgument(f"unknown scheme {scheme!r}")
    if estimate is not None and s < estimate.value - estimate.band - 0.05:
        raise InvalidExponent(f"s = {s} is far below the critical exponent {estimate.value:.4f}")
    if s <= 0:
        raise InvalidExponent("exponent must be positive")
    y = basepoint(group.dim) if point is None else np.asarray(point, dtype=float)
    lengths = [L] if scheme == SHELL else range(1, L + 1)
    pts = np.concatenate([y @ group.shell(k)[1] for k in lengths])
    c = np.maximum(-pairing(y, pts), 1.0)
    d = np.log(c + np.sqrt(c * c - 1))
    logw = -s * d
    w = np.exp(logw - logw.max())
    w /= w.sum()
    return PattersonDensity(ray_endpoint(y, pts), w, float(s), int(L), scheme, y)


def cylinder_mask(group: SchottkyGroup, xi, letters) -> np.ndarray:
    """Membership of boundary points in the cylinder ``cap(w_1) @ w_2 ... w_k``."""
    xi = np.atleast_2d(xi)
    tail = group.word_matrix(letters[1:])
    pulled = xi @ lorentz_inverse(tail)
    return pairing(pulled, group.normals[letters[0]]) > 0


def conformality_residual(group: SchottkyGroup, density: PattersonDensity, gamma_letters,
                          cells) -> float:
    """Largest relative defect of ``nu(F @ g) = int_F exp(-delta beta_xi(o g^-1, o)) dnu``.

    ``cells`` is a list of words; each names the cylinder it generates.
    """
    if not cells:
        raise InvalidArgument("no test cells given")
    g = group.word_matrix(gamma_letters)
    o = density.point
    xi, w = density.atoms, density.weights
    back = normalize_null(xi @ lorentz_inverse(g))
    factor = np.exp(-density.exponent * busemann(xi, o @ lorentz_inverse(g), o))
    worst = 0.0
    for cell in cells:
        lhs = w[cylinder_mask(group, back, cell)].sum()
        rhs = (w * factor)[cylinder_mask(group, xi, cell)].sum()
        if lhs == 0 and rhs == 0:
            raise InvalidArgument(f"cell {tuple(cell)} carries no mass")
        worst = max(worst, abs(lhs - rhs) / max(lhs, rhs))
    return float(worst)


# -- leaf measures -------------------------------------------------------------


@dataclass(frozen=True)
class LeafMeasure:
    """Atoms ``(t_j, m_j)`` of a measure on a horospherical window ``||t||_sup <= window``."""

    kind: str
    frame: np.ndarray
    window: float
    points: np.ndarray
    masses: np.ndarray
    skipped: int = 0
    exponent: float = float("nan")

    def __len__(self):
        return len(self.masses)

    def total(self, T: float | None = None) -> float:
        if T is None:
            return float(self.masses.sum())
        return float(self.masses[np.max(np.abs(self.points), axis=1) <= T].sum())

    def restrict(self, T: float) -> "LeafMeasure":
        keep = np.max(np.abs(self.points), axis=1) <= T
        return replace(self, window=float(T), points=self.points[keep], masses=self.masses[keep])

    def integrate(self, f) -> float:
        """``sum_j f(t_j) m_j`` for a callable on an ``(N, n-1)`` array."""
        if len(self.masses) == 0:
            return 0.0
        return float(np.dot(np.asarray(f(self.points), dtype=float), self.masses))

    def to_text(self) -> str:
        buf = io.StringIO()
        buf.write(f"# kind: {self.kind}\n# window: {self.window!r}\n# skipped: {self.skipped}\n")
        buf.write(f"# exponent: {self.exponent!r}\n")
        buf.write("# frame: " + " ".join(repr(float(v)) for v in self.frame.ravel()) + "\n")
        cols = [f"t{k}" for k in range(self.points.shape[1])] + ["mass"]
        buf.write("\t".join(cols) + "\n")
        np.savetxt(buf, np.column_stack([self.points, self.masses]), fmt="%.17g", delimiter="\t")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "LeafMeasure":
        meta, body = _split_header(text)
        frame = np.array([float(v) for v in meta["frame"].split()])
        size = int(round(np.sqrt(frame.size)))
        n = size - 1
        data = np.loadtxt(io.StringIO(body), delimiter="\t", skiprows=1, ndmin=2)
        data = data.reshape(-1, n)
        return cls(meta["kind"], frame.reshape(size, size), float(meta["window"]),
                   data[:, : n - 1].copy(), data[:, n - 1].copy(), int(meta["skipped"]),
                   float(meta["exponent"]))


def _split_header(text: str):
    meta = {}
    lines = text.splitlines(keepends=True)
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        key, _, value = lines[i][1:].partition(":")
        meta[key.strip()] = value.strip()
        i += 1
    return meta, "".join(lines[i:])


def leaf_coordinates(density: PattersonDensity, g, kind: str = PS):
    """Horospherical coordinates and masses of every atom relative to the frame ``g``.

    Returns ``(points, masses, skipped)`` without any window restriction.
    The chart inversion is closed form: ``zeta = xi g^{-1}`` is proportional
    to ``e_0 u_t`` (or ``e_n v_r`` for the contracting leaf).
    """
    g = np.asarray(g, dtype=float)
    zeta = density.atoms @ lorentz_inverse(g)
    lead = zeta[:, 0] if kind == PS else zeta[:, -1]
    scale = np.abs(zeta).max(axis=1)
    ok = lead > 1e-14 * scale
    zeta, lead = zeta[ok], lead[ok]
    pts = zeta[:, 1:-1] / lead[:, None]
    # beta_xi(y, pi(frame)) with <pi(frame), xi> = -lead / sqrt2
    cocycle = SQRT2 * (-pairing(density.point, density.atoms[ok])) / lead
    masses = density.weights[ok] * cocycle**density.exponent
    return pts, masses, int((~ok).sum())


def leaf_measure(kind: str, g, T: float, density: PattersonDensity | None = None,
                 resolution: float | None = None) -> LeafMeasure:
    """Discrete leaf measure on ``B_U(T)`` (or ``B_{U~}(T)`` for ``PS-minus``).

    The Lebesgue kind is midpoint quadrature with cell side at most
    ``resolution`` and total mass exactly ``(2T)^(n-1)``.
    """
    if kind not in LEAF_KINDS:
        raise InvalidArgument(f"unknown leaf kind {kind!r}")
    if not T > 0:
        raise InvalidArgument("window must be positive")
    g = np.asarray(g, dtype=float)
    n = g.shape[0] - 1
    if kind == LEBESGUE:
        h = resolution or T / 50
        k = int(np.ceil(2 * T / h))
        ax = -T + (np.arange(k) + 0.5) * (2 * T / k)
        grid = np.stack(np.meshgrid(*([ax] * (n - 1)), indexing="ij"), axis=-1).reshape(-1, n - 1)
        masses = np.full(len(grid), (2 * T / k) ** (n - 1))
        return LeafMeasure(kind, g, float(T), grid, masses, 0, float(n - 1))
    if density is None:
        raise InvalidArgument("PS leaf measures need a density")
    pts, masses, skipped = leaf_coordinates(density, g, kind)
    keep = np.max(np.abs(pts), axis=1) <= T
    if skipped == len(density):
        raise EmptyMeasure("every atom sits at the excluded endpoint")
    return LeafMeasure(kind, g, float(T), pts[keep], masses[keep], skipped, density.exponent)


def leaf_mass_profile(density: PattersonDensity, g, T_grid, kind: str = PS) -> np.ndarray:
    """Masses of ``B_U(T)`` for every ``T`` in ``T_grid`` from one pass over the atoms."""
    pts, masses, _ = leaf_coordinates(density, g, kind)
    radius = np.max(np.abs(pts), axis=1)
    order = np.argsort(radius)
    cum = np.concatenate([[0.0], np.cumsum(masses[order])])
    idx = np.searchsorted(radius[order], np.asarray(T_grid, dtype=float), side="right")
    return cum[idx]


def conjugate_leaf(leaf: LeafMeasure, s: float) -> LeafMeasure:
    """The leaf of ``a_{-s} g`` obtained by moving atoms, not by resampling.

    ``t -> e^{-s} t`` with masses scaled by ``e^{-delta s}`` (PS),
    ``e^{-(n-1)s}`` (Lebesgue), or ``t -> e^{s} t`` with ``e^{delta s}``
    for the contracting leaf.
    """
    from horolab.lorentz import flow_left

    frame = flow_left(-s, leaf.frame)
    if leaf.kind == PS_MINUS:
        return replace(leaf, frame=frame, window=leaf.window * np.exp(s),
                       points=leaf.points * np.exp(s), masses=leaf.masses * np.exp(leaf.exponent * s))
    return replace(leaf, frame=frame, window=leaf.window * np.exp(-s),
                   points=leaf.points * np.exp(-s), masses=leaf.masses * np.exp(-leaf.exponent * s))


def lebesgue_boundary_scale(n: int) -> float:
    """Total mass given to the round boundary measure so that its leaf measure is exactly ``dt``."""
    from scipy.special import gamma

    sphere = 2 * np.pi ** (n / 2) / gamma(n / 2)
    return float(sphere / 2 ** ((n - 1) / 2))


def integrate(measure, psi):
    """Integrate ``psi`` against a leaf measure (exact) or a global sample (with standard error).

    Returns ``(value, standard_error)``; the error is 0 for leaf measures.
    """
    if isinstance(measure, LeafMeasure):
        return measure.integrate(psi), 0.0
    return measure.integrate(psi)


def sphere_sample(n: int, size: int, rng) -> np.ndarray:
    v = rng.normal(size=(size, n))
    return sphere_to_null(v / np.linalg.norm(v, axis=1, keepdims=True))
