"""Schottky groups: construction, words, limit sets, critical exponent, core distance.

A Schottky group is described by ``k`` pairs of disjoint spherical caps on
the boundary sphere.  Generator ``i`` maps the exterior of its source cap
onto the interior of its target cap.  Letters are encoded as integers
``0 .. 2k-1``: letter ``2i`` is generator ``i`` and ``2i+1`` its inverse,
so ``a ^ 1`` is the inverse letter.

Since the group acts on the right, ``o @ w`` for a reduced word
``w = a_1 ... a_m`` lies in the half-space over the target cap of the last
letter ``a_m``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from horolab.boundary import (
    basepoint,
    from_standard,
    normalize_null,
    null_to_sphere,
    reorthonormalize,
    sphere_to_null,
    standard_to_group,
)
from horolab.errors import (
    ConstructionFailed,
    InvalidArgument,
    InvalidConfig,
    InvalidState,
    PreconditionViolation,
)
from horolab.lorentz import flow_left, lorentz_inverse, lorentz_residual, pairing

PINGPONG_TOL = 1e-9
MESH_MARGIN = 1.1


class OverlappingCaps(ConstructionFailed, InvalidConfig):
    """Two pairing caps intersect or touch."""


@dataclass(frozen=True)
class Cap:
    """Closed spherical cap: unit ``center`` and angular radius ``angle``."""

    center: np.ndarray
    angle: float

    @classmethod
    def from_euclidean(cls, center, radius: float) -> "Cap":
        c = np.asarray(center, dtype=float)
        norm = np.linalg.norm(c)
        if norm == 0 or not 0 < radius < 2:
            raise InvalidConfig(f"cap needs a nonzero center and 0 < radius < 2, got {radius}")
        return cls(c / norm, float(2 * np.arcsin(radius / 2)))

    @property
    def euclidean_radius(self) -> float:
        return float(2 * np.sin(self.angle / 2))

    @property
    def normal(self) -> np.ndarray:
        """Spacelike vector ``n`` with ``cap = {xi : <xi, n> > 0}`` (and the half-space over it)."""
        return from_standard(np.concatenate([[np.cos(self.angle)], self.center]))

    def separation(self, other: "Cap") -> float:
        """Angular gap between the caps; negative when they overlap."""
        between = np.arccos(np.clip(self.center @ other.center, -1.0, 1.0))
        return float(between - self.angle - other.angle)


def _rotation_taking(a, b) -> np.ndarray:
    """A rotation in SO(n) with ``R @ a = b`` that acts trivially off ``span(a, b)``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.shape[0]
    c = float(np.clip(a @ b, -1.0, 1.0))
    w = b - c * a
    if np.linalg.norm(w) < 1e-12:
        if c > 0:
            return np.eye(n)
        # antipodal: rotate by pi in a plane containing a
        k = int(np.argmin(np.abs(a)))
        e = np.zeros(n)
        e[k] = 1.0
        w = e - (e @ a) * a
        c = -1.0
    w = w / np.linalg.norm(w)
    s = np.sqrt(max(0.0, 1.0 - c * c))
    return np.eye(n) + s * (np.outer(w, a) - np.outer(a, w)) + (c - 1) * (np.outer(a, a) + np.outer(w, w))


def pairing_generator(source: Cap, target: Cap, twist: float = 0.0) -> np.ndarray:
    """Loxodromic element mapping the exterior of ``source`` onto the interior of ``target``.

    Built in standard coordinates as ``R_2 B_l T R_1`` where ``R_1`` moves the
    source center to ``-e_1``, ``T`` rotates by ``twist`` about the ``e_1``
    axis (ignored for ``n = 2``), ``B_l`` is the boost along ``e_1`` with
    ``e^{-l} = tan(angle_s/2) tan(angle_t/2)`` and ``R_2`` moves ``e_1`` to
    the target center.
    """
    n = source.center.shape[0]
    e1 = np.zeros(n)
    e1[0] = 1.0
    R1 = _rotation_taking(source.center, -e1)
    R2 = _rotation_taking(e1, target.center)
    T = np.eye(n)
    if n >= 3 and twist:
        T[1:3, 1:3] = [[np.cos(twist), -np.sin(twist)], [np.sin(twist), np.cos(twist)]]
    ell = -np.log(np.tan(source.angle / 2) * np.tan(target.angle / 2))
    B = np.eye(n + 1)
    B[:2, :2] = [[np.cosh(ell), np.sinh(ell)], [np.sinh(ell), np.cosh(ell)]]

    def lift(R):
        out = np.eye(n + 1)
        out[1:, 1:] = R
        return out

    return standard_to_group(lift(R2) @ B @ lift(T) @ lift(R1))


def boundary_grid(n: int, count: int) -> np.ndarray:
    """Deterministic near-uniform unit vectors in R^n (circle or Fibonacci sphere)."""
    if n == 2:
        phi = 2 * np.pi * (np.arange(count) + 0.5) / count
        return np.column_stack([np.cos(phi), np.sin(phi)])
    if n == 3:
        k = np.arange(count) + 0.5
        z = 1 - 2 * k / count
        phi = np.pi * (1 + 5**0.5) * k
        rho = np.sqrt(1 - z * z)
        return np.column_stack([z, rho * np.cos(phi), rho * np.sin(phi)])
    pts = np.random.default_rng(0).normal(size=(count, n))
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


@dataclass(frozen=True)
class Word:
    letters: tuple
    matrix: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.letters)


class SchottkyGroup:
    """Generators with their pairing caps.

    ``caps[a]`` is the target cap of letter ``a``: generator ``i`` maps the
    exterior of ``caps[2i + 1]`` into ``caps[2i]``.
    """

    def __init__(self, generators, caps, dim: int):
        self.dim = dim
        self.generators = [np.asarray(g, dtype=float) for g in generators]
        self.caps = list(caps)
        mats = []
        for g in self.generators:
            mats += [g, lorentz_inverse(g)]
        self.letters = np.array(mats)
        self.normals = np.array([c.normal for c in self.caps])
        self._shells = [(np.zeros((1, 0), dtype=np.int8), np.eye(dim + 1)[None])]

    @property
    def rank(self) -> int:
        return len(self.generators)

    def word_matrix(self, letters) -> np.ndarray:
        g = np.eye(self.dim + 1)
        for a in letters:
            g = g @ self.letters[a]
        return g

    def shell(self, k: int):
        """Reduced words of length exactly ``k`` as ``(letters, matrices)`` arrays."""
        while len(self._shells) <= k:
            letters, mats = self._shells[-1]
            new_letters, new_mats = [], []
            for a in range(2 * self.rank):
                keep = slice(None) if letters.shape[1] == 0 else letters[:, -1] != (a ^ 1)
                prev = letters[keep]
                new_letters.append(np.column_stack([prev, np.full(len(prev), a, dtype=np.int8)]))
                new_mats.append(mats[keep] @ self.letters[a])
            self._shells.append((np.concatenate(new_letters), np.concatenate(new_mats)))
        return self._shells[k]

    def shell_points(self, k: int) -> np.ndarray:
        return basepoint(self.dim) @ self.shell(k)[1]

    def orbit_distances(self, k: int) -> np.ndarray:
        o = basepoint(self.dim)
        c = np.maximum(-pairing(o, self.shell_points(k)), 1.0)
        return np.log(c + np.sqrt(c * c - 1))

    def cap_index(self, xi) -> np.ndarray:
        """Index of the cap containing each boundary point, or -1."""
        p = pairing(np.atleast_2d(xi)[:, None, :], self.normals[None])
        idx = np.argmax(p, axis=1)
        idx[np.max(p, axis=1) <= 0] = -1
        return idx

    def reduce(self, x, max_steps: int = 10_000):
        """Move points or frames into the closed fundamental domain.

        Accepts a stack of points ``(N, n+1)`` or frames ``(N, n+1, n+1)``
        (the frame basepoint decides).  Returns ``(reduced, gamma)`` with
        ``x == reduced @ gamma``.
        """
        x = np.array(x, dtype=float)
        frames = x.ndim == 3
        N = x.shape[0]
        gamma = np.broadcast_to(np.eye(self.dim + 1), (N, self.dim + 1, self.dim + 1)).copy()
        o = basepoint(self.dim)
        for _ in range(max_steps):
            pts = o @ x if frames else x
            p = pts @ _form(self.dim) @ self.normals.T
            # normalise by the point scale so deep points do not dominate
            p = p / np.maximum(1.0, -pairing(o, pts))[:, None]
            a = np.argmax(p, axis=1)
            active = p[np.arange(N), a] > 1e-9
            if not active.any():
                return x, gamma
            idx = np.nonzero(active)[0]
            step_inv = self.letters[a[idx] ^ 1]
            if frames:
                x[idx] = x[idx] @ step_inv
            else:
                y = np.einsum("ni,nij->nj", x[idx], step_inv)
                x[idx] = y / np.sqrt(-pairing(y, y))[:, None]
            gamma[idx] = self.letters[a[idx]] @ gamma[idx]
        raise InvalidState("fundamental-domain reduction did not terminate")

    def in_limit_set(self, xi, depth: int = 10) -> np.ndarray:
        """Whether boundary points survive ``depth`` pull-backs through the caps.

        Points of the limit set always do; a point outside it leaves the
        union of caps after finitely many steps.  Each step expands
        round-off by up to the generator's derivative, so ``depth`` much
        beyond 10 only measures noise.
        """
        xi = normalize_null(np.atleast_2d(np.asarray(xi, dtype=float)))
        alive = np.ones(len(xi), dtype=bool)
        for _ in range(depth):
            idx = self.cap_index(xi)
            alive &= idx >= 0
            if not alive.any():
                break
            ok = np.nonzero(alive)[0]
            pulled = np.einsum("ij,ijk->ik", xi[ok], self.letters[idx[ok] ^ 1])
            xi[ok] = _reproject(pulled)
        return alive

    @cached_property
    def zariski_dense(self) -> bool:
        """Heuristic: fixed points of short words are not on a common round subsphere."""
        pts = []
        for k in (1, 2):
            letters, mats = self.shell(k)
            for m in mats:
                pts.extend(fixed_points(m))
        sv = np.linalg.svd(np.array(pts), compute_uv=False)
        return bool(sv[-1] > 1e-8 * sv[0]) and len(pts) >= self.dim + 1


def _form(n: int) -> np.ndarray:
    J = np.eye(n + 1)
    J[0, 0] = J[n, n] = 0.0
    J[0, n] = J[n, 0] = -1.0
    return J


def fixed_points(g) -> tuple[np.ndarray, np.ndarray]:
    """Attracting and repelling boundary fixed points of a loxodromic ``g`` (right action)."""
    w, V = np.linalg.eig(np.asarray(g).T)
    order = np.argsort(np.abs(w))
    plus = np.real(V[:, order[-1]])
    minus = np.real(V[:, order[0]])
    return _future(plus), _future(minus)


def _reproject(xi):
    # snap onto the light cone; drift off it is amplified by every pull-back
    d = null_to_sphere(xi)
    return sphere_to_null(d / np.linalg.norm(d, axis=-1, keepdims=True))


def _future(v):
    return normalize_null(v if v[0] + v[-1] > 0 else -v)


def build_schottky(config: dict) -> SchottkyGroup:
    """Build a group from a config mapping.

    Expected keys: ``dim`` and ``generators``, a list of mappings with
    ``source`` and ``target`` (each ``{center, radius}`` with a Euclidean
    radius on the unit sphere) and an optional ``twist``.
    """
    try:
        n = int(config["dim"])
        specs = config["generators"]
    except (KeyError, TypeError) as exc:
        raise InvalidConfig(f"group config is missing {exc}") from exc
    if n < 2:
        raise InvalidConfig("dim must be at least 2")
    if not specs:
        raise InvalidConfig("at least one generator is required")
    caps, generators = [], []
    for i, spec in enumerate(specs):
        try:
            src = Cap.from_euclidean(spec["source"]["center"], spec["source"]["radius"])
            tgt = Cap.from_euclidean(spec["target"]["center"], spec["target"]["radius"])
        except (KeyError, TypeError) as exc:
            raise InvalidConfig(f"generator {i}: missing field {exc}") from exc
        if src.center.shape[0] != n or tgt.center.shape[0] != n:
            raise InvalidConfig(f"generator {i}: cap centers must have length {n}")
        caps += [tgt, src]
        generators.append(pairing_generator(src, tgt, float(spec.get("twist", 0.0))))
    names = [f"{'target' if a % 2 == 0 else 'source'} cap of generator {a // 2}" for a in range(len(caps))]
    for a in range(len(caps)):
        for b in range(a + 1, len(caps)):
            if caps[a].separation(caps[b]) <= 0:
                raise OverlappingCaps(f"{names[a]} and {names[b]} overlap or touch")
    for i, g in enumerate(generators):
        if lorentz_residual(g) > 1e-12:
            raise ConstructionFailed(f"generator {i} does not preserve the form")
    group = SchottkyGroup(generators, caps, n)
    verify_pingpong(group)
    return group


def verify_pingpong(group: SchottkyGroup, count: int = 1000) -> None:
    """Check on a boundary grid that each letter maps the outside of its source cap into its target cap."""
    grid = sphere_to_null(boundary_grid(group.dim, count))
    for a in range(2 * group.rank):
        src = group.normals[a ^ 1]
        outside = grid[pairing(grid, src) <= 0]
        image = outside @ group.letters[a]
        vals = pairing(image, group.normals[a]) / (image[:, 0] + image[:, -1])
        if np.any(vals < -PINGPONG_TOL):
            raise ConstructionFailed(f"ping-pong fails for letter {a}: image leaves the target cap")


def enumerate_words(group: SchottkyGroup, L: int) -> Iterator[Word]:
    """All reduced words of length at most ``L``, shortest first."""
    if L < 0:
        raise InvalidArgument("L must be non-negative")
    for k in range(L + 1):
        letters, mats = group.shell(k)
        for w, m in zip(letters, mats):
            yield Word(tuple(int(a) for a in w), m)


def word_count(rank: int, L: int) -> int:
    return 1 + sum(2 * rank * (2 * rank - 1) ** (j - 1) for j in range(1, L + 1))


def limit_set_sample(group: SchottkyGroup, L: int) -> np.ndarray:
    """Ball-model directions of ``o @ w`` over reduced words of length exactly ``L``."""
    if L < 1:
        raise InvalidArgument("L must be at least 1")
    from horolab.boundary import to_standard

    X = to_standard(group.shell_points(L))
    return X[:, 1:] / np.linalg.norm(X[:, 1:], axis=1, keepdims=True)


@dataclass(frozen=True)
class ExponentEstimate:
    value: float
    band: float
    low_confidence: bool
    by_length: dict


def critical_exponent_estimate(group: SchottkyGroup, L_range=range(6, 11), tol=0.02) -> ExponentEstimate:
    """Estimate the critical exponent from the growth of orbit shells.

    For each ``L`` the estimate is the ``s`` at which the shell sums
    ``S_k(s) = sum_{|w|=k} exp(-s d(o, o w))`` stop growing between
    ``k = L-1`` and ``k = L``.  The band is the change between the last two
    lengths.
    """
    Ls = sorted(set(int(L) for L in L_range))
    if not Ls or Ls[0] < 2:
        raise InvalidArgument("L_range must be nonempty with L >= 2")
    upper = float(group.dim)
    by_length = {}
    for L in Ls:
        d_prev, d_cur = group.orbit_distances(L - 1), group.orbit_distances(L)

        def growth(s):
            return logsumexp(-s * d_cur) - logsumexp(-s * d_prev)

        if growth(0.0) <= 0:
            by_length[L] = 0.0
        elif growth(upper) >= 0:
            by_length[L] = upper
        else:
            by_length[L] = float(brentq(growth, 0.0, upper, xtol=1e-12))
    value = by_length[Ls[-1]]
    band = abs(value - by_length[Ls[-2]]) if len(Ls) > 1 else float("inf")
    return ExponentEstimate(value, band, bool(band > tol), by_length)


# -- convex core -----------------------------------------------------------


def geodesic_samples(plus, minus, times) -> np.ndarray:
    """Unit-speed points ``exp(t) a + exp(-t) b`` on the geodesic from ``minus`` to ``plus``.

    ``t = 0`` is the point closest to the basepoint.
    """
    plus, minus = normalize_null(plus), normalize_null(minus)
    q = np.sqrt(-2 * pairing(plus, minus))
    t = np.asarray(times, dtype=float)[:, None]
    return (np.exp(t) * plus + np.exp(-t) * minus) / q


@dataclass
class CoreApproximation:
    """Reduced samples of the convex core plus their translates by short words."""

    samples: np.ndarray
    translates: np.ndarray
    radius_bound: float
    diameter: float

    def __post_init__(self):
        if len(self.samples) == 0:
            raise InvalidState("core approximation is empty")


def build_core(group: SchottkyGroup, L: int = 5, spacing: float = 0.1, neighbours: int = 2,
               mesh_probes: int = 1000, seed: int = 0) -> CoreApproximation:
    """Sample axes of words of length ``<= L`` and fold them into the fundamental domain.

    ``radius_bound`` is an empirical mesh: the largest distance from a
    random core point (a geodesic between deeper limit points) to the sample,
    inflated by ``MESH_MARGIN`` since a sampled maximum is biased low.
    """
    pts = []
    for k in range(1, L + 1):
        letters, mats = group.shell(k)
        cyclic = letters[:, 0] != (letters[:, -1] ^ 1)
        for m in mats[cyclic]:
            plus, minus = fixed_points(m)
            # one period of the closed geodesic, centred on the point nearest o
            half = 0.5 * np.log(np.max(np.abs(np.linalg.eigvals(m)))) + spacing
            pts.append(geodesic_samples(plus, minus, np.arange(-half, half + spacing / 2, spacing)))
    pts = np.concatenate(pts)
    reduced, _ = group.reduce(pts)
    reduced = _dedupe(reduced, spacing / 4)
    trans = [reduced]
    for k in range(1, neighbours + 1):
        trans.append(np.einsum("ni,wij->wnj", reduced, group.shell(k)[1]).reshape(-1, group.dim + 1))
    translates = np.concatenate(trans)
    o = basepoint(group.dim)
    diameter = 2 * float(np.max(_dist(o, reduced)))
    core = CoreApproximation(reduced, translates, 0.0, diameter)

    rng = np.random.default_rng(seed)
    deep = L + 3
    letters, mats = group.shell(deep)
    pick = rng.choice(len(mats), size=(mesh_probes, 2))
    plus = np.array([fixed_points(mats[i])[0] for i in pick[:, 0]])
    minus = np.array([fixed_points(mats[j])[1] for j in pick[:, 1]])
    ok = -pairing(plus, minus) > 1e-9
    probes = []
    for p, q in zip(plus[ok], minus[ok]):
        probes.append(geodesic_samples(p, q, rng.uniform(-3, 3, size=5)))
    probes = np.concatenate(probes)
    mesh = MESH_MARGIN * float(np.max(distance_to_core(group, probes, core)))
    return CoreApproximation(reduced, translates, mesh, diameter)


def _dedupe(points, cell):
    from horolab.boundary import lorentz_to_ball

    keys = np.round(lorentz_to_ball(points) / cell).astype(np.int64)
    _, first = np.unique(keys, axis=0, return_index=True)
    return points[np.sort(first)]


def _dist(x, Y):
    c = np.maximum(-pairing(x, Y), 1.0)
    return np.log(c + np.sqrt(c * c - 1))


def distance_to_core(group: SchottkyGroup, x, core: CoreApproximation) -> np.ndarray:
    """Distance from hyperboloid points to the sampled core, modulo the group.

    Pass frame basepoints (``frame_basepoint(g)``) for frames.  This is an
    upper estimate: the true distance lies within ``core.radius_bound`` below.
    """
    if core is None or len(core.samples) == 0:
        raise InvalidState("core approximation is empty")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    reduced, _ = group.reduce(np.atleast_2d(x))
    out = np.empty(len(reduced))
    T = core.translates @ _form(group.dim)
    for lo in range(0, len(reduced), 256):
        c = np.maximum(np.min(-(reduced[lo : lo + 256] @ T.T), axis=1), 1.0)
        out[lo : lo + 256] = np.log(c + np.sqrt(c * c - 1))
    return out[0] if single else out


def backward_orbit(group: SchottkyGroup, x, times) -> np.ndarray:
    """Reduced frames ``a_{-s} x`` for increasing ``times``.

    The flow acts on the left and the group on the right, so the orbit can
    be folded into the fundamental domain after each step; entries then
    stay bounded however long the orbit runs.
    """
    times = np.asarray(times, dtype=float)
    out = np.empty((len(times),) + np.shape(x))
    g = np.asarray(x, dtype=float)
    prev = 0.0
    for i, s in enumerate(times):
        # sub-steps of at most one unit keep the flowed matrix well scaled
        for ds in np.diff(np.linspace(prev, s, int(np.ceil(abs(s - prev))) + 1)):
            reduced, _ = group.reduce(flow_left(-ds, g)[None])
            g = reorthonormalize(reduced[0])
        out[i] = g
        prev = s
    return out


@dataclass(frozen=True)
class DiophantineResult:
    compliant: bool
    violated_at: float | None
    s_grid: np.ndarray
    distances: np.ndarray
    max_slope: float


def diophantine_check(group: SchottkyGroup, x, eps: float, s0: float, s_max: float,
                      core: CoreApproximation, step: float = 0.25, depth: int = 10) -> DiophantineResult:
    """Test ``d(C, a_{-s} x) < (1 - eps) s`` on a grid of ``s`` in ``[s0, s_max]``."""
    if not 0 < eps < 1:
        raise InvalidArgument("eps must lie in (0, 1)")
    if s0 < 1 or s_max < s0:
        raise InvalidArgument("need 1 <= s0 <= s_max")
    x = np.asarray(x, dtype=float)
    if not group.in_limit_set(x[-1], depth=depth)[0]:
        raise PreconditionViolation("backward endpoint of x is not in the limit set")
    grid = np.arange(s0, s_max + step / 2, step)
    frames = backward_orbit(group, x, grid)
    dist = distance_to_core(group, basepoint(group.dim) @ frames, core)
    bad = np.nonzero(dist >= (1 - eps) * grid)[0]
    return DiophantineResult(
        compliant=len(bad) == 0,
        violated_at=float(grid[bad[0]]) if len(bad) else None,
        s_grid=grid,
        distances=dist,
        max_slope=float(np.max(dist / grid)),
    )
