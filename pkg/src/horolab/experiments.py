"""Named experiments, the shared build context, and experiment reports.

Every experiment is a function ``(ctx, params, seed) -> Result``.  Its seed
comes from the top-level seed and the experiment name (see
:meth:`Context.stream`), so adding or removing an experiment leaves the
random streams of the others untouched.
"""

from __future__ import annotations

import time
import zlib
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from horolab.boundary import (
    ball_to_lorentz,
    basepoint,
    busemann,
    busemann_ray_limit,
    endpoints,
    frame_basepoint,
    frame_from_endpoints,
    gromov_distance,
    hyp_distance,
    normalize_null,
    null_to_sphere,
    ray_point,
    reorthonormalize,
    sphere_to_null,
)
from horolab.densities import (
    LEBESGUE,
    PS,
    PS_MINUS,
    conformality_residual,
    conjugate_leaf,
    leaf_mass_profile,
    leaf_measure,
    patterson_density,
    sphere_sample,
)
from horolab.errors import PreconditionViolation
from horolab.friendliness import friendliness_report, shadow_fit
from horolab.global_measures import BMS, BR, _tau0_shift, global_sampler, product_integral, total_mass
from horolab.lab import (
    HAAR,
    box_mean,
    correlation_ensemble,
    flow_conjugation_residual,
    good_function_check,
    leaf_integral,
    mixing_correlation,
    nondivergence_profile,
    swapped_correlation,
    translate_integral,
    window_average,
)
from horolab.lorentz import (
    ParabolicElement,
    decompose_PU,
    flow_left,
    group_distance,
    lorentz_inverse,
    lorentz_residual,
    make_flow,
    make_u,
    make_v,
    pairing,
    rho_flow_factor,
    rho_p,
    u_stack,
)
from horolab.rates import EXPONENTIAL, POWER, fit_rate
from horolab.schottky import (
    build_core,
    build_schottky,
    critical_exponent_estimate,
    distance_to_core,
    fixed_points,
)
from horolab.testfunctions import BumpSum, bump, scatter_bumps


@dataclass
class Result:
    columns: list
    rows: list
    verdicts: dict
    fit: dict | None = None
    summary: dict = field(default_factory=dict)
    plot: dict | None = None


@dataclass
class ExperimentReport:
    id: str
    config_hash: str
    seed: int
    columns: list
    rows: list
    verdicts: dict
    fit: dict | None = None
    summary: dict = field(default_factory=dict)
    plot: dict | None = None
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    @property
    def failures(self) -> list:
        return [k for k, v in self.verdicts.items() if not v]

    def table_text(self) -> str:
        """Tab-separated table with a header row; floats in round-trip precision."""
        lines = ["\t".join(self.columns)]
        lines += ["\t".join(_cell(v) for v in row) for row in self.rows]
        return "\n".join(lines) + "\n"

    def summary_dict(self) -> dict:
        return {"id": self.id, "config_hash": self.config_hash, "seed": self.seed,
                "passed": self.passed, "verdicts": dict(self.verdicts), "fit": self.fit,
                "summary": _jsonable(self.summary), "elapsed_seconds": round(self.elapsed, 3)}


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    return obj


@dataclass(frozen=True)
class Experiment:
    name: str
    criterion: int
    description: str
    defaults: dict
    run: object


REGISTRY: dict[str, Experiment] = {}


def experiment(name: str, criterion: int, description: str, **defaults):
    def register(fn):
        REGISTRY[name] = Experiment(name, criterion, description, defaults, fn)
        return fn

    return register


# -- shared context --------------------------------------------------------------


class Context:
    """Lazily built objects shared by the experiments of one config."""

    def __init__(self, cfg: dict):
        self.cfg = cfg
        self.seed = int(cfg["seed"])
        self.tol = cfg["tolerances"]

    def stream(self, name: str) -> np.random.SeedSequence:
        return np.random.SeedSequence(self.seed, spawn_key=(zlib.crc32(name.encode()),))

    def int_seed(self, name: str) -> int:
        return int(self.stream(name).generate_state(1)[0])

    @cached_property
    def group(self):
        return build_schottky(self.cfg["group"])

    @property
    def dim(self) -> int:
        return self.group.dim

    @cached_property
    def estimate(self):
        lo, hi = self.cfg["density"]["estimate_lengths"]
        return critical_exponent_estimate(self.group, range(lo, hi + 1))

    @cached_property
    def exponent(self) -> float:
        given = self.cfg["density"]["exponent"]
        return float(given) if given is not None else self.estimate.value + self.cfg["density"]["offset"]

    def density_at(self, L: int):
        cache = self.__dict__.setdefault("_densities", {})
        if L not in cache:
            cache[L] = patterson_density(self.group, self.exponent, L)
        return cache[L]

    @property
    def density(self):
        return self.density_at(self.cfg["density"]["L"])

    @property
    def fine_density(self):
        return self.density_at(self.cfg["density"]["L_fine"])

    @cached_property
    def core(self):
        c = self.cfg["core"]
        return build_core(self.group, c["L"], c["spacing"], mesh_probes=c["probes"], seed=self.int_seed("core"))

    @cached_property
    def normalisation(self):
        """``(m^BMS(X), standard error)``."""
        return total_mass(self.group, self.density, N=self.cfg["normalisation"]["samples"],
                          seed=self.int_seed("normalisation"))

    @property
    def total(self) -> float:
        return self.normalisation[0]

    @cached_property
    def bumps(self) -> list:
        tf = self.cfg["test_functions"]
        cand = global_sampler(BMS, self.group, self.density, tf["candidates"], self.int_seed("candidates"))
        pos = cand.weights > 0
        return scatter_bumps(self.group, cand.frames[pos], cand.weights[pos], tf["count"], tf["eta"],
                             tf["eta"], tf["smoothness"], tf["separation"], seed=self.int_seed("bumps"))

    @cached_property
    def psi(self) -> BumpSum:
        return BumpSum(self.bumps, self.group)

    def box_means(self, kind: str):
        """Per-bump normalised means and standard errors under BMS or BR."""
        cache = self.__dict__.setdefault("_box_means", {})
        if kind not in cache:
            N = self.cfg["normalisation"]["box_samples"]
            seeds = self.stream(f"box-means-{kind}").spawn(len(self.bumps))
            vals = [box_mean(kind, self.group, self.density, b, N, int(s.generate_state(1)[0]), self.total)
                    for b, s in zip(self.bumps, seeds)]
            cache[kind] = (np.array([v for v, _ in vals]), np.array([e for _, e in vals]))
        return cache[kind]

    def mean(self, kind: str):
        vals, errs = self.box_means(kind)
        return float(vals.sum()), float(np.sqrt(np.sum(errs**2)))

    @cached_property
    def frames(self) -> np.ndarray:
        """Core frames: endpoints are fixed points of random words, basepoint nearest ``o``, folded."""
        e = self.cfg["ensemble"]
        rng = np.random.default_rng(self.stream("frames"))
        _, mats = self.group.shell(e["word_length"])
        out = []
        while len(out) < e["frames"]:
            i, j = rng.integers(len(mats), size=2)
            xp = normalize_null(fixed_points(mats[i])[0])
            xm = normalize_null(fixed_points(mats[j])[0])
            if -float(pairing(xp, xm)) < 1e-6:
                continue
            x = frame_from_endpoints(xp, xm, float(_tau0_shift(xp[None], xm[None])[0]))
            reduced, _ = self.group.reduce(x[None])
            # folding by long words leaves round-off that the leaf chart amplifies
            out.append(reorthonormalize(reduced[0]))
        return np.array(out)

    def warm(self, names) -> None:
        """Build everything the named experiments need (before forking workers)."""
        self.group
        heavy = {"window-ps", "window-haar", "translate-ps", "translate-haar", "mixing", "dual-bms"}
        if set(names) & heavy:
            self.density
            self.total
            self.bumps
            self.box_means(BMS)
            if {"window-haar", "translate-haar"} & set(names):
                self.box_means(BR)
        if set(names) & {"shadow", "density", "window-ps", "window-haar", "translate-ps", "translate-haar",
                         "flow-conjugation", "nondivergence"}:
            self.frames
        if set(names) & {"diophantine", "nondivergence", "dual-bms"}:
            self.core
        if "friendliness" in names:
            self.fine_density


def run_experiment(ctx: Context, entry: dict, config_hash: str) -> ExperimentReport:
    name = entry["name"]
    params = {k: v for k, v in entry.items() if k != "name"}
    seed = ctx.int_seed(name)
    start = time.perf_counter()
    res = REGISTRY[name].run(ctx, params, seed)
    elapsed = time.perf_counter() - start
    return ExperimentReport(name, config_hash, seed, list(res.columns), [tuple(r) for r in res.rows],
                            {k: bool(v) for k, v in res.verdicts.items()}, res.fit, res.summary,
                            res.plot, elapsed)


def inversions(values) -> int:
    """Number of steps where a sequence fails to decrease."""
    v = np.asarray(values, dtype=float)
    return int(np.sum(np.diff(v) >= 0))


def _flow_stack(s, n):
    s = np.asarray(s, dtype=float)
    out = np.zeros((len(s), n + 1, n + 1))
    out[:, 0, 0] = np.exp(s)
    out[:, n, n] = np.exp(-s)
    for k in range(1, n):
        out[:, k, k] = 1.0
    return out


def _random_points(rng, n, size, radius):
    """Points of hyperbolic space at distance at most ``radius`` from ``o``."""
    v = rng.normal(size=(size, n))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    rho = radius * rng.uniform(size=size) ** (1 / n)
    return ball_to_lorentz(v * np.tanh(rho / 2)[:, None])


def _rms(d):
    """Root mean square over rows and a delta-method standard error."""
    d = np.asarray(d, dtype=float)
    sq = d**2
    rms = np.sqrt(sq.mean(axis=0))
    se = sq.std(axis=0, ddof=1) / np.sqrt(len(d)) / np.maximum(2 * rms, 1e-300)
    return rms, se


# -- algebra and geometry ----------------------------------------------------------


@experiment("algebra", 1, "Flow/horocycle commutation, the P.U factorization and Lorentz-form residuals",
            samples=10000, factorizations=1000, products=1000, radius=0.2)
def _algebra(ctx, p, seed):
    rng = np.random.default_rng(seed)
    n = ctx.dim
    tol = ctx.tol
    N = int(p["samples"])
    s = rng.uniform(-3, 3, N)
    t = rng.uniform(-2, 2, (N, n - 1))

    def rel(a, b):
        return float(np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b).max(axis=(1, 2), keepdims=True))))

    A, Ainv = _flow_stack(s, n), _flow_stack(-s, n)
    eq_u = rel(A @ u_stack(t) @ Ainv, u_stack(np.exp(s)[:, None] * t))
    V = u_stack(t).transpose(0, 2, 1)
    eq_v = rel(A @ V @ Ainv, u_stack(np.exp(-s)[:, None] * t).transpose(0, 2, 1))

    rho_err = flow_err = 0.0
    worst_ratio = 0.0
    count = 0
    while count < int(p["factorizations"]):
        pe = ParabolicElement(float(rng.uniform(-0.15, 0.15)), rng.uniform(-0.15, 0.15, n - 1))
        d = group_distance(pe.matrix)
        if not 0 < d < p["radius"]:
            continue
        tt = rng.uniform(-1, 1, n - 1)
        P, tu = decompose_PU(make_u(tt) @ lorentz_inverse(pe.matrix))
        rho_err = max(rho_err, float(np.max(np.abs(tu - rho_p(pe, tt)))))
        flow_err = max(flow_err, abs(float(np.exp(P.s)) - rho_flow_factor(pe, tt)))
        worst_ratio = max(worst_ratio, group_distance(P.matrix) / d)
        count += 1

    M = int(p["products"])
    ss = rng.uniform(-3, 3, M)
    tu_, tv_ = rng.uniform(-1, 1, (M, n - 1)), rng.uniform(-1, 1, (M, n - 1))
    form = max(lorentz_residual(make_flow(a, n) @ make_u(b) @ make_v(c)) for a, b, c in zip(ss, tu_, tv_))
    gens = max(lorentz_residual(g) for g in ctx.group.letters)
    _, words = ctx.group.shell(4)
    word_rel = float(max(lorentz_residual(w) / np.abs(w).max() ** 2 for w in words))

    rows = [("flow-conjugates-u", eq_u, tol["identity"]), ("flow-conjugates-v", eq_v, tol["identity"]),
            ("factorization-rho", rho_err, tol["identity"]), ("factorization-flow", flow_err, tol["identity"]),
            ("form-products", form, tol["form"]), ("form-generators", gens, tol["form"])]
    verdicts = {name: val < bound for name, val, bound in rows}
    rows.append(("p-part-ratio", worst_ratio, 6.0))
    verdicts["p-part-ratio"] = worst_ratio <= 6.0
    return Result(["check", "residual", "tolerance"], rows, verdicts,
                  summary={"word_relative_form_residual": word_rel, "p_part_ratio_max": worst_ratio})


@experiment("busemann", 2, "Busemann cocycle, ray limits, and the visual-distance identities",
            samples=10000, rays=1000, truncation=30.0, radius=3.0)
def _busemann(ctx, p, seed):
    rng = np.random.default_rng(seed)
    n = ctx.dim
    N = int(p["samples"])
    o = basepoint(n)
    x, y, z = (_random_points(rng, n, N, p["radius"]) for _ in range(3))
    xi = sphere_sample(n, N, rng)
    cocycle = float(np.max(np.abs(busemann(xi, x, y) + busemann(xi, y, z) - busemann(xi, x, z))))
    lipschitz = int(np.sum(np.abs(busemann(xi, x, y)) > hyp_distance(x, y) + 1e-12))

    R = int(p["rays"])
    xr, yr = _random_points(rng, n, R, 2.0), _random_points(rng, n, R, 2.0)
    xir = sphere_sample(n, R, rng)
    ray = float(np.max(np.abs(busemann(xir, xr, yr) - busemann_ray_limit(xir, xr, yr, p["truncation"]))))
    dist = rng.uniform(0, 5, R)
    on_ray = float(np.max(np.abs(busemann(xir, o, ray_point(o, xir, dist)) - dist)))

    a, b = sphere_sample(n, N, rng), sphere_sample(n, N, rng)
    euclid = np.linalg.norm(null_to_sphere(a) - null_to_sphere(b), axis=1)
    half = float(np.max(np.abs(gromov_distance(o, a, b) - 0.5 * euclid)))
    ratio = gromov_distance(x, a, b) / gromov_distance(o, a, b)
    d = hyp_distance(o, x)
    slack = 1e-12
    sandwich = int(np.sum((ratio < np.exp(-d) * (1 - slack)) | (ratio > np.exp(d) * (1 + slack))))

    tol = ctx.tol
    rows = [("cocycle", cocycle, tol["cocycle"]), ("ray-limit", ray, tol["ray"]),
            ("ray-point", on_ray, tol["ray"]), ("half-euclidean", half, tol["gromov"]),
            ("sandwich-violations", sandwich, 0), ("lipschitz-violations", lipschitz, 0)]
    verdicts = {"cocycle": cocycle < tol["cocycle"], "ray-limit": ray < tol["ray"],
                "ray-point": on_ray < tol["ray"], "half-euclidean": half < tol["gromov"],
                "sandwich": sandwich == 0, "lipschitz": lipschitz == 0}
    return Result(["check", "value", "tolerance"], rows, verdicts)


# -- densities --------------------------------------------------------------------


@experiment("density", 3, "Conformality refinement, flow-scaling of leaves, and basepoint independence",
            L_coarse=4, cell_length=3, shifts=[0.5, 1.0, 2.0], window=5.0, frames=8,
            windows=[1.0, 2.0, 5.0, 10.0])
def _density(ctx, p, seed):
    G = ctx.group
    n = ctx.dim
    cells = [list(w) for w in G.shell(int(p["cell_length"]))[0]]
    conf = {}
    for L in (int(p["L_coarse"]), ctx.cfg["density"]["L"]):
        nu = ctx.density_at(L)
        conf[L] = max(conformality_residual(G, nu, [a], cells) for a in range(2 * G.rank))
    coarse, fine = conf[int(p["L_coarse"])], conf[ctx.cfg["density"]["L"]]

    nu = ctx.density
    frames = ctx.frames[: int(p["frames"])]
    T = float(p["window"])
    scaling = 0.0
    for x in frames:
        for s in p["shifts"]:
            for kind in (PS, PS_MINUS, LEBESGUE):
                leaf = leaf_measure(kind, x, T, nu)
                conj = conjugate_leaf(leaf, s)
                direct = leaf_measure(kind, flow_left(-s, x), conj.window, nu)
                if len(direct) != len(conj):
                    scaling = np.inf
                    continue
                dp = np.max(np.abs(direct.points - conj.points) / (1 + np.abs(conj.points)), initial=0.0)
                dm = np.max(np.abs(direct.masses - conj.masses) / conj.masses, initial=0.0)
                dt = abs(direct.total() - conj.total()) / conj.total()
                scaling = max(scaling, dp, dm, dt)

    o2 = basepoint(n) @ make_flow(1.0, n)
    moved = patterson_density(G, nu.exponent, nu.word_cutoff, point=o2)
    scale = nu.transported(o2).sum()
    Ts = np.asarray(p["windows"], dtype=float)
    change = 0.0
    for x in frames:
        a = leaf_mass_profile(nu, x, Ts)
        b = leaf_mass_profile(moved, x, Ts) * scale
        ok = a > 0
        change = max(change, float(np.max(np.abs(b[ok] - a[ok]) / a[ok])))

    tol = ctx.tol
    rows = [("conformality-L%d" % int(p["L_coarse"]), coarse, ""),
            ("conformality-L%d" % ctx.cfg["density"]["L"], fine, 0.1),
            ("scaling", scaling, tol["scaling"]), ("basepoint-change", change, tol["basepoint"])]
    verdicts = {"conformality-decreases": fine < coarse, "conformality-small": fine < 0.1,
                "scaling": scaling < tol["scaling"], "basepoint": change < tol["basepoint"]}
    return Result(["check", "value", "tolerance"], rows, verdicts, summary={"conformality": conf})


@experiment("shadow", 4, "Growth exponent of PS leaf masses against the critical exponent",
            T_min=1.0, T_max=100.0, points=25, frames=8, perturbation=0.1, perturbations=4)
def _shadow(ctx, p, seed):
    rng = np.random.default_rng(seed)
    n = ctx.dim
    T = np.logspace(np.log10(p["T_min"]), np.log10(p["T_max"]), int(p["points"]))
    delta = ctx.estimate.value
    frames = [np.eye(n + 1)] + list(ctx.frames[: int(p["frames"])])
    rows, drift = [], 0.0
    for i, x in enumerate(frames):
        fit = shadow_fit(ctx.density, x, T)
        moved = []
        for _ in range(int(p["perturbations"])):
            h = p["perturbation"]
            y = make_u(rng.uniform(-h, h, n - 1)) @ make_flow(float(rng.uniform(-h, h)), n) @ x
            moved.append(shadow_fit(ctx.density, y, T).slope)
        d = float(np.max(np.abs(np.array(moved) - fit.slope)))
        drift = max(drift, d)
        rows.append((i, fit.slope, fit.stderr, fit.band[0], fit.band[1], d))
    slopes = np.array([r[1] for r in rows])
    leb = shadow_fit(None, np.eye(n + 1), T, kind=LEBESGUE).slope
    tol = ctx.tol
    verdicts = {"slope-near-exponent": bool(np.all(np.abs(slopes - delta) <= tol["shadow"])),
                "basepoint-robust": drift <= tol["shadow_robust"],
                "lebesgue-slope": abs(leb - (n - 1)) <= tol["lebesgue_slope"]}
    return Result(["frame", "slope", "stderr", "band_lo", "band_hi", "perturbation_drift"], rows, verdicts,
                  summary={"exponent_estimate": delta, "lebesgue_slope": leb, "max_drift": drift},
                  plot={"x": "frame", "y": ["slope"], "hline": delta, "kind": "points"})


@experiment("friendliness", 5, "Doubling, absolute decay and boundary ratios of the PS leaf; Lebesgue controls",
            scale_min=1e-3, scale_max=1.0, scales=10, hyperplanes=20, centres=10)
def _friendliness(ctx, p, seed):
    n = ctx.dim
    x = np.eye(n + 1)
    scales = np.logspace(np.log10(p["scale_min"]), np.log10(p["scale_max"]), int(p["scales"]))
    kw = dict(hyperplanes=int(p["hyperplanes"]), centres=int(p["centres"]), seed=seed)
    ps = friendliness_report(ctx.fine_density, x, scales, **kw)
    leb = friendliness_report(None, x, scales, kind=LEBESGUE, **kw)
    tol = ctx.tol
    target = 2.0 ** (n - 1)
    rows = [(float(e), float(a), float(b)) for e, a, b in zip(scales, ps.doubling, leb.doubling)]
    verdicts = {"doubling-finite": bool(np.all(np.isfinite(ps.doubling))),
                "doubling-stable": ps.doubling_stability <= tol["doubling_stability"],
                "decay-positive": ps.decay_band[0] > 0,
                "boundary-ratio-positive": ps.boundary_ratio_exponent > 0,
                "lebesgue-decay": abs(leb.decay_exponent - 1) <= tol["lebesgue_alpha"],
                "lebesgue-doubling": bool(np.all(np.abs(leb.doubling - target) <= tol["lebesgue_doubling"] * target))}
    summary = {"doubling_max_ratio": ps.doubling_max_ratio, "doubling_stability": ps.doubling_stability,
               "decay_exponent": ps.decay_exponent, "decay_band": ps.decay_band,
               "boundary_ratio_exponent": ps.boundary_ratio_exponent, "boundary_band": ps.boundary_band,
               "low_confidence": ps.low_confidence, "lebesgue_decay_exponent": leb.decay_exponent,
               "density_atoms": len(ctx.fine_density)}
    return Result(["scale", "doubling_ps", "doubling_lebesgue"], rows, verdicts, summary=summary,
                  plot={"x": "scale", "y": ["doubling_ps", "doubling_lebesgue"], "logx": True})


# -- equidistribution ----------------------------------------------------------------


def _window(ctx, p, kind):
    mkind = BMS if kind == PS else BR
    m, m_se = ctx.mean(mkind)
    Ts = np.asarray(p["T_grid"], dtype=float)
    D = np.array([[window_average(kind, x, T, ctx.psi, ctx.density, p["resolution"])[0] - m for T in Ts]
                  for x in ctx.frames])
    rms, se = _rms(D)
    fit = fit_rate(POWER, Ts, rms, se)
    inv = inversions(rms)
    rows = [(T, r, e, a) for T, r, e, a in zip(Ts, rms, se, np.abs(D).mean(axis=0))]
    verdicts = {"trend-decreasing": inv <= ctx.tol["inversions"], "rate-positive": fit.kappa > 0}
    summary = {"mean": m, "mean_stderr": m_se, "inversions": inv, "frames": len(ctx.frames),
               "bumps": len(ctx.bumps), "sobolev_bound": ctx.psi.sobolev_bound}
    return Result(["T", "rms_discrepancy", "stderr", "mean_abs_discrepancy"], rows, verdicts, fit.as_dict(),
                  summary, {"x": "T", "y": ["rms_discrepancy"], "err": "stderr", "logx": True, "logy": True,
                            "fit": True})


@experiment("window-ps", 6, "PS-weighted horocycle window averages against the BMS mean",
            T_grid=[4.0, 8.0, 16.0, 32.0, 64.0], resolution=0.01)
def _window_ps(ctx, p, seed):
    return _window(ctx, p, PS)


@experiment("window-haar", 6, "Lebesgue horocycle window integrals (PS-normalised) against the BR mean",
            T_grid=[4.0, 8.0, 16.0, 32.0, 64.0], resolution=0.01)
def _window_haar(ctx, p, seed):
    return _window(ctx, p, HAAR)


@experiment("flow-conjugation", 6, "Window averages computed on flow-conjugated leaves",
            T=16.0, shifts=[0.5, 1.0, 2.0], frames=8)
def _flow_conjugation(ctx, p, seed):
    rows = []
    for i, x in enumerate(ctx.frames[: int(p["frames"])]):
        for s in p["shifts"]:
            rows.append((i, float(s), flow_conjugation_residual(x, p["T"], s, ctx.psi, ctx.density)))
    worst = max(r[2] for r in rows)
    return Result(["frame", "s", "relative_residual"], rows, {"identity": worst < ctx.tol["conjugation"]},
                  summary={"max_residual": worst})


def _translate(ctx, p, kind):
    mkind = BMS if kind == PS else BR
    m, m_se = ctx.mean(mkind)
    r = float(p["radius"])
    ell = ctx.cfg["test_functions"]["smoothness"]

    def f(t):
        return np.prod(bump(np.asarray(t) / r, ell), axis=-1)

    S = np.asarray(p["s_grid"], dtype=float)
    D = []
    for x in ctx.frames:
        mu = leaf_integral(f, x, r, ctx.density)
        if mu <= 0:
            continue
        D.append([(translate_integral(kind, x, s, f, ctx.psi, ctx.density, r)[0] - mu * m) / mu for s in S])
    D = np.array(D)
    rms, se = _rms(D)
    fit = fit_rate(EXPONENTIAL, S, rms, se)
    rows = [(s, v, e) for s, v, e in zip(S, rms, se)]
    verdicts = {"rate-positive": fit.kappa > 0}
    summary = {"mean": m, "mean_stderr": m_se, "inversions": inversions(rms), "frames_used": len(D)}
    return Result(["s", "rms_relative_discrepancy", "stderr"], rows, verdicts, fit.as_dict(), summary,
                  {"x": "s", "y": ["rms_relative_discrepancy"], "err": "stderr", "logy": True, "fit": True})


@experiment("translate-ps", 7, "PS translate integrals of expanding horospheres against the BMS limit",
            s_grid=[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], radius=0.5)
def _translate_ps(ctx, p, seed):
    return _translate(ctx, p, PS)


@experiment("translate-haar", 7, "Lebesgue translate integrals with the e^{(n-1-delta)s} factor against the BR limit",
            s_grid=[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], radius=0.5)
def _translate_haar(ctx, p, seed):
    return _translate(ctx, p, HAAR)


@experiment("mixing", 7, "BMS correlation decay over bump pairs and the swapped-estimator check",
            s_grid=[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0], per_box=5000, pair_samples=200000, fit_from=1.0)
def _mixing(ctx, p, seed):
    G, nu, Z = ctx.group, ctx.density, ctx.total
    S = np.asarray(p["s_grid"], dtype=float)
    means, _ = ctx.box_means(BMS)
    seeds = np.random.SeedSequence(seed).spawn(3)
    ens = correlation_ensemble(G, nu, S, ctx.bumps, int(p["per_box"]), int(seeds[0].generate_state(1)[0]),
                               Z, means)
    rms, floor = ens.rms(), ens.floor()
    use = S >= p["fit_from"]
    fit = fit_rate(EXPONENTIAL, S[use], rms[use])

    half = len(ctx.bumps) // 2
    A, B = BumpSum(ctx.bumps[:half], G), BumpSum(ctx.bumps[half:], G)
    mA, mB = float(means[:half].sum()), float(means[half:].sum())
    N = int(p["pair_samples"])
    direct = mixing_correlation(G, nu, S, A, B, N, int(seeds[1].generate_state(1)[0]), Z, mA, mB)
    swapped = swapped_correlation(G, nu, S, A, B, N, int(seeds[2].generate_state(1)[0]), Z, mA, mB)
    z = np.abs(direct.value - swapped.value) / np.hypot(direct.stderr, swapped.stderr)

    verdicts = {"decay-positive": fit.kappa > 0, "swap-agrees": bool(np.all(z < ctx.tol["sigma"]))}
    if 0.0 in S:
        diag = np.diagonal(ens.value[list(S).index(0.0)])
        verdicts["variance-positive"] = bool(np.all(diag > 0))
    rows = [(s, a, b, c, d, e, f, zz) for s, a, b, c, d, e, f, zz in
            zip(S, rms, floor, direct.value, direct.stderr, swapped.value, swapped.stderr, z)]
    summary = {"pairs": len(ctx.bumps) ** 2, "inconclusive_pair": direct.inconclusive,
               "max_swap_z": float(z.max())}
    return Result(["s", "rms_correlation", "rms_stderr", "pair_direct", "pair_direct_se", "pair_swapped",
                   "pair_swapped_se", "swap_z"], rows, verdicts, fit.as_dict(), summary,
                  {"x": "s", "y": ["rms_correlation"], "err": "rms_stderr", "logy": True, "fit": True})


@experiment("dual-bms", 7, "Hopf-sampled versus product-structure box masses; support of the samples",
            bumps=3, samples=50000, nodes=24, support_samples=20000)
def _dual_bms(ctx, p, seed):
    G, nu = ctx.group, ctx.density
    seeds = np.random.SeedSequence(seed).spawn(2 * int(p["bumps"]) + 2)
    rows, zs = [], []
    for i, b in enumerate(ctx.bumps[: int(p["bumps"])]):
        for k, kind in enumerate((BMS, BR)):
            smp = global_sampler(kind, G, nu, int(p["samples"]), int(seeds[2 * i + k].generate_state(1)[0]),
                                 region=b)
            val, se = smp.integrate(b.lift)
            prod = product_integral(kind, nu, b, nodes=int(p["nodes"]))
            z = abs(val - prod) / se
            zs.append(z)
            rows.append((i, kind, val, se, prod, z))
    sup = global_sampler(BMS, G, nu, int(p["support_samples"]), int(seeds[-2].generate_state(1)[0]))
    foot = frame_basepoint(sup.frames[sup.weights > 0])
    dist = distance_to_core(G, foot, ctx.core)
    br = global_sampler(BR, G, nu, 2000, int(seeds[-1].generate_state(1)[0]), region=ctx.bumps[0])
    back_in_limit = bool(np.all(G.in_limit_set(endpoints(br.frames)[1])))
    verdicts = {"dual-agree": bool(np.all(np.array(zs) < ctx.tol["sigma"])),
                "bms-support-in-core": float(dist.max()) <= ctx.core.radius_bound,
                "br-backward-in-limit-set": back_in_limit}
    return Result(["bump", "measure", "hopf", "hopf_stderr", "product", "z"], rows, verdicts,
                  summary={"max_footpoint_distance": float(dist.max()), "core_mesh": ctx.core.radius_bound})


# -- Diophantine, nondivergence, good functions ---------------------------------------------


@experiment("diophantine", 8, "Backward excursions of frames with x- in the limit set",
            count=100, eps=0.5, span=10.0, word_length=8)
def _diophantine(ctx, p, seed):
    from horolab.schottky import diophantine_check

    rng = np.random.default_rng(seed)
    G, core, n = ctx.group, ctx.core, ctx.dim
    _, mats = G.shell(int(p["word_length"]))
    s0 = float(np.ceil(core.diameter) + 1)
    rows = []
    while len(rows) < int(p["count"]):
        xm = normalize_null(fixed_points(mats[rng.integers(len(mats))])[0])
        xp = sphere_sample(n, 1, rng)[0]
        if -float(pairing(xp, xm)) < 1e-6:
            continue
        x = frame_from_endpoints(xp, xm, float(rng.uniform(-1, 1)))
        res = diophantine_check(G, x, p["eps"], s0, s0 + p["span"], core)
        rows.append((len(rows), res.compliant, res.max_slope, float(res.distances.max())))
    theta = np.zeros(n)
    theta[:2] = [np.sqrt(0.5), np.sqrt(0.5)]
    off = sphere_to_null(theta)
    try:
        diophantine_check(G, frame_from_endpoints(sphere_sample(n, 1, rng)[0], off), p["eps"], s0,
                          s0 + 1, core)
        rejected = False
    except PreconditionViolation:
        rejected = bool(not G.in_limit_set(off)[0])
    slopes = np.array([r[2] for r in rows])
    verdicts = {"all-compliant": all(r[1] for r in rows),
                "slope-bound": bool(np.all(slopes <= 1 - p["eps"])),
                "off-limit-set-rejected": rejected}
    return Result(["frame", "compliant", "max_slope", "max_distance"], rows, verdicts,
                  summary={"s0": s0, "core_diameter": core.diameter})


@experiment("nondivergence", 8, "Leaf mass far from the core as a function of the distance threshold",
            frames=8, T=10.0, s=2.0, thresholds=12)
def _nondivergence(ctx, p, seed):
    core = ctx.core
    top = core.diameter + core.radius_bound
    R = np.linspace(0, top + 1, int(p["thresholds"]))
    M = np.array([nondivergence_profile(ctx.group, x, p["T"], p["s"], R, ctx.density, core)
                  for x in ctx.frames[: int(p["frames"])]])
    totals = np.array([leaf_measure(PS, flow_left(-np.log(p["s"]), x), p["T"] / p["s"], ctx.density).total()
                       for x in ctx.frames[: int(p["frames"])]])
    frac = M / totals[:, None]
    rows = [(r, f, mx) for r, f, mx in zip(R, frac.mean(axis=0), frac.max(axis=0))]
    verdicts = {"monotone": bool(np.all(np.diff(M, axis=1) <= 1e-15 * totals[:, None])),
                "zero-beyond-core": bool(np.all(M[:, R > top] == 0)),
                "total-at-zero": bool(np.allclose(M[:, 0], totals, rtol=1e-12, atol=0))}
    return Result(["R", "mean_mass_fraction", "max_mass_fraction"], rows, verdicts,
                  summary={"core_diameter": core.diameter, "core_mesh": core.radius_bound},
                  plot={"x": "R", "y": ["mean_mass_fraction", "max_mass_fraction"]})


@experiment("good-function", 8, "Sublevel-set masses of low-degree polynomials on leaf balls",
            window=2.0, radius=1.0, resolution=0.0005)
def _good_function(ctx, p, seed):
    n = ctx.dim
    x = np.eye(n + 1)
    centre = np.zeros(n - 1)
    ps = leaf_measure(PS, x, p["window"], ctx.density)
    leb = leaf_measure(LEBESGUE, x, p["window"], resolution=p["resolution"])
    # roots of the quadratic at weighted quartiles of the PS atoms, so its zero set meets the support
    inner = np.max(np.abs(ps.points - centre), axis=1) <= p["radius"]
    a, b = _weighted_quantiles(ps.points[inner, 0], ps.masses[inner], [0.25, 0.75])
    polys = {"linear": lambda t: t[:, 0], "quadratic": lambda t: (t[:, 0] - a) * (t[:, 0] - b),
             "constant": lambda t: np.full(len(t), 0.7)}
    rows, fits = [], {}
    for mname, leaf in (("PS", ps), ("Lebesgue", leb)):
        for pname, f in polys.items():
            g = good_function_check(leaf, f, centre, p["radius"])
            fits[(mname, pname)] = g
            rows.append((pname, mname, g.beta, g.band[0], g.band[1], g.degenerate))
    verdicts = {"ps-linear-positive": fits[("PS", "linear")].beta > 0,
                "ps-quadratic-positive": fits[("PS", "quadratic")].beta > 0,
                "lebesgue-linear-one": abs(fits[("Lebesgue", "linear")].beta - 1) <= 0.1,
                "constant-degenerate": fits[("PS", "constant")].degenerate}
    return Result(["polynomial", "measure", "beta", "band_lo", "band_hi", "degenerate"], rows, verdicts,
                  summary={"quadratic_roots": [a, b]})


def _weighted_quantiles(values, weights, q):
    order = np.argsort(values)
    cum = np.cumsum(weights[order]) / weights.sum()
    return [float(values[order][np.searchsorted(cum, v)]) for v in q]


@experiment("rate-oracle", 9, "Rate fits on synthetic exact laws and on white noise",
            kappa=0.7, prefactor=3.0, noise_points=12)
def _rate_oracle(ctx, p, seed):
    rng = np.random.default_rng(seed)
    k, c = p["kappa"], p["prefactor"]
    T = np.array([4.0, 8.0, 16.0, 32.0, 64.0])
    S = np.arange(1.0, 7.0)
    power = fit_rate(POWER, T, c * T ** (-k))
    expo = fit_rate(EXPONENTIAL, S, c * np.exp(-k * S))
    xs = np.arange(1.0, int(p["noise_points"]) + 1)
    noise = fit_rate(EXPONENTIAL, xs, np.exp(rng.normal(0, 0.3, len(xs))))
    tol = ctx.tol["rate_oracle"]
    rows = [("power", power.kappa, power.band[0], power.band[1]),
            ("exponential", expo.kappa, expo.band[0], expo.band[1]),
            ("white-noise", noise.kappa, noise.band[0], noise.band[1])]
    verdicts = {"power-exact": abs(power.kappa - k) < tol, "exponential-exact": abs(expo.kappa - k) < tol,
                "noise-band-contains-zero": noise.band[0] <= 0 <= noise.band[1]}
    return Result(["law", "kappa", "band_lo", "band_hi"], rows, verdicts)
