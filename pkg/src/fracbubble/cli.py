"""Configuration ingestion, experiment orchestration, and result emission.

One config fully determines every output byte: sweep orders are fixed,
aggregation is ordered, and no wall-clock data enters hashed payloads (the
manifest records timings next to, not inside, the hashed files).

Exit codes: 0 ok, 1 verification failure, 2 computation error, 3 config error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dfield
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from . import __version__
from .bubble import (
    BubblePoint,
    bubble_moment,
    bubble_moment_closed,
    gram_constants,
    pde_residual,
    tangent_residual,
)
from .errors import ConfigError, FracBubbleError, SublinearNeedsPositiveWeight
from .field import (
    Field,
    Grid,
    energy,
    field_to_raw,
    frac_laplacian,
    hs_inner,
    norms,
    riesz_potential,
)
from .landscape import build_slab, find_critical_points, gamma, small_mu_limit, tail_rates
from .model import Bump, CompactWeight, ProblemParams, check_regime, weight_support_box
from .reduction import construct_solution, kernel_certificate, solve_auxiliary
from .regularity import derive_growth, level_set_chain_ok, recursion_audit, run_iteration

DEFAULT_CONFIG = {
    "n": 1,
    "s": 0.2,
    "q": 1.5,
    "eps": 0.01,
    "seed": 2024,
    "weight": {"bumps": [{"c": [0.0], "r": 1.0, "a": 1.0, "k": 2}]},
    "grid": {"L": 40.0, "N": 4096},
    "sweeps": {
        "landscape": {"mu_points": 21, "xi_points": 31},
        "asymptotics": {"limit_window": [8, 13],
                        "divergence_window": [4, 12]},
        "solve": {"eps_list": [1e-3, 1e-2]},
        "regularity": {"delta": 0.1, "terms": [[0.0, None]], "kmax": 40},
    },
}


@dataclass
class RunConfig:
    params: ProblemParams
    weight: CompactWeight
    grid: Grid
    seed: int
    sweeps: dict
    raw: dict

    @property
    def digest(self) -> str:
        return hashlib.sha256(
            json.dumps(self.raw, sort_keys=True).encode()).hexdigest()


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def parse_config(path: Optional[str]) -> RunConfig:
    raw = DEFAULT_CONFIG
    if path is not None:
        try:
            user = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        raw = _merge(DEFAULT_CONFIG, user)
    try:
        params = ProblemParams(n=int(raw["n"]), s=float(raw["s"]),
                               q=float(raw["q"]), eps=float(raw["eps"]))
        bumps = tuple(
            Bump(tuple(float(c) for c in b["c"]), float(b["r"]),
                 float(b["a"]), int(b["k"]))
            for b in raw["weight"]["bumps"])
        weight = CompactWeight(bumps)
        if weight.n != params.n:
            raise ConfigError(
                f"weight dimension {weight.n} does not match n={params.n}")
        grid = Grid(n=params.n, L=float(raw["grid"]["L"]),
                    N=int(raw["grid"]["N"]))
    except ConfigError:
        raise
    except (FracBubbleError, ValueError, KeyError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    return RunConfig(params=params, weight=weight, grid=grid,
                     seed=int(raw["seed"]), sweeps=raw["sweeps"], raw=raw)


def _threads(args) -> int:
    env = os.environ.get("FRACBUBBLE_THREADS")
    if env is not None:
        return max(1, int(env))
    return max(1, args.threads)


def _pmap(fn: Callable, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out: Path, cfg: RunConfig, command: str,
                    files: list[Path], wall: float) -> None:
    manifest = {
        "command": command,
        "config_digest": cfg.digest,
        "versions": {"fracbubble": __version__, "numpy": np.__version__},
        "files": {f.name: _sha256(f) for f in sorted(files)},
        "wall_time_s": wall,
    }
    _dump_json(manifest, out / f"manifest_{command}.json")


# -- landscape ----------------------------------------------------------------

def cmd_landscape(cfg: RunConfig, out: Path, threads: int) -> int:
    t0 = time.time()
    check_regime(cfg.params, cfg.weight)
    params, h = cfg.params, cfg.weight
    slab = build_slab(h, params)
    sw = cfg.sweeps["landscape"]
    mus = np.geomspace(slab.mu1, slab.mu2, int(sw["mu_points"]))
    per_axis = int(sw["xi_points"]) if params.n == 1 else \
        max(7, int(sw["xi_points"]) // (2 ** (params.n - 1)))
    axes = [np.linspace(-slab.R, slab.R, per_axis)] * params.n
    xis = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")],
                   axis=-1)

    def row(args):
        mu, xi = args
        gs = gamma(float(mu), xi, h, params)
        return (gs.mu, *gs.xi, gs.gamma, *gs.grad)

    items = [(mu, xi) for mu in mus for xi in xis]
    rows = _pmap(row, items, threads)
    csv_path = out / "landscape.csv"
    xi_cols = ",".join(f"xi_{j+1}" for j in range(params.n))
    dxi_cols = ",".join(f"dgamma_dxi_{j+1}" for j in range(params.n))
    with open(csv_path, "w") as fh:
        fh.write(f"mu,{xi_cols},gamma,dgamma_dmu,{dxi_cols}\n")
        for r in rows:
            fh.write(",".join(repr(float(v)) for v in r) + "\n")

    kinds = ("max", "min") if h.sign_changing else ("max",)
    points = find_critical_points(h, params, slab, kinds=kinds)
    slab_path = out / "slab.json"
    _dump_json({"mu1": slab.mu1, "mu2": slab.mu2, "R": slab.R, "B": slab.B,
                "mu0": slab.mu0, "xi0": list(slab.xi0),
                "boundary_max": slab.boundary_max}, slab_path)
    pts_path = out / "critical_points.json"
    _dump_json([{"mu": c.mu, "xi": list(c.xi), "kind": c.kind,
                 "gamma": c.gamma, "grad_norm": c.grad_norm}
                for c in points], pts_path)
    _write_manifest(out, cfg, "landscape", [csv_path, slab_path, pts_path],
                    time.time() - t0)
    return 0


# -- asymptotics ---------------------------------------------------------------

def cmd_asymptotics(cfg: RunConfig, out: Path, threads: int) -> int:
    t0 = time.time()
    check_regime(cfg.params, cfg.weight)
    params, h = cfg.params, cfg.weight
    window = cfg.sweeps["asymptotics"]["limit_window"] \
        if params.supercritical_q \
        else cfg.sweeps["asymptotics"].get("divergence_window", [4, 12])
    jlo, jhi = window
    mu_fit, xi_fit = tail_rates(h, params)
    records = []
    records.append({
        "lemma": "small_scale_uniform_decay",
        "fitted_slope": mu_fit.slope, "expected_slope": mu_fit.expected,
        "r2": mu_fit.r2, "tolerance": 0.02,
        "pass": bool(abs(mu_fit.slope - mu_fit.expected)
                     <= 0.02 * abs(mu_fit.expected))})
    records.append({
        "lemma": "far_center_decay",
        "fitted_slope": xi_fit.slope, "expected_slope": xi_fit.expected,
        "r2": xi_fit.r2, "tolerance": 0.02,
        "pass": bool(abs(xi_fit.slope - xi_fit.expected)
                     <= 0.02 * abs(xi_fit.expected))})
    xi0 = h.bumps[int(np.argmax([b.a for b in h.bumps]))].c
    rep = small_mu_limit(xi0, h, params, jrange=(int(jlo), int(jhi)))
    if params.supercritical_q:
        rel = abs(rep.limit - rep.predicted) / abs(rep.predicted)
        records.append({
            "lemma": "small_scale_limit",
            "fitted_slope": rep.limit, "expected_slope": rep.predicted,
            "r2": 1.0, "tolerance": 1e-3, "pass": bool(rel <= 1e-3)})
        records.append({
            "lemma": "limit_sign",
            "fitted_slope": float(np.sign(rep.limit)),
            "expected_slope": float(np.sign(h(np.asarray(xi0)))),
            "r2": 1.0, "tolerance": 0.0,
            "pass": bool(np.sign(rep.limit) == np.sign(h(np.asarray(xi0))))})
    else:
        records.append({
            "lemma": "small_scale_divergence",
            "verdict": rep.verdict, "monotone": rep.monotone,
            "growth_ratio": rep.growth_ratio,
            "pass": bool(rep.verdict == "consistent with +infinity")})
        records.append({
            "lemma": "scaled_values_positive",
            "min_scaled": float(min(v for _, v in rep.samples)),
            "pass": bool(all(v > 0.0 for _, v in rep.samples))})
    path = out / "asymptotics.json"
    _dump_json(records, path)
    _write_manifest(out, cfg, "asymptotics", [path], time.time() - t0)
    ok = all(r["pass"] for r in records)
    return 0 if ok else 2


# -- solve ----------------------------------------------------------------------

def cmd_solve(cfg: RunConfig, out: Path, threads: int) -> int:
    t0 = time.time()
    params, h = cfg.params, cfg.weight
    if params.n not in (1, 2):
        raise ConfigError(f"solve supports n in {{1,2}}, got n={params.n}")
    check_regime(params, h)
    slab = build_slab(h, params)
    kinds = ("max", "min") if (h.sign_changing and params.supercritical_q) \
        else ("max",)
    points = find_critical_points(h, params, slab, kinds=kinds)
    eps_list = [float(e) for e in cfg.sweeps["solve"]["eps_list"]]
    files = []
    reports = []
    for kind in kinds:
        for eps in eps_list:
            rep = construct_solution(kind, eps, h, params, cfg.grid,
                                     slab=slab, points=points)
            tag = f"{kind}_{eps:.0e}"
            snap = out / f"solution_{tag}.f64"
            field_to_raw(rep.u, snap)
            files += [snap, snap.with_suffix(snap.suffix + ".json")]
            trace_path = out / f"newton_trace_{tag}.csv"
            with open(trace_path, "w") as fh:
                nq = params.n + 1
                acol = ",".join(f"alpha_{i+1}" for i in range(nq))
                fh.write(f"iter,residual,sup_w,{acol}\n")
                for row in rep.state.trace:
                    fh.write(",".join(
                        [repr(row["iter"]), repr(row["residual"]),
                         repr(row["sup_w"])]
                        + [repr(a) for a in row["alpha"]]) + "\n")
            files.append(trace_path)
            reports.append({
                "kind": kind, "eps": eps, "mu": rep.mu, "xi": list(rep.xi),
                "residual_sup": rep.residual_sup,
                "residual_dual": rep.residual_dual,
                "residual_floor": rep.residual_floor,
                "positivity_min": rep.positivity_min,
                "energy_error": rep.energy_error,
                "newton_iters": rep.state.newton_iters,
            })
    rep_path = out / "solve_report.json"
    _dump_json(reports, rep_path)
    files.append(rep_path)
    _write_manifest(out, cfg, "solve", files, time.time() - t0)
    return 0


# -- regularity ------------------------------------------------------------------

def cmd_regularity(cfg: RunConfig, out: Path, threads: int) -> int:
    t0 = time.time()
    params = cfg.params
    sw = cfg.sweeps["regularity"]
    terms = [(float(g), None if m is None else float(m))
             for g, m in sw["terms"]]
    spec = derive_growth(params, terms)
    b = BubblePoint.at(params, 1.0)
    u = b.sample(cfg.grid)
    trace = run_iteration(u, spec, float(sw["delta"]), kmax=int(sw["kmax"]))
    audit = recursion_audit(trace, spec)
    trace_path = out / "regularity_trace.csv"
    with open(trace_path, "w") as fh:
        fh.write("k,A_k,U_k,support_measure\n")
        for k, (ak, uk, mk) in enumerate(zip(trace.levels, trace.U,
                                             trace.support_measure)):
            fh.write(f"{k},{repr(ak)},{repr(uk)},{repr(mk)}\n")
    audit_path = out / "regularity_audit.json"
    _dump_json({
        "delta": trace.delta, "converged": trace.converged,
        "theta": audit.theta,
        "fitted_C": None if np.isnan(audit.C) else audit.C,
        "max_residual": audit.max_residual, "n_pairs": audit.n_pairs,
        "trivial": audit.trivial, "pass": audit.passed,
        "derived": [{"gamma_i": t.gamma_i,
                     "m_i": t.m_i, "m_under": t.m_under,
                     "theta_i": t.theta_i, "a_i": t.a_i,
                     "xi_i": t.xi_i, "tau_i": t.tau_i}
                    for t in spec.terms],
    }, audit_path)
    _write_manifest(out, cfg, "regularity", [trace_path, audit_path],
                    time.time() - t0)
    return 0


# -- verify ----------------------------------------------------------------------

def _check_model_identities(cfg: RunConfig):
    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 4))
        s = float(rng.uniform(0.01, min(0.99, n / 4.0 - 1e-3)))
        if n <= 4 * s:
            continue
        p = (n + 2 * s) / (n - 2 * s)
        crit = 2 * n / (n - 2 * s)
        beta = 2 * n / (n + 2 * s)
        worst = max(worst, abs(crit / beta - p),
                    abs((p - 1) * beta * (n + 2 * s) / (4 * s) - crit))
    return worst < 1e-12, {"worst_identity_error": worst}


def _check_weight_support(cfg: RunConfig):
    h = cfg.weight
    lo, hi = weight_support_box(h)
    rng = np.random.default_rng(cfg.seed + 1)
    outside = lo - 0.5 + rng.random((50, cfg.params.n)) * 0.4
    vals = h(outside)
    return bool(np.all(vals == 0.0)), {"max_outside": float(np.max(np.abs(vals)))}


def _check_bubble_residual(cfg: RunConfig):
    b = BubblePoint.at(cfg.params, 1.0)
    res = pde_residual(b, cfg.grid)
    return res <= 1e-3, {"rel_sup_residual": res}


def _check_tangent_residual(cfg: RunConfig):
    b = BubblePoint.at(cfg.params, 1.0)
    res = max(tangent_residual(b, cfg.grid, j)
              for j in range(1, cfg.params.n + 2))
    return res <= 1e-3, {"max_rel_residual": res}


def _check_gram(cfg: RunConfig):
    vals = {}
    ok = True
    for mu in (0.5, 1.0, 2.0):
        rep = gram_constants(BubblePoint.at(cfg.params, mu))
        lam = np.asarray(rep.lam)
        ok = ok and bool(np.all(lam > 0.0)) \
            and rep.offdiag_max <= 1e-6 * float(np.max(lam)) \
            and rep.iso_spread <= 1e-6
        vals[f"mu={mu}"] = [float(v) for v in lam]
    return ok, vals


def _check_moment(cfg: RunConfig):
    if not cfg.params.supercritical_q:
        return True, {"note": "sublinear exponent, moment not integrable"}
    a = bubble_moment(cfg.params)
    bclosed = bubble_moment_closed(cfg.params)
    rel = abs(a - bclosed) / abs(bclosed)
    return rel <= 1e-8, {"quadrature": a, "closed_form": bclosed, "rel": rel}


def _check_field_roundtrip(cfg: RunConfig):
    g = Grid(cfg.params.n, cfg.grid.L, min(cfg.grid.N, 512))
    rng = np.random.default_rng(cfg.seed + 2)
    u = Field(g, rng.standard_normal((g.N,) * g.n))
    s = cfg.params.s
    back = riesz_potential(frac_laplacian(u, s), s)
    target = u.values - np.mean(u.values)
    err = float(np.max(np.abs(back.values - target)))
    return err <= 1e-10 * max(1.0, float(np.max(np.abs(u.values)))), {"max_err": err}


def _check_field_pairing(cfg: RunConfig):
    g = Grid(cfg.params.n, cfg.grid.L, min(cfg.grid.N, 512))
    rng = np.random.default_rng(cfg.seed + 3)
    s = cfg.params.s
    psi = rng.standard_normal((g.N,) * g.n)
    psi -= psi.mean()
    phi = rng.standard_normal((g.N,) * g.n)
    lhs = hs_inner(riesz_potential(Field(g, psi), s), Field(g, phi), s)
    rhs = g.integrate(psi * phi)
    err = abs(lhs - rhs) / max(abs(rhs), 1e-300)
    return err <= 1e-10, {"rel_err": err}


def _check_energy_split(cfg: RunConfig):
    g = Grid(cfg.params.n, cfg.grid.L, min(cfg.grid.N, 512))
    rng = np.random.default_rng(cfg.seed + 4)
    u = Field(g, rng.standard_normal((g.N,) * g.n))
    rep = energy(u, cfg.params, cfg.weight)
    err = abs(rep.feps - (rep.f0 - cfg.params.eps * rep.G))
    return err == 0.0, {"abs_err": err}


def _random_compact_fields(g: Grid, seed: int, count: int):
    rng = np.random.default_rng(seed)
    r = g.radius((0.0,) * g.n)
    fields = []
    for _ in range(count):
        width = rng.uniform(0.5, 3.0)
        center = rng.uniform(-g.L / 4, g.L / 4, size=g.n)
        rr = g.radius(center)
        prof = np.maximum(1.0 - (rr / width) ** 2, 0.0) ** 2
        amp = rng.uniform(0.2, 2.0) * rng.choice([-1.0, 1.0])
        wav = np.cos(rng.uniform(0.0, 3.0) * rr)
        fields.append(Field(g, amp * prof * wav))
    return fields


def _check_potential_bounds(cfg: RunConfig):
    g = Grid(cfg.params.n, cfg.grid.L, min(cfg.grid.N, 1024))
    s = cfg.params.s
    beta = cfg.params.dual_exp
    crit = cfg.params.crit_exp
    ratios_hls, ratios_sob, ratios_sup = [], [], []
    for f in _random_compact_fields(g, cfg.seed + 5, 50):
        pot = riesz_potential(f, s, mass_adjust=True)
        nf = norms(f, s, lp_orders=(beta, crit))
        np_ = norms(pot, s, lp_orders=(crit,))
        ratios_hls.append(np_.lp[crit] / nf.lp[beta])
        ratios_sob.append(nf.lp[crit] / max(nf.hs_semi, 1e-300))
        ratios_sup.append(np_.sup / (nf.sup + nf.lp[beta]))
    out = {}
    ok = True
    for name, rr in (("hls", ratios_hls), ("sobolev", ratios_sob),
                     ("sup_potential", ratios_sup)):
        rr = np.asarray(rr)
        med = float(np.median(rr))
        mx = float(np.max(rr))
        out[name] = {"max_ratio": mx, "median_ratio": med}
        ok = ok and mx <= 2.0 * med
    return ok, out


def _check_landscape_basics(cfg: RunConfig):
    params, h = cfg.params, cfg.weight
    g1 = gamma(0.7, (0.3,) * params.n, h, params, want_grad=False).gamma
    g3 = gamma(0.7, (0.3,) * params.n, h.scaled(3.0), params,
               want_grad=False).gamma
    lin_err = abs(g3 - 3.0 * g1) / max(abs(g1), 1e-300)
    v = (0.37,) * params.n
    gs = gamma(0.9, (0.1,) * params.n, h, params, want_grad=False).gamma
    gt = gamma(0.9, tuple(0.1 + t for t in v), h.shifted(v), params,
               want_grad=False).gamma
    trans_err = abs(gt - gs) / max(abs(gs), 1e-300)
    # sample below the landscape peak, where the small-scale decay sets in
    decay = [max(abs(gamma(2.0 ** (-j), (x,) * params.n, h, params,
                          want_grad=False).gamma)
                 for x in np.linspace(-2, 2, 9))
             for j in range(4, 10)]
    mono = bool(np.all(np.diff(decay) < 0.0))
    ok = lin_err <= 1e-12 and trans_err <= 1e-10 and mono
    return ok, {"linearity_err": lin_err, "translation_err": trans_err,
                "uniform_decay": decay}


def _check_reduction_zero(cfg: RunConfig):
    params, h = cfg.params, cfg.weight
    if params.n not in (1, 2):
        return True, {"note": "solver restricted to n in {1,2}"}
    b = BubblePoint.at(params, 1.0)
    st = solve_auxiliary(b, 0.0, h, params, cfg.grid)
    ok = st.newton_iters == 0 and float(np.max(np.abs(st.w.values))) == 0.0 \
        and float(np.max(np.abs(st.alpha))) == 0.0
    return ok, {"iters": st.newton_iters,
                "sup_w": float(np.max(np.abs(st.w.values)))}


def _check_reduction_linear_law(cfg: RunConfig):
    params, h = cfg.params, cfg.weight
    if params.n not in (1, 2):
        return True, {"note": "solver restricted to n in {1,2}"}
    check_regime(params, h)
    b = BubblePoint.at(params, 1.0)
    from .field import xs_norm
    from .reduction import AuxiliaryProblem
    prob = AuxiliaryProblem(b, h, params, cfg.grid)
    wn, orth = [], 0.0
    eps_pair = (1e-3, 1e-2)
    for eps in eps_pair:
        st = solve_auxiliary(b, eps, h, params, cfg.grid, problem=prob)
        wn.append(xs_norm(st.w, params.s))
        orth = max(orth, max(abs(hs_inner(st.w, qi, params.s))
                             for qi in prob.qs))
    slope = float(np.log(wn[1] / wn[0]) / np.log(eps_pair[1] / eps_pair[0]))
    ok = abs(slope - 1.0) <= 0.05 and orth <= 1e-10
    return ok, {"two_point_slope": slope, "max_orth": orth}


def _check_kernel_gap(cfg: RunConfig):
    params = cfg.params
    if params.n != 1:
        return True, {"note": "dense certificate kept to n=1"}
    b = BubblePoint.at(params, 1.0)
    g = Grid(1, cfg.grid.L, 1024)
    sv = kernel_certificate(b, g)
    nk = params.n + 1
    ratio = float(sv[nk] / max(sv[nk - 1], 1e-300))
    return ratio >= 1e3, {"singular_values": [float(v) for v in sv],
                          "gap_ratio": ratio}


def _check_regularity(cfg: RunConfig):
    params = cfg.params
    spec = derive_growth(params, [(0.0, None)])
    b = BubblePoint.at(params, 1.0)
    u = b.sample(Grid(params.n, cfg.grid.L, min(cfg.grid.N, 1024)))
    trace = run_iteration(u, spec, 0.1)
    audit = recursion_audit(trace, spec)
    chain = level_set_chain_ok(u, spec, 0.9)
    ok = trace.converged and audit.passed and chain \
        and spec.theta > 1.0 and trace.U[-1] <= 1e-12
    return ok, {"theta": spec.theta, "converged": trace.converged,
                "chain": chain, "U_last": trace.U[-1]}


CHECKS: list[tuple[str, Callable]] = [
    ("model_exponent_identities", _check_model_identities),
    ("model_weight_support", _check_weight_support),
    ("bubble_profile_residual", _check_bubble_residual),
    ("bubble_tangent_residual", _check_tangent_residual),
    ("bubble_gram_frame", _check_gram),
    ("bubble_moment_match", _check_moment),
    ("field_symbol_roundtrip", _check_field_roundtrip),
    ("field_potential_pairing", _check_field_pairing),
    ("field_energy_split", _check_energy_split),
    ("field_potential_bounds", _check_potential_bounds),
    ("landscape_basics", _check_landscape_basics),
    ("reduction_zero_eps", _check_reduction_zero),
    ("reduction_linear_law", _check_reduction_linear_law),
    ("reduction_kernel_gap", _check_kernel_gap),
    ("regularity_cascade", _check_regularity),
]


def cmd_verify(cfg: RunConfig, out: Path, threads: int,
               list_only: bool = False) -> int:
    if list_only:
        for name, _ in CHECKS:
            print(name)
        return 0
    t0 = time.time()
    report = {}
    all_ok = True
    for name, fn in CHECKS:
        try:
            ok, info = fn(cfg)
        except FracBubbleError as exc:
            ok, info = False, {"error": str(exc)}
        report[name] = {"pass": bool(ok), **_jsonable(info)}
        all_ok = bool(all_ok and ok)
    path = out / "verify_report.json"
    _dump_json({"all_pass": all_ok, "checks": report}, path)
    _write_manifest(out, cfg, "verify", [path], time.time() - t0)
    for name in sorted(report):
        status = "pass" if report[name]["pass"] else "FAIL"
        print(f"{status}  {name}")
    return 0 if all_ok else 1


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


# -- entry point -----------------------------------------------------------------

def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fracbubble",
        description="Bubble continuation experiments for the perturbed "
                    "critical profile equation")
    parser.add_argument("command",
                        choices=["landscape", "asymptotics", "solve",
                                 "regularity", "verify"])
    parser.add_argument("--config", default=None, help="JSON config path")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--list", action="store_true",
                        help="list verify checks without running")
    args = parser.parse_args(argv)
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    threads = _threads(args)
    dispatch = {
        "landscape": cmd_landscape,
        "asymptotics": cmd_asymptotics,
        "solve": cmd_solve,
        "regularity": cmd_regularity,
    }
    try:
        if args.command == "verify":
            return cmd_verify(cfg, out, threads, list_only=args.list)
        return dispatch[args.command](cfg, out, threads)
    except (ConfigError, SublinearNeedsPositiveWeight) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except FracBubbleError as exc:
        print(f"computation error: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
