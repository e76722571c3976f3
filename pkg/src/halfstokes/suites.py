"""Verification suites.

Each ``criterion_*`` function runs one group of checks and returns
``(checks, artifacts)``; artifacts hold the raw numbers used for tables and
figures.  Suites bundle criteria and write reports, CSV tables and figures.

    weights        Laplacian bound of the dual weight, Muckenhoupt audit
    interpolation  weighted interpolation inequality
    helmholtz      Helmholtz decomposition identities and constants
    oracle-xcheck  kernel identities, Green tensor, projection-solver agreement
    decay          boundary trace, decay rates, weighted bounds, continuity at 0
"""
from __future__ import annotations

import csv
import json
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import data as D
from . import helmholtz as H
from . import kernels as K
from . import oracle as O
from . import plots
from . import weights as W
from .analysis import (Check, continuity_at_zero, fit_decay, interpolation_audit, interpolation_exponents,
                       monotonicity_audit, predicted_exponent, write_report)
from .fields import Grid, VectorField, trace_boundary
from .semigroup import HalfSpaceEvaluator, WholeSpaceEvaluator, check_box_rule

__all__ = ["SUITES", "SUITE_NAMES", "EXAMPLE_SPEC", "run_suite", "criterion_kernel_identities",
           "criterion_weight_laplacian", "criterion_muckenhoupt", "criterion_trace", "criterion_oracle",
           "criterion_decay", "criterion_semigroup_bounds", "criterion_continuity",
           "criterion_helmholtz", "criterion_interpolation"]

EXAMPLE_SPEC = W.WeightSpec(3, 4.0, ((0.0, 0.0, 1.0), (0.0, 0.0, 2.0)), (0.125, 0.125))

# smooth datum shared by the trace, semigroup-bound and continuity checks
SMOOTH = {"center": (0.0, 0.0, 3.0), "width": 0.7, "direction": (1.0, 0.3, 0.0)}


def _write_csv(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([f"{v:.10g}" if isinstance(v, (float, np.floating)) else v for v in r])


def _vnorm(v, grid, q):
    """Plain L^q norm of a vector array (q = inf gives the max)."""
    m = np.sqrt(np.sum(v * v, axis=0))
    if np.isinf(q):
        return float(m.max())
    return float(np.sum(m ** q * grid.quad_weights()) ** (1 / q))


# ----------------------------------------------------------------------------
# criterion 1: kernel identities

def criterion_kernel_identities():
    checks, art = [], {}
    # heat-kernel mass by the trapezoid rule (spectrally accurate for Gaussians)
    errs = []
    for t in (0.05, 0.7):
        h, R = 0.25 * np.sqrt(t), 12 * np.sqrt(t)
        x = np.arange(-R, R + h / 2, h)
        X = np.stack(np.meshgrid(x, x, x, indexing="ij"), -1)
        errs.append(abs(float(K.heat_kernel(t, X).sum() * h ** 3) - 1.0))
    checks.append(Check("kernel.heat_mass", 1.0, 1.0 + max(errs), 1e-8, max(errs) <= 1e-8,
                        {"errors": errs}))
    # semigroup law H(t) * H(s) = H(t + s) by direct quadrature at a few points
    t, s, h = 0.3, 0.5, 0.1
    y = np.arange(-7, 7 + h / 2, h)
    Y = np.stack(np.meshgrid(y, y, y, indexing="ij"), -1)
    Hs = K.heat_kernel(s, Y)
    rel = []
    for x in ((0.0, 0.0, 0.0), (0.5, -0.3, 1.0), (1.0, 1.0, 1.0)):
        x = np.asarray(x)
        conv = float((K.heat_kernel(t, x - Y) * Hs).sum() * h ** 3)
        ex = float(K.heat_kernel(t + s, x))
        rel.append(abs(conv - ex) / ex)
    checks.append(Check("kernel.semigroup_law", 0.0, max(rel), 1e-6, max(rel) <= 1e-6, {"relative": rel}))
    # harmonicity of E away from the pole: 7-point Laplacian, observed order
    rng = np.random.default_rng(7)
    pts = rng.normal(size=(20, 3))
    pts /= np.linalg.norm(pts, axis=1)[:, None]
    pts *= rng.uniform(0.8, 1.5, size=(20, 1))
    res = []
    hs = [0.1, 0.05, 0.025]
    for h in hs:
        lap = -6 * K.laplace_fundamental(pts)
        for a in range(3):
            e = np.zeros(3)
            e[a] = h
            lap = lap + K.laplace_fundamental(pts + e) + K.laplace_fundamental(pts - e)
        lap /= h * h
        scale = K.laplace_fundamental(pts) / np.sum(pts * pts, axis=1)
        res.append(float(np.max(np.abs(lap) / scale)))
    orders = [float(np.log2(res[i] / res[i + 1])) for i in range(len(res) - 1)]
    checks.append(Check("kernel.laplace_harmonic_order", 2.0, min(orders), 1.9, min(orders) >= 1.9,
                        {"spacings": hs, "residuals": res, "orders": orders}))
    art["harmonic"] = list(zip(hs, res))
    return checks, art


# ----------------------------------------------------------------------------
# criterion 2: Laplacian of the dual weight

def random_weight_specs(rng, count=5, n=3):
    """Scaling-invariant specs with m cycling through 1, 2, 3."""
    out = []
    for i in range(count):
        m = 1 + i % 3
        p = float(rng.uniform(3.5, 8.0))
        alpha = 1 - n / p
        ex = rng.dirichlet(np.ones(m)) * alpha
        cs = np.column_stack([rng.uniform(-2, 2, size=(m, n - 1)), rng.uniform(0, 3, size=m)])
        ex[-1] = alpha - ex[:-1].sum()
        out.append(W.WeightSpec(n, p, tuple(map(tuple, cs)), tuple(ex)))
    return out


def criterion_weight_laplacian(seed: int = 0, points: int = 10_000):
    rng = np.random.default_rng(seed)
    specs = random_weight_specs(rng)
    worst, gap, rows = -np.inf, -np.inf, []
    for sp in specs:
        X = np.column_stack([rng.uniform(-5, 5, size=(points, sp.n - 1)), rng.uniform(0, 5, size=points)])
        d = np.min(np.linalg.norm(X[:, None, :] - sp.center_array[None], axis=-1), axis=1)
        X = X[d > 1e-6]
        b = W.dual_weight_laplacian_bound(sp, X)
        ex = W.dual_weight_laplacian_exact(sp, X)
        worst = max(worst, float(b.max()))
        gap = max(gap, float(np.max((ex - b) / np.abs(b))))
        rows.append((sp.m, sp.p, float(b.max()), float(np.max((ex - b) / np.abs(b)))))
    checks = [Check("weights.laplacian_bound_negative", "< 0", worst, 0.0, worst < 0,
                    {"specs": [s.to_dict() for s in specs]}),
              Check("weights.exact_below_bound", "<= 0", gap, 1e-12, gap <= 1e-12)]
    # m = 1: bound equals the Laplacian; compare with centred differences
    sp = W.WeightSpec.single(3, 4.0, center=(0.3, -0.2, 0.5))
    X = np.column_stack([rng.uniform(-3, 3, size=(200, 2)), rng.uniform(0, 3, size=200)])
    X = X[np.linalg.norm(X - sp.center_array[0], axis=1) > 0.2]
    h = 1e-3
    f = lambda Y: W.eval_dual_weight(sp, Y) ** sp.p_dual
    fd = -6 * f(X)
    for a in range(3):
        e = np.zeros(3)
        e[a] = h
        fd = fd + f(X + e) + f(X - e)
    fd /= h * h
    b = W.dual_weight_laplacian_bound(sp, X)
    rel = float(np.max(np.abs(fd - b) / np.abs(b)))
    checks.append(Check("weights.single_centre_fd", 0.0, rel, 1e-4, rel <= 1e-4))
    return checks, {"rows": rows}


# ----------------------------------------------------------------------------
# criterion 3: Muckenhoupt audit

def criterion_muckenhoupt(spec: W.WeightSpec = EXAMPLE_SPEC, levels: int = 12):
    good = W.muckenhoupt_audit(spec, which="w^p", levels=levels)
    plain = W.muckenhoupt_audit(spec, which="w", levels=levels)   # reported, not asserted
    bad = W.muckenhoupt_audit(centers=[[0.0, 0.0, 0.0]], exps=[-4.0], p=2.0, levels=levels)
    ok_power = W.muckenhoupt_audit(centers=[[0.0, 0.0, 0.0]], exps=[1.0], p=4.0, levels=levels)
    checks = [
        Check("weights.ap_variation", "< 0.1", good.variation, 0.1, good.variation < 0.1 and not good.violation,
              {"constant": good.constant, "w_itself": {"constant": plain.constant,
                                                       "variation": plain.variation,
                                                       "violation": plain.violation}}),
        Check("weights.ap_violation_flagged", "flagged", "flagged" if bad.violation else "missed", "",
              bad.violation),
        Check("weights.ap_admissible_power", "not flagged", ok_power.variation, 0.1, not ok_power.violation,
              {"constant": ok_power.constant}),
    ]
    return checks, {"audits": {"w^p (example spec)": good, "w (example spec)": plain, "|x|^-4, p=2": bad, "|x|, p=4": ok_power}}


# ----------------------------------------------------------------------------
# criterion 4: boundary trace

def criterion_trace(layers=(96, 192), times=(0.05, 0.1, 0.25), jobs=1):
    traces = {}
    for Nn in layers:
        g = Grid.halfspace(11.0, 96, Ln=11.0, Nn=Nn)
        v0 = D.gaussian_curl_datum(g, **SMOOTH)
        check_box_rule(v0, max(times))
        ev = HalfSpaceEvaluator(v0, jobs)
        row = []
        for t in times:
            v = ev.velocity(t)
            row.append(float(np.abs(trace_boundary(VectorField(g, v, t))).max() / np.abs(v).max()))
        traces[Nn] = row
    fine, coarse = traces[layers[-1]], traces[layers[0]]
    ratios = [c / f for c, f in zip(coarse, fine)]
    checks = [Check("decay.trace_relative", 0.0, max(fine), 1e-3, max(fine) <= 1e-3,
                    {"times": list(times), "layers": list(layers), "traces": {str(k): v for k, v in traces.items()}}),
              Check("decay.trace_refinement_ratio", ">= 1.7", min(ratios), 1.7, min(ratios) >= 1.7,
                    {"ratios": ratios})]
    return checks, {"traces": traces, "times": list(times)}


# ----------------------------------------------------------------------------
# criterion 5: projection-solver agreement

def _oracle_case(N, L=8.0, T=0.25, scheme="explicit", jobs=1):
    S = O.MACSolver(L, N, N // 2)
    g = Grid.halfspace(L, N)
    c, w = (0.0, 0.0, 1.5), 0.4
    v0 = D.gaussian_curl_datum(g, c, w)
    dt = S.stable_dt() if scheme == "explicit" else 0.25 * S.h
    run = O.run(O.StaggeredField.from_potential(S, D.gaussian_curl_potential(c, w)), T, O.StepperConfig(dt, scheme))
    ev = HalfSpaceEvaluator(v0, jobs)
    num = den = 0.0
    comps = []
    for a, off in enumerate(S.offsets()):
        v = ev.velocity(T, offset=off)[a]
        o = run.snapshots[-1].comps[a]
        o = o if a < S.n - 1 else o[..., :-1]
        num += float(np.sum((o - v) ** 2))
        den += float(np.sum(v ** 2))
        comps.append((o, v))
    return float(np.sqrt(num / den)), run.metadata, comps, g, v0


def criterion_oracle(resolutions=(48, 96), jobs=1):
    rel, meta, last = {}, {}, None
    for N in resolutions:
        rel[N], meta[N], comps, g, v0 = _oracle_case(N, jobs=jobs)
        last = (comps, g)
    Nf, Nc = resolutions[-1], resolutions[0]
    margin = check_box_rule(v0, 0.25)
    checks = [
        Check("oracle.relative_l2_t0.25", 0.0, rel[Nf], 0.02, rel[Nf] <= 0.02,
              {"resolution": Nf, "box_margin": margin}),
        Check("oracle.improves_under_refinement", f"< {rel[Nc]:.4g}", rel[Nf], "", rel[Nf] < rel[Nc],
              {str(k): v for k, v in rel.items()}),
        Check("oracle.projection_divergence", 0.0, max(m["max_divergence"] for m in meta.values()), 1e-10,
              all(m["max_divergence"] <= 1e-10 for m in meta.values())),
        Check("oracle.energy_nonincreasing", "true", str(all(m["energy_nonincreasing"] for m in meta.values())).lower(),
              "", all(m["energy_nonincreasing"] for m in meta.values())),
    ]
    # manufactured heat mode: error ratio under halving of h (and dt)
    for scheme in ("explicit", "implicit"):
        errs = []
        for M in (16, 32):
            S = O.MACSolver(2.0, M, M // 2)
            dt = S.stable_dt() if scheme == "explicit" else 0.05 * S.h
            errs.append(O.heat_mode_error(S, 0.1, O.StepperConfig(dt, scheme)))
        r = errs[0] / errs[1]
        checks.append(Check(f"oracle.heat_mode_order_{scheme}", 4.0, r, ">= 3", r >= 3.0, {"errors": errs}))
    # Green tensor against the spectral evaluator (narrow bump, time shifted by width^2/2)
    g = Grid.halfspace(6.0, 96)
    y, s, t = np.array([0.0, 0.0, 1.0]), 0.12, 0.3
    worst = 0.0
    for j in range(2):
        bump = lambda X, j=j: [((a == j) * np.exp(-sum((X[i] - y[i]) ** 2 for i in range(3)) / (2 * s * s))
                                / (2 * np.pi * s * s) ** 1.5) + 0 * X[0] for a in range(3)]
        ev = HalfSpaceEvaluator(VectorField.sample(g, bump), jobs)
        v = ev.velocity(t - s * s / 2)
        for idx in ((52, 50, 6), (45, 55, 12)):
            x = np.array([g.coords(a)[idx[a]] for a in range(3)])
            G = np.array([K.green_tensor(i, j, t, x, y) for i in range(3)])
            worst = max(worst, float(np.abs(G - v[(slice(None),) + idx]).max() / np.abs(G).max()))
    checks.append(Check("oracle.green_tensor_vs_evaluator", 0.0, worst, 0.01, worst <= 0.01))
    return checks, {"relative": rel, "comps": last[0], "grid": last[1]}


# ----------------------------------------------------------------------------
# criterion 6: decay rates

def stokeslet_trajectory(q=6.0, tmin=0.05, tmax=0.5, samples=6, beta=0.6, jobs=1):
    """Norms of the half-space evolution of the truncated Stokeslet datum.

    Every sample time gets its own grid with spacing ``beta sqrt(t)`` and the
    same physical datum, so each snapshot resolves the self-similar core and
    the outer truncation stays far outside the diffusion length.
    """
    st = np.sqrt(tmax)
    r0, r1, r2 = 0.02 * np.sqrt(tmin), 7 * st, 13 * st
    L = r2 + 8.5 * st
    ts = np.geomspace(tmin, tmax, samples)
    rows = []
    for t in ts:
        h = beta * np.sqrt(t)
        N = 2 * int(np.ceil(L / h))
        g = Grid.halfspace(N * h / 2, N)
        v0 = D.stokeslet_datum(g, r0, r1, r2)
        check_box_rule(v0, tmax, support=r2)
        ev = HalfSpaceEvaluator(v0, jobs)
        del v0
        rows.append(_norm_row(ev, g, t, q))
        del ev
    return ts, np.array(rows), {"r0": r0, "r1": r1, "r2": r2, "L": L, "beta": beta}


def _norm_row(ev, g, t, q):
    v = ev.velocity(t)
    row = [_vnorm(v, g, q), _vnorm(v, g, np.inf)]
    del v
    G2 = 0.0
    for a in range(g.n):
        d = ev._deriv(t, (a,))
        G2 = G2 + np.sum(d * d, axis=0)
        del d
    m = np.sqrt(G2)
    row.append(float(np.sum(m ** q * g.quad_weights()) ** (1 / q)) if np.isfinite(q) else float(m.max()))
    row.append(_vnorm(ev.pressure_gradient(t), g, q))
    return row


def compact_trajectory(q=6.0, tmin=0.2, tmax=2.0, samples=6, jobs=1):
    """Norms for a compact Gaussian-curl datum close to the wall.

    The window starts once diffusion has reached the wall; earlier, a datum
    away from the wall has a pressure gradient that still grows.
    """
    g = Grid.halfspace(16.5, 128)
    v0 = D.gaussian_curl_datum(g, (0.0, 0.0, 1.5), 0.6)
    check_box_rule(v0, tmax)
    ev = HalfSpaceEvaluator(v0, jobs)
    ts = np.geomspace(tmin, tmax, samples)
    return ts, np.array([_norm_row(ev, g, t, q) for t in ts])


DECAY_LABELS = ("velocity_Lq", "velocity_sup", "gradient_Lq", "pressure_gradient_Lq")


def criterion_decay(q=6.0, jobs=1):
    n = 3
    pred = [predicted_exponent(n, q, 0, 0, "velocity"), predicted_exponent(n, q, kind="sup"),
            predicted_exponent(n, q, 1, 0, "velocity"), predicted_exponent(n, q, kind="pressure")]
    ts, rows, info = stokeslet_trajectory(q, jobs=jobs)
    tc, rc = compact_trajectory(q, jobs=jobs)
    checks, fits, cfits = [], {}, {}
    for k, lab in enumerate(DECAY_LABELS):
        f = fit_decay(list(zip(ts, rows[:, k])), pred[k])
        fits[lab] = f
        checks.append(Check(f"decay.{lab}_slope", pred[k], f.fitted_slope, 0.1, f.passed,
                            {"ci": f.slope_ci, "times": f.times, "norms": f.norms, "datum": info}))
    for k, lab in enumerate(DECAY_LABELS):
        f = fit_decay(list(zip(tc, rc[:, k])), pred[k], mode="upper")
        cfits[lab] = f
        checks.append(Check(f"decay.compact_{lab}_slope_upper", f"<= {pred[k] + 0.1:.4g}", f.fitted_slope,
                            0.1, f.passed, {"ci": f.slope_ci}))
    return checks, {"fits": fits, "compact_fits": cfits, "q": q}


# ----------------------------------------------------------------------------
# criterion 7: weighted semigroup bounds

def criterion_semigroup_bounds(spec: W.WeightSpec = EXAMPLE_SPEC, resolutions=(48, 96), jobs=1):
    tag = W.NormTag.weighted()
    ts = np.geomspace(0.01, 0.5, 9)
    g = Grid.wholespace(13.0, 112)
    u0 = D.wholespace_gaussian_datum(g, SMOOTH["center"], SMOOTH["width"], SMOOTH["direction"])
    check_box_rule(u0, ts[-1])
    ev = WholeSpaceEvaluator(u0, jobs)
    ws = monotonicity_audit(ts, [W.weighted_norm(VectorField(g, ev.velocity(t)), spec, tag) for t in ts],
                            True, datum_norm=W.weighted_norm(u0, spec, tag))
    consts = {}
    for N in resolutions:
        g = Grid.halfspace(11.0, N, Ln=13.75, Nn=5 * N // 8)
        v0 = D.gaussian_curl_datum(g, **SMOOTH)
        check_box_rule(v0, ts[-1], support=D.gaussian_support(SMOOTH["center"], SMOOTH["width"]))
        ev = HalfSpaceEvaluator(v0, jobs)
        hs = monotonicity_audit(ts, [W.weighted_norm(VectorField(g, ev.velocity(t)), spec, tag) for t in ts],
                                False, datum_norm=W.weighted_norm(v0, spec, tag))
        consts[N] = hs["constant"]
    cs = list(consts.values())
    drift = abs(cs[-1] - cs[0]) / cs[-1]
    checks = [Check("decay.wholespace_weighted_nonincreasing", 0.0, ws["max_relative_increase"], 1e-3,
                    ws["nonincreasing"], {"norms": ws["norms"]}),
              Check("decay.halfspace_constant_finite", "finite", cs[-1], "", bool(np.isfinite(cs[-1]))),
              Check("decay.halfspace_constant_drift", 0.0, drift, 0.2, drift < 0.2,
                    {str(k): v for k, v in consts.items()})]
    return checks, {"wholespace": ws, "constants": consts}


# ----------------------------------------------------------------------------
# criterion 8: strong continuity

def criterion_continuity(spec: W.WeightSpec = EXAMPLE_SPEC, N=96, jobs=1):
    g = Grid.halfspace(11.0, N)
    v0 = D.gaussian_curl_datum(g, **SMOOTH)
    check_box_rule(v0, 0.25)
    ev = HalfSpaceEvaluator(v0, jobs)
    r = continuity_at_zero(ev.velocity, v0, spec)
    zero = float(np.abs(ev.velocity(0.0) - v0.data).max() / np.abs(v0.data).max())
    rough = D.rough_datum(g, SMOOTH["center"], 1.2)
    rr = continuity_at_zero(HalfSpaceEvaluator(rough, jobs).velocity, rough, spec)
    checks = [Check("decay.continuity_decreasing", "decreasing", "decreasing" if r["strictly_decreasing"] else "not",
                    "", r["strictly_decreasing"], {"differences": r["differences"], "times": r["times"]}),
              Check("decay.continuity_final_relative", 0.0, r["final_relative"], 0.05, r["final_relative"] <= 0.05,
                    {"relative_sup_difference_at_t0": zero}),
              Check("decay.rough_continuity_decreasing", "decreasing",
                    "decreasing" if rr["strictly_decreasing"] else "not", "", rr["strictly_decreasing"],
                    {"differences": rr["differences"], "final_relative": rr["final_relative"]})]
    return checks, {"smooth": r, "rough": rr}


# ----------------------------------------------------------------------------
# criterion 9: Helmholtz decomposition

def criterion_helmholtz(spec: W.WeightSpec = EXAMPLE_SPEC, L=4.0, seed=0, trials=50, jobs=1):
    q = spec.p
    checks = []
    cross = {}
    for N in (48, 96):
        g = Grid.halfspace(L, N)
        rg = H.decompose(D.random_gradient(g, np.random.default_rng(seed + 2)), jobs=jobs)
        rs = H.decompose(D.random_solenoidal(g, np.random.default_rng(seed + 3)), jobs=jobs)
        cross[N] = (rg.residuals["v_fraction"], rs.residuals["grad_fraction"])
    for i, lab in enumerate(("gradient_input_solenoidal_part", "solenoidal_input_gradient_part")):
        c, f = cross[48][i], cross[96][i]
        checks.append(Check(f"helmholtz.{lab}", 0.0, f, 1e-3, f <= 1e-3, {"48": c, "96": f}))
        checks.append(Check(f"helmholtz.{lab}_refinement_ratio", ">= 4", c / max(f, 1e-300), 4.0,
                            c / max(f, 1e-300) >= 4.0))
    # random ensemble on 64^3: recomposition, idempotence, orthogonality
    g = Grid.halfspace(L, 64)
    u = D.random_bumps(g, np.random.default_rng(seed))
    r = H.decompose(u, spec, q, jobs)
    audit = H.orthogonality_audit(r, spec, q, trials=trials, seed=seed)
    again = H.decompose(r.v, jobs=jobs)
    rec = r.residuals["recomposition"]
    checks += [
        Check("helmholtz.recomposition", 0.0, rec, 1e-10, rec <= 1e-10),
        Check("helmholtz.orthogonality_defect", 0.0, audit["max_defect"], 1e-3, audit["max_defect"] <= 1e-3,
              {"trials": trials}),
        Check("helmholtz.constant_potential_pairing", 0.0, audit["constant_potential"], 0.0,
              audit["constant_potential"] == 0.0),
        Check("helmholtz.idempotence", 0.0, again.residuals["grad_fraction"], 2e-10,
              again.residuals["grad_fraction"] <= 2e-10),
        Check("helmholtz.divergence", 0.0, r.residuals["divergence"], 1e-10, r.residuals["divergence"] <= 1e-10),
    ]
    # stability constant of the weighted bound at two resolutions
    consts = {}
    for N in (48, 96):
        gN = Grid.halfspace(L, N)
        consts[N] = max(H.decompose(D.random_bumps(gN, np.random.default_rng(seed + 10 + k)), spec, q, jobs)
                        .norms["constant"] for k in range(5))
    drift = abs(consts[96] - consts[48]) / consts[96]
    checks.append(Check("helmholtz.stability_constant_drift", 0.0, drift, 0.2, drift < 0.2,
                        {str(k): v for k, v in consts.items()}))
    # Calderon-Zygmund constants over 50 random fields
    g48 = Grid.halfspace(L, 48)
    ens = [D.random_bumps(g48, np.random.default_rng(seed + 100 + k)) for k in range(50)]
    cz = H.stability_constants(ens, spec, (2.0, 4.0), jobs)
    czmax = max(cz["plain_q2"], cz["plain_q4"])
    checks.append(Check("helmholtz.cz_constant", "<= 3", czmax, 3.0, czmax <= 3.0, cz))
    # direct-summation cross-check at 10 random off-node points
    rng = np.random.default_rng(seed + 5)
    h = g.spacing[0]
    idx = np.column_stack([rng.integers(20, 44, size=(10, 2)), rng.integers(4, 20, size=10)])
    pts = np.array([[g.coords(a)[i[a]] + h / 2 for a in range(3)] for i in idx])
    _, gp = H.solve_neumann(u, jobs)
    ref = np.array([gp.data[:, i[0]:i[0] + 2, i[1]:i[1] + 2, i[2]:i[2] + 2].mean(axis=(1, 2, 3)) for i in idx])
    direct = H.neumann_gradient_direct(u, pts, jobs)
    pv = float(np.abs(direct - ref).max() / np.abs(ref).max())
    checks.append(Check("helmholtz.direct_sum_crosscheck", 0.0, pv, 0.1, pv <= 0.1))
    return checks, {"defects": audit["defects"], "cross": cross, "constants": consts, "cz": cz}


# ----------------------------------------------------------------------------
# criterion 10: interpolation inequality

def interpolation_ensemble(grid: Grid, rng, count=100):
    out = []
    for k in range(count):
        kind = k % 3
        if kind == 0:
            out.append(D.random_bumps(grid, rng, count=int(rng.integers(1, 6))))
        elif kind == 1:
            out.append(D.random_solenoidal(grid, rng, count=int(rng.integers(1, 6))))
        else:
            out.append(D.random_gradient(grid, rng, count=int(rng.integers(1, 6))))
    return out


def criterion_interpolation(spec: W.WeightSpec = EXAMPLE_SPEC, q=6.0, seed=0, count=100):
    n = spec.n
    ok_id = all(Fraction(d, qq) + d * (Fraction(1, d) - Fraction(1, qq)) == 1
                for d in (2, 3, 4, 5) for qq in (d + 1, 6, 8, 12, 100))
    ok_id = ok_id and all(abs(interpolation_exponents(d, qq)["sum"] - 1) < 1e-15
                          for d in (2, 3, 4, 5) for qq in (d + 1, 6, 8, 12, 100))
    gam = interpolation_exponents(3, 6)["gamma"]
    ok_gam = Fraction(6 - 3, 3 * (6 - 1)) == Fraction(1, 5) and abs(gam - 0.2) < 1e-15
    g = Grid.halfspace(4.0, 32)
    ens = interpolation_ensemble(g, np.random.default_rng(seed), count)
    a2 = interpolation_audit(ens, spec, q)
    single = W.WeightSpec.single(n, spec.p)
    a1 = interpolation_audit(ens, single, q)
    finite = bool(np.all(np.isfinite(a2["ratios"])) and np.all(np.isfinite(a1["ratios"])))
    rerun = interpolation_audit(interpolation_ensemble(g, np.random.default_rng(seed), 5), spec, q)
    det = rerun["ratios"] == a2["ratios"][:5]
    checks = [
        Check("interpolation.exponent_identity", 1, 1 if ok_id else 0, 0, ok_id),
        Check("interpolation.gamma_n3_q6", 0.2, gam, 1e-15, ok_gam),
        Check("interpolation.ratios_finite", "finite", "finite" if finite else "non-finite", "", finite),
        Check("interpolation.single_centre_bound", a1["explicit_bound"], a1["max_ratio"], "",
              a1["max_ratio"] <= a1["explicit_bound"]),
        Check("interpolation.example_spec_max_ratio", "bounded", a2["max_ratio"], "", finite,
              {"ratios": a2["ratios"]}),
        Check("interpolation.dilation_invariance", 0.0, a1["dilation_deviation"], 1e-6,
              a1["dilation_deviation"] <= 1e-6),
        Check("interpolation.deterministic_rerun", "identical", "identical" if det else "differs", "", det),
    ]
    return checks, {"example": a2, "single": a1}


# ----------------------------------------------------------------------------
# suites

def _suite_weights(out: Path | None, opts):
    c2, _ = criterion_weight_laplacian(opts.get("seed", 0))
    c3, a3 = criterion_muckenhoupt()
    if out is not None:
        a3["audits"]["w^p (example spec)"].write_csv(out / "ap_audit.csv")
        plots.ap_figure(a3["audits"], out / "ap_audit.png")
    return c2 + c3


def _suite_interpolation(out, opts):
    c, a = criterion_interpolation(seed=opts.get("seed", 0), q=opts.get("q", 6.0))
    if out is not None:
        _write_csv(out / "interpolation_ratios.csv", ["field", "ratio_example_spec", "ratio_single_centre"],
                   [(i, r2, r1) for i, (r2, r1) in enumerate(zip(a["example"]["ratios"], a["single"]["ratios"]))])
        plots.ratio_histogram(a["single"]["ratios"], out / "interpolation.png", a["single"]["explicit_bound"])
    return c


def _suite_helmholtz(out, opts):
    c, a = criterion_helmholtz(seed=opts.get("seed", 0), jobs=opts.get("jobs", 1))
    if out is not None:
        _write_csv(out / "orthogonality_defects.csv", ["trial", "defect"], list(enumerate(a["defects"])))
        plots.defect_figure({"orthogonality defect": a["defects"]}, out / "helmholtz.png", 1e-3)
    return c


def _suite_oracle(out, opts):
    c1, a1 = criterion_kernel_identities()
    c5, a5 = criterion_oracle(jobs=opts.get("jobs", 1))
    if out is not None:
        _write_csv(out / "harmonic_residuals.csv", ["h", "residual"], a1["harmonic"])
        comps, g = a5["comps"], a5["grid"]
        o, v = comps[0]
        j = o.shape[1] // 2
        ext = (g.origin[0], g.extent[0], 0.0, g.extent[-1])
        plots.slice_figure({"projection solver v_1": o[:, j, :], "spectral evaluator v_1": v[:, j, :],
                            "difference": o[:, j, :] - v[:, j, :]}, ext, out / "oracle_slice.png", "t = 0.25")
        _write_csv(out / "oracle_relative_l2.csv", ["N", "relative_l2"], sorted(a5["relative"].items()))
    return c1 + c5


def _suite_decay(out, opts):
    jobs = opts.get("jobs", 1)
    q = float(opts.get("q", 6.0))
    checks = []
    c4, a4 = criterion_trace(jobs=jobs)
    c6, a6 = criterion_decay(q, jobs)
    c7, a7 = criterion_semigroup_bounds(jobs=jobs)
    c8, a8 = criterion_continuity(jobs=jobs)
    checks = c4 + c6 + c7 + c8
    if out is not None:
        fits = a6["fits"]
        rows = [(t, *[fits[l].norms[i] for l in DECAY_LABELS]) for i, t in enumerate(fits[DECAY_LABELS[0]].times)]
        _write_csv(out / "decay_trajectory.csv", ["t", *DECAY_LABELS], rows)
        cf = a6["compact_fits"]
        rows = [(t, *[cf[l].norms[i] for l in DECAY_LABELS]) for i, t in enumerate(cf[DECAY_LABELS[0]].times)]
        _write_csv(out / "decay_compact_trajectory.csv", ["t", *DECAY_LABELS], rows)
        _write_csv(out / "decay_fits.csv", ["norm", "datum", "fitted_slope", "predicted_slope", "ci95", "pass"],
                   [(l, d, f.fitted_slope, f.predicted_slope, f.slope_ci, str(f.passed).lower())
                    for d, fs in (("stokeslet", fits), ("compact", cf)) for l, f in fs.items()])
        _write_csv(out / "trace.csv", ["t", *[f"layers_{k}" for k in a4["traces"]]],
                   [(t, *[a4["traces"][k][i] for k in a4["traces"]]) for i, t in enumerate(a4["times"])])
        _write_csv(out / "continuity.csv", ["t", "difference_smooth", "difference_rough"],
                   list(zip(a8["smooth"]["times"], a8["smooth"]["differences"], a8["rough"]["differences"])))
        plots.decay_figure(fits, out / "decay.png", f"truncated Stokeslet, q = {q:g}")
        plots.decay_figure(cf, out / "decay_compact.png", f"compact datum, q = {q:g}")
    return checks


SUITES = {
    "decay": _suite_decay,
    "helmholtz": _suite_helmholtz,
    "weights": _suite_weights,
    "interpolation": _suite_interpolation,
    "oracle-xcheck": _suite_oracle,
}
SUITE_NAMES = tuple(SUITES) + ("all",)


def _run_one(nm, d, opts):
    if d is not None:
        d.mkdir(parents=True, exist_ok=True)
    checks = SUITES[nm](d, opts)
    if d is not None:
        write_report(checks, d, extra={"suite": nm, "options": opts})
        files = sorted(p.name for p in d.iterdir() if p.is_file() and p.name != "manifest.json")
        (d / "manifest.json").write_text(json.dumps({"suite": nm, "options": opts, "files": files},
                                                    indent=2, sort_keys=True) + "\n")
    return checks


def run_suite(name: str, out=None, **opts):
    """Run a named suite; with ``out`` write ``report.json``/``report.csv`` and
    artifacts under ``out`` (``out/<suite>`` for each member of ``all``).

    For ``all`` with ``jobs > 1`` the member suites run in separate processes
    (at most ``jobs``), each with single-threaded transforms.
    """
    if name not in SUITE_NAMES:
        raise KeyError(name)
    names = list(SUITES) if name == "all" else [name]
    dirs = [None if out is None else Path(out) / nm if name == "all" else Path(out) for nm in names]
    jobs = int(opts.get("jobs", 1))
    if len(names) > 1 and jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        sub = {**opts, "jobs": 1}
        with ProcessPoolExecutor(max_workers=min(jobs, len(names))) as ex:
            parts = list(ex.map(_run_one, names, dirs, [sub] * len(names)))
    else:
        parts = [_run_one(nm, d, opts) for nm, d in zip(names, dirs)]
    allc = [c for p in parts for c in p]
    if out is not None and name == "all":
        write_report(allc, out, extra={"suite": "all", "options": opts, "aggregate": names})
    return allc
