"""``stokes`` command-line front end.

Subcommands
-----------
evolve     evolve a configured datum and write fields, slices, figure, manifest
decompose  Helmholtz decomposition of a configured field, ``decomp_report.json``
suite      run a verification suite and write ``report.json``/``report.csv``
report     merge every report and manifest below a directory

Exit codes: 0 success, 1 a check failed, 2 invalid input (bad or missing
config, unknown suite, empty report directory), 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import data as D
from .errors import HalfStokesError, NumericalFailure, SingularPoint, ValidationError
from .fields import Grid, VectorField, export_slice_csv, load_field, save_field

log = logging.getLogger("halfstokes")

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3

DATUMS = {
    "gaussian_curl": lambda g, rng, **kw: D.gaussian_curl_datum(g, **kw),
    "stokeslet": lambda g, rng, **kw: D.stokeslet_datum(g, **kw),
    "rough": lambda g, rng, **kw: D.rough_datum(g, **kw),
    "wholespace_gaussian": lambda g, rng, **kw: D.wholespace_gaussian_datum(g, **kw),
    "random_bumps": lambda g, rng, **kw: D.random_bumps(g, rng, **kw),
    "random_gradient": lambda g, rng, **kw: D.random_gradient(g, rng, **kw),
    "random_solenoidal": lambda g, rng, **kw: D.random_solenoidal(g, rng, **kw),
}
EVOLVE_CHECKS = ("trace", "divergence", "weighted_norm", "monotonicity", "decay")


# ----------------------------------------------------------------------------
# experiment configuration

def _set(cfg: dict, item: str):
    """Apply ``a.b=value`` (value parsed as JSON, else kept as a string)."""
    key, _, raw = item.partition("=")
    if not key or not _:
        raise ValidationError(f"--set expects key=value, got {item!r}")
    try:
        val = json.loads(raw)
    except json.JSONDecodeError:
        val = raw
    d = cfg
    parts = key.split(".")
    for p in parts[:-1]:
        d = d.setdefault(p, {})
    d[parts[-1]] = val


def load_config(path, overrides=()) -> dict:
    if path is None:
        raise ValidationError("--config is required")
    p = Path(path)
    if not p.is_file():
        raise ValidationError(f"config file not found: {p}")
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ValidationError(f"config is not valid JSON: {e}") from None
    if not isinstance(cfg, dict):
        raise ValidationError("config must be a JSON object")
    for item in overrides or ():
        _set(cfg, item)
    return cfg


def build_grid(gcfg: dict) -> Grid:
    try:
        kind = gcfg.get("kind", "half")
        L, N = float(gcfg["L"]), int(gcfg["N"])
    except (KeyError, TypeError, ValueError, AttributeError):
        raise ValidationError("grid needs numeric 'L' and 'N'") from None
    if kind == "half":
        Ln = gcfg.get("Ln")
        Nn = gcfg.get("Nn")
        return Grid.halfspace(L, N, None if Ln is None else float(Ln), None if Nn is None else int(Nn))
    if kind == "whole":
        return Grid.wholespace(L, N)
    raise ValidationError(f"grid kind must be 'half' or 'whole', got {kind!r}")


def build_datum(dcfg, grid: Grid, seed: int = 0) -> VectorField:
    if not isinstance(dcfg, dict) or "name" not in dcfg:
        raise ValidationError("datum needs a 'name'")
    name = dcfg["name"]
    params = dict(dcfg.get("params", {}))
    if name == "file":
        f = load_field(params["path"])
        if f.grid.shape != grid.shape:
            raise ValidationError("datum file does not match the configured grid")
        return f
    if name not in DATUMS:
        raise ValidationError(f"unknown datum {name!r}; choose from {sorted(DATUMS) + ['file']}")
    if name in ("gaussian_curl", "wholespace_gaussian", "rough"):
        for k in ("center", "direction"):
            if k in params:
                params[k] = tuple(params[k])
    rng = np.random.default_rng(int(dcfg.get("seed", seed)))
    try:
        return DATUMS[name](grid, rng, **params)
    except TypeError as e:
        raise ValidationError(f"bad parameters for datum {name!r}: {e}") from None


def _weight(cfg):
    from .suites import EXAMPLE_SPEC
    from .weights import WeightSpec
    w = cfg.get("weight")
    if w is None:
        return EXAMPLE_SPEC
    if isinstance(w, str):
        return WeightSpec.load(w)
    return WeightSpec.from_dict(w)


def resolve_experiment(cfg: dict) -> dict:
    """Validate an experiment config and return the resolved plan."""
    for k in ("datum", "grid", "times"):
        if k not in cfg:
            raise ValidationError(f"config is missing {k!r}")
    times = cfg["times"]
    if not isinstance(times, list) or not times:
        raise ValidationError("'times' must be a non-empty list")
    checks = list(cfg.get("checks", ["trace", "divergence"]))
    bad = [c for c in checks if c not in EVOLVE_CHECKS]
    if bad:
        raise ValidationError(f"unknown checks {bad}; choose from {list(EVOLVE_CHECKS)}")
    grid = build_grid(cfg["grid"])
    return {"grid": grid, "times": [float(t) for t in times], "checks": checks,
            "derivatives": [tuple(d) for d in cfg.get("derivatives", [])],
            "pressure": bool(cfg.get("pressure", False)), "weight": _weight(cfg),
            "output": cfg.get("output", "stokes_out"), "seed": int(cfg.get("seed", 0)),
            "support": cfg.get("support"), "q": float(cfg.get("q", 6.0))}


# ----------------------------------------------------------------------------
# evolve

def _save_array(stem: Path, arr, grid: Grid, t: float):
    class _A:
        pass
    a = _A()
    a.data, a.grid, a.time = arr, grid, t
    return save_field(a, stem)


def cmd_evolve(args) -> int:
    from . import plots
    from .analysis import Check, fit_decay, monotonicity_audit, predicted_exponent, write_report
    from .semigroup import EvolutionRequest, check_box_rule, evolve_halfspace, evolve_wholespace
    from .weights import NormTag, weighted_norm

    cfg = load_config(args.config, args.set)
    plan = resolve_experiment(cfg)
    out = Path(args.out or plan["output"])
    grid = plan["grid"]
    datum = build_datum(cfg["datum"], grid, plan["seed"])
    margin = check_box_rule(datum, plan["times"][-1], support=plan["support"])
    req = EvolutionRequest(datum, plan["times"], plan["derivatives"], plan["pressure"],
                           jobs=args.jobs, support=plan["support"])
    if args.dry_run:
        print(json.dumps({"grid": grid.to_dict(), "times": plan["times"], "datum": cfg["datum"],
                          "checks": plan["checks"], "derivatives": [list(d) for d in plan["derivatives"]],
                          "pressure": plan["pressure"], "box_margin": margin, "output": str(out)},
                         indent=2, sort_keys=True))
        return EXIT_OK
    res = (evolve_halfspace if grid.half_space else evolve_wholespace)(req)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for i, v in enumerate(res.velocity):
        files.append(save_field(v, out / f"velocity_{i:03d}"))
        mid = grid.shape[1] // 2
        files.append(export_slice_csv(v, out / f"velocity_{i:03d}_slice.csv", {1: mid}))
    for i, gp in enumerate(res.pressure_gradient or []):
        files.append(save_field(gp, out / f"pressure_gradient_{i:03d}"))
    for i, p in enumerate(res.pressure or []):
        files.append(save_field(p, out / f"pressure_{i:03d}"))
    for (l, k), arrs in res.derivatives.items():
        for i, a in enumerate(arrs):
            files.append(_save_array(out / f"deriv_l{l}_k{k}_{i:03d}", a, grid, res.times[i]))

    checks = []
    rows = res.metadata.get("residuals", [])
    if "trace" in plan["checks"] and grid.half_space:
        worst = max(r["trace_extrapolated"] for r in rows)
        checks.append(Check("evolve.trace_relative", 0.0, worst, 1e-3, worst <= 1e-3))
    if "divergence" in plan["checks"]:
        d0 = res.metadata["datum_divergence"]
        checks.append(Check("evolve.datum_divergence", 0.0, d0, 1e-3, d0 <= 1e-3))
    norms = None
    if {"weighted_norm", "monotonicity"} & set(plan["checks"]):
        tag = NormTag.weighted()
        norms = [weighted_norm(v, plan["weight"], tag) for v in res.velocity]
        checks.append(Check("evolve.weighted_norm_final", "finite", norms[-1], "", bool(np.isfinite(norms[-1])),
                            {"norms": norms}))
    if "monotonicity" in plan["checks"]:
        m = monotonicity_audit(res.times, norms, not grid.half_space,
                               datum_norm=weighted_norm(datum, plan["weight"], NormTag.weighted()))
        if grid.half_space:
            checks.append(Check("evolve.semigroup_constant", "finite", m["constant"], "",
                                bool(np.isfinite(m["constant"]))))
        else:
            checks.append(Check("evolve.weighted_nonincreasing", 0.0, m["max_relative_increase"], 1e-3,
                                m["nonincreasing"]))
    if "decay" in plan["checks"]:
        q = plan["q"]
        w = grid.quad_weights()
        y = [float(np.sum(v.magnitude() ** q * w) ** (1 / q)) for v in res.velocity]
        f = fit_decay(list(zip(res.times, y)), predicted_exponent(grid.n, q), mode="upper")
        checks.append(Check("evolve.velocity_Lq_slope_upper", f"<= {f.predicted_slope + 0.1:.4g}",
                            f.fitted_slope, 0.1, f.passed, {"norms": y}))
        files.append(plots.decay_figure({f"|v|_L{q:g}": f}, out / "decay.png"))
    vN = res.velocity[-1]
    j = grid.shape[1] // 2
    ext = (grid.origin[0], grid.extent[0], grid.origin[-1], grid.extent[-1])
    files.append(plots.slice_figure({f"v_{a + 1}": vN.data[a][:, j, :] for a in range(grid.n)}, ext,
                                    out / "velocity_slice.png", f"t = {res.times[-1]:g}"))
    write_report(checks, out)
    manifest = {"config": cfg, "grid": grid.to_dict(), "times": res.times, "box_margin": margin,
                "metadata": res.metadata, "checks": [c.row() for c in checks],
                "files": sorted(str(Path(f).relative_to(out)) for f in files)}
    from .analysis import to_jsonable
    (out / "manifest.json").write_text(json.dumps(to_jsonable(manifest), indent=2, sort_keys=True) + "\n")
    print(f"wrote {len(files)} files to {out}")
    return _summarise(checks)


# ----------------------------------------------------------------------------
# decompose

def cmd_decompose(args) -> int:
    from .analysis import to_jsonable
    from .helmholtz import decompose, orthogonality_audit

    cfg = load_config(args.config, args.set)
    for k in ("datum", "grid"):
        if k not in cfg:
            raise ValidationError(f"config is missing {k!r}")
    grid = build_grid(cfg["grid"])
    if not grid.half_space:
        raise ValidationError("decomposition needs a half-space grid")
    spec = _weight(cfg)
    q = float(cfg.get("q", spec.p))
    trials = int(cfg.get("trials", 50))
    out = Path(args.out or cfg.get("output", "stokes_decomp"))
    u = build_datum(cfg["datum"], grid, int(cfg.get("seed", 0)))
    if args.dry_run:
        print(json.dumps({"grid": grid.to_dict(), "datum": cfg["datum"], "q": q, "trials": trials,
                          "output": str(out)}, indent=2, sort_keys=True))
        return EXIT_OK
    r = decompose(u, spec, q, args.jobs)
    audit = orthogonality_audit(r, spec, q, trials, int(cfg.get("seed", 0)))
    out.mkdir(parents=True, exist_ok=True)
    doc = {**r.to_dict(), "grid": grid.to_dict(), "weight": spec.to_dict(), "orthogonality": audit}
    if cfg.get("save_fields", False):
        save_field(r.v, out / "solenoidal")
        save_field(r.grad_psi, out / "gradient")
        save_field(r.psi, out / "potential")
    (out / "decomp_report.json").write_text(json.dumps(to_jsonable(doc), indent=2, sort_keys=True) + "\n")
    print(f"recomposition {r.residuals['recomposition']:.3e}  divergence {r.residuals['divergence']:.3e}"
          f"  orthogonality {audit['max_defect']:.3e}  constant {r.norms['constant']:.4g}")
    ok = r.residuals["recomposition"] <= 1e-10 and audit["max_defect"] <= float(cfg.get("defect_tol", 1e-3))
    return EXIT_OK if ok else EXIT_CHECK


# ----------------------------------------------------------------------------
# suite and report

def cmd_suite(args) -> int:
    from .suites import SUITE_NAMES, SUITES, run_suite

    if args.name not in SUITE_NAMES:
        raise ValidationError(f"unknown suite {args.name!r}; choose from {list(SUITE_NAMES)}")
    out = Path(args.out) if args.out else Path("stokes_reports") / args.name
    opts = {"q": args.q, "seed": args.seed, "jobs": args.jobs}
    if args.dry_run:
        names = list(SUITES) if args.name == "all" else [args.name]
        print(json.dumps({"suites": names, "options": opts, "output": str(out)}, indent=2, sort_keys=True))
        return EXIT_OK
    checks = run_suite(args.name, out, **opts)
    print(f"report written to {out}")
    return _summarise(checks)


def _summarise(checks) -> int:
    for c in checks:
        r = c.row()
        print(f"{'PASS' if c.passed else 'FAIL'}  {r['check']:<52s} measured={r['measured']:<16s}"
              f" predicted={r['predicted']:<14s} tol={r['tolerance']}")
    return EXIT_OK if all(c.passed for c in checks) else EXIT_CHECK


MERGED = "merged_report"


def merge_reports(root) -> dict:
    """Collect check rows from every ``report.json`` (and the checks of evolve
    manifests without a report) below ``root``, in sorted path order.  The
    aggregate report of ``suite all`` is skipped since its members are read."""
    root = Path(root)
    if not root.is_dir():
        raise ValidationError(f"not a directory: {root}")
    found = sorted(p for p in root.rglob("*.json") if p.name in ("report.json", "manifest.json"))
    rows, sources = [], []
    for p in found:
        if p.name == "manifest.json" and (p.parent / "report.json").exists():
            continue
        try:
            doc = json.loads(p.read_text())
        except json.JSONDecodeError:
            continue
        got = doc.get("checks")
        if not isinstance(got, list) or "aggregate" in doc.get("extra", {}):
            continue
        rel = p.parent.relative_to(root).as_posix() or "."
        sources.append(p.relative_to(root).as_posix())
        for r in got:
            rows.append({**r, "source": rel})
    if not rows:
        raise ValidationError(f"no reports or manifests with checks under {root}")
    return {"sources": sources, "checks": rows, "all_pass": all(bool(r["pass"]) for r in rows)}


PLOT_SCRIPT = '''"""Redraw the pass/fail chart from merged_report.csv."""
import csv
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

path = sys.argv[1] if len(sys.argv) > 1 else "merged_report.csv"
rows = list(csv.DictReader(open(path)))
fig, ax = plt.subplots(figsize=(7, 0.22 * len(rows) + 1))
ax.barh(range(len(rows)), [1] * len(rows),
        color=["tab:green" if r["pass"] == "true" else "tab:red" for r in rows])
ax.set_yticks(range(len(rows)))
ax.set_yticklabels([r["source"] + ": " + r["check"] for r in rows], fontsize=6)
ax.set_xticks([])
ax.invert_yaxis()
fig.tight_layout()
fig.savefig("merged_summary.png", dpi=110)
'''


def cmd_report(args) -> int:
    import csv
    import io

    from . import plots

    root = Path(args.dir)
    doc = merge_reports(root)
    if args.dry_run:
        print(json.dumps({"sources": doc["sources"], "rows": len(doc["checks"])}, indent=2))
        return EXIT_OK
    (root / f"{MERGED}.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["source", "check", "predicted", "measured", "tolerance", "pass"],
                       lineterminator="\n")
    w.writeheader()
    for r in doc["checks"]:
        w.writerow({**r, "pass": "true" if r["pass"] else "false"})
    (root / f"{MERGED}.csv").write_text(buf.getvalue())
    (root / "plot_report.py").write_text(PLOT_SCRIPT)
    plots.summary_figure([{**r, "check": f"{r['source']}: {r['check']}"} for r in doc["checks"]],
                         root / "merged_summary.png")
    n_fail = sum(not r["pass"] for r in doc["checks"])
    print(f"merged {len(doc['checks'])} checks from {len(doc['sources'])} files; {n_fail} failing")
    return EXIT_OK if doc["all_pass"] else EXIT_CHECK


# ----------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--jobs", type=int, default=1, help="worker cap (FFT threads, parallel suites)")
    common.add_argument("--dry-run", action="store_true", help="validate and print the plan, write nothing")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="stokes", description="Half-space Stokes semigroup laboratory.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("evolve", parents=[common], help="evolve a datum from a JSON experiment config")
    e.add_argument("--config")
    e.add_argument("--out", help="output directory (overrides the config)")
    e.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config entry")
    e.set_defaults(func=cmd_evolve)

    d = sub.add_parser("decompose", parents=[common], help="Helmholtz decomposition of a configured field")
    d.add_argument("--config")
    d.add_argument("--out")
    d.add_argument("--set", action="append", metavar="KEY=VALUE")
    d.set_defaults(func=cmd_decompose)

    s = sub.add_parser("suite", parents=[common], help="run a verification suite")
    s.add_argument("name", help="decay, helmholtz, weights, interpolation, oracle-xcheck or all")
    s.add_argument("--q", type=float, default=6.0, help="Lebesgue exponent for decay and interpolation")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_suite)

    r = sub.add_parser("report", parents=[common], help="merge reports below a directory")
    r.add_argument("dir")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except (ValidationError, SingularPoint, FileNotFoundError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalFailure, FloatingPointError, np.linalg.LinAlgError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except HalfStokesError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
