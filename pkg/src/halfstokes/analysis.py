"""Decay-rate regression, interpolation and semigroup audits, report tables."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import BadParameters, DegenerateData
from .fields import ScalarField, VectorField
from .kernels import unit_ball_volume
from .weights import NormTag, WeightSpec, weighted_norm

__all__ = [
    "predicted_exponent",
    "DecayFit",
    "fit_decay",
    "interpolation_exponents",
    "interpolation_constant",
    "interpolation_ratio",
    "interpolation_audit",
    "monotonicity_audit",
    "continuity_at_zero",
    "Check",
    "write_report",
    "read_report",
    "to_jsonable",
]


def predicted_exponent(n: int, q: float, k: int = 0, l: int = 0, kind: str = "velocity") -> float:
    """Time exponent of the decay bound for ``d_t^l D^k v`` in ``L^q`` (or the
    pressure gradient), for data in the scaling-invariant space.

    ``velocity``: ``-n/2 (1/n - 1/q) - k/2 - l``;  ``pressure``:
    ``-n/2 (1/n - 1/q) - 1``;  ``sup``: the velocity formula at ``q = inf``.
    """
    if kind == "sup":
        q = np.inf
    elif kind not in ("velocity", "pressure"):
        raise BadParameters(f"unknown kind {kind!r}")
    if not q > n:
        raise BadParameters("need q > n")
    base = -n / 2 * (1 / n - 1 / q)
    if kind == "pressure":
        return float(base - 1)
    return float(base - k / 2 - l)


@dataclass
class DecayFit:
    times: list
    norms: list
    fitted_slope: float
    predicted_slope: float
    slope_ci: float
    intercept: float
    tolerance: float = 0.1
    mode: str = "saturating"
    passed: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def fit_decay(trajectory, predicted: float, tolerance: float = 0.1, mode: str = "saturating",
              min_samples: int = 5, min_decades: float = 1.0) -> DecayFit:
    """Least-squares slope of ``log norm`` against ``log t``.

    ``mode="saturating"`` passes iff ``|slope - predicted| <= tolerance``;
    ``mode="upper"`` passes iff ``slope <= predicted + tolerance`` (data that
    decay faster than the bound).  ``slope_ci`` is the 95% half-width.
    """
    t, y = (np.asarray(a, float) for a in zip(*trajectory))
    if len(t) < min_samples:
        raise DegenerateData(f"need >= {min_samples} samples")
    if np.any(y <= 0) or np.any(t <= 0) or not np.all(np.isfinite(y)):
        raise DegenerateData("times and norms must be positive and finite")
    if np.log10(t.max() / t.min()) < min_decades - 1e-9:
        raise DegenerateData(f"samples must span >= {min_decades} decade(s)")
    r = stats.linregress(np.log(t), np.log(y))
    ci = float(stats.t.ppf(0.975, len(t) - 2) * r.stderr)
    slope = float(r.slope)
    if mode == "saturating":
        ok = abs(slope - predicted) <= tolerance
    elif mode == "upper":
        ok = slope <= predicted + tolerance
    else:
        raise BadParameters(f"unknown mode {mode!r}")
    return DecayFit(t.tolist(), y.tolist(), slope, float(predicted), ci, float(r.intercept),
                    tolerance, mode, bool(ok))


# ----------------------------------------------------------------------------
# interpolation inequality ||g||_q <= c ||g||_{w,p}^{n/q} ||g||_inf^{1 - n/q}

def interpolation_exponents(n: int, q: float) -> dict:
    """Exponents of the weighted and sup factors and the intermediate exponent
    ``gamma = (q - n) / (n (q - 1))``."""
    a = n / q
    b = n * (1 / n - 1 / q)
    return {"weighted": a, "sup": b, "sum": a + b, "gamma": (q - n) / (n * (q - 1))}


def interpolation_constant(spec: WeightSpec, q: float) -> float:
    """Explicit bound on the ratio for a single-centre scaling-invariant weight.

    Split ``int |g|^q`` at ``|x - c| = R``: inside use ``||g||_inf`` on a ball
    of volume ``V(n) R^n``; outside use ``|x - c|^(alpha p) >= R^(alpha p)``
    with ``alpha p = p - n``.  Minimising over ``R`` gives
    ``||g||_q^q <= C ||g||_inf^(q-n) ||g w||_p^n`` with
    ``C = p/(p-n) V^(1-n/p) ((p-n)/n)^(n/p)``; the ratio bound is ``C^(1/q)``.
    """
    if spec.m != 1 or not spec.scaling_invariant:
        raise BadParameters("explicit constant needs a single-centre scaling-invariant weight")
    n, p = spec.n, spec.p
    if not p > n:
        raise BadParameters("need p > n")
    V = unit_ball_volume(n)
    C = p / (p - n) * V ** (1 - n / p) * ((p - n) / n) ** (n / p)
    return float(C ** (1 / q))


def interpolation_ratio(g, spec: WeightSpec, q: float) -> float:
    n = spec.n
    nq = weighted_norm(g, None, NormTag.plain(q))
    nw = weighted_norm(g, spec, NormTag.weighted())
    ns = weighted_norm(g, None, NormTag.sup())
    den = nw ** (n / q) * ns ** (1 - n / q)
    if den <= 0:
        raise DegenerateData("zero field")
    return float(nq / den)


def _dilate(g, mu: float):
    """``x -> g(mu x)`` on the same node array (grid scaled by ``1/mu``)."""
    return type(g)(g.grid.scaled(1.0 / mu), g.data, g.time)


def interpolation_audit(fields: Sequence, spec: WeightSpec, q: float,
                        dilations=(0.25, 1.0, 4.0)) -> dict:
    """Ratios over an ensemble, plus the dilation test when the weight is a
    single power centred at the origin."""
    ratios = [interpolation_ratio(g, spec, q) for g in fields]
    out = {"q": q, "count": len(ratios), "ratios": ratios, "max_ratio": max(ratios),
           "exponents": interpolation_exponents(spec.n, q)}
    if spec.m == 1 and spec.scaling_invariant:
        out["explicit_bound"] = interpolation_constant(spec, q)
    if spec.m == 1 and np.allclose(spec.centers[0], 0.0):
        dev = 0.0
        for g in fields[: min(len(fields), 5)]:
            r0 = interpolation_ratio(g, spec, q)
            for mu in dilations:
                dev = max(dev, abs(interpolation_ratio(_dilate(g, mu), spec, q) - r0) / r0)
        out["dilation_deviation"] = dev
    return out


# ----------------------------------------------------------------------------
# semigroup audits

def monotonicity_audit(times, norms, whole_space: bool, slack: float = 1e-3, datum_norm=None) -> dict:
    """Whole space: non-increase with relative ``slack``.  Half space: the
    empirical constant ``max_{t > s} ||v(t)|| / ||v(s)||`` (``s = 0`` included
    when ``datum_norm`` is given)."""
    t = list(times)
    y = list(norms)
    if datum_norm is not None:
        t = [0.0] + t
        y = [float(datum_norm)] + y
    y = np.asarray(y, float)
    if np.any(y < 0):
        raise DegenerateData("norms must be non-negative")
    c = 1.0
    for i in range(len(y)):
        if y[i] > 0:
            c = max(c, float(np.max(y[i:] / y[i])))
    out = {"times": t, "norms": y.tolist(), "constant": c}
    if whole_space:
        inc = np.diff(y) / np.maximum(y[:-1], 1e-300)
        out["max_relative_increase"] = float(inc.max(initial=0.0))
        out["nonincreasing"] = bool(np.all(inc <= slack))
    return out


def continuity_at_zero(evaluate, datum, spec: WeightSpec, ks=range(2, 9), tol: float = 0.05) -> dict:
    """``||v(2^-k) - v0||_{w,p}`` for ``k`` in ``ks``.

    ``evaluate(t)`` returns the velocity array at time ``t`` on the datum's
    grid.  Passes iff the sequence is strictly decreasing and the last value
    is at most ``tol`` times ``||v0||_{w,p}``.
    """
    tag = NormTag.weighted()
    n0 = weighted_norm(datum, spec, tag)
    ts = [2.0 ** -k for k in ks]
    diffs = []
    for t in ts:
        v = evaluate(t)
        diffs.append(weighted_norm(VectorField(datum.grid, v - datum.data, t), spec, tag))
    dec = bool(np.all(np.diff(diffs) < 0))
    rel = diffs[-1] / n0 if n0 > 0 else 0.0
    return {"times": ts, "differences": diffs, "datum_norm": n0, "final_relative": rel,
            "strictly_decreasing": dec, "passed": dec and rel <= tol}


# ----------------------------------------------------------------------------
# report tables

@dataclass
class Check:
    check: str
    predicted: float | str | None
    measured: float | str | None
    tolerance: float | str | None
    passed: bool
    details: dict = field(default_factory=dict)

    def row(self) -> dict:
        return {"check": self.check, "predicted": _fmt(self.predicted), "measured": _fmt(self.measured),
                "tolerance": _fmt(self.tolerance), "pass": bool(self.passed)}


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, float, np.floating, np.integer)):
        return f"{float(x):.10g}"
    return str(x)


def to_jsonable(o):
    if isinstance(o, dict):
        return {str(k): to_jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [to_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return to_jsonable(o.tolist())
    if isinstance(o, (np.floating, float)):
        v = float(o)
        return v if np.isfinite(v) else str(v)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    return o


def write_report(checks: Sequence[Check], out_dir, name: str = "report", extra: dict | None = None):
    """Write ``<name>.json`` and ``<name>.csv`` (columns check, predicted,
    measured, tolerance, pass).  Output is deterministic for equal input."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = [c.row() for c in checks]
    doc = {"checks": rows, "details": {c.check: to_jsonable(c.details) for c in checks},
           "all_pass": all(c.passed for c in checks)}
    if extra:
        doc["extra"] = to_jsonable(extra)
    (out / f"{name}.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=["check", "predicted", "measured", "tolerance", "pass"],
                       lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({**r, "pass": "true" if r["pass"] else "false"})
    (out / f"{name}.csv").write_text(buf.getvalue())
    return out / f"{name}.json", out / f"{name}.csv"


def read_report(path) -> dict:
    return json.loads(Path(path).read_text())
