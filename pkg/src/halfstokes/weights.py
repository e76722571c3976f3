"""Power-product weights, weighted and Lorentz norms, and the Muckenhoupt audit.

The weight is ``w(x) = prod_j |x - c_j|**alpha_j`` and its dual is ``1/w``.
Norms on grids use node quadrature; nodes close to a weight centre switch to
product integration, ``|u(node)|**p * int_cell omega``, with the cell integral
of the singular factor done by an adaptive octree Gauss-Legendre rule.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .cache import cached_arrays
from .errors import BadParameters, GridMismatch, SingularPoint, ValidationError
from .fields import Grid, ScalarField, VectorField

__all__ = [
    "WeightSpec",
    "NormTag",
    "eval_weight",
    "eval_dual_weight",
    "dual_weight_laplacian_bound",
    "dual_weight_laplacian_exact",
    "power_product_integral",
    "cell_weight_integrals",
    "weighted_norm",
    "lorentz_norm",
    "rearrangement",
    "ap_product",
    "refining_cubes",
    "ApAudit",
    "muckenhoupt_audit",
]


@dataclass(frozen=True)
class WeightSpec:
    """Weight data: dimension ``n``, primal exponent ``p``, centres and exponents."""

    n: int
    p: float
    centers: tuple
    exponents: tuple

    def __post_init__(self):
        c = tuple(tuple(float(v) for v in row) for row in self.centers)
        a = tuple(float(v) for v in self.exponents)
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "exponents", a)
        if int(self.n) != self.n or self.n < 3:
            raise ValidationError("n must be an integer >= 3")
        object.__setattr__(self, "n", int(self.n))
        if len(c) < 1 or len(c) != len(a):
            raise ValidationError("need m >= 1 centres with one exponent each")
        if any(len(row) != self.n for row in c):
            raise ValidationError("centre dimension does not match n")
        if any(v < 0 for v in a):
            raise ValidationError("exponents must be non-negative")
        if any(row[-1] < 0 for row in c):
            raise ValidationError("centres must satisfy x_n >= 0")
        if not np.isfinite(self.p) or self.p <= 1:
            raise ValidationError("p must be a finite real > 1")

    @property
    def m(self) -> int:
        return len(self.exponents)

    @property
    def alpha(self) -> float:
        return float(sum(self.exponents))

    @property
    def scaling_invariant(self) -> bool:
        return abs(self.alpha - (1 - self.n / self.p)) < 1e-12

    @property
    def p_dual(self) -> float:
        return self.p / (self.p - 1)

    @property
    def dual_exponents(self) -> tuple:
        return tuple(-a for a in self.exponents)

    @property
    def center_array(self) -> np.ndarray:
        return np.asarray(self.centers, dtype=float)

    @classmethod
    def single(cls, n=3, p=4.0, center=None, alpha=None):
        """One centre (default origin) with the scaling-invariant exponent."""
        center = (0.0,) * n if center is None else center
        alpha = 1 - n / p if alpha is None else alpha
        return cls(n, p, (tuple(center),), (alpha,))

    # JSON ---------------------------------------------------------------
    def to_dict(self) -> dict:
        return {"n": self.n, "p": self.p, "centers": [list(c) for c in self.centers],
                "exponents": list(self.exponents)}

    @classmethod
    def from_dict(cls, d: dict) -> "WeightSpec":
        try:
            return cls(d["n"], float(d["p"]), d["centers"], d["exponents"])
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"bad WeightSpec: {exc}") from exc

    @classmethod
    def load(cls, path) -> "WeightSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class NormTag:
    """Which norm to compute.

    kind is one of ``weighted-Lp``, ``plain-Lq``, ``Lorentz``, ``sup``.
    ``dual`` switches a weighted norm to the dual weight ``1/w``.
    """

    kind: str
    p: float | None = None
    q: float | None = None
    dual: bool = False

    def __post_init__(self):
        if self.kind not in ("weighted-Lp", "plain-Lq", "Lorentz", "sup"):
            raise BadParameters(f"unknown norm kind {self.kind!r}")
        if self.kind == "Lorentz":
            if self.p is None or self.q is None or not (0 < self.p <= self.q):
                raise BadParameters("Lorentz(p, q) needs 0 < p <= q <= inf")

    @classmethod
    def weighted(cls, p=None, dual=False):
        return cls("weighted-Lp", p=p, dual=dual)

    @classmethod
    def plain(cls, q):
        return cls("plain-Lq", q=q)

    @classmethod
    def lorentz(cls, p, q):
        return cls("Lorentz", p=p, q=q)

    @classmethod
    def sup(cls):
        return cls("sup")


# ----------------------------------------------------------------------------
# pointwise

def _dists(spec: WeightSpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.n:
        raise GridMismatch("point dimension does not match spec.n")
    c = spec.center_array
    return np.linalg.norm(x[..., None, :] - c, axis=-1)          # (..., m)


def eval_weight(spec: WeightSpec, x) -> np.ndarray:
    """``prod_j |x - c_j|**alpha_j`` (zero at centres with alpha_j > 0)."""
    r = _dists(spec, x)
    return np.prod(r ** np.asarray(spec.exponents), axis=-1)


def eval_dual_weight(spec: WeightSpec, x) -> np.ndarray:
    r = _dists(spec, x)
    a = np.asarray(spec.exponents)
    if np.any((r == 0) & (a > 0)):
        raise SingularPoint("dual weight evaluated at a centre")
    return np.prod(r ** -a, axis=-1)


def dual_weight_laplacian_bound(spec: WeightSpec, x) -> np.ndarray:
    """Closed-form upper bound for the Laplacian of ``(1/w)**p'``.

    ``(a'p' + n - 2) * sum_h a'_h p' prod_i |x - c_i|**(a'_i p' - 2 delta_hi)``
    with ``a'_j = -alpha_j``.
    """
    r = _dists(spec, x)
    a = np.asarray(spec.exponents)
    if np.any((r == 0) & (a > 0)):
        raise SingularPoint("bound evaluated at a centre")
    b = -a * spec.p_dual                                          # a'_j p'
    f = np.prod(r ** b, axis=-1)
    s = np.sum(b / np.where(r == 0, 1.0, r) ** 2, axis=-1)
    return (b.sum() + spec.n - 2) * f * s


def dual_weight_laplacian_exact(spec: WeightSpec, x) -> np.ndarray:
    """Exact Laplacian of ``(1/w)**p'`` away from the centres."""
    x = np.asarray(x, dtype=float)
    d = x[..., None, :] - spec.center_array                       # (..., m, n)
    r2 = np.einsum("...k,...k->...", d, d)
    a = np.asarray(spec.exponents)
    if np.any((r2 == 0) & (a > 0)):
        raise SingularPoint("Laplacian evaluated at a centre")
    b = -a * spec.p_dual
    f = np.prod(r2 ** (b / 2), axis=-1)
    g = d * (b / r2)[..., None]                                   # grad log f pieces
    gsum = g.sum(axis=-2)
    lap_log = np.sum(b * (spec.n - 2) / r2, axis=-1)
    return f * (np.einsum("...k,...k->...", gsum, gsum) + lap_log)


# ----------------------------------------------------------------------------
# singular cell integrals

_GL_CACHE: dict = {}


def _gauss(order: int, n: int):
    key = (order, n)
    if key not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(order)
        X = np.stack(np.meshgrid(*([x] * n), indexing="ij"), -1).reshape(-1, n)
        W = np.prod(np.stack(np.meshgrid(*([w] * n), indexing="ij"), -1).reshape(-1, n), -1)
        _GL_CACHE[key] = (X, W)
    return _GL_CACHE[key]


def _box_dist(c, lo, hi):
    # distance from points c (m, n) to boxes (B, n) -> (B, m)
    d = np.maximum(lo[:, None, :] - c[None], 0) + np.maximum(c[None] - hi[:, None, :], 0)
    return np.linalg.norm(d, axis=-1)


def power_product_integral(centers, exps, lo, hi, rtol=1e-10, max_depth=40, order=6):
    """Integrate ``prod_j |x - c_j|**b_j`` over the box ``[lo, hi]``.

    Boxes within one side length of a singular centre are split into ``2**n``
    children; the rest use tensor Gauss-Legendre.  Refinement stops when the
    Gauss estimate on the remaining near boxes is below ``rtol`` of the total.
    Returns ``inf`` when a centre with ``b_j <= -n`` lies in the closed box.
    """
    c = np.atleast_2d(np.asarray(centers, float))
    b = np.asarray(exps, float)
    lo = np.atleast_2d(np.asarray(lo, float))
    hi = np.atleast_2d(np.asarray(hi, float))
    n = c.shape[1]
    sing = b != 0
    inside = _box_dist(c, lo, hi) == 0
    if np.any(inside & (b <= -n)[None]):
        return np.inf
    X, W = _gauss(order, n)

    def gl(lo_, hi_):
        half = 0.5 * (hi_ - lo_)
        pts = 0.5 * (hi_ + lo_)[:, None, :] + half[:, None, :] * X[None]
        r = np.linalg.norm(pts[:, :, None, :] - c[None, None], axis=-1)
        with np.errstate(divide="ignore"):
            f = np.prod(np.where(sing, r, 1.0) ** b, axis=-1)
        return (f * W).sum(-1) * np.prod(half, -1)

    total = 0.0
    for depth in range(max_depth + 1):
        side = np.max(hi - lo, axis=1)
        near = np.any((_box_dist(c, lo, hi) < side[:, None]) & sing[None], axis=1)
        if np.any(~near):
            total += gl(lo[~near], hi[~near]).sum()
        if not np.any(near):
            return float(total)
        lo, hi = lo[near], hi[near]
        est = gl(lo, hi).sum()
        if depth > 0 and abs(est) <= rtol * abs(total):
            return float(total + est)
        # split every remaining box into 2**n children
        mid = 0.5 * (lo + hi)
        corners = np.array(list(np.ndindex(*(2,) * n)), dtype=bool)
        lo = np.concatenate([np.where(k, mid, lo) for k in corners])
        hi = np.concatenate([np.where(k, hi, mid) for k in corners])
    return float(total + gl(lo, hi).sum())


def _cell_key(spec: WeightSpec, power: float, dual: bool):
    a = np.asarray(spec.exponents) * power * (-1 if dual else 1)
    return spec.centers, tuple(a)


@lru_cache(maxsize=64)
def _cell_integrals_cached(grid: Grid, centers: tuple, exps: tuple, near: float, rtol: float):
    c = np.asarray(centers, float)
    b = np.asarray(exps, float)
    n = grid.n
    X = grid.mesh(sparse=True)
    # nodal values times node weights
    om = np.ones(grid.shape)
    for j in range(len(b)):
        if b[j] == 0:
            continue
        r = np.sqrt(sum((X[k] - c[j, k]) ** 2 for k in range(n)))
        with np.errstate(divide="ignore"):
            om = om * r ** b[j]
    out = om * grid.quad_weights()
    h = np.asarray(grid.spacing)

    def near_cells():
        # product integration for nodes close to a singular centre
        nodes, vals = [], []
        for j in np.nonzero(b != 0)[0]:
            idx = [np.nonzero(np.abs(grid.coords(k) - c[j, k]) <= near * h[k])[0] for k in range(n)]
            for node in np.ndindex(*[len(i) for i in idx]):
                ii = tuple(int(idx[k][node[k]]) for k in range(n))
                x = np.array([grid.coords(k)[ii[k]] for k in range(n)])
                lo, hi = x - h / 2, x + h / 2
                if grid.half_space:
                    lo[-1] = max(lo[-1], 0.0)
                nodes.append(ii)
                vals.append(power_product_integral(c, b, lo, hi, rtol=rtol))
        return {"nodes": np.array(nodes, dtype=np.int64).reshape(-1, n), "values": np.array(vals, float)}

    key = {"grid": grid.to_dict(), "centers": centers, "exps": exps, "near": near, "rtol": rtol}
    corr = cached_arrays("cells", key, near_cells)
    for ii, val in zip(corr["nodes"], corr["values"]):
        out[tuple(ii)] = val
    out.setflags(write=False)
    return out


def cell_weight_integrals(grid: Grid, spec: WeightSpec, power: float, dual: bool = False,
                          near: float = 1.5, rtol: float = 1e-10) -> np.ndarray:
    """Quadrature weights ``int_cell w**power`` (or ``w**-power`` if dual).

    Nodes farther than ``near`` spacings from every centre use the nodal
    value times the node weight.
    """
    if grid.n != spec.n:
        raise GridMismatch("grid and spec dimensions differ")
    centers, exps = _cell_key(spec, power, dual)
    return _cell_integrals_cached(grid, centers, exps, float(near), float(rtol))


def _pointwise_abs(f) -> np.ndarray:
    if isinstance(f, VectorField):
        return f.magnitude()
    if isinstance(f, ScalarField):
        return np.abs(f.data)
    raise GridMismatch("expected a ScalarField or VectorField")


def weighted_norm(f, spec: WeightSpec | None, tag: NormTag) -> float:
    """Norm of a sampled field on its grid.

    ``weighted-Lp``: ``||u w||_p`` (``||u / w||_p`` when ``tag.dual``), with
    ``p`` defaulting to ``spec.p``.  ``plain-Lq``: unweighted.  ``sup``: max.
    ``Lorentz``: see :func:`lorentz_norm`.
    """
    a = _pointwise_abs(f)
    g = f.grid
    if tag.kind == "sup":
        return float(a.max(initial=0.0))
    if tag.kind == "Lorentz":
        return lorentz_norm(f, tag.p, tag.q)
    if tag.kind == "plain-Lq":
        q = tag.q
        if np.isinf(q):
            return float(a.max(initial=0.0))
        return float(((a ** q) * g.quad_weights()).sum() ** (1.0 / q))
    if spec is None:
        raise BadParameters("weighted norm needs a WeightSpec")
    if spec.n != g.n:
        raise GridMismatch("grid and spec dimensions differ")
    p = tag.p if tag.p is not None else (spec.p_dual if tag.dual else spec.p)
    W = cell_weight_integrals(g, spec, p, dual=tag.dual)
    with np.errstate(invalid="ignore"):
        s = np.where(a == 0, 0.0, a ** p * W).sum()
    return float(s ** (1.0 / p))


def rearrangement(values: np.ndarray, measure: np.ndarray):
    """Decreasing rearrangement of a step function.

    Returns ``(levels, edges)``: ``g*(t) = levels[k]`` on ``[edges[k], edges[k+1])``.
    """
    v = np.abs(np.asarray(values, float)).ravel()
    m = np.broadcast_to(measure, np.shape(values)).ravel()
    order = np.argsort(-v, kind="stable")
    levels = v[order]
    edges = np.concatenate([[0.0], np.cumsum(m[order])])
    return levels, edges


def lorentz_norm(f, p: float, q: float, region: np.ndarray | None = None) -> float:
    """Lorentz ``L^{p,q}`` quasi-norm of a sampled field.

    The field is treated as a step function on node cells.  For finite ``q``
    the integral of ``(t**(1/p) g*(t))**q dt/t`` is summed exactly cell by
    cell; for ``q = inf`` the supremum is taken at the right end of each step.
    """
    if not (0 < p <= q):
        raise BadParameters("need 0 < p <= q <= inf")
    a = _pointwise_abs(f)
    meas = np.broadcast_to(f.grid.quad_weights(), a.shape)
    if region is not None:
        a = a[region]
        meas = meas[region]
    levels, edges = rearrangement(a, meas)
    keep = levels > 0
    if not np.any(keep):
        return 0.0
    lv, lo_e, hi_e = levels[keep], edges[:-1][keep], edges[1:][keep]
    if np.isinf(q):
        return float(np.max(hi_e ** (1.0 / p) * lv))
    s = (p / q) * np.sum(lv ** q * (hi_e ** (q / p) - lo_e ** (q / p)))
    return float(s ** (1.0 / q))


# ----------------------------------------------------------------------------
# Muckenhoupt audit

def ap_product(centers, exps, p: float, lo, hi, rtol=1e-9) -> float:
    """``avg_Q(omega) * avg_Q(omega**(-1/(p-1)))**(p-1)`` for ``omega = prod |x-c_j|**e_j``."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    vol = float(np.prod(hi - lo))
    e = np.asarray(exps, float)
    a1 = power_product_integral(centers, e, lo, hi, rtol=rtol) / vol
    a2 = power_product_integral(centers, -e / (p - 1), lo, hi, rtol=rtol) / vol
    return float(a1 * a2 ** (p - 1))


def refining_cubes(centers, levels: int = 12, side0: float = 1.0):
    """Cube families shrinking onto each centre.

    For each centre and level ``k`` (side ``side0 / 2**k``) three cubes are
    produced: centred on the point, with a corner on it, and translated by
    one side length along the first axis.  Yields ``(level, center, side)``.
    """
    for c in np.atleast_2d(np.asarray(centers, float)):
        n = c.size
        shift = np.zeros(n)
        shift[0] = 1.0
        for k in range(levels):
            s = side0 * 2.0 ** -k
            for q in (c, c + s / 2, c + s * shift):
                yield k, q, s


@dataclass
class ApAudit:
    p: float
    rows: list = field(default_factory=list)          # (level, center, side, product)

    @property
    def products(self) -> np.ndarray:
        return np.array([r[3] for r in self.rows])

    @property
    def constant(self) -> float:
        return float(np.max(self.products)) if self.rows else 1.0

    @property
    def variation(self) -> float:
        """Relative growth of the running sup over the finer half of the levels."""
        if not self.rows:
            return 0.0
        lev = np.array([r[0] for r in self.rows])
        pr = self.products
        if not np.all(np.isfinite(pr)):
            return np.inf
        half = lev < (lev.max() + 1) / 2
        c_half = pr[half].max() if np.any(half) else pr.max()
        return float((pr.max() - c_half) / pr.max())

    @property
    def violation(self) -> bool:
        return bool(not np.all(np.isfinite(self.products)) or self.variation >= 0.1)

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["cube_center", "cube_side", "ap_product"])
            for _, c, s, pr in self.rows:
                w.writerow([" ".join(f"{v:.10g}" for v in c), f"{s:.10g}", f"{pr:.10g}"])
        return path


def muckenhoupt_audit(spec: WeightSpec | None = None, cubes: Iterable | None = None,
                      which: str = "w^p", *, centers=None, exps=None, p=None,
                      levels: int = 12, side0: float = 1.0, rtol: float = 1e-9) -> ApAudit:
    """Empirical A_p constant over a family of cubes.

    Either pass a ``WeightSpec`` (``omega = w**p`` or ``w`` itself via
    ``which``) or raw ``centers``/``exps``/``p`` for a general power product.
    ``cubes`` yields ``(level, center, side)``; by default the refining
    families of :func:`refining_cubes` are used.
    """
    if spec is not None:
        centers = spec.center_array
        p = spec.p
        scale = spec.p if which == "w^p" else 1.0
        if which not in ("w^p", "w"):
            raise BadParameters("which must be 'w^p' or 'w'")
        exps = np.asarray(spec.exponents) * scale
    if centers is None or exps is None or p is None:
        raise BadParameters("need a spec or explicit centers, exps and p")
    if p <= 1:
        raise BadParameters("A_p needs p > 1")
    if cubes is None:
        cubes = refining_cubes(centers, levels, side0)
    audit = ApAudit(float(p))
    for lev, c, s in cubes:
        c = np.asarray(c, float)
        pr = ap_product(centers, exps, p, c - s / 2, c + s / 2, rtol=rtol)
        audit.rows.append((int(lev), tuple(c), float(s), pr))
    return audit
