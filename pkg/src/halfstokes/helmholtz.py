"""Helmholtz decomposition on the half-space box.

The Neumann problem ``Delta psi = div g`` in the half space with
``d_n psi = g_n`` on the plane is solved by reflecting ``g`` (tangential
components even, normal component odd), which matches the Neumann Green
function ``E(x - y) + E(x - y*)``, and inverting the Laplacian by FFT on the
doubled periodic box.  The top layer of the box is a second mirror plane, so
restriction and re-extension are exact and the discrete projection is
idempotent.  The tangential mean of ``g`` (a constant field, the gradient of a
linear function) is assigned to ``grad psi``.  ``psi`` is fixed by zero mean
on the half box.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sf

from .errors import GridMismatch, GridTooSmall, ValidationError
from .fields import Grid, ScalarField, VectorField
from .kernels import grad_laplace_fundamental
from .weights import NormTag, WeightSpec, weighted_norm

__all__ = [
    "ZERO_MODE_NOTE",
    "DecompositionResult",
    "solve_neumann",
    "decompose",
    "random_potential",
    "orthogonality_audit",
    "neumann_gradient_direct",
    "stability_constants",
]

ZERO_MODE_NOTE = "additive constant of psi fixed by zero mean on the half box"


def _ext(a: np.ndarray, odd: bool) -> np.ndarray:
    """Reflect the last axis about both ``x_n = 0`` and the top layer.

    ``Nn`` layers become a period of ``2 (Nn - 1)``; odd extension zeroes the
    two wall layers.
    """
    inner = a[..., -2:0:-1]
    if odd:
        a = a.copy()
        a[..., 0] = 0.0
        a[..., -1] = 0.0
        inner = -inner
    return np.concatenate([a, inner], axis=-1)


def _reflect(u: VectorField) -> np.ndarray:
    n = u.grid.n
    return np.stack([_ext(u.data[i], i == n - 1) for i in range(n)])


def _modes(grid: Grid):
    """First-derivative symbols (Nyquist zeroed) on the doubly reflected box."""
    shape = grid.shape[:-1] + (2 * (grid.shape[-1] - 1),)
    kd = []
    for a in range(grid.n):
        N = shape[a]
        dd = 2 * np.pi * sf.fftfreq(N, grid.spacing[a])
        if N % 2 == 0:
            dd[N // 2] = 0.0
        sh = [1] * grid.n
        sh[a] = -1
        kd.append(dd.reshape(sh))
    return kd


def solve_neumann(g: VectorField, jobs: int = 1):
    """Solve the half-space Neumann problem for data ``g``.

    Returns
    -------
    psi : ScalarField
    grad_psi : VectorField
        Spectral gradient of ``psi``.

    Notes
    -----
    The Laplacian is inverted with the first-derivative symbol ``kd`` so that
    ``g - grad psi`` is exactly divergence-free for the same spectral
    divergence and the map ``g -> grad psi`` is an exact projection.
    """
    grid = g.grid
    if not grid.half_space:
        raise ValidationError("Neumann solve needs a half-space field")
    n, Nn = grid.n, grid.shape[-1]
    if min(grid.shape) < 4:
        raise GridTooSmall("Neumann solve needs >= 4 nodes per axis")
    kd = _modes(grid)
    kd2 = sum(k * k for k in kd)
    ext = _reflect(g)
    div = sum(1j * kd[a] * sf.fftn(ext[a], workers=jobs) for a in range(n))
    with np.errstate(divide="ignore", invalid="ignore"):
        ph = np.where(kd2 > 0, -div / kd2, 0.0)
    psi = sf.ifftn(ph, workers=jobs).real[..., :Nn]
    gp = np.stack([sf.ifftn(1j * kd[a] * ph, workers=jobs).real[..., :Nn] for a in range(n)])
    # the tangential mean of g is the gradient of a linear function
    X = grid.mesh(sparse=True)
    for a in range(n - 1):
        c = float(np.mean(ext[a]))
        gp[a] += c
        psi = psi + c * X[a]
    w = np.broadcast_to(grid.quad_weights(), grid.shape)
    psi = psi - float(np.sum(psi * w) / np.sum(w))
    return ScalarField(grid, psi, g.time), VectorField(grid, gp, g.time)


@dataclass
class DecompositionResult:
    """``u = v + grad_psi`` with residuals and (optionally) weighted norms."""

    v: VectorField
    grad_psi: VectorField
    psi: ScalarField
    residuals: dict = field(default_factory=dict)
    norms: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"residuals": self.residuals, "norms": self.norms, "zero_mode": ZERO_MODE_NOTE}


def _spectral_div(v: VectorField, jobs=1) -> np.ndarray:
    grid = v.grid
    kd = _modes(grid)
    ext = _reflect(v)
    d = sum(sf.ifftn(1j * kd[a] * sf.fftn(ext[a], workers=jobs), workers=jobs).real
            for a in range(grid.n))
    return d[..., :grid.shape[-1]]


def _l2(a, grid):
    return float(np.sqrt(np.sum(np.sum(a * a, axis=0) * grid.quad_weights())))


def decompose(u: VectorField, spec: WeightSpec | None = None, q: float | None = None,
              jobs: int = 1) -> DecompositionResult:
    """Split ``u`` into a solenoidal part with zero normal trace and a gradient.

    If ``spec`` is given the weighted ``q``-norms (``q`` defaults to
    ``spec.p``) of ``u``, ``v`` and ``grad psi`` are recorded together with the
    ratio ``(||v|| + ||grad psi||) / ||u||``.
    """
    psi, gp = solve_neumann(u, jobs)
    grid = u.grid
    v = VectorField(grid, u.data - gp.data, u.time)
    un = _l2(u.data, grid)
    scale = max(un, 1e-300)
    res = {
        "recomposition": _l2(u.data - (v.data + gp.data), grid) / scale,
        "divergence": _l2(_spectral_div(v, jobs)[None], grid) / scale,
        "normal_trace": float(np.abs(v.data[-1][..., 0]).max()) / max(float(np.abs(u.data).max()), 1e-300),
        "v_fraction": _l2(v.data, grid) / scale,
        "grad_fraction": _l2(gp.data, grid) / scale,
    }
    out = DecompositionResult(v, gp, psi, res)
    if spec is not None:
        q = spec.p if q is None else q
        tag = NormTag.weighted(p=q)
        nu, nv, ng = (weighted_norm(f, spec, tag) for f in (u, v, gp))
        out.norms = {"q": q, "u": nu, "v": nv, "grad_psi": ng,
                     "constant": (nv + ng) / max(nu, 1e-300)}
    return out


# ----------------------------------------------------------------------------
# orthogonality audit

def random_potential(grid: Grid, rng: np.random.Generator, spec: WeightSpec | None = None,
                   q_dual: float | None = None):
    """Random potential: a Gaussian bump plus a slowly decaying algebraic tail.

    The tail ``(1 + |x - c|^2 / s^2)^(-beta/2)`` uses the smallest ``beta``
    (plus a margin) for which the gradient has finite dual weighted norm on
    the whole half space.  Returns ``(pi, grad_pi)`` sampled on ``grid``.
    """
    n = grid.n
    L = np.array([-o for o in grid.origin[:-1]])
    Ln = grid.spacing[-1] * grid.shape[-1]
    X = grid.mesh(sparse=True)
    c = np.concatenate([rng.uniform(-0.5 * L, 0.5 * L), [rng.uniform(0.0, 0.5 * Ln)]])
    s = rng.uniform(0.1, 0.3) * Ln
    a, b = rng.normal(size=2)
    alpha = sum(spec.exponents) if spec is not None else 0.0
    qd = q_dual if q_dual is not None else (spec.p_dual if spec is not None else 2.0)
    beta = max(alpha + n / qd - 1.0, 0.0) + 0.25
    r2 = sum((X[i] - c[i]) ** 2 for i in range(n))
    bump = np.exp(-r2 / (2 * s * s))
    tail = (1 + r2 / (s * s)) ** (-beta / 2)
    pi = a * bump + b * tail
    dpi = a * (-1.0 / (s * s)) * bump + b * (-beta / (s * s)) * (1 + r2 / (s * s)) ** (-beta / 2 - 1)
    grad = np.stack([np.broadcast_to(dpi * (X[i] - c[i]), grid.shape) for i in range(n)])
    return ScalarField(grid, np.broadcast_to(pi, grid.shape).copy()), VectorField(grid, grad)


def _pair(v: VectorField, g: VectorField) -> float:
    return float(np.sum(np.sum(v.data * g.data, axis=0) * v.grid.quad_weights()))


def orthogonality_audit(result: DecompositionResult, spec: WeightSpec, q: float | None = None,
                        trials: int = 50, seed: int = 0) -> dict:
    """Normalised pairings ``|(v, grad pi)| / (||v||_{w,q} ||grad pi||_{w',q'})``.

    Each trial draws its potential from ``default_rng(seed + trial)``.  A
    constant potential is included as trial ``-1`` (its pairing is 0).
    """
    q = spec.p if q is None else q
    qd = q / (q - 1)
    v = result.v
    nv = weighted_norm(v, spec, NormTag.weighted(p=q))
    defects = [0.0]
    for k in range(trials):
        _, gp = random_potential(v.grid, np.random.default_rng(seed + k), spec, qd)
        ng = weighted_norm(gp, spec, NormTag.weighted(p=qd, dual=True))
        den = nv * ng
        defects.append(abs(_pair(v, gp)) / den if den > 0 else 0.0)
    result.residuals["orthogonality_max"] = max(defects)
    return {"trials": trials, "seed": seed, "q": q, "defects": defects[1:],
            "constant_potential": defects[0], "max_defect": max(defects)}


# ----------------------------------------------------------------------------
# direct-sum cross-check and stability constants

def neumann_gradient_direct(g: VectorField, points: np.ndarray, jobs: int = 1) -> np.ndarray:
    """``grad psi`` at ``points`` by direct summation against the Neumann kernel.

    ``grad psi(x) = -sum_y grad_x [E(x - y) + E(x - y*)] div g(y) dV``, with the
    divergence taken spectrally.  Points should avoid grid nodes; the error is
    first order in the spacing (the weakly singular cell is not corrected).
    """
    grid = g.grid
    if grid.n != np.asarray(points).shape[-1]:
        raise GridMismatch("point dimension differs from the grid")
    d = _spectral_div(g, jobs)
    w = (d * grid.quad_weights()).ravel()
    Y = grid.points()
    keep = np.abs(w) > 0
    Y, w = Y[keep], w[keep]
    Ys = Y.copy()
    Ys[:, -1] *= -1
    out = []
    for x in np.atleast_2d(points):
        K = grad_laplace_fundamental(x - Y) + grad_laplace_fundamental(x - Ys)
        out.append(-(K * w[:, None]).sum(axis=0))
    return np.array(out)


def stability_constants(fields, spec: WeightSpec | None = None, qs=(2.0, 4.0), jobs: int = 1) -> dict:
    """Empirical constants ``||grad psi||_q / ||g||_q`` (plain) and, with a
    spec, the weighted dual version ``||grad psi||_{w',q'} / ||g||_{w',q'}``."""
    out = {f"plain_q{q:g}": 0.0 for q in qs}
    if spec is not None:
        out["weighted_dual"] = 0.0
    for g in fields:
        _, gp = solve_neumann(g, jobs)
        for q in qs:
            t = NormTag.plain(q)
            r = weighted_norm(gp, None, t) / max(weighted_norm(g, None, t), 1e-300)
            out[f"plain_q{q:g}"] = max(out[f"plain_q{q:g}"], r)
        if spec is not None:
            t = NormTag.weighted(dual=True)
            r = weighted_norm(gp, spec, t) / max(weighted_norm(g, spec, t), 1e-300)
            out["weighted_dual"] = max(out["weighted_dual"], r)
    return out
