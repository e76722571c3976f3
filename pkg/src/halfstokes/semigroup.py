"""Whole-space and half-space Stokes evolution by spectral heat convolution.

Half space: the datum ``v0`` is extended oddly (``v0*``) and by reflection
below the plane (``v0_bar``, zero above).  Both are evolved by the heat
semigroup; the solution is

    v(t) = (H(t) * v0*)|_{x_n>0} + S[H(t) * v0_bar],

    S g(x) = -4 int_{0<z_n<x_n} grad E(x - z) rho(z) dz,   rho = sum_{j<n} d_j g_j.

For each tangential frequency ``xi`` (``kappa = |xi|``) the slab integral is
``I(xi, x_n) = int_0^{x_n} exp(-kappa (x_n - z)) rho_hat(xi, z) dz`` and

    S_j = -2 i xi_j I / kappa  (j < n),     S_n = 2 I.

With the normal axis also periodic on the mirrored box, ``I`` is evaluated
exactly for the trigonometric interpolant: ``I = A(x_n) - exp(-kappa x_n) A(0)``
with ``A_hat = rho_hat / (kappa + i k_n)``.  The output is exactly solenoidal
and vanishes on the plane.  The pressure solves a harmonic problem whose
tangential transform is

    pi_hat(xi, x_n) = (2/kappa) exp(-kappa x_n) (kappa rho(xi, 0) - d_n rho(xi, 0)).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.fft as sf

from . import fields as F
from .errors import BoxTooSmall, DatumNotSolenoidal, NonpositiveTime, NumericalFailure, ValidationError
from .fields import Grid, ScalarField, VectorField

__all__ = [
    "EvolutionRequest",
    "EvolutionResult",
    "WholeSpaceEvaluator",
    "HalfSpaceEvaluator",
    "evolve_wholespace",
    "evolve_halfspace",
    "apply_S",
    "pressure_gradient",
    "support_radius",
    "check_box_rule",
]


@dataclass
class EvolutionRequest:
    """What to evolve and what to return.

    ``derivatives`` lists ``(l, k)``: ``l`` time derivatives (0 or 1) and
    ``k`` spatial derivatives (0, 1 or 2; ``k = 1`` gives the full Jacobian
    ``d_k v_i`` as ``(n, n, ...)``, ``k = 2`` the Hessian ``(n, n, n, ...)``).
    """

    datum: VectorField
    times: Sequence[float]
    derivatives: Sequence = ()
    want_pressure: bool = False
    div_tol: float | None = 1e-3
    check_box: bool = True
    jobs: int = 1
    support: float | None = None

    def __post_init__(self):
        self.times = [float(t) for t in self.times]
        if not self.times or any(t <= 0 for t in self.times):
            raise NonpositiveTime("requested times must be > 0")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValidationError("times must be strictly increasing")
        for lk in self.derivatives:
            if tuple(lk) == (0, 0) or lk[0] not in (0, 1) or lk[1] not in (0, 1, 2):
                raise ValidationError(f"unsupported derivative order {lk}")
        self.derivatives = [tuple(lk) for lk in self.derivatives]


@dataclass
class EvolutionResult:
    times: list
    velocity: list
    pressure_gradient: list | None = None
    pressure: list | None = None
    derivatives: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)


# ----------------------------------------------------------------------------
# helpers

def support_radius(f: VectorField, rel: float = 1e-6) -> np.ndarray:
    """Per-axis extent ``max |x_a|`` of nodes where ``|f| > rel * max|f|``."""
    m = f.magnitude()
    mask = m > rel * m.max(initial=0.0)
    if not np.any(mask):
        return np.zeros(f.grid.n)
    X = f.grid.mesh(sparse=True)
    return np.array([np.abs(np.broadcast_to(X[a], mask.shape)[mask]).max() for a in range(f.grid.n)])


def check_box_rule(f: VectorField, tmax: float, rel: float = 1e-6, support=None):
    """Box must extend ``8 sqrt(tmax)`` beyond the datum's support on every axis.

    ``support`` (scalar or per-axis radius) overrides the thresholded
    measurement; generators with known compact support pass it so that
    grid-scale ringing of a sampled field does not count as support.
    """
    g = f.grid
    s = support_radius(f, rel) if support is None else np.broadcast_to(np.asarray(support, float), (g.n,))
    lo = np.array(g.origin)
    hi = lo + np.array(g.spacing) * np.array(g.shape)
    room = np.minimum(hi - s, np.where(lo < 0, -lo - s, np.inf))
    if g.half_space:
        room[-1] = hi[-1] - s[-1]
    need = 8 * np.sqrt(tmax)
    if np.any(room < need):
        raise BoxTooSmall(f"box margin {room.min():.3g} < 8 sqrt(tmax) = {need:.3g}")
    return float(room.min())


def _wavenumbers(N, h, real=False):
    k = 2 * np.pi * (sf.rfftfreq(N, h) if real else sf.fftfreq(N, h))
    kd = k.copy()
    if N % 2 == 0:
        kd[N // 2 if not real else -1] = 0.0      # drop Nyquist in odd derivatives
    return k, kd


class _Modes:
    """Wavenumber arrays for a grid whose axis ``ra`` is real-transformed."""

    def __init__(self, shape, spacing, ra):
        n = len(shape)
        ks, kds = [], []
        for a in range(n):
            k, kd = _wavenumbers(shape[a], spacing[a], real=(a == ra))
            sh = [1] * n
            sh[a] = -1
            ks.append(k.reshape(sh))
            kds.append(kd.reshape(sh))
        self.k, self.kd = ks, kds
        self.ra = ra
        self.shape = tuple(shape)
        self.axes = tuple(a for a in range(n) if a != ra) + (ra,)


# ----------------------------------------------------------------------------
# whole space

class WholeSpaceEvaluator:
    """Heat-semigroup evolution of a periodic-box datum."""

    def __init__(self, datum: VectorField, jobs: int = 1):
        g = datum.grid
        if g.half_space:
            raise ValidationError("whole-space evaluator needs a whole-space grid")
        self.grid, self.n, self.workers = g, g.n, jobs
        self.m = _Modes(g.shape, g.spacing, g.n - 1)
        self.k2 = sum(k * k for k in self.m.k)
        self.U = np.stack([sf.rfftn(c, axes=self.m.axes, workers=jobs) for c in datum.data])
        self.time0 = datum.time

    def _inv(self, X):
        return sf.irfftn(X, s=[self.m.shape[a] for a in self.m.axes], axes=self.m.axes,
                         workers=self.workers)

    def velocity(self, t: float, l: int = 0) -> np.ndarray:
        G = np.exp(-self.k2 * t) * (-self.k2) ** l
        return np.stack([self._inv(u * G) for u in self.U])

    def gradient(self, t: float, l: int = 0) -> np.ndarray:
        G = np.exp(-self.k2 * t) * (-self.k2) ** l
        return np.stack([np.stack([self._inv(1j * kd * u * G) for kd in self.m.kd]) for u in self.U])

    def hessian(self, t: float, l: int = 0) -> np.ndarray:
        G = np.exp(-self.k2 * t) * (-self.k2) ** l
        kd, k = self.m.kd, self.m.k
        return np.stack([np.stack([np.stack([self._inv(-(k[a] ** 2 if a == b else kd[a] * kd[b]) * u * G)
                                             for b in range(self.n)]) for a in range(self.n)])
                         for u in self.U])

    def divergence_residual(self) -> float:
        d = sum(1j * self.m.kd[a] * self.U[a] for a in range(self.n))
        gnorm = np.sqrt(sum(np.sum(np.abs(kd * u) ** 2) for u in self.U for kd in self.m.kd))
        return float(np.sqrt(np.sum(np.abs(d) ** 2)) / max(gnorm, 1e-300))


def _with_k2(result: EvolutionResult, ev, req: EvolutionRequest, grid: Grid):
    for (l, k) in req.derivatives:
        out = []
        for t in req.times:
            out.append({0: ev.velocity, 1: ev.gradient, 2: ev.hessian}[k](t, l=l))
        result.derivatives[(l, k)] = out


def evolve_wholespace(req: EvolutionRequest) -> EvolutionResult:
    """``u(t) = H(t) * u0`` on the periodic box; the pressure is constant."""
    d = req.datum
    if req.check_box:
        check_box_rule(d, req.times[-1], support=req.support)
    ev = WholeSpaceEvaluator(d, req.jobs)
    res0 = ev.divergence_residual()
    if req.div_tol is not None and res0 > req.div_tol:
        raise DatumNotSolenoidal(f"relative divergence {res0:.3e} > {req.div_tol:.1e}")
    vel = [VectorField(d.grid, ev.velocity(t), t) for t in req.times]
    out = EvolutionResult(list(req.times), vel)
    _with_k2(out, ev, req, d.grid)
    if req.want_pressure:
        out.pressure_gradient = [VectorField(d.grid, np.zeros_like(v.data), v.time) for v in vel]
    out.metadata = {"grid": d.grid.to_dict(), "datum_divergence": res0, "kind": "whole-space"}
    return out


# ----------------------------------------------------------------------------
# half space

class HalfSpaceEvaluator:
    """Spectral evaluator of the half-space Stokes semigroup for one datum.

    Parameters
    ----------
    datum : VectorField
        Solenoidal half-space field with zero normal trace.
    jobs : int
        Worker threads for the FFTs.

    Notes
    -----
    All quantities are evaluated at the half-grid nodes, optionally shifted
    by ``offset`` (in units of the spacing per axis) for staggered output.
    """

    def __init__(self, datum: VectorField, jobs: int = 1):
        g = datum.grid
        if not g.half_space:
            raise ValidationError("half-space evaluator needs a half-space grid")
        self.grid, self.n, self.workers = g, g.n, jobs
        n = g.n
        self.Nn = g.shape[-1]
        mg = g.mirrored()
        self.m = _Modes(mg.shape, mg.spacing, n - 2)
        k = self.m.k
        self.k2 = sum(kk * kk for kk in k)
        self.kap = np.sqrt(sum(k[a] ** 2 for a in range(n - 1)))     # (.., 1)
        with np.errstate(divide="ignore"):
            self.ikap = np.where(self.kap > 0, 1.0 / self.kap, 0.0)
        odd = [F.mirror_normal(c, -1.0, 0.0) for c in datum.data]
        bar = F.mirror_normal(datum.data[:n - 1], 1.0, 0.5)
        bar[..., self.Nn + 1:] = 0.0
        ax = self.m.axes
        self.So = np.stack([sf.rfftn(c, axes=ax, workers=jobs) for c in odd])
        self.rho = sum(1j * self.m.kd[a] * sf.rfftn(bar[a], axes=ax, workers=jobs)
                       for a in range(n - 1))
        self.datum = datum
        self.meta = {"zero_mode": "tangential mode xi = 0 of the correction set to 0"}

    # transforms -------------------------------------------------------
    def _inv_full(self, X):
        s = [self.m.shape[a] for a in self.m.axes]
        return sf.irfftn(X, s=s, axes=self.m.axes, workers=self.workers)[..., self.Nn:]

    def _inv_tan(self, X):
        n = self.n
        s = [self.m.shape[a] for a in range(n - 1)]
        return sf.irfftn(X, s=s, axes=tuple(range(n - 1)), workers=self.workers)

    def _phase(self, offset, tangential_only=False):
        if offset is None:
            return 1.0
        n = self.n
        h = self.grid.spacing
        rng = range(n - 1) if tangential_only else range(n)
        return np.exp(1j * sum(self.m.k[a] * offset[a] * h[a] for a in rng))

    def _time_factor(self, t, l):
        if t < 0:
            raise NonpositiveTime("t must be >= 0")
        return np.exp(-self.k2 * t) * (-self.k2) ** l

    def _xn(self, offset):
        hn = self.grid.spacing[-1]
        dn = 0.0 if offset is None else offset[-1]
        return (np.arange(self.Nn) + dn) * hn

    def _slab(self, rho_t, offset, order):
        """``I`` and its normal derivatives up to ``order`` on the half layers."""
        n = self.n
        kn = self.m.k[n - 1]
        ph_n = 1.0 if offset is None else np.exp(1j * kn * offset[-1] * self.grid.spacing[-1])
        with np.errstate(divide="ignore", invalid="ignore"):
            Ah = np.where(self.kap > 0, rho_t / (self.kap + 1j * kn), 0.0)
        A0 = sf.ifft(Ah, axis=n - 1, workers=self.workers)[..., self.Nn:self.Nn + 1]
        A = sf.ifft(Ah * ph_n, axis=n - 1, workers=self.workers)[..., self.Nn:]
        E = np.exp(-self.kap * self._xn(offset))
        I = [A - E * A0]
        if order >= 1:
            r = sf.ifft(rho_t * ph_n, axis=n - 1, workers=self.workers)[..., self.Nn:]
            I.append(r - self.kap * I[0])
        if order >= 2:
            dr = sf.ifft(1j * kn * rho_t * ph_n, axis=n - 1, workers=self.workers)[..., self.Nn:]
            I.append(dr - self.kap * I[1])
        return I

    def _mult(self, i):
        n = self.n
        return -2j * self.m.kd[i] * self.ikap if i < n - 1 else 2.0

    # public evaluations ---------------------------------------------------
    def parts(self, t: float, offset=None, l: int = 0):
        """Return ``(heat_part, correction)`` of the velocity, each ``(n, ...)``."""
        G = self._time_factor(t, l)
        ph = self._phase(offset)
        star = np.stack([self._inv_full(s * G * ph) for s in self.So])
        I = self._slab(self.rho * G, offset, 0)[0]
        tph = self._phase(offset, tangential_only=True)
        corr = np.stack([self._inv_tan(self._mult(i) * I * tph) for i in range(self.n)])
        return star, corr

    def velocity(self, t: float, offset=None, l: int = 0) -> np.ndarray:
        star, corr = self.parts(t, offset, l)
        return star + corr

    def _deriv(self, t, alphas, offset=None, l=0):
        """Mixed derivative along the axes in ``alphas`` (length 1 or 2), all components."""
        n = self.n
        k, kd = self.m.k, self.m.kd
        if len(alphas) == 2 and alphas[0] == alphas[1]:
            a = alphas[0]
            full = -k[a] ** 2
            mt, nn = (full, 0) if a < n - 1 else (1.0, 2)
        else:
            full, mt, nn = 1.0, 1.0, 0
            for a in alphas:
                full = full * 1j * kd[a]
                if a < n - 1:
                    mt = mt * 1j * kd[a]
                else:
                    nn += 1
        G = self._time_factor(t, l)
        ph = self._phase(offset)
        tph = self._phase(offset, tangential_only=True)
        I = self._slab(self.rho * G, offset, nn)[nn]
        out = []
        for i in range(n):
            s = self._inv_full(self.So[i] * G * ph * full)
            c = self._inv_tan(self._mult(i) * mt * I * tph)
            out.append(s + c)
        return np.stack(out)

    def gradient(self, t: float, offset=None, l: int = 0) -> np.ndarray:
        """Jacobian ``J[i, k] = d_k v_i``."""
        return np.stack([self._deriv(t, (k,), offset, l) for k in range(self.n)], axis=1)

    def hessian(self, t: float, offset=None, l: int = 0) -> np.ndarray:
        n = self.n
        H = np.empty((n, n, n) + self.grid.shape)
        for a in range(n):
            for b in range(a, n):
                H[:, a, b] = self._deriv(t, (a, b), offset, l)
                H[:, b, a] = H[:, a, b]
        return H

    def laplacian(self, t: float, offset=None, l: int = 0) -> np.ndarray:
        return sum(self._deriv(t, (a, a), offset, l) for a in range(self.n))

    def _pressure_hat(self, t, offset, l):
        n = self.n
        G = self._time_factor(t, l)
        r = self.rho * G
        kn = self.m.k[n - 1]
        r0 = sf.ifft(r, axis=n - 1, workers=self.workers)[..., self.Nn:self.Nn + 1]
        dr0 = sf.ifft(1j * kn * r, axis=n - 1, workers=self.workers)[..., self.Nn:self.Nn + 1]
        E = np.exp(-self.kap * self._xn(offset))
        return 2 * self.ikap * E * (self.kap * r0 - dr0)

    def pressure(self, t: float, offset=None, l: int = 0) -> np.ndarray:
        ph = self._pressure_hat(t, offset, l)
        return self._inv_tan(ph * self._phase(offset, tangential_only=True))

    def pressure_gradient(self, t: float, offset=None, l: int = 0) -> np.ndarray:
        n = self.n
        ph = self._pressure_hat(t, offset, l) * self._phase(offset, tangential_only=True)
        comps = [self._inv_tan(1j * self.m.kd[a] * ph) for a in range(n - 1)]
        comps.append(self._inv_tan(-self.kap * ph))
        return np.stack(comps)

    # diagnostics ----------------------------------------------------------
    def divergence(self, t: float) -> np.ndarray:
        J = self.gradient(t)
        return np.einsum("ii...->...", J)

    def datum_divergence_residual(self) -> float:
        """Relative divergence of the datum.

        Tangential derivatives are spectral; the normal derivative of the
        normal component uses its odd extension.  The reference scale is the
        same set of derivatives of all components.
        """
        n = self.n
        w = self.grid.quad_weights()
        d = 0.0
        norm2 = 0.0
        for a in range(n):
            da = self._inv_full(1j * self.m.kd[a] * self.So[a])
            d = d + da
            comps = range(n) if a < n - 1 else [n - 1]
            for c in comps:
                dc = da if c == a else self._inv_full(1j * self.m.kd[a] * self.So[c])
                norm2 += float(np.sum(dc ** 2 * w))
        dn = np.sqrt(np.sum(d ** 2 * w))
        return float(dn / max(np.sqrt(norm2), 1e-300))


def apply_S(g: VectorField, half_grid: Grid, offset=None, jobs: int = 1) -> VectorField:
    """Apply the slab operator ``S`` to a whole-space field on the mirrored grid."""
    if g.grid != half_grid.mirrored():
        raise ValidationError("g must live on half_grid.mirrored()")
    ev = HalfSpaceEvaluator.__new__(HalfSpaceEvaluator)
    n = half_grid.n
    ev.grid, ev.n, ev.workers, ev.Nn = half_grid, n, jobs, half_grid.shape[-1]
    ev.m = _Modes(g.grid.shape, g.grid.spacing, n - 2)
    ev.k2 = sum(kk * kk for kk in ev.m.k)
    ev.kap = np.sqrt(sum(ev.m.k[a] ** 2 for a in range(n - 1)))
    with np.errstate(divide="ignore"):
        ev.ikap = np.where(ev.kap > 0, 1.0 / ev.kap, 0.0)
    rho = sum(1j * ev.m.kd[a] * sf.rfftn(g.data[a], axes=ev.m.axes, workers=jobs)
              for a in range(n - 1))
    I = ev._slab(rho, offset, 0)[0]
    tph = ev._phase(offset, tangential_only=True)
    corr = np.stack([ev._inv_tan(ev._mult(i) * I * tph) for i in range(n)])
    return VectorField(half_grid, corr, g.time)


def _residuals(ev: HalfSpaceEvaluator, v: np.ndarray, t: float) -> dict:
    vf = VectorField(ev.grid, v, t)
    vmax = float(np.abs(v).max(initial=0.0))
    tr = F.trace_boundary(vf, "extrapolate")
    edge = max(float(np.abs(v[..., -1]).max()),
               *[float(np.abs(np.take(v, [0], axis=a + 1)).max()) for a in range(ev.n - 1)])
    return {"time": t,
            "trace_node": float(np.abs(v[..., 0]).max()) / max(vmax, 1e-300),
            "trace_extrapolated": float(np.abs(tr).max()) / max(vmax, 1e-300),
            "truncation_edge": edge / max(vmax, 1e-300),
            "max": vmax}


def evolve_halfspace(req: EvolutionRequest) -> EvolutionResult:
    """Half-space Stokes evolution of ``req.datum`` at ``req.times``."""
    d = req.datum
    if not d.grid.half_space:
        raise ValidationError("datum must live on a half-space grid")
    if req.check_box:
        check_box_rule(d, req.times[-1], support=req.support)
    ev = HalfSpaceEvaluator(d, req.jobs)
    res0 = ev.datum_divergence_residual()
    if req.div_tol is not None and res0 > req.div_tol:
        raise DatumNotSolenoidal(f"relative divergence {res0:.3e} > {req.div_tol:.1e}")
    vel, gp, pr, rows = [], [], [], []
    derivs = {lk: [] for lk in req.derivatives}
    for t in req.times:
        v = ev.velocity(t)
        if not np.all(np.isfinite(v)):
            raise NumericalFailure(f"non-finite velocity at t = {t}")
        vel.append(VectorField(d.grid, v, t))
        rows.append(_residuals(ev, v, t))
        if req.want_pressure:
            gp.append(VectorField(d.grid, ev.pressure_gradient(t), t))
            pr.append(ScalarField(d.grid, ev.pressure(t), t))
        for (l, k) in req.derivatives:
            derivs[(l, k)].append({0: ev.velocity, 1: ev.gradient, 2: ev.hessian}[k](t, l=l))
        if (0, 1) in derivs:
            J = derivs[(0, 1)][-1]
            dv = np.einsum("ii...->...", J)
            rows[-1]["divergence"] = float(np.abs(dv).max() / max(np.abs(J).max(), 1e-300))
    out = EvolutionResult(list(req.times), vel, gp or None, pr or None, derivs)
    out.metadata = {"grid": d.grid.to_dict(), "datum_divergence": res0, "kind": "half-space",
                    "residuals": rows, **ev.meta}
    return out


def pressure_gradient(ev: HalfSpaceEvaluator, t: float, method: str = "closed",
                      delta: float | None = None) -> VectorField:
    """Pressure gradient at time ``t``.

    ``closed``: harmonic closed form.  ``residual``: ``Laplacian v - v_t`` with
    a spectral Laplacian and a Richardson-extrapolated centred time difference.
    """
    if method == "closed":
        return VectorField(ev.grid, ev.pressure_gradient(t), t)
    if method == "residual":
        vt = F.time_derivative(lambda s: ev.velocity(s), t, delta)
        return VectorField(ev.grid, ev.laplacian(t) - vt, t)
    raise ValidationError(f"unknown method {method!r}")
