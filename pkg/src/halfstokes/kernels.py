"""Fundamental solutions and half-space Green kernels.

Conventions: ``E(x) = |x|**(2-n) / (n (n-2) V(n))`` is the positive Newton
kernel (so ``-Delta E = delta``).  The half-space Stokes Green tensor is

    G_ij(t,x,y) = delta_ij [H(t,x-y) - H(t,x-y*)] + C_ij(t,x,y),

where the correction ``C`` comes from the operator ``S`` applied to the
reflected datum.  Its tangential Fourier symbol reduces to a one-dimensional
integral over the radial frequency, evaluated here with ``scipy.integrate.quad``
(a Hankel-type transform); no tangential truncation radius is needed.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from math import gamma, pi
from pathlib import Path

import numpy as np
from scipy import integrate, special

from .errors import NonpositiveTime, QuadratureFailure, SingularPoint, ValidationError

__all__ = [
    "QuadSpec",
    "unit_ball_volume",
    "heat_kernel",
    "laplace_fundamental",
    "grad_laplace_fundamental",
    "hess_laplace_fundamental",
    "neumann_green",
    "slab_profile",
    "green_tensor",
    "pressure_kernel",
]


@dataclass(frozen=True)
class QuadSpec:
    """Quadrature controls for the Green-tensor correction integrals.

    ``tangential_radius_factor`` sets the frequency cut-off
    ``kappa_max = factor / sqrt(t)``; the integrands carry ``exp(-kappa**2 t)``
    so this is the Fourier counterpart of truncating at ``factor * sqrt(t)``.
    """

    rel_tol: float = 1e-6
    abs_tol: float = 1e-10
    max_depth: int = 20
    tangential_radius_factor: float = 8.0

    @classmethod
    def from_dict(cls, d: dict) -> "QuadSpec":
        try:
            return cls(**{k: d[k] for k in ("rel_tol", "abs_tol", "max_depth",
                                            "tangential_radius_factor") if k in d})
        except TypeError as exc:
            raise ValidationError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "QuadSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return asdict(self)


def unit_ball_volume(n: int) -> float:
    return pi ** (n / 2) / gamma(n / 2 + 1)


def heat_kernel(t, x, n: int | None = None):
    """``(4 pi t)**(-n/2) exp(-|x|**2 / 4t)``; ``t = 0`` gives 0 away from the origin."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1] if n is None else n
    r2 = np.sum(x * x, axis=-1)
    if np.any(np.asarray(t) < 0):
        raise NonpositiveTime("heat kernel needs t >= 0")
    if np.all(np.asarray(t) == 0):
        if np.any(r2 == 0):
            raise SingularPoint("heat kernel at t = 0, x = 0 is a Dirac mass")
        return np.zeros_like(r2)
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise NonpositiveTime("mixed zero and positive times")
    return (4 * pi * t) ** (-n / 2) * np.exp(-r2 / (4 * t))


def _rcheck(x):
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0):
        raise SingularPoint("kernel evaluated at its pole")
    return x, r


def laplace_fundamental(x, n: int | None = None):
    x, r = _rcheck(x)
    n = x.shape[-1] if n is None else n
    if n < 3:
        raise ValidationError("n >= 3 required")
    return r ** (2 - n) / (n * (n - 2) * unit_ball_volume(n))


def grad_laplace_fundamental(x):
    x, r = _rcheck(x)
    n = x.shape[-1]
    return -x * (r ** -n)[..., None] / (n * unit_ball_volume(n))


def hess_laplace_fundamental(x):
    x, r = _rcheck(x)
    n = x.shape[-1]
    eye = np.eye(n)
    rr = r[..., None, None]
    H = -(eye * rr ** 2 - n * x[..., :, None] * x[..., None, :]) / rr ** (n + 2)
    return H / (n * unit_ball_volume(n))


def neumann_green(x, y):
    """``E(x - y) + E(x - y*)`` with ``y* = (y', -y_n)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ys = y.copy()
    ys[..., -1] *= -1
    return laplace_fundamental(x - y) + laplace_fundamental(x - ys)


# ----------------------------------------------------------------------------
# Green tensor correction

def _phi(nu: float, z):
    """``z**-nu J_nu(z)`` with its limit at ``z = 0``."""
    z = np.asarray(z, dtype=float)
    small = z < 1e-6
    zs = np.where(small, 1.0, z)
    lim = 1.0 / (2 ** nu * gamma(nu + 1))
    return np.where(small, lim * (1 - z * z / (4 * (nu + 1))), special.jv(nu, zs) / zs ** nu)


def slab_profile(kappa, t: float, xn: float, yn: float):
    """``exp(-kappa^2 t) int_0^xn exp(-kappa (xn - z)) g_t(z + yn) dz``.

    ``g_t`` is the one-dimensional heat kernel.  Closed form through erf,
    written with ``erfcx`` in the two regimes that would otherwise overflow.
    """
    k = np.asarray(kappa, dtype=float)
    st = np.sqrt(t)
    S = xn + yn
    a = (yn - 2 * k * t) / (2 * st)
    b = (S - 2 * k * t) / (2 * st)
    out = np.empty(np.broadcast(k, a).shape)
    m1 = b <= 0
    m2 = (a >= 0) & ~m1
    m3 = ~(m1 | m2)
    e2 = -k * k * t
    out[m1] = 0.5 * (special.erfcx(-b[m1]) * np.exp(-S * S / (4 * t) + e2[m1])
                     - special.erfcx(-a[m1]) * np.exp(-k[m1] * xn - yn * yn / (4 * t) + e2[m1]))
    out[m2] = 0.5 * (special.erfcx(a[m2]) * np.exp(-a[m2] ** 2 - k[m2] * S)
                     - special.erfcx(b[m2]) * np.exp(-b[m2] ** 2 - k[m2] * S))
    out[m3] = 0.5 * np.exp(-k[m3] * S) * (special.erf(b[m3]) - special.erf(a[m3]))
    return out


def _hankel(fn, kmax, quad: QuadSpec):
    val, err = integrate.quad(fn, 0.0, kmax, epsabs=quad.abs_tol, epsrel=quad.rel_tol,
                              limit=max(50, 2 ** min(quad.max_depth, 12)))
    if not np.isfinite(val) or err > max(quad.abs_tol, quad.rel_tol * abs(val)) * 100:
        raise QuadratureFailure(f"correction integral did not converge (err {err:.2e})")
    return val


def _check_pts(t, x, y):
    if t <= 0:
        raise NonpositiveTime("kernel needs t > 0")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError("x and y must be points of equal dimension")
    if x[-1] < 0 or y[-1] < 0:
        raise ValidationError("points must lie in the closed half-space")
    return x, y


def _correction(i, j, t, x, y, quad):
    n = x.size
    d = n - 1
    nu = d / 2 - 1
    if x[-1] == 0.0 or j == n - 1:
        return 0.0
    a = x[:-1] - y[:-1]
    r = np.linalg.norm(a)
    c0 = (2 * pi) ** (-d / 2)
    kmax = quad.tangential_radius_factor / np.sqrt(t)
    K = lambda k: slab_profile(k, t, x[-1], y[-1])
    if i < n - 1:
        def f(k):
            base = -2 * K(k) * k ** (d - 2)
            return base * (-k * k * (i == j) * _phi(nu + 1, k * r)
                           + k ** 4 * a[i] * a[j] * _phi(nu + 2, k * r))
    else:
        def f(k):
            return 2 * K(k) * k ** (d - 1) * (-k * k * a[j] * _phi(nu + 1, k * r))
    return c0 * _hankel(lambda k: float(f(np.array([k]))[0]), kmax, quad)


def green_tensor(i: int, j: int, t: float, x, y, quad: QuadSpec | None = None) -> float:
    """Half-space Stokes Green tensor ``G_ij(t, x, y)`` (0-based indices).

    ``v_i(t, x) = int G_ij(t, x, y) v0_j(y) dy`` for a solenoidal datum with
    zero normal trace.  The correction vanishes for ``j = n-1`` and at
    ``x_n = 0``.
    """
    quad = quad or QuadSpec()
    x, y = _check_pts(t, x, y)
    if np.array_equal(x, y):
        raise SingularPoint("x == y")
    ys = y.copy()
    ys[-1] *= -1
    heat = (heat_kernel(t, x - y) - heat_kernel(t, x - ys)) if i == j else 0.0
    return float(heat + _correction(i, j, t, x, y, quad))


def pressure_kernel(j: int, t: float, x, y, quad: QuadSpec | None = None) -> float:
    """Pressure ``P_j(t, x, y)`` generated at ``x`` by a unit datum ``e_j`` at ``y``.

    Harmonic in ``x``; zero for the normal index ``j = n-1``.
    """
    quad = quad or QuadSpec()
    x, y = _check_pts(t, x, y)
    n = x.size
    if j == n - 1:
        return 0.0
    d = n - 1
    nu = d / 2 - 1
    a = x[:-1] - y[:-1]
    r = np.linalg.norm(a)
    yn = y[-1]
    g = np.exp(-yn * yn / (4 * t)) / np.sqrt(4 * pi * t)
    kmax = quad.tangential_radius_factor / np.sqrt(t)

    def f(k):
        amp = 2 * np.exp(-k * x[-1] - k * k * t) * g * (k + yn / (2 * t))
        return amp * k ** (d - 2) * (-k * k * a[j] * _phi(nu + 1, k * r))
    c0 = (2 * pi) ** (-d / 2)
    return float(c0 * _hankel(lambda k: float(f(np.array([k]))[0]), kmax, quad))
