"""Initial data generators.

Half-space data are built as curls of vector potentials sampled on the
mirrored box.  The potential's tangential components are odd in ``x_n`` and
the normal one even, so the curl has even tangential and odd normal
components: it is spectrally divergence-free on the doubled box and its
normal trace vanishes.
"""
from __future__ import annotations

import numpy as np
import scipy.fft as sf

from .errors import BadParameters, ValidationError
from .fields import Grid, VectorField

__all__ = [
    "spectral_curl",
    "smooth_cutoff",
    "gaussian_curl_potential",
    "gaussian_curl_datum",
    "gaussian_support",
    "stokeslet_datum",
    "rough_datum",
    "wholespace_gaussian_datum",
    "random_bumps",
    "random_gradient",
    "random_solenoidal",
]


def _need3(grid: Grid):
    if grid.n != 3:
        raise BadParameters("curl-based generators are three-dimensional")


def _kd(grid: Grid):
    """First-derivative symbols (Nyquist zeroed); the last axis is real-transformed."""
    ks = []
    for a in range(grid.n):
        N = grid.shape[a]
        last = a == grid.n - 1
        k = 2 * np.pi * (sf.rfftfreq(N, grid.spacing[a]) if last else sf.fftfreq(N, grid.spacing[a]))
        if N % 2 == 0:
            k[-1 if last else N // 2] = 0.0
        sh = [1] * grid.n
        sh[a] = -1
        ks.append(k.reshape(sh))
    return ks


def spectral_curl(A: np.ndarray, grid: Grid, jobs: int = 1) -> np.ndarray:
    """Curl of a periodic 3-vector potential sampled on ``grid``."""
    _need3(grid)
    k = _kd(grid)
    Ah = [sf.rfftn(c, workers=jobs) for c in A]
    out = np.empty((3,) + tuple(grid.shape))
    for i in range(3):
        j, l = (i + 1) % 3, (i + 2) % 3
        out[i] = sf.irfftn(1j * (k[j] * Ah[l] - k[l] * Ah[j]), s=grid.shape, workers=jobs)
    return out


def _from_potential(half: Grid, potential) -> VectorField:
    """Sample ``potential(X)`` on the mirrored box, take the curl, keep ``x_n >= 0``."""
    if not half.half_space:
        raise ValidationError("need a half-space grid")
    _need3(half)
    mg = half.mirrored()
    A = potential(mg.mesh(sparse=True))
    A = np.stack([np.broadcast_to(c, mg.shape) for c in A])
    v = spectral_curl(A, mg)
    del A
    return VectorField(half, v[..., half.shape[-1]:].copy())


def _gauss(X, c, s):
    return np.exp(-sum((X[a] - c[a]) ** 2 for a in range(3)) / (2 * s * s))


def _reflect(c):
    return (c[0], c[1], -c[2])


def gaussian_curl_potential(center=(0.0, 0.0, 2.0), width=0.5, direction=(1.0, 0.3, 0.0), amp=1.0):
    """Vector potential ``psi * direction``; ``psi`` is the odd (tangential
    parts) or even (normal part) reflection of a Gaussian."""
    d = np.asarray(direction, float)

    def pot(X):
        go = _gauss(X, center, width) - _gauss(X, _reflect(center), width)
        ge = _gauss(X, center, width) + _gauss(X, _reflect(center), width)
        return [amp * d[0] * go, amp * d[1] * go, amp * d[2] * ge]
    return pot


def gaussian_curl_datum(grid: Grid, center=(0.0, 0.0, 2.0), width=0.5, direction=(1.0, 0.3, 0.0),
                        amp=1.0) -> VectorField:
    """Smooth, rapidly decaying solenoidal datum with zero normal trace."""
    return _from_potential(grid, gaussian_curl_potential(center, width, direction, amp))


def gaussian_support(center, width, rel=1e-6) -> np.ndarray:
    """Per-axis radius ``|c_a| + r`` beyond which a Gaussian-curl datum is
    below ``rel`` of its peak (``r`` from ``(r/w) exp(-r^2/2w^2) = rel``,
    rounded up by one width)."""
    r = width * (np.sqrt(2 * np.log(1 / rel)) + 1)
    return np.abs(np.asarray(center, float)) + r


def smooth_cutoff(r, r1: float, r2: float):
    """C-infinity step: 1 for ``r <= r1``, 0 for ``r >= r2``."""
    if r2 <= r1:
        raise BadParameters("need r1 < r2")
    u = np.clip((np.asarray(r, float) - r1) / (r2 - r1), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        f = lambda s: np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        a, b = f(1 - u), f(u)
    return a / (a + b)


def stokeslet_datum(grid: Grid, r0: float, r1: float, r2: float, amp=1.0) -> VectorField:
    """Self-similar datum of degree -1 centred on the plane.

    ``v = curl(chi A) / 2`` with ``A = (0, -x_3/r, x_2/r)``; away from the
    cut-offs ``v = (e_1 / r + x_1 x / r^3) / 2`` (a tangential Stokeslet).
    ``chi = (1 - exp(-(r/r0)^4)) * smooth_cutoff(r, r1, r2)`` removes the
    core and truncates the tail with compact support.
    """
    def pot(X):
        x1, x2, x3 = X
        r = np.sqrt(x1 * x1 + x2 * x2 + x3 * x3)
        rr = np.where(r == 0, 1.0, r)
        chi = (1 - np.exp(-(r / r0) ** 4)) * smooth_cutoff(r, r1, r2)
        return [0 * r, -0.5 * amp * chi * x3 / rr, 0.5 * amp * chi * x2 / rr]
    return _from_potential(grid, pot)


def rough_datum(grid: Grid, center=(0.0, 0.0, 2.0), radius=1.0, direction=(1.0, 0.3, 0.0)) -> VectorField:
    """Datum whose potential is a Lipschitz cone; the velocity has jumps."""
    d = np.asarray(direction, float)

    def cone(X, c):
        return np.maximum(0.0, 1 - np.sqrt(sum((X[a] - c[a]) ** 2 for a in range(3))) / radius)

    def pot(X):
        go = cone(X, center) - cone(X, _reflect(center))
        ge = cone(X, center) + cone(X, _reflect(center))
        return [d[0] * go, d[1] * go, d[2] * ge]
    return _from_potential(grid, pot)


def wholespace_gaussian_datum(grid: Grid, center=(0.0, 0.0, 0.0), width=0.5,
                              direction=(0.0, 0.0, 1.0)) -> VectorField:
    """``curl(gaussian * direction)`` on a whole-space box."""
    _need3(grid)
    X = grid.mesh(sparse=True)
    g = np.broadcast_to(_gauss(X, center, width), grid.shape)
    A = np.stack([g * c for c in direction])
    return VectorField(grid, spectral_curl(A, grid))


# ----------------------------------------------------------------------------
# random ensembles (Helmholtz and interpolation audits)

def _draw(rng, grid: Grid, count):
    L = [-o for o in grid.origin[:-1]]
    Ln = grid.spacing[-1] * grid.shape[-1]
    out = []
    for _ in range(count):
        c = [rng.uniform(-0.4 * L[0], 0.4 * L[0]), rng.uniform(-0.4 * L[1], 0.4 * L[1]),
             rng.uniform(0.3 * Ln, 0.5 * Ln)]
        s = rng.uniform(0.06, 0.1) * Ln
        out.append((c, s, rng.normal(size=3)))
    return out


def random_bumps(grid: Grid, rng: np.random.Generator, count: int = 4) -> VectorField:
    """Sum of vector Gaussians, tangential parts reflected evenly and the
    normal part oddly, so ``u_n = 0`` on the plane.  Not solenoidal."""
    _need3(grid)
    X = grid.mesh(sparse=True)
    u = np.zeros((3,) + grid.shape)
    for c, s, a in _draw(rng, grid, count):
        g, gr = _gauss(X, c, s), _gauss(X, _reflect(c), s)
        u[0] += a[0] * (g + gr)
        u[1] += a[1] * (g + gr)
        u[2] += a[2] * (g - gr)
    return VectorField(grid, u)


def random_gradient(grid: Grid, rng: np.random.Generator, count: int = 4) -> VectorField:
    """``grad chi`` with ``chi`` an evenly reflected Gaussian sum (so ``d_n chi = 0`` on the plane)."""
    _need3(grid)
    X = grid.mesh(sparse=True)
    u = np.zeros((3,) + grid.shape)
    for c, s, a in _draw(rng, grid, count):
        for cc in (c, _reflect(c)):
            g = a[0] * _gauss(X, cc, s)
            for i in range(3):
                u[i] += -(X[i] - cc[i]) / (s * s) * g
    return VectorField(grid, u)


def random_solenoidal(grid: Grid, rng: np.random.Generator, count: int = 4) -> VectorField:
    """Curl of a random parity-matched Gaussian potential."""
    draws = _draw(rng, grid, count)

    def pot(X):
        A = [0.0, 0.0, 0.0]
        for c, s, a in draws:
            go = _gauss(X, c, s) - _gauss(X, _reflect(c), s)
            ge = _gauss(X, c, s) + _gauss(X, _reflect(c), s)
            A = [A[0] + a[0] * go, A[1] + a[1] * go, A[2] + a[2] * ge]
        return A
    return _from_potential(grid, pot)
