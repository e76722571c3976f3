"""Finite-difference projection solver on a staggered (MAC) half-space box.

Independent of the spectral evaluator: second-order differences, no-slip
walls at ``x_n = 0`` and at the far face, periodic tangential axes.  Each
step diffuses with the lagged pressure gradient (explicit Euler or
Crank-Nicolson), then projects with a pressure increment obtained from a
fast Poisson solve (FFT tangentially, DCT-II in ``x_n``).

Layout (``M`` cells per tangential axis on ``[-L, L)``, ``K`` normal cells of
the same size): tangential component ``a`` lives on ``a``-faces
(``x_a = -L + i h``, other coordinates at cell centres); the normal component
lives on ``x_n``-faces ``x_n = k h``, ``k = 0..K``, including both walls.
Tangential no-slip uses a quadratic ghost value.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sf

from .errors import BadParameters, NumericalFailure, StabilityViolation, ValidationError

__all__ = ["StepperConfig", "MACSolver", "StaggeredField", "step", "run", "OracleRun",
           "heat_mode", "heat_mode_error"]


@dataclass(frozen=True)
class StepperConfig:
    """Time step and scheme (``explicit`` or ``implicit`` Crank-Nicolson)."""

    dt: float
    scheme: str = "explicit"
    boundary: str = "no-slip at x_n = 0, periodic tangential, no-slip at far face"

    def __post_init__(self):
        if self.scheme not in ("explicit", "implicit"):
            raise BadParameters(f"unknown scheme {self.scheme!r}")
        if not self.dt > 0:
            raise BadParameters("dt must be positive")


class MACSolver:
    """Discrete operators for one staggered box."""

    def __init__(self, L: float, M: int, K: int, n: int = 3):
        if M < 4 or K < 4:
            raise ValidationError("need at least 4 cells per axis")
        self.L, self.M, self.K, self.n = float(L), int(M), int(K), int(n)
        self.h = 2.0 * L / M
        h = self.h
        lam_t = [-(2 / h * np.sin(np.pi * np.arange(M) / M)) ** 2 for _ in range(n - 1)]
        lam_z = -(2 / h * np.sin(np.pi * np.arange(K) / (2 * K))) ** 2
        eig = sum(np.meshgrid(*lam_t, lam_z, indexing="ij", sparse=True))
        eig[(0,) * n] = 1.0
        self.poisson_eig = eig
        self.lam_t = sum(np.meshgrid(*lam_t, indexing="ij", sparse=True)) if n > 1 else 0.0

    # geometry ---------------------------------------------------------------
    @property
    def tan_axes(self):
        return tuple(range(self.n - 1))

    def stable_dt(self) -> float:
        return self.h ** 2 / (2 * self.n)

    def face_coords(self, comp: int):
        """Coordinate vectors of the nodes holding component ``comp``."""
        h, L, n = self.h, self.L, self.n
        xf = -L + h * np.arange(self.M)
        xc = xf + h / 2
        out = [xf if a == comp else xc for a in range(n - 1)]
        out.append(h * np.arange(self.K + 1) if comp == n - 1 else h * (np.arange(self.K) + 0.5))
        return out

    def offsets(self):
        """Offsets of each component in node-spacing units (for node-centred evaluators)."""
        n = self.n
        return [tuple(0.0 if a == c else 0.5 for a in range(n)) for c in range(n)]

    # operators --------------------------------------------------------------
    def lap_t(self, u):
        """Laplacian of a tangential component (cell-centred in x_n, Dirichlet walls)."""
        h = self.h
        out = sum(np.roll(u, 1, a) + np.roll(u, -1, a) - 2 * u for a in self.tan_axes)
        up = np.empty_like(u)
        dn = np.empty_like(u)
        up[..., :-1] = u[..., 1:]
        dn[..., 1:] = u[..., :-1]
        dn[..., 0] = -2 * u[..., 0] + u[..., 1] / 3
        up[..., -1] = -2 * u[..., -1] + u[..., -2] / 3
        return (out + up + dn - 2 * u) / h ** 2

    def lap_n(self, w):
        """Laplacian of the normal component at interior faces (walls left 0)."""
        h = self.h
        out = np.zeros_like(w)
        wi = w[..., 1:-1]
        o = sum(np.roll(wi, 1, a) + np.roll(wi, -1, a) - 2 * wi for a in self.tan_axes)
        o = o + w[..., 2:] + w[..., :-2] - 2 * wi
        out[..., 1:-1] = o / h ** 2
        return out

    def div(self, U):
        h, n = self.h, self.n
        d = sum(np.roll(U[a], -1, a) - U[a] for a in self.tan_axes)
        return (d + U[n - 1][..., 1:] - U[n - 1][..., :-1]) / h

    def grad(self, p):
        h, n = self.h, self.n
        G = [(p - np.roll(p, 1, a)) / h for a in self.tan_axes]
        gn = np.zeros(p.shape[:-1] + (p.shape[-1] + 1,))
        gn[..., 1:-1] = (p[..., 1:] - p[..., :-1]) / h
        G.append(gn)
        return G

    def poisson(self, f):
        """Zero-mean solution of the discrete Neumann problem ``div grad p = f``."""
        n = self.n
        F = sf.dctn(sf.fftn(f, axes=self.tan_axes), type=2, axes=(n - 1,))
        F = F / self.poisson_eig
        F[(0,) * n] = 0.0
        return sf.ifftn(sf.idctn(F, type=2, axes=(n - 1,)), axes=self.tan_axes).real

    def project(self, U):
        phi = self.poisson(self.div(U))
        G = self.grad(phi)
        return [U[a] - G[a] for a in range(self.n)], phi

    # implicit diffusion -------------------------------------------------------
    def _helmholtz_solve(self, rhs, theta_dt, normal: bool):
        """Solve ``(I - theta_dt * Lap) x = rhs`` by FFT tangentially and a
        vectorised tridiagonal sweep in ``x_n``."""
        h2 = self.h ** 2
        R = sf.fftn(rhs[..., 1:-1] if normal else rhs, axes=self.tan_axes)
        m = R.shape[-1]
        lo = np.full(m, 1.0 / h2)
        up = np.full(m, 1.0 / h2)
        di = np.full(m, -2.0 / h2)
        if not normal:
            di[0] = di[-1] = -4.0 / h2
            up[0] = lo[-1] = (4.0 / 3.0) / h2
        lam = self.lam_t[..., None]
        a = -theta_dt * lo
        c = -theta_dt * up
        b = 1 - theta_dt * (di + lam)
        # Thomas algorithm along the last axis
        cp = np.empty(b.shape, dtype=complex)
        dp = np.empty(R.shape, dtype=complex)
        cp[..., 0] = c[0] / b[..., 0]
        dp[..., 0] = R[..., 0] / b[..., 0]
        for k in range(1, m):
            den = b[..., k] - a[k] * cp[..., k - 1]
            cp[..., k] = c[k] / den
            dp[..., k] = (R[..., k] - a[k] * dp[..., k - 1]) / den
        x = np.empty_like(dp)
        x[..., -1] = dp[..., -1]
        for k in range(m - 2, -1, -1):
            x[..., k] = dp[..., k] - cp[..., k] * x[..., k + 1]
        x = sf.ifftn(x, axes=self.tan_axes).real
        if normal:
            out = np.zeros(rhs.shape)
            out[..., 1:-1] = x
            return out
        return x


@dataclass
class StaggeredField:
    """Velocity on a MAC box; ``comps[a]`` holds component ``a``."""

    solver: MACSolver
    comps: list
    time: float = 0.0
    pressure: np.ndarray | None = None

    @classmethod
    def zeros(cls, solver: MACSolver):
        n, M, K = solver.n, solver.M, solver.K
        comps = [np.zeros((M,) * (n - 1) + (K,)) for _ in range(n - 1)]
        comps.append(np.zeros((M,) * (n - 1) + (K + 1,)))
        return cls(solver, comps)

    @classmethod
    def sample(cls, solver: MACSolver, func, time: float = 0.0):
        """Sample ``func(X) -> [v_1, ..., v_n]`` at the face locations."""
        comps = []
        for c in range(solver.n):
            X = np.meshgrid(*solver.face_coords(c), indexing="ij", sparse=True)
            comps.append(np.array(np.broadcast_to(func(X)[c], tuple(len(x) for x in solver.face_coords(c)))))
        return cls(solver, comps, time)

    @classmethod
    def from_potential(cls, solver: MACSolver, potential, time: float = 0.0):
        """Discrete curl of a 3-vector potential sampled on cell edges.

        The result has zero discrete divergence (up to the periodic wrap of
        the sampled potential) and, for potentials whose tangential parts
        vanish on the plane, zero normal velocity on the walls.
        """
        if solver.n != 3:
            raise BadParameters("potential construction is three-dimensional")
        h, L, M, K = solver.h, solver.L, solver.M, solver.K
        xf = -L + h * np.arange(M + 1)
        xc = xf[:-1] + h / 2
        zf = h * np.arange(K + 1)
        zc = zf[:-1] + h / 2

        def A(c, xs, ys, zs):
            X = np.meshgrid(xs, ys, zs, indexing="ij", sparse=True)
            return np.broadcast_to(potential(X)[c], (len(xs), len(ys), len(zs)))

        xF, yF = xf[:-1], xf[:-1]
        Az = A(2, xF, xf, zc)
        Ay = A(1, xF, xc, zf)
        vx = (Az[:, 1:, :] - Az[:, :-1, :]) / h - (Ay[:, :, 1:] - Ay[:, :, :-1]) / h
        Ax = A(0, xc, yF, zf)
        Az2 = A(2, xf, yF, zc)
        vy = (Ax[:, :, 1:] - Ax[:, :, :-1]) / h - (Az2[1:, :, :] - Az2[:-1, :, :]) / h
        Ay2 = A(1, xf, xc, zf)
        Ax2 = A(0, xc, xf, zf)
        vz = (Ay2[1:, :, :] - Ay2[:-1, :, :]) / h - (Ax2[:, 1:, :] - Ax2[:, :-1, :]) / h
        return cls(solver, [np.array(vx), np.array(vy), np.array(vz)], time)

    def copy(self):
        return StaggeredField(self.solver, [c.copy() for c in self.comps], self.time,
                              None if self.pressure is None else self.pressure.copy())

    def l2(self) -> float:
        h3 = self.solver.h ** self.solver.n
        s = sum(float(np.sum(c ** 2)) for c in self.comps[:-1])
        w = self.comps[-1]
        s += float(np.sum(w[..., 1:-1] ** 2)) + 0.5 * float(np.sum(w[..., [0, -1]] ** 2))
        return float(np.sqrt(s * h3))

    def divergence(self) -> np.ndarray:
        return self.solver.div(self.comps)


def step(v: StaggeredField, cfg: StepperConfig) -> StaggeredField:
    """One incremental projection step of length ``cfg.dt``."""
    S = v.solver
    n, dt = S.n, cfg.dt
    if cfg.scheme == "explicit" and dt > S.stable_dt() * (1 + 1e-12):
        raise StabilityViolation(f"dt = {dt:.3e} exceeds h^2/(2n) = {S.stable_dt():.3e}")
    p = v.pressure if v.pressure is not None else np.zeros((S.M,) * (n - 1) + (S.K,))
    G = S.grad(p)
    U = v.comps
    if cfg.scheme == "explicit":
        Us = [U[a] + dt * (S.lap_t(U[a]) - G[a]) for a in range(n - 1)]
        Us.append(U[-1] + dt * (S.lap_n(U[-1]) - G[-1]))
    else:
        Us = [S._helmholtz_solve(U[a] + dt * (0.5 * S.lap_t(U[a]) - G[a]), 0.5 * dt, False)
              for a in range(n - 1)]
        Us.append(S._helmholtz_solve(U[-1] + dt * (0.5 * S.lap_n(U[-1]) - G[-1]), 0.5 * dt, True))
    Us[-1][..., 0] = 0.0
    Us[-1][..., -1] = 0.0
    phi = S.poisson(S.div(Us) / dt)
    G = S.grad(phi)
    out = [Us[a] - dt * G[a] for a in range(n)]
    if not all(np.all(np.isfinite(c)) for c in out):
        raise NumericalFailure("oracle step produced non-finite values")
    return StaggeredField(S, out, v.time + dt, p + phi)


@dataclass
class OracleRun:
    times: list
    snapshots: list
    metadata: dict = field(default_factory=dict)


def run(v0: StaggeredField, T, cfg: StepperConfig, project_initial: bool = True) -> OracleRun:
    """Advance ``v0`` to each time in ``T`` (a float or increasing sequence).

    The step is shrunk uniformly so that every requested time is hit exactly.
    Records the maximum post-projection divergence and whether the discrete
    energy was non-increasing.
    """
    times = [float(T)] if np.isscalar(T) else [float(t) for t in T]
    S = v0.solver
    v = v0.copy()
    if project_initial:
        U, _ = S.project(v.comps)
        U[-1][..., 0] = 0.0
        U[-1][..., -1] = 0.0
        v = StaggeredField(S, U, v.time)
    snaps, max_div, energy, steps_total = [], 0.0, [v.l2()], 0
    t_now = v.time
    for t in times:
        if t < t_now - 1e-14:
            raise ValidationError("times must be increasing")
        span = t - t_now
        steps = int(np.ceil(span / cfg.dt - 1e-9)) if span > 0 else 0
        c = StepperConfig(span / steps, cfg.scheme, cfg.boundary) if steps else cfg
        for _ in range(steps):
            v = step(v, c)
            max_div = max(max_div, float(np.abs(v.divergence()).max()))
            energy.append(v.l2())
        v.time = t
        t_now = t
        steps_total += steps
        snaps.append(v.copy())
    e = np.array(energy)
    meta = {"max_divergence": max_div, "steps": steps_total, "scheme": cfg.scheme,
            "energy_nonincreasing": bool(np.all(np.diff(e) <= 1e-12 * e[0])),
            "h": S.h, "L": S.L, "M": S.M, "K": S.K}
    return OracleRun(times, snaps, meta)


# ----------------------------------------------------------------------------
# manufactured solution

def heat_mode(solver: MACSolver, t: float, mode: int = 1) -> StaggeredField:
    """``v_1 = exp(-kappa^2 t) sin(kappa x_n)``, other components 0, with
    ``kappa = mode * pi / (K h)`` so both walls are no-slip."""
    kap = mode * np.pi / (solver.K * solver.h)
    return StaggeredField.sample(
        solver, lambda X: [np.exp(-kap * kap * t) * np.sin(kap * X[-1]) + 0 * X[0]]
        + [0 * X[0]] * (solver.n - 1), t)


def heat_mode_error(solver: MACSolver, T: float, cfg: StepperConfig, mode: int = 1) -> float:
    """Max error of the stepped heat mode against the exact decay at ``T``."""
    out = run(heat_mode(solver, 0.0, mode), T, cfg, project_initial=False).snapshots[-1]
    ex = heat_mode(solver, T, mode)
    return max(float(np.abs(a - b).max()) for a, b in zip(out.comps, ex.comps))
