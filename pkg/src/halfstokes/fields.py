"""Uniform node-centred grids, sampled fields, mirror extensions and discrete calculus.

A half-space grid carries a node layer on the plane ``x_n = 0``; tangential
axes are periodic boxes ``[-L, L)`` and the normal axis covers ``[0, L_n)``.
Spacing may differ per axis.
"""
from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import GridMismatch, GridTooSmall, StencilUnavailable, ValidationError

__all__ = [
    "Grid",
    "ScalarField",
    "VectorField",
    "ContinuityWarning",
    "extend",
    "restrict",
    "mirror_normal",
    "gradient",
    "divergence",
    "laplacian",
    "trace_boundary",
    "time_derivative",
    "save_field",
    "load_field",
    "export_slice_csv",
]


class ContinuityWarning(UserWarning):
    """Odd extension of a field with non-zero boundary trace (creates a jump)."""


@dataclass(frozen=True)
class Grid:
    """Uniform tensor grid.

    Parameters
    ----------
    shape : tuple of int
        Nodes per axis.
    spacing : tuple of float
        Node spacing per axis.
    origin : tuple of float
        Coordinate of node ``(0, ..., 0)``.
    half_space : bool
        If set, the last axis is the normal axis and ``origin[-1] == 0``.
    """

    shape: tuple
    spacing: tuple
    origin: tuple
    half_space: bool = False

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        object.__setattr__(self, "spacing", tuple(float(h) for h in self.spacing))
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        if not (len(self.shape) == len(self.spacing) == len(self.origin)):
            raise ValidationError("shape, spacing and origin must have equal length")
        if any(s < 1 for s in self.shape) or any(h <= 0 for h in self.spacing):
            raise ValidationError("grid needs positive sizes and spacings")
        if self.half_space and self.origin[-1] != 0.0:
            raise ValidationError("half-space grids start at x_n = 0")

    # constructors ----------------------------------------------------------
    @classmethod
    def halfspace(cls, L, N, Ln=None, Nn=None, n=3):
        """Half-space box: ``N`` tangential nodes on ``[-L, L)``, ``Nn`` normal
        layers on ``[0, Ln)``.  Defaults give isotropic spacing."""
        h = 2.0 * L / N
        if Ln is None:
            Ln = L
        if Nn is None:
            Nn = max(int(round(Ln / h)), 1)
        hn = Ln / Nn
        return cls((N,) * (n - 1) + (Nn,), (h,) * (n - 1) + (hn,),
                   (-L,) * (n - 1) + (0.0,), True)

    @classmethod
    def wholespace(cls, L, N, n=3):
        h = 2.0 * L / N
        return cls((N,) * n, (h,) * n, (-L,) * n, False)

    # geometry --------------------------------------------------------------
    @property
    def n(self) -> int:
        return len(self.shape)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def extent(self):
        return tuple(o + h * s for o, h, s in zip(self.origin, self.spacing, self.shape))

    def coords(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.spacing[axis] * np.arange(self.shape[axis])

    def mesh(self, sparse: bool = True):
        return np.meshgrid(*[self.coords(a) for a in range(self.n)], indexing="ij", sparse=sparse)

    def points(self) -> np.ndarray:
        """All nodes as an ``(N_total, n)`` array (C order)."""
        X = self.mesh(sparse=False)
        return np.stack([x.ravel() for x in X], axis=-1)

    def quad_weights(self) -> np.ndarray:
        """Node quadrature weights (trapezoid half weight on the x_n = 0 layer)."""
        w = np.full(self.shape[-1], self.cell_volume)
        if self.half_space:
            w[0] *= 0.5
        return w.reshape((1,) * (self.n - 1) + (-1,))

    def mirrored(self) -> "Grid":
        """Whole-space grid obtained by reflecting the normal axis."""
        if not self.half_space:
            raise ValidationError("mirrored() needs a half-space grid")
        Nn = self.shape[-1]
        return Grid(self.shape[:-1] + (2 * Nn,), self.spacing,
                    self.origin[:-1] + (-Nn * self.spacing[-1],), False)

    def scaled(self, mu: float) -> "Grid":
        """Grid with all coordinates multiplied by ``mu``."""
        return Grid(self.shape, tuple(h * mu for h in self.spacing),
                    tuple(o * mu for o in self.origin), self.half_space)

    def to_dict(self) -> dict:
        return {"shape": list(self.shape), "spacing": list(self.spacing),
                "origin": list(self.origin), "half_space": self.half_space}


def _check_shape(grid: Grid, data: np.ndarray, lead: tuple):
    if data.shape != lead + grid.shape:
        raise GridMismatch(f"data shape {data.shape} does not match {lead + grid.shape}")


@dataclass
class ScalarField:
    grid: Grid
    data: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        _check_shape(self.grid, self.data, ())
        if not np.all(np.isfinite(self.data)):
            raise ValidationError("field contains non-finite values")

    def magnitude(self) -> np.ndarray:
        return np.abs(self.data)


@dataclass
class VectorField:
    grid: Grid
    data: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        _check_shape(self.grid, self.data, (self.grid.n,))
        if not np.all(np.isfinite(self.data)):
            raise ValidationError("field contains non-finite values")

    def magnitude(self) -> np.ndarray:
        return np.sqrt(np.einsum("i...,i...->...", self.data, self.data))

    @classmethod
    def sample(cls, grid: Grid, func: Callable, time: float = 0.0) -> "VectorField":
        """Evaluate ``func(X)`` (list of broadcastable coordinate arrays) on the grid."""
        X = grid.mesh(sparse=True)
        vals = np.asarray(func(X), dtype=float)
        return cls(grid, np.broadcast_to(vals, (grid.n,) + grid.shape).copy(), time)


# ----------------------------------------------------------------------------
# mirror extensions

def mirror_normal(data: np.ndarray, sign: float, plane: float) -> np.ndarray:
    """Reflect the last axis of half-space samples onto ``2*Nn`` nodes.

    Index ``Nn + k`` holds ``x_n = k h``; index ``Nn - k`` holds ``x_n = -k h``.
    Values below the plane are ``sign * data(x*)``; the plane row is
    ``plane * data(x', 0)``; the top row ``-Nn h`` is left at zero.
    """
    Nn = data.shape[-1]
    out = np.zeros(data.shape[:-1] + (2 * Nn,), dtype=data.dtype)
    out[..., Nn:] = data
    out[..., Nn] = plane * data[..., 0]
    out[..., 1:Nn] = sign * data[..., Nn - 1:0:-1]
    return out


def extend(f, kind: str = "odd", tol: float = 1e-8):
    """Extend a half-space field to the mirrored whole-space grid.

    Parameters
    ----------
    f : ScalarField or VectorField
    kind : {"odd", "reflected-zero"}
        ``odd``: every component becomes odd in x_n (plane value 0).
        ``reflected-zero``: zero above the plane, ``f(x*)`` below it and the
        midpoint value ``f/2`` on the plane itself.
    """
    g = f.grid
    if not g.half_space:
        raise ValidationError("extend() needs a half-space field")
    if kind == "odd":
        tr = np.abs(f.data[..., 0]).max(initial=0.0)
        scale = np.abs(f.data).max(initial=0.0)
        if tr > tol * max(scale, 1e-300):
            warnings.warn(f"odd extension of a field with boundary trace {tr:.3e}", ContinuityWarning)
        out = mirror_normal(f.data, -1.0, 0.0)
    elif kind == "reflected-zero":
        out = mirror_normal(f.data, 1.0, 0.5)
        out[..., g.shape[-1] + 1:] = 0.0
    else:
        raise ValidationError(f"unknown extension kind {kind!r}")
    return type(f)(g.mirrored(), out, f.time)


def restrict(f, half_grid: Grid):
    """Restrict a field on ``half_grid.mirrored()`` back to ``half_grid``."""
    if f.grid != half_grid.mirrored():
        raise GridMismatch("field does not live on the mirrored grid")
    Nn = half_grid.shape[-1]
    return type(f)(half_grid, f.data[..., Nn:].copy(), f.time)


# ----------------------------------------------------------------------------
# discrete calculus: 2nd-order centred, 2nd-order one-sided at faces

def _require(grid: Grid):
    if min(grid.shape) < 4:
        raise GridTooSmall("discrete operators need >= 4 nodes per axis")


def _d2(a: np.ndarray, h: float, axis: int) -> np.ndarray:
    a = np.moveaxis(a, axis, 0)
    out = np.empty_like(a)
    out[1:-1] = a[2:] - 2 * a[1:-1] + a[:-2]
    out[0] = 2 * a[0] - 5 * a[1] + 4 * a[2] - a[3]
    out[-1] = 2 * a[-1] - 5 * a[-2] + 4 * a[-3] - a[-4]
    return np.moveaxis(out / h**2, 0, axis)


def gradient(f: ScalarField) -> VectorField:
    g = f.grid
    _require(g)
    comps = np.gradient(f.data, *g.spacing, edge_order=2)
    return VectorField(g, np.stack(comps), f.time)


def divergence(f: VectorField) -> ScalarField:
    g = f.grid
    _require(g)
    d = sum(np.gradient(f.data[a], g.spacing[a], axis=a, edge_order=2) for a in range(g.n))
    return ScalarField(g, d, f.time)


def laplacian(f):
    g = f.grid
    _require(g)
    if isinstance(f, VectorField):
        return VectorField(g, np.stack([laplacian(ScalarField(g, c)).data for c in f.data]), f.time)
    return ScalarField(g, sum(_d2(f.data, g.spacing[a], a) for a in range(g.n)), f.time)


def trace_boundary(f, method: str = "extrapolate") -> np.ndarray:
    """Values on the plane x_n = 0.

    ``extrapolate`` uses the quadratic through layers 1, 2, 3 (independent of
    the node layer on the plane); ``node`` returns the plane layer itself.
    """
    if not f.grid.half_space:
        raise ValidationError("trace needs a half-space field")
    d = f.data
    if method == "node":
        return d[..., 0].copy()
    if method == "extrapolate":
        if d.shape[-1] < 4:
            raise GridTooSmall("trace extrapolation needs 4 normal layers")
        return 3 * d[..., 1] - 3 * d[..., 2] + d[..., 3]
    raise ValidationError(f"unknown trace method {method!r}")


def time_derivative(fn: Callable[[float], np.ndarray], t: float, delta: float | None = None):
    """Centred difference with one Richardson step over {t±δ, t±2δ}, δ = t/64."""
    if delta is None:
        delta = t / 64.0
    if t - 2 * delta <= 0:
        raise StencilUnavailable("stencil reaches t <= 0")
    d1 = (fn(t + delta) - fn(t - delta)) / (2 * delta)
    d2 = (fn(t + 2 * delta) - fn(t - 2 * delta)) / (4 * delta)
    return (4 * d1 - d2) / 3


# ----------------------------------------------------------------------------
# file formats

def save_field(f, stem) -> Path:
    """Write ``stem.bin`` (float64, C order) and ``stem.json`` sidecar."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    np.ascontiguousarray(f.data, dtype="<f8").tofile(stem.with_suffix(".bin"))
    head = {"shape": list(f.data.shape), "spacing": list(f.grid.spacing),
            "origin": list(f.grid.origin), "half_space": f.grid.half_space,
            "time": float(f.time)}
    stem.with_suffix(".json").write_text(json.dumps(head, indent=1) + "\n")
    return stem.with_suffix(".bin")


def load_field(stem):
    stem = Path(stem)
    head = json.loads(stem.with_suffix(".json").read_text())
    data = np.fromfile(stem.with_suffix(".bin"), dtype="<f8").reshape(head["shape"])
    n = len(head["spacing"])
    grid = Grid(data.shape[-n:], head["spacing"], head["origin"], head["half_space"])
    cls = VectorField if data.ndim == n + 1 else ScalarField
    return cls(grid, data, head["time"])


def export_slice_csv(f, path, fixed: dict, component: int | None = None) -> Path:
    """Write a 1D or 2D slice; ``fixed`` maps axis -> node index."""
    g = f.grid
    free = [a for a in range(g.n) if a not in fixed]
    if len(free) not in (1, 2):
        raise ValidationError("slice must leave one or two free axes")
    idx = tuple(fixed.get(a, slice(None)) for a in range(g.n))
    vals = f.data[(slice(None),) + idx] if isinstance(f, VectorField) else f.data[idx][None]
    if component is not None:
        vals = vals[component:component + 1]
    coords = np.meshgrid(*[g.coords(a) for a in free], indexing="ij")
    names = [f"x{a + 1}" for a in free]
    cols = ["value"] if vals.shape[0] == 1 else [f"v{i + 1}" for i in range(vals.shape[0])]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names + cols)
        for k in np.ndindex(coords[0].shape):
            w.writerow([f"{c[k]:.10g}" for c in coords] + [f"{v[k]:.10g}" for v in vals])
    return path
