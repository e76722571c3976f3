import warnings

import numpy as np
import pytest

from halfstokes import fields as F
from halfstokes.errors import GridMismatch, GridTooSmall, StencilUnavailable, ValidationError
from halfstokes.fields import Grid, ScalarField, VectorField


def test_grid_geometry():
    g = Grid.halfspace(2.0, 8, Ln=3.0, Nn=6)
    assert g.shape == (8, 8, 6) and g.spacing == (0.5, 0.5, 0.5)
    assert g.coords(2)[0] == 0.0
    w = np.broadcast_to(g.quad_weights(), g.shape)
    assert w[0, 0, 0] == pytest.approx(0.5 * g.cell_volume)
    m = g.mirrored()
    assert m.shape == (8, 8, 12) and not m.half_space
    assert Grid.from_dict(g.to_dict()) == g if hasattr(Grid, "from_dict") else True
    s = g.scaled(2.0)
    assert s.spacing == (1.0, 1.0, 1.0) and s.origin == (-4.0, -4.0, 0.0)


def test_extend_restrict_identity(small_half, rng):
    d = rng.normal(size=(3,) + small_half.shape)
    d[..., 0] = 0.0
    f = VectorField(small_half, d)
    for kind in ("odd", "reflected-zero"):
        e = F.extend(f, kind)
        r = F.restrict(e, small_half)
        if kind == "odd":
            assert np.array_equal(r.data, f.data)
    e = F.extend(f, "odd")
    Nn = small_half.shape[-1]
    assert np.allclose(e.data[..., Nn - 3], -e.data[..., Nn + 3])


def test_extend_warns_on_nonzero_trace(small_half):
    f = ScalarField(small_half, np.ones(small_half.shape))
    with pytest.warns(F.ContinuityWarning):
        F.extend(f, "odd")
    with pytest.raises(ValidationError):
        F.extend(f, "weird")
    with pytest.raises(GridMismatch):
        F.restrict(f, small_half)


def _noslip_field(g):
    # v = curl (x3^2 e, 0, 0) vanishes on the plane and is divergence-free
    X = g.mesh()
    e = np.exp(-(X[0] ** 2 + X[1] ** 2 + (X[2] - 0.5) ** 2))
    v = [0 * e, (2 * X[2] - 2 * X[2] ** 2 * (X[2] - 0.5)) * e, 2 * X[1] * X[2] ** 2 * e]
    return VectorField(g, np.stack([np.broadcast_to(c, g.shape) for c in v]).copy())


def test_odd_extension_of_noslip_field_is_continuous():
    g = Grid.halfspace(3.0, 48)
    f = _noslip_field(g)
    ext = F.extend(f, "odd")
    Nn = g.shape[-1]
    jump = np.abs(ext.data[..., Nn + 1] - ext.data[..., Nn - 1]).max()
    assert jump <= 2 * np.abs(f.data[..., 1]).max() + 1e-15
    assert np.abs(ext.data[..., Nn]).max() == 0.0


def test_mixed_reflection_preserves_solenoidality():
    # tangential odd, normal even: divergence is O(h^2) in the interior of both halves
    errs = []
    for N in (32, 64):
        g = Grid.halfspace(3.0, N)
        f = _noslip_field(g)
        d = np.stack([F.mirror_normal(f.data[a], -1.0 if a < 2 else 1.0, 0.0 if a < 2 else 1.0)
                      for a in range(3)])
        ext = VectorField(g.mirrored(), d)
        errs.append(np.abs(F.divergence(ext).data[2:-2, 2:-2, 2:-2]).max())
    assert errs[0] / errs[1] > 3.5


def test_operators_on_polynomials():
    g = Grid.halfspace(2.0, 16)
    X = g.mesh()
    q = ScalarField(g, np.broadcast_to(X[0] ** 2 + 2 * X[1] * X[2] + X[2] ** 2, g.shape).copy())
    gr = F.gradient(q)
    assert np.allclose(gr.data[0], 2 * X[0])
    assert np.allclose(gr.data[2], 2 * X[1] + 2 * X[2])
    assert np.allclose(F.laplacian(q).data, 4.0)
    assert np.allclose(F.divergence(gr).data, 4.0)
    with pytest.raises(GridTooSmall):
        F.gradient(ScalarField(Grid.halfspace(1.0, 2), np.zeros((2, 2, 1))))


def test_operators_are_linear(small_half, rng):
    a = VectorField(small_half, rng.normal(size=(3,) + small_half.shape))
    b = VectorField(small_half, rng.normal(size=(3,) + small_half.shape))
    c = VectorField(small_half, 2 * a.data - 3 * b.data)
    assert np.allclose(F.divergence(c).data, 2 * F.divergence(a).data - 3 * F.divergence(b).data)
    assert np.allclose(F.laplacian(c).data, 2 * F.laplacian(a).data - 3 * F.laplacian(b).data)


def test_trace_extrapolation_exact_for_quadratics():
    g = Grid.halfspace(1.0, 8)
    X = g.mesh()
    f = ScalarField(g, np.broadcast_to(1 + X[0] + X[2] - 3 * X[2] ** 2, g.shape).copy())
    assert np.allclose(F.trace_boundary(f), (1 + X[0])[..., 0])
    assert np.array_equal(F.trace_boundary(f, "node"), f.data[..., 0])
    with pytest.raises(ValidationError):
        F.trace_boundary(f, "nope")


def test_time_derivative():
    fn = lambda t: np.array([t ** 3, np.exp(-t)])
    d = F.time_derivative(fn, 1.0)
    assert np.allclose(d, [3.0, -np.exp(-1.0)], rtol=1e-9)
    with pytest.raises(StencilUnavailable):
        F.time_derivative(fn, 0.1, delta=0.1)


def test_save_load_roundtrip(tmp_path, small_half, rng):
    f = VectorField(small_half, rng.normal(size=(3,) + small_half.shape), 0.25)
    F.save_field(f, tmp_path / "v")
    head = (tmp_path / "v.json").read_text()
    for k in ("shape", "spacing", "origin", "half_space", "time"):
        assert f'"{k}"' in head
    g = F.load_field(tmp_path / "v")
    assert np.array_equal(g.data, f.data) and g.grid == f.grid and g.time == 0.25
    s = ScalarField(small_half, f.data[0])
    F.save_field(s, tmp_path / "s")
    assert isinstance(F.load_field(tmp_path / "s"), ScalarField)


def test_slice_csv(tmp_path, small_half, rng):
    f = VectorField(small_half, rng.normal(size=(3,) + small_half.shape))
    p = F.export_slice_csv(f, tmp_path / "s.csv", {1: 5})
    lines = p.read_text().splitlines()
    assert lines[0] == "x1,x3,v1,v2,v3"
    assert len(lines) == 1 + small_half.shape[0] * small_half.shape[2]
    with pytest.raises(ValidationError):
        F.export_slice_csv(f, tmp_path / "t.csv", {})


def test_field_validation(small_half):
    with pytest.raises(GridMismatch):
        VectorField(small_half, np.zeros((3, 2, 2, 2)))
    bad = np.zeros((3,) + small_half.shape)
    bad[0, 0, 0, 0] = np.nan
    with pytest.raises(ValidationError):
        VectorField(small_half, bad)
