import numpy as np
import pytest

from halfstokes import data as D
from halfstokes import helmholtz as H
from halfstokes.errors import GridTooSmall, ValidationError
from halfstokes.fields import Grid, VectorField


@pytest.fixture(scope="module")
def grid():
    return Grid.halfspace(4.0, 32)


def test_recomposition_and_solenoidality(grid, example_spec):
    u = D.random_bumps(grid, np.random.default_rng(0))
    r = H.decompose(u, example_spec)
    assert r.residuals["recomposition"] < 1e-12
    assert r.residuals["divergence"] < 1e-12
    assert r.residuals["normal_trace"] < 1e-12
    assert r.norms["constant"] > 0 and np.isfinite(r.norms["constant"])
    assert "zero_mode" in r.to_dict()


def test_pure_gradient_and_pure_solenoidal(grid):
    g = D.random_gradient(grid, np.random.default_rng(1))
    assert H.decompose(g).residuals["v_fraction"] < 1e-3
    s = D.random_solenoidal(grid, np.random.default_rng(2))
    assert H.decompose(s).residuals["grad_fraction"] < 1e-3


def test_idempotent_and_linear(grid):
    rng = np.random.default_rng(3)
    a = D.random_bumps(grid, rng)
    b = D.random_bumps(grid, rng)
    ra, rb = H.decompose(a), H.decompose(b)
    assert H.decompose(ra.v).residuals["grad_fraction"] < 1e-12
    rc = H.decompose(VectorField(grid, 2 * a.data - b.data))
    assert np.allclose(rc.v.data, 2 * ra.v.data - rb.v.data, atol=1e-12)


def test_constant_tangential_field_is_a_gradient(grid):
    d = np.zeros((3,) + grid.shape)
    d[0] = 1.5
    r = H.decompose(VectorField(grid, d))
    assert r.residuals["v_fraction"] < 1e-12


def test_psi_has_zero_mean(grid):
    u = D.random_bumps(grid, np.random.default_rng(4))
    psi, _ = H.solve_neumann(u)
    w = np.broadcast_to(grid.quad_weights(), grid.shape)
    assert abs(np.sum(psi.data * w)) < 1e-12 * np.sum(np.abs(psi.data) * w)


def test_orthogonality_audit(grid, example_spec):
    r = H.decompose(D.random_bumps(grid, np.random.default_rng(5)), example_spec)
    a = H.orthogonality_audit(r, example_spec, trials=5)
    assert len(a["defects"]) == 5 and a["constant_potential"] == 0.0
    assert a["max_defect"] < 1e-2
    z = H.DecompositionResult(VectorField(grid, np.zeros((3,) + grid.shape)), r.grad_psi, r.psi)
    assert H.orthogonality_audit(z, example_spec, trials=3)["max_defect"] == 0.0


def test_direct_sum_agrees_roughly(grid):
    u = D.random_gradient(grid, np.random.default_rng(6))
    _, gp = H.solve_neumann(u)
    idx = (16, 14, 6)
    x = np.array([grid.coords(a)[idx[a]] for a in range(3)]) + grid.spacing[0] / 2
    ref = gp.data[:, idx[0]:idx[0] + 2, idx[1]:idx[1] + 2, idx[2]:idx[2] + 2].mean(axis=(1, 2, 3))
    d = H.neumann_gradient_direct(u, x[None])[0]
    assert np.linalg.norm(d - ref) < 0.3 * np.abs(gp.data).max()


def test_stability_constants(grid, example_spec):
    fs = [D.random_bumps(grid, np.random.default_rng(k)) for k in range(3)]
    c = H.stability_constants(fs, example_spec)
    assert 0 < c["plain_q2"] <= 1.0 + 1e-12      # L2 projection is a contraction
    assert c["plain_q4"] < 3 and c["weighted_dual"] < 3


def test_errors():
    with pytest.raises(ValidationError):
        H.solve_neumann(VectorField(Grid.wholespace(1.0, 8), np.zeros((3, 8, 8, 8))))
    g = Grid.halfspace(1.0, 2)
    with pytest.raises(GridTooSmall):
        H.solve_neumann(VectorField(g, np.zeros((3,) + g.shape)))
