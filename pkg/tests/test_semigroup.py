import numpy as np
import pytest

from halfstokes import data as D
from halfstokes import semigroup as SG
from halfstokes.errors import BoxTooSmall, DatumNotSolenoidal, NonpositiveTime, ValidationError
from halfstokes.fields import Grid, VectorField, trace_boundary


@pytest.fixture(scope="module")
def half_case():
    g = Grid.halfspace(8.0, 48, Ln=12.0)
    v0 = D.gaussian_curl_datum(g, (0.0, 0.0, 3.0), 0.7)
    return g, v0, SG.HalfSpaceEvaluator(v0)


def test_wholespace_matches_closed_form():
    # heat flow of curl(G_s d) is curl(G_{s(t)} d) with s(t)^2 = s^2 + 2t, scaled
    g = Grid.wholespace(8.0, 64)
    s, t = 0.6, 0.3
    u0 = D.wholespace_gaussian_datum(g, (0, 0, 0), s, (0, 0, 1))
    ev = SG.WholeSpaceEvaluator(u0)
    st = np.sqrt(s * s + 2 * t)
    X = g.mesh()
    ex = (s / st) ** 3 * np.exp(-(X[0] ** 2 + X[1] ** 2 + X[2] ** 2) / (2 * st * st)) / st ** 2
    # curl of (0, 0, psi) = (d2 psi, -d1 psi, 0)
    exact = np.stack([np.broadcast_to(-X[1] * ex, g.shape), np.broadcast_to(X[0] * ex, g.shape), 0 * ex + 0 * X[0]])
    assert np.abs(ev.velocity(t) - exact).max() < 1e-8 * np.abs(exact).max() + 1e-12
    assert ev.divergence_residual() < 1e-12


def test_wholespace_time_derivative_is_laplacian():
    g = Grid.wholespace(6.0, 32)
    u0 = D.wholespace_gaussian_datum(g, (0, 0, 0), 0.7, (1, 0, 0))
    ev = SG.WholeSpaceEvaluator(u0)
    H = ev.hessian(0.2)
    lap = np.einsum("iaa...->i...", H)
    assert np.allclose(ev.velocity(0.2, l=1), lap, atol=1e-10)


def test_halfspace_trace_shrinks_under_refinement():
    tr = {}
    for Nn in (30, 60):
        g = Grid.halfspace(8.0, 48, Ln=10.0, Nn=Nn)
        ev = SG.HalfSpaceEvaluator(D.gaussian_curl_datum(g, (0.0, 0.0, 3.0), 0.7))
        v = ev.velocity(0.1)
        tr[Nn] = np.abs(trace_boundary(VectorField(g, v))).max() / np.abs(v).max()
    assert tr[60] < 1e-2
    assert tr[30] / tr[60] > 1.7


def test_halfspace_boundary_and_divergence(half_case):
    g, v0, ev = half_case
    for t in (0.1, 0.3):
        v = ev.velocity(t)
        assert np.abs(v[..., 0]).max() < 1e-12
        J = ev.gradient(t)
        div = np.einsum("ii...->...", J)
        assert np.abs(div).max() < 1e-3 * np.abs(J).max()
    assert ev.datum_divergence_residual() < 1e-3


def test_halfspace_velocity_at_zero_recovers_datum(half_case):
    g, v0, ev = half_case
    assert np.abs(ev.velocity(0.0) - v0.data).max() < 1e-2 * np.abs(v0.data).max()


def test_halfspace_is_linear(half_case):
    g, v0, ev = half_case
    ev2 = SG.HalfSpaceEvaluator(VectorField(g, -2.5 * v0.data))
    assert np.allclose(ev2.velocity(0.2), -2.5 * ev.velocity(0.2), atol=1e-12)


def test_pressure_gradient_closed_vs_residual(half_case):
    g, v0, ev = half_case
    t = 0.25
    a = SG.pressure_gradient(ev, t, "closed").data
    b = SG.pressure_gradient(ev, t, "residual").data
    assert np.abs(a - b).max() < 1e-4 * np.abs(a).max()
    # gradient of the pressure field agrees with the closed form
    p = ev.pressure(t)
    assert np.allclose(np.gradient(p, g.spacing[0], axis=0)[:, :, 5:-5], a[0][:, :, 5:-5],
                       atol=5e-2 * np.abs(a).max())


def test_apply_S_trivial_cases():
    h = Grid.halfspace(4.0, 16)
    z = VectorField(h.mirrored(), np.zeros((3,) + h.mirrored().shape))
    assert np.all(SG.apply_S(z, h).data == 0.0)
    rng = np.random.default_rng(0)
    g = VectorField(h.mirrored(), rng.normal(size=(3,) + h.mirrored().shape))
    assert np.abs(SG.apply_S(g, h).data[..., 0]).max() < 1e-12
    with pytest.raises(ValidationError):
        SG.apply_S(g, Grid.halfspace(4.0, 8))


def test_request_validation(half_case):
    g, v0, _ = half_case
    with pytest.raises(NonpositiveTime):
        SG.EvolutionRequest(v0, [0.0, 0.1])
    with pytest.raises(ValidationError):
        SG.EvolutionRequest(v0, [0.2, 0.1])
    with pytest.raises(ValidationError):
        SG.EvolutionRequest(v0, [0.1], derivatives=[(2, 0)])


def test_box_rule(half_case):
    g, v0, _ = half_case
    sup = D.gaussian_support((0.0, 0.0, 3.0), 0.7)
    with pytest.raises(BoxTooSmall):
        SG.check_box_rule(v0, 4.0, support=sup)
    m = SG.check_box_rule(v0, 0.1, support=sup)
    assert m == pytest.approx(min(8.0 - sup[0], 12.0 - sup[-1]))
    assert SG.check_box_rule(v0, 0.1, support=1.0) == pytest.approx(7.0)


def test_evolve_halfspace_outputs(half_case):
    g, v0, _ = half_case
    sup = D.gaussian_support((0.0, 0.0, 3.0), 0.7)
    res = SG.evolve_halfspace(SG.EvolutionRequest(v0, [0.1, 0.2], [(0, 1)], want_pressure=True, support=sup))
    assert len(res.velocity) == 2 and len(res.pressure_gradient) == 2
    assert res.derivatives[(0, 1)][0].shape == (3, 3) + g.shape
    rows = res.metadata["residuals"]
    assert all(r["divergence"] < 1e-3 for r in rows)
    assert res.metadata["kind"] == "half-space"


def test_non_solenoidal_datum_rejected():
    g = Grid.halfspace(6.0, 32)
    X = g.mesh()
    bump = np.exp(-(X[0] ** 2 + X[1] ** 2 + (X[2] - 2) ** 2))
    f = VectorField(g, np.stack([np.broadcast_to(bump, g.shape)] + [np.zeros(g.shape)] * 2))
    with pytest.raises(DatumNotSolenoidal):
        SG.evolve_halfspace(SG.EvolutionRequest(f, [0.1], check_box=False))
