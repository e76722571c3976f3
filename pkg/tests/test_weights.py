import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from halfstokes import weights as W
from halfstokes.errors import BadParameters, GridMismatch, SingularPoint, ValidationError
from halfstokes.fields import Grid, ScalarField, VectorField


def test_spec_from_json_example(tmp_path):
    doc = '{"n":3,"p":4.0,"centers":[[0,0,1],[0,0,2]],"exponents":[0.125,0.125]}'
    p = tmp_path / "w.json"
    p.write_text(doc)
    s = W.WeightSpec.load(p)
    assert s.m == 2 and s.alpha == pytest.approx(0.25)
    assert s.scaling_invariant
    assert s.p_dual == pytest.approx(4 / 3)
    assert W.WeightSpec.from_dict(json.loads(json.dumps(s.to_dict()))) == s


@pytest.mark.parametrize("bad", [
    dict(n=2, p=4.0, centers=[[0, 0]], exponents=[0.1]),
    dict(n=3, p=1.0, centers=[[0, 0, 1]], exponents=[0.1]),
    dict(n=3, p=4.0, centers=[[0, 0, -1]], exponents=[0.1]),
    dict(n=3, p=4.0, centers=[[0, 0, 1]], exponents=[-0.1]),
    dict(n=3, p=4.0, centers=[[0, 0, 1], [0, 0, 2]], exponents=[0.1]),
])
def test_spec_validation(bad):
    with pytest.raises(ValidationError):
        W.WeightSpec.from_dict(bad)


def test_weight_and_dual_are_reciprocal(example_spec, rng):
    x = rng.uniform(-2, 2, size=(50, 3))
    assert np.allclose(W.eval_weight(example_spec, x) * W.eval_dual_weight(example_spec, x), 1.0)
    with pytest.raises(SingularPoint):
        W.eval_dual_weight(example_spec, np.array([0.0, 0.0, 1.0]))
    with pytest.raises(GridMismatch):
        W.eval_weight(example_spec, np.zeros(2))


def test_single_centre_laplacian_bound_is_exact():
    s = W.WeightSpec.single(3, 5.0, center=(0.2, 0.1, 0.4))
    x = np.array([[1.0, 0.3, 0.2], [-0.5, 2.0, 1.5]])
    assert np.allclose(W.dual_weight_laplacian_bound(s, x), W.dual_weight_laplacian_exact(s, x), rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(p=st.floats(3.2, 10.0), split=st.floats(0.05, 0.95), seed=st.integers(0, 10_000))
def test_laplacian_bound_negative_and_above_exact(p, split, seed):
    r = np.random.default_rng(seed)
    a = 1 - 3 / p
    s = W.WeightSpec(3, p, ((0, 0, r.uniform(0, 2)), (r.uniform(-1, 1), 0.5, r.uniform(0, 2))),
                     (a * split, a * (1 - split)))
    x = r.uniform(-3, 3, size=(200, 3))
    b = W.dual_weight_laplacian_bound(s, x)
    e = W.dual_weight_laplacian_exact(s, x)
    assert np.all(b < 0)
    assert np.all(e <= b + 1e-12 * np.abs(b))


def test_plain_norms_and_constant_weight():
    g = Grid.halfspace(2.0, 16)
    f = ScalarField(g, np.ones(g.shape))
    vol = float(np.broadcast_to(g.quad_weights(), g.shape).sum())
    assert W.weighted_norm(f, None, W.NormTag.plain(2)) == pytest.approx(vol ** 0.5)
    assert W.weighted_norm(f, None, W.NormTag.sup()) == 1.0
    flat = W.WeightSpec(3, 3.0, ((0, 0, 1),), (0.0,))
    assert W.weighted_norm(f, flat, W.NormTag.weighted()) == pytest.approx(vol ** (1 / 3), rel=1e-10)
    with pytest.raises(BadParameters):
        W.weighted_norm(f, None, W.NormTag.weighted())


def test_cell_integrals_match_power_integral_of_single_cell():
    # the product-integrated cell weight of a singular cell equals the exact box integral
    g = Grid.halfspace(1.0, 8)
    s = W.WeightSpec.single(3, 4.0, center=(0.0, 0.0, 0.0))
    Wc = W.cell_weight_integrals(g, s, 4.0)
    assert np.all(np.isfinite(Wc)) and np.all(Wc >= 0)
    total = W.power_product_integral([[0, 0, 0]], [s.alpha * 4.0], [-1.0, -1.0, 0.0], [1.0, 1.0, 1.0])
    # x^(1) moment-free check: the weights integrate w^p over the box (up to boundary half cells)
    assert np.sum(np.broadcast_to(Wc, g.shape)) == pytest.approx(total, rel=0.2)


def test_power_product_integral_closed_form():
    # int_{[0,1]^3} |x|^2 = 1
    assert W.power_product_integral([[0, 0, 0]], [2.0], [0, 0, 0], [1, 1, 1]) == pytest.approx(1.0, rel=1e-9)
    # int_{[-1,1]^3} |x|^{-2}: singular but integrable, equals 8 * int_{[0,1]^3}
    v = W.power_product_integral([[0, 0, 0]], [-2.0], [-1, -1, -1], [1, 1, 1])
    assert v == pytest.approx(8 * W.power_product_integral([[0, 0, 0]], [-2.0], [0, 0, 0], [1, 1, 1]),
                              rel=1e-8)
    assert np.isinf(W.power_product_integral([[0, 0, 0]], [-3.0], [-1, -1, -1], [1, 1, 1]))


def test_weighted_norm_cache_is_transparent(tmp_path, monkeypatch, example_spec):
    g = Grid.halfspace(3.0, 16)
    X = g.mesh()
    f = ScalarField(g, np.broadcast_to(np.exp(-(X[0] ** 2 + X[1] ** 2 + (X[2] - 1) ** 2)), g.shape).copy())
    monkeypatch.delenv("STOKES_CACHE_DIR", raising=False)
    W._cell_integrals_cached.cache_clear()
    a = W.weighted_norm(f, example_spec, W.NormTag.weighted())
    monkeypatch.setenv("STOKES_CACHE_DIR", str(tmp_path / "c"))
    W._cell_integrals_cached.cache_clear()
    b = W.weighted_norm(f, example_spec, W.NormTag.weighted())      # computes and stores
    W._cell_integrals_cached.cache_clear()
    c = W.weighted_norm(f, example_spec, W.NormTag.weighted())      # reads back
    assert a == b == c
    assert any((tmp_path / "c").iterdir())


def test_lorentz_reduces_to_lebesgue():
    g = Grid.halfspace(2.0, 12)
    rng = np.random.default_rng(3)
    f = VectorField(g, rng.normal(size=(3,) + g.shape))
    assert W.lorentz_norm(f, 3.0, 3.0) == pytest.approx(W.weighted_norm(f, None, W.NormTag.plain(3.0)),
                                                        rel=1e-12)
    # L^{p,q} decreases in q
    assert W.lorentz_norm(f, 2.0, 4.0) <= W.lorentz_norm(f, 2.0, 2.0) + 1e-12
    with pytest.raises(BadParameters):
        W.NormTag.lorentz(3.0, 2.0)


def test_rearrangement_is_decreasing_and_measure_preserving():
    v = np.array([0.2, -3.0, 1.0, 0.5])
    m = np.array([1.0, 0.5, 2.0, 1.0])
    lv, ed = W.rearrangement(v, m)
    assert np.all(np.diff(lv) <= 0)
    assert ed[-1] == pytest.approx(m.sum())


def test_ap_product_constant_weight_is_one():
    assert W.ap_product([[0, 0, 0]], [0.0], 2.0, [0, 0, 0], [1, 1, 1]) == pytest.approx(1.0)


def test_muckenhoupt_audit_flags_and_csv(tmp_path, example_spec):
    good = W.muckenhoupt_audit(example_spec, levels=6)
    assert not good.violation and good.constant >= 1.0
    bad = W.muckenhoupt_audit(centers=[[0, 0, 0]], exps=[-4.0], p=2.0, levels=6)
    assert bad.violation
    path = good.write_csv(tmp_path / "ap.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "cube_center,cube_side,ap_product"
    assert len(lines) == len(good.rows) + 1
    with pytest.raises(BadParameters):
        W.muckenhoupt_audit(centers=[[0, 0, 0]], exps=[1.0], p=1.0)
