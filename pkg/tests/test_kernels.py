import numpy as np
import pytest

from halfstokes import kernels as K
from halfstokes.errors import NonpositiveTime, SingularPoint, ValidationError


def test_heat_kernel_mass_trapezoid():
    t = 0.3
    h = 0.25 * np.sqrt(t)
    x = np.arange(-12 * np.sqrt(t), 12 * np.sqrt(t) + h / 2, h)
    X = np.stack(np.meshgrid(x, x, x, indexing="ij"), -1)
    assert abs(K.heat_kernel(t, X).sum() * h ** 3 - 1) < 1e-10


def test_heat_kernel_semigroup_law_1d():
    t, s, h = 0.2, 0.7, 0.02
    y = np.arange(-10, 10 + h / 2, h)[:, None]
    for x in (0.0, 0.4, 1.3):
        conv = np.sum(K.heat_kernel(t, x - y) * K.heat_kernel(s, y)) * h
        assert conv == pytest.approx(float(K.heat_kernel(t + s, np.array([x]))), rel=1e-10)


def test_heat_kernel_errors():
    with pytest.raises(NonpositiveTime):
        K.heat_kernel(-1.0, np.zeros(3))
    with pytest.raises(SingularPoint):
        K.heat_kernel(0.0, np.zeros(3))
    assert K.heat_kernel(0.0, np.ones(3)) == 0.0


def test_laplace_fundamental_is_positive_and_harmonic():
    x = np.array([[0.3, -0.4, 0.9], [1.0, 1.0, -0.5]])
    assert np.all(K.laplace_fundamental(x) > 0)
    h = 1e-3
    lap = -6 * K.laplace_fundamental(x)
    for a in range(3):
        e = np.zeros(3)
        e[a] = h
        lap += K.laplace_fundamental(x + e) + K.laplace_fundamental(x - e)
    assert np.max(np.abs(lap / h ** 2)) < 1e-4


def test_laplace_fundamental_flux():
    # -Delta E = delta: outward flux of -grad E through a sphere is 1
    rng = np.random.default_rng(0)
    u = rng.normal(size=(200000, 3))
    u /= np.linalg.norm(u, axis=1)[:, None]
    R = 0.7
    flux = np.mean(np.sum(-K.grad_laplace_fundamental(R * u) * u, axis=1)) * 4 * np.pi * R ** 2
    assert flux == pytest.approx(1.0, rel=1e-12)


def test_gradient_and_hessian_match_differences():
    x = np.array([0.4, -0.7, 1.1])
    h = 1e-5
    g = K.grad_laplace_fundamental(x)
    H = K.hess_laplace_fundamental(x)
    for a in range(3):
        e = np.zeros(3)
        e[a] = h
        fd = (K.laplace_fundamental(x + e) - K.laplace_fundamental(x - e)) / (2 * h)
        assert fd == pytest.approx(g[a], rel=1e-7)
        fdg = (K.grad_laplace_fundamental(x + e) - K.grad_laplace_fundamental(x - e)) / (2 * h)
        assert np.allclose(fdg, H[a], rtol=1e-6)
    assert abs(np.trace(H)) < 1e-12


def test_singular_and_dimension_errors():
    with pytest.raises(SingularPoint):
        K.laplace_fundamental(np.zeros(3))
    with pytest.raises(ValidationError):
        K.laplace_fundamental(np.ones(2))


def test_neumann_green_normal_derivative_vanishes():
    y = np.array([0.2, -0.1, 0.8])
    h = 1e-6
    for xt in ((0.5, 0.5), (-1.0, 2.0)):
        up = K.neumann_green(np.array([*xt, h]), y)
        dn = K.neumann_green(np.array([*xt, -h]), y)
        assert abs(up - dn) / (2 * h) < 1e-8


def test_green_tensor_vanishes_on_boundary_and_normal_correction():
    y = np.array([0.0, 0.0, 0.8])
    for i in range(3):
        for j in range(3):
            assert abs(K.green_tensor(i, j, 0.3, np.array([0.4, -0.2, 0.0]), y)) < 1e-7
    # the normal column is the pure reflected heat kernel
    x = np.array([0.3, 0.1, 0.5])
    ys = y * np.array([1, 1, -1])
    ref = K.heat_kernel(0.3, x - y) - K.heat_kernel(0.3, x - ys)
    assert K.green_tensor(2, 2, 0.3, x, y) == pytest.approx(float(ref), rel=1e-12)
    assert K.green_tensor(0, 2, 0.3, x, y) == 0.0


def test_green_tensor_singular():
    x = np.array([0.1, 0.2, 0.3])
    with pytest.raises(SingularPoint):
        K.green_tensor(0, 0, 0.2, x, x)


def test_pressure_kernel_harmonic_in_x():
    q = K.QuadSpec(rel_tol=1e-11, abs_tol=1e-14)
    y = np.array([0.0, 0.0, 0.6])
    x = np.array([0.3, -0.2, 0.7])
    f = lambda z: K.pressure_kernel(0, 0.25, z, y, q)
    res, curv = [], []
    for h in (0.08, 0.04):
        lap, c = -6 * f(x), 0.0
        for a in range(3):
            e = np.zeros(3)
            e[a] = h
            lap += f(x + e) + f(x - e)
            c += abs(f(x + e) - 2 * f(x) + f(x - e))
        res.append(abs(lap))
        curv.append(c)
    # residual is small against the individual second differences and O(h^2)
    assert res[-1] < 1e-2 * curv[-1]
    assert res[0] / res[1] > 3.5
    assert K.pressure_kernel(2, 0.25, x, y) == 0.0


def test_quadspec_roundtrip(tmp_path):
    q = K.QuadSpec.from_dict({"rel_tol": 1e-6, "abs_tol": 1e-10, "max_depth": 20,
                              "tangential_radius_factor": 8.0})
    assert q == K.QuadSpec()
    p = tmp_path / "q.json"
    p.write_text('{"rel_tol": 1e-7}')
    assert K.QuadSpec.load(p).rel_tol == 1e-7
    assert K.QuadSpec.from_dict(q.to_dict()) == q
