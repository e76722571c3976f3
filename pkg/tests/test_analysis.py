import json

import numpy as np
import pytest

from halfstokes import analysis as A
from halfstokes.errors import BadParameters, DegenerateData
from halfstokes.fields import Grid, ScalarField
from halfstokes.weights import WeightSpec


def test_fit_recovers_exact_power_law():
    t = np.geomspace(0.01, 1.0, 8)
    f = A.fit_decay(list(zip(t, 3.0 * t ** -0.5)), -0.5)
    assert abs(f.fitted_slope + 0.5) <= 1e-12
    assert abs(f.intercept - np.log(3.0)) <= 1e-12
    assert f.passed and f.slope_ci < 1e-10


def test_fit_upper_mode_accepts_faster_decay():
    t = np.geomspace(0.1, 10.0, 6)
    tr = list(zip(t, 2.0 * t ** -1.25))
    assert A.fit_decay(tr, -1.25).passed
    assert A.fit_decay(tr, -0.75, mode="upper").passed
    assert not A.fit_decay(tr, -0.75, mode="saturating").passed
    assert not A.fit_decay(list(zip(t, t ** -0.5)), -1.25, mode="upper").passed


@pytest.mark.parametrize("tr", [
    [(0.1, 1.0), (0.2, 0.5)],                                  # too few samples
    [(t, 1.0) for t in np.geomspace(1.0, 2.0, 6)],             # under a decade
    [(t, -1.0) for t in np.geomspace(0.1, 10.0, 6)],           # non-positive norms
])
def test_fit_rejects_degenerate(tr):
    with pytest.raises(DegenerateData):
        A.fit_decay(tr, -0.5)


def test_fit_rejects_unknown_mode():
    t = np.geomspace(0.1, 10.0, 6)
    with pytest.raises(BadParameters):
        A.fit_decay(list(zip(t, t ** -1)), -1.0, mode="lower")


def test_predicted_exponents_at_q6():
    assert A.predicted_exponent(3, 6.0) == pytest.approx(-0.25)
    assert A.predicted_exponent(3, 6.0, kind="sup") == pytest.approx(-0.5)
    assert A.predicted_exponent(3, 6.0, k=1) == pytest.approx(-0.75)
    assert A.predicted_exponent(3, 6.0, kind="pressure") == pytest.approx(-1.25)
    assert A.predicted_exponent(3, 6.0, l=1) == pytest.approx(-1.25)


@pytest.mark.parametrize("q", [2.0, 3.0])
def test_predicted_exponent_needs_q_above_n(q):
    with pytest.raises(BadParameters):
        A.predicted_exponent(3, q)


def test_interpolation_exponents_sum_to_one():
    e = A.interpolation_exponents(3, 6.0)
    assert e["sum"] == pytest.approx(1.0)
    assert e["gamma"] == pytest.approx(3 / 15)


def test_interpolation_constant_matches_direct_minimisation():
    spec = WeightSpec(3, 4.0, ((0.0, 0.0, 0.0),), (0.25,))
    q, n, p = 6.0, 3, 4.0
    V = 4 * np.pi / 3
    # split bound V R^n + R^(n-p) for unit sup and unit weighted norm, minimised over R
    R = np.geomspace(1e-3, 1e3, 400001)
    direct = (V * R ** n + R ** (n - p)).min()
    assert A.interpolation_constant(spec, q) == pytest.approx(direct ** (1 / q), rel=1e-8)
    with pytest.raises(BadParameters):
        A.interpolation_constant(WeightSpec(3, 4.0, ((0, 0, 1.0), (0, 0, 2.0)), (0.125, 0.125)), q)


def test_interpolation_ratio_below_constant_for_gaussian():
    g = Grid.wholespace(6.0, 48)
    x = g.mesh()
    r2 = sum(c * c for c in x)
    f = ScalarField(g, np.exp(-r2))
    spec = WeightSpec(3, 4.0, ((0.0, 0.0, 0.0),), (0.25,))
    r = A.interpolation_ratio(f, spec, 6.0)
    assert 0 < r <= A.interpolation_constant(spec, 6.0)


def test_monotonicity_audit():
    a = A.monotonicity_audit([0.1, 0.2, 0.4], [3.0, 2.0, 1.0], whole_space=True)
    assert a["nonincreasing"] and a["constant"] == 1.0
    b = A.monotonicity_audit([0.1, 0.2], [1.0, 1.5], whole_space=False, datum_norm=1.2)
    assert b["constant"] == pytest.approx(1.5)


def test_write_report_is_deterministic(tmp_path):
    checks = [A.Check("a", -0.25, np.float64(-0.2500001), 0.1, True, {"x": np.arange(3)}),
              A.Check("b", "bounded", float("inf"), None, False)]
    A.write_report(checks, tmp_path / "r1")
    A.write_report(checks, tmp_path / "r2")
    for ext in ("json", "csv"):
        assert (tmp_path / "r1" / f"report.{ext}").read_bytes() == (tmp_path / "r2" / f"report.{ext}").read_bytes()
    doc = json.loads((tmp_path / "r1" / "report.json").read_text())
    assert doc["all_pass"] is False
    lines = (tmp_path / "r1" / "report.csv").read_text().splitlines()
    assert lines[0] == "check,predicted,measured,tolerance,pass"
    assert lines[2].endswith(",false")
