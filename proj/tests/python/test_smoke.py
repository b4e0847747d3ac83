import math

import pytest

import thintube

J01 = 2.404825557695773

CATALOG = {
    "geometry": {"profile": "2 - s^2", "curvature": "0.3*(1 - s^2)", "torsion": "0.5"},
    "section": {"shape": "disk", "radius": 1.0, "n": 48},
    "eps": [0.1, 0.05, 0.025, 0.0125],
    "j_max": 1,
}


def test_expression():
    assert thintube.evaluate("2 - s^2", 1.0) == 1.0
    assert thintube.evaluate("2 - s^2/(1+s^2)", 0.0) == 2.0
    assert thintube.evaluate("0.3*exp(-s^2)", 10.0) < 1e-40
    with pytest.raises(thintube.ExpressionError):
        thintube.evaluate("2 - q", 0.0)


def test_section_disk():
    r = thintube.section({"section": {"shape": "disk", "n": 96}})
    assert abs(r["lambda0"] - J01**2) / J01**2 < 0.01
    assert r["C3"] ** 2 <= r["C1"] * r["C2"]


def test_weo():
    mu = thintube.weo_spectrum(J01**2, 2.0, 2)
    assert mu[0] == pytest.approx(math.sqrt(2 * J01**2 / 8))
    assert mu[2] == pytest.approx(5 * mu[0])


def test_sweep_limits():
    report = thintube.sweep(CATALOG)
    assert report["failures"] == []
    assert len(report["rows"]) == 4 * 2
    for limit in report["limits"]:
        assert limit["deviation"] < 0.02
    csv = thintube.report_csv(report)
    assert csv.splitlines()[0] == "epsilon,j,scaled_eigenvalue,mu_j,abs_error,grid_n,window_L"
    assert len(csv.splitlines()) == 1 + 8


def test_effective_spectrum_above_c():
    values, c = thintube.effective_spectrum(CATALOG, 0.05, 3)
    assert len(values) == 3
    assert values[0] >= c


def test_constant_profile_rejected():
    with pytest.raises(thintube.HypothesisError):
        thintube.sweep({**CATALOG, "geometry": {"profile": "2"}})


def test_unknown_key_rejected():
    with pytest.raises(thintube.ConfigError):
        thintube.sweep({"geometri": {}})


def test_tube3d_straight_vanishes():
    doc = {
        "eps": [0.2, 0.1, 0.05, 0.025],
        "j_max": 0,
        "tube3d": {"n_s": 24, "section_n": 16, "coarse_n_s": 16, "coarse_section_n": 16},
    }
    assert thintube.tube3d(doc, "form")["all_zero"]
