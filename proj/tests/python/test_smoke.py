import math

import pytest

elliptica = pytest.importorskip("elliptica")


def test_catalog_has_all_ids():
    ids = {e["id"] for e in elliptica.catalog()}
    assert ids == {
        "solve", "eig", "freq", "threeball", "doubling", "harnack",
        "perron", "parametrix", "carleman", "cauchy", "observability",
    }
    assert all(e["reference"] for e in elliptica.catalog())


def test_freq_experiment():
    report, files, seconds = elliptica.run({"experiment": "freq", "u": "harmonic:deg3", "center": [0, 0]})
    assert report["schema"] == "1"
    assert report["passed"]
    assert all(abs(n - 3) <= 1e-6 for n in report["results"]["N"])
    assert files["frequency.csv"].startswith("r,")
    assert seconds >= 0


def test_unknown_experiment_raises():
    with pytest.raises(elliptica.EllipticaError) as info:
        elliptica.run({"experiment": "nope"})
    assert info.value.code == "ConfigParseError"
    assert "cauchy" in str(info.value)


def test_kernels():
    lam = elliptica.dirichlet_eigenvalues([0.0], [1.0], 1 / 128, 3)
    for k, v in enumerate(lam, start=1):
        assert v == pytest.approx((k * math.pi) ** 2, rel=1e-3)
    assert elliptica.mean_value_residual("re:4", [0.1, 0.2], 0.5, "ball") <= 1e-10
    prof = elliptica.frequency("re:2", [0.0, 0.0], [0.1, 0.5, 1.0])
    assert prof["N"] == pytest.approx([2, 2, 2], abs=1e-8)
    d = [10.0 ** (-1 - 0.5 * i) for i in range(7)]
    fit = elliptica.stability_fit(d, [2 * elliptica.phi_beta(s, 0.5) for s in d])
    assert fit["beta"] == pytest.approx(0.5, abs=0.05)
    assert fit["log_beats_power"]
