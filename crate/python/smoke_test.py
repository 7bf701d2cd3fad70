"""Smoke test for the dilute_bose_py extension; run with pytest or directly."""

import json
import math
import os
import tempfile

import pytest

import dilute_bose_py as db


def test_scattering_length():
    assert db.scattering_length("hard-core", radius=0.7) == 0.7
    soft = db.scattering_length("soft-sphere", kappa=1.0, radius=1.0)
    assert 0.0 < soft < 1.0


def test_fourier_hat_at_zero_is_volume_integral():
    assert math.isclose(db.fourier_hat(0.0), 4.0 * math.pi / 3.0, rel_tol=1e-12)


def test_hard_core_eigenvalue_leading_term():
    a, n, ell = 1.0, 10_000, 1e-2
    lam = db.hard_core_eigenvalue(a, n, ell)
    assert math.isclose(lam, 3.0 * a / (n * ell**3), rel_tol=2e-2)


def test_pair_ground_energy():
    energy, formula = db.fock_ground_energy([5.0], [3.0], n_max=64)
    assert abs(energy + 1.0) < 1e-6
    assert formula == pytest.approx(-1.0, abs=1e-14)


def test_structured_results():
    series = db.born_series(1000, 0.5, kappa=0.5, samples=20_000)
    assert series["terms"][0]["order"] == 0
    b = db.bound(1.0, 10_000)
    assert b["total"] == b["leading"] + b["finite_size"] + b["correction"]
    e = db.e_lambda(64)
    assert len(e["sums"]["cutoff_sequence"]) == 64
    mc = db.jastrow_energy(2, 0.1, 0.2, steps=2000, chains=2)
    assert mc["std_error"] > 0.0


def test_errors_map_to_python_exceptions():
    with pytest.raises(ValueError):
        db.hard_core_eigenvalue(-1.0, 10, 0.1)
    with pytest.raises(ValueError):
        db.fourier_hat(1.0, kappa=-1.0)


def test_cli_round_trip():
    with tempfile.TemporaryDirectory() as out:
        code = db.run_cli(["--quiet", "--out-dir", out, "bound", "--regime", "hc", "--a", "1", "--n", "10000"])
        assert code == 0
        with open(os.path.join(out, "bound.json")) as fh:
            data = json.load(fh)
        assert data["schema"] == "dilute-bose/bound/v1"
        assert db.run_cli(["bound", "--bogus"]) == 1


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
