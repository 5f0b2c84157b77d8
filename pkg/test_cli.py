#!/usr/bin/env python3
"""
Tests for the fiveprime command line
"""
import json
import os

import pytest

from fiveprime_cli import EXIT_FAILED, EXIT_OK, EXIT_USAGE, RunConfig, _threads, build_parser, dispatch
from errors import InvalidParamsError
from decomp import block_coefficients, coefficient_norm_ratio
from expsum import GridSpec, fourth_moment, sup_modulus
from params import SystemParams, derive_scales
from primes import chebyshev_weight, sieve


@pytest.fixture(autouse=True)
def clean_environment(monkeypatch):
    for name in ("FIVEPRIME_CONFIG", "FIVEPRIME_CACHE_DIR", "FIVEPRIME_THREADS"):
        monkeypatch.delenv(name, raising=False)


def run_json(capsys, argv):
    status = dispatch(argv)
    return status, json.loads(capsys.readouterr().out)


def test_exppair_word(capsys):
    assert dispatch(["exppair", "--word", "BAAB"]) == EXIT_OK
    captured = capsys.readouterr()
    assert json.loads(captured.out) == {
        "pair": {"word": "BAAB", "kappa_num": 2, "kappa_den": 7, "lam_num": 4, "lam_den": 7}
    }
    assert "kappa=2/7 lam=4/7" in captured.err


def test_exppair_word_written_with_manifest(tmp_path, capsys):
    out = str(tmp_path / "pair.json")
    assert dispatch(["exppair", "--word", "BA^2B", "--out", out]) == EXIT_OK
    assert capsys.readouterr().out == ""
    with open(out) as f:
        assert json.load(f)["pair"]["lam_den"] == 7
    with open(out + ".manifest.json") as f:
        assert json.load(f)["command"] == "exppair"


def test_usage_errors(capsys):
    assert dispatch([]) == EXIT_USAGE
    assert dispatch(["no-such-command"]) == EXIT_USAGE
    assert dispatch(["exppair"]) == EXIT_USAGE
    assert dispatch(["exppair", "--word", "ABC"]) == EXIT_USAGE
    assert dispatch(["primes"]) == EXIT_USAGE
    assert dispatch(["search", "--eps1", "1", "--eps2", "1"]) == EXIT_USAGE
    assert "❌" in capsys.readouterr().err


def test_help_exits_cleanly():
    assert dispatch(["--help"]) == EXIT_OK


def test_primes(capsys):
    status, document = run_json(capsys, ["primes", "--X", "100", "--lambda-cut", "0.1", "--psi"])
    assert status == EXIT_OK
    assert document["count"] == 21
    assert (document["first"], document["last"]) == (11, 97)
    assert document["chebyshev_weight"] == pytest.approx(chebyshev_weight(sieve(100, 0.1)))
    assert document["psi"] == pytest.approx(94.045, abs=1e-3)


def test_expsum_point(capsys):
    status, document = run_json(capsys, ["expsum", "--X", "100", "--x", "0", "--y", "0"])
    assert status == EXIT_OK
    assert document["re"] == pytest.approx(chebyshev_weight(sieve(100, 0.1)))


def test_expsum_fourth_moment(tmp_path, capsys):
    argv = ["expsum", "--X", "40", "--lambda-cut", "0.5", "--fourth-moment", "--eps1", "1", "--eps2", "0.5"]
    status, document = run_json(capsys, argv)
    assert status == EXIT_OK
    assert document["primes"] == 4
    assert document["fourth_moment"] == pytest.approx(fourth_moment(sieve(40, 0.5), 1.03, 1.01, 1.0, 0.5), rel=1e-12)

    out = str(tmp_path / "moment.json")
    assert dispatch(argv + ["--out", out]) == EXIT_OK
    with open(out) as f:
        assert json.load(f)["fourth_moment"] == pytest.approx(document["fourth_moment"], rel=1e-12)
    with open(out + ".manifest.json") as f:
        assert "fourth_moment" in json.load(f)["timings"]
    assert dispatch(["expsum", "--X", "40", "--fourth-moment", "--eps1", "1"]) == EXIT_USAGE


def test_expsum_sup_matches_the_library(capsys):
    status, document = run_json(capsys, ["expsum", "--X", "100", "--log-power", "0", "--sup"])
    assert status == EXIT_OK
    params = SystemParams.for_experiment(1.03, 1.01, 100.0, 1.028)
    scales = derive_scales(params)
    spec = GridSpec(-2 * scales.K1, 2 * scales.K1, 81, -2 * scales.K2, 2 * scales.K2, 81)
    report = sup_modulus(sieve(100.0, 0.1), 1.03, 1.01, scales, spec)
    assert document["X"] == 100.0
    assert (document["nx"], document["ny"]) == (81, 81)
    assert document["points"] == report.points > 0
    assert document["max_modulus"] == pytest.approx(report.max_modulus, rel=1e-12)
    assert document["ratio"] == pytest.approx(report.ratio, rel=1e-12)


def test_expsum_grid_writes_csv_and_manifest(tmp_path, capsys):
    out = str(tmp_path / "grid.csv")
    assert dispatch(["expsum", "--X", "100", "--grid", "-0.01,0.01,5,-0.01,0.01,4", "--out", out]) == EXIT_OK
    assert os.path.exists(out)
    assert os.path.exists(out + ".json")
    with open(out + ".manifest.json") as f:
        manifest = json.load(f)
    assert manifest["command"] == "expsum"
    assert manifest["outputs"] == [out]


def test_regions(capsys):
    status, document = run_json(capsys, ["regions", "--X", "400", "--log-power", "0", "--x", "0", "--y", "0"])
    assert status == EXIT_OK
    assert document["point"]["region"] == "Omega1"
    assert document["scales"]["tau1"] < document["scales"]["K1"]


def test_hb_verify(capsys):
    status, document = run_json(capsys, ["hb-verify", "--k", "2", "--nmax", "1000"])
    assert status == EXIT_OK
    assert document["max_error"] <= 1e-9
    assert dispatch(["hb-verify", "--k", "2", "--nmax", "1000", "--tolerance", "-1"]) == EXIT_FAILED
    assert dispatch(["hb-verify", "--k", "5", "--nmax", "1000"]) == EXIT_USAGE


def test_hb_verify_reports_block_norms(capsys):
    status, document = run_json(capsys, ["hb-verify", "--k", "2", "--nmax", "500", "--coefficients", "256"])
    assert status == EXIT_OK
    rows = document["coefficients"]
    assert [row["j"] for row in rows] == [1, 2]
    z = 512.0 ** 0.5
    for row in rows:
        coeffs = block_coefficients(256.0, z, row["j"])
        assert row["norm_ratio"] == pytest.approx(coefficient_norm_ratio(coeffs, 256.0, (row["j"] ** 2 - 1) / 2.0))
        assert 0.0 <= row["norm_ratio"] <= 1.0
    assert dispatch(["hb-verify", "--k", "2", "--nmax", "500", "--coefficients", "1"]) == EXIT_USAGE


def test_classify(capsys):
    status, document = run_json(capsys, ["classify", "--X", "1e12", "--count", "20", "--seed", "3"])
    assert status == EXIT_OK
    assert all(document["checks"].values())
    assert sum(document["cases"].values()) == 20


def test_search_writes_solutions(tmp_path, capsys):
    out = str(tmp_path / "solutions.csv")
    argv = ["search", "--X", "60", "--lambda-cut", "0.5", "--log-power", "0",
            "--eps1", "3", "--eps2", "3", "--certify", "--out", out]
    status, document = run_json(capsys, argv)
    assert status == EXIT_OK
    assert document["mode"] == "indicator"
    assert document["certification"]["all_inside"]
    with open(out) as f:
        lines = f.read().splitlines()
    assert lines[0] == "p1,p2,p3,p4,p5,r1,r2,weight,multiplicity"
    assert len(lines) == document["solutions"] + 1
    assert os.path.exists(out + ".manifest.json")


def test_search_methods_agree(capsys):
    base = ["search", "--X", "60", "--lambda-cut", "0.5", "--log-power", "0", "--eps1", "3", "--eps2", "3"]
    _, mitm = run_json(capsys, base)
    _, exhaustive = run_json(capsys, base + ["--method", "exhaustive"])
    _, smoothed = run_json(capsys, base + ["--method", "smoothed"])
    assert mitm["raw_count"] == exhaustive["raw_count"]
    assert mitm["weighted_count"] == exhaustive["weighted_count"]
    assert smoothed["raw_count"] is None


def test_integrate_report(capsys):
    argv = ["integrate", "--X", "40", "--lambda-cut", "0.5", "--eps1", "2", "--eps2", "2", "--log-power", "0", "--report"]
    status, document = run_json(capsys, argv)
    assert status == EXIT_OK
    assert set(document) >= {"D1", "D2", "D3", "D"}
    assert document["D"]["method"] == "separable"


def test_scaling(capsys):
    status, document = run_json(capsys, ["scaling", "--Xs", "100,150", "--eps", "1.0"])
    assert status == EXIT_OK
    assert [row["X"] for row in document["rows"]] == [100.0, 150.0]
    assert document["expected_slope"] == pytest.approx(2.96)


def test_verify_runs_selected_cases(tmp_path, capsys):
    out = str(tmp_path / "acceptance.json")
    assert dispatch(["verify", "--only", "exppair_word", "--out", out]) == EXIT_OK
    with open(out) as f:
        results = json.load(f)
    assert [r["case_name"] for r in results] == ["exppair_word"]
    assert results[0]["passed"]


def test_config_file_and_flags(tmp_path, capsys):
    path = tmp_path / "params.json"
    path.write_text(json.dumps({"log_power": 0, "lambda_cut": 0.2}))
    status, document = run_json(capsys, ["regions", "--config", str(path), "--X", "300"])
    assert status == EXIT_OK
    assert document["scales"]["eps1"] < 1.0


def test_run_config_validation_and_digest():
    config = RunConfig(command="primes", params=None, options={"X": 100.0}, threads=2, seed=1)
    assert config.validate() is config
    assert config.digest() == RunConfig(command="primes", params=None, options={"X": 100.0}, threads=2, seed=1).digest()
    assert config.digest() != RunConfig(command="primes", params=None, options={"X": 200.0}, threads=2, seed=1).digest()
    with pytest.raises(InvalidParamsError):
        RunConfig(command="primes", params=None, threads=0).validate()


def test_threads_from_environment(monkeypatch):
    args = build_parser().parse_args(["primes", "--X", "100"])
    assert _threads(args) == 1
    monkeypatch.setenv("FIVEPRIME_THREADS", "3")
    assert _threads(args) == 3
    assert _threads(build_parser().parse_args(["primes", "--threads", "2"])) == 2


def test_bad_threads_environment_is_a_usage_error(monkeypatch, capsys):
    monkeypatch.setenv("FIVEPRIME_THREADS", "two")
    with pytest.raises(InvalidParamsError):
        _threads(build_parser().parse_args(["primes", "--X", "100"]))
    assert dispatch(["primes", "--X", "100"]) == EXIT_USAGE
    assert "FIVEPRIME_THREADS" in capsys.readouterr().err
    monkeypatch.setenv("FIVEPRIME_THREADS", "0")
    assert dispatch(["primes", "--X", "100"]) == EXIT_USAGE


def test_picked_targets_carry_the_support_bound(capsys):
    status, document = run_json(capsys, ["regions", "--X", "40", "--lambda-cut", "0.5", "--log-power", "0"])
    assert status == EXIT_OK
    assert document["scales"]["X"] == 40.0
    assert dispatch(["regions", "--X", "40", "--lambda-cut", "0.5", "--ratio", "1.0"]) == EXIT_USAGE
