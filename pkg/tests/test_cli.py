import json

import pytest

from godds import _jsonio
from godds.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_example_reproduces_published_values(capsys):
    code, out = run_cli(capsys, "example")
    assert code == 0
    doc = json.loads(out)
    ors = [row["or"] for row in doc["table"]]
    rrs = [row["rr"] for row in doc["table"]]
    assert ors == pytest.approx([1 / 45, 1 / 45], abs=1e-12)
    assert rrs == pytest.approx([5 / 27, 7 / 117], abs=1e-12)
    assert doc["effects"]["marginal_rr"] == pytest.approx(140 / 1053, abs=1e-12)
    assert doc["effects"]["population_or"] == pytest.approx(32 / 945, abs=1e-12)
    assert doc["effects"]["geometric_or"] == pytest.approx(1 / 45, abs=1e-12)
    assert doc["residuals"]["geometric_residual"] < 1e-12
    assert "manifest" in doc and doc["manifest"]["subcommand"] == "example"


def test_simulate_estimate_round_trip(capsys, tmp_path):
    out_csv = tmp_path / "sim.csv"
    code, out = run_cli(
        capsys, "simulate", "--dgp", "het3", "--n", "3000", "--omega", "0.5",
        "--seed", "12", "--out", str(out_csv),
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["n"] == 3000 and doc["scheme"] == "outcome_dependent"
    assert out_csv.exists()
    header = out_csv.read_text().splitlines()[0]
    assert header == "y,a,x1,x2,x3"

    code, out = run_cli(
        capsys, "estimate", "--data", str(out_csv),
        "--rho-min", "0.35", "--rho-max", "0.5", "--rho-points", "7",
    )
    assert code == 0
    doc = json.loads(out)
    assert set(doc["psi"]) == {"a0y0", "a0y1", "a1y0", "a1y1"}
    assert len(doc["curve"]) == 7
    assert doc["bound"]["l"] <= doc["bound"]["u"]
    assert 0.0 < doc["omega_hat"] < 1.0
    for pt in doc["curve"]:
        assert pt["ci_lo"] <= pt["gamma_hat"] <= pt["ci_hi"]


def test_estimate_single_point_curve(capsys, tmp_path):
    out_csv = tmp_path / "sim.csv"
    run_cli(
        capsys, "simulate", "--dgp", "worked_example", "--n", "1000",
        "--omega", "0.5", "--seed", "1", "--out", str(out_csv),
    )
    code, out = run_cli(
        capsys, "estimate", "--data", str(out_csv),
        "--rho-min", "0.4", "--rho-max", "0.4",
    )
    assert code == 0
    doc = json.loads(out)
    assert len(doc["curve"]) == 1
    assert doc["curve"][0]["rho"] == 0.4


def test_estimate_oracle_requires_truth_flags(capsys, tmp_path):
    out_csv = tmp_path / "sim.csv"
    run_cli(
        capsys, "simulate", "--dgp", "het3", "--n", "500", "--omega", "0.5",
        "--seed", "2", "--out", str(out_csv),
    )
    with pytest.raises(SystemExit, match="oracle"):
        main([
            "estimate", "--data", str(out_csv), "--rho-min", "0.4",
            "--rho-max", "0.5", "--nuisance", "oracle",
        ])


def test_estimate_random_sampling_path(capsys, tmp_path):
    out_csv = tmp_path / "rs.csv"
    run_cli(
        capsys, "simulate", "--dgp", "het3", "--scheme", "random",
        "--n", "4000", "--seed", "3", "--out", str(out_csv),
    )
    code, out = run_cli(
        capsys, "estimate", "--data", str(out_csv), "--sampling", "random",
        "--rho-min", "0.4", "--rho-max", "0.5",
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["gamma_hat"] > 0
    assert doc["ci"]["lo"] <= doc["gamma_hat"] <= doc["ci"]["hi"]


def test_estimate_perturbed_nuisance(capsys, tmp_path):
    out_csv = tmp_path / "sim.csv"
    run_cli(
        capsys, "simulate", "--dgp", "het3", "--n", "1000", "--omega", "0.5",
        "--seed", "6", "--out", str(out_csv),
    )
    code, out = run_cli(
        capsys, "estimate", "--data", str(out_csv), "--rho-min", "0.4",
        "--rho-max", "0.45", "--rho-points", "2", "--nuisance", "perturbed",
        "--dgp", "het3", "--omega", "0.5",
        "--perturb-target", "mu1", "--perturb-amplitude", "0.4",
    )
    assert code == 0
    doc = json.loads(out)
    assert len(doc["curve"]) == 2

    with pytest.raises(SystemExit, match="perturb-target"):
        main([
            "estimate", "--data", str(out_csv), "--rho-min", "0.4",
            "--rho-max", "0.45", "--nuisance", "perturbed",
            "--dgp", "het3", "--omega", "0.5",
        ])


def test_bound_subcommand(capsys, tmp_path):
    out_csv = tmp_path / "sim.csv"
    run_cli(
        capsys, "simulate", "--dgp", "het3", "--n", "2000", "--omega", "0.5",
        "--seed", "4", "--out", str(out_csv),
    )
    code, out = run_cli(
        capsys, "bound", "--data", str(out_csv), "--rho-min", "0.35",
        "--rho-max", "0.5",
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["l_alpha"] <= doc["gamma_min"] <= doc["gamma_max"] <= doc["u_alpha"]
    assert len(doc["endpoint_cis"]) == 2


def test_bound_requires_rho_range(capsys, tmp_path):
    out_csv = tmp_path / "sim.csv"
    run_cli(
        capsys, "simulate", "--dgp", "het3", "--n", "500", "--omega", "0.5",
        "--seed", "5", "--out", str(out_csv),
    )
    with pytest.raises(SystemExit):
        main(["bound", "--data", str(out_csv)])


def test_oracle_subcommand_constant_curve(capsys, tmp_path):
    config = tmp_path / "we.json"
    config.write_text(
        '{"strata": ['
        '{"x": "F", "p_x": "1/2", "pi1": "1/2", "nu1": "1/6", "nu0": "9/10"},'
        '{"x": "M", "p_x": "1/2", "pi1": "1/2", "nu1": "1/26", "nu0": "9/14"}]}'
    )
    code, out = run_cli(
        capsys, "oracle", "--dgp", str(config), "--omega", "0.5",
        "--rho-min", "0.2", "--rho-max", "0.8", "--rho-points", "5",
    )
    assert code == 0
    doc = json.loads(out)
    for pt in doc["curve"]:
        assert pt["geometric"] == pytest.approx(1 / 45, abs=1e-12)
        assert pt["sigma2"] > 0
    assert doc["estimands"]["population_or"] == pytest.approx(32 / 945, abs=1e-12)
    assert str(config) in doc["manifest"]["input_digests"]


def test_unknown_flag_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["example", "--bogus"])
    assert exc.value.code != 0
    err = capsys.readouterr().err
    assert "usage" in err


def test_missing_file_returns_error_code(capsys):
    code = main(["estimate", "--data", "/nonexistent.csv", "--rho-min", "0.4", "--rho-max", "0.5"])
    assert code == 2


def test_stdout_is_single_json_doc(capsys):
    code, out = run_cli(capsys, "example")
    doc = json.loads(out)  # would raise on trailing garbage
    assert isinstance(doc, dict)


def test_float_serialization_round_trips():
    vals = [1 / 3, 1e-17, 123456.789, 0.1 + 0.2, 45.0, 2.0**-52]
    text = _jsonio.dumps({"v": vals})
    back = json.loads(text)["v"]
    assert back == vals


def test_study_subcommand_files_and_exit_code(capsys, tmp_path):
    cfg = {
        "scenario": "het3",
        "sample_sizes": [400, 800],
        "replications": 8,
        "nuisance_kind": "oracle",
        "master_seed": 3,
        "bands": {"log_rmse_slope": [-5.0, 5.0]},
    }
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(cfg))
    out_dir = tmp_path / "out"
    code, out = run_cli(
        capsys, "rate", "--config", str(cfg_path), "--out-dir", str(out_dir)
    )
    assert code == 0
    doc = json.loads(out)
    assert doc["report"]["all_passed"] is True
    assert (out_dir / "report.json").exists()
    assert (out_dir / "report.csv").exists()
    on_disk = json.loads((out_dir / "report.json").read_text())
    assert on_disk == doc["report"]

    cfg["bands"] = {"log_rmse_slope": [0.9, 1.0]}  # impossible band
    cfg_path.write_text(json.dumps(cfg))
    code, out = run_cli(capsys, "rate", "--config", str(cfg_path))
    assert code == 1


def test_study_subcommand_rejects_mismatched_study(capsys, tmp_path):
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps({"study": "rate", "scenario": "het3"}))
    with pytest.raises(SystemExit):
        main(["coverage", "--config", str(cfg_path)])
