import json
from pathlib import Path

import pytest

from mcwaterfall.cli import main
from mcwaterfall.config import load_config, parse_config, toy_deal_document
from mcwaterfall.exceptions import ConfigurationError


@pytest.fixture(scope="module")
def config_path(tmp_path_factory):
    doc = toy_deal_document()
    doc["run"] = {"seed": 42, "paths": 400, "mode": "exact", "simulate_paths": 100,
                  "eval_dates": [0.0, 2.0, 5.0]}
    doc["calibration"].update({"population": 8, "max_generations": 2, "paths": 60})
    path = tmp_path_factory.mktemp("cfg") / "deal.json"
    path.write_text(json.dumps(doc))
    return str(path)


def read(path: Path):
    return path.read_bytes()


def test_config_round_trip(config_path):
    cfg = load_config(config_path)
    assert cfg.deal.senior.notional == 135.0
    assert cfg.pool.n_periods == 20
    assert cfg.seed == 42
    assert cfg.calibration_targets is not None


def test_config_missing_field_named():
    doc = toy_deal_document()
    del doc["pool"]["asset_types"][0]["lambda_rate"]
    with pytest.raises(ConfigurationError, match="lambda_rate"):
        parse_config(doc)


def test_config_missing_file():
    with pytest.raises(ConfigurationError, match="not found"):
        load_config("/nonexistent/deal.json")


def test_simulate_shapes_and_determinism(config_path, tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["simulate", config_path, "--out", str(out1)]) == 0
    assert main(["simulate", config_path, "--out", str(out2)]) == 0
    lines = (out1 / "pool_paths.csv").read_text().splitlines()
    assert lines[0] == "path,period,time,amount"
    assert len(lines) == 1 + 100 * 20
    for name in ("pool_paths.csv", "base_scenario.csv", "pool_paths.png", "total_cashflow.png"):
        assert read(out1 / name) == read(out2 / name), name


def test_price_artifacts_and_schema(config_path, tmp_path):
    out = tmp_path / "price"
    assert main(["price", config_path, "--out", str(out)]) == 0
    payload = json.loads((out / "price_report.json").read_text())
    for tranche in ("senior", "mezzanine", "junior", "lrl"):
        block = payload[tranche]
        assert set(block) == {"price", "se", "gradients", "dv01", "bv01"}
    hist = (out / "price_hist_senior.csv").read_text().splitlines()
    assert hist[0] == "bin_lo,bin_hi,count"
    counts = sum(int(r.split(",")[2]) for r in hist[1:])
    assert counts == 400


def test_price_deterministic_across_worker_counts(config_path, tmp_path):
    out1, out2 = tmp_path / "w1", tmp_path / "w2"
    assert main(["price", config_path, "--out", str(out1), "--mode", "smooth",
                 "--paths", "150", "--workers", "1"]) == 0
    assert main(["price", config_path, "--out", str(out2), "--mode", "smooth",
                 "--paths", "150", "--workers", "4"]) == 0
    assert read(out1 / "price_report.json") == read(out2 / "price_report.json")


def test_sensitivities_schema(config_path, tmp_path):
    out = tmp_path / "sens"
    assert main(["sensitivities", config_path, "--out", str(out), "--paths", "200"]) == 0
    payload = json.loads((out / "sensitivity_report.json").read_text())
    grads = payload["senior"]["gradients"]
    assert set(grads) == {"sigma", "p", "alpha", "rho", "w"}
    assert payload["senior"]["dv01"] is not None
    assert payload["senior"]["bv01"] is not None


def test_timelapse_artifacts(config_path, tmp_path):
    out = tmp_path / "tl"
    assert main(["timelapse", config_path, "--out", str(out), "--paths", "120"]) == 0
    rows = (out / "timelapse.csv").read_text().splitlines()
    assert rows[0] == "date,tranche,price"
    assert len(rows) == 1 + 3 * 4  # three dates, four tranches


def test_metrics_artifacts(config_path, tmp_path):
    out = tmp_path / "met"
    assert main(["metrics", config_path, "--out", str(out)]) == 0
    payload = json.loads((out / "metrics.json").read_text())
    for tranche, block in payload.items():
        assert {"irr", "z_spread", "annuity", "asw"} <= set(block)
        # observed prices default to the null scenario
        assert block["asw"] == pytest.approx(0.0, abs=1e-12)


def test_calibrate_artifacts(config_path, tmp_path):
    out = tmp_path / "cal"
    assert main(["calibrate", config_path, "--out", str(out)]) == 0
    payload = json.loads((out / "calibration.json").read_text())
    assert {"params", "residuals", "max_error", "generations", "converged", "warning"} <= set(payload)
    assert set(payload["params"]) == {"sigma", "mu", "p", "alpha", "rho", "w"}


def test_rerun_byte_identical(config_path, tmp_path):
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    for out in (out1, out2):
        assert main(["price", config_path, "--out", str(out), "--paths", "200"]) == 0
        assert main(["metrics", config_path, "--out", str(out)]) == 0
        assert main(["timelapse", config_path, "--out", str(out), "--paths", "80"]) == 0
    for name in ("price_report.json", "metrics.json", "timelapse.csv",
                 "price_hist_senior.csv", "price_hist_mezzanine.png", "timelapse.png"):
        assert read(out1 / name) == read(out2 / name), name


def test_user_error_exit_code(tmp_path, capsys):
    assert main(["price", str(tmp_path / "missing.json")]) == 1
    err = capsys.readouterr().err
    assert json.loads(err.strip())["error"]


def test_internal_error_exit_code(config_path, tmp_path, monkeypatch, capsys):
    import mcwaterfall.cli as cli_mod

    def boom(*a, **k):
        raise RuntimeError("induced failure")

    monkeypatch.setitem(cli_mod.COMMANDS, "price", boom)
    assert main(["price", config_path, "--out", str(tmp_path)]) == 2
    err = capsys.readouterr().err
    assert "induced failure" in json.loads(err.strip())["error"]


def test_outdir_env_var(config_path, tmp_path, monkeypatch):
    target = tmp_path / "envout"
    monkeypatch.setenv("MCWATERFALL_OUTDIR", str(target))
    assert main(["metrics", config_path]) == 0
    assert (target / "metrics.json").exists()
