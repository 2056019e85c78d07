import json
import subprocess
import sys
from decimal import Decimal

import pytest

from stabcred import _cli, _utils, _utils_tests

STABCRED = _utils.get_project_root("stabcred.py")
BASELINE = str(_utils.get_project_root("scenarios", "baseline.json"))


@pytest.fixture()
def baseline_file(tmp_path):
    return str(_utils_tests.write_scenario(tmp_path.joinpath("baseline.json"), _utils_tests.baseline_scenario()))


def run_json(capsys, *argv):
    rc = _cli.run_cli([*argv, "--format", "json", "--quiet"])
    out = capsys.readouterr().out
    return rc, json.loads(out)


def test_underwrite(capsys, baseline_file):
    """underwrite sizes the isolated market at X = 0.5 of the pool's counterassets"""
    rc, payload = run_json(capsys, "underwrite", "--scenario", baseline_file)
    assert rc == 0

    market = payload["credit_lines"][0]
    assert market["credit_line"]["size"] == "500000"
    assert market["credit_line"]["size_fraction_x"] == "0.5"
    assert market["verdict"]["satisfied"] is True
    assert market["verdict"]["binding_utilization"] == "0.8"
    assert len(payload["caveats"]) == 2


def test_swap_quote(capsys, baseline_file):
    """swap-quote reproduces the 400,000 stablecoin sale into the 1M/1M pool"""
    rc, payload = run_json(capsys, "swap-quote", "--scenario", baseline_file, "--amount", "400000")
    assert rc == 0
    assert abs(Decimal(payload["amount_out"]) - 398_132) / 398_132 < Decimal("0.001")
    assert abs(Decimal(payload["effective_price"]) - Decimal("0.995")) < Decimal("0.001")
    assert abs(Decimal(payload["post_fraction_stable"]) - Decimal("0.7")) < Decimal("0.01")
    assert payload["direction"] == "stable-in"


def test_yield_and_absorb(capsys, baseline_file):
    """yield and absorb report the baseline yield and the liquidity the pool absorbs"""
    rc, payload = run_json(capsys, "yield", "--scenario", baseline_file)
    assert rc == 0
    assert payload["markets"][0]["endogenous_yield"] == "0.066"

    rc, payload = run_json(capsys, "absorb", "--scenario", baseline_file)
    assert rc == 0
    assert payload["absorbable"] == "400000"
    assert abs(Decimal(payload["b2s_credit_size"]) - Decimal("6666666.67")) < 1

    rc, payload = run_json(capsys, "absorb", "--scenario", baseline_file, "--target-rate", "0.15")
    assert payload["absorbable"] == "500000"


def test_risk_matrix_without_scenario(capsys):
    """risk-matrix prints the built-in matrix and register without a scenario"""
    rc, payload = run_json(capsys, "risk-matrix")
    assert rc == 0
    assert len(payload["matrix"]) == 9
    assert [r["risk"] for r in payload["register"]][-1] == "Unbacked Circulation Risk"

    rc = _cli.run_cli(["risk-matrix", "--quiet"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "Liquidation Risk" in out
    assert "C3 red" in out


def test_simulate_writes_artifacts(capsys, tmp_path):
    """simulate --out writes the report and the event log"""
    scenario_file = _utils_tests.write_scenario(tmp_path.joinpath("s.json"), _utils_tests.baseline_scenario(horizon=5))
    out_dir = tmp_path.joinpath("out")

    rc = _cli.run_cli(["simulate", "--scenario", str(scenario_file), "--seed", "7", "--out", str(out_dir), "--quiet"])
    capsys.readouterr()
    assert rc == 0

    report = json.loads(out_dir.joinpath("report.json").read_text(encoding="utf-8"))
    assert report["provenance"]["seed"] == 7
    assert len(report["snapshots"]) == 5
    assert out_dir.joinpath("events.jsonl").exists()


def test_simulate_table(capsys, tmp_path):
    """simulate renders a table and a status line by default"""
    scenario_file = _utils_tests.write_scenario(tmp_path.joinpath("s.json"), _utils_tests.baseline_scenario(horizon=3))
    rc = _cli.run_cli(["simulate", "--scenario", str(scenario_file)])
    captured = capsys.readouterr()
    assert rc == 0
    assert "peak_circulating_unbacked" in captured.out
    assert "OK" in captured.err


def test_monte_carlo(capsys, tmp_path):
    """monte-carlo summarizes peak quantiles and writes the summary to --out"""
    scenario_file = _utils_tests.write_scenario(tmp_path.joinpath("s.json"), _utils_tests.baseline_scenario(horizon=5))
    out_dir = tmp_path.joinpath("mc")
    rc, payload = run_json(
        capsys, "monte-carlo", "--scenario", str(scenario_file), "--paths", "8", "--processes", "1", "--out", str(out_dir)
    )
    assert rc == 0
    assert payload["paths"] == 8
    assert set(payload["peak_undercollateralization"]["quantiles"]) == {"0.5", "0.9", "0.95", "0.99"}
    assert json.loads(out_dir.joinpath("monte_carlo.json").read_text(encoding="utf-8")) == payload


def test_exit_codes(capsys, tmp_path, baseline_file):
    """Usage and scenario errors exit with 2, engine errors with 1"""
    # no subcommand
    assert _cli.run_cli([]) == 2
    # unknown option
    assert _cli.run_cli(["underwrite", "--scenario", baseline_file, "--bogus"]) == 2
    # missing scenario file
    assert _cli.run_cli(["underwrite", "--scenario", str(tmp_path.joinpath("missing.json"))]) == 2

    # invalid scenario
    bad = _utils_tests.baseline_scenario()
    bad["external_markets"][0]["rate_params"]["u_optimal"] = "1.2"
    bad_file = _utils_tests.write_scenario(tmp_path.joinpath("bad.json"), bad)
    assert _cli.run_cli(["underwrite", "--scenario", str(bad_file)]) == 2
    assert "external_markets[0].rate_params.u_optimal" in capsys.readouterr().err

    # engine error
    assert _cli.run_cli(["monte-carlo", "--scenario", baseline_file, "--paths", "0", "--quiet"]) == 1
    assert "OutOfRange" in capsys.readouterr().err


@pytest.mark.parametrize("argv", [
    ["swap-quote", "--amount", "NaN"],
    ["swap-quote", "--amount", "Infinity"],
    ["swap-quote", "--amount", "-1"],
    ["swap-quote", "--amount", "lots"],
    ["absorb", "--target-rate", "NaN"],
    ["absorb", "--target-rate", "-0.1"],
    ["simulate", "--seed", "-1"],
    ["monte-carlo", "--paths", "-5"],
    ["monte-carlo", "--processes", "0"],
])
def test_invalid_numbers_are_usage_errors(capsys, baseline_file, argv):
    """Non-finite, negative and malformed numeric options are rejected by the parser with exit code 2"""
    assert _cli.run_cli([*argv, "--scenario", baseline_file, "--quiet"]) == 2
    assert "argument" in capsys.readouterr().err


def test_processes_is_a_common_option(capsys, baseline_file):
    """Every subcommand accepts --processes"""
    assert _cli.run_cli(["underwrite", "--scenario", baseline_file, "--processes", "2", "--quiet"]) == 0
    assert _cli.run_cli(["risk-matrix", "--processes", "2", "--quiet"]) == 0
    capsys.readouterr()


def test_simulate_a_line_larger_than_the_pool(capsys, tmp_path):
    """A credit line that saturates the controller is an unsatisfied verdict, not an engine error"""
    x = _utils_tests.baseline_scenario(horizon=3)
    x["external_markets"][0]["credit_line"] = "1500000"
    scenario_file = _utils_tests.write_scenario(tmp_path.joinpath("s.json"), x)

    rc, payload = run_json(capsys, "simulate", "--scenario", str(scenario_file))
    assert rc == 0
    assert payload["verdicts"][0]["satisfied"] is False
    assert payload["verdicts"][0]["min_margin"] == "-Infinity"


def test_examples_from_the_command_line():
    """The launcher script prints the usage examples"""
    o = subprocess.run([sys.executable, STABCRED, "--examples"], capture_output=True)
    assert o.returncode == 0
    assert b"stabcred underwrite" in o.stdout


def test_bundled_scenario_from_the_command_line():
    """The launcher script underwrites the bundled baseline scenario"""
    o = subprocess.run(
        [sys.executable, STABCRED, "underwrite", "--scenario", BASELINE, "--format", "json", "--quiet"],
        capture_output=True
    )
    assert o.returncode == 0
    assert json.loads(o.stdout)["credit_lines"][0]["credit_line"]["size"] == "500000"
