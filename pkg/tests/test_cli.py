import csv
import json
import math

import pytest

from geoasian import VolArc, smile_curve
from geoasian.calibration import QuoteStyle
from geoasian.cli import EXIT_COMPARISON, EXIT_DATA, EXIT_OK, EXIT_VALIDATION, main
from geoasian.mc import reference_full_model

PRICE_ARGS = [
    "price", "--style", "floating", "--kind", "call",
    "--spot", "100", "--t", "0", "--T", "0.45",
    "--k", "2", "--r", "0.0264", "--z0", "0.1834", "--alpha-prime", "0.20",
    "--v-eps", "-0.016",
]

MODEL_ARGS = ["--k", "2", "--r", "0.0264", "--z0", "0.1834", "--alpha-prime", "0.20"]


def run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def quotes_csv(tmp_path, name="quotes.csv"):
    """Synthetic single-cell smile at a known v_eps plus one malformed row."""
    model = reference_full_model(0.001)
    arc = VolArc(p_coef=-0.0332, q_coef=0.0332, r_coef=0.1834)
    grid = [(0.1, 0.45, m) for m in (0.97, 1.0, 1.03)]
    pts = smile_curve(arc, model, -0.016, QuoteStyle.FLOATING_CALL, grid)
    lines = ["t,T,spot,avg,strike,style,implied_vol"]
    for p in pts:
        lines.append(f"0.1,0.45,100,{100.0 * p.moneyness!r},,floating_call,{float(p.implied_vol)!r}")
    lines.append("oops,0.45,100,100,,floating_call,0.19")
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


# ------------------------------------------------------------------- price


def test_price_reports_breakdown(capsys):
    code, out, err = run(capsys, PRICE_ARGS)
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["command"] == "price"
    for key in ("inputs", "inputs_digest", "outputs", "warnings", "wall_time_s"):
        assert key in report
    outputs = report["outputs"]
    for key in ("b0", "gamma", "c0", "c1", "price_hat", "m_exponent", "sigma_bar"):
        assert key in outputs
    assert outputs["price_hat"] == pytest.approx(outputs["c0"] + outputs["c1"])
    assert outputs["sigma_bar"] == pytest.approx(0.1834)
    assert math.isfinite(outputs["price_hat"])


def test_price_digest_is_stable_and_input_sensitive(capsys):
    _, out1, _ = run(capsys, PRICE_ARGS)
    _, out2, _ = run(capsys, PRICE_ARGS)
    _, out3, _ = run(capsys, PRICE_ARGS[:-1] + ["-0.02"])
    d1 = json.loads(out1)["inputs_digest"]
    d2 = json.loads(out2)["inputs_digest"]
    d3 = json.loads(out3)["inputs_digest"]
    assert d1 == d2
    assert d1 != d3
    assert len(d1) == 64


def test_price_json_flag_is_single_line(capsys):
    code, out, _ = run(capsys, PRICE_ARGS + ["--json"])
    assert code == EXIT_OK
    assert out.count("\n") == 1
    json.loads(out)


def test_price_rejects_bad_model(capsys):
    code, out, err = run(capsys, [
        "price", "--style", "floating", "--kind", "call",
        "--spot", "100", "--t", "0", "--T", "0.45",
        "--k", "-2", "--r", "0.0264", "--z0", "0.1834", "--alpha-prime", "0.20",
    ])
    assert code == EXIT_VALIDATION
    payload = json.loads(err)
    assert payload["error"] == "ValueError"
    assert "k must be > 0" in payload["message"]


def test_price_rejects_floating_with_strike(capsys):
    code, _, err = run(capsys, PRICE_ARGS + ["--strike", "95"])
    assert code == EXIT_VALIDATION
    assert json.loads(err)["error"] == "UnsupportedContract"


def test_price_singular_window_is_a_validation_error(capsys):
    code, _, err = run(capsys, [
        "price", "--style", "floating", "--kind", "call",
        "--spot", "100", "--t", "0.55", "--T", "0.7",
        *MODEL_ARGS, "--v-eps", "-0.016",
    ])
    assert code == EXIT_VALIDATION
    assert json.loads(err)["error"] == "SingularIntegral"


# --------------------------------------------------------------- calibrate


def test_calibrate_round_trip_with_scatter(tmp_path, capsys):
    quotes = quotes_csv(tmp_path)
    scatter = tmp_path / "scatter.csv"
    code, out, _ = run(capsys, [
        "calibrate", *MODEL_ARGS, "--quotes", str(quotes),
        "--scatter-out", str(scatter),
    ])
    assert code == EXIT_OK
    report = json.loads(out)
    outputs = report["outputs"]
    assert outputs["n"] == 3
    assert len(outputs["rejects"]) == 1
    assert outputs["rejects"][0]["line"] == 5
    cells = outputs["v_eps_by_cell"]
    assert len(cells) == 1
    # quotes were generated off the OU arc itself, so the cell recovers v_eps
    assert cells[0]["v_eps"] == pytest.approx(-0.016, rel=1e-9)
    assert any("rejected" in w for w in report["warnings"])

    with open(scatter, newline="") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["x", "y"]
    assert len(rows) == 4


def test_calibrate_single_quote_is_a_data_error(tmp_path, capsys):
    path = tmp_path / "one.csv"
    path.write_text(
        "t,T,spot,avg,strike,style,implied_vol\n"
        "0.1,0.45,100,101,,floating_call,0.19\n",
        encoding="utf-8",
    )
    code, _, err = run(capsys, ["calibrate", *MODEL_ARGS, "--quotes", str(path)])
    assert code == EXIT_DATA
    assert json.loads(err)["error"] == "DegenerateDesign"


def test_calibrate_missing_file_is_a_validation_error(tmp_path, capsys):
    code, _, err = run(capsys, [
        "calibrate", *MODEL_ARGS, "--quotes", str(tmp_path / "absent.csv")
    ])
    assert code == EXIT_VALIDATION
    assert json.loads(err)["error"] == "FileNotFoundError"


def test_calibrate_bad_header_is_a_validation_error(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,c\n1,2,3\n", encoding="utf-8")
    code, _, err = run(capsys, ["calibrate", *MODEL_ARGS, "--quotes", str(path)])
    assert code == EXIT_VALIDATION
    assert json.loads(err)["error"] == "MissingColumn"


# ------------------------------------------------------------------- smile


def test_smile_stdout_csv(capsys):
    code, out, err = run(capsys, [
        "smile", *MODEL_ARGS, "--t", "0.1", "--T", "0.45",
        "--grid", "0.95:1.05:5", "--v-eps", "-0.016",
    ])
    assert code == EXIT_OK
    rows = list(csv.reader(out.splitlines()))
    assert rows[0] == ["maturity", "moneyness", "implied_vol"]
    assert len(rows) == 6
    vols = [float(r[2]) for r in rows[1:]]
    assert all(0.05 < v < 0.6 for v in vols)
    assert err == ""


def test_smile_file_output_with_report(tmp_path, capsys):
    out_path = tmp_path / "smile.csv"
    code, out, _ = run(capsys, [
        "smile", *MODEL_ARGS, "--t", "0.1", "--T", "0.45",
        "--grid", "0.9:1.1:7", "--style", "fixed_put", "--out", str(out_path),
    ])
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["outputs"] == {"csv": str(out_path), "points": 7, "skipped": 0}
    with open(out_path, newline="") as handle:
        rows = list(csv.reader(handle))
    assert len(rows) == 8


def test_smile_flags_inadmissible_points(tmp_path, capsys):
    out_path = tmp_path / "smile.csv"
    code, out, _ = run(capsys, [
        "smile", *MODEL_ARGS, "--t", "0.55", "--T", "0.7",
        "--grid", "0.98:1.02:3", "--out", str(out_path),
    ])
    assert code == EXIT_OK
    report = json.loads(out)
    assert report["outputs"]["skipped"] == 3
    assert len(report["warnings"]) == 3
    with open(out_path, newline="") as handle:
        rows = list(csv.reader(handle))
    assert all(r[2] == "" for r in rows[1:])


def test_smile_rejects_malformed_grid(capsys):
    code, _, err = run(capsys, [
        "smile", *MODEL_ARGS, "--t", "0.1", "--T", "0.45", "--grid", "nope",
    ])
    assert code == EXIT_VALIDATION
    assert json.loads(err)["error"] == "ValueError"


# ---------------------------------------------------------------- validate


def test_validate_constant_mode_small_run(capsys):
    code, out, _ = run(capsys, [
        "validate", "--paths", "600", "--steps", "24", "--seed", "7",
    ])
    assert code == EXIT_OK
    report = json.loads(out)
    comparisons = report["outputs"]["comparisons"]
    assert len(comparisons) == 4
    assert all(row["pass"] for row in comparisons)
    assert any("underpowered" in w for w in report["warnings"])
    assert "epsilon_direction" not in report["outputs"]


def test_validate_detects_coarse_discretization(capsys):
    """Two time steps bias the averaged payoff enough for the 3-sigma gate."""
    code, out, _ = run(capsys, [
        "validate", "--paths", "100000", "--steps", "2", "--seed", "3",
    ])
    assert code == EXIT_COMPARISON
    report = json.loads(out)
    assert any(not row["pass"] for row in report["outputs"]["comparisons"])


def test_validate_full_mode_reports_direction(capsys):
    code, out, _ = run(capsys, [
        "validate", "--mode", "full", "--paths", "20000", "--steps", "60",
        "--seed", "11", "--T", "0.45",
    ])
    assert code == EXIT_OK
    report = json.loads(out)
    direction = report["outputs"]["epsilon_direction"]
    assert direction["pass"] is True
    assert direction["big"]["epsilon"] == 0.1
    assert direction["small"]["epsilon"] == 0.001
    for side in ("big", "small"):
        for key in ("c0", "mc", "se", "abs_dev"):
            assert key in direction[side]
