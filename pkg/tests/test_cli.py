"""End-to-end tests of the command line interface and its file formats."""

import json
import math
import subprocess
import sys

import numpy as np
import pytest

from qec_sense.cli import (
    ComparisonReport,
    RunConfig,
    available_recipes,
    build_parser,
    load_recipe,
    main,
    read_artifact,
    render_artifact,
    resolve_config,
)


def run_cli(tmp_path, *argv, fmt="csv", expect=0):
    out = tmp_path / f"artifact.{fmt}"
    code = main([*argv, "--out", str(out), "--format", fmt])
    assert code == expect
    return read_artifact(out) if expect == 0 else None


# --------------------------------------------------------------------------
# configuration and report types


def test_run_config_rejects_bad_fields():
    good = dict(command="ramsey", params={}, grid={}, options={})
    with pytest.raises(ValueError, match="command"):
        RunConfig(**{**good, "command": "nope"})
    with pytest.raises(ValueError, match="format"):
        RunConfig(**good, format="xml")
    with pytest.raises(ValueError, match="seed"):
        RunConfig(**good, seed=-1)
    with pytest.raises(ValueError, match="workers"):
        RunConfig(**good, workers=0)


def test_comparison_report_invariants():
    with pytest.raises(ValueError, match="exceeds"):
        ComparisonReport("a", "b", rmse=2.0, max_abs=1.0, n_points=3)
    with pytest.raises(ValueError, match="point"):
        ComparisonReport("a", "b", rmse=0.0, max_abs=0.0, n_points=0)
    with pytest.raises(ValueError, match="nonnegative"):
        ComparisonReport("a", "b", rmse=-1.0, max_abs=1.0, n_points=3)
    rep = ComparisonReport.from_curves("a", "b", [1.0, 2.0], [1.0, 2.5])
    assert rep.rmse == pytest.approx(0.5 / math.sqrt(2.0))
    assert rep.max_abs == pytest.approx(0.5)
    rel = ComparisonReport.from_curves("a", "b", [2.0, 4.0], [2.2, 4.4], relative=True)
    assert rel.max_abs == pytest.approx(0.1)


def test_render_rejects_unknown_format():
    with pytest.raises(ValueError, match="format"):
        render_artifact([{}], ["x"], [[1.0]], "xml")


def test_infinities_survive_both_formats(tmp_path):
    for fmt in ("csv", "json"):
        text = render_artifact([{"summary": {}}], ["x"], [[math.inf, 1.0]], fmt)
        path = tmp_path / f"inf.{fmt}"
        path.write_text(text)
        back = read_artifact(path)
        assert math.isinf(back.rows[0, 0]) and back.rows[0, 1] == 1.0


# --------------------------------------------------------------------------
# artifact format invariants


def test_csv_round_trip_is_byte_identical(tmp_path):
    out = tmp_path / "a.csv"
    assert main(["ramsey", "--tau-max", "5", "--n-tau", "40", "--out", str(out)]) == 0
    original = out.read_text()
    a = read_artifact(out)
    assert render_artifact(a.metadata, a.columns, a.rows, a.format) == original


def test_json_round_trip_is_byte_identical(tmp_path):
    out = tmp_path / "a.json"
    args = ["ramsey", "--tau-max", "5", "--n-tau", "40", "--format", "json", "--out", str(out)]
    assert main(args) == 0
    original = out.read_text()
    a = read_artifact(out)
    assert a.format == "json"
    assert render_artifact(a.metadata, a.columns, a.rows, a.format) == original


def test_metadata_embeds_resolved_config(tmp_path):
    a = run_cli(tmp_path, "ramsey", "--tau-max", "5", "--n-tau", "40", "--seed", "9")
    config, schema, summary = a.metadata
    assert config["command"] == "ramsey"
    assert config["params"] == {"omega": 1.0, "gamma_err": 0.1, "gamma_qec": 5.0}
    assert config["grid"] == {"tau_max": 5.0, "n_tau": 40}
    assert config["seed"] == 9
    assert schema["columns"] == a.columns
    assert "omega = 1" in schema["units"]
    assert "summary" in summary


def test_stdout_is_the_default_sink(tmp_path, capsys):
    config = tmp_path / "tiny.json"
    config.write_text(json.dumps({"grid": {"n_gamma_err": 2, "n_gamma_qec": 5}}))
    assert main(["validity", "--config", str(config)]) == 0
    captured = capsys.readouterr().out
    assert captured.startswith("# {")
    assert len(captured.strip().splitlines()) == 3 + 1 + 10  # metadata, header, rows


def test_seed_resolution_order(tmp_path, monkeypatch):
    monkeypatch.setenv("QEC_SENSE_SEED", "123")
    a = run_cli(tmp_path, "sensitivity", "--n-tau", "50")
    assert a.metadata[0]["seed"] == 123
    b = run_cli(tmp_path, "sensitivity", "--n-tau", "50", "--seed", "5")
    assert b.metadata[0]["seed"] == 5


def test_config_file_overridden_by_flags(tmp_path):
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({"params": {"gamma_err": 0.15}, "grid": {"n_tau": 30}}))
    a = run_cli(tmp_path, "ramsey", "--config", str(config), "--tau-max", "4", "--gamma-err", "0.2")
    assert a.metadata[0]["params"]["gamma_err"] == 0.2
    assert a.metadata[0]["grid"] == {"tau_max": 4.0, "n_tau": 30}


def test_unknown_config_keys_are_rejected(tmp_path, capsys):
    config = tmp_path / "cfg.json"
    config.write_text(json.dumps({"params": {"bogus": 1.0}}))
    assert main(["ramsey", "--config", str(config)]) == 1
    assert "bogus" in capsys.readouterr().err


def test_invalid_parameters_exit_nonzero(capsys):
    assert main(["ramsey", "--gamma-err", "1.5"]) == 1
    assert "error:" in capsys.readouterr().err


def test_unknown_flag_exits_with_usage_error():
    with pytest.raises(SystemExit) as excinfo:
        main(["ramsey", "--frequency", "2"])
    assert excinfo.value.code == 2


def test_console_script_prints_help():
    proc = subprocess.run(
        ["qec-sense", "--help"], capture_output=True, text=True, timeout=60
    )
    assert proc.returncode == 0
    for name in ("ramsey", "spectrum", "sensitivity", "fit", "validity", "compare", "discrete"):
        assert name in proc.stdout


# --------------------------------------------------------------------------
# recipes


def test_every_recipe_resolves_to_a_run_config():
    parser = build_parser()
    names = available_recipes()
    assert names == [
        "fig1b", "fig1c", "fig3", "figS1", "figS2", "figS3", "figS4", "figS5", "figS6", "figS7",
    ]
    for name in names:
        command = load_recipe(name)["command"]
        cfg = resolve_config(parser.parse_args([command, "--recipe", name]))
        assert cfg.command == command


def test_recipe_command_mismatch_is_rejected(capsys):
    assert main(["spectrum", "--recipe", "fig1b"]) == 1
    assert "ramsey" in capsys.readouterr().err


def test_recipe_runs_with_flag_overrides(tmp_path):
    a = run_cli(tmp_path, "ramsey", "--recipe", "fig1b", "--tau-max", "4", "--n-tau", "30")
    assert a.metadata[0]["params"]["gamma_qec"] == 5.0
    assert a.metadata[0]["grid"] == {"tau_max": 4.0, "n_tau": 30}
    assert a.rows.shape == (30, 6)


# --------------------------------------------------------------------------
# command outputs


def test_ramsey_default_grid_meets_the_agreement_bound(tmp_path):
    a = run_cli(tmp_path, "ramsey")
    assert a.columns == ["tau", "ideal", "uncorrected", "corrected_sim", "corrected_analytic", "conjectured"]
    assert a.rows.shape == (2000, 6)
    taus = a.rows[:, 0]
    assert np.allclose(a.rows[:, 1], np.cos(3.0 * taus), atol=1e-12)
    report = a.metadata[2]["summary"]["corrected_sim_vs_analytic"]
    assert report["rmse"] < 0.002
    assert report["rmse"] <= report["max_abs"]


def test_spectrum_peak_summary(tmp_path):
    a = run_cli(tmp_path, "spectrum")
    assert a.columns == ["freq", "ideal", "uncorrected", "corrected", "conjectured"]
    summary = a.metadata[2]["summary"]
    peaks = summary["peaks"]
    corrected = peaks["corrected"]["frequency"]
    ideal = peaks["ideal"]["frequency"]
    sigma = peaks["ideal"]["uncertainty"]
    # corrected tone sits visibly below the bare frequency, within 1% of
    # both the first-order and the order-3 predictions
    assert corrected < ideal
    assert abs(corrected - summary["first_order_prediction"]) < 0.01 * summary["first_order_prediction"]
    assert abs(corrected - summary["order3_prediction"]) < 0.01 * summary["order3_prediction"]
    assert abs(ideal - 3.0) < sigma
    # the uncorrected peak is pulled back onto the bare tone; it shows no
    # shift anywhere near the corrected one
    assert abs(peaks["uncorrected"]["frequency"] - ideal) < 2.0 * sigma
    assert ideal - corrected > 10.0 * sigma


def test_sensitivity_optimum_bookkeeping(tmp_path):
    a = run_cli(tmp_path, "sensitivity")
    assert a.columns == ["tau", "naive", "proposed", "sql"]
    summary = a.metadata[2]["summary"]
    assert summary["k_opt"] == 3
    assert summary["tau_opt"] == pytest.approx(math.pi / 2.0, rel=1e-12)
    assert summary["proposed_matches_tau_opt"] is True
    assert summary["naive_matches_tau_opt"] is False
    taus, naive, proposed, sql = a.rows.T
    assert np.all(naive >= sql * (1.0 - 1e-9))
    assert np.all(proposed >= sql * (1.0 - 1e-9))


def test_fit_small_run_reproduces_the_violation_pattern(tmp_path):
    a = run_cli(
        tmp_path, "fit",
        "--tau-values", "1.6055,2.676",
        "--n-reps", "100", "--n-shots", "2000", "--grid-size", "100",
        "--seed", "3", "--workers", "1",
    )
    assert a.rows.shape == (2, 9)
    violated_conj = a.rows[:, 3]
    violated_prop = a.rows[:, 7]
    assert np.all(violated_conj == 1.0)
    assert np.all(violated_prop == 0.0)
    assert np.all(a.rows[:, 4] > 10.0 * a.rows[:, 8])  # bias statistic gap
    summary = a.metadata[2]["summary"]
    assert summary["violation_fraction_conjectured"] == 1.0
    assert summary["violation_fraction_proposed"] == 0.0


def test_fit_output_is_independent_of_worker_count(tmp_path):
    args = [
        "fit", "--tau-values", "1.6055", "--n-reps", "100", "--n-shots", "2000",
        "--grid-size", "80", "--seed", "11",
    ]
    one = tmp_path / "w1.csv"
    two = tmp_path / "w2.csv"
    assert main([*args, "--workers", "1", "--out", str(one)]) == 0
    assert main([*args, "--workers", "2", "--out", str(two)]) == 0
    assert one.read_bytes() == two.read_bytes()


def test_validity_grid_examples(tmp_path):
    a = run_cli(tmp_path, "validity")
    assert a.columns == ["gamma_err", "gamma_qec", "margin", "valid"]
    rows = a.rows

    def lookup(gamma_err, gamma_qec):
        mask = np.isclose(rows[:, 0], gamma_err) & np.isclose(rows[:, 1], gamma_qec)
        assert mask.any()
        return rows[mask][0]

    assert lookup(0.1, 5.0)[3] == 1.0
    assert lookup(0.1, 0.1)[3] == 0.0
    for gamma_err in np.unique(rows[:, 0]):
        if gamma_err <= 0.3:
            margins = rows[np.isclose(rows[:, 0], gamma_err)][:, 2]
            assert int(np.sum(np.diff(np.sign(margins)) != 0)) == 1


def test_compare_simulation_stays_below_the_stated_bound(tmp_path):
    a = run_cli(
        tmp_path, "compare", "--comparison", "sim_full",
        "--gamma-qec-values", "1,5", "--tau-max", "20", "--n-tau", "400", "--workers", "1",
    )
    assert a.columns == ["gamma_qec", "rmse", "max_abs"]
    assert np.all(a.rows[:, 1] < 0.002)
    assert np.all(a.rows[:, 1] <= a.rows[:, 2])


def test_compare_signal_crosses_one_percent(tmp_path):
    a = run_cli(
        tmp_path, "compare", "--comparison", "signal",
        "--gamma-qec-values", "5,30.9,200", "--workers", "1",
    )
    rmse = a.rows[:, 1]
    assert rmse[0] > 0.01
    assert rmse[1] < 0.01
    assert rmse[2] < rmse[1]
    assert a.metadata[2]["summary"]["first_gamma_qec_below_one_percent"] == pytest.approx(30.9)


def test_compare_reduced_form_improves_with_order(tmp_path):
    kwargs = ["--gamma-qec-values", "10,50", "--n-tau", "600", "--workers", "1"]
    first = run_cli(tmp_path, "compare", "--comparison", "full_reduced", "--order", "1", *kwargs)
    third = run_cli(tmp_path, "compare", "--comparison", "full_reduced", "--order", "3", *kwargs)
    assert np.all(third.rows[:, 1] < first.rows[:, 1])
    assert third.rows[-1, 1] < 0.005


def test_compare_frequency_deviation_is_small_in_validity_range(tmp_path):
    a = run_cli(
        tmp_path, "compare", "--comparison", "frequency",
        "--gamma-qec-values", "5,16.6", "--workers", "1",
    )
    assert a.columns == ["gamma_qec", "omega_eff_measured", "omega_eff_approx", "deviation"]
    assert np.all(a.rows[:, 3] < 0.01)
    assert np.all((a.rows[:, 1] > 0.95) & (a.rows[:, 1] < 1.0))
    assert a.metadata[2]["summary"]["max_deviation"] < 0.01


def test_discrete_without_noise_reduces_to_the_ideal_signal(tmp_path):
    a = run_cli(tmp_path, "discrete", "--noise-model", "optimal", "--p", "0", "--cycles", "50")
    assert a.columns == ["tau", "ideal", "uncorrected", "corrected", "unbiased_reconstruction"]
    assert np.allclose(a.rows[:, 3], a.rows[:, 1], atol=1e-12)
    assert np.allclose(a.rows[:, 4], a.rows[:, 1], atol=1e-12)


def test_discrete_reconstruction_keeps_a_flat_envelope(tmp_path):
    a = run_cli(tmp_path, "discrete", "--noise-model", "optimal", "--p", "0.02", "--cycles", "100")
    corrected = a.rows[:, 3]
    recon = a.rows[:, 4]
    half = corrected.size // 2

    def rms(v):
        return math.sqrt(float(np.mean(v**2)))

    # the corrected trace loses amplitude; the mean-count reconstruction
    # holds it steady to one percent
    assert rms(corrected[half:]) / rms(corrected[:half]) < 0.85
    assert abs(rms(recon[half:]) / rms(recon[:half]) - 1.0) < 0.01


def test_discrete_realistic_model_decays(tmp_path):
    a = run_cli(tmp_path, "discrete", "--p", "0.02", "--cycles", "120", "--delta-tau", "0.2")
    assert a.metadata[0]["options"]["noise_model"] == "realistic"
    corrected = a.rows[:, 3]
    recon = a.rows[:, 4]
    half = corrected.size // 2
    assert np.sqrt(np.mean(corrected[half:] ** 2)) < np.sqrt(np.mean(corrected[:half] ** 2))
    assert np.all(np.abs(recon) <= 1.0 + 1e-6)
