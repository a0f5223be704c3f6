"""Command line interface: reproducible sweeps written as CSV or JSON.

Every artifact starts with a JSON-lines metadata block ('#'-prefixed in
CSV) that embeds the fully resolved run configuration, the seed, the
column schema and a per-command summary, so each file is self
describing.  Re-reading an artifact with ``read_artifact`` and passing
it back through ``render_artifact`` reproduces the file byte for byte.

All quantities are dimensionless, expressed in units of the qubit
frequency (omega = 1 unless overridden).  Numeric CSV cells carry 17
significant digits, which round-trips IEEE doubles exactly.
"""

from __future__ import annotations

import argparse
import copy
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .closedform import (
    EffectiveParams,
    conjectured_trace,
    effective_params,
    expectation_reduced,
    full_trace,
    uncorrected_trace,
    validity_check,
)
from .discrete import CycleSpec, discrete_trace, reconstruction_trace
from .inference import (
    crb_audit,
    min_detectable_signal,
    optimal_sensing_time,
    run_fit_experiment,
)
from .lindblad import ExpectationTrace, IntegrationError, SensorParams, ramsey_trace
from .spectral import WINDOWS, effective_frequency_sweep, spectrum

COMMANDS = ("ramsey", "spectrum", "sensitivity", "fit", "validity", "compare", "discrete")
FORMATS = ("csv", "json")
COMPARISONS = ("sim_full", "full_reduced", "signal", "frequency")
NOISE_MODELS = ("optimal", "realistic")
UNITS = "omega = 1: all rates, times and frequencies are in units of the qubit frequency"
SEED_ENV = "QEC_SENSE_SEED"


# --------------------------------------------------------------------------
# run configuration and comparison report types


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved description of one CLI run.

    ``params``, ``grid`` and ``options`` hold plain JSON-compatible
    values; ``workers`` and ``output_path`` are execution details and
    are deliberately kept out of the artifact metadata so that output
    bytes depend only on the computation inputs.
    """

    command: str
    params: dict
    grid: dict
    options: dict
    seed: int = 0
    output_path: Optional[str] = None
    format: str = "csv"
    workers: int = 1

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}; expected one of {COMMANDS}")
        if self.format not in FORMATS:
            raise ValueError(f"format must be one of {FORMATS}, got {self.format!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit an unsigned 64-bit integer")
        if int(self.workers) < 1:
            raise ValueError("workers must be a positive integer")

    def as_metadata(self) -> dict:
        return {
            "command": self.command,
            "params": dict(self.params),
            "grid": dict(self.grid),
            "options": dict(self.options),
            "seed": int(self.seed),
            "format": self.format,
        }

    def sensor_params(self) -> SensorParams:
        return SensorParams(
            omega=float(self.params["omega"]),
            gamma_err=float(self.params["gamma_err"]),
            gamma_qec=float(self.params.get("gamma_qec", 0.0)),
        )


@dataclass(frozen=True)
class ComparisonReport:
    """Aggregate deviation between two curves sampled on a common grid."""

    model_a: str
    model_b: str
    rmse: float
    max_abs: float
    n_points: int

    def __post_init__(self) -> None:
        if self.n_points < 1:
            raise ValueError("a comparison needs at least one point")
        if self.rmse < 0.0 or self.max_abs < 0.0:
            raise ValueError("rmse and max_abs must be nonnegative")
        if self.rmse > self.max_abs:
            raise ValueError(
                f"rmse = {self.rmse} exceeds the maximum absolute deviation {self.max_abs}"
            )

    @classmethod
    def from_curves(cls, model_a, model_b, a, b, relative=False) -> "ComparisonReport":
        """Compare curve b against curve a; ``relative`` divides by a."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        d = (b - a) / a if relative else b - a
        return cls(
            model_a=str(model_a),
            model_b=str(model_b),
            rmse=float(np.sqrt(np.mean(d * d))),
            max_abs=float(np.max(np.abs(d))),
            n_points=int(d.size),
        )

    def as_dict(self) -> dict:
        return {
            "model_a": self.model_a,
            "model_b": self.model_b,
            "rmse": self.rmse,
            "max_abs": self.max_abs,
            "n_points": self.n_points,
        }


# --------------------------------------------------------------------------
# artifact rendering and parsing


@dataclass(frozen=True)
class Artifact:
    """Parsed content of one output file."""

    metadata: list
    columns: list
    rows: np.ndarray
    format: str


def render_artifact(metadata: Sequence[dict], columns: Sequence[str], rows, fmt: str) -> str:
    """Serialize one run to text; the inverse of ``read_artifact``."""
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {fmt!r}")
    table = [[float(x) for x in row] for row in np.atleast_2d(np.asarray(rows, dtype=float))]
    if fmt == "json":
        doc = {"metadata": list(metadata), "columns": list(columns), "rows": table}
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    for entry in metadata:
        buf.write("# " + json.dumps(entry) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in table:
        writer.writerow(f"{x:.17g}" for x in row)
    return buf.getvalue()


def read_artifact(path) -> Artifact:
    """Parse a CSV or JSON artifact produced by this CLI."""
    text = Path(path).read_text()
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        rows = np.asarray(doc["rows"], dtype=float)
        return Artifact(metadata=doc["metadata"], columns=doc["columns"], rows=rows, format="json")
    lines = text.splitlines()
    metadata = []
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        metadata.append(json.loads(lines[i].lstrip("#")))
        i += 1
    reader = csv.reader(lines[i:])
    columns = next(reader)
    rows = np.asarray([[float(cell) for cell in row] for row in reader if row], dtype=float)
    return Artifact(metadata=metadata, columns=columns, rows=rows, format="csv")


def write_artifact(cfg: RunConfig, columns, rows, summary: dict) -> str:
    text = render_artifact(
        [cfg.as_metadata(), {"columns": list(columns), "units": UNITS}, {"summary": summary}],
        columns,
        rows,
        cfg.format,
    )
    if cfg.output_path is None:
        sys.stdout.write(text)
    else:
        with open(cfg.output_path, "w", newline="") as handle:
            handle.write(text)
    return text


# --------------------------------------------------------------------------
# worker fan-out


def _fan_out(fn, argtuples, workers: int) -> list:
    """Apply fn over argument tuples, preserving input order.

    Falls back to serial execution when process pools are unavailable;
    results are seed-deterministic either way.
    """
    n = min(int(workers), len(argtuples))
    if n <= 1:
        return [fn(*args) for args in argtuples]
    try:
        with ProcessPoolExecutor(max_workers=n) as pool:
            return list(pool.map(fn, *zip(*argtuples)))
    except (OSError, PermissionError):
        return [fn(*args) for args in argtuples]


# --------------------------------------------------------------------------
# command implementations; each returns (columns, rows, summary)


def _tau_axis(grid: dict) -> np.ndarray:
    return np.linspace(float(grid.get("tau_min", 0.0)), float(grid["tau_max"]), int(grid["n_tau"]))


def cmd_ramsey(cfg: RunConfig):
    """Time traces of the logical Ramsey signal for every model."""
    p = cfg.sensor_params()
    taus = _tau_axis(cfg.grid)
    sim = ramsey_trace(p, taus)
    analytic = full_trace(p, taus)
    bare = SensorParams(omega=p.omega, gamma_err=p.gamma_err, gamma_qec=0.0)
    rows = np.column_stack(
        [
            taus,
            np.cos(3.0 * p.omega * taus),
            uncorrected_trace(bare, taus).values,
            sim.values,
            analytic.values,
            conjectured_trace(p, taus).values,
        ]
    )
    report = ComparisonReport.from_curves("corrected_sim", "corrected_analytic", sim.values, analytic.values)
    columns = ["tau", "ideal", "uncorrected", "corrected_sim", "corrected_analytic", "conjectured"]
    return columns, rows, {"corrected_sim_vs_analytic": report.as_dict()}


def cmd_spectrum(cfg: RunConfig):
    """Magnitude spectra of the model traces plus sub-bin peak estimates."""
    p = cfg.sensor_params()
    taus = _tau_axis(cfg.grid)
    bare = SensorParams(omega=p.omega, gamma_err=p.gamma_err, gamma_qec=0.0)
    traces = {
        "ideal": ExpectationTrace(
            taus=taus, values=np.cos(3.0 * p.omega * taus), provenance="analytic_reduced"
        ),
        "uncorrected": uncorrected_trace(bare, taus),
        "corrected": full_trace(p, taus),
        "conjectured": conjectured_trace(p, taus),
    }
    pad = int(cfg.options["zero_pad_factor"])
    window = str(cfg.options["window"])
    spectra = {name: spectrum(tr, zero_pad_factor=pad, window=window) for name, tr in traces.items()}
    freqs = spectra["ideal"].freqs
    rows = np.column_stack([freqs] + [spectra[name].magnitudes for name in traces])
    peaks = {
        name: {"frequency": s.peak_freq, "uncertainty": s.peak_uncertainty}
        for name, s in spectra.items()
    }
    summary = {
        "peaks": peaks,
        "first_order_prediction": 3.0 * effective_params(p, 1).omega_eff,
        "order3_prediction": 3.0 * effective_params(p, 3).omega_eff,
    }
    return ["freq", "ideal", "uncorrected", "corrected", "conjectured"], rows, summary


def cmd_sensitivity(cfg: RunConfig):
    """Minimum detectable signal against sensing time for both readings.

    The naive curve evaluates the standard formula at the effective
    parameters a model-unaware experimenter would estimate; the proposed
    curve uses the true parameters and divides by the frequency
    transfer derivative.  Both are floored by the standard quantum
    limit for three entangled qubits.
    """
    p = cfg.sensor_params()
    taus = _tau_axis(cfg.grid)
    n_shots = int(cfg.options["n_shots"])
    order = int(cfg.options["order"])
    estimated = effective_params(p, order)
    if "omega_est" in cfg.options or "gamma_est" in cfg.options:
        estimated = EffectiveParams(
            omega_eff=float(cfg.options.get("omega_est", estimated.omega_eff)),
            gamma_eff=float(cfg.options.get("gamma_est", estimated.gamma_eff)),
            order=order,
        )
    aware = EffectiveParams(omega_eff=p.omega, gamma_eff=p.gamma_err, order=1)
    naive = np.asarray(min_detectable_signal("naive", p, estimated, taus, n_shots))
    proposed = np.asarray(min_detectable_signal("proposed_reduced", p, aware, taus, n_shots))
    sql = 1.0 / np.sqrt(9.0 * n_shots * taus**2)
    tau_opt, k_opt = optimal_sensing_time(p.omega, p.gamma_err)
    step = taus[1] - taus[0]
    argmin_naive = float(taus[int(np.argmin(naive))])
    argmin_proposed = float(taus[int(np.argmin(proposed))])
    summary = {
        "tau_opt": tau_opt,
        "k_opt": k_opt,
        "argmin_naive": argmin_naive,
        "argmin_proposed": argmin_proposed,
        "naive_matches_tau_opt": bool(abs(argmin_naive - tau_opt) <= step),
        "proposed_matches_tau_opt": bool(abs(argmin_proposed - tau_opt) <= step),
        "estimated_slots": {"omega_eff": estimated.omega_eff, "gamma_eff": estimated.gamma_eff},
    }
    rows = np.column_stack([taus, naive, proposed, sql])
    return ["tau", "naive", "proposed", "sql"], rows, summary


def _fit_point(p, model, tau, n_shots, n_reps, seed, grid_size):
    reps = run_fit_experiment(
        p, model, tau, n_shots=n_shots, n_reps=n_reps, seed=seed, grid_size=grid_size
    )
    audit = crb_audit(reps, model, p, tau, n_shots)
    return audit.total_variance, audit.crb_rhs, float(audit.violated), float(reps[0].bias_stat)


def cmd_fit(cfg: RunConfig):
    """Repeated two-parameter fits and their Cramer-Rao audit per tau.

    The same synthetic data, generated from the exact dynamics, are fit
    once with the conjectured family and once with the full one; each
    row carries both audits side by side.
    """
    p = cfg.sensor_params()
    tau_values = [float(t) for t in cfg.grid["tau_values"]]
    n_shots = int(cfg.options["n_shots"])
    n_reps = int(cfg.options["n_reps"])
    grid_size = int(cfg.options["grid_size"])
    models = ("conjectured", "proposed_full")
    tasks = []
    for i, tau in enumerate(tau_values):
        for j, model in enumerate(models):
            task_seed = (int(cfg.seed) + 1_000_003 * (2 * i + j)) % 2**64
            tasks.append((p, model, tau, n_shots, n_reps, task_seed, grid_size))
    results = _fan_out(_fit_point, tasks, cfg.workers)
    rows = np.empty((len(tau_values), 9))
    for i, tau in enumerate(tau_values):
        rows[i, 0] = tau
        rows[i, 1:5] = results[2 * i]
        rows[i, 5:9] = results[2 * i + 1]
    columns = [
        "tau",
        "var_total_conjectured",
        "crb_rhs_conjectured",
        "violated_conjectured",
        "bias_stat_conjectured",
        "var_total_proposed",
        "crb_rhs_proposed",
        "violated_proposed",
        "bias_stat_proposed",
    ]
    summary = {
        "models": list(models),
        "data_model": str(cfg.options["data_model"]),
        "violation_fraction_conjectured": float(np.mean(rows[:, 3])),
        "violation_fraction_proposed": float(np.mean(rows[:, 7])),
    }
    return columns, rows, summary


def cmd_validity(cfg: RunConfig):
    """Expansion-convergence margin over the (gamma_err, gamma_qec) plane."""
    g = cfg.grid
    omega = float(cfg.params["omega"])
    errs = np.linspace(float(g["gamma_err_min"]), float(g["gamma_err_max"]), int(g["n_gamma_err"]))
    qecs = np.linspace(float(g["gamma_qec_min"]), float(g["gamma_qec_max"]), int(g["n_gamma_qec"]))
    rows = np.empty((errs.size * qecs.size, 4))
    k = 0
    for gamma_err in errs:
        for gamma_qec in qecs:
            p = SensorParams(omega=omega, gamma_err=float(gamma_err), gamma_qec=float(gamma_qec))
            valid, margin = validity_check(p)
            rows[k] = (gamma_err, gamma_qec, margin, float(valid))
            k += 1
    summary = {"valid_fraction": float(np.mean(rows[:, 3]))}
    return ["gamma_err", "gamma_qec", "margin", "valid"], rows, summary


def _compare_point(comparison, omega, gamma_err, gamma_qec, grid, options):
    p = SensorParams(omega=omega, gamma_err=gamma_err, gamma_qec=gamma_qec)
    order = int(options["order"])
    if comparison == "sim_full":
        taus = _tau_axis(grid)
        report = ComparisonReport.from_curves(
            "simulated", "analytic_full", ramsey_trace(p, taus).values, full_trace(p, taus).values
        )
        return (gamma_qec, report.rmse, report.max_abs), report
    if comparison == "full_reduced":
        taus = _tau_axis(grid)
        report = ComparisonReport.from_curves(
            "analytic_full",
            f"reduced_order_{order}",
            full_trace(p, taus).values,
            expectation_reduced(effective_params(p, order), taus),
        )
        return (gamma_qec, report.rmse, report.max_abs), report
    if comparison == "signal":
        # quadrature sensing times of the effective tone, where both
        # curves are near their envelopes and away from divergent nodes
        ep = effective_params(p, order)
        taus = (np.arange(int(options["n_quadratures"])) + 0.5) * np.pi / (3.0 * ep.omega_eff)
        n_shots = int(options["n_shots"])
        full = min_detectable_signal("proposed_full", p, ep, taus, n_shots)
        reduced = min_detectable_signal(
            "proposed_reduced", p, ep, taus, n_shots, include_decay_derivative=True
        )
        report = ComparisonReport.from_curves(
            "signal_full", f"signal_reduced_order_{order}", full, reduced, relative=True
        )
        return (gamma_qec, report.rmse, report.max_abs), report
    if comparison == "frequency":
        target = float(options["target_relative_uncertainty"])
        ((_, measured),) = effective_frequency_sweep(p, [gamma_qec], target_relative_uncertainty=target)
        approx = effective_params(p, order).omega_eff
        report = ComparisonReport(
            model_a="spectral_peak",
            model_b=f"omega_eff_order_{order}",
            rmse=abs(measured - approx),
            max_abs=abs(measured - approx),
            n_points=1,
        )
        return (gamma_qec, measured, approx, abs(measured - approx)), report
    raise ValueError(f"unknown comparison {comparison!r}; expected one of {COMPARISONS}")


def cmd_compare(cfg: RunConfig):
    """Deviation-vs-correction-rate curves between model pairs."""
    comparison = str(cfg.options["comparison"])
    if comparison not in COMPARISONS:
        raise ValueError(f"unknown comparison {comparison!r}; expected one of {COMPARISONS}")
    omega = float(cfg.params["omega"])
    gamma_err = float(cfg.params["gamma_err"])
    sweep = [float(g) for g in cfg.grid["gamma_qec_values"]]
    tasks = [(comparison, omega, gamma_err, g, cfg.grid, cfg.options) for g in sweep]
    results = _fan_out(_compare_point, tasks, cfg.workers)
    rows = np.asarray([row for row, _ in results])
    reports = [report for _, report in results]
    worst = max(reports, key=lambda r: r.rmse)
    summary = {
        "comparison": comparison,
        "model_a": reports[0].model_a,
        "model_b": reports[0].model_b,
        "worst": worst.as_dict(),
    }
    if comparison == "signal":
        below = [g for g, rep in zip(sweep, reports) if rep.rmse < 0.01]
        summary["first_gamma_qec_below_one_percent"] = min(below) if below else None
    if comparison == "frequency":
        summary["max_deviation"] = float(np.max(rows[:, 3]))
        columns = ["gamma_qec", "omega_eff_measured", "omega_eff_approx", "deviation"]
        return columns, rows, summary
    return ["gamma_qec", "rmse", "max_abs"], rows, summary


def cmd_discrete(cfg: RunConfig):
    """Cycle-resolved traces of the discrete channel model."""
    omega = float(cfg.params["omega"])
    p_flip = float(cfg.params["p"])
    cycles = int(cfg.grid["cycles"])
    delta_tau = float(cfg.grid["delta_tau"])
    noise_model = str(cfg.options["noise_model"])
    if noise_model == "optimal":
        spec = CycleSpec.optimal(cycles, delta_tau, p_noise=3.0 * p_flip)
    elif noise_model == "realistic":
        spec = CycleSpec.realistic(cycles, delta_tau, p_flip)
    else:
        raise ValueError(f"unknown noise model {noise_model!r}; expected one of {NOISE_MODELS}")
    sensor = SensorParams(omega=omega, gamma_err=0.0, gamma_qec=0.0)
    corrected = discrete_trace(spec, sensor, corrected=True)
    taus = corrected.taus
    rows = np.column_stack(
        [
            taus,
            np.cos(3.0 * omega * taus),
            discrete_trace(spec, sensor, corrected=False).values,
            corrected.values,
            reconstruction_trace(spec, sensor).values,
        ]
    )
    summary = {"noise_model": noise_model, "p_noise": spec.p_noise, "tau_total": spec.tau}
    columns = ["tau", "ideal", "uncorrected", "corrected", "unbiased_reconstruction"]
    return columns, rows, summary


_RUNNERS = {
    "ramsey": cmd_ramsey,
    "spectrum": cmd_spectrum,
    "sensitivity": cmd_sensitivity,
    "fit": cmd_fit,
    "validity": cmd_validity,
    "compare": cmd_compare,
    "discrete": cmd_discrete,
}


# --------------------------------------------------------------------------
# configuration resolution


_DEFAULTS = {
    "ramsey": {
        "params": {"omega": 1.0, "gamma_err": 0.1, "gamma_qec": 5.0},
        "grid": {"tau_max": 20.0, "n_tau": 2000},
        "options": {},
    },
    "spectrum": {
        "params": {"omega": 1.0, "gamma_err": 0.1, "gamma_qec": 5.0},
        "grid": {"tau_max": 300.0, "n_tau": 4800},
        "options": {"window": "rectangular", "zero_pad_factor": 8},
    },
    "sensitivity": {
        "params": {"omega": 1.0, "gamma_err": 0.2, "gamma_qec": 16.6},
        "grid": {"tau_min": 0.02, "tau_max": 60.0, "n_tau": 3000},
        "options": {"n_shots": 10_000, "order": 3},
    },
    "fit": {
        "params": {"omega": 1.0, "gamma_err": 0.2, "gamma_qec": 16.6},
        "grid": {"tau_values": None, "anchor_indices": [1, 4, 9, 14, 19, 24, 29, 34, 39, 44]},
        "options": {
            "n_shots": 10_000,
            "n_reps": 200,
            "grid_size": 200,
            "data_model": "proposed_full",
        },
    },
    "validity": {
        "params": {"omega": 1.0},
        "grid": {
            "gamma_err_min": 0.02,
            "gamma_err_max": 0.34,
            "n_gamma_err": 17,
            "gamma_qec_min": 0.1,
            "gamma_qec_max": 20.0,
            "n_gamma_qec": 200,
        },
        "options": {},
    },
    "compare": {
        "params": {"omega": 1.0, "gamma_err": 0.1},
        "grid": {"gamma_qec_values": None, "tau_min": 0.0, "tau_max": 50.0, "n_tau": 2000},
        "options": {
            "comparison": "sim_full",
            "order": 3,
            "n_shots": 10_000,
            "n_quadratures": 30,
            "target_relative_uncertainty": 0.002,
        },
    },
    "discrete": {
        "params": {"omega": 1.0, "p": 0.02},
        "grid": {"cycles": 300, "delta_tau": 0.2},
        "options": {"noise_model": "realistic"},
    },
}

_COMPARE_SWEEPS = {
    "sim_full": np.geomspace(1.0, 50.0, 13),
    "full_reduced": np.geomspace(5.0, 200.0, 9),
    "signal": np.geomspace(5.0, 200.0, 9),
    "frequency": (4.2, 6.0, 8.0, 12.0, 18.0, 30.0, 55.0, 100.0),
}

# maps argparse attribute -> (section, key) for per-command overrides
_FLAG_MAP = {
    "omega": ("params", "omega"),
    "gamma_err": ("params", "gamma_err"),
    "gamma_qec": ("params", "gamma_qec"),
    "p": ("params", "p"),
    "tau_min": ("grid", "tau_min"),
    "tau_max": ("grid", "tau_max"),
    "n_tau": ("grid", "n_tau"),
    "tau_values": ("grid", "tau_values"),
    "gamma_qec_values": ("grid", "gamma_qec_values"),
    "cycles": ("grid", "cycles"),
    "delta_tau": ("grid", "delta_tau"),
    "window": ("options", "window"),
    "zero_pad_factor": ("options", "zero_pad_factor"),
    "n_shots": ("options", "n_shots"),
    "order": ("options", "order"),
    "n_reps": ("options", "n_reps"),
    "grid_size": ("options", "grid_size"),
    "comparison": ("options", "comparison"),
    "noise_model": ("options", "noise_model"),
}


def available_recipes() -> list:
    """Names of the packaged figure-reproduction configurations."""
    folder = resources.files("qec_sense").joinpath("recipes")
    return sorted(entry.name[:-5] for entry in folder.iterdir() if entry.name.endswith(".json"))


def load_recipe(name: str) -> dict:
    folder = resources.files("qec_sense").joinpath("recipes")
    entry = folder.joinpath(f"{name}.json")
    if not entry.is_file():
        raise ValueError(f"unknown recipe {name!r}; available: {', '.join(available_recipes())}")
    return json.loads(entry.read_text())


def _merge_document(command: str, merged: dict, document: dict, origin: str) -> None:
    if document.get("command", command) != command:
        raise ValueError(
            f"{origin} is for command {document['command']!r}, not {command!r}"
        )
    for section in ("params", "grid", "options"):
        extra = document.get(section, {})
        unknown = set(extra) - set(merged[section])
        if unknown:
            raise ValueError(f"unknown {section} keys in {origin}: {sorted(unknown)}")
        merged[section].update(extra)
    for key in ("seed", "format", "output_path"):
        if key in document:
            merged[key] = document[key]


def _finalize_grid(command: str, merged: dict) -> None:
    """Materialize derived grid values so the metadata records them."""
    if command == "compare" and merged["grid"].get("gamma_qec_values") is None:
        sweep = _COMPARE_SWEEPS[merged["options"]["comparison"]]
        merged["grid"]["gamma_qec_values"] = [float(g) for g in sweep]
    if command == "fit" and merged["grid"].get("tau_values") is None:
        p = SensorParams(
            omega=float(merged["params"]["omega"]),
            gamma_err=float(merged["params"]["gamma_err"]),
            gamma_qec=float(merged["params"]["gamma_qec"]),
        )
        # quadrature points of the effective tone: maximal frequency
        # information, clear of the nodes where fits degenerate
        half_period = math.pi / (3.0 * effective_params(p, 3).omega_eff)
        merged["grid"]["tau_values"] = [
            (int(k) + 0.5) * half_period for k in merged["grid"]["anchor_indices"]
        ]


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Combine defaults, recipe/config files, environment and flags."""
    command = args.command
    merged = copy.deepcopy(_DEFAULTS[command])
    if getattr(args, "recipe", None):
        _merge_document(command, merged, load_recipe(args.recipe), f"recipe {args.recipe!r}")
    if getattr(args, "config", None):
        document = json.loads(Path(args.config).read_text())
        _merge_document(command, merged, document, f"config file {args.config!r}")
    for attr, (section, key) in _FLAG_MAP.items():
        value = getattr(args, attr, None)
        if value is not None:
            merged[section][key] = value
    _finalize_grid(command, merged)
    if args.seed is not None:
        seed = args.seed
    elif "seed" in merged:
        seed = merged["seed"]
    else:
        seed = int(os.environ.get(SEED_ENV, "0"))
    return RunConfig(
        command=command,
        params=merged["params"],
        grid=merged["grid"],
        options=merged["options"],
        seed=int(seed),
        output_path=args.out if args.out is not None else merged.get("output_path"),
        format=args.format if args.format is not None else merged.get("format", "csv"),
        workers=args.workers if args.workers is not None else (os.cpu_count() or 1),
    )


# --------------------------------------------------------------------------
# argument parsing and entry point


def _float_list(text: str) -> list:
    return [float(part) for part in text.split(",") if part.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qec-sense",
        description="Sweeps and estimation experiments for the error-corrected "
        "three-qubit Ramsey sensor; outputs self-describing CSV or JSON.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", default=None, metavar="PATH", help="JSON run configuration")
        sp.add_argument("--recipe", default=None, help="packaged figure configuration by name")
        sp.add_argument("--seed", type=int, default=None, help=f"default: ${SEED_ENV} or 0")
        sp.add_argument("--out", default=None, metavar="PATH", help="default: stdout")
        sp.add_argument("--format", choices=FORMATS, default=None)
        sp.add_argument("--workers", type=int, default=None, help="default: available parallelism")
        return sp

    sp = command("ramsey", "time traces of the logical Ramsey signal for every model")
    for flag in ("--omega", "--gamma-err", "--gamma-qec", "--tau-max"):
        sp.add_argument(flag, type=float, default=None)
    sp.add_argument("--n-tau", type=int, default=None)

    sp = command("spectrum", "magnitude spectra and sub-bin peak estimates per model")
    for flag in ("--omega", "--gamma-err", "--gamma-qec", "--tau-max"):
        sp.add_argument(flag, type=float, default=None)
    sp.add_argument("--n-tau", type=int, default=None)
    sp.add_argument("--window", choices=WINDOWS, default=None)
    sp.add_argument("--zero-pad-factor", type=int, default=None)

    sp = command("sensitivity", "minimum detectable signal curves and optimal sensing time")
    for flag in ("--omega", "--gamma-err", "--gamma-qec", "--tau-min", "--tau-max"):
        sp.add_argument(flag, type=float, default=None)
    sp.add_argument("--n-tau", type=int, default=None)
    sp.add_argument("--n-shots", type=int, default=None)
    sp.add_argument("--order", type=int, default=None, choices=(1, 2, 3))

    sp = command("fit", "repeated two-parameter fits with a Cramer-Rao audit per tau")
    for flag in ("--omega", "--gamma-err", "--gamma-qec"):
        sp.add_argument(flag, type=float, default=None)
    sp.add_argument("--tau-values", type=_float_list, default=None, metavar="T1,T2,...")
    sp.add_argument("--n-shots", type=int, default=None)
    sp.add_argument("--n-reps", type=int, default=None)
    sp.add_argument("--grid-size", type=int, default=None)

    command("validity", "expansion-convergence margin over the rate plane")

    sp = command("compare", "deviation curves between model pairs against the correction rate")
    for flag in ("--omega", "--gamma-err", "--tau-max"):
        sp.add_argument(flag, type=float, default=None)
    sp.add_argument("--n-tau", type=int, default=None)
    sp.add_argument("--comparison", choices=COMPARISONS, default=None)
    sp.add_argument("--order", type=int, default=None, choices=(1, 2, 3))
    sp.add_argument("--n-shots", type=int, default=None)
    sp.add_argument("--gamma-qec-values", type=_float_list, default=None, metavar="G1,G2,...")

    sp = command("discrete", "cycle-resolved traces of the discrete channel model")
    for flag in ("--omega", "--p", "--delta-tau"):
        sp.add_argument(flag, type=float, default=None)
    sp.add_argument("--cycles", type=int, default=None)
    sp.add_argument("--noise-model", choices=NOISE_MODELS, default=None)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Entry point; returns 0 only if every computation succeeded."""
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        columns, rows, summary = _RUNNERS[cfg.command](cfg)
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        if rows.size == 0 or np.isnan(rows).any():
            raise ValueError("computation produced no data or NaN values")
        write_artifact(cfg, columns, rows, summary)
    except (ValueError, IntegrationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
