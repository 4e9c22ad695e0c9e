#!/usr/bin/env python

import json
import os
import sys
import tempfile

import numpy as np

from navicat_hgate.exceptions import InputError, NoProgressError
from navicat_hgate.helpers import emit_report, processargs, write_bytes
from navicat_hgate.measurement import format_count_records
from navicat_hgate.montecarlo import (
    compare_table1,
    mean_fidelity,
    reproduce_table1,
    reproduce_tomography_dataset,
    run_experiment,
)
from navicat_hgate.plotting import plot_rho_bars, plot_table1
from navicat_hgate.protocol import p_psi_minus, prepare_qubit
from navicat_hgate.qcore import check_density
from navicat_hgate.rates import rate_breakdown
from navicat_hgate.tomography import reconstruct_mle, rho_bar_rows, summarize


def run_simulate(basename, cfg, csv_out, verb):
    report = run_experiment(cfg, verb=verb)
    if verb > 0:
        print(
            f"{report.heralds} heralds ({report.false_heralds} false) in {report.attempts} attempts, P_psi- = {report.p_psi_empirical:.4f} +- {report.p_psi_std:.4f} (theory {report.p_psi_theory:.4f})."
        )
    write_bytes(f"{basename}_simulate.json", emit_report(report, "json"), verb)
    write_bytes(
        f"{basename}_counts.txt", format_count_records(report.records).encode("utf-8"), verb
    )
    if csv_out:
        write_bytes(f"{basename}_simulate.csv", emit_report(report, "csv"), verb)


def run_table1(basename, cfg, plotmode, verb):
    reports = reproduce_table1(cfg, verb=verb)
    rows = compare_table1(reports)
    mean = mean_fidelity(reports[:7])
    if verb > 0:
        print(f"{'row':>3} {'input':>10} {'events':>6} {'F sim':>14} {'F meas':>6} {'P sim':>14} {'P meas':>6} {'P theo':>6}")
        for r in rows:
            f = "-" if r["fidelity"] is None else f"{r['fidelity']:.3f}({r['fidelity_error']:.3f})"
            fq = "-" if r["fidelity_measured"] is None else f"{r['fidelity_measured']:.2f}"
            p = f"{r['p_psi']:.3f}({r['p_psi_std']:.3f})"
            print(
                f"{r['row']:>3} {r['input']:>10} {r['events']:>6} {f:>14} {fq:>6} {p:>14} {r['p_psi_measured']:>6.2f} {r['p_psi_theory']:>6.2f}"
            )
        if mean is not None:
            print(f"Mean fidelity over rows 1-7: {mean:.3f}")
    write_bytes(
        f"{basename}_table1.json",
        emit_report({"mean_fidelity": mean, "rows": rows, "runs": [r.to_dict() for r in reports]}, "json"),
        verb,
    )
    write_bytes(f"{basename}_table1.csv", emit_report(rows, "csv"), verb)
    if plotmode > 0:
        plot_table1(rows, basename, verb)


def run_tomo(basename, cfg, tomo, calibrate, plotmode, verb):
    eps = cfg.error_model.eps_det if calibrate else 0.0
    if tomo is None:
        tomo, result = reproduce_tomography_dataset(cfg, correct_detection=calibrate, verb=verb)
    else:
        result = reconstruct_mle(tomo, eps_det=eps, verb=verb)
    check_density(result.rho_hat.entries)
    summary = summarize(result.rho_hat)
    summary.update(
        {
            "events": int(tomo.total),
            "eps_det": eps,
            "log_likelihood": result.log_likelihood,
            "converged": result.converged,
            "iterations": result.iterations,
        }
    )
    if verb > 0:
        print(
            f"Reconstructed from {int(tomo.total)} events: F = {summary['F']:.3f}, C = {summary['C']:.3f}, E_F = {summary['E_F']:.3f}, purity = {summary['purity']:.3f}."
        )
        if not result.converged:
            print("Warning! The likelihood maximization did not converge; the best iterate is reported.")
    if verb > 2:
        print(np.array_str(result.rho_hat.entries, precision=3, suppress_small=True))
    write_bytes(f"{basename}_tomo.json", emit_report(summary, "json"), verb)
    write_bytes(f"{basename}_rho_bars.csv", emit_report(rho_bar_rows(result.rho_hat), "csv"), verb)
    if plotmode > 0:
        plot_rho_bars(result.rho_hat, basename, verb)


def run_rates(basename, cfg, csv_out, verb):
    p_psi = p_psi_minus(prepare_qubit(cfg.prep1), prepare_qubit(cfg.prep2))
    breakdown = rate_breakdown(cfg.budget, p_psi)
    if verb > 0:
        for key, value in breakdown.items():
            print(f"{key:>26} : {value:.6g}")
    write_bytes(f"{basename}_rates.json", emit_report(breakdown, "json"), verb)
    if csv_out:
        write_bytes(f"{basename}_rates.csv", emit_report(breakdown, "csv"), verb)


def dispatch(argv):
    """Run one subcommand and return the exit code: 0 success, 2 input error, 1 runtime failure."""
    orig_stdout = sys.stdout
    try:
        command, basename, cfg, tomo, csv_out, calibrate, plotmode, verb = processargs(argv)
        if command == "simulate":
            run_simulate(basename, cfg, csv_out, verb)
        elif command == "table1":
            run_table1(basename, cfg, plotmode, verb)
        elif command == "tomo":
            run_tomo(basename, cfg, tomo, calibrate, plotmode, verb)
        elif command == "rates":
            run_rates(basename, cfg, csv_out, verb)
        return 0
    except SystemExit as m:
        return m.code if isinstance(m.code, int) else 2
    except InputError as m:
        print(f"Input error: {m}", file=sys.stderr)
        return 2
    except NoProgressError as m:
        print(f"No progress: {m}", file=sys.stderr)
        return 1
    except Exception as m:
        print(f"Runtime failure: {m}", file=sys.stderr)
        return 1
    finally:
        if sys.stdout is not orig_stdout:
            sys.stdout.close()
            sys.stdout = orig_stdout


def run_hgate():
    return dispatch(sys.argv[1:])


def _in_tmpdir(argv):
    cwd = os.getcwd()
    with tempfile.TemporaryDirectory() as tmp:
        os.chdir(tmp)
        try:
            code = dispatch(argv + ["-v", "0"])
            outputs = {
                name: None if name.endswith(".png") else open(name).read()
                for name in os.listdir(tmp)
            }
        finally:
            os.chdir(cwd)
    return code, outputs


def test_dispatch_rates():
    code, outputs = _in_tmpdir(["rates", "-csv"])
    assert code == 0
    data = json.loads(outputs["hgate_rates.json"])
    assert np.isclose(data["per_photon_detection_prob"], 2.85e-4)
    assert np.isclose(data["gate_factor"], 8.1225e-8)
    assert "per_photon_detection_prob" in outputs["hgate_rates.csv"]


def test_dispatch_exit_codes(path=f"{os.path.dirname(os.path.abspath(__file__))}/test_files/"):
    assert _in_tmpdir(["frobnicate"])[0] == 2
    assert _in_tmpdir(["simulate", f"{path}bad_range.ini"])[0] == 2
    assert _in_tmpdir(["simulate", f"{path}missing.ini"])[0] == 2
    assert _in_tmpdir(["simulate", f"{path}row8.ini"])[0] == 1
    code, outputs = _in_tmpdir(["simulate", f"{path}row1.ini", "-seed", "4"])
    assert code == 0
    assert json.loads(outputs["row1_simulate.json"])["seed"] == 4


def test_dispatch_tomo(path=f"{os.path.dirname(os.path.abspath(__file__))}/test_files/"):
    code, outputs = _in_tmpdir(["tomo", f"{path}singlet_counts.txt", "-pm", "1"])
    assert code == 0
    data = json.loads(outputs["singlet_counts_tomo.json"])
    rho = np.array(data["re"]) + 1j * np.array(data["im"])
    assert np.allclose(rho, rho.conj().T, atol=1e-5)
    assert abs(np.trace(rho) - 1) < 1e-4
    assert np.min(np.linalg.eigvalsh(rho)) > -1e-5
    assert data["F"] > 0.9
    assert len(outputs["singlet_counts_rho_bars.csv"].strip().split("\n")) == 17
    assert "singlet_counts_rho.png" in outputs


def test_dispatch_table1():
    code, outputs = _in_tmpdir(["table1", "-seed", "7", "-pm", "1"])
    assert code == 0
    data = json.loads(outputs["hgate_table1.json"])
    assert [r["fidelity"] for r in data["rows"][:7]] == [1.0] * 7
    assert data["rows"][7]["fidelity"] is None
    assert "hgate_table1.png" in outputs
    assert len(outputs["hgate_table1.csv"].strip().split("\n")) == 9


def test_dispatch_simulate_counts_feed_tomo(path=f"{os.path.dirname(os.path.abspath(__file__))}/test_files/"):
    cwd = os.getcwd()
    with tempfile.TemporaryDirectory() as tmp:
        os.chdir(tmp)
        try:
            assert dispatch(["simulate", f"{path}tomo9.ini", "-v", "0"]) == 0
            with open("tomo9_counts.txt") as f:
                counts_text = f.read()
            assert dispatch(["tomo", "tomo9_counts.txt", "-v", "0"]) == 0
            with open("tomo9_counts_tomo.json") as f:
                data = json.load(f)
        finally:
            os.chdir(cwd)
    assert len([line for line in counts_text.splitlines() if not line.startswith("#")]) == 9
    assert data["events"] == 360
    assert data["eps_det"] == 0
    assert 0.7 < data["F"] <= 1
