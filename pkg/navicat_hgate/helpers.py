#!/usr/bin/env python

import argparse
import csv
import io
import json
import os
import re
import sys
from dataclasses import fields, replace

import numpy as np

from navicat_hgate.exceptions import InputError
from navicat_hgate.measurement import parity, read_count_records
from navicat_hgate.montecarlo import (
    ExperimentConfig,
    RunReport,
    config_to_dict,
    format_schedule,
    parse_schedule,
    run_experiment,
)
from navicat_hgate.noise import ErrorModel
from navicat_hgate.protocol import PrepSetting, state_labels
from navicat_hgate.rates import RateBudget
from navicat_hgate.tomography import TomographyInput

version_str = "0.1.0"
config_env = "NAVICAT_HGATE_CONFIG"
valid_commands = ["simulate", "table1", "tomo", "rates"]
config_keys = {
    "prep": ["prep1", "prep2"],
    "errors": [f.name for f in fields(ErrorModel)],
    "budget": [f.name for f in fields(RateBudget)],
    "run": ["seed", "fast_mode", "basis_schedule", "max_attempts"],
}
true_strings = ["true", "yes", "on", "1"]
false_strings = ["false", "no", "off", "0"]

_RE_COMBINE_WHITESPACE = re.compile(r"\s+")
_RE_SECTION = re.compile(r"^\[\s*([A-Za-z_]+)\s*\]$")
_RE_COUNT_LINE = re.compile(r"^[XYZxyz] [XYZxyz]( |$)")


def _prep_value(value):
    if value in state_labels:
        return PrepSetting.from_label(value)
    tokens = value.split()
    if len(tokens) != 2:
        raise InputError(
            f"{value} is neither a state label {list(state_labels)} nor a 'theta phi' pair."
        )
    return PrepSetting(theta=float(tokens[0]), phi=float(tokens[1]))


def _bool_value(value):
    if value.lower() in true_strings:
        return True
    if value.lower() in false_strings:
        return False
    raise InputError(f"{value} is not a boolean. Use true or false.")


def _int_value(value):
    number = float(value)
    if not number.is_integer():
        raise InputError(f"{value} is not an integer.")
    return int(value) if re.fullmatch(r"[+-]?\d+", value) else int(number)


def _typed(section, key, value):
    if section == "prep":
        return _prep_value(value)
    if section in ["errors", "budget"]:
        return float(value)
    if key == "fast_mode":
        return _bool_value(value)
    if key == "basis_schedule":
        return parse_schedule(value)
    return _int_value(value)


def parse_config(text, source="config"):
    """
    Read an INI-style experiment description.

    Sections are [prep], [errors], [budget] and [run]; every key is optional
    and defaults to the documented value. Unknown sections or keys, repeated
    keys and out-of-range values are rejected with the offending line.

    Returns
    -------
    cfg : ExperimentConfig
    """
    section = None
    values = {s: {} for s in config_keys}
    for i, line in enumerate(text.splitlines()):
        trline = _RE_COMBINE_WHITESPACE.sub(" ", re.split(r"[#;]", line)[0]).strip()
        if not trline:
            continue
        where = f"line {i + 1} of {source}"
        match = _RE_SECTION.match(trline)
        if match:
            section = match.group(1).lower()
            if section not in config_keys:
                raise InputError(
                    f"Unknown section [{section}] in {where}. Valid sections are {list(config_keys)}."
                )
            continue
        if "=" not in trline:
            raise InputError(f"Could not read {where}, expected key = value:\n {line}")
        key, value = [s.strip() for s in trline.split("=", 1)]
        if section is None:
            raise InputError(f"Key {key} in {where} appears before any section.")
        if key not in config_keys[section]:
            raise InputError(
                f"Unknown key {key} in section [{section}], {where}. Valid keys are {config_keys[section]}."
            )
        if key in values[section]:
            raise InputError(f"Key {key} is set twice; second time in {where}.")
        try:
            typed = _typed(section, key, value)
            _check_single(section, key, typed)
        except (InputError, ValueError) as m:
            raise InputError(f"Invalid value for {key} in {where}: {m}")
        values[section][key] = typed

    try:
        return ExperimentConfig(
            prep1=values["prep"].get("prep1", PrepSetting()),
            prep2=values["prep"].get("prep2", PrepSetting()),
            error_model=ErrorModel(**values["errors"]),
            budget=RateBudget(**values["budget"]),
            **values["run"],
        )
    except InputError as m:
        raise InputError(f"Invalid configuration in {source}: {m}")


def _check_single(section, key, typed):
    if section == "errors":
        ErrorModel(**{key: typed})
    elif section == "budget":
        RateBudget(**{key: typed})
    elif section == "run":
        ExperimentConfig(**{key: typed})


def _prep_text(p):
    return p.label if p.label is not None else f"{p.theta!r} {p.phi!r}"


def format_config(cfg):
    """Serialize a config so that parse_config gives it back unchanged."""
    lines = [
        "[prep]",
        f"prep1 = {_prep_text(cfg.prep1)}",
        f"prep2 = {_prep_text(cfg.prep2)}",
        "",
        "[errors]",
    ]
    lines += [f"{f.name} = {getattr(cfg.error_model, f.name)!r}" for f in fields(ErrorModel)]
    lines += ["", "[budget]"]
    lines += [f"{f.name} = {getattr(cfg.budget, f.name)!r}" for f in fields(RateBudget)]
    lines += [
        "",
        "[run]",
        f"seed = {cfg.seed}",
        f"fast_mode = {str(cfg.fast_mode).lower()}",
        f"basis_schedule = {format_schedule(cfg.basis_schedule)}",
        f"max_attempts = {cfg.max_attempts}",
    ]
    return "\n".join(lines) + "\n"


def read_text(filename):
    try:
        with open(filename, "r") as f:
            return f.read()
    except OSError:
        raise InputError(f"File {filename} could not be found or opened. Exiting.")


def is_count_file(text):
    """True if most non-comment lines start with two bases, as count records do."""
    lines = [
        _RE_COMBINE_WHITESPACE.sub(" ", line.split("#")[0]).strip() for line in text.splitlines()
    ]
    lines = [line for line in lines if line]
    matching = sum(1 for line in lines if _RE_COUNT_LINE.match(line))
    return len(lines) > 0 and 2 * matching > len(lines)


def _round(value, digits=6):
    if isinstance(value, (bool, str)) or value is None:
        return value
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(f"{value:.{digits}g}")
    if isinstance(value, dict):
        return {k: _round(v, digits) for k, v in value.items()}
    if isinstance(value, list):
        return [_round(v, digits) for v in value]
    if isinstance(value, tuple):
        return tuple(_round(v, digits) for v in value)
    return value


def _record_rows(report):
    rows = []
    for r in report.records:
        if r.total > 0:
            p = parity(r)
            value, err = p.value, p.std_error
        else:
            value, err = None, None
        rows.append(
            {
                "basis": r.basis.label,
                "n_pp": int(r.counts[0]),
                "n_pm": int(r.counts[1]),
                "n_mp": int(r.counts[2]),
                "n_mm": int(r.counts[3]),
                "total": int(r.total),
                "parity": value,
                "parity_error": err,
            }
        )
    return rows


def emit_report(report, fmt="json"):
    """
    Serialize a result to bytes.

    JSON keeps the field order of the report and rounds floats to six
    significant digits. CSV writes one header and one row per basis for a
    RunReport, one row per entry for a list of dicts, and key,value pairs
    for a flat dict.
    """
    if fmt not in ["json", "csv"]:
        raise InputError(f"Unknown report format {fmt}. Use json or csv.")
    if isinstance(report, RunReport):
        data = report.to_dict() if fmt == "json" else _record_rows(report)
    else:
        data = report
    data = _round(data)
    if fmt == "json":
        return (json.dumps(data, indent=2) + "\n").encode("utf-8")

    buffer = io.StringIO()
    if isinstance(data, dict):
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["key", "value"])
        for k, v in data.items():
            if not isinstance(v, (dict, list)):
                writer.writerow([k, v])
    else:
        rows = [dict(zip(["row", "col", "re", "im"], r)) if isinstance(r, tuple) else r for r in data]
        writer = csv.DictWriter(buffer, fieldnames=list(rows[0]), lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    return buffer.getvalue().encode("utf-8")


def write_bytes(filename, data, verb=0):
    with open(filename, "wb") as f:
        f.write(data)
    if verb > 0:
        print(f"Wrote {filename} in working directory.")


def processargs(arguments):
    input_list = sys.argv
    input_str = " ".join(input_list)
    hbuilder = argparse.ArgumentParser(
        prog="navicat_hgate",
        description="Simulate and analyse the heralded remote entangling gate between two trapped ions.",
        epilog="Subcommands: simulate <config>, table1 [config], tomo <config|counts file>, rates [config].",
    )
    hbuilder.add_argument(
        "-version", "--version", action="version", version=f"%(prog)s {version_str}"
    )
    hbuilder.add_argument(
        "command",
        choices=valid_commands,
        help=f"Task to run. Possible values are: {valid_commands}",
    )
    hbuilder.add_argument(
        "input",
        nargs="?",
        default=None,
        help=f"Config file, or count file for tomo. (default: ${config_env} if set, else built-in defaults)",
    )
    hbuilder.add_argument(
        "-seed",
        "--seed",
        dest="seed",
        type=int,
        default=None,
        help="If set, overrides the seed of the config. (default: None)",
    )
    hbuilder.add_argument(
        "-csv",
        "--csv",
        dest="csv",
        action="store_true",
        default=False,
        help="If set, also writes the result as csv. (default: False)",
    )
    hbuilder.add_argument(
        "-cal",
        "--cal",
        "-calibrate",
        "--calibrate",
        dest="calibrate",
        action="store_true",
        default=False,
        help="If set, folds the detection error of the config into the tomography likelihood. (default: False)",
    )
    hbuilder.add_argument(
        "-calibrated",
        "--calibrated",
        dest="calibrated",
        action="store_true",
        default=False,
        help="If set, replaces the error model of the config by the calibrated one for simulate, table1 and tomo. (default: False)",
    )
    hbuilder.add_argument(
        "-o",
        "-output",
        "--o",
        "--output",
        dest="output_filename",
        default=None,
        help="If set to a filename, filename of the output file that will log hgate's standard output. (default: None)",
    )
    hbuilder.add_argument(
        "-v",
        "--v",
        "--verb",
        dest="verb",
        type=int,
        default=1,
        help="Verbosity level of the code. Higher is more verbose and viceversa. (default: 1)",
    )
    hbuilder.add_argument(
        "-pm",
        "--pm",
        "-plotmode",
        "--plotmode",
        dest="plotmode",
        type=int,
        default=0,
        help="Plotting mode. Set to 1 to render png figures of the density matrix and the table1 comparison. (default: 0)",
    )
    args = hbuilder.parse_args(arguments)

    if args.output_filename is not None:
        if not isinstance(args.output_filename, str) or re.search(
            r"[^A-Za-z0-9_\-\.\\]", args.output_filename
        ):
            raise InputError(
                f"The provided output filename {args.output_filename} is invalid!"
            )
        sys.stdout = open(args.output_filename, "w")
    print(f"Executing hgate version {version_str} with input arguments:\n{input_str}")

    filename = args.input
    if filename is None and os.environ.get(config_env):
        filename = os.environ[config_env]
        if args.verb > 1:
            print(f"Using config file {filename} from ${config_env}.")
    if filename is None and args.command in ["simulate"]:
        raise InputError("simulate needs a config file, given as argument or via $NAVICAT_HGATE_CONFIG.")

    cfg = ExperimentConfig()
    tomo = None
    basename = "hgate"
    if filename is not None:
        basename = os.path.basename(filename).split(".")[0] or basename
        text = read_text(filename)
        if args.command == "tomo" and is_count_file(text):
            tomo = TomographyInput.from_records(read_count_records(text, source=filename))
            if args.verb > 1:
                print(f"Read {int(tomo.total)} events in 9 bases from {filename}.")
        else:
            cfg = parse_config(text, source=filename)
            if args.verb > 2:
                print(f"Configuration read from {filename}:\n{format_config(cfg)}")

    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.calibrated:
        cfg = replace(cfg, error_model=ErrorModel.calibrated())
        if args.verb > 0:
            print("Using the calibrated error model.")

    return (
        args.command,
        basename,
        cfg,
        tomo,
        args.csv,
        args.calibrate,
        args.plotmode,
        args.verb,
    )


def test_parse_config_defaults(path=f"{os.path.dirname(os.path.abspath(__file__))}/test_files/"):
    cfg = parse_config("")
    assert cfg == ExperimentConfig()
    assert cfg.prep1.label == "0+1" and cfg.prep2.label == "0+1"
    assert cfg.error_model.is_ideal
    assert cfg.budget == RateBudget(0.5, 0.02, 0.2, 0.95, 0.15, 0.0)
    assert cfg.seed == 0 and cfg.fast_mode
    assert format_schedule(cfg.basis_schedule) == "XX:70 YY:70 ZZ:70"
    cfg = parse_config(read_text(f"{path}row1.ini"), source="row1.ini")
    assert cfg.budget.eta == 0.15
    assert cfg.prep1.label == "0+1"
    calibrated = parse_config(read_text(f"{path}calibrated.ini"))
    assert calibrated.error_model.mode_overlap == 0.94


def test_parse_config_errors():
    cases = {
        "[errors]\neps_det = 1.5\n": ["eps_det", "line 2"],
        "[errors]\nmode_overlap = 0.9\neps_det = 0.7\n": ["eps_det", "line 3"],
        "[errors]\nbogus = 1\n": ["bogus", "line 2"],
        "[wrong]\n": ["wrong", "line 1"],
        "eta = 0.1\n": ["eta", "line 1"],
        "[budget]\neta = 0.1\neta = 0.2\n": ["eta", "line 3"],
        "[run]\nseed = abc\n": ["seed", "line 2"],
        "[run]\nbasis_schedule = XX:70 QQ:3\n": ["basis_schedule", "line 2"],
        "[prep]\nprep1 = 0+2\n": ["prep1", "line 2"],
        "# comment\n[run]\nfast_mode = maybe\n": ["fast_mode", "line 3"],
        "[budget]\nt_fiber\n": ["line 2"],
    }
    for text, needles in cases.items():
        try:
            parse_config(text)
        except InputError as m:
            for needle in needles:
                assert needle in str(m), (needle, str(m))
        else:
            assert False, text


def test_format_config_fixed_point():
    texts = [
        "",
        "[prep]\nprep1 = 0-i\nprep2 = 1.1 0.3\n[errors]\nmode_overlap = 0.94\neps_sigma = 0.010050506338833642\n",
        "[budget]\neta = 0.15\nattempt_rate_hz = 1e5\n[run]\nseed = 18446744073709551615\nfast_mode = no\nbasis_schedule = ZZ:48\nmax_attempts = 1000\n",
        "[prep]\nprep1 = 1.5708 0.0\n",
    ]
    for text in texts:
        cfg = parse_config(text)
        again = parse_config(format_config(cfg))
        assert again == cfg
        assert format_config(again) == format_config(cfg)
    near = parse_config("[prep]\nprep1 = 1.5708 0.0\n")
    assert "prep1 = 1.5708 0.0" in format_config(near)
    assert config_to_dict(near)["prep"]["prep1"] == [1.5708, 0.0]


def test_is_count_file(path=f"{os.path.dirname(os.path.abspath(__file__))}/test_files/"):
    assert is_count_file(read_text(f"{path}singlet_counts.txt"))
    assert not is_count_file(read_text(f"{path}row1.ini"))
    assert not is_count_file("")
    text = read_text(f"{path}singlet_counts.txt")
    lines = text.splitlines()
    bad = next(i for i, line in enumerate(lines) if line.strip() and not line.startswith("#"))
    lines[bad] = lines[bad].rsplit(" ", 1)[0]
    damaged = "\n".join(lines) + "\n"
    assert is_count_file(damaged)
    try:
        read_count_records(damaged)
    except InputError as m:
        assert f"Line {bad + 1}" in str(m)
    else:
        assert False
    assert not is_count_file("[run]\nseed = 3\n")


def test_emit_report():
    seed = 2**63 + 12345
    report = run_experiment(ExperimentConfig(seed=seed))
    data = json.loads(emit_report(report, "json").decode("utf-8"))
    assert data["seed"] == seed
    assert data["config"]["run"]["seed"] == seed
    assert data["heralds"] == 210
    assert np.isclose(data["p_psi_empirical"], report.p_psi_empirical, rtol=1e-5)
    assert list(data) == list(report.to_dict())
    lines = emit_report(report, "csv").decode("utf-8").strip().split("\n")
    assert len(lines) == len(report.records) + 1
    assert lines[0].startswith("basis,n_pp")
    try:
        emit_report(report, "xml")
    except InputError:
        pass
    else:
        assert False
