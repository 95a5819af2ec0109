"""
Command-line front end.

    python -m leakdoa sweep --config run.ini --out results/
    python -m leakdoa leakage --config run.ini --out results/
    python -m leakdoa rootswap-prob --config run.ini --out results/
    python -m leakdoa single --config fixture.ini

Config files are INI-style. Every key is optional except that unknown
sections and keys are rejected::

    [scenario]
    m = 10
    spacing_ratio = 0.5
    doas_deg = 35, 37
    r = 0.0
    n_snapshots = 10

    [run]
    trials = 1000
    snr_db = -5:1:20          ; start:step:stop (inclusive) or a comma list
    seed = 42
    methods = rm, urm, urm+2step, rsurm+pnr
    gamma_grid = 0:0.1:1
    p = 1
    q = 0
    pnr_iterations = 50
    pnr_noise_scale = 1.0
    fb_order = pre

    [leakage]
    gamma = 0.5               ; "fixed:0.5" also accepted, or "sml"

    [rootswap]
    base = rm

    [single]
    method = rsurm+2step
    snr_db = 200
    seed = 0

Exit codes: 0 success, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import LeakDoaError
from .experiments import (
    METRIC_COLUMNS,
    ExperimentConfig,
    MetricsTable,
    leakage_curve,
    rootswap_curve,
    run_monte_carlo,
    single_estimate,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

SCHEMA = {
    "scenario": {"m", "spacing_ratio", "doas_deg", "r", "n_snapshots"},
    "run": {
        "trials",
        "snr_db",
        "seed",
        "methods",
        "gamma_grid",
        "p",
        "q",
        "pnr_iterations",
        "pnr_noise_scale",
        "fb_order",
    },
    "leakage": {"gamma"},
    "rootswap": {"base"},
    "single": {"method", "snr_db", "seed"},
}

LEAKAGE_COLUMNS = (
    "snr_db",
    "empirical_rho1",
    "empirical_rho2",
    "theoretical_rho1",
    "theoretical_rho2",
    "gamma",
    "trials_used",
)
ROOTSWAP_COLUMNS = ("snr_db", "approx_prob", "rootswap_prob", "mlfail_prob", "approximation_ok", "trials_used")


class ConfigError(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class RunSettings:
    """Everything a config file can set."""

    experiment: ExperimentConfig
    leakage_gamma: str = "0.5"
    rootswap_base: str = "rm"
    single_method: str = "rm"
    single_snr_db: float = 200.0
    single_seed: int = 0


def parse_grid(text: str) -> tuple:
    """``"a:step:b"`` (inclusive of ``b``) or ``"x, y, z"``."""
    text = text.strip()
    if ":" in text:
        parts = [float(v) for v in text.split(":")]
        if len(parts) != 3 or parts[1] <= 0 or parts[2] < parts[0]:
            raise ConfigError(f"bad range {text!r}; expected start:step:stop with step > 0")
        start, step, stop = parts
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(float(np.round(start + i * step, 10)) for i in range(count))
    values = tuple(float(v) for v in text.split(",") if v.strip())
    if not values:
        raise ConfigError("empty list")
    return values


def _format_grid(values) -> str:
    return ", ".join(repr(float(v)) for v in values)


def parse_config(text: str) -> RunSettings:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        unknown = set(parser[section]) - SCHEMA[section]
        if unknown:
            raise ConfigError(f"unknown keys in [{section}]: {', '.join(sorted(unknown))}")

    def get(section, key):
        return parser.get(section, key) if parser.has_option(section, key) else None

    kw = {}
    try:
        for key, name, conv in (
            ("m", "num_sensors", int),
            ("spacing_ratio", "spacing_ratio", float),
            ("doas_deg", "doas_deg", parse_grid),
            ("r", "correlation", float),
            ("n_snapshots", "num_snapshots", int),
        ):
            if (v := get("scenario", key)) is not None:
                kw[name] = conv(v)
        for key, conv in (
            ("trials", int),
            ("snr_db", parse_grid),
            ("seed", int),
            ("methods", lambda v: tuple(m.strip() for m in v.split(",") if m.strip())),
            ("gamma_grid", parse_grid),
            ("p", int),
            ("q", int),
            ("pnr_iterations", int),
            ("pnr_noise_scale", float),
            ("fb_order", str.strip),
        ):
            if (v := get("run", key)) is not None:
                kw[key] = conv(v)
        experiment = ExperimentConfig(**kw)
        extra = {}
        if (v := get("leakage", "gamma")) is not None:
            v = v.strip().lower().removeprefix("fixed:")
            if v != "sml" and not 0.0 <= float(v) <= 1.0:
                raise ConfigError("leakage gamma must be 'sml' or lie in [0, 1]")
            extra["leakage_gamma"] = v
        if (v := get("rootswap", "base")) is not None:
            if v.strip() not in ("rm", "urm"):
                raise ConfigError("rootswap base must be 'rm' or 'urm'")
            extra["rootswap_base"] = v.strip()
        if (v := get("single", "method")) is not None:
            extra["single_method"] = v.strip()
        if (v := get("single", "snr_db")) is not None:
            extra["single_snr_db"] = float(v)
        if (v := get("single", "seed")) is not None:
            extra["single_seed"] = int(v)
        settings = RunSettings(experiment, **extra)
        experiment.scenario(settings.single_snr_db)
        ExperimentConfig(**{**kw, "methods": (settings.single_method,)})
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    return settings


def config_to_text(settings: RunSettings) -> str:
    """Serialize settings back to a config file that parses to the same run."""
    e = settings.experiment
    lines = [
        "[scenario]",
        f"m = {e.num_sensors}",
        f"spacing_ratio = {e.spacing_ratio!r}",
        f"doas_deg = {_format_grid(e.doas_deg)}",
        f"r = {e.correlation!r}",
        f"n_snapshots = {e.num_snapshots}",
        "",
        "[run]",
        f"trials = {e.trials}",
        f"snr_db = {_format_grid(e.snr_db)}",
        f"seed = {e.seed}",
        f"methods = {', '.join(e.methods)}",
        f"gamma_grid = {_format_grid(e.gamma_grid)}",
        f"p = {e.p}",
        f"q = {e.q}",
        f"pnr_iterations = {e.pnr_iterations}",
        f"pnr_noise_scale = {e.pnr_noise_scale!r}",
        f"fb_order = {e.fb_order}",
        "",
        "[leakage]",
        f"gamma = {settings.leakage_gamma}",
        "",
        "[rootswap]",
        f"base = {settings.rootswap_base}",
        "",
        "[single]",
        f"method = {settings.single_method}",
        f"snr_db = {settings.single_snr_db!r}",
        f"seed = {settings.single_seed}",
        "",
    ]
    return "\n".join(lines)


def format_value(value) -> str:
    """10 significant digits for reals, empty field for NaN."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "" if math.isnan(value) else format(float(value), ".10g")
    return str(value)


def write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row[c]) for c in columns])


def emit_csv(table: MetricsTable, path) -> None:
    """Write the metrics table, rows sorted by (method, snr_db)."""
    write_csv(path, METRIC_COLUMNS, table.sorted_rows())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return None if math.isnan(obj) else float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _write_manifest(out: Path, args, settings: RunSettings, timings: dict) -> None:
    manifest = {
        "tool": "leakdoa",
        "version": __version__,
        "command": args.command,
        "config_path": str(args.config),
        "resolved_config": config_to_text(settings),
        "output_dir": str(out),
        "threads": args.threads,
        "timings_s": timings,
    }
    (out / "manifest.json").write_text(json.dumps(_jsonable(manifest), indent=2) + "\n", encoding="utf-8")


def _cmd_sweep(settings, args, out):
    table = run_monte_carlo(settings.experiment, threads=args.threads)
    emit_csv(table, out / "metrics.csv")
    for row in table.sorted_rows():
        print(
            f"{row['method']:<22} {row['snr_db']:>7.2f} dB  mse={format_value(row['mse']):<14}"
            f" pres={format_value(row['resolution_prob']):<8} used={row['trials_used']}"
        )


def _cmd_leakage(settings, args, out):
    rows = []
    for snr, rep in leakage_curve(settings.experiment, settings.leakage_gamma, threads=args.threads):
        row = dataclasses.asdict(rep)
        row["snr_db"] = snr
        row["trials_used"] = row.pop("trials")
        rows.append(row)
        print(
            f"{snr:>7.2f} dB  rho1 emp={rep.empirical_rho1:.4g} th={rep.theoretical_rho1:.4g}"
            f"  rho2 emp={rep.empirical_rho2:.4g} th={rep.theoretical_rho2:.4g}"
        )
    write_csv(out / "leakage.csv", LEAKAGE_COLUMNS, rows)


def _cmd_rootswap(settings, args, out):
    rows = []
    for pt in rootswap_curve(settings.experiment, settings.rootswap_base, threads=args.threads):
        row = dataclasses.asdict(pt)
        row["trials_used"] = row.pop("trials")
        rows.append(row)
        print(
            f"{pt.snr_db:>7.2f} dB  approx={pt.approx_prob:.4g} rootswap={pt.rootswap_prob:.4g}"
            f" mlfail={pt.mlfail_prob:.4g}"
        )
    write_csv(out / "rootswap.csv", ROOTSWAP_COLUMNS, rows)


def _cmd_single(settings, args, out):
    scenario, result = single_estimate(
        settings.experiment, settings.single_method, settings.single_snr_db, settings.single_seed
    )
    degrees = result.estimate.degrees
    print(f"method: {settings.single_method}  snr: {settings.single_snr_db:g} dB")
    print("DOAs: " + ", ".join(f"{d:.3f}\N{DEGREE SIGN}" for d in degrees))
    print("roots (|z|, angle):")
    for z in result.step1_roots.roots:
        print(f"  {abs(z):.6f}  {np.angle(z):+.6f}")
    if result.chosen_gamma is not None:
        print(f"chosen gamma: {result.chosen_gamma:g}")
        for g, v in result.extras.get("sml_values", []):
            print(f"  sml(gamma={g:g}) = {v:.10g}")
    if out is not None:
        dump = {
            "method": settings.single_method,
            "snr_db": settings.single_snr_db,
            "doas_deg": degrees.tolist(),
            "true_doas_deg": np.rad2deg(scenario.doas).tolist(),
            "roots_real": result.step1_roots.roots.real.tolist(),
            "roots_imag": result.step1_roots.roots.imag.tolist(),
            "chosen_gamma": result.chosen_gamma,
            "sml_values": result.extras.get("sml_values", []),
        }
        (out / "single.json").write_text(json.dumps(_jsonable(dump), indent=2) + "\n", encoding="utf-8")


COMMANDS = {"sweep": _cmd_sweep, "leakage": _cmd_leakage, "rootswap-prob": _cmd_rootswap, "single": _cmd_single}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="leakdoa", description="Small-sample DOA estimation experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path, help="INI-style config file")
        p.add_argument("--out", type=Path, default=None, help="output directory")
        p.add_argument("--threads", type=int, default=1, help="worker threads for the trial loop")
        p.add_argument("--trials", type=int, default=None, help="override [run] trials")
    return parser


def run_cli(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        text = args.config.read_text(encoding="utf-8")
        settings = parse_config(text)
        if args.trials is not None:
            settings = dataclasses.replace(
                settings, experiment=dataclasses.replace(settings.experiment, trials=args.trials)
            )
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        if args.command != "single" and args.out is None:
            raise ConfigError(f"{args.command} needs --out")
    except (OSError, ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = args.out
    if out is not None:
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            print(f"cannot create output directory: {exc}", file=sys.stderr)
            return EXIT_CONFIG
    start = time.perf_counter()
    try:
        COMMANDS[args.command](settings, args, out)
    except (LeakDoaError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    if out is not None:
        _write_manifest(out, args, settings, {args.command: round(time.perf_counter() - start, 3)})
    return EXIT_OK


def main() -> None:
    sys.exit(run_cli())
