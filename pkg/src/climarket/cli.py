"""Command line entry point: ``climarket run|historical|sweep|prcc``.

Configuration files are flat ``key = value`` text (``#`` starts a comment);
a run manifest (``*.json``) is accepted too. Flags override file values.
Exit codes: 0 success, 2 configuration or data error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .climate import ForcingKind, SeriesError
from .sensitivity import (
    PARAM_NAMES,
    PrccError,
    append_sweep_row,
    bootstrap_ci,
    lhs_sample,
    read_design_csv,
    read_sweep_csv,
    run_sweep,
    write_design_csv,
    write_prcc_csv,
    write_sweep_header,
)
from .sim import (
    ConfigError,
    DataBundle,
    Mode,
    ParamSet,
    ScoreMode,
    SimConfig,
    bundled_paths,
    historical_config,
    manifest,
    run_simulation,
    write_manifest,
    write_run_csv,
)
from .traders import IdeologyMode

log = logging.getLogger("climarket")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

# key -> parser; every key is also a --flag with dashes.
KEYS = {
    "ideo": float,
    "n_edge": int,
    "n_traders": int,
    "risk_tak": float,
    "seg": float,
    "true_model": str,
    "seq_length_years": int,
    "n_sequences": int,
    "bins_k": int,
    "bins_lo": float,
    "bins_hi": float,
    "n_draws": int,
    "burn_in": int,
    "sessions_per_year": int,
    "ideology_mode": str,
    "score_mode": str,
    "first_trade_year": int,
    "seed": int,
    "temperature_csv": str,
    "co2_csv": str,
    "tsi_csv": str,
}
PARAM_KEYS = ("ideo", "n_edge", "n_traders", "risk_tak", "seg", "true_model")


class UsageError(Exception):
    pass


def read_config_file(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    if path.suffix == ".json":
        try:
            cfg = json.loads(path.read_text(encoding="utf-8"))["config"]
        except (ValueError, KeyError) as exc:
            raise UsageError(f"{path}: not a run manifest ({exc})") from None
        out = {k: v for k, v in cfg.items() if k in KEYS and v is not None}
        if "master_seed" in cfg and isinstance(cfg["master_seed"], int):
            out["seed"] = cfg["master_seed"]
        for name in ("temperature", "co2", "tsi"):
            ds = cfg.get("datasets", {}).get(name)
            if ds:
                out[f"{name}_csv"] = ds
        return out
    out = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}: line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_").replace(".", "_")
        if key not in KEYS:
            raise UsageError(f"{path}: line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


def coerce(settings: dict) -> dict:
    out = {}
    for key, value in settings.items():
        try:
            out[key] = KEYS[key](value)
        except (TypeError, ValueError):
            raise UsageError(f"bad value for {key}: {value!r}") from None
    return out


def resolve_settings(args) -> dict:
    settings = {}
    if getattr(args, "config", None):
        settings.update(read_config_file(args.config))
    for key in KEYS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return coerce(settings)


def build_config(settings: dict, mode: Mode) -> SimConfig:
    try:
        params = {k: settings[k] for k in PARAM_KEYS if k in settings}
        if "true_model" in params:
            params["true_model"] = ForcingKind.parse(params["true_model"])
        kwargs = {}
        for key in ("seq_length_years", "n_sequences", "bins_k", "bins_lo", "bins_hi",
                    "n_draws", "burn_in", "sessions_per_year", "first_trade_year"):
            if key in settings:
                kwargs[key] = settings[key]
        if "ideology_mode" in settings:
            kwargs["ideology_mode"] = IdeologyMode(settings["ideology_mode"])
        if "score_mode" in settings:
            kwargs["score_mode"] = ScoreMode(settings["score_mode"])
        kwargs["master_seed"] = settings.get("seed", 0)
        if mode is Mode.HISTORICAL:
            return historical_config(params=ParamSet(**params), **kwargs)
        return SimConfig(params=ParamSet(**params), mode=mode, **kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def data_paths(settings: dict) -> dict:
    bundled = bundled_paths()
    return {
        "temperature": Path(settings.get("temperature_csv", bundled["temperature"])),
        "co2": Path(settings.get("co2_csv", bundled["co2"])),
        "tsi": Path(settings.get("tsi_csv", bundled["tsi"])),
    }


def load_data(paths: dict) -> DataBundle:
    for path in paths.values():
        if not path.is_file():
            raise UsageError(f"data file not found: {path}")
    return DataBundle.from_csv(paths["temperature"], paths["co2"], paths["tsi"])


def _manifest(config, paths, **extra):
    m = manifest(config, paths, **extra)
    m["config"]["datasets"] = {k: str(v) for k, v in paths.items()}
    return m


def _single(args, mode: Mode, stem: str) -> int:
    settings = resolve_settings(args)
    config = build_config(settings, mode)
    paths = data_paths(settings)
    data = load_data(paths)
    result = run_simulation(config, data)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_run_csv(result, out / f"{stem}.csv", config.score_mode)
    write_manifest(out / f"{stem}_manifest.json", _manifest(config, paths, command=stem))
    print(f"{stem}: {len(result.records)} sequences, convergence score {result.convergence_score:.4f}")
    return EXIT_OK


def cmd_run(args) -> int:
    return _single(args, Mode.FUTURE, "run")


def cmd_historical(args) -> int:
    return _single(args, Mode.HISTORICAL, "historical")


def cmd_sweep(args) -> int:
    settings = resolve_settings(args)
    base = build_config(settings, Mode.FUTURE)
    paths = data_paths(settings)
    data = load_data(paths)
    if args.n_points < 2:
        raise UsageError("--n-points must be at least 2")
    if args.replicates < 1:
        raise UsageError("--replicates must be at least 1")
    seed = settings.get("seed", 0)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    design_path, sweep_path, manifest_path = out / "design.csv", out / "sweep.csv", out / "sweep_manifest.json"
    m = _manifest(base, paths, command="sweep", n_points=args.n_points, replicates=args.replicates)

    start = 0
    if manifest_path.exists() and sweep_path.exists():
        previous = json.loads(manifest_path.read_text(encoding="utf-8"))
        if previous != json.loads(json.dumps(m, sort_keys=True)):
            raise UsageError(f"{out} holds a sweep with a different manifest; use another --out-dir")
        # Drop a partially written trailing line, if any.
        lines = sweep_path.read_text(encoding="utf-8").splitlines(keepends=True)
        if lines and not lines[-1].endswith("\n"):
            sweep_path.write_text("".join(lines[:-1]), encoding="utf-8")
        design = read_design_csv(design_path)
        try:
            done = read_sweep_csv(sweep_path).outcomes
        except ValueError as exc:
            raise UsageError(f"cannot resume: {exc}") from None
        if [o.index for o in done] != list(range(len(done))):
            raise UsageError(f"{sweep_path}: rows are not a contiguous prefix; cannot resume")
        start = len(done)
        log.info("resuming sweep at row %d of %d", start, design.n_points)
    else:
        design = lhs_sample(args.n_points, np.random.default_rng(np.random.SeedSequence([seed, 0x1A5])))
        write_design_csv(design, design_path)
        write_sweep_header(sweep_path)
        write_manifest(manifest_path, m)

    result = run_sweep(
        design, args.replicates, replace(base, params=ParamSet()), data,
        workers=args.workers, master_seed=seed, start=start,
        on_row=lambda o: append_sweep_row(sweep_path, o),
    )
    failed = sum(not o.ok for o in result.outcomes)
    print(f"sweep: {design.n_points} rows in {sweep_path} ({failed} excluded in this pass)")
    return EXIT_OK


def cmd_prcc(args) -> int:
    path = Path(args.sweep_csv)
    if not path.is_file():
        raise UsageError(f"sweep file not found: {path}")
    try:
        sweep = read_sweep_csv(path)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    X, y = sweep.X, sweep.y
    if len(y) < 10:
        raise UsageError(f"{path}: need at least 10 usable rows, found {len(y)}")
    try:
        report = bootstrap_ci(X, y, args.n_boot, np.random.default_rng(args.seed or 0), PARAM_NAMES)
    except PrccError as exc:
        raise UsageError(f"{path}: {exc}") from None
    out = Path(args.out) if args.out else path.with_name("prcc.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_prcc_csv(report, out)
    for e in report.entries:
        print(f"{e.param:>10s} {e.estimate:+.3f}  [{e.ci_low:+.3f}, {e.ci_high:+.3f}]")
    return EXIT_OK


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file or a *_manifest.json")
    p.add_argument("--out-dir", default="out")
    for key, typ in KEYS.items():
        p.add_argument("--" + key.replace("_", "-"), dest=key, type=typ, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="climarket", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="one future-scenario simulation")
    _add_config_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("historical", help="one run over the observed record (14 sequences to 2014)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_historical)

    p = sub.add_parser("sweep", help="Latin hypercube sweep of future runs (resumable)")
    _add_config_flags(p)
    p.add_argument("--n-points", type=int, default=500)
    p.add_argument("--replicates", type=int, default=10)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("prcc", help="PRCC with bootstrap intervals from a sweep.csv")
    p.add_argument("sweep_csv")
    p.add_argument("--n-boot", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output path (default: prcc.csv next to the sweep)")
    p.set_defaults(func=cmd_prcc)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (UsageError, ConfigError, SeriesError, FileNotFoundError) as exc:
        print(f"climarket: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"climarket: runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
