"""Command-line harness: config parsing, experiment dispatch, CSV artifacts.

Config files are line-oriented ``key = value`` with dotted section keys
("#" starts a comment); JSON files with the same nested keys are accepted as
an alternative. Shipped presets mirror the experiment parameter tables at
paper scale (table*.cfg) and at desk scale (desk_*.cfg) that runs in minutes.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from importlib import resources

from .experiments import (ExperimentConfig, resolve_workers, run_experiment,
                          summary_lines, write_outputs)
from .linops import SpectrumSpec, degenerate_spectrum
from .solvers import NonFiniteIterateError


class ConfigError(ValueError):
    """Invalid configuration; `key` names the offending entry."""

    def __init__(self, key: str, message: str):
        super().__init__(f"config error at {key}: {message}")
        self.key = key


_STRING_KEYS = {
    "family", "problem.representation", "problem.spectrum.decay",
    "noise.kind", "noise.matrix_resample", "output",
}
_INT_KEYS = {"problem.n", "operator_seed", "workers"}
_FLOAT_KEYS = {
    "budget", "tail_fraction", "problem.spectrum.lambda_max",
    "problem.spectrum.ratio", "problem.spectrum.exponent",
    "problem.spectrum.floor", "problem.spectrum.condition",
}
_FLOAT_LIST_KEYS = {"problem.r", "noise.delta_a", "noise.delta_b"}
_INT_LIST_KEYS = {"seeds"}
_BOOL_KEYS = {"noise.redraw_magnitudes"}
KNOWN_KEYS = (_STRING_KEYS | _INT_KEYS | _FLOAT_KEYS | _FLOAT_LIST_KEYS
              | _INT_LIST_KEYS | _BOOL_KEYS)


def _parse_scalar(key: str, raw: str):
    raw = raw.strip()
    if raw == "":
        raise ConfigError(key, "empty value")
    try:
        if key in _STRING_KEYS:
            return raw
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        if key in _BOOL_KEYS:
            if raw.lower() in ("true", "yes", "1"):
                return True
            if raw.lower() in ("false", "no", "0"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if key in _FLOAT_LIST_KEYS:
            return tuple(float(part) for part in raw.split(","))
        if key in _INT_LIST_KEYS:
            return tuple(int(part) for part in raw.split(","))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(key, str(exc)) from None
    raise ConfigError(key, "unknown key")


def _flatten_json(obj, prefix="") -> dict:
    flat = {}
    for name, value in obj.items():
        key = f"{prefix}{name}"
        if isinstance(value, dict):
            flat.update(_flatten_json(value, f"{key}."))
        else:
            flat[key] = value
    return flat


def read_key_values(path: str) -> dict:
    """Raw key -> string mapping from a cfg or JSON file."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if path.endswith(".json") or stripped.startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError("<json>", str(exc)) from None
        flat = _flatten_json(data)
        return {key: (",".join(str(v) for v in value)
                      if isinstance(value, (list, tuple)) else str(value))
                for key, value in flat.items()}
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected key = value, got {line!r}")
        key, _, raw = line.partition("=")
        values[key.strip()] = raw.strip()
    return values


def apply_overrides(values: dict, overrides) -> dict:
    merged = dict(values)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(item, "override must look like key=value")
        key, _, raw = item.partition("=")
        key = key.strip()
        if key not in KNOWN_KEYS:
            raise ConfigError(key, "unknown override key")
        merged[key] = raw.strip()
    return merged


def _resolve_spectrum(values: dict, n: int) -> SpectrumSpec:
    decay = values.get("problem.spectrum.decay", "geometric")
    lambda_max = values.get("problem.spectrum.lambda_max", 1.0)
    floor = values.get("problem.spectrum.floor", 0.0)
    ratio = values.get("problem.spectrum.ratio")
    exponent = values.get("problem.spectrum.exponent")
    condition = values.get("problem.spectrum.condition")
    try:
        if decay == "geometric":
            if ratio is None:
                # default degenerate target: condition well above n^2
                cond = condition if condition is not None else 10.0 * n * n
                return degenerate_spectrum(n, cond, lambda_max, floor)
            return SpectrumSpec(n=n, lambda_max=lambda_max, decay="geometric",
                                ratio=ratio, floor=floor)
        if decay == "power":
            return SpectrumSpec(n=n, lambda_max=lambda_max, decay="power",
                                exponent=exponent, floor=floor)
    except ValueError as exc:
        raise ConfigError("problem.spectrum", str(exc)) from None
    raise ConfigError("problem.spectrum.decay", f"unknown decay {decay!r}")


def resolve_config(raw_values: dict) -> ExperimentConfig:
    """Typed, validated ExperimentConfig from raw key -> string values."""
    for key in raw_values:
        if key not in KNOWN_KEYS:
            raise ConfigError(key, "unknown key")
    values = {key: _parse_scalar(key, raw) for key, raw in raw_values.items()}

    for required in ("family", "problem.n", "noise.kind"):
        if required not in values:
            raise ConfigError(required, "required key missing")
    n = values["problem.n"]
    spectrum = _resolve_spectrum(values, n)
    try:
        return ExperimentConfig(
            family=values["family"],
            n=n,
            spectrum=spectrum,
            representation=values.get("problem.representation", "diagonal"),
            noise_kind=values["noise.kind"],
            r_values=values.get("problem.r", (1.0,)),
            delta_a_values=values.get("noise.delta_a", (0.0,)),
            delta_b_values=values.get("noise.delta_b", (0.0,)),
            budget=values.get("budget", 5.0),
            seeds=values.get("seeds", (1, 2, 3, 4, 5)),
            tail_fraction=values.get("tail_fraction", 0.2),
            matrix_resample=values.get("noise.matrix_resample", "fixed"),
            redraw_magnitudes=values.get("noise.redraw_magnitudes", True),
            operator_seed=values.get("operator_seed", 7),
            workers=values.get("workers"),
            output=values.get("output"),
        )
    except ValueError as exc:
        raise ConfigError("<config>", str(exc)) from None


def load_config(path: str, overrides=()) -> ExperimentConfig:
    if not os.path.exists(path):
        candidate = preset_path(path)
        if candidate is None:
            raise ConfigError(path, "config not found")
        path = candidate
    return resolve_config(apply_overrides(read_key_values(path), overrides))


def preset_path(name: str):
    """Absolute path of a shipped preset, by file name or bare name."""
    base = os.path.basename(name)
    if not base.endswith(".cfg"):
        base += ".cfg"
    root = resources.files("noisycg") / "presets" / base
    try:
        if root.is_file():
            return str(root)
    except OSError:
        pass
    return None


def preset_names() -> list[str]:
    root = resources.files("noisycg") / "presets"
    return sorted(entry.name for entry in root.iterdir()
                  if entry.name.endswith(".cfg"))


def resolved_lines(config: ExperimentConfig) -> list[str]:
    """Canonical key = value echo; reparsing it yields an equal config."""
    spec = config.spectrum
    lines = [
        f"family = {config.family}",
        f"problem.n = {config.n}",
        f"problem.representation = {config.representation}",
        f"problem.spectrum.decay = {spec.decay}",
        f"problem.spectrum.lambda_max = {spec.lambda_max!r}",
    ]
    if spec.decay == "geometric":
        lines.append(f"problem.spectrum.ratio = {spec.ratio!r}")
    else:
        lines.append(f"problem.spectrum.exponent = {spec.exponent!r}")
    lines += [
        f"problem.spectrum.floor = {spec.floor!r}",
        f"problem.r = {','.join(repr(v) for v in config.r_values)}",
        f"noise.kind = {config.noise_kind}",
        f"noise.delta_a = {','.join(repr(v) for v in config.delta_a_values)}",
        f"noise.delta_b = {','.join(repr(v) for v in config.delta_b_values)}",
        f"noise.matrix_resample = {config.matrix_resample}",
        f"noise.redraw_magnitudes = {'true' if config.redraw_magnitudes else 'false'}",
        f"budget = {config.budget!r}",
        f"seeds = {','.join(str(s) for s in config.seeds)}",
        f"tail_fraction = {config.tail_fraction!r}",
        f"operator_seed = {config.operator_seed}",
    ]
    if config.workers is not None:
        lines.append(f"workers = {config.workers}")
    if config.output is not None:
        lines.append(f"output = {config.output}")
    return lines


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="noisycg",
        description="Noisy-oracle conjugate gradient experiment harness")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for family in ("trajectory", "sweep-delta", "sweep-r", "compare"):
        sp = sub.add_parser(family, help=f"run the {family} experiment family")
        sp.add_argument("--config", required=True,
                        help="config file path or shipped preset name")
        sp.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config key")
        sp.add_argument("--output-dir", default=None)
        sp.add_argument("--workers", type=int, default=None)
        sp.add_argument("-q", "--quiet", action="store_true")
    vp = sub.add_parser("validate-config",
                        help="parse a config and echo the resolved parameters")
    vp.add_argument("config")
    vp.add_argument("--set", dest="overrides", action="append", default=[],
                    metavar="KEY=VALUE")
    sub.add_parser("list-presets", help="list shipped preset configs")
    return parser


def parse_and_run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as exc:
        # argparse prints usage and exits 2 on unknown subcommands/options
        return int(exc.code or 0)

    if args.subcommand == "list-presets":
        for name in preset_names():
            print(name)
        return 0

    try:
        config = load_config(args.config, getattr(args, "overrides", ()))
    except (ConfigError, OSError) as exc:
        print(f"noisycg: {exc}", file=sys.stderr)
        return 1

    if args.subcommand == "validate-config":
        for line in resolved_lines(config):
            print(line)
        return 0

    if config.family != args.subcommand:
        print(f"noisycg: config error at family: config declares "
              f"{config.family!r} but subcommand is {args.subcommand!r}",
              file=sys.stderr)
        return 1
    if args.workers is not None:
        config = dataclasses.replace(config, workers=args.workers)

    out_dir = args.output_dir or config.output or "noisycg_out"
    try:
        result = run_experiment(config)
    except NonFiniteIterateError as exc:
        print(f"noisycg: solver failed: {exc}", file=sys.stderr)
        return 1

    try:
        files = write_outputs(result, out_dir)
        manifest = os.path.join(out_dir, "manifest.txt")
        with open(manifest, "w", encoding="utf-8") as fh:
            fh.write("# produced files\n")
            for name in files:
                fh.write(name + "\n")
            fh.write("# resolved config\n")
            for line in resolved_lines(config):
                fh.write(line + "\n")
    except OSError as exc:
        print(f"noisycg: output error: {exc}", file=sys.stderr)
        return 1

    if not args.quiet:
        print(f"workers: {resolve_workers(config)}")
        for line in summary_lines(result):
            print(line)
        print(f"wrote {', '.join(files)} + manifest.txt to {out_dir}")
    return 0


def main() -> None:
    sys.exit(parse_and_run(sys.argv[1:]))
