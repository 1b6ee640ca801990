"""``simulate`` command: run a BER sweep and write CSV and plot data."""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from .exceptions import ConfigError
from .harness import (
    ALL_METHODS,
    ExperimentSpec,
    emit_csv,
    emit_fronthaul_csv,
    emit_plotdata,
    run_experiment,
)
from .oos_estimation import Method
from .topology import SystemConfig

log = logging.getLogger("stripe_sim")

_INT_FIELDS = {"num_aps", "antennas_per_ap", "num_ues", "pilot_len", "coherence_len", "rng_seed"}


def load_config(path) -> SystemConfig:
    """Read a flat ``key = value`` file whose keys are `SystemConfig` field names."""
    text = Path(path).read_text()
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        parser.read_string("[config]\n" + text)
    except configparser.Error as err:
        raise ConfigError(f"{path}: {err}") from None
    known = {f.name for f in dataclasses.fields(SystemConfig)}
    kwargs = {}
    for key, raw in parser["config"].items():
        if key not in known:
            raise ConfigError(f"{path}: unknown key {key!r}")
        try:
            kwargs[key] = int(raw) if key in _INT_FIELDS else float(raw)
        except ValueError:
            raise ConfigError(f"{path}: bad value for {key}: {raw!r}") from None
    return SystemConfig(**kwargs)


def parse_powers(text: str) -> tuple:
    """Parse ``start:stop:step`` (inclusive stop) into a tuple of powers in dB."""
    try:
        start, stop, step = (float(v) for v in text.split(":"))
    except ValueError:
        raise ConfigError(f"--powers expects start:stop:step, got {text!r}") from None
    if step <= 0 or stop < start:
        raise ConfigError("--powers needs step > 0 and stop >= start")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return tuple(round(start + i * step, 10) for i in range(n))


def parse_methods(text: str) -> tuple:
    try:
        return tuple(Method(m.strip()) for m in text.split(",") if m.strip())
    except ValueError as err:
        valid = ", ".join(m.value for m in Method)
        raise ConfigError(f"{err}; choose from {valid}") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="simulate", description=__doc__)
    p.add_argument("--config", required=True, help="key=value file with SystemConfig fields")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="master seed (overrides rng_seed)")
    p.add_argument("--methods", help="comma-separated subset of " + ",".join(m.value for m in Method))
    p.add_argument("--powers", default="-10:0:2", help="uplink power sweep start:stop:step in dB")
    p.add_argument("--setups", type=int, default=200, help="random deployments per power")
    p.add_argument("--symbols", type=int, default=100, help="payload symbols per setup")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _glue_powers(argv):
    # argparse reads "-10:0:2" as an option flag, so attach it to --powers
    out = list(argv)
    for i, tok in enumerate(out[:-1]):
        if tok == "--powers" and out[i + 1].startswith("-"):
            out[i : i + 2] = [f"--powers={out[i + 1]}"]
            break
    return out


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    args = build_parser().parse_args(_glue_powers(argv))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        config = load_config(args.config)
        if args.seed is not None:
            config = dataclasses.replace(config, rng_seed=args.seed)
        spec = ExperimentSpec(
            config=config,
            power_grid_db=parse_powers(args.powers),
            num_setups=args.setups,
            symbols_per_setup=args.symbols,
            methods=parse_methods(args.methods) if args.methods else ALL_METHODS,
        )
    except (ConfigError, OSError) as err:
        print(f"simulate: {err}", file=sys.stderr)
        return 2

    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        report = run_experiment(spec)
        emit_csv(report, out / "ber.csv")
        emit_fronthaul_csv(report, out / "fronthaul.csv")
        emit_plotdata(report, out / "plotdata.dat")
    except OSError as err:
        print(f"simulate: {err}", file=sys.stderr)
        return 1
    if not report.fronthaul_matches_table:
        log.warning("measured fronthaul loads differ from the closed-form table")
    log.info("wrote %s", out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
