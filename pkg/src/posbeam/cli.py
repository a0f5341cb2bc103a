"""Command-line experiment runner.

Subcommands: `position` (phase 1 only), `simulate` (phase 2 from stored
estimates), `full` (both), `report` (re-aggregate existing raw CSVs).
--config accepts a file path or the name of a shipped preset
(fig4_positioning, fig2_rates_1s, fig3_rates_5s, fig5_line_trace).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from importlib import resources
from pathlib import Path

from .config import ConfigError, ExperimentConfig, parse_config, parse_config_text
from .runner import (RunnerError, run_experiment_matrix, run_link_phase,
                     run_position_phase, run_report)

log = logging.getLogger(__name__)

OUT_ENV_VAR = "POSBEAM_OUT"


def load_config(spec: str | None) -> ExperimentConfig:
    if spec is None:
        return ExperimentConfig()
    path = Path(spec)
    if path.exists():
        return parse_config(path)
    preset = resources.files("posbeam").joinpath("presets", f"{spec}.cfg")
    if preset.is_file():
        return parse_config_text(preset.read_text())
    raise ConfigError(f"config {spec!r} is neither a file nor a known preset")


def resolve_out_dir(cli_out: str | None, cfg: ExperimentConfig) -> Path:
    if cli_out:
        return Path(cli_out)
    env = os.environ.get(OUT_ENV_VAR)
    if env:
        return Path(env)
    return Path(cfg.output.dir)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="config file path or preset name")
    p.add_argument("--out", help="output directory (overrides env and config)")
    p.add_argument("--seed-offset", type=int, default=0,
                   help="added to every case seed")
    p.add_argument("--jobs", type=int, default=max(1, os.cpu_count() or 1),
                   help="worker processes for the run matrix")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="posbeam",
        description="urban IIoT positioning + mmWave beam selection simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in [("position", "run the tracking phase and write estimate CSVs"),
                      ("simulate", "run the link phase from stored estimates"),
                      ("full", "run both phases"),
                      ("report", "re-aggregate existing raw CSVs")]:
        _add_common(sub.add_parser(name, help=doc))
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        out = resolve_out_dir(args.out, cfg)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "position":
            run_position_phase(cfg, out, args.jobs, args.seed_offset)
        elif args.command == "simulate":
            run_link_phase(cfg, out, args.jobs, args.seed_offset)
        elif args.command == "full":
            run_experiment_matrix(cfg, out, args.jobs, args.seed_offset)
        elif args.command == "report":
            run_report(cfg, out, args.seed_offset)
    except (ConfigError, RunnerError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
