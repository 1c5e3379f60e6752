"""Command line entry point: ``cachefresh [global flags] <command>``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .optimizer import BASELINES
from .scenarios import (
    GIVEN,
    OPTIMAL,
    PRESETS,
    ConfigError,
    ScenarioConfig,
    preset,
    rows_to_csv,
    run_scenario,
    write_outputs,
)


def _load(spec: str | None) -> ScenarioConfig:
    if spec is None:
        raise ConfigError("--config PATH (or a preset name) is required")
    if spec in PRESETS and not Path(spec).exists():
        return preset(spec)
    return ScenarioConfig.load(spec)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cachefresh", description=__doc__)
    parser.add_argument("--config", help="scenario JSON file or preset name (example1..example5)")
    parser.add_argument("--seed", type=int, default=None, help="simulation seed (overrides config)")
    parser.add_argument("--out", help="CSV output path; a .manifest.json is written next to it")
    parser.add_argument("--format", choices=["csv"], default="csv")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("eval", help="analytic freshness of the config's allocation")
    sub.add_parser("optimize", help="alternating-maximization allocation")
    p = sub.add_parser("baseline", help="lambda-proportional / lambda-inverse allocations")
    p.add_argument("--policy", choices=BASELINES, action="append")
    p = sub.add_parser("simulate", help="Monte Carlo check of an allocation")
    p.add_argument("--policy", choices=(OPTIMAL, GIVEN) + BASELINES, default=None,
                   help="allocation to simulate (default: the config's allocation if any, else optimal)")
    sub.add_parser("run", help="full scenario: all sweeps and policies")
    p = sub.add_parser("presets", help="list presets, or print one as JSON")
    p.add_argument("name", nargs="?")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "presets":
            if args.name:
                print(json.dumps(preset(args.name).to_dict(), indent=2))
            else:
                print("\n".join(sorted(PRESETS)))
            return 0

        cfg = _load(args.config)
        if args.command in ("eval", "optimize", "baseline"):
            cfg.simulation = None
        if args.command == "eval":
            policies = [GIVEN]
        elif args.command == "optimize":
            policies = [OPTIMAL]
        elif args.command == "baseline":
            policies = args.policy or list(BASELINES)
        elif args.command == "simulate":
            policies = [args.policy or (GIVEN if cfg.allocation is not None else OPTIMAL)]
            if cfg.simulation is None:
                cfg.simulation = {}
        else:
            policies = cfg.policies
        rows = run_scenario(cfg, seed=args.seed, policies=policies)
    except (ConfigError, ValueError) as exc:
        print(f"cachefresh: error: {exc}", file=sys.stderr)
        return 2

    out = args.out or cfg.output
    if out:
        write_outputs(rows, out, cfg, args.seed, args.command)
        print(f"wrote {len(rows)} rows to {out}", file=sys.stderr)
    else:
        sys.stdout.write(rows_to_csv(rows))
    return 0


if __name__ == "__main__":
    sys.exit(main())
