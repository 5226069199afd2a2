"""Command-line entry point: run, bob, diag, budget."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from pydantic import ValidationError

from . import diagnostics, harness

EXIT_USAGE = 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nonstat-glb", description="Drifting generalized linear bandits")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required):
        sp.add_argument("--config", required=config_required, help="JSON experiment config")
        sp.add_argument("--seeds", type=int, help="use seeds 0..N-1 instead of the config's list")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--horizon", type=int, help="override env.T")
        sp.add_argument("--quiet", action="store_true")

    common(sub.add_parser("run", help="compare policies, write CSV + summary.json"), True)
    common(sub.add_parser("bob", help="Bandit-over-Bandit sweep over seeds"), True)
    diag = sub.add_parser("diag", help="diagnostics suite, one JSON report per check")
    common(diag, False)
    diag.add_argument("--replications", type=int, default=200, help="coverage replications M")
    diag.add_argument("--trajectories", type=int, default=100, help="random trajectories per gamma")
    bud = sub.add_parser("budget", help="variation budget and recommended discounts")
    bud.add_argument("--env", default="rotating", choices=["rotating"])
    bud.add_argument("--T", type=int, required=True)
    bud.add_argument("--d", type=int, default=2)
    bud.add_argument("--budget", type=float, help="use this B_T instead of the schedule's")
    return p


def _load(args) -> harness.ExperimentConfig:
    cfg = harness.load_config(args.config)
    return cfg.with_overrides(seeds=args.seeds, horizon=args.horizon, out=args.out)


def _emit(obj, quiet: bool):
    if not quiet:
        print(json.dumps(obj, indent=2, sort_keys=True))


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if getattr(args, "quiet", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "budget":
            rep = harness.budget_report(args.env, args.T, args.d, args.budget)
            print(f"B_T = {rep['B_T']:.6f}")
            print(f"gamma_orthogonal = {rep['gamma_orthogonal']:.6f}")
            print(f"gamma_general = {rep['gamma_general']:.6f}")
            return 0
        if args.command in ("run", "bob"):
            config = _load(args)
            if args.command == "run":
                summary = harness.run_experiment(config)
                summary.pop("records")
                _emit({k: summary[k] for k in ("config_hash", "T", "policies")}, args.quiet)
            else:
                summary = harness.run_bob_sweep(config)
                _emit({k: summary[k] for k in ("config_hash", "T", "grid", "H", "cum_regret")}, args.quiet)
            return 0
        # diag
        M, seed = args.replications, 0
        horizon = args.horizon or 300
        reports = diagnostics.run_suite(M=M, seed=seed, trajectories=args.trajectories, horizon=horizon)
        if args.out:
            out = Path(args.out)
            out.mkdir(parents=True, exist_ok=True)
            for name, rep in reports.items():
                (out / f"diag_{name}.json").write_text(json.dumps(rep, indent=2, sort_keys=True) + "\n")
        _emit(reports, args.quiet)
        return 0
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename}", file=sys.stderr)
        return EXIT_USAGE
    except (ValidationError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
