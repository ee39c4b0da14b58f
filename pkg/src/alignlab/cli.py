"""Command line interface.

Exit codes: 0 on success, 1 when a sign test came back contradicted,
2 on usage, configuration, or I/O problems.
"""

from __future__ import annotations

import argparse
import json
import sys

from .errors import AlignlabError
from .harness import cmd_drift_test, cmd_projected_test, cmd_report, cmd_simulate, cmd_sweep_gap, load_config

_CONFIG_FLAGS = {
    "d": "d",
    "k": "k",
    "m": "m_list",
    "eta": "eta",
    "steps": "T",
    "sigma2": "sigma2",
    "init_scale": "init_scale",
    "seed": "seeds",
    "n_mc": "n_mc",
    "record_every": "record_every",
    "t_start": "T_start",
    "out": "output_dir",
}


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", help="JSON config file; flags override its keys")
    parser.add_argument("--d", type=int)
    parser.add_argument("--k", type=int)
    parser.add_argument("--m", type=float, action="append", help="gap ratio; repeatable")
    parser.add_argument("--eta", type=float)
    parser.add_argument("--steps", type=int)
    parser.add_argument("--sigma2", type=float)
    parser.add_argument("--init-scale", dest="init_scale", type=float)
    parser.add_argument("--seed", type=int, action="append", help="seed; repeatable")
    parser.add_argument("--n-mc", dest="n_mc", type=int)
    parser.add_argument("--record-every", dest="record_every", type=int)
    parser.add_argument("--t-start", dest="t_start", type=int)
    parser.add_argument("--out", metavar="DIR")
    parser.add_argument("--print-config", action="store_true", help="echo the resolved config and exit")


def _resolve(args: argparse.Namespace):
    overrides = {}
    for flag, key in _CONFIG_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    return load_config(args.config, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="alignlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("simulate", "constant-step trajectories per (m, seed) with summary"),
        ("sweep-gap", "late-phase alignment vs gap ratio"),
        ("drift-test", "sign tests of the one-step alignment drift"),
        ("projected-test", "loss-change tests for block-projected updates"),
        ("print-config", "echo the fully resolved config"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_config_flags(p)
        if name == "drift-test":
            p.add_argument(
                "--theta-target", action="append", dest="theta_targets",
                help="alignment target: a float, 'X*ggap', or 'high'; repeatable",
            )
            p.add_argument("--eta-factor", action="append", dest="eta_factors", type=float)
        if name == "projected-test":
            p.add_argument("--n-states", dest="n_states", type=int, default=10)

    rep = sub.add_parser("report", help="closed-form report for explicit inputs")
    rep.add_argument("--spectrum", required=True, metavar="PATH")
    rep.add_argument("--noise", required=True, metavar="PATH")
    rep.add_argument("--state", required=True, metavar="PATH")
    rep.add_argument("--eta", type=float, required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            report = cmd_report(args.spectrum, args.noise, args.state, args.eta)
            print(json.dumps(report, indent=2, sort_keys=True))
            return 0

        config = _resolve(args)
        if args.command == "print-config" or args.print_config:
            print(json.dumps(config.to_dict(), indent=2, sort_keys=True))
            return 0
        if args.command == "simulate":
            cmd_simulate(config)
            return 0
        if args.command == "sweep-gap":
            cmd_sweep_gap(config)
            return 0
        if args.command == "drift-test":
            kwargs = {}
            if args.theta_targets:
                kwargs["theta_targets"] = args.theta_targets
            if args.eta_factors:
                kwargs["eta_factors"] = args.eta_factors
            _, contradicted = cmd_drift_test(config, **kwargs)
            return 1 if contradicted else 0
        if args.command == "projected-test":
            _, failed = cmd_projected_test(config, n_states=args.n_states)
            return 1 if failed else 0
        raise AssertionError(f"unhandled command {args.command}")
    except (AlignlabError, OSError) as exc:
        print(f"alignlab: error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
