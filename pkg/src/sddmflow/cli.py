"""Command-line front end.

Subcommands: ``gen`` emits a problem JSON, ``solve`` runs a one-shot SDDM
solve of a Matrix Market system, ``bench`` executes an experiment config,
``verify`` runs the small-instance invariant suite. Exit codes: 0 success,
1 validation error, 2 numerical failure. Formats and flags are documented
in docs/cli.md.
"""

import argparse
import json
import sys

import numpy as np

from . import fileio
from .errors import NumericalError, SddmflowError
from .experiment import ExperimentConfig, build_problem, run_experiment
from .graphs import default_ground_node, ground


class _Parser(argparse.ArgumentParser):
    """argparse exits with code 2 on bad usage; the CLI contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit_(1, f"error: {message}")


class SystemExit_(Exception):
    def __init__(self, code, message=""):
        super().__init__(message)
        self.code = code


def _build_parser():
    p = _Parser(prog="sddmflow", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a random problem JSON")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--m", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--cost", choices=["quadratic", "smoothed"],
                   default="quadratic")
    g.add_argument("--gamma", type=float, default=1.0)
    g.add_argument("--Gamma", type=float, default=10.0)
    g.add_argument("--smooth-s", type=float, default=0.5)
    g.add_argument("--weight-min", type=float, default=1.0)
    g.add_argument("--weight-max", type=float, default=2.0)
    g.add_argument("--supply-scale", type=float, default=1.0)
    g.add_argument("--out", default="problem.json")

    s = sub.add_parser("solve", help="one-shot SDDM solve (Matrix Market)")
    s.add_argument("--matrix", required=True)
    s.add_argument("--rhs", required=True)
    s.add_argument("--eps", type=float, default=1e-6)
    s.add_argument("--rhop", type=int, default=1)
    s.add_argument("--ground", default=None,
                   help="'auto', or a node id, to ground a singular "
                        "Laplacian before solving")
    s.add_argument("--chain-length", type=int, default=None)
    s.add_argument("--out", default=None, help="solution file (text)")

    b = sub.add_parser("bench", help="run an experiment from a TOML config")
    b.add_argument("--config", required=True)
    b.add_argument("--out-dir", default=None)
    b.add_argument("--seed", type=int, default=None,
                   help="override the config seed")

    v = sub.add_parser("verify", help="run the small-instance checks")
    v.add_argument("--seed", type=int, default=0)
    return p


def _cmd_gen(args):
    from .graphs import generate_random_network

    cfg = ExperimentConfig(
        n=args.n, m=args.m, seed=args.seed, cost_kind=args.cost,
        gamma=args.gamma, Gamma=args.Gamma, smooth_s=args.smooth_s,
        weight_min=args.weight_min, weight_max=args.weight_max,
        supply_scale=args.supply_scale).validate()
    inst, problem = build_problem(cfg)
    fileio.save_problem_json(args.out, inst, problem.cost)
    print(f"wrote {args.out} (n={args.n}, m={args.m}, seed={args.seed})")
    return 0


def _cmd_solve(args):
    from .distsolve import solve_grounded_system

    M = fileio.load_split_matrix_mm(args.matrix)
    b = fileio.load_vector(args.rhs)
    gmap = None
    if args.ground is not None:
        gnode = default_ground_node(M.support_graph()) \
            if args.ground == "auto" else int(args.ground)
        b = b - b.mean()
        M, gmap = ground(M, gnode)
        rhs = b[gmap.kept]
    else:
        rhs = b
    res = solve_grounded_system(M, rhs, args.eps, args.rhop,
                                d=args.chain_length)
    x = res.x
    residual = float(np.linalg.norm(M.matvec(x) - rhs))
    if gmap is not None:
        x = gmap.embed(x, b.shape[0])
        x -= x.mean()
    print(f"solved in q={res.q} sweeps; 2-norm residual {residual:.6e}; "
          f"{res.cost.total_messages} messages over "
          f"{res.cost.total_rounds} rounds")
    if args.out:
        fileio.save_vector(x, args.out)
        print(f"wrote {args.out}")
    return 0


def _cmd_bench(args):
    cfg = ExperimentConfig.from_toml(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    summary = run_experiment(cfg, out_dir=args.out_dir)
    out_dir = args.out_dir or cfg.out_dir
    print(f"summary written to {out_dir}/summary.json")
    return 0


def _cmd_verify(args):
    from .selfcheck import run_selfcheck

    ok = run_selfcheck(seed=args.seed, echo=print)
    return 0 if ok else 2


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit_ as exc:
        print(str(exc), file=sys.stderr)
        return exc.code
    handlers = {"gen": _cmd_gen, "solve": _cmd_solve, "bench": _cmd_bench,
                "verify": _cmd_verify}
    try:
        return handlers[args.command](args)
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (SddmflowError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
