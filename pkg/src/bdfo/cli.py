"""Command-line entry point ``bdfo``.

Exit codes: 0 on success, 2 when a solve ends unrecoverably, 64 on usage
errors (bad flags, unknown problem, malformed configuration or geometry).
"""
import argparse
import json
import os
import sys

import numpy as np

from . import bench
from .bounds import error_scan, write_scan_csv
from .oracle import Mask, get_problem, make_mask, problem_suite
from .poise import heatmap_grid
from .solver import SolverParams, hermite_solve, solve

EX_USAGE = 64
EX_UNRECOVERABLE = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EX_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _names(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def _param(text):
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        value = json.loads(value)
    except json.JSONDecodeError:
        pass
    return key.strip(), value


def _load(path):
    if path is None:
        return {}
    try:
        cfg = bench.load_config(path)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except ValueError as exc:
        raise UsageError(f"cannot parse {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise UsageError(f"{path}: expected a key/value document")
    return cfg


def _seed(args):
    return args.seed if args.seed is not None else bench.default_seed()


def _open_out(path):
    if path in (None, "-"):
        return sys.stdout, False
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    return open(path, "w", newline="\n"), True


def cmd_solve(args):
    cfg = _load(args.config)
    params = dict(cfg.pop("params", {}))
    for key in ("problem", "fraction", "solver", "seed", "known"):
        if getattr(args, key) is None and key in cfg:
            setattr(args, key, cfg.pop(key))
    params.update(cfg)
    params.update(dict(args.param or []))
    if args.budget is not None:
        params["budget"] = args.budget
    if args.problem is None:
        raise UsageError("--problem is required")
    try:
        problem = get_problem(args.problem)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None
    try:
        sp = SolverParams(**params)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad solver parameters: {exc}") from None
    seed = _seed(args)
    if args.known is not None:
        mask = Mask.from_known(problem.n, args.known, seed=seed)
    else:
        fraction = 1.0 if args.fraction is None else float(args.fraction)
        if not 0 < fraction <= 1:
            raise UsageError("--fraction must lie in (0, 1]")
        mask = make_mask(problem.n, fraction, seed)
    solver = args.solver or "birkhoff"
    if solver == "hermite":
        res = hermite_solve(problem, mask, params=sp, seed=seed)
    else:
        res = solve(problem, mask, params=sp)
    fh, close = _open_out(args.out)
    try:
        json.dump(res.to_dict(), fh, indent=None if args.compact else 1)
        fh.write("\n")
    finally:
        if close:
            fh.close()
    return EX_UNRECOVERABLE if res.termination == "unrecoverable" else 0


def cmd_profile(args):
    cfg = _load(args.config)
    for key in ("problems", "fractions", "seeds", "solvers", "taus", "budget", "workers"):
        value = getattr(args, key)
        if value is not None:
            cfg[key] = value
    if args.param:
        cfg.setdefault("params", {}).update(dict(args.param))
    try:
        config = bench.RunConfig.from_mapping(cfg)
    except KeyError as exc:
        raise UsageError(exc.args[0]) from None
    except (TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    runs = bench.run_matrix(config)
    paths = bench.write_profiles(config, runs, args.out_dir)
    for p in paths:
        print(p)
    return 0


def cmd_heatmap(args):
    cfg = _load(args.config)
    if args.preset is not None:
        cfg["preset"] = args.preset
    if "preset" not in cfg and "base" not in cfg:
        cfg["preset"] = "mixed-pair"
    for key in ("resolution", "radius", "center"):
        value = getattr(args, key)
        if value is not None:
            cfg[key] = value
    try:
        base, additions, A, center, radius_, resolution = bench.parse_heatmap_config(cfg)
        if resolution < 1 or not radius_ > 0:
            raise ValueError("resolution must be positive and radius positive")
        grid = heatmap_grid(base, additions, A, center=center, radius_=radius_, resolution=resolution,
                            workers=args.workers or 1)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    fh, close = _open_out(args.out)
    try:
        grid.to_csv(fh)
    finally:
        if close:
            fh.close()
    if args.json:
        with open(args.json, "w", newline="\n") as jh:
            grid.to_json(jh)
    return 0


def cmd_errscan(args):
    if args.geometry is not None:
        cfg = _load(args.geometry)
        try:
            template = bench.parse_geometry(cfg)
        except ValueError as exc:
            raise UsageError(f"{args.geometry}: {exc}") from None
    else:
        template = bench.default_template(args.dim)
    n = template.n
    try:
        f, grad, hess, lip = bench.scan_function(args.function, n)
    except (KeyError, ValueError) as exc:
        raise UsageError(exc.args[0]) from None
    center = np.zeros(n) if args.center is None else np.asarray(args.center, dtype=float)
    if center.size != n:
        raise UsageError(f"--center needs {n} coordinates")
    deltas = args.deltas if args.deltas is not None else [0.1 / 2**k for k in range(6)]
    if not deltas or any(not d > 0 for d in deltas):
        raise UsageError("--deltas must be positive")
    try:
        rows = error_scan(f, grad, hess, template, deltas, center=center, lipschitz=lip,
                          samples=args.samples, seed=_seed(args))
    except np.linalg.LinAlgError as exc:
        raise UsageError(f"geometry is not poised: {exc}") from None
    fh, close = _open_out(args.out)
    try:
        write_scan_csv(rows, fh, label=f"function={args.function} n={n}")
    finally:
        if close:
            fh.close()
    return 0


def cmd_list_problems(args):
    for p in problem_suite():
        fmin = "" if p.fmin is None else f"  fmin={p.fmin:g}"
        print(f"{p.name:<24} n={p.n}{fmin}")
    return 0


def build_parser():
    parser = _Parser(prog="bdfo", description="Trust-region optimization with Birkhoff interpolation models.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="run one solver on one problem and print its JSON trace")
    p.add_argument("--problem")
    p.add_argument("--fraction", type=float, help="share of coordinates with known derivatives")
    p.add_argument("--known", type=_ints, help="explicit 0-based known coordinates, overrides --fraction")
    p.add_argument("--seed", type=int, help="mask seed (default $BDFO_SEED or 1)")
    p.add_argument("--solver", choices=sorted(bench.SOLVERS))
    p.add_argument("--budget", type=float, help="budget in units of n + 1 distinct queries")
    p.add_argument("--param", type=_param, action="append", metavar="KEY=VALUE")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--compact", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("profile", help="run the benchmark matrix and write data profiles")
    p.add_argument("--config")
    p.add_argument("--problems", type=_names)
    p.add_argument("--fractions", type=_floats)
    p.add_argument("--seeds", type=_ints)
    p.add_argument("--solvers", type=_names)
    p.add_argument("--taus", type=_floats)
    p.add_argument("--budget", type=float)
    p.add_argument("--workers", type=int)
    p.add_argument("--param", type=_param, action="append", metavar="KEY=VALUE")
    p.add_argument("--out-dir", default="profiles")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("heatmap", help="grid of poisedness values for a two-dimensional configuration")
    p.add_argument("--config")
    p.add_argument("--preset", choices=sorted(bench.HEATMAP_PRESETS))
    p.add_argument("--resolution", type=int)
    p.add_argument("--radius", type=float)
    p.add_argument("--center", type=_floats)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.add_argument("--json")
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("errscan", help="measured model errors against the theoretical bounds")
    p.add_argument("--function", required=True, choices=sorted(bench.SCAN_FUNCTIONS))
    p.add_argument("--geometry", help="file with data = [[point, alpha], ...] (TOML or .json)")
    p.add_argument("--dim", type=int, default=2, help="dimension of the built-in template")
    p.add_argument("--deltas", type=_floats)
    p.add_argument("--center", type=_floats)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_errscan)

    p = sub.add_parser("list-problems", help="list the problem registry")
    p.set_defaults(func=cmd_list_problems)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"bdfo {args.command}: {exc}", file=sys.stderr)
        return EX_USAGE


if __name__ == "__main__":
    sys.exit(main())
