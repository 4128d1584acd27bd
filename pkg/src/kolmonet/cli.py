"""Batch experiment driver.

Subcommands: ``plan`` (budget formulas), ``build`` (construct and write a
solution network), ``verify`` (error report for a written network), and
``study euler|weak|calculus|bounds`` (property and convergence suites).

All commands are deterministic given their flags; seeds are explicit.
Exit codes: 0 success, 1 bound violation, 2 input/IO error.  Flags beat
values from ``--config`` (a JSON file mirroring flag names), which beat
built-in defaults.  KOLMONET_THREADS caps BLAS parallelism when set
before the interpreter first loads numpy.
"""

import os

_threads = os.environ.get("KOLMONET_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse
import json
import sys

import numpy as np

from . import bounds, build, nets, problems, sde, studies

EXIT_OK = 0
EXIT_BOUND_VIOLATION = 1
EXIT_INPUT_ERROR = 2


def _apply_config(args, parser_defaults):
    """Precedence: explicit flags > config file entries > defaults."""
    if not getattr(args, "config", None):
        return args
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SystemExit(_fail("cannot read config: %s" % exc))
    for key, value in cfg.items():
        key = key.replace("-", "_")
        if hasattr(args, key) and getattr(args, key) == parser_defaults.get(key):
            setattr(args, key, value)
    return args


def _fail(msg: str) -> int:
    print("error: %s" % msg, file=sys.stderr)
    return EXIT_INPUT_ERROR


def cmd_plan(args) -> int:
    params = bounds.RegularityParams(T=args.T, kappa=args.kappa, eta=args.eta, p=args.p)
    plan = bounds.plan_budget(params, args.d, args.eps)
    print("cost_exponent_c %.17g" % plan.cost_exponent)
    print("log10_guaranteed_params %.17g" % plan.log10_cost)
    if plan.representable:
        budget = plan.budget()
        print("N %d" % budget.N)
        print("M %d" % budget.M)
        print("delta %.17g" % budget.delta)
    else:
        print("log10_N %.17g" % plan.log10_N)
        print("log10_M %.17g" % plan.log10_M)
        print("log10_delta %.17g" % plan.log10_delta)
        print("note budget exceeds practical build sizes; use --N/--M/--delta overrides with build")
    return EXIT_OK


def cmd_build(args) -> int:
    try:
        tp = problems.get_problem(args.problem, args.d)
    except KeyError as exc:
        return _fail(str(exc))
    budget = bounds.Budget(N=args.N, M=args.M, delta=args.delta)
    solution = build.solve(tp.problem, eps=1.0, seed=args.seed, budget_override=budget)
    try:
        build.save_solution(solution, args.out)
    except OSError as exc:
        return _fail("cannot write %s: %s" % (args.out, exc))
    count = nets.param_count(solution.net)
    limit = solution.provenance["bound_values"]["param_bound"]
    print("param_count %d" % count)
    print("param_bound %.17g" % limit)
    print("ratio %.17g" % (count / limit))
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        tp = problems.get_problem(args.problem, args.d)
    except KeyError as exc:
        return _fail(str(exc))
    try:
        solution = build.load_solution(args.infile)
    except (OSError, build.SolutionNetFormatError) as exc:
        return _fail("cannot load network: %s" % exc)
    prov = solution.provenance
    needed = {"seed", "N", "M", "delta"}
    if not needed.issubset(prov):
        return _fail("provenance block missing %s" % sorted(needed - set(prov)))
    pb = tp.problem
    net = solution.net
    if net.in_dim != pb.d + 1:
        return _fail("network input dimension %d does not match problem d+1=%d" % (net.in_dim, pb.d + 1))
    N, M, delta, seed = prov["N"], prov["M"], prov["delta"], prov["seed"]
    B = sde.sqrtm_psd(2.0 * pb.A)
    noise = sde.sample_brownian(seed, N, M, pb.d, pb.T, B)

    def net_fn(ts, xs):
        return nets.realize(net, np.column_stack([ts, xs])).ravel()

    def mc_fn(ts, xs):
        out = np.empty(len(ts))
        for i in range(len(ts)):
            st = sde.euler_grid(xs[i], pb.drift_net, noise)
            out[i] = nets.realize(pb.init_net, sde.interpolate(st, ts[i])).mean()
        return out

    p = pb.params.p
    err_exact = sde.lp_error(net_fn, lambda t, x: tp.exact_solution(t, x), tp.measure, p, args.samples, args.seed)
    err_mc = sde.lp_error(net_fn, mc_fn, tp.measure, p, args.samples, args.seed)
    mass_fac = tp.measure.mass ** (1.0 / p)
    bound = bounds.solution_error_bound(pb.params, pb.d, N, M, delta, tp.measure.mass)
    ok = err_exact * mass_fac <= bound + tp.init_accuracy
    row = "%.17g,%.17g,%.17g,%s" % (err_exact, err_mc, bound, "pass" if ok else "fail")
    header = "lp_error_vs_exact,lp_error_vs_mc_average,solution_error_bound,status"
    if args.out:
        try:
            with open(args.out, "w") as fh:
                fh.write(header + "\n" + row + "\n")
        except OSError as exc:
            return _fail("cannot write %s: %s" % (args.out, exc))
    print(header)
    print(row)
    return EXIT_OK if ok else EXIT_BOUND_VIOLATION


def cmd_study(args) -> int:
    name = args.suite
    if name == "calculus":
        rows, ok = studies.calculus_study(instances=args.instances, seed=args.seed)
        header = ("check", "instances", "failures")
    elif name == "euler":
        rows1, ok1 = studies.strong_interp_study(paths=args.paths, seed=args.seed)
        rows2, ok2 = studies.moment_study(paths=max(1000, args.paths // 5), seed=args.seed + 1)
        rows = [("interp", "N=%d" % N, M, est, se, bnd, 0) for N, M, est, se, bnd in rows1]
        rows += [
            ("moment", "%s;d=%d;q=%g" % (prob, d, q), paths_or, est, se, bnd, viol)
            for prob, d, q, est, se, bnd, viol in rows2
            for paths_or in (max(1000, args.paths // 5),)
        ]
        ok = ok1 and ok2
        header = ("check", "case", "paths", "estimate", "std_error", "bound", "violations")
    elif name == "weak":
        rows, slope, ok = studies.weak_error_study(paths=args.paths, seed=args.seed)
        rows = list(rows) + [("slope", "", slope, "", -0.35)]
        header = ("N", "M", "estimate", "std_error", "bound")
    elif name == "bounds":
        rows, ok = studies.bounds_study(seed=args.seed)
        header = ("bound_name", "formula", "inputs", "value", "empirical")
    else:
        return _fail("unknown study %r" % name)
    if args.out:
        try:
            if name == "bounds":
                bounds.write_bounds_report(args.out, rows)
            else:
                sde.write_convergence_csv(args.out, rows, header=tuple(str(h) for h in header))
        except OSError as exc:
            return _fail("cannot write %s: %s" % (args.out, exc))
    for row in rows:
        print(",".join(str(v) for v in row))
    print("status %s" % ("pass" if ok else "fail"))
    return EXIT_OK if ok else EXIT_BOUND_VIOLATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="kolmonet", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_plan = sub.add_parser("plan", help="evaluate the budget formulas")
    p_plan.add_argument("--d", type=int, default=1)
    p_plan.add_argument("--eps", type=float, default=1.0)
    p_plan.add_argument("--kappa", type=float, default=1.0)
    p_plan.add_argument("--eta", type=float, default=1.0)
    p_plan.add_argument("--T", type=float, default=1.0)
    p_plan.add_argument("--p", type=float, default=2.0)
    p_plan.add_argument("--config")
    p_plan.set_defaults(func=cmd_plan)

    p_build = sub.add_parser("build", help="construct a solution network and write it")
    p_build.add_argument("--problem", required=True, choices=problems.problem_names())
    p_build.add_argument("--d", type=int, default=1)
    p_build.add_argument("--N", type=int, required=True)
    p_build.add_argument("--M", type=int, required=True)
    p_build.add_argument("--delta", type=float, required=True)
    p_build.add_argument("--seed", type=int, default=0)
    p_build.add_argument("--out", required=True)
    p_build.add_argument("--config")
    p_build.set_defaults(func=cmd_build)

    p_verify = sub.add_parser("verify", help="error report for a written network")
    p_verify.add_argument("--in", dest="infile", required=True)
    p_verify.add_argument("--problem", required=True, choices=problems.problem_names())
    p_verify.add_argument("--d", type=int, default=1)
    p_verify.add_argument("--samples", type=int, default=512)
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--out")
    p_verify.add_argument("--config")
    p_verify.set_defaults(func=cmd_verify)

    p_study = sub.add_parser("study", help="run a property/convergence suite")
    p_study.add_argument("suite", choices=("euler", "weak", "calculus", "bounds"))
    p_study.add_argument("--paths", type=int, default=20_000)
    p_study.add_argument("--instances", type=int, default=500)
    p_study.add_argument("--seed", type=int, default=0)
    p_study.add_argument("--out")
    p_study.add_argument("--config")
    p_study.set_defaults(func=cmd_study)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    defaults = {
        action.dest: action.default
        for action in parser._subparsers._group_actions[0].choices[args.command]._actions
    }
    args = _apply_config(args, defaults)
    try:
        return args.func(args)
    except (ValueError, OverflowError) as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
