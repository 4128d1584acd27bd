#!/usr/bin/env python3
"""End-to-end demo: build the heat-problem solution network, then verify it.

Drives the same code paths as `kolmonet build` / `kolmonet verify` at the
reference budget (N, M, delta) = (8, 64, 2^-8) and reports the sampled
L^2 error against the closed-form solution.
"""

import argparse
import math

import numpy as np

from kolmonet import bounds, build, nets, problems


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=8)
    ap.add_argument("--M", type=int, default=64)
    ap.add_argument("--delta", type=float, default=2.0**-8)
    ap.add_argument("--seed", type=int, default=2026)
    ap.add_argument("--samples", type=int, default=1024)
    ap.add_argument("--out", default="heat_solution.json")
    args = ap.parse_args()

    tp = problems.heat_relu_problem(1)
    budget = bounds.Budget(N=args.N, M=args.M, delta=args.delta)
    sol = build.solve(tp.problem, eps=1.0, seed=args.seed, budget_override=budget)
    build.save_solution(sol, args.out)
    print("wrote %s (%d parameters)" % (args.out, nets.param_count(sol.net)))

    ts, xs = tp.measure.sample(args.samples, seed=123)
    got = nets.realize(sol.net, np.column_stack([ts, xs])).ravel()
    exact = tp.exact_solution(ts, xs)
    l2 = math.sqrt(float(np.mean((got - exact) ** 2)))
    cap = bounds.solution_error_bound(
        tp.problem.params, 1, budget.N, budget.M, budget.delta, tp.measure.mass
    )
    print("sampled L2 error vs closed form: %.5f (closed-form bound %.3g)" % (l2, cap))


if __name__ == "__main__":
    main()
