"""Builder contracts: emulation error, adaptedness, growth, averaging, IO."""

import math

import numpy as np
import pytest

from kolmonet import bounds, build, nets, problems, sde


def _grid(N, T=1.0):
    return np.arange(N + 1) * (T / N)


def _envelopes(x, increments, C, c, grid, n):
    """Gronwall envelopes g_n and g_{n+1} for one path."""
    walk = np.concatenate([np.zeros((1, increments.shape[1])), np.cumsum(increments, axis=0)])
    norms = np.linalg.norm(walk, axis=1)
    out = []
    for m in (n, n + 1):
        out.append(
            bounds.drift_growth_envelope(
                float(np.linalg.norm(x)), C, c, grid[m], float(norms[: m + 1].max())
            )
        )
    return out


def _zero_drift(d):
    return nets.affine_net(np.zeros((d, d)), np.zeros(d))


def test_single_step_zero_drift_zero_noise_is_exact_identity():
    psi = build.build_euler_net(_zero_drift(1), np.zeros((1, 1)), _grid(1), 0.5)
    gen = np.random.default_rng(0)
    pts = np.column_stack([gen.uniform(0, 1, 20), gen.uniform(-3, 3, 20)])
    out = nets.realize(psi, pts)
    assert np.array_equal(out.ravel(), pts[:, 1])


def test_grid_time_deviation_within_bound():
    gen = np.random.default_rng(1)
    d, N, delta = 1, 4, 2.0**-6
    tp = problems.ou_linear_problem(d)
    drift = tp.problem.drift_net
    inc = gen.normal(scale=0.5, size=(N, d))
    grid = _grid(N)
    psi = build.build_euler_net(drift, inc, grid, delta, growth=(0.0, 1.0))
    for x in (-1.2, 0.0, 0.7):
        noise = sde.BrownianGrid(
            seed=0, N=N, M=1, d=d, T=1.0, increments=inc[None], diffusion=np.eye(d)
        )
        state = sde.euler_grid(np.array([x]), drift, noise)
        for n in range(N + 1):
            val = nets.realize(psi, np.array([grid[n], x]))
            want = state.grid_values[0, n]
            g = _envelopes(np.array([x]), inc, 0.0, 1.0, grid, min(n, N - 1))
            cap = bounds.euler_emulation_error_bound(delta, d, 3.0, g[0], g[1])
            assert np.abs(val - want).max() <= cap


def test_random_points_deviation_within_bound():
    gen = np.random.default_rng(2)
    d, N, delta = 1, 2, 2.0**-5
    drift = problems.ou_linear_problem(d).problem.drift_net
    inc = gen.normal(scale=0.7, size=(N, d))
    grid = _grid(N)
    psi = build.build_euler_net(drift, inc, grid, delta, growth=(0.0, 1.0))
    noise = sde.BrownianGrid(
        seed=0, N=N, M=1, d=d, T=1.0, increments=inc[None], diffusion=np.eye(d)
    )
    worst = 0.0
    for _ in range(1000):
        t = gen.uniform(0.0, 1.0)
        x = gen.uniform(-2.0, 2.0, size=d)
        state = sde.euler_grid(x, drift, noise)
        want = sde.interpolate(state, t)[0]
        got = nets.realize(psi, np.concatenate([[t], x]))
        n = min(int(t * N), N - 1)
        g = _envelopes(x, inc, 0.0, 1.0, grid, n)
        cap = bounds.euler_emulation_error_bound(delta, d, 3.0, g[0], g[1])
        dev = np.abs(got - want).max()
        worst = max(worst, dev / cap)
        assert dev <= cap
    assert worst <= 1.0


def test_adaptedness_exact_on_shared_prefix():
    gen = np.random.default_rng(3)
    for d in (1, 2):
        N = 4
        drift = problems.ou_linear_problem(d).problem.drift_net
        y = gen.normal(size=(N, d))
        for n_agree in (1, 2, 3):
            z = y.copy()
            z[n_agree:] += gen.normal(size=(N - n_agree, d))
            py = build.build_euler_net(drift, y, _grid(N), 0.25, growth=(0.0, 1.0))
            pz = build.build_euler_net(drift, z, _grid(N), 0.25, growth=(0.0, 1.0))
            ts = np.linspace(0.0, n_agree / N, 9)
            pts = np.column_stack([ts, np.tile(gen.uniform(-2, 2, size=d), (9, 1))])
            assert np.array_equal(nets.realize(py, pts), nets.realize(pz, pts))


def test_growth_bound_sampled():
    gen = np.random.default_rng(4)
    for d in (1, 2):
        N = 2
        drift = problems.ou_linear_problem(d).problem.drift_net
        grid = _grid(N)
        for _ in range(16):
            y = gen.normal(size=(N, d))
            psi = build.build_euler_net(drift, y, grid, 0.5, growth=(0.0, 1.0))
            ts = gen.uniform(0, 1, size=313)
            xs = gen.uniform(-3, 3, size=(313, d))
            vals = np.linalg.norm(nets.realize(psi, np.column_stack([ts, xs])), axis=1)
            for j in range(313):
                n = min(int(ts[j] * N), N - 1)
                g = _envelopes(xs[j], y, 0.0, 1.0, grid, n)
                cap = 6 * math.sqrt(d) + 2 * (g[0] ** 2 + g[1] ** 2)
                assert vals[j] <= cap


def test_builder_input_validation():
    drift = _zero_drift(1)
    with pytest.raises(ValueError):
        build.build_euler_net(drift, np.zeros((2, 1)), _grid(2), 1.5)
    with pytest.raises(ValueError):
        build.build_euler_net(drift, np.zeros((2, 1)), np.array([0.0, 0.3, 1.0]), 0.5)


def test_average_m1_reduces_to_composition():
    tp = problems.heat_relu_problem(1)
    noise = sde.sample_brownian(7, 2, 1, 1, 1.0, sde.sqrtm_psd(2 * tp.problem.A))
    sol = build.build_mc_average_net(tp.problem, bounds.Budget(N=2, M=1, delta=0.5), noise)
    direct = nets.compose(
        tp.problem.init_net,
        build.build_euler_net(
            tp.problem.drift_net, noise.increments[0], noise.grid, 0.5, growth=(0.0, 0.0)
        ),
    )
    assert sol.net.dims == direct.dims
    gen = np.random.default_rng(5)
    pts = np.column_stack([gen.uniform(0, 1, 50), gen.uniform(-2, 2, 50)])
    assert np.array_equal(nets.realize(sol.net, pts), nets.realize(direct, pts))


def _direct_mc_average(tp, noise, M, ts, xs):
    """Oracle: per sampled point, average the initial net over the scheme paths."""
    out = np.empty(len(ts))
    for i in range(len(ts)):
        state = sde.euler_grid(xs[i], tp.problem.drift_net, noise)
        vals = nets.realize(tp.problem.init_net, sde.interpolate(state, ts[i]))
        out[i] = vals[:M].mean()
    return out


def test_average_deviation_within_mc_sum_bound():
    tp = problems.heat_relu_problem(1)
    budget = bounds.Budget(N=4, M=4, delta=2.0**-6)
    B = sde.sqrtm_psd(2 * tp.problem.A)
    noise = sde.sample_brownian(11, budget.N, budget.M, 1, 1.0, B)
    sol = build.build_mc_average_net(tp.problem, budget, noise)
    gen = np.random.default_rng(6)
    ts = gen.uniform(0, 1, 128)
    xs = gen.uniform(-1, 1, size=(128, 1))
    got = nets.realize(sol.net, np.column_stack([ts, xs])).ravel()
    want = _direct_mc_average(tp, noise, budget.M, ts, xs)
    walk = np.concatenate(
        [np.zeros((budget.M, 1, 1)), np.cumsum(noise.increments, axis=1)], axis=1
    )
    max_walk = np.linalg.norm(walk, axis=2).max(axis=1)
    for i in range(len(ts)):
        xn = abs(float(xs[i, 0]))
        h2 = [bounds.path_growth_factor(xn, 0.0, 0.0, 1.0, w, 2.0) for w in max_walk]
        h3 = [bounds.path_growth_factor(xn, 0.0, 0.0, 1.0, w, 3.0) for w in max_walk]
        cap = bounds.mc_sum_error_bound(budget.delta, 1, 0.0, 1.0, budget.M, h2, h3)
        assert abs(got[i] - want[i]) <= cap


def test_param_count_within_bound_small_instance():
    tp = problems.heat_relu_problem(1)
    budget = bounds.Budget(N=2, M=2, delta=0.5)
    noise = sde.sample_brownian(13, 2, 2, 1, 1.0, sde.sqrtm_psd(2 * tp.problem.A))
    sol = build.build_mc_average_net(tp.problem, budget, noise)
    count = nets.param_count(sol.net)
    assert count <= bounds.solution_param_bound(tp.problem.params, 1, 2, 2, 0.5)
    assert sol.provenance["bound_values"]["param_count"] == count
    # the sharper per-construction forms hold as well
    frak_d = bounds.product_size_budget(0.5, 3.0)
    drift = tp.problem.drift_net
    assert count <= bounds.mc_sum_param_bound(
        2, 2, 1, frak_d, drift.depth, nets.param_count(drift), nets.param_count(tp.problem.init_net)
    )


def test_solve_deterministic_and_prefix_stable():
    tp = problems.heat_relu_problem(1)
    budget = bounds.Budget(N=2, M=2, delta=0.5)
    a = build.solve(tp.problem, 1.0, seed=99, budget_override=budget)
    b = build.solve(tp.problem, 1.0, seed=99, budget_override=budget)
    assert build.serialize(a) == build.serialize(b)
    # doubling M with the same seed keeps the per-path networks identical
    n2 = sde.sample_brownian(99, 2, 2, 1, 1.0, sde.sqrtm_psd(2 * tp.problem.A))
    n4 = sde.sample_brownian(99, 2, 4, 1, 1.0, sde.sqrtm_psd(2 * tp.problem.A))
    for m in range(2):
        pa = build.build_euler_net(tp.problem.drift_net, n2.increments[m], n2.grid, 0.5)
        pb = build.build_euler_net(tp.problem.drift_net, n4.increments[m], n4.grid, 0.5)
        for la, lb in zip(pa.layers, pb.layers):
            assert np.array_equal(la.weight, lb.weight)
            assert np.array_equal(la.bias, lb.bias)


def test_solve_without_override_advises():
    tp = problems.heat_relu_problem(1)
    with pytest.raises(OverflowError, match="override"):
        build.solve(tp.problem, 0.5, seed=0)


def test_serialize_round_trip_identity_based():
    net = nets.identity_net(3)
    sol = build.SolutionNet(net=net, provenance={"seed": 0, "N": 1, "M": 1, "delta": 1.0})
    data = build.serialize(sol)
    back = build.deserialize(data)
    assert build.serialize(back) == data
    x = np.array([0.3, -1.0, 2.0])
    assert np.array_equal(nets.realize(back.net, x), x)


def test_serialize_round_trip_random_net_bit_equal():
    gen = np.random.default_rng(8)
    layers = tuple(
        nets.Layer(gen.normal(size=(a, b)), gen.normal(size=a))
        for a, b in [(4, 2), (3, 4), (1, 3)]
    )
    sol = build.SolutionNet(net=nets.Network(layers), provenance={"seed": 1})
    back = build.deserialize(build.serialize(sol))
    for la, lb in zip(sol.net.layers, back.net.layers):
        assert np.array_equal(la.weight, lb.weight)
        assert np.array_equal(la.bias, lb.bias)


def test_deserialize_corrupted_header():
    sol = build.SolutionNet(net=nets.identity_net(2), provenance={"seed": 0})
    data = build.serialize(sol).decode()
    with pytest.raises(build.SolutionNetFormatError):
        build.deserialize(data.replace('"dims": [2, 4, 2]', '"dims": [2, 4]').encode())
    with pytest.raises(build.SolutionNetFormatError):
        build.deserialize(b"not json at all")
    with pytest.raises(build.SolutionNetFormatError):
        build.deserialize(data.replace("kolmonet-solution", "something-else").encode())


def test_pde_problem_validation():
    with pytest.raises(ValueError):
        build.PdeProblem(
            drift_net=_zero_drift(2),
            init_net=nets.affine_net(np.ones((1, 3))),
            A=np.eye(2),
            T=1.0,
            params=bounds.RegularityParams(T=1.0, kappa=1.0),
        )
    # drift too large for the declared kappa
    with pytest.raises(ValueError):
        build.PdeProblem(
            drift_net=nets.affine_net(5.0 * np.eye(1)),
            init_net=nets.affine_net(np.ones((1, 1))),
            A=np.eye(1),
            T=1.0,
            params=bounds.RegularityParams(T=1.0, kappa=1.0),
        )


def test_path_net_param_count_within_display_bound():
    tp = problems.ou_linear_problem(1)
    drift = tp.problem.drift_net
    delta = 2.0**-4
    noise = sde.sample_brownian(15, 2, 1, 1, 1.0, sde.sqrtm_psd(2 * tp.problem.A))
    psi = build.build_euler_net(drift, noise.increments[0], noise.grid, delta, growth=(0.0, 1.0))
    cap = bounds.euler_net_param_bound(
        2, 1, bounds.product_size_budget(delta, 3.0), drift.depth, nets.param_count(drift)
    )
    assert nets.param_count(psi) <= cap
