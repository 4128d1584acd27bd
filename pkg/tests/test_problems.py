"""Benchmark problems: closed forms, hypothesis inequalities, MC agreement."""

import math
import zlib

import numpy as np
import pytest

from kolmonet import nets, problems, sde


def test_heat_initial_condition():
    tp = problems.heat_relu_problem(3)
    gen = np.random.default_rng(0)
    x = gen.uniform(-2, 2, size=(50, 3))
    want = np.maximum(x, 0.0).sum(axis=1)
    assert np.allclose(tp.exact_solution(np.zeros(50), x), want, rtol=0, atol=1e-15)
    assert np.allclose(nets.realize(tp.problem.init_net, x).ravel(), want, rtol=0, atol=1e-14)


def test_heat_value_at_origin():
    tp = problems.heat_relu_problem(1)
    for t in (0.1, 0.5, 1.0):
        v = tp.exact_solution(np.array([t]), np.zeros((1, 1)))[0]
        assert v == pytest.approx(math.sqrt(t / math.pi), rel=1e-12)


def test_heat_feynman_kac_agreement():
    tp = problems.heat_relu_problem(2)
    pb = tp.problem
    f0 = lambda y: nets.realize(pb.init_net, y).ravel()
    t, x = 0.5, np.array([1.0, -1.0])
    est, se = sde.feynman_kac(f0, pb.drift_net, pb.A, t, x, 100_000, 16, 31)
    exact = tp.exact_solution(np.array([t]), x[None, :])[0]
    assert abs(est - exact) <= 4 * se


def test_ou_initial_and_symmetry():
    tp = problems.ou_linear_problem(3)
    gen = np.random.default_rng(1)
    x = gen.uniform(-2, 2, size=(20, 3))
    assert np.allclose(tp.exact_solution(np.zeros(20), x), x.sum(axis=1), rtol=1e-15)
    assert np.allclose(tp.exact_solution(gen.uniform(0, 1, 20), np.zeros((20, 3))), 0.0, atol=0)


def test_ou_drift_net_is_negation():
    tp = problems.ou_linear_problem(2)
    gen = np.random.default_rng(2)
    x = gen.uniform(-3, 3, size=(20, 2))
    assert np.array_equal(nets.realize(tp.problem.drift_net, x), -x)


def test_ou_feynman_kac_agreement():
    tp = problems.ou_linear_problem(1)
    pb = tp.problem
    f0 = lambda y: nets.realize(pb.init_net, y).ravel()
    est, se = sde.feynman_kac(f0, pb.drift_net, pb.A, 1.0, np.array([0.9]), 100_000, 256, 32)
    exact = tp.exact_solution(np.array([1.0]), np.array([[0.9]]))[0]
    # allow the Euler oracle bias on top of the MC band
    assert abs(est - exact) <= 4 * se + 1.0 / 256


def test_quadratic_initial_grid_oracle():
    tp = problems.quadratic_heat_problem(2, R=2.0)
    g = np.linspace(-2.0, 2.0, 41)
    A, B = np.meshgrid(g, g)
    x = np.column_stack([A.ravel(), B.ravel()])
    net_vals = nets.realize(tp.problem.init_net, x).ravel()
    want = (x**2).sum(axis=1)
    assert np.abs(net_vals - want).max() <= tp.init_accuracy


def test_quadratic_solution_at_origin():
    tp = problems.quadratic_heat_problem(3)
    for t in (0.0, 0.25, 1.0):
        assert tp.exact_solution(np.array([t]), np.zeros((1, 3)))[0] == pytest.approx(6 * t)


def test_quadratic_heat_consistency__dudt_equals_laplacian():
    # finite differences of the closed form at a handful of points
    tp = problems.quadratic_heat_problem(2)
    gen = np.random.default_rng(3)
    h = 1e-5
    for _ in range(5):
        t = gen.uniform(0.2, 0.8)
        x = gen.uniform(-1, 1, size=2)
        dudt = (
            tp.exact_solution(np.array([t + h]), x[None, :])[0]
            - tp.exact_solution(np.array([t - h]), x[None, :])[0]
        ) / (2 * h)
        lap = 0.0
        for i in range(2):
            e = np.zeros(2)
            e[i] = h
            lap += (
                tp.exact_solution(np.array([t]), (x + e)[None, :])[0]
                - 2 * tp.exact_solution(np.array([t]), x[None, :])[0]
                + tp.exact_solution(np.array([t]), (x - e)[None, :])[0]
            ) / h**2
        assert dudt == pytest.approx(lap, rel=1e-4, abs=1e-4)


@pytest.mark.parametrize("name", problems.problem_names())
@pytest.mark.parametrize("d", [1, 3])
def test_hypothesis_inequalities_sampled(name, d):
    tp = problems.get_problem(name, d)
    pb = tp.problem
    k = pb.params.kappa
    gen = np.random.default_rng(zlib.crc32(name.encode()) + d)
    x = gen.normal(scale=2.0, size=(10_000, d))
    y = gen.normal(scale=2.0, size=(10_000, d))
    xn = np.linalg.norm(x, axis=1)
    yn = np.linalg.norm(y, axis=1)
    # drift growth
    dv = np.linalg.norm(nets.realize(pb.drift_net, x), axis=1)
    assert np.all(dv <= k * (d**k + xn) * (1 + 1e-9) + 1e-9)
    # drift Lipschitz
    dd = np.linalg.norm(nets.realize(pb.drift_net, x) - nets.realize(pb.drift_net, y), axis=1)
    assert np.all(dd <= k * np.linalg.norm(x - y, axis=1) * (1 + 1e-9) + 1e-9)
    # initial-value local Lipschitz
    iv = np.abs(
        nets.realize(pb.init_net, x).ravel() - nets.realize(pb.init_net, y).ravel()
    )
    cap = k * d**k * (1 + xn**k + yn**k) * np.linalg.norm(x - y, axis=1)
    assert np.all(iv <= cap * (1 + 1e-9) + 1e-9)
    # initial value plus diffusion trace growth
    f0 = np.abs(nets.realize(pb.init_net, x).ravel())
    assert np.all(f0 + np.trace(pb.A) <= k * d**k * (1 + xn**k) * (1 + 1e-9) + 1e-9)


@pytest.mark.parametrize("name", problems.problem_names())
def test_exact_solution_matches_feynman_kac(name):
    tp = problems.get_problem(name, 2)
    pb = tp.problem
    f0 = lambda y: nets.realize(pb.init_net, y).ravel()
    gen = np.random.default_rng(zlib.crc32(name.encode()))
    lo, hi = tp.measure.alpha, tp.measure.beta
    for j in range(20):
        t = gen.uniform(0.05, pb.T)
        x = gen.uniform(lo, hi, size=2)
        est, se = sde.feynman_kac(f0, pb.drift_net, pb.A, t, x, 20_000, 64, 1000 + j)
        exact = tp.exact_solution(np.array([t]), x[None, :])[0]
        # allowance: MC band, Euler oracle bias, initial-net accuracy
        tol = 4 * se + 2.0 * pb.params.c * t / 64 + tp.init_accuracy
        assert abs(est - exact) <= tol + 1e-12


def test_registry():
    assert problems.problem_names() == ["heat_relu", "ou_linear", "quadratic_heat"]
    with pytest.raises(KeyError):
        problems.get_problem("nope", 1)
