"""Assembly of the space-time solution network.

Given drift / initial-value networks, a diffusion matrix, a budget
(N Euler steps, M Monte Carlo paths, product accuracy delta) and one
sampled Brownian realization, ``build_mc_average_net`` constructs a
single rectifier network in (t, x) whose realization tracks the Monte
Carlo average (1/M) sum_m f0(Y_t^{m,x}) of the linearly interpolated
Euler scheme, and hence the PDE solution.

Construction of one path network: the scheme value is written as the
telescoping sum

    Y_t = x + sum_n ramp_n(t) * [ (T/N) drift(Y_{tau_n}) + y_{n+1} ]

where ramp_n is the clipped interpolation ramp of cell n.  Grid values
Y_{tau_n} are exact subnetworks (iterated affine/drift steps); only the
ramp-times-increment couplings need approximate multiplication, realized
by ``product_net`` blocks whose accuracy is split as delta / (N d) and
whose range is sized from the Gronwall growth envelope so the emulation
error contract holds for every (t, x).  Ramps vanish identically left of
their cell and products annihilate zero factors exactly, which makes the
network depend on increments y_k, k > n, only through exact zeros for
t <= tau_n (adaptedness).

The M-path average is assembled as a depth pipeline: path blocks run one
after another over carried (t, x) channels while a running accumulator
collects the outputs.  The realization equals the weighted average of
the member realizations; parameters grow linearly in M, comfortably
inside the quadratic parameter budget.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np

from . import nets
from .bounds import (
    Budget,
    RegularityParams,
    plan_budget,
    solution_error_bound,
    solution_param_bound,
)
from .nets import Layer, Network
from .sde import BrownianGrid, sample_brownian, sqrtm_psd


class SolutionNetFormatError(ValueError):
    """Raised when a serialized solution network cannot be parsed."""


@dataclass(frozen=True)
class PdeProblem:
    """Kolmogorov PDE data: drift network, initial-value network, diffusion, horizon."""

    drift_net: Network
    init_net: Network
    A: np.ndarray
    T: float
    params: RegularityParams

    def __post_init__(self):
        object.__setattr__(self, "A", np.asarray(self.A, dtype=np.float64))
        d = self.drift_net.in_dim
        if self.drift_net.out_dim != d:
            raise ValueError("drift network must map R^d to R^d")
        if self.init_net.in_dim != d or self.init_net.out_dim != 1:
            raise ValueError("initial-value network must map R^d to R")
        if self.A.shape != (d, d):
            raise ValueError("diffusion matrix must be d x d")
        if self.T <= 0:
            raise ValueError("horizon must be positive")
        self._spot_check_growth()

    @property
    def d(self) -> int:
        return self.drift_net.in_dim

    def _spot_check_growth(self):
        # the drift growth hypothesis ||drift(x)|| <= kappa (d^kappa + ||x||)
        # is relied on by every bound; sample it rather than trusting the caller
        k = self.params.kappa
        gen = np.random.Generator(np.random.Philox(key=1))
        x = gen.normal(scale=3.0, size=(256, self.d))
        vals = np.linalg.norm(nets.realize(self.drift_net, x), axis=1)
        cap = k * (self.d**k + np.linalg.norm(x, axis=1))
        if not np.all(vals <= cap * (1.0 + 1e-9) + 1e-12):
            raise ValueError("drift network violates the growth hypothesis for kappa=%g" % k)

    def hash(self) -> str:
        h = hashlib.sha256()
        for net in (self.drift_net, self.init_net):
            h.update(repr(net.dims).encode())
            for layer in net.layers:
                h.update(layer.weight.tobytes())
                h.update(layer.bias.tobytes())
        h.update(self.A.tobytes())
        h.update(repr((self.T, self.params)).encode())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class SolutionNet:
    """A built space-time network with its build provenance."""

    net: Network
    provenance: dict


def _product_range(N: int, d: int, delta: float, C: float, c: float) -> float:
    """Range bound for the ramp-times-increment product blocks.

    Sized so that whenever any product runs outside its accurate range,
    the growth envelope G = g_{n+1}(x, y) is already so large that the
    quadratic out-of-range error N d (1 + a + b G)^2 / 2 is below
    delta * G^3, keeping the total within the emulation error contract.
    Callers pass step-scaled growth constants (a = C T / N, b = c T / N + 2).
    """
    a = C
    b = c + 2.0
    g_star = max(
        1.0,
        (2.0 * N * d * (1.0 + a) ** 2 / delta) ** (1.0 / 3.0),
        2.0 * N * d * b * b / delta,
    )
    return max(1.0, (1.0 + a + b * g_star) / 2.0)


def build_euler_net(
    drift_net: Network,
    increments: np.ndarray,
    grid: np.ndarray,
    delta: float,
    growth=(0.0, 0.0),
    q: float = 3.0,
) -> Network:
    """Space-time network emulating one linearly interpolated Euler path.

    ``increments`` has shape (N, d) (one noise vector per step), ``grid``
    is the uniform grid n T / N, and ``growth`` = (C, c) bounds the drift
    by ||drift(x)|| <= C + c ||x||.  The result maps (t, x) in R^{d+1} to
    an approximation of Y_t^{x,y} with error at most
    delta (2 sqrt(d) + g_n^q + g_{n+1}^q) on cell n (q >= 3).
    """
    if not (0.0 < delta <= 1.0):
        raise ValueError("delta must lie in (0, 1]")
    if q < 3.0:
        raise ValueError("error exponent q must be >= 3")
    increments = np.asarray(increments, dtype=np.float64)
    grid = np.asarray(grid, dtype=np.float64)
    N = len(grid) - 1
    d = drift_net.in_dim
    if increments.shape != (N, d):
        raise ValueError("increments must have shape (N, d) = (%d, %d)" % (N, d))
    T = grid[-1]
    if T <= 0 or not np.array_equal(grid, np.arange(N + 1) * (T / N)):
        raise ValueError("grid must be the uniform grid n T / N")
    C, c = growth
    h = T / N
    delta_step = delta / (N * d)
    R = _product_range(N, d, delta, h * C, h * c)
    prod = nets.product_net(delta_step, R)

    id_aff = nets.affine_net(np.eye(d))
    step_base = nets.average_nets(
        [nets.extend_length(id_aff, drift_net.depth), drift_net], [1.0, h]
    )
    coords = list(range(1, d + 1))
    grid_value_net = id_aff  # realizes Y_{tau_n} exactly; starts at Y_0 = x
    branches = []
    for n in range(N):
        # (T/N) drift(Y_{tau_n}) + y_{n+1}, as a function of x
        delta_net = nets.compose(
            nets.affine_net(h * np.eye(d), increments[n]),
            nets.compose(drift_net, grid_value_net),
        )
        ramp = nets.select_inputs(nets.hat_time_net(grid, n), [0], d + 1)
        feed = nets.parallel_stack([ramp, nets.select_inputs(delta_net, coords, d + 1)])
        prods = nets.parallel_stack(
            [nets.select_inputs(prod, [0, 1 + i], 1 + d) for i in range(d)]
        )
        # identity boundary keeps the ramp value materialized, so products
        # see an exact zero left of the cell
        branches.append(nets.concat_with_identity(prods, feed))
        if n < N - 1:
            grid_value_net = nets.compose(
                nets.compose(nets.affine_net(np.eye(d), increments[n]), step_base),
                grid_value_net,
            )
    passthrough = nets.select_inputs(id_aff, coords, d + 1)
    return nets.average_nets([passthrough] + branches, [1.0] * (N + 1))


def _pipeline_average(members, scale: float) -> Network:
    """Network realizing scale * sum_m realize(members[m], .) via a depth pipeline.

    Inputs are carried as rectified (positive, negative) channel pairs;
    member blocks execute one after another and feed a running
    accumulator pair.  Parameter count is linear in the member count.
    """
    P = members[0].in_dim
    for m in members:
        if m.in_dim != P or m.out_dim != 1:
            raise ValueError("pipeline members must share the input and be scalar")
    pairs = 2 * P
    width0 = pairs + 2  # carried pairs plus the accumulator pair
    read = np.hstack([np.eye(P), -np.eye(P)])
    entry = np.zeros((width0, P))
    entry[:P, :] = np.eye(P)
    entry[P:pairs, :] = -np.eye(P)
    layers = [Layer(entry, np.zeros(width0))]
    for net in members:
        prev = 0
        for k in range(net.depth - 1):
            lay = net.layers[k]
            w = lay.out_dim
            wk = np.zeros((width0 + w, width0 + prev))
            wk[:width0, :width0] = np.eye(width0)
            bk = np.zeros(width0 + w)
            if k == 0:
                wk[width0:, :pairs] = lay.weight @ read
            else:
                wk[width0:, width0:] = lay.weight
            bk[width0:] = lay.bias
            layers.append(Layer(wk, bk))
            prev = w
        out = net.layers[-1]
        wt = np.zeros((width0, width0 + prev))
        bt = np.zeros(width0)
        wt[:pairs, :pairs] = np.eye(pairs)
        wt[pairs, pairs] = 1.0
        wt[pairs, pairs + 1] = -1.0
        wt[pairs + 1, pairs] = -1.0
        wt[pairs + 1, pairs + 1] = 1.0
        if net.depth == 1:
            folded = out.weight @ read
            wt[pairs, :pairs] += folded[0]
            wt[pairs + 1, :pairs] -= folded[0]
        else:
            wt[pairs, width0:] = out.weight[0]
            wt[pairs + 1, width0:] = -out.weight[0]
        bt[pairs] = out.bias[0]
        bt[pairs + 1] = -out.bias[0]
        layers.append(Layer(wt, bt))
    final = np.zeros((1, width0))
    final[0, pairs] = scale
    final[0, pairs + 1] = -scale
    layers.append(Layer(final, np.zeros(1)))
    return Network(tuple(layers))


def build_mc_average_net(problem: PdeProblem, budget: Budget, noise: BrownianGrid) -> SolutionNet:
    """Assemble the full solution network for one Brownian realization.

    The realization approximates (1/M) sum_m f0(Y_t^{m,x}); the parameter
    count is asserted against the closed-form budget bound at build time.
    """
    d, T = problem.d, problem.T
    if noise.d != d or noise.N != budget.N or noise.M < budget.M:
        raise ValueError("noise grid does not match the budget/problem")
    if abs(noise.T - T) > 0:
        raise ValueError("noise horizon differs from the problem horizon")
    grid = noise.grid
    growth = (problem.params.C, problem.params.c)
    paths = [
        nets.compose(
            problem.init_net,
            build_euler_net(
                problem.drift_net, noise.increments[m], grid, budget.delta, growth
            ),
        )
        for m in range(budget.M)
    ]
    if budget.M == 1:
        net = paths[0]
    else:
        net = _pipeline_average(paths, 1.0 / budget.M)
    p_count = nets.param_count(net)
    p_bound = solution_param_bound(problem.params, d, budget.N, budget.M, budget.delta)
    if p_count > p_bound:
        raise AssertionError(
            "built network exceeds the parameter budget: %d > %g" % (p_count, p_bound)
        )
    provenance = {
        "problem_hash": problem.hash(),
        "seed": int(noise.seed),
        "N": int(budget.N),
        "M": int(budget.M),
        "delta": float(budget.delta),
        "bound_values": {
            "param_count": int(p_count),
            "param_bound": float(p_bound),
            "error_bound_unit_mass": float(
                solution_error_bound(problem.params, d, budget.N, budget.M, budget.delta, 1.0)
            ),
        },
    }
    return SolutionNet(net=net, provenance=provenance)


def solve(problem: PdeProblem, eps: float, seed: int, budget_override: Budget | None = None) -> SolutionNet:
    """Plan a budget for accuracy ``eps`` (or take the override), sample one
    Brownian realization, and build the solution network.

    The planned budgets are astronomically large for realistic inputs;
    without an override this raises with advice as soon as the plan is
    not buildable.  With an override, only the computable bounds for that
    budget are guaranteed.
    """
    if budget_override is None:
        budget = plan_budget(problem.params, problem.d, eps).budget()
    else:
        budget = budget_override
    B = sqrtm_psd(2.0 * problem.A)
    noise = sample_brownian(seed, budget.N, budget.M, problem.d, problem.T, B)
    return build_mc_average_net(problem, budget, noise)


def _fmt(v: float) -> str:
    if not math.isfinite(v):
        raise ValueError("cannot serialize non-finite value %r" % v)
    return format(v, ".17g")


def _write_network(fh, net: Network):
    fh.write('{"version": %d, "dims": %s, "layers": [' % (
        nets.NETWORK_FORMAT_VERSION, json.dumps(list(net.dims))))
    for k, layer in enumerate(net.layers):
        if k:
            fh.write(", ")
        fh.write('{"weight": [')
        fh.write(", ".join(_fmt(v) for v in layer.weight.ravel().tolist()))
        fh.write('], "bias": [')
        fh.write(", ".join(_fmt(v) for v in layer.bias.tolist()))
        fh.write("]}")
    fh.write("]}")


def serialize(solution: SolutionNet) -> bytes:
    """Versioned text form: provenance block plus the network document.

    Reals carry 17 significant digits so deserialization is bit-exact;
    identical builds serialize to identical bytes.
    """
    import io

    buf = io.StringIO()
    buf.write('{"format": "kolmonet-solution", "version": 1, "provenance": ')
    buf.write(json.dumps(solution.provenance, sort_keys=True))
    buf.write(', "network": ')
    _write_network(buf, solution.net)
    buf.write("}")
    return buf.getvalue().encode()


def deserialize(data: bytes) -> SolutionNet:
    try:
        doc = json.loads(data.decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SolutionNetFormatError("not a solution-network document: %s" % exc) from None
    if not isinstance(doc, dict) or doc.get("format") != "kolmonet-solution":
        raise SolutionNetFormatError("missing solution-network header")
    if doc.get("version") != 1:
        raise SolutionNetFormatError("unsupported version %r" % doc.get("version"))
    try:
        net = nets.network_from_doc(doc["network"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SolutionNetFormatError("bad network block: %s" % exc) from None
    prov = doc.get("provenance")
    if not isinstance(prov, dict):
        raise SolutionNetFormatError("missing provenance block")
    return SolutionNet(net=net, provenance=prov)


def save_solution(solution: SolutionNet, path):
    with open(path, "wb") as fh:
        fh.write(serialize(solution))


def load_solution(path) -> SolutionNet:
    with open(path, "rb") as fh:
        return deserialize(fh.read())
