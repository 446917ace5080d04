"""Influence of one input qubit on one output qubit, and the per-layer determinant lower bound."""
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.stats import linregress

from . import kernels
from .circuits import Architecture, brickwork, lightcone, sample_circuit
from .errors import InvalidArgument
from .linalg import PAULIS, frobenius_norm, haar_states, haar_unitary, partial_trace
from .rng import RngStream, as_generator
from .simulator import product_input, simulate_reduced
from .tolerances import RANK_TOL

_SIGMAS = (PAULIS["X"], PAULIS["Y"], PAULIS["Z"])


@dataclass
class DifferenceSubspace:
    num_qubits: int
    basis: np.ndarray  # (rank, 2^k, 2^k), Hermitian, traceless, Frobenius-orthonormal

    @property
    def rank(self):
        return self.basis.shape[0]


def orthonormal_span(mats, k, tol=RANK_TOL):
    """Gram-Schmidt under the Frobenius inner product; drops dependent directions."""
    out = []
    for m in mats:
        v = np.array(m, dtype=complex)
        for b in out:
            v = v - np.vdot(b, v).real * b
        nv = np.linalg.norm(v)
        if nv > tol:
            out.append(v / nv)
    basis = np.array(out) if out else np.zeros((0, 2 ** k, 2 ** k), dtype=complex)
    return DifferenceSubspace(k, basis)


def _path_gates(arch, path):
    """Validate a wire path; return (layer, gate tuple, in qubit, out qubit) per hop."""
    if not path or path[0].time != 0:
        raise InvalidArgument("path must start at an input wire (time 0)")
    hops = []
    for prev, cur in zip(path, path[1:]):
        if not prev.time < cur.time <= arch.depth:
            raise InvalidArgument(f"path times must increase: {prev} -> {cur}")
        layer = arch.layers[cur.time - 1]
        gate = next((g for g in layer if prev.qubit in g), None)
        if gate is None or cur.qubit not in gate:
            raise InvalidArgument(f"no gate in layer {cur.time} joins {prev.qubit} and {cur.qubit}")
        for t in range(prev.time, cur.time - 1):
            if any(prev.qubit in g for g in arch.layers[t]):
                raise InvalidArgument(f"qubit {prev.qubit} is not idle in layer {t + 1}")
        hops.append((cur.time - 1, gate, prev.qubit, cur.qubit))
    last = path[-1]
    for t in range(last.time, arch.depth):
        if any(last.qubit in g for g in arch.layers[t]):
            raise InvalidArgument("path does not end on an output wire")
    return hops


def _pushed_differences(circuit, free, fixed_inputs, upto, keep):
    """Images of X, Y, Z at the free input on the qubits ``keep`` after ``upto`` layers."""
    layers = circuit.placed_layers()[:upto]
    base = list(fixed_inputs)
    out = []
    for s in _SIGMAS:
        base[free] = (PAULIS["I"] + s) / 2
        plus = simulate_reduced(layers, tuple(base), keep)
        base[free] = (PAULIS["I"] - s) / 2
        minus = simulate_reduced(layers, tuple(base), keep)
        out.append(plus - minus)
    return out


def input_difference_subspace(circuit, path, fixed_inputs, layer_i):
    """Span of the free input's Pauli differences at the inputs of the i-th gate on ``path``."""
    hops = _path_gates(circuit.architecture, path)
    if not 1 <= layer_i <= len(hops):
        raise InvalidArgument(f"layer_i must be in 1..{len(hops)}")
    t, gate, _, _ = hops[layer_i - 1]
    diffs = _pushed_differences(circuit, path[0].qubit, fixed_inputs, t, gate)
    return orthonormal_span(diffs, len(gate))


def transfer_matrix(gate, subspace, out_position):
    """3 x 3 real matrix (r, l) = Tr[(I_A kron sigma_r / sqrt 2) G xi_l G^dag], zero-padded."""
    gate = np.asarray(gate, dtype=complex)
    k = subspace.num_qubits
    if gate.shape != (2 ** k, 2 ** k):
        raise InvalidArgument("gate and subspace dimensions differ")
    if not 0 <= out_position < k:
        raise InvalidArgument("out_position outside the gate")
    m = np.zeros((3, 3))
    for l, xi in enumerate(subspace.basis):
        red = partial_trace(gate @ xi @ gate.conj().T, [out_position], k)
        for r, s in enumerate(_SIGMAS):
            m[r, l] = np.trace(s @ red).real / math.sqrt(2)
    return m


def det_abs(m):
    return float(abs(np.linalg.det(np.asarray(m, dtype=float))))


class Influence(NamedTuple):
    ratio: float
    in_lightcone: bool


def influence_ratio(circuit, free_input, out_qubit, rho, rho2, fixed_inputs=None):
    """||Phi(rho) - Phi(rho2)||_F / ||rho - rho2||_F at ``out_qubit``."""
    n = circuit.num_qubits
    if out_qubit not in lightcone(circuit.architecture, free_input):
        return Influence(0.0, False)
    rho = np.asarray(rho, dtype=complex)
    rho2 = np.asarray(rho2, dtype=complex)
    denom = frobenius_norm(rho - rho2)
    if denom == 0:
        raise InvalidArgument("rho and rho2 must differ")
    base = list(fixed_inputs if fixed_inputs is not None else product_input(n))
    layers = circuit.placed_layers()
    base[free_input] = rho
    a = simulate_reduced(layers, tuple(base), (out_qubit,))
    base[free_input] = rho2
    b = simulate_reduced(layers, tuple(base), (out_qubit,))
    return Influence(frobenius_norm(a - b) / denom, True)


def chain_factors(circuit, path, fixed_inputs=None):
    """Per-hop factors 2^{-k/2} * 2^{-k} |det M_i| along ``path``."""
    n = circuit.num_qubits
    fixed = fixed_inputs if fixed_inputs is not None else product_input(n)
    hops = _path_gates(circuit.architecture, path)
    free = path[0].qubit
    factors = []
    for t, gate, _, out_q in hops:
        k = len(gate)
        diffs = _pushed_differences(circuit, free, fixed, t, gate)
        sub = orthonormal_span(diffs, k)
        u = circuit.gates[t][circuit.architecture.layers[t].index(gate)]
        m = transfer_matrix(u, sub, gate.index(out_q))
        factors.append(2 ** (-k / 2) * 2 ** (-k) * det_abs(m))
    return factors


def chain_lower_bound(circuit, path, fixed_inputs=None):
    """Product of the per-hop factors; never exceeds the influence ratio along the path."""
    return float(np.prod(chain_factors(circuit, path, fixed_inputs)))


@dataclass
class LambdaSamples:
    k: int
    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def merge(self, other):
        if other.k != self.k:
            raise InvalidArgument("cannot merge samples of different k")
        return LambdaSamples(self.k, np.concatenate([self.values, other.values]),
                             {**self.metadata, "trials": len(self.values) + len(other.values)})


def fixed_subspace(k):
    """Pauli differences on the first qubit next to |0> on the others."""
    zero = np.array([[1, 0], [0, 0]], dtype=complex)
    rest = np.eye(1)
    for _ in range(k - 1):
        rest = np.kron(rest, zero)
    return orthonormal_span([np.kron(s, rest) for s in _SIGMAS], k)


def random_subspace(k, rng):
    """Admissible subspace: free-qubit differences next to random pure states, sent through a
    random (k+1)-qubit unitary with one qubit discarded."""
    g = as_generator(rng)
    rest = np.eye(1)
    for v in haar_states(2, k, g):
        rest = np.kron(rest, np.outer(v, v.conj()))
    w = haar_unitary(2 ** (k + 1), g)
    mats = [partial_trace(w @ np.kron(s, rest) @ w.conj().T, range(k), k + 1) for s in _SIGMAS]
    return orthonormal_span(mats, k)


def _det_batch(gates, sub, out_position):
    if sub.num_qubits == 2:
        return kernels.det_transfer(gates, sub.basis, out_position)
    return np.array([det_abs(transfer_matrix(u, sub, out_position)) for u in gates])


def sample_lambda(k, policy, trials, rng, out_position=1, batch=20000):
    """Draw 2^{-k} |det M| for Haar gates against a fixed or per-trial random subspace."""
    if trials < 1:
        raise InvalidArgument("trials must be >= 1")
    if policy not in ("fixed", "random"):
        raise InvalidArgument("policy is 'fixed' or 'random'")
    g = as_generator(rng)
    vals = []
    if policy == "fixed":
        sub = fixed_subspace(k)
        done = 0
        while done < trials:
            m = min(batch, trials - done)
            vals.append(_det_batch(haar_unitaries_k(k, m, g), sub, out_position))
            done += m
    else:
        for _ in range(trials):
            sub = random_subspace(k, g)
            vals.append(_det_batch(haar_unitaries_k(k, 1, g), sub, out_position))
    values = np.concatenate(vals) * 2.0 ** (-k)
    meta = {"policy": policy, "trials": int(trials), "out_position": out_position}
    if hasattr(rng, "seed"):
        meta["seed"] = rng.seed
    return LambdaSamples(k, values, meta)


def haar_unitaries_k(k, count, g):
    from .linalg import haar_unitaries
    return haar_unitaries(2 ** k, count, g)


def estimate_mu(k, num_subspaces, trials_per, rng, out_position=1):
    """min over random subspaces of the Monte Carlo mean of |det M|^2."""
    g = as_generator(rng)
    means = []
    for _ in range(num_subspaces):
        sub = random_subspace(k, g)
        d = _det_batch(haar_unitaries_k(k, trials_per, g), sub, out_position)
        means.append(float(np.mean(d ** 2)))
    return min(means), means


def power_tail_fit(values, x_grid):
    """Fit Pr[value <= x] ~ C' x^C on the grid; C' is raised to an envelope so the bound holds."""
    values = np.sort(np.asarray(values))
    x_grid = np.asarray(x_grid, dtype=float)
    p = np.searchsorted(values, x_grid, side="right") / len(values)
    ok = p > 0
    if ok.sum() < 3:
        raise InvalidArgument("need at least three grid points with nonzero mass")
    fit = linregress(np.log(x_grid[ok]), np.log(p[ok]))
    c = fit.slope
    cprime = float(np.max(p[ok] / x_grid[ok] ** c))
    return {"C": float(c), "C_prime": cprime, "C_prime_ols": float(math.exp(fit.intercept)),
            "r2": float(fit.rvalue ** 2), "x": x_grid.tolist(), "p": p.tolist()}


def moment_stability(values, t_grid, tolerance=0.5):
    """Largest t on the grid where the two halves of the sample agree on E[value^-t].

    Agreement means the half estimates differ by less than ``tolerance`` in
    relative terms. Returns (t, per-t table).
    """
    values = np.asarray(values)
    half = len(values) // 2
    a, b = values[:half], values[half:2 * half]
    best, table = None, []
    for t in sorted(t_grid):
        with np.errstate(divide="ignore", over="ignore"):
            ma, mb = np.mean(a ** (-t)), np.mean(b ** (-t))
        stable = bool(np.isfinite(ma) and np.isfinite(mb) and abs(ma - mb) <= tolerance * min(ma, mb))
        table.append({"t": float(t), "half_a": float(ma), "half_b": float(mb), "stable": stable})
        if stable:
            best = float(t)
    return best, table


@dataclass
class MixingBoundConfig:
    gamma: float
    c_k: float
    k: int = 2
    fit: dict = field(default_factory=dict)
    seed: int = None

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise InvalidArgument("gamma must lie in (0, 1)")
        if not self.c_k > 0:
            raise InvalidArgument("c_k must be positive")

    def bound(self, depth):
        return (2.0 ** (-depth) * self.gamma) ** self.c_k

    def to_json(self):
        return json.dumps({"k": self.k, "c_k": self.c_k, "gamma": self.gamma,
                           "fit": self.fit, "seed": self.seed}, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(gamma=d["gamma"], c_k=d["c_k"], k=d.get("k", 2), fit=d.get("fit", {}),
                   seed=d.get("seed"))

    def save(self, path):
        with open(path, "w") as f:
            f.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path) as f:
            return cls.from_json(f.read())


def edge_influences(n, depth, count, rng):
    """Influence of input 0 on output ``depth`` (the lightcone edge) for random brickwork circuits."""
    arch = brickwork(n, depth)
    one = np.array([[0, 0], [0, 1]], dtype=complex)
    zero = np.array([[1, 0], [0, 0]], dtype=complex)
    out = np.empty(count)
    for i in range(count):
        c = sample_circuit(arch, "haar", rng.child(depth, i))
        out[i] = influence_ratio(c, 0, depth, zero, one).ratio
    return out


def estimate_c_k(k, depth_range, circuits_per_depth, gamma, rng, n=16):
    """Calibrate the exponent c_k from gamma-quantiles of the edge influence ratio.

    For each depth D the gamma-quantile q(D) of the influence of input 0 on
    output D is computed and log2 q(D) is fitted against D by least squares.
    c_k is the fitted decay rate (minus the slope), raised if needed so that
    (2^-D gamma)^c_k <= q(D) holds at every sampled depth.
    """
    if k != 2:
        raise InvalidArgument("only two-qubit brickwork calibration is implemented")
    if not 0 < gamma < 1:
        raise InvalidArgument("gamma must lie in (0, 1)")
    if circuits_per_depth * gamma < 1:
        raise InvalidArgument("too few circuits per depth for the requested quantile")
    if not isinstance(rng, RngStream):
        raise InvalidArgument("calibration needs an RngStream for per-circuit streams")
    depths = sorted(int(d) for d in depth_range)
    if any(d + 1 > n for d in depths):
        raise InvalidArgument("depth too large for n")
    rows, needed = [], []
    for d in depths:
        vals = edge_influences(n, d, circuits_per_depth, rng)
        q = float(np.quantile(vals, gamma))
        rows.append({"depth": d, "quantile": q, "median": float(np.median(vals)),
                     "min": float(vals.min()), "trials": int(circuits_per_depth)})
        if d > 0:
            if q <= 0:
                raise InvalidArgument(f"quantile vanished at depth {d}")
            needed.append(math.log2(q) / (math.log2(gamma) - d))
    fit = {"n": n, "depths": rows, "per_depth_exponent": needed}
    c = max(needed) if needed else 1.0
    pos = [r for r in rows if r["depth"] > 0]
    if len(pos) >= 2:
        lr = linregress([r["depth"] for r in pos], [math.log2(r["quantile"]) for r in pos])
        fit.update(slope=float(lr.slope), intercept=float(lr.intercept), r2=float(lr.rvalue ** 2))
        # the per-depth decay rate is the fitted exponent; never go below what the data require
        c = max(c, -lr.slope)
    fit["min_valid_exponent"] = max(needed) if needed else None
    return MixingBoundConfig(gamma=gamma, c_k=float(c), k=k, fit=fit, seed=rng.seed)
