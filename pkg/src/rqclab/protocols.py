"""Depth testing, first-layer gate learning, layer peeling and the purity experiment."""
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import expm
from scipy.optimize import minimize

from .circuits import Circuit, brickwork, lightcone, sample_circuit
from .errors import CalibrationError, DepthGuardError, InvalidArgument, ModelMismatchError
from .linalg import PAULIS, frobenius_norm, haar_unitary, pauli_basis, single_qubit_state
from .metrics import EpsNet, d_otimes, diamond_distance_unitary
from .rng import RngStream
from .simulator import Oracle, process_tomography_single_qubit, product_input, simulate_reduced, tomography_estimate
from .tolerances import MIN_TOMOGRAPHY_EPS, OPT_TOL

_ZERO = single_qubit_state("0")
_ONE = single_qubit_state("1")
_SIGMA1 = ("X", "Y", "Z")
_SIGMA2 = ("I", "X", "Y", "Z")


def _streams(rng):
    if not isinstance(rng, RngStream):
        raise InvalidArgument("protocols need an RngStream so queries get independent streams")
    return rng


# -- depth test -------------------------------------------------------------

@dataclass(frozen=True)
class DepthTestParams:
    gamma: float
    c2: float
    max_depth: int = 64

    def __post_init__(self):
        if not 0 < self.gamma < 1 or not self.c2 > 0:
            raise InvalidArgument("need gamma in (0, 1) and c2 > 0")

    def eps(self, depth):
        return (2.0 ** (-2 * depth) * self.gamma) ** self.c2 / 4


def depth_test(oracle, params, rng, trace=None):
    """Smallest D for which flipping input 0 leaves output D+1 unchanged (up to tomography error).

    ``trace`` (a list) receives one record per iteration.
    """
    rng = _streams(rng)
    n = oracle.num_qubits
    for d in range(params.max_depth + 1):
        out = d + 1
        if out >= n:
            raise DepthGuardError(f"no output qubit left to probe at iteration {d} (n={n})")
        eps = params.eps(d)
        a = tomography_estimate(oracle, product_input(n, {0: "0"}), out, eps, rng.child(d, 0))
        b = tomography_estimate(oracle, product_input(n, {0: "1"}), out, eps, rng.child(d, 1))
        norm = frobenius_norm(a - b)
        if trace is not None:
            trace.append({"iteration": d, "eps": eps, "norm": norm, "stop": norm <= 2 * eps})
        if norm <= 2 * eps:
            return d
    raise DepthGuardError(f"depth test passed max_depth={params.max_depth}; c2 may be miscalibrated")


# -- gate learning ------------------------------------------------------------

@dataclass(frozen=True)
class GateLearnParams:
    gamma: float
    c2: float
    depth: int
    net: object = None  # EpsNet for discrete mode, None for continuum
    delta: float = None  # defaults to the net's eps in discrete mode

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise InvalidArgument("gamma must lie in (0, 1)")
        if self.delta is None and self.net is None:
            raise InvalidArgument("continuum mode needs delta")
        if self.depth < 0:
            raise InvalidArgument("depth must be >= 0")

    @property
    def target(self):
        return self.delta if self.delta is not None else self.net.eps

    def eps(self, depth=None):
        d = self.depth if depth is None else depth
        e = 1e-4 * self.target ** 2 * (2.0 ** (-d) * self.gamma) ** self.c2
        return max(e, MIN_TOMOGRAPHY_EPS)


@dataclass(frozen=True)
class ProbeLayout:
    gate: tuple  # qubits of the gate, in gate order
    free: int
    partner: int
    out: int
    depth: int  # residual depth including the gate's layer


def probe_layout(arch, layer, gate_index):
    """Which input to vary and which output to read when learning ``arch.layers[layer][gate_index]``.

    The output must be reachable from the partner qubit after the gate but not
    from the varied qubit, so only an entangling remainder of the gate can
    move it. The left qubit is varied and the farthest such output taken;
    when nothing qualifies (right boundary) the roles are mirrored.
    """
    if not 0 <= layer < arch.depth:
        raise InvalidArgument("layer out of range")
    gates = arch.layers[layer]
    if not 0 <= gate_index < len(gates):
        raise InvalidArgument("gate index out of range")
    g = gates[gate_index]
    if len(g) != 2:
        raise InvalidArgument("only two-qubit gates can be learned")
    rest = arch.truncated(layer + 1)
    for free, partner in ((g[0], g[1]), (g[1], g[0])):
        cand = lightcone(rest, partner) - lightcone(rest, free)
        if cand:
            out = max(cand, key=lambda q: (abs(q - free), -q))
            return ProbeLayout(g, free, partner, out, arch.depth - layer)
    raise InvalidArgument(f"no output separates the qubits of gate {g}")


def _probe_inputs(n, layout, s1, sign, partner_state):
    rho1 = (PAULIS["I"] + sign * PAULIS[s1]) / 2
    return product_input(n, {layout.free: rho1, layout.partner: partner_state})


def _partner_states(s2):
    if s2 == "I":
        return (_ZERO, _ONE)  # the mixed state as an even mixture of two sub-queries
    return ((PAULIS["I"] + PAULIS[s2]) / 2,)


def candidate_norms(oracle, candidate, layout, eps, rng, stop_at=None):
    """||pi - pi'||_F for each (sigma1, sigma2) after prefixing candidate^dag on the gate.

    Stops early once a norm reaches ``stop_at``.
    """
    n = oracle.num_qubits
    probe = oracle.with_prefix([(layout.gate, np.asarray(candidate).conj().T)])
    norms = []
    for i, s1 in enumerate(_SIGMA1):
        for j, s2 in enumerate(_SIGMA2):
            parts = _partner_states(s2)
            est = []
            for sign, tag in ((1, 0), (-1, 1)):
                acc = 0
                for h, st in enumerate(parts):
                    inp = _probe_inputs(n, layout, s1, sign, st)
                    acc = acc + tomography_estimate(probe, inp, layout.out, eps, rng.child(i, j, tag, h))
                est.append(acc / len(parts))
            norms.append(frobenius_norm(est[0] - est[1]))
            if stop_at is not None and norms[-1] >= stop_at:
                return norms
    return norms


def learn_first_gate(oracle, gate_index, params, rng, layer=0, arch=None, trace=None):
    """Learn gate ``gate_index`` of layer ``layer`` up to a left product unitary.

    The oracle must already undo layers before ``layer``. Discrete mode scans
    the net support and returns the first candidate no probe rejects;
    continuum mode minimises the probe signal over U(4) and applies the same
    rejection test to the minimiser.
    """
    rng = _streams(rng)
    arch = arch or oracle.circuit.architecture
    layout = probe_layout(arch, layer, gate_index)
    eps = params.eps(layout.depth)
    record = {"layer": layer, "gate": gate_index, "layout": layout.__dict__, "eps": eps}
    if trace is not None:
        trace.append(record)
    if params.net is not None:
        rejected = 0
        for idx, cand in enumerate(params.net.support):
            norms = candidate_norms(oracle, cand, layout, eps, rng.child(idx), stop_at=5 * eps)
            if max(norms) < 5 * eps:
                record.update(index=idx, rejected=rejected, max_norm=max(norms))
                return cand.copy()
            rejected += 1
        record.update(index=None, rejected=rejected)
        raise CalibrationError("every net element was rejected")
    cand = _continuum_search(oracle, layout, eps, rng.child(10 ** 6))
    norms = candidate_norms(oracle, cand, layout, eps, rng.child(10 ** 6 + 1))
    record.update(max_norm=max(norms))
    if max(norms) >= 5 * eps:
        raise CalibrationError(f"continuum search ended with probe norm {max(norms):.3g} >= 5 eps")
    return cand


def _continuum_search(oracle, layout, eps, rng, starts=4):
    """Minimise the summed squared probe norms over G = G0 exp(i H)."""
    n = oracle.num_qubits
    basis = pauli_basis(2)
    probes = []
    for s1 in _SIGMA1:
        for s2 in _SIGMA2:
            probes.append([( _probe_inputs(n, layout, s1, 1, st), _probe_inputs(n, layout, s1, -1, st))
                           for st in _partner_states(s2)])
    layers = oracle.layers()

    def signal(g):
        pre = [[(layout.gate, g.conj().T)]]
        tot = 0.0
        for group in probes:
            diff = 0
            for a, b in group:
                diff = diff + simulate_reduced(pre + layers, a, (layout.out,)) \
                    - simulate_reduced(pre + layers, b, (layout.out,))
            tot += np.linalg.norm(diff / len(group)) ** 2
        return tot

    best_g, best_f = None, np.inf
    gen = rng.generator()
    for s in range(starts):
        g0 = haar_unitary(4, gen)
        f = lambda x: signal(g0 @ expm(1j * np.einsum("p,pij->ij", x, basis)))
        res = minimize(f, np.zeros(15), method="BFGS", options={"gtol": 1e-12, "maxiter": 400})
        g = g0 @ expm(1j * np.einsum("p,pij->ij", res.x, basis))
        if res.fun < best_f:
            best_g, best_f = g, res.fun
        if best_f < (eps / 10) ** 2:
            break
    return best_g


# -- full circuit --------------------------------------------------------------

@dataclass
class LearnedCircuit:
    circuit: Circuit  # learned gates, same architecture as the target
    corrections: tuple  # final single-qubit unitaries, one per qubit
    report: dict = field(default_factory=dict)

    def unitary(self):
        u = np.ones((1, 1), dtype=complex)
        for c in self.corrections:
            u = np.kron(u, c)
        return u @ self.circuit.unitary()

    def absorbed(self):
        """Same architecture with each correction folded into the last gate touching its qubit."""
        arch = self.circuit.architecture
        gates = [list(layer) for layer in self.circuit.gates]
        for q, c in enumerate(self.corrections):
            hit = None
            for t in range(arch.depth - 1, -1, -1):
                for i, g in enumerate(arch.layers[t]):
                    if q in g:
                        hit = (t, i, g)
                        break
                if hit:
                    break
            if hit is None:
                raise InvalidArgument(f"qubit {q} is never acted on; cannot absorb its correction")
            t, i, g = hit
            pos = g.index(q)
            ops = [np.eye(2)] * len(g)
            ops[pos] = c
            full = np.ones((1, 1), dtype=complex)
            for o in ops:
                full = np.kron(full, o)
            gates[t][i] = full @ gates[t][i]
        return Circuit(arch, tuple(tuple(l) for l in gates))


def learn_circuit(oracle, arch, params, rng, final_metric="diamond", trace=None):
    """Peel layers one at a time, then recover the leftover single-qubit unitaries.

    ``final_metric`` sets the per-qubit precision of the last stage: ``diamond``
    uses delta/n, ``frobenius`` uses delta/(n 2^{n/2}) so the phase-minimised
    Frobenius distance of the full unitaries is also within delta.
    """
    rng = _streams(rng)
    if arch.num_qubits != oracle.num_qubits or arch.layers != oracle.circuit.architecture.layers:
        raise InvalidArgument("architecture does not match the oracle's circuit")
    if params.depth != arch.depth:
        raise InvalidArgument(f"params.depth={params.depth} but the architecture has depth {arch.depth}")
    n, depth = arch.num_qubits, arch.depth
    trace = trace if trace is not None else []
    cur = oracle
    learned = []
    for layer in range(depth):
        gates = []
        for j in range(len(arch.layers[layer])):
            gates.append(learn_first_gate(cur, j, params, rng.child(layer, j), layer, arch, trace))
        learned.append(tuple(gates))
        cur = cur.with_prefix([(g, u.conj().T) for g, u in zip(arch.layers[layer], gates)])
    delta = params.target
    if final_metric == "diamond":
        q_eps = delta / n
    elif final_metric == "frobenius":
        q_eps = delta / (n * 2 ** (n / 2))
    else:
        raise InvalidArgument("final_metric is 'diamond' or 'frobenius'")
    corrections = tuple(process_tomography_single_qubit(cur, q_eps, rng.child(depth, q), qubit=q)
                        for q in range(n))
    report = {"gates": trace, "final_qubit_eps": q_eps, "final_metric": final_metric}
    return LearnedCircuit(Circuit(arch, tuple(learned)), corrections, report)


def circuit_distance(u, v):
    """(phase-minimised 2 ||u - e^{i phi} v||_F, exact unitary diamond distance)."""
    tr = abs(np.trace(u.conj().T @ v))
    d = u.shape[0]
    frob = 2 * math.sqrt(max(2 * d - 2 * tr, 0.0))
    return frob, diamond_distance_unitary(u, v)


# -- purity --------------------------------------------------------------------

def purity_experiment(n, depths, trials, rng, all_mixed=False):
    """Mean purity of output qubit 0 for input |0><0| (x) (I/2)^(n-1) over random brickwork circuits.

    Each trial draws one circuit of the largest requested depth and reads
    every depth from its leading layers, so rows share randomness (each row
    on its own is still an exact sample of its depth). Qubit 0 idles in even
    layers, which makes consecutive odd/even depths agree trial by trial.
    """
    rng = _streams(rng)
    depths = [int(d) for d in depths]
    if not depths or min(depths) < 0:
        raise InvalidArgument("depths must be non-negative")
    fixed = {q: "mixed" for q in range(n)}
    if not all_mixed:
        fixed[0] = "0"
    inp = product_input(n, fixed)
    vals = np.empty((len(depths), trials))
    arch = brickwork(n, max(depths))
    for i in range(trials):
        layers = sample_circuit(arch, "haar", rng.child(i)).placed_layers()
        for j, d in enumerate(depths):
            rho = simulate_reduced(layers[:d], inp, (0,))
            vals[j, i] = np.trace(rho @ rho).real
    return [{"depth": d, "mean": float(v.mean()),
             "stderr": float(v.std(ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0,
             "trials": int(trials)}
            for d, v in zip(depths, vals)]


# -- numeric lemma checks ----------------------------------------------------------

def partial_trace_norms(u):
    """||Tr_1[U (s1 kron s2) U^dag]||_F for s1 in X,Y,Z and s2 in I,X,Y,Z."""
    out = []
    for s1 in _SIGMA1:
        for s2 in _SIGMA2:
            m = u @ np.kron(PAULIS[s1], PAULIS[s2]) @ u.conj().T
            red = np.einsum("aiaj->ij", m.reshape(2, 2, 2, 2))
            out.append(np.linalg.norm(red))
    return np.array(out)


def _near_identity(delta, g):
    """Unitary P with d_diamond(P, I) = delta exactly and Haar-random eigenbasis."""
    w = 2 * math.asin(delta / 2)
    phases = g.uniform(0, 2 * math.pi) + w * np.concatenate([[0.0, 1.0], g.uniform(0, 1, 2)])
    v = haar_unitary(4, g)
    return v @ np.diag(np.exp(1j * phases)) @ v.conj().T


def _signal_bounded(delta, g, budget=60):
    """(U1 kron U2) exp(itH) scaled so the largest partial-trace norm equals delta."""
    a = g.standard_normal((4, 4)) + 1j * g.standard_normal((4, 4))
    h = (a + a.conj().T) / 2
    h /= np.linalg.norm(h)
    k = np.kron(haar_unitary(2, g), haar_unitary(2, g))
    f = lambda t: partial_trace_norms(k @ expm(1j * t * h)).max()
    lo, hi = 0.0, delta
    for _ in range(budget):
        if f(hi) >= delta:
            break
        lo, hi = hi, 2 * hi
    else:
        return None
    for _ in range(60):
        mid = (lo + hi) / 2
        lo, hi = (mid, hi) if f(mid) < delta else (lo, mid)
    return k @ expm(1j * lo * h)


def lemma_checks(delta_grid, trials, rng, starts=16):
    """Monte Carlo checks of the partial-trace signal bounds.

    (a) U = (U1 kron U2) P with d_diamond(P, I) = delta: largest partial-trace
        norm versus 2 delta.
    (b) U with every partial-trace norm <= delta: d_otimes(U, I) versus 20 sqrt(delta).
    """
    rng = _streams(rng)
    rows = []
    for i, delta in enumerate(delta_grid):
        g = rng.child(i).generator()
        ratios, viol_a = [], 0
        for _ in range(trials):
            p = _near_identity(delta, g)
            u = np.kron(haar_unitary(2, g), haar_unitary(2, g)) @ p
            m = partial_trace_norms(u).max()
            ratios.append(m / delta)
            viol_a += m > 2 * delta + 1e-9
        dists, viol_b, skipped = [], 0, 0
        for t in range(trials):
            u = _signal_bounded(delta, g)
            if u is None:
                skipped += 1
                continue
            d = d_otimes(u, np.eye(4), starts=starts, rng=rng.child(i, t).generator()).value
            dists.append(d)
            viol_b += d > 20 * math.sqrt(delta) + OPT_TOL
        rows.append({"delta": float(delta), "trials": int(trials),
                     "signal_max_ratio": float(max(ratios)), "signal_violations": int(viol_a),
                     "dotimes_max": float(max(dists)) if dists else None,
                     "dotimes_bound": 20 * math.sqrt(delta), "dotimes_violations": int(viol_b),
                     "skipped": int(skipped)})
    return rows
