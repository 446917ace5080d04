"""Oracle access to a circuit: lightcone-restricted marginals and simulated tomography."""
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from . import kernels
from .errors import InvalidArgument, ModelMismatchError, ResourceLimitError
from .linalg import (I2, X, Y, Z, bloch_vector, check_unitary, density_from_bloch,
                     project_to_bloch_ball, single_qubit_state)
from .rng import as_generator
from .tolerances import CONE_LIMIT, SHOTS_CONSTANT

# total qubits (system + purifying ancillas) we are willing to hold in one vector
_MAX_VECTOR_QUBITS = 26


@dataclass(frozen=True)
class OracleConfig:
    mode: str = "exact"
    shots_per_observable: int = None  # None: ceil(SHOTS_CONSTANT / eps**2)
    injected_error: float = 0.0
    cone_limit: int = CONE_LIMIT

    def __post_init__(self):
        if self.mode not in ("exact", "shots"):
            raise InvalidArgument(f"unknown oracle mode {self.mode!r}")
        if self.shots_per_observable is not None and self.shots_per_observable < 1:
            raise InvalidArgument("shots_per_observable must be >= 1")
        if self.injected_error < 0:
            raise InvalidArgument("injected_error must be >= 0")


@dataclass(frozen=True, eq=False)
class Oracle:
    """A circuit plus gates applied before its first layer.

    ``prefix`` holds (qubits, unitary) pairs in the order they act.
    """

    circuit: object
    prefix: tuple = ()
    config: OracleConfig = field(default_factory=OracleConfig)

    def __post_init__(self):
        n = self.circuit.num_qubits
        for qs, u in self.prefix:
            if any(q < 0 or q >= n for q in qs) or len(set(qs)) != len(qs):
                raise InvalidArgument(f"bad prefix qubits {qs}")
            if u.shape != (2 ** len(qs),) * 2:
                raise InvalidArgument(f"prefix gate on {qs} has shape {u.shape}")

    @property
    def num_qubits(self):
        return self.circuit.num_qubits

    def with_prefix(self, gates):
        """New oracle where ``gates`` act before the current prefix."""
        gates = tuple((tuple(q), np.asarray(u, dtype=complex)) for q, u in gates)
        return Oracle(self.circuit, gates + self.prefix, self.config)

    def with_config(self, **changes):
        cfg = OracleConfig(**{**self.config.__dict__, **changes})
        return Oracle(self.circuit, self.prefix, cfg)

    def layers(self):
        return [[p] for p in self.prefix] + self.circuit.placed_layers()


def product_input(n, fixed=None, default="0"):
    """Tuple of single-qubit density matrices; ``fixed`` maps qubit -> state spec."""
    states = [single_qubit_state(default)] * n
    for q, spec in (fixed or {}).items():
        if not 0 <= q < n:
            raise InvalidArgument(f"input qubit {q} out of range")
        states[q] = single_qubit_state(spec)
    return tuple(states)


def _needed_gates(layers, keep):
    """Gates in the reverse lightcone of ``keep`` (in acting order) and the cone's input qubits."""
    cone = set(keep)
    needed = []
    for layer in reversed(layers):
        for qs, u in layer:
            if cone & set(qs):
                cone |= set(qs)
                needed.append((qs, u))
    return needed[::-1], sorted(cone)


def _initial_vector(states):
    """Purified product state: one column per system qubit, one ancilla per mixed qubit."""
    psi = np.ones((1, 1), dtype=complex)
    for rho in states:
        w, v = np.linalg.eigh(rho)
        if w[0] <= 1e-14:
            amp = v[:, 1] * np.sqrt(max(w[1], 0.0))
            amp = amp / np.linalg.norm(amp)
            psi = np.einsum("sa,i->sia", psi, amp).reshape(psi.shape[0] * 2, psi.shape[1])
        else:
            # W[i, j]: system index i, ancilla index j
            wmat = v * np.sqrt(np.clip(w, 0, None))[None, :]
            psi = np.einsum("sa,ij->sija", psi, wmat).reshape(psi.shape[0] * 2, psi.shape[1] * 2)
    return psi


def simulate_reduced(layers, inputs, keep, cone_limit=CONE_LIMIT):
    """Reduced state on ``keep`` (in the given order) after ``layers`` act on ``inputs``.

    Only gates in the reverse lightcone of ``keep`` are applied, on a state
    vector over the cone qubits; mixed inputs are purified with ancillas.
    """
    keep = tuple(int(q) for q in keep)
    n = len(inputs)
    if any(q < 0 or q >= n for q in keep) or len(set(keep)) != len(keep):
        raise InvalidArgument(f"bad output qubits {keep}")
    needed, cone = _needed_gates(layers, keep)
    if len(cone) > cone_limit:
        raise ResourceLimitError(
            f"reverse lightcone has {len(cone)} qubits, limit is {cone_limit}")
    local = {q: i for i, q in enumerate(cone)}
    psi = _initial_vector([inputs[q] for q in cone])
    ns = len(cone)
    nt = ns + int(round(math.log2(psi.shape[1])))
    if nt > _MAX_VECTOR_QUBITS:
        raise ResourceLimitError(f"purified state needs {nt} qubits")
    psi = np.ascontiguousarray(psi.reshape(-1))
    for qs, u in needed:
        psi = kernels.apply_unitary(psi, u, [local[q] for q in qs], nt)
    t = psi.reshape((2,) * nt)
    axes = [local[q] for q in keep]
    t = np.moveaxis(t, axes, list(range(len(axes))))
    a = t.reshape(2 ** len(axes), -1)
    return a @ a.conj().T


def exact_output_marginal(oracle, inputs, out_qubit):
    """Exact single-qubit marginal of output ``out_qubit``."""
    if len(inputs) != oracle.num_qubits:
        raise InvalidArgument("input length does not match the circuit")
    return simulate_reduced(oracle.layers(), inputs, (out_qubit,), oracle.config.cone_limit)


def shots_for(eps):
    return int(math.ceil(SHOTS_CONSTANT / eps ** 2))


def shots_failure_bound(eps, shots):
    """Probability that the shots estimate misses by more than eps in Frobenius norm.

    The Frobenius error is |r_hat - r| / sqrt(2); Hoeffding on each axis at
    t^2 = 2 eps^2 / 3 plus a union bound over three axes. Projection into the
    ball never increases the error.
    """
    return min(1.0, 6 * math.exp(-eps ** 2 * shots / 3))


def tomography_estimate(oracle, inputs, out_qubit, eps, rng):
    """Estimate of the output marginal with Frobenius error <= eps (w.h.p. in shots mode)."""
    if not 0 < eps < 2:
        raise InvalidArgument("eps must lie in (0, 2)")
    g = as_generator(rng)
    rho = exact_output_marginal(oracle, inputs, out_qubit)
    cfg = oracle.config
    if cfg.mode == "exact":
        size = min(cfg.injected_error, eps)
        if size == 0:
            return rho
        d = g.standard_normal(3)
        d /= np.linalg.norm(d)
        pert = size * (d[0] * X + d[1] * Y + d[2] * Z) / np.sqrt(2)
        return project_to_bloch_ball(rho + pert)
    shots = cfg.shots_per_observable or shots_for(eps)
    r = np.clip(bloch_vector(rho), -1, 1)
    counts = g.binomial(shots, (1 + r) / 2)
    return project_to_bloch_ball(density_from_bloch(2 * counts / shots - 1))


_PROBES = ("0", "+", "+i")  # images give the z, x and y columns of the rotation


def process_tomography_single_qubit(oracle, eps, rng, qubit=0, inputs=None):
    """Estimate the single-qubit unitary the oracle applies to ``qubit``.

    Other inputs default to |0>. The images of |0>, |+>, |+i> give the Bloch
    rotation; its nearest rotation is lifted to SU(2).
    """
    if not 0 < eps < 2:
        raise InvalidArgument("eps must lie in (0, 2)")
    g = as_generator(rng)
    n = oracle.num_qubits
    base = list(inputs) if inputs is not None else list(product_input(n))
    cols = {}
    for name in _PROBES:
        base[qubit] = single_qubit_state(name)
        est = tomography_estimate(oracle, tuple(base), qubit, eps / 4, g)
        cols[name] = bloch_vector(est)
    r_est = np.column_stack([cols["+"], cols["+i"], cols["0"]])
    u, s, vh = np.linalg.svd(r_est)
    fix = np.diag([1.0, 1.0, np.sign(np.linalg.det(u @ vh))])
    r_fit = u @ fix @ vh
    resid = np.linalg.norm(r_est - r_fit)
    if resid > 10 * eps:
        raise ModelMismatchError(f"channel is not unitary (fit residual {resid:.3g})")
    return unitary_from_rotation(r_fit)


def unitary_from_rotation(r):
    """SU(2) element whose Bloch action is the rotation matrix ``r``."""
    qx, qy, qz, qw = Rotation.from_matrix(r).as_quat()
    return qw * I2 - 1j * (qx * X + qy * Y + qz * Z)


def rotation_from_unitary(u):
    u = check_unitary(u)
    paulis = (X, Y, Z)
    return np.array([[0.5 * np.trace(a @ u @ b @ u.conj().T).real for b in paulis] for a in paulis])
