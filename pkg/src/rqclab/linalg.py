"""Core linear algebra: Haar sampling, Pauli bases, partial traces and norms."""
from itertools import product

import numpy as np

from .errors import InvalidArgument
from .rng import as_generator
from .tolerances import ALG_TOL, PSD_SLACK, TRACELESS_TOL

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = {"I": I2, "X": X, "Y": Y, "Z": Z}

_NAMED_STATES = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) / np.sqrt(2),
    "-": np.array([1, -1], dtype=complex) / np.sqrt(2),
    "+i": np.array([1, 1j], dtype=complex) / np.sqrt(2),
    "-i": np.array([1, -1j], dtype=complex) / np.sqrt(2),
}


def haar_unitaries(dim, count, rng):
    """Draw ``count`` Haar-random ``dim x dim`` unitaries, shape (count, dim, dim).

    Ginibre matrix, QR, then fix the phases of R's diagonal so the law is
    exactly Haar.
    """
    if dim < 1 or count < 0:
        raise InvalidArgument("dim must be >= 1 and count >= 0")
    g = as_generator(rng)
    z = (g.standard_normal((count, dim, dim)) + 1j * g.standard_normal((count, dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=1, axis2=2)
    return q * (d / np.abs(d))[:, None, :]


def haar_unitary(dim, rng):
    return haar_unitaries(dim, 1, rng)[0]


def haar_states(dim, count, rng):
    """Uniformly random unit vectors in C^dim, shape (count, dim)."""
    g = as_generator(rng)
    z = g.standard_normal((count, dim)) + 1j * g.standard_normal((count, dim))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def pauli_labels(k):
    """Non-identity Pauli strings on k qubits in lexicographic IXYZ order."""
    return ["".join(p) for p in product("IXYZ", repeat=k) if set(p) != {"I"}]


def pauli_string(label):
    out = np.ones((1, 1), dtype=complex)
    for c in label:
        out = np.kron(out, PAULIS[c])
    return out


def pauli_basis(k):
    """Orthonormal (Hilbert-Schmidt) basis of traceless Hermitian 2^k x 2^k matrices."""
    if k < 1:
        raise InvalidArgument("k must be >= 1")
    return np.array([pauli_string(l) for l in pauli_labels(k)]) / 2 ** (k / 2)


def num_qubits_of(dim):
    k = int(round(np.log2(dim)))
    if 2 ** k != dim:
        raise InvalidArgument(f"dimension {dim} is not a power of two")
    return k


def is_unitary(u, tol=ALG_TOL):
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1] or not np.all(np.isfinite(u)):
        return False
    return np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])) <= tol * max(1, u.shape[0])


def check_unitary(u, tol=ALG_TOL, name="matrix"):
    u = np.asarray(u, dtype=complex)
    if not is_unitary(u, tol):
        raise InvalidArgument(f"{name} is not unitary within {tol}")
    return u


def is_density_matrix(rho, tol=PSD_SLACK):
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or not np.all(np.isfinite(rho)):
        return False
    if np.linalg.norm(rho - rho.conj().T) > tol or abs(np.trace(rho) - 1) > tol:
        return False
    return np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() >= -tol


def check_density_matrix(rho, tol=PSD_SLACK, name="state"):
    rho = np.asarray(rho, dtype=complex)
    if not is_density_matrix(rho, tol):
        raise InvalidArgument(f"{name} is not a density matrix")
    return rho


def single_qubit_state(spec):
    """Density matrix from a name ('0', '+i', 'mixed', ...), Bloch vector, ket or 2x2 matrix."""
    if isinstance(spec, str):
        if spec == "mixed":
            return I2 / 2
        if spec not in _NAMED_STATES:
            raise InvalidArgument(f"unknown state name {spec!r}")
        v = _NAMED_STATES[spec]
        return np.outer(v, v.conj())
    a = np.asarray(spec)
    if a.shape == (3,):
        a = a.astype(float)
        if np.linalg.norm(a) > 1 + PSD_SLACK:
            raise InvalidArgument("Bloch vector outside the unit ball")
        return density_from_bloch(a)
    if a.shape == (2,):
        v = a.astype(complex)
        v = v / np.linalg.norm(v)
        return np.outer(v, v.conj())
    return check_density_matrix(a)


def bloch_vector(rho):
    rho = np.asarray(rho)
    return np.real([np.trace(X @ rho), np.trace(Y @ rho), np.trace(Z @ rho)])


def density_from_bloch(r):
    return (I2 + r[0] * X + r[1] * Y + r[2] * Z) / 2


def project_to_bloch_ball(rho):
    """Nearest (Frobenius) single-qubit density matrix to a Hermitian unit-trace 2x2."""
    r = bloch_vector(rho)
    nr = np.linalg.norm(r)
    if nr > 1:
        r = r / nr
    return density_from_bloch(r)


def partial_trace(rho, keep, num_qubits=None):
    """Reduced density matrix on the qubits in ``keep`` (returned in ascending order)."""
    rho = np.asarray(rho)
    n = num_qubits if num_qubits is not None else num_qubits_of(rho.shape[0])
    keep = sorted(set(int(q) for q in keep))
    if any(q < 0 or q >= n for q in keep):
        raise InvalidArgument("keep contains an out-of-range qubit")
    rest = [q for q in range(n) if q not in keep]
    t = rho.reshape((2,) * (2 * n))
    t = t.transpose(keep + rest + [n + q for q in keep] + [n + q for q in rest])
    dk, dr = 2 ** len(keep), 2 ** len(rest)
    return np.einsum("aibi->ab", t.reshape(dk, dr, dk, dr))


def _finite(a):
    a = np.asarray(a)
    if not np.all(np.isfinite(a)):
        raise InvalidArgument("matrix has non-finite entries")
    return a


def frobenius_norm(a):
    return float(np.linalg.norm(_finite(a)))


def trace_norm(a):
    return float(np.linalg.svd(_finite(a), compute_uv=False).sum())


def pauli_coords(delta):
    """Real coordinates of a traceless Hermitian matrix in the normalised Pauli basis.

    Frobenius norm is preserved exactly.
    """
    delta = _finite(delta)
    k = num_qubits_of(delta.shape[0])
    if abs(np.trace(delta)) > TRACELESS_TOL or np.linalg.norm(delta - delta.conj().T) > TRACELESS_TOL:
        raise InvalidArgument("pauli_coords needs a traceless Hermitian matrix")
    basis = pauli_basis(k)
    return np.einsum("pij,ji->p", basis, delta).real


def pauli_reconstruct(coords, k):
    return np.einsum("p,pij->ij", np.asarray(coords, dtype=float), pauli_basis(k))


def check_channel_contraction(channel, rho, rho2, tol=PSD_SLACK):
    """True when ``channel`` does not increase the trace distance between rho and rho2."""
    before = trace_norm(rho - rho2)
    after = trace_norm(channel(rho) - channel(rho2))
    return after <= before + tol


def matrix_to_pairs(m):
    """Nested [re, im] lists for JSON."""
    m = np.asarray(m)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def matrix_from_pairs(rows):
    a = np.asarray(rows, dtype=float)
    if a.ndim != 3 or a.shape[-1] != 2:
        raise InvalidArgument("expected rows of [re, im] pairs")
    return a[..., 0] + 1j * a[..., 1]
