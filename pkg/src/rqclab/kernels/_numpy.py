"""Vectorised numpy versions of the hot kernels."""
import numpy as np

_PAULI = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]], dtype=complex)


def apply_unitary(state, gate, targets, nqubits):
    k = len(targets)
    psi = state.reshape((2,) * nqubits)
    g = gate.reshape((2,) * (2 * k))
    out = np.tensordot(g, psi, axes=(list(range(k, 2 * k)), list(targets)))
    out = np.moveaxis(out, list(range(k)), list(targets))
    return np.ascontiguousarray(out).reshape(-1)


def det_transfer(gates, basis, out_position):
    nb, r = gates.shape[0], basis.shape[0]
    if r == 0:
        return np.zeros(nb)
    img = np.einsum("bij,rjk,blk->bril", gates, basis, gates.conj(), optimize=True)
    img = img.reshape(nb, r, 2, 2, 2, 2)
    if out_position == 0:
        red = np.einsum("brxeye->brxy", img)
    else:
        red = np.einsum("brexey->brxy", img)
    m = np.zeros((nb, 3, 3))
    m[:, :, :r] = np.einsum("syx,brxy->bsr", _PAULI, red).real / np.sqrt(2.0)
    return np.abs(np.linalg.det(m))
