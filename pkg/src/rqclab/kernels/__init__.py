"""Hot kernels with a numba path and a pure-numpy fallback.

Select with the ``RQCLAB_BACKEND`` environment variable (``numba`` or
``numpy``) before the first import of :mod:`rqclab`.
"""
import numpy as np

from ._jit import BACKEND
from . import _loops, _numpy
from ._loops import (arc_width, closest_product, kron2, minimize_arc,
                     polish_product, product_arc, su2)

__all__ = ["BACKEND", "apply_unitary", "det_transfer", "arc_width",
           "closest_product", "polish_product", "kron2", "minimize_arc",
           "product_arc", "su2"]


def apply_unitary(state, gate, targets, nqubits):
    """Apply ``gate`` to ``targets`` of a flat state vector; may reuse ``state``'s buffer."""
    if BACKEND == "numba":
        t = np.asarray(targets, dtype=np.int64)
        return _loops.apply_unitary_loop(state, np.ascontiguousarray(gate, dtype=complex),
                                         t, nqubits)
    return _numpy.apply_unitary(state, gate, targets, nqubits)


def det_transfer(gates, basis, out_position):
    """|det| of the transfer matrix for a batch of two-qubit gates."""
    gates = np.ascontiguousarray(gates, dtype=complex)
    basis = np.ascontiguousarray(basis, dtype=complex)
    if BACKEND == "numba":
        return _loops.det_transfer_loop(gates, basis, int(out_position))
    return _numpy.det_transfer(gates, basis, out_position)
