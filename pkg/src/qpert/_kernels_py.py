"""Pure-numpy gate kernel, the reference implementation.

Bit convention everywhere: qubit 0 is the most significant bit of a basis
index, so qubit q occupies bit position (num_qubits - 1 - q).
"""

import numpy as np


def apply_matrix(amps, num_qubits, mat, targets, ctrl_mask, ctrl_val):
    """Apply a k-qubit unitary in place on ``amps`` (shape ``(2**num_qubits,)``).

    ``targets`` lists the gate's qubits with targets[0] the most significant
    bit of the gate's own 2**k basis. ``ctrl_mask``/``ctrl_val`` select the
    controlled subspace as full-index bit masks (0/0 means no controls).
    """
    n = num_qubits
    k = len(targets)
    psi = amps.reshape((2,) * n)

    ctrl_axes = [q for q in range(n) if (ctrl_mask >> (n - 1 - q)) & 1]
    index = [slice(None)] * n
    for q in ctrl_axes:
        index[q] = (ctrl_val >> (n - 1 - q)) & 1
    view = psi[tuple(index)]

    # target axis positions after the control axes were consumed
    adj = [t - sum(1 for c in ctrl_axes if c < t) for t in targets]
    sub = np.moveaxis(view, adj, range(k))
    res = mat @ sub.reshape(1 << k, -1)
    sub[...] = res.reshape(sub.shape)
