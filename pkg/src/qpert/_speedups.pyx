# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled gate kernel for dense statevectors.

Semantics match qpert._kernels_py.apply_matrix exactly; gates wider than
MAX_GATE_QUBITS stay on the numpy path.
"""

import numpy as np

cimport numpy as cnp

DEF MAX_GATE_QUBITS = 5


def apply_matrix(cnp.complex128_t[::1] amps, int num_qubits,
                 cnp.complex128_t[:, ::1] mat, targets,
                 unsigned long long ctrl_mask, unsigned long long ctrl_val):
    cdef int k = len(targets)
    if k > MAX_GATE_QUBITS:
        raise ValueError("gate too wide for the compiled kernel")

    cdef long long dim = 1LL << num_qubits
    cdef long long tmask = 0
    cdef long long offs[1 << MAX_GATE_QUBITS]
    cdef cnp.complex128_t buf[1 << MAX_GATE_QUBITS]
    cdef cnp.complex128_t acc
    cdef int b, s, s2
    cdef long long i, K = 1LL << k

    for b in range(k):
        tmask |= 1LL << (num_qubits - 1 - <int> targets[b])
    for s in range(K):
        offs[s] = 0
        for b in range(k):
            if (s >> (k - 1 - b)) & 1:
                offs[s] |= 1LL << (num_qubits - 1 - <int> targets[b])

    for i in range(dim):
        if i & tmask:
            continue
        if (i & ctrl_mask) != ctrl_val:
            continue
        for s in range(K):
            buf[s] = amps[i + offs[s]]
        for s in range(K):
            acc = 0
            for s2 in range(K):
                acc = acc + mat[s, s2] * buf[s2]
            amps[i + offs[s]] = acc
