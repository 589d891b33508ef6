"""Kernel backend selection.

The compiled extension is used when importable; set QPERT_PURE_PYTHON=1 to
force the numpy fallback. Both backends implement the same in-place
apply_matrix contract and agree to floating-point roundoff.
"""

import os

from . import _kernels_py

_speedups = None
if os.environ.get("QPERT_PURE_PYTHON", "") != "1":
    try:
        from . import _speedups as _speedups_mod

        _speedups = _speedups_mod
    except ImportError:
        _speedups = None

BACKEND = "cython" if _speedups is not None else "numpy"

_CY_MAX_GATE_QUBITS = 5


def apply_matrix(amps, num_qubits, mat, targets, ctrl_mask, ctrl_val):
    if _speedups is not None and len(targets) <= _CY_MAX_GATE_QUBITS:
        _speedups.apply_matrix(amps, num_qubits, mat, targets, ctrl_mask, ctrl_val)
    else:
        _kernels_py.apply_matrix(amps, num_qubits, mat, targets, ctrl_mask, ctrl_val)
