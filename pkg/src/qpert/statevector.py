"""Dense statevector simulation.

Qubit 0 is the most significant bit of a basis index, so the register
|q1 q2 q3 q4> = |0101> sits at index 5. All operations return fresh states;
in-place mutation is confined to the kernels working on private copies.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import CollapseError, PostselectionError
from .gates import Circuit, GateInstance, gate_matrix

MAX_QUBITS = 24
DEAD_BRANCH = 1e-15


@dataclass(frozen=True)
class NoiseParams:
    """Stochastic Pauli noise rates. Defaults follow typical hardware medians:
    CNOT error 8.636e-3 and readout error 1.410e-2; the 1-qubit rate is a
    tenth of the 2-qubit one."""

    depolarizing_1q: float = 8.636e-4
    depolarizing_2q: float = 8.636e-3
    readout_flip: float = 1.410e-2

    def __post_init__(self):
        for name in ("depolarizing_1q", "depolarizing_2q", "readout_flip"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be a probability, got {v}")


class StateVector:
    """2**n complex amplitudes over an n-qubit register."""

    __slots__ = ("num_qubits", "amplitudes")

    def __init__(self, num_qubits: int, amplitudes: np.ndarray):
        if amplitudes.shape != (1 << num_qubits,):
            raise ValueError(
                f"need exactly {1 << num_qubits} amplitudes, got {amplitudes.shape}"
            )
        self.num_qubits = num_qubits
        self.amplitudes = np.ascontiguousarray(amplitudes, dtype=np.complex128)

    def copy(self) -> "StateVector":
        return StateVector(self.num_qubits, self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


def new_zero_state(num_qubits: int) -> StateVector:
    """|0...0> on num_qubits qubits (desk-scale cap at 24)."""
    if not 1 <= num_qubits <= MAX_QUBITS:
        raise ValueError(f"num_qubits must be in [1, {MAX_QUBITS}], got {num_qubits}")
    amps = np.zeros(1 << num_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(num_qubits, amps)


def _control_masks(g: GateInstance, n: int) -> tuple[int, int]:
    mask = val = 0
    for c, pol in g.controls:
        bit = 1 << (n - 1 - c)
        mask |= bit
        if pol:
            val |= bit
    return mask, val


def _apply_inplace(amps: np.ndarray, n: int, g: GateInstance) -> None:
    for q in g.qubits:
        if q >= n:
            raise ValueError(f"gate touches qubit {q} outside {n}-qubit register")
    mask, val = _control_masks(g, n)
    _kernels.apply_matrix(amps, n, gate_matrix(g.kind, g.params), g.targets, mask, val)


def apply_gate(state: StateVector, g: GateInstance) -> StateVector:
    """Apply one (controlled) gate; unitarity of the matrix is validated on
    construction and norm is preserved to roundoff."""
    out = state.copy()
    _apply_inplace(out.amplitudes, out.num_qubits, g)
    return out


def run_circuit(state: StateVector, circuit: Circuit) -> StateVector:
    if circuit.num_qubits != state.num_qubits:
        raise ValueError("circuit register size differs from the state")
    out = state.copy()
    for g in circuit.gates:
        _apply_inplace(out.amplitudes, out.num_qubits, g)
    return out


def amplitude(state: StateVector, idx: int) -> complex:
    if not 0 <= idx < state.amplitudes.size:
        raise ValueError(f"basis index {idx} out of range")
    return complex(state.amplitudes[idx])


def _qubit_probability(state: StateVector, qubit: int, outcome: int) -> float:
    n = state.num_qubits
    psi = state.amplitudes.reshape((2,) * n)
    sel = [slice(None)] * n
    sel[qubit] = outcome
    return float(np.sum(np.abs(psi[tuple(sel)]) ** 2))


def project_qubit(
    state: StateVector, qubit: int, outcome: int, renormalize: bool = True
) -> tuple[float, StateVector]:
    """Project one qubit onto an outcome. Returns (branch probability, state);
    raises on numerically dead branches."""
    if not 0 <= qubit < state.num_qubits:
        raise ValueError(f"qubit {qubit} out of range")
    prob = _qubit_probability(state, qubit, outcome)
    if prob < DEAD_BRANCH:
        raise CollapseError(
            f"branch qubit {qubit}={outcome} has probability {prob:.3e}"
        )
    n = state.num_qubits
    psi = state.amplitudes.reshape((2,) * n).copy()
    sel = [slice(None)] * n
    sel[qubit] = 1 - outcome
    psi[tuple(sel)] = 0.0
    amps = psi.reshape(-1)
    if renormalize:
        amps = amps / np.sqrt(prob)
    return prob, StateVector(n, amps)


def measure_qubit(
    state: StateVector, qubit: int, rng_seed
) -> tuple[int, StateVector]:
    """Born-rule measurement with collapse; reproducible for a fixed seed."""
    rng = np.random.default_rng(rng_seed) if not isinstance(rng_seed, np.random.Generator) else rng_seed
    p1 = _qubit_probability(state, qubit, 1)
    outcome = 1 if rng.random() < p1 else 0
    _, collapsed = project_qubit(state, qubit, outcome)
    return outcome, collapsed


def marginal_probabilities(state: StateVector, qubits: list[int]) -> np.ndarray:
    """Probability over the 2**len(qubits) outcomes of the listed qubits,
    ordered with qubits[0] as the most significant readout bit."""
    n = state.num_qubits
    if len(set(qubits)) != len(qubits):
        raise ValueError("duplicate qubits in readout list")
    psi = np.abs(state.amplitudes.reshape((2,) * n)) ** 2
    keep = list(qubits)
    drop = tuple(q for q in range(n) if q not in keep)
    marg = psi.sum(axis=drop) if drop else psi
    if len(keep) > 1:
        # axes of marg follow ascending qubit id; reorder to the listed order
        ranks = np.argsort(np.argsort(keep))
        marg = np.transpose(marg, axes=ranks)
    return marg.reshape(-1)


def sample_counts(
    state: StateVector, qubits: list[int], shots: int, rng_seed
) -> dict[str, int]:
    """Histogram of measurement bitstrings over the listed qubits.

    Non-collapsing: the input state is untouched. Reproducible per seed.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    rng = np.random.default_rng(rng_seed) if not isinstance(rng_seed, np.random.Generator) else rng_seed
    probs = marginal_probabilities(state, qubits)
    probs = probs / probs.sum()
    draws = rng.multinomial(shots, probs)
    width = len(qubits)
    return {
        format(i, f"0{width}b"): int(c) for i, c in enumerate(draws) if c > 0
    }


_PAULI_KINDS = (None, "x", "y", "z")


def apply_noisy_gate(
    state: StateVector, g: GateInstance, noise: NoiseParams, rng_seed
) -> StateVector:
    """Trajectory-level depolarizing noise: apply the gate, then with the
    per-gate-class probability draw a uniformly random Pauli (I, X, Y or Z)
    on each touched qubit."""
    rng = np.random.default_rng(rng_seed) if not isinstance(rng_seed, np.random.Generator) else rng_seed
    out = apply_gate(state, g)
    qubits = g.qubits
    rate = noise.depolarizing_1q if len(qubits) == 1 else noise.depolarizing_2q
    for q in qubits:
        if rng.random() < rate:
            kind = _PAULI_KINDS[rng.integers(0, 4)]
            if kind is not None:
                _apply_inplace(out.amplitudes, out.num_qubits, GateInstance(kind, (), (q,)))
    return out


def apply_readout_flips(probs: np.ndarray, num_bits: int, flip: float) -> np.ndarray:
    """Convolve an outcome distribution with independent per-bit readout flips."""
    out = probs.astype(float).copy()
    for b in range(num_bits):
        stride = 1 << (num_bits - 1 - b)
        idx = np.arange(out.size)
        flipped = out[idx ^ stride]
        out = (1.0 - flip) * out + flip * flipped
    return out


def average_noisy_distribution(
    circuit: Circuit,
    readout_qubits: list[int],
    noise: NoiseParams,
    trajectories: int,
    rng_seed,
) -> np.ndarray:
    """Mean outcome distribution over stochastic-Pauli trajectories.

    Each trajectory runs the circuit with apply_noisy_gate semantics and
    contributes its exact outcome distribution (no shot sampling), then the
    readout-flip confusion is applied to the average.
    """
    seq = np.random.SeedSequence(rng_seed)
    streams = [np.random.default_rng(s) for s in seq.spawn(trajectories)]
    acc = np.zeros(1 << len(readout_qubits))
    for rng in streams:
        state = new_zero_state(circuit.num_qubits)
        for g in circuit.gates:
            state = apply_noisy_gate(state, g, noise, rng)
        acc += marginal_probabilities(state, readout_qubits)
    acc /= trajectories
    return apply_readout_flips(acc, len(readout_qubits), noise.readout_flip)


def postselect(state: StateVector, conditions: list[tuple[int, int]]) -> tuple[float, StateVector]:
    """Project a set of (qubit, outcome) conditions, renormalizing once.

    Returns (joint branch probability, collapsed state)."""
    prob = 1.0
    cur = state
    try:
        for qubit, outcome in conditions:
            p, cur = project_qubit(cur, qubit, outcome)
            prob *= p
    except CollapseError as exc:
        raise PostselectionError(str(exc)) from exc
    return prob, cur
