"""Gate definitions and circuit builders.

Gates are identified by kind; controls carry an explicit polarity bit
(1 = fire on |1>, 0 = fire on |0>). Multi-controlled gates are first-class:
a Toffoli is just an "x" with two controls. Convention: qubit 0 is the most
significant bit of a basis index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import AncillaError, NonUnitaryError, UnsupportedGateError

SQ2 = 1.0 / math.sqrt(2.0)

_FIXED_1Q = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
    "h": np.array([[SQ2, SQ2], [SQ2, -SQ2]], dtype=complex),
    "s": np.array([[1, 0], [0, 1j]], dtype=complex),
    "sdg": np.array([[1, 0], [0, -1j]], dtype=complex),
    "t": np.array([[1, 0], [0, np.exp(1j * math.pi / 4)]], dtype=complex),
    "tdg": np.array([[1, 0], [0, np.exp(-1j * math.pi / 4)]], dtype=complex),
}

_PARAM_1Q = {"rx", "ry", "rz", "p"}

GATE_TARGETS = {**{kind: 1 for kind in _FIXED_1Q}, **{kind: 1 for kind in _PARAM_1Q}, "swap": 2}

_SELF_INVERSE = {"x", "y", "z", "h", "swap"}
_DAGGER_PAIRS = {"s": "sdg", "sdg": "s", "t": "tdg", "tdg": "t"}

TWO_PI = 2.0 * math.pi


def canonical_angle(theta: float) -> float:
    """Wrap an angle into the canonical (-4*pi, 4*pi] range."""
    wrapped = math.fmod(theta, 4.0 * TWO_PI)
    if wrapped > 2.0 * TWO_PI:
        wrapped -= 4.0 * TWO_PI
    elif wrapped <= -2.0 * TWO_PI:
        wrapped += 4.0 * TWO_PI
    return wrapped


@dataclass(frozen=True)
class GateInstance:
    """One gate application: kind, parameters, target qubits, polarity-tagged controls."""

    kind: str
    params: tuple[float, ...] = ()
    targets: tuple[int, ...] = ()
    controls: tuple[tuple[int, int], ...] = ()

    def __post_init__(self):
        if self.kind not in GATE_TARGETS:
            raise UnsupportedGateError(f"unknown gate kind {self.kind!r}")
        if len(self.targets) != GATE_TARGETS[self.kind]:
            raise ValueError(f"{self.kind} takes {GATE_TARGETS[self.kind]} target(s)")
        want_params = 1 if self.kind in _PARAM_1Q else 0
        if len(self.params) != want_params:
            raise ValueError(f"{self.kind} takes {want_params} parameter(s)")
        object.__setattr__(self, "params", tuple(canonical_angle(p) for p in self.params))
        ctrl_qubits = [c for c, _ in self.controls]
        touched = list(self.targets) + ctrl_qubits
        if len(set(touched)) != len(touched):
            raise ValueError(f"target/control qubits collide: {touched}")
        if any(pol not in (0, 1) for _, pol in self.controls):
            raise ValueError("control polarity must be 0 or 1")

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.targets + tuple(c for c, _ in self.controls)

    def dagger(self) -> "GateInstance":
        if self.kind in _SELF_INVERSE:
            return self
        if self.kind in _DAGGER_PAIRS:
            return GateInstance(_DAGGER_PAIRS[self.kind], (), self.targets, self.controls)
        if self.kind in _PARAM_1Q:
            return GateInstance(self.kind, (-self.params[0],), self.targets, self.controls)
        raise UnsupportedGateError(f"no inverse rule for {self.kind}")

    def remapped(self, perm: dict[int, int]) -> "GateInstance":
        return GateInstance(
            self.kind,
            self.params,
            tuple(perm[t] for t in self.targets),
            tuple((perm[c], p) for c, p in self.controls),
        )


def gate(kind: str, *args) -> GateInstance:
    """Shorthand constructor: gate("ry", theta, qubit) or gate("x", qubit)."""
    if kind in _PARAM_1Q:
        theta, *qubits = args
        return GateInstance(kind, (float(theta),), tuple(int(q) for q in qubits))
    return GateInstance(kind, (), tuple(int(q) for q in args))


def cnot(control: int, target: int) -> GateInstance:
    return GateInstance("x", (), (target,), ((control, 1),))


def toffoli(c1: int, c2: int, target: int) -> GateInstance:
    return GateInstance("x", (), (target,), ((c1, 1), (c2, 1)))


def controlled(g: GateInstance, *controls: tuple[int, int]) -> GateInstance:
    return GateInstance(g.kind, g.params, g.targets, g.controls + tuple(controls))


@dataclass
class Circuit:
    """Ordered gate sequence over a fixed register.

    register_labels tags qubits with their role: "q" for the system register,
    "qa" for multi-control ancillas, "qr" for readout/postselection qubits.
    """

    num_qubits: int
    gates: list[GateInstance] = field(default_factory=list)
    register_labels: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        for q in range(self.num_qubits):
            self.register_labels.setdefault(q, "q")
        self._check(self.gates)

    def _check(self, gates):
        for g in gates:
            if any(q >= self.num_qubits or q < 0 for q in g.qubits):
                raise ValueError(f"gate {g} outside register of {self.num_qubits} qubits")

    def add(self, *gates: GateInstance) -> "Circuit":
        self._check(gates)
        self.gates.extend(gates)
        return self

    def extend(self, other: "Circuit") -> "Circuit":
        return self.add(*other.gates)

    def dagger(self) -> "Circuit":
        return Circuit(self.num_qubits, [g.dagger() for g in reversed(self.gates)],
                       dict(self.register_labels))

    def qubits_by_role(self, role: str) -> list[int]:
        return [q for q in range(self.num_qubits) if self.register_labels[q] == role]

    def __len__(self) -> int:
        return len(self.gates)


@lru_cache(maxsize=512)
def gate_matrix(kind: str, params: tuple[float, ...]) -> np.ndarray:
    """Dense matrix of an uncontrolled gate on its own targets, validated unitary."""
    if kind in _FIXED_1Q:
        mat = _FIXED_1Q[kind]
    elif kind == "rx":
        (th,) = params
        c, s = math.cos(th / 2), math.sin(th / 2)
        mat = np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    elif kind == "ry":
        (th,) = params
        c, s = math.cos(th / 2), math.sin(th / 2)
        mat = np.array([[c, -s], [s, c]], dtype=complex)
    elif kind == "rz":
        (th,) = params
        mat = np.array([[np.exp(-1j * th / 2), 0], [0, np.exp(1j * th / 2)]], dtype=complex)
    elif kind == "p":
        (th,) = params
        mat = np.array([[1, 0], [0, np.exp(1j * th)]], dtype=complex)
    elif kind == "swap":
        mat = np.array(
            [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
        )
    else:
        raise UnsupportedGateError(f"no matrix for {kind}")
    dev = np.max(np.abs(mat.conj().T @ mat - np.eye(mat.shape[0])))
    if dev > 1e-10:
        raise NonUnitaryError(f"{kind}{params} deviates from unitarity by {dev:.2e}")
    mat.setflags(write=False)
    return mat


def unitary_of(g: GateInstance, num_qubits: int) -> np.ndarray:
    """Dense 2**n x 2**n embedding of a (controlled) gate.

    Built by direct basis-index arithmetic, independent of the simulator
    kernels, so the two routes can check each other.
    """
    mat = gate_matrix(g.kind, g.params)
    k = len(g.targets)
    dim = 1 << num_qubits
    out = np.zeros((dim, dim), dtype=complex)
    tshift = [num_qubits - 1 - t for t in g.targets]
    for i in range(dim):
        if any(((i >> (num_qubits - 1 - c)) & 1) != pol for c, pol in g.controls):
            out[i, i] = 1.0
            continue
        col = 0
        for b, sh in enumerate(tshift):
            col |= ((i >> sh) & 1) << (k - 1 - b)
        for row in range(1 << k):
            j = i
            for b, sh in enumerate(tshift):
                bit = (row >> (k - 1 - b)) & 1
                j = (j & ~(1 << sh)) | (bit << sh)
            out[j, i] += mat[row, col]
    return out


def circuit_unitary(circuit: Circuit) -> np.ndarray:
    """Dense unitary of a whole circuit (small registers only)."""
    u = np.eye(1 << circuit.num_qubits, dtype=complex)
    for g in circuit.gates:
        u = unitary_of(g, circuit.num_qubits) @ u
    return u


def build_qft_pair(q_a: int, q_b: int) -> Circuit:
    """Fourier block on one same-spin qubit pair.

    Maps the occupation labels to the plane-wave (bonding/antibonding) mode
    states: |01> -> (|01>+|10>)/sqrt2, |10> -> (-|01>+|10>)/sqrt2 with |00>
    and |11> fixed, which is what actually diagonalizes the hopping term
    c1^dag c2 + h.c. on a two-site pair.
    """
    if q_a == q_b:
        raise ValueError("pair qubits must be distinct")
    circ = Circuit(max(q_a, q_b) + 1)
    circ.add(
        cnot(q_a, q_b),
        GateInstance("ry", (math.pi / 2,), (q_a,), ((q_b, 1),)),
        cnot(q_a, q_b),
    )
    return circ


def build_mcry(
    controls: tuple[tuple[int, int], ...],
    target: int,
    theta: float,
    ancillas: tuple[int, ...] = (),
) -> Circuit:
    """Lower a multi-controlled Ry to NOT, Ry, and Toffoli gates.

    Control polarity is handled by X conjugation. One ancilla is consumed per
    folded control pair: 3 controls need one ancilla, 4 need two. Ancillas
    must start in |0> and are restored exactly.
    """
    controls = tuple(controls)
    if not controls:
        raise ValueError("build_mcry needs at least one control")
    nc = len(controls)
    need = max(0, nc - 2)
    if need > len(ancillas):
        raise AncillaError(f"{nc}-controlled Ry needs {need} ancilla(s), got {len(ancillas)}")

    qubits = [target, *(c for c, _ in controls), *ancillas[:need]]
    circ = Circuit(max(qubits) + 1)

    flips = [gate("x", c) for c, pol in controls if pol == 0]
    circ.add(*flips)
    body: list[GateInstance] = []
    if nc == 1:
        c = controls[0][0]
        body = [gate("ry", theta / 2, target), cnot(c, target),
                gate("ry", -theta / 2, target), cnot(c, target)]
    elif nc == 2:
        c1, c2 = controls[0][0], controls[1][0]
        body = [gate("ry", theta / 2, target), toffoli(c1, c2, target),
                gate("ry", -theta / 2, target), toffoli(c1, c2, target)]
    elif nc == 3:
        c1, c2, c3 = (c for c, _ in controls)
        a1 = ancillas[0]
        fold = toffoli(c1, c2, a1)
        body = [fold,
                gate("ry", theta / 2, target), toffoli(a1, c3, target),
                gate("ry", -theta / 2, target), toffoli(a1, c3, target),
                fold]
    elif nc == 4:
        c1, c2, c3, c4 = (c for c, _ in controls)
        a1, a2 = ancillas[0], ancillas[1]
        fold1, fold2 = toffoli(c1, c2, a1), toffoli(c3, c4, a2)
        body = [fold1, fold2,
                gate("ry", theta / 2, target), toffoli(a1, a2, target),
                gate("ry", -theta / 2, target), toffoli(a1, a2, target),
                fold2, fold1]
    else:
        raise AncillaError(f"multi-controlled Ry with {nc} controls is not supported")
    circ.add(*body)
    circ.add(*flips)
    return circ


# Index pairs mixed by the two special rotations, as 0-based basis indices of
# the 4-qubit register: {|0101>, |1010>} and {|0110>, |1001>}.
SPECIAL_ROTATION_PAIRS = {"r_5_10": (5, 10), "r_6_9": (6, 9)}


def special_rotation_matrix(which: str, alpha: float) -> np.ndarray:
    """16x16 two-level rotation: cos(alpha) on the mixed diagonal entries,
    -sin(alpha) at (lo, hi), +sin(alpha) at (hi, lo), identity elsewhere."""
    lo, hi = SPECIAL_ROTATION_PAIRS[which]
    mat = np.eye(16, dtype=complex)
    mat[lo, lo] = mat[hi, hi] = math.cos(alpha)
    mat[lo, hi] = -math.sin(alpha)
    mat[hi, lo] = math.sin(alpha)
    return mat


def build_special_rotation(which: str, alpha: float) -> Circuit:
    """Two-level rotation between a pair of 4-qubit basis states.

    The two states of each pair differ in every bit, so three CNOTs off the
    pivot qubit collapse the difference to the pivot alone; a 3-controlled Ry
    (kept abstract here) rotates the pair, and the CNOTs uncompute.
    """
    if which not in SPECIAL_ROTATION_PAIRS:
        raise ValueError(f"unknown special rotation {which!r}")
    lo, _ = SPECIAL_ROTATION_PAIRS[which]
    pols = ((lo >> 2) & 1, (lo >> 1) & 1, lo & 1)
    cxs = [cnot(0, 1), cnot(0, 2), cnot(0, 3)]
    mc = GateInstance("ry", (2.0 * alpha,), (0,), ((1, pols[0]), (2, pols[1]), (3, pols[2])))
    circ = Circuit(4)
    circ.add(*cxs)
    circ.add(mc)
    circ.add(*reversed(cxs))
    return circ
