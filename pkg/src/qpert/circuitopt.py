"""Compiler-style passes over circuits.

Two lowering levels: lower_multicontrolled rewrites every multi-controlled
rotation into {1q, CX, CCX, CCCX, controlled-rotation} using the ancilla
register (the shape reported hardware tallies are quoted against), and
lower_to_native finishes the job down to {1q, CX, CCX}. cancel_toffoli_pairs
then removes the control-control interactions of bracketing Toffoli pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AncillaError, UnmappedQubitError, UnsupportedGateError
from .gates import Circuit, GateInstance, cnot, gate, toffoli

_ROTATIONS = ("ry", "rz")


@dataclass(frozen=True)
class CouplingMap:
    """Physical adjacency plus the logical-to-physical qubit placement."""

    nodes: tuple[int, ...]
    edges: frozenset[frozenset]
    logical_map: dict[int, int]

    def __post_init__(self):
        values = list(self.logical_map.values())
        if len(set(values)) != len(values):
            raise ValueError("logical_map must be injective")
        if any(v not in self.nodes for v in values):
            raise ValueError("logical_map targets unknown node")

    def node_of(self, logical: int) -> int:
        try:
            return self.logical_map[logical]
        except KeyError:
            raise UnmappedQubitError(f"logical qubit {logical} is unmapped") from None

    def connected(self, a: int, b: int) -> bool:
        return frozenset((self.node_of(a), self.node_of(b))) in self.edges


def paper_coupling_map() -> CouplingMap:
    """Seven-qubit placement used for the gap-readout circuit: each control
    pair forms a triangle with its ancilla, both ancillas attach to the
    readout qubit, and the two ancillas are NOT connected to each other."""
    edges = [(0, 1), (0, 4), (1, 4), (2, 3), (2, 5), (3, 5), (4, 6), (5, 6)]
    return CouplingMap(
        nodes=tuple(range(7)),
        edges=frozenset(frozenset(e) for e in edges),
        logical_map={q: q for q in range(7)},
    )


@dataclass(frozen=True)
class GateCensus:
    one_qubit: int = 0
    two_qubit: int = 0
    toffoli: int = 0
    cccnot: int = 0
    other: int = 0

    @property
    def total(self) -> int:
        return self.one_qubit + self.two_qubit + self.toffoli + self.cccnot + self.other

    def as_dict(self) -> dict[str, int]:
        return {
            "one_qubit": self.one_qubit,
            "two_qubit": self.two_qubit,
            "toffoli": self.toffoli,
            "cccnot": self.cccnot,
            "other": self.other,
        }


def gate_census(circuit: Circuit) -> GateCensus:
    counts = {"one_qubit": 0, "two_qubit": 0, "toffoli": 0, "cccnot": 0, "other": 0}
    for g in circuit.gates:
        width = len(g.qubits)
        if g.kind == "x" and len(g.controls) == 2:
            counts["toffoli"] += 1
        elif g.kind == "x" and len(g.controls) == 3:
            counts["cccnot"] += 1
        elif width == 1:
            counts["one_qubit"] += 1
        elif width == 2:
            counts["two_qubit"] += 1
        else:
            counts["other"] += 1
    return GateCensus(**counts)


def _free_ancillas(circuit: Circuit, g: GateInstance) -> list[int]:
    return [q for q in circuit.qubits_by_role("qa") if q not in g.qubits]


def _solid(controls) -> list[int]:
    return [c for c, _ in controls]


def _polarity_flips(controls) -> list[GateInstance]:
    return [gate("x", c) for c, pol in controls if pol == 0]


def _lower_one(circuit: Circuit, g: GateInstance) -> list[GateInstance]:
    nc = len(g.controls)
    width = len(g.qubits)
    if width <= 2 or (g.kind == "x" and nc in (2, 3)):
        return [g]

    anc = _free_ancillas(circuit, g)
    flips = _polarity_flips(g.controls)
    ctr = _solid(g.controls)
    t = g.targets[0]
    body: list[GateInstance]

    if g.kind == "x" and nc == 4:
        if len(anc) < 1:
            raise AncillaError("4-controlled NOT needs one free ancilla")
        a1 = anc[0]
        fold = toffoli(ctr[0], ctr[1], a1)
        ccc = GateInstance("x", (), (t,), ((a1, 1), (ctr[2], 1), (ctr[3], 1)))
        body = [fold, ccc, fold]
    elif g.kind in _ROTATIONS and nc == 2:
        if len(anc) < 2:
            raise AncillaError("2-controlled rotation needs two free ancillas")
        a1, a2 = anc[0], anc[1]
        th = g.params[0]
        core = toffoli(a1, a2, t)
        body = [cnot(ctr[0], a1), cnot(ctr[1], a2),
                gate(g.kind, th / 2, t), core, gate(g.kind, -th / 2, t), core,
                cnot(ctr[1], a2), cnot(ctr[0], a1)]
    elif g.kind in _ROTATIONS and nc == 3:
        if len(anc) < 1:
            raise AncillaError("3-controlled rotation needs one free ancilla")
        a1 = anc[0]
        th = g.params[0]
        fold = toffoli(ctr[0], ctr[1], a1)
        core = toffoli(a1, ctr[2], t)
        body = [fold, gate(g.kind, th / 2, t), core, gate(g.kind, -th / 2, t), core, fold]
    elif g.kind in _ROTATIONS and nc == 4:
        if len(anc) < 1:
            raise AncillaError("4-controlled rotation needs one free ancilla")
        a1 = anc[0]
        th = g.params[0]
        fold = toffoli(ctr[0], ctr[1], a1)
        core = GateInstance("x", (), (t,), ((a1, 1), (ctr[2], 1), (ctr[3], 1)))
        body = [fold, gate(g.kind, th / 2, t), core, gate(g.kind, -th / 2, t), core, fold]
    else:
        raise UnsupportedGateError(
            f"cannot lower {g.kind} with {nc} controls"
        )
    return flips + body + list(reversed(flips)) if flips else body


def lower_multicontrolled(circuit: Circuit) -> Circuit:
    """Rewrite gates with more than one control (except plain CCX/CCCX) using
    the ancilla register; controlled rotations with one control stay atomic."""
    out = Circuit(circuit.num_qubits, register_labels=dict(circuit.register_labels))
    for g in circuit.gates:
        out.add(*_lower_one(circuit, g))
    return out


def _expand_controlled_rotation(g: GateInstance) -> list[GateInstance]:
    (c, pol) = g.controls[0]
    t = g.targets[0]
    th = g.params[0]
    flips = [gate("x", c)] if pol == 0 else []
    if g.kind in _ROTATIONS:
        body = [gate(g.kind, th / 2, t), cnot(c, t), gate(g.kind, -th / 2, t), cnot(c, t)]
    elif g.kind == "p":
        body = [gate("p", th / 2, c), gate("p", th / 2, t), cnot(c, t),
                gate("p", -th / 2, t), cnot(c, t)]
    else:
        raise UnsupportedGateError(f"no native expansion for controlled {g.kind}")
    return flips + body + flips


def lower_to_native(circuit: Circuit) -> Circuit:
    """Full lowering to the native set {1-qubit, CNOT, Toffoli}; unitary
    preserved exactly (no global-phase juggling needed for this gate set)."""
    staged = lower_multicontrolled(circuit)
    out = Circuit(circuit.num_qubits, register_labels=dict(circuit.register_labels))
    for g in staged.gates:
        nc = len(g.controls)
        if len(g.qubits) == 1:
            out.add(g)
        elif g.kind == "x" and nc == 1:
            out.add(g)
        elif g.kind == "x" and nc == 2:
            out.add(g)
        elif g.kind == "x" and nc == 3:
            anc = [q for q in staged.qubits_by_role("qa") if q not in g.qubits]
            if not anc:
                raise AncillaError("lowering a 3-controlled NOT needs a free ancilla")
            a = anc[0]
            c1, c2, c3 = _solid(g.controls)
            pol_flips = _polarity_flips(g.controls)
            seq = [toffoli(c1, c2, a), toffoli(a, c3, g.targets[0]), toffoli(c1, c2, a)]
            out.add(*pol_flips, *seq, *reversed(pol_flips))
        elif g.kind == "swap" and nc == 0:
            a, b = g.targets
            out.add(cnot(a, b), cnot(b, a), cnot(a, b))
        elif nc == 1 and g.kind in ("ry", "rz", "p"):
            pol = g.controls[0][1]
            if pol == 0:
                c = g.controls[0][0]
                out.add(gate("x", c))
                out.add(*_expand_controlled_rotation(
                    GateInstance(g.kind, g.params, g.targets, ((c, 1),))))
                out.add(gate("x", c))
            else:
                out.add(*_expand_controlled_rotation(g))
        else:
            raise UnsupportedGateError(f"cannot natively lower {g}")
    return out


def _toffoli_target_part(c1: int, c2: int, t: int) -> list[GateInstance]:
    return [
        gate("h", t), cnot(c2, t), gate("tdg", t), cnot(c1, t), gate("t", t),
        cnot(c2, t), gate("tdg", t), cnot(c1, t), gate("t", t), gate("h", t),
    ]


def _toffoli_control_tail(c1: int, c2: int) -> list[GateInstance]:
    return [gate("t", c2), cnot(c1, c2), gate("t", c1), gate("tdg", c2), cnot(c1, c2)]


def expand_toffoli(circuit: Circuit) -> Circuit:
    """Expand every Toffoli into the standard 1-/2-qubit sequence."""
    out = Circuit(circuit.num_qubits, register_labels=dict(circuit.register_labels))
    for g in circuit.gates:
        if g.kind == "x" and len(g.controls) == 2:
            c1, c2 = _solid(g.controls)
            if any(pol == 0 for _, pol in g.controls):
                raise UnsupportedGateError("expand_toffoli expects solid controls")
            out.add(*_toffoli_target_part(c1, c2, g.targets[0]))
            out.add(*_toffoli_control_tail(c1, c2))
        else:
            out.add(g)
    return out


def _is_ccx(g: GateInstance) -> bool:
    return g.kind == "x" and len(g.controls) == 2 and all(p == 1 for _, p in g.controls)


def cancel_toffoli_pairs(circuit: Circuit) -> Circuit:
    """Cancel bracketing Toffoli pairs and expand what is left to CX level.

    A pair is two identical Toffolis whose in-between gates either avoid the
    pair's qubits entirely or are single-qubit gates on its target. The
    second member acts as the inverse, so the control-control tail of the
    standard decomposition cancels: nothing remains between the pair's
    control wires. Pairs with nothing relevant in between vanish outright.
    The pass never increases the CX-level 2-qubit count.
    """
    gates = list(circuit.gates)
    changed = True
    while changed:
        changed = False
        for i, g in enumerate(gates):
            if not _is_ccx(g):
                continue
            cset = frozenset(q for q, _ in g.controls)
            t = g.targets[0]
            between: list[GateInstance] = []
            on_target = False
            j = None
            for jj in range(i + 1, len(gates)):
                h = gates[jj]
                if _is_ccx(h) and frozenset(q for q, _ in h.controls) == cset \
                        and h.targets[0] == t:
                    j = jj
                    break
                touched = set(h.qubits)
                if not touched & ({t} | cset):
                    between.append(h)
                    continue
                if touched == {t}:
                    between.append(h)
                    on_target = True
                    continue
                break
            if j is None:
                continue
            c1, c2 = sorted(cset)
            if on_target:
                tp = _toffoli_target_part(c1, c2, t)
                tp_dag = [h.dagger() for h in reversed(tp)]
                replacement = tp + between + tp_dag
            else:
                replacement = between
            gates[i:j + 1] = replacement
            changed = True
            break
    out = Circuit(circuit.num_qubits, gates, dict(circuit.register_labels))
    return expand_toffoli(out)


def check_coupling(circuit: Circuit, cmap: CouplingMap) -> list[tuple[int, tuple[int, int]]]:
    """Report every 2-qubit interaction that does not sit on a coupling edge.

    Toffolis are checked through the pairs their standard expansion uses;
    wider gates are checked over all qubit pairs (conservative)."""
    violations = []
    for idx, g in enumerate(circuit.gates):
        qs = g.qubits
        if len(qs) == 1:
            continue
        if g.kind == "x" and len(g.controls) == 2:
            c1, c2 = _solid(g.controls)
            pairs = [(c1, g.targets[0]), (c2, g.targets[0]), (c1, c2)]
        elif len(qs) == 2:
            pairs = [(qs[0], qs[1])]
        else:
            pairs = [(a, b) for i, a in enumerate(qs) for b in qs[i + 1:]]
        for a, b in pairs:
            if not cmap.connected(a, b):
                violations.append((idx, (a, b)))
    return violations
