"""OpenQASM 2.0 export for native-level circuits, plus a reader for our own
dialect so round trips can be census-checked.

Registers follow the role tags: q (system), qa (ancillas), qr (readout).
Output is byte-stable for a fixed input circuit.
"""

from __future__ import annotations

from .errors import UnsupportedGateError
from .gates import Circuit, GateInstance
from .circuitopt import gate_census  # noqa: F401  (re-exported convenience)

_SIMPLE = {"x", "y", "z", "h", "s", "sdg", "t", "tdg"}
_PARAM = {"rx", "ry", "rz"}

_ROLE_ORDER = ("q", "qa", "qr")


def _fmt(x: float) -> str:
    return format(x, ".15g")


def _register_layout(circuit: Circuit):
    regs: dict[str, list[int]] = {r: [] for r in _ROLE_ORDER}
    for q in range(circuit.num_qubits):
        role = circuit.register_labels.get(q, "q")
        if role not in regs:
            raise UnsupportedGateError(f"unknown register role {role!r}")
        regs[role].append(q)
    where = {}
    for role in _ROLE_ORDER:
        for offset, q in enumerate(sorted(regs[role])):
            where[q] = f"{role}[{offset}]"
    return regs, where


def export_qasm(circuit: Circuit) -> str:
    """Serialize a lowered circuit ({1-qubit, CNOT, Toffoli}, plus u1 for
    phase gates) to OpenQASM 2.0 text."""
    regs, where = _register_layout(circuit)
    lines = ["OPENQASM 2.0;", 'include "qelib1.inc";']
    for role in _ROLE_ORDER:
        if regs[role]:
            lines.append(f"qreg {role}[{len(regs[role])}];")
    for g in circuit.gates:
        nc = len(g.controls)
        if nc and any(pol == 0 for _, pol in g.controls):
            raise UnsupportedGateError("open controls must be lowered before export")
        if g.kind in _SIMPLE and nc == 0:
            lines.append(f"{g.kind} {where[g.targets[0]]};")
        elif g.kind == "p" and nc == 0:
            lines.append(f"u1({_fmt(g.params[0])}) {where[g.targets[0]]};")
        elif g.kind in _PARAM and nc == 0:
            lines.append(f"{g.kind}({_fmt(g.params[0])}) {where[g.targets[0]]};")
        elif g.kind == "x" and nc == 1:
            lines.append(f"cx {where[g.controls[0][0]]},{where[g.targets[0]]};")
        elif g.kind == "x" and nc == 2:
            c1, c2 = (c for c, _ in g.controls)
            lines.append(f"ccx {where[c1]},{where[c2]},{where[g.targets[0]]};")
        else:
            raise UnsupportedGateError(f"not exportable: {g.kind} with {nc} controls")
    return "\n".join(lines) + "\n"


def import_qasm(text: str) -> Circuit:
    """Parse our own OpenQASM 2.0 dialect back into a Circuit."""
    sizes: dict[str, int] = {}
    body: list[tuple[str, str | None, list[str]]] = []
    for raw in text.splitlines():
        line = raw.split("//")[0].strip()
        if not line or line.startswith(("OPENQASM", "include")):
            continue
        if not line.endswith(";"):
            raise UnsupportedGateError(f"malformed line: {raw!r}")
        line = line[:-1].strip()
        if line.startswith("qreg"):
            name, size = line[len("qreg"):].strip().rstrip("]").split("[")
            sizes[name.strip()] = int(size)
            continue
        head, _, args = line.partition(" ")
        param = None
        if "(" in head:
            head, _, rest = head.partition("(")
            param = rest.rstrip(")")
        body.append((head, param, [a.strip() for a in args.split(",")]))

    offsets: dict[str, int] = {}
    labels: dict[int, str] = {}
    base = 0
    for role in _ROLE_ORDER:
        if role in sizes:
            offsets[role] = base
            for i in range(sizes[role]):
                labels[base + i] = role
            base += sizes[role]
    circ = Circuit(base, register_labels=labels)

    def qubit(ref: str) -> int:
        name, idx = ref.rstrip("]").split("[")
        return offsets[name] + int(idx)

    for head, param, args in body:
        qs = [qubit(a) for a in args]
        if head in _SIMPLE:
            circ.add(GateInstance(head, (), (qs[0],)))
        elif head in _PARAM:
            circ.add(GateInstance(head, (float(param),), (qs[0],)))
        elif head == "u1":
            circ.add(GateInstance("p", (float(param),), (qs[0],)))
        elif head == "cx":
            circ.add(GateInstance("x", (), (qs[1],), ((qs[0], 1),)))
        elif head == "ccx":
            circ.add(GateInstance("x", (), (qs[2],), ((qs[0], 1), (qs[1], 1))))
        else:
            raise UnsupportedGateError(f"unknown instruction {head!r}")
    return circ
