"""Perturbation-estimation circuits and estimators.

The pipeline prepares |k>, applies the rotated perturbation (plain
exponential or the odd-order difference construction), writes the inverse
energy gaps onto a readout qubit, postselects, and reconstructs first-order
state and first/second-order energy corrections.

Register layout for estimation circuits: qubits 0-3 are the system register
q, 4-5 the multi-control ancillas q', then one readout qubit per
postselection flag (role "qr"): the gap-readout qubit and, in difference
mode, the combination ancilla.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from itertools import combinations

import numpy as np

from .errors import (
    ConfigError,
    ConstantBoundError,
    PostselectionError,
    RusExhaustedError,
)
from .gates import Circuit, GateInstance, circuit_unitary, cnot, gate
from .hubbard import (
    DIM,
    LEVEL_TOL,
    ZZ_PAIRS,
    HubbardParams,
    SpectrumTable,
    make_spectrum_table,
    udis_mixing_angle,
)
from .statevector import (
    StateVector,
    amplitude,
    marginal_probabilities,
    measure_qubit,
    new_zero_state,
    postselect,
    run_circuit,
    sample_counts,
)

N_SYS = 4
Q_SYS = (0, 1, 2, 3)
Q_ANC = (4, 5)
Q_READ = 6
Q_DIFF = 7

V_MODES = ("plain_exp", "difference")
READOUT_MODES = ("exact_amplitude", "shots")


@dataclass(frozen=True)
class PTCircuitConfig:
    """Knobs for one estimation run."""

    k: int = 0
    lam: float = 0.1
    C: float | None = None
    v_mode: str = "plain_exp"
    readout_mode: str = "exact_amplitude"
    shots: int = 32000
    seed: int | None = None
    rus_max_attempts: int = 10**6
    params: HubbardParams = field(default_factory=HubbardParams)

    def __post_init__(self):
        if not 0 <= self.k < DIM:
            raise ConfigError(f"k must be a 4-qubit basis index, got {self.k}")
        if self.v_mode not in V_MODES:
            raise ConfigError(f"v_mode must be one of {V_MODES}")
        if self.readout_mode not in READOUT_MODES:
            raise ConfigError(f"readout_mode must be one of {READOUT_MODES}")
        if self.readout_mode == "shots":
            if self.seed is None:
                raise ConfigError("shots mode requires an explicit seed")
            if self.shots < 1:
                raise ConfigError("shots must be >= 1")
        if self.rus_max_attempts < 1:
            raise ConfigError("rus_max_attempts must be >= 1")


@dataclass
class EstimateRecord:
    """Quantum-side estimates at one perturbation strength."""

    lam: float
    e1_est: float
    psi1_est: np.ndarray
    e2_est: float | None
    rus_attempts: int
    success_prob: float
    sign_ambiguous: bool = False


def scale_constant(spectrum: SpectrumTable, k: int, C: float | None = None) -> float:
    """Default scale constant: the signed gap to the level nearest k, which
    drives that level's readout amplitude to exactly 1. Any explicit C must
    respect |C/(E_k - E_n)| <= 1 for every level n != k's."""
    ek = spectrum.energy_of(k)
    gaps = [lv.energy - ek for lv in spectrum.levels if abs(lv.energy - ek) > LEVEL_TOL]
    if C is None:
        nearest = min(gaps, key=abs)
        C = -nearest  # C/(E_k - E_nearest) = +1
    for g in gaps:
        if abs(C / g) > 1.0 + 1e-12:
            raise ConstantBoundError(
                f"|C/(E_k-E_n)| = {abs(C / g):.6f} > 1 for gap {g:.6f}"
            )
    return float(C)


def build_u_in(k: int) -> Circuit:
    """NOT gates on the set bits of k (q1 is the most significant bit)."""
    if not 0 <= k < DIM:
        raise ValueError(f"k must be in [0, {DIM}), got {k}")
    circ = Circuit(N_SYS)
    for q in range(N_SYS):
        if (k >> (N_SYS - 1 - q)) & 1:
            circ.add(gate("x", q))
    return circ


def build_u_dis(params: HubbardParams | None = None) -> Circuit:
    """Disentangling circuit mapping each basis label to its eigenstate.

    Time order: NOT gates on q1 and q3 first (so |0000> reaches the ground
    state), then the two special rotations on the label pairs {6,9} and
    {5,10}, then the Fourier blocks on each spin pair.
    """
    from .gates import build_qft_pair, build_special_rotation

    params = params or HubbardParams()
    circ = Circuit(N_SYS)
    circ.add(gate("x", 0), gate("x", 2))
    circ.extend(build_special_rotation("r_6_9", math.pi / 4.0))
    circ.extend(build_special_rotation("r_5_10", udis_mixing_angle(params.t, params.U) / 2.0))
    circ.extend(build_qft_pair(0, 1))
    circ.extend(build_qft_pair(2, 3))
    return circ


def build_exp_v(lam: float, sign: int = 1) -> Circuit:
    """exp(i sign lam ZZ) block per cross-site pair: CNOT - Rz - CNOT each.

    All four terms commute, so the product equals the exact exponential."""
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    circ = Circuit(N_SYS)
    for a, b in ZZ_PAIRS:
        circ.add(cnot(a, b), gate("rz", -2.0 * sign * lam, b), cnot(a, b))
    return circ


def build_v_tilde(config: PTCircuitConfig) -> Circuit:
    """Rotated perturbation: U_dis^dag exp(i lam V) U_dis on the system register."""
    if config.v_mode != "plain_exp":
        raise ConfigError("build_v_tilde is the plain_exp construction")
    udis = build_u_dis(config.params)
    circ = Circuit(N_SYS)
    circ.extend(udis)
    circ.extend(build_exp_v(config.lam, 1))
    circ.extend(udis.dagger())
    return circ


def build_v_tilde_difference(config: PTCircuitConfig, ancilla: int = N_SYS) -> Circuit:
    """One-ancilla linear combination realizing exp(+i lam V/2) - exp(-i lam V/2).

    Hadamard on the ancilla, ancilla-controlled positive half-step and
    anti-controlled negative half-step (conjugated once by the disentangler),
    Hadamard again; postselecting the ancilla on |1> applies the difference
    (over 2), which is odd in lam and so free of the quadratic term.
    """
    n = max(N_SYS, ancilla + 1)
    circ = Circuit(n, register_labels={ancilla: "qr"})
    circ.add(gate("h", ancilla))
    udis = build_u_dis(config.params)
    circ.add(*udis.gates)
    half = config.lam / 2.0
    for a, b in ZZ_PAIRS:
        circ.add(
            cnot(a, b),
            GateInstance("rz", (-2.0 * half,), (b,), ((ancilla, 1),)),
            cnot(a, b),
        )
    for a, b in ZZ_PAIRS:
        circ.add(
            cnot(a, b),
            GateInstance("rz", (2.0 * half,), (b,), ((ancilla, 0),)),
            cnot(a, b),
        )
    circ.add(*udis.dagger().gates)
    circ.add(gate("h", ancilla))
    return circ


def _target_angles(spectrum: SpectrumTable, k: int, C: float) -> np.ndarray:
    """Cumulative rotation angle each basis label must accumulate on the
    readout qubit: sin(theta/2) = C/(E_k - E_n), zero on k's own level."""
    ek = spectrum.energy_of(k)
    phi = np.zeros(DIM)
    for n in range(DIM):
        en = spectrum.energy_of(n)
        if abs(en - ek) <= LEVEL_TOL:
            continue
        ratio = C / (ek - en)
        if abs(ratio) > 1.0 + 1e-12:
            raise ConstantBoundError(f"|C/(E_k-E_n)| = {abs(ratio):.6f} > 1")
        phi[n] = 2.0 * math.asin(max(-1.0, min(1.0, ratio)))
    return phi


def _matchset(pattern: dict[int, int]) -> list[int]:
    out = []
    for n in range(DIM):
        if all(((n >> (N_SYS - 1 - q)) & 1) == b for q, b in pattern.items()):
            out.append(n)
    return out


def _mcry_on_readout(pattern: dict[int, int], theta: float, target: int) -> GateInstance:
    controls = tuple((q, pattern[q]) for q in sorted(pattern))
    return GateInstance("ry", (theta,), (target,), controls)


def _ue_register(num_qubits: int = 7, target: int = Q_READ) -> Circuit:
    labels = {q: "q" for q in Q_SYS}
    labels.update({q: "qa" for q in Q_ANC if q < num_qubits})
    labels[target] = "qr"
    return Circuit(num_qubits, register_labels=labels)


def build_u_e(
    spectrum: SpectrumTable, k: int, C: float, num_qubits: int = 7, target: int = Q_READ
) -> Circuit:
    """Gap-readout network, grouped by degenerate levels.

    Layering: a plain Ry with the most-degenerate level's angle, one grouped
    multi-controlled Ry per level whose members share a control pattern that
    leaks only onto k's level, then per-label corrections including the gate
    zeroing the target state itself. All rotations act on the same readout
    qubit and commute, so the cumulative angles solve exactly.
    """
    C = scale_constant(spectrum, k, C)
    phi = _target_angles(spectrum, k, C)
    target_members = set(spectrum.level_of(k).members)

    default = max(spectrum.levels, key=lambda lv: lv.degeneracy)
    theta0 = phi[default.members[0]]
    circ = _ue_register(num_qubits, target)
    circ.add(gate("ry", theta0, target))
    cum = np.full(DIM, theta0)

    order = sorted(spectrum.levels, key=lambda lv: (-lv.degeneracy, lv.energy))
    for lv in order:
        if lv is default or lv.members == spectrum.level_of(k).members:
            continue
        members = lv.members
        pattern = {}
        for q in range(N_SYS):
            bits = {(m >> (N_SYS - 1 - q)) & 1 for m in members}
            if len(bits) == 1:
                pattern[q] = bits.pop()
        if not pattern:
            continue
        matched = _matchset(pattern)
        extras = set(matched) - set(members)
        if not extras <= target_members:
            continue
        delta = phi[members[0]] - cum[members[0]]
        if abs(delta) > 1e-12:
            circ.add(_mcry_on_readout(pattern, delta, target))
            for n in matched:
                cum[n] += delta
    for n in range(DIM):
        delta = phi[n] - cum[n]
        if abs(delta) > 1e-12:
            pattern = {q: (n >> (N_SYS - 1 - q)) & 1 for q in range(N_SYS)}
            circ.add(_mcry_on_readout(pattern, delta, target))
            cum[n] += delta
    return circ


def full_decomposition_angles(spectrum: SpectrumTable, k: int, C: float) -> dict[tuple[int, ...], float]:
    """Angles of the degeneracy-free universal ladder, keyed by the control
    subset (qubit ids, solid controls). Moebius inversion of the cumulative
    angles over the subset lattice."""
    C = scale_constant(spectrum, k, C)
    phi = _target_angles(spectrum, k, C)

    def label_of(subset: tuple[int, ...]) -> int:
        n = 0
        for q in subset:
            n |= 1 << (N_SYS - 1 - q)
        return n

    alphas: dict[tuple[int, ...], float] = {}
    for size in range(N_SYS + 1):
        for subset in combinations(range(N_SYS), size):
            total = phi[label_of(subset)]
            acc = sum(
                alphas[sub]
                for r in range(size)
                for sub in combinations(subset, r)
            )
            alphas[subset] = total - acc
    return alphas


def build_u_e_full_decomposition(
    spectrum: SpectrumTable, k: int, C: float, num_qubits: int = 7, target: int = Q_READ
) -> Circuit:
    """Universal gap-readout ladder: one Ry, then every controlled Ry over the
    subset lattice of the system qubits (4 single-, 6 double-, 4 triple-
    controlled gates and one with four controls), all solid controls."""
    alphas = full_decomposition_angles(spectrum, k, C)
    circ = _ue_register(num_qubits, target)
    for subset in sorted(alphas, key=lambda s: (len(s), s)):
        theta = alphas[subset]
        if not subset:
            circ.add(gate("ry", theta, target))
        else:
            circ.add(
                GateInstance("ry", (theta,), (target,), tuple((q, 1) for q in subset))
            )
    return circ


def ue_parts(spectrum: SpectrumTable, k: int, C: float) -> list[Circuit]:
    """Four slices of the universal ladder studied separately: the plain+single-
    controlled rotations, the doubly-controlled block split in two, and the
    3/4-controlled tail."""
    alphas = full_decomposition_angles(spectrum, k, C)
    by_size: dict[int, list[GateInstance]] = {s: [] for s in range(5)}
    for subset, theta in alphas.items():
        if not subset:
            by_size[0].append(gate("ry", theta, Q_READ))
        else:
            by_size[len(subset)].append(
                GateInstance("ry", (theta,), (Q_READ,), tuple((q, 1) for q in subset))
            )
    groups = [
        by_size[0] + by_size[1],
        by_size[2][:3],
        by_size[2][3:] + by_size[3][:2],
        by_size[3][2:] + by_size[4],
    ]
    parts = []
    for gates_ in groups:
        circ = _ue_register()
        circ.add(*gates_)
        parts.append(circ)
    return parts


def calibrate_u_e(
    u_e: Circuit,
    spectrum: SpectrumTable,
    k: int,
    C: float,
    readout_mode: str = "exact_amplitude",
    shots: int = 32000,
    seed: int | None = None,
):
    """Uniform-superposition calibration.

    Hadamards on the system qubits, then the gap-readout circuit; for each
    level report (energy, E_n - E_k, measured 16*P_n averaged over members,
    predicted C^2/(E_k - E_n)^2). P_n is the probability of reading |n> on
    the system register together with |1> on the readout qubit.
    """
    C = scale_constant(spectrum, k, C)
    ek = spectrum.energy_of(k)
    read = u_e.qubits_by_role("qr")[0]
    circ = Circuit(u_e.num_qubits, register_labels=dict(u_e.register_labels))
    circ.add(*(gate("h", q) for q in Q_SYS))
    circ.extend(u_e)
    state = run_circuit(new_zero_state(circ.num_qubits), circ)

    if readout_mode == "exact_amplitude":
        probs = marginal_probabilities(state, list(Q_SYS) + [read])
        p_n = {n: float(probs[(n << 1) | 1]) for n in range(DIM)}
    elif readout_mode == "shots":
        if seed is None:
            raise ConfigError("shots mode requires a seed")
        counts = sample_counts(state, list(Q_SYS) + [read], shots, seed)
        p_n = {
            n: counts.get(format(n, "04b") + "1", 0) / shots for n in range(DIM)
        }
    else:
        raise ConfigError(f"unknown readout mode {readout_mode!r}")

    rows = []
    for lv in spectrum.levels:
        measured = 16.0 * float(np.mean([p_n[m] for m in lv.members]))
        gap = lv.energy - ek
        predicted = 0.0 if abs(gap) <= LEVEL_TOL else C * C / (gap * gap)
        rows.append(
            {
                "energy": lv.energy,
                "gap": gap,
                "degeneracy": lv.degeneracy,
                "sixteen_p": measured,
                "predicted": predicted,
            }
        )
    return rows


def _estimation_register(v_mode: str) -> Circuit:
    n = 8 if v_mode == "difference" else 7
    labels = {q: "q" for q in Q_SYS}
    labels.update({q: "qa" for q in Q_ANC})
    labels[Q_READ] = "qr"
    if v_mode == "difference":
        labels[Q_DIFF] = "qr"
    return Circuit(n, register_labels=labels)


def build_psi1_circuit(config: PTCircuitConfig, spectrum: SpectrumTable, C: float) -> Circuit:
    """Forward circuit through the gap readout: U_in, rotated perturbation,
    U_e. Postselection flags are the role-"qr" qubits, all on |1>."""
    circ = _estimation_register(config.v_mode)
    circ.add(*build_u_in(config.k).gates)
    if config.v_mode == "plain_exp":
        circ.add(*build_v_tilde(config).gates)
    else:
        circ.add(*build_v_tilde_difference(config, ancilla=Q_DIFF).gates)
    circ.extend(build_u_e(spectrum, config.k, C, num_qubits=circ.num_qubits))
    return circ


def run_rus(circuit: Circuit, config: PTCircuitConfig, rng=None):
    """Repeat-until-success over the circuit's postselection flags.

    Exact mode projects the success branch directly (one attempt, success
    probability = branch weight). Shots mode re-prepares and measures until
    every flag reads 1, then returns the collapsed state.
    """
    flags = [(q, 1) for q in circuit.qubits_by_role("qr")]
    state0 = new_zero_state(circuit.num_qubits)
    after = run_circuit(state0, circuit)
    prob = 1.0
    probe = after
    for qubit, want in flags:
        p, probe = postselect(probe, [(qubit, want)])
        prob *= p
    if config.readout_mode == "exact_amplitude":
        return probe, 1, prob

    rng = np.random.default_rng(config.seed) if rng is None else rng
    for attempt in range(1, config.rus_max_attempts + 1):
        state = after.copy()
        good = True
        for qubit, want in flags:
            outcome, state = measure_qubit(state, qubit, rng)
            if outcome != want:
                good = False
                break
        if good:
            return state, attempt, prob
    raise RusExhaustedError(
        f"no success in {config.rus_max_attempts} attempts (p = {prob:.3e})"
    )


def _second_stage(config: PTCircuitConfig, num_qubits: int, reset_diff: bool) -> Circuit:
    """Adjoint perturbation stage plus U_in^dag, applied after the gap readout."""
    circ = Circuit(num_qubits)
    if config.v_mode == "plain_exp":
        circ.add(*build_v_tilde(config).dagger().gates)
    else:
        if reset_diff:
            circ.add(gate("x", Q_DIFF))
        diff = build_v_tilde_difference(
            replace(config, lam=-config.lam), ancilla=Q_DIFF
        )
        circ.add(*diff.gates)
    circ.add(*build_u_in(config.k).dagger().gates)
    return circ


def _norm_factor(v_mode: str) -> float:
    return 2.0 if v_mode == "difference" else 1.0


def _run_estimation(config: PTCircuitConfig):
    """Single exact pass computing e1, psi1 and e2 amplitudes coherently."""
    spectrum = make_spectrum_table(config.params)
    C = scale_constant(spectrum, config.k, config.C)
    circ = build_psi1_circuit(config, spectrum, C)
    n = circ.num_qubits
    state = run_circuit(new_zero_state(n), circ)

    flag_bits = [(Q_READ, 1)]
    e1_flag = []
    if config.v_mode == "difference":
        flag_bits.append((Q_DIFF, 1))
        e1_flag = [(Q_DIFF, 1)]

    def idx(label: int, read: int, diff: int | None) -> int:
        i = label << (n - N_SYS)
        i |= read << (n - 1 - Q_READ)
        if diff is not None:
            i |= diff << (n - 1 - Q_DIFF)
        return i

    diff_bit = 1 if config.v_mode == "difference" else None
    a = np.array(
        [amplitude(state, idx(m, 1, diff_bit)) for m in range(DIM)], dtype=complex
    )
    success_prob = float(np.sum(np.abs(a) ** 2))

    # diagonal element of the rotated perturbation: readout stays |0>
    akk = amplitude(state, idx(config.k, 0, diff_bit))
    factor = _norm_factor(config.v_mode)
    e1_est = float(np.imag(akk) * factor / config.lam)
    psi1_est = a * (-1j * factor) / (C * config.lam)
    return spectrum, C, circ, state, a, success_prob, e1_est, psi1_est


def estimate_psi1(config: PTCircuitConfig) -> EstimateRecord:
    """First-order eigenstate coefficients (and the first-order energy) from
    the collapsed gap-readout branch."""
    spectrum, C, circ, state, a, p, e1, psi1 = _run_estimation(config)
    if p < 1e-15:
        raise PostselectionError(f"success branch probability {p:.3e}")
    if config.readout_mode == "exact_amplitude":
        return EstimateRecord(config.lam, e1, psi1, None, 1, p)

    collapsed, attempts, _ = run_rus(circ, config)
    counts = sample_counts(collapsed, list(Q_SYS), config.shots, config.seed)
    mags = np.zeros(DIM)
    factor = _norm_factor(config.v_mode)
    for key, cnt in counts.items():
        m = int(key, 2)
        mags[m] = math.sqrt(cnt / config.shots * p) * factor / abs(C * config.lam)
    return EstimateRecord(config.lam, e1, mags.astype(complex), None, attempts, p,
                          sign_ambiguous=True)


def _e2_from_amplitude(a_raw: complex, config: PTCircuitConfig, C: float) -> float:
    factor = _norm_factor(config.v_mode) ** 2
    return float(np.real(a_raw) * factor / (C * config.lam**2))


def estimate_e2(config: PTCircuitConfig) -> EstimateRecord:
    """Second-order energy from the return amplitude after the adjoint stage.

    Exact mode follows the unnormalized success branch, so the reconstruction
    A * sqrt(p) ... collapses to a single signed amplitude read."""
    spectrum, C, circ, state, a, p, e1, psi1 = _run_estimation(config)
    if p < 1e-15:
        raise PostselectionError(f"success branch probability {p:.3e}")
    n = circ.num_qubits

    # unnormalized projection of every "qr" flag onto |1>
    amps = state.amplitudes.copy()
    psi = amps.reshape((2,) * n)
    for q in circ.qubits_by_role("qr"):
        sel = [slice(None)] * n
        sel[q] = 0
        psi[tuple(sel)] = 0.0
    branch = StateVector(n, amps)
    second = _second_stage(config, n, reset_diff=True)
    final = run_circuit(branch, second)

    target = 1 << (n - 1 - Q_READ)
    if config.v_mode == "difference":
        target |= 1 << (n - 1 - Q_DIFF)
    a_raw = amplitude(final, target)
    e2 = _e2_from_amplitude(a_raw, config, C)

    if config.readout_mode == "exact_amplitude":
        return EstimateRecord(config.lam, e1, psi1, e2, 1, p)

    collapsed, attempts, _ = run_rus(circ, config)
    if config.v_mode == "difference":
        collapsed = run_circuit(collapsed, _second_stage(config, n, reset_diff=True))
        probs = marginal_probabilities(collapsed, list(Q_SYS) + [Q_DIFF])
        p_hit = float(probs[1])  # q register all zero, diff flag 1
    else:
        collapsed = run_circuit(collapsed, _second_stage(config, n, reset_diff=False))
        probs = marginal_probabilities(collapsed, list(Q_SYS))
        p_hit = float(probs[0])
    rng = np.random.default_rng(config.seed + 1)
    hits = rng.binomial(config.shots, min(1.0, p_hit))
    mag = math.sqrt(hits / config.shots * p) * _norm_factor(config.v_mode) ** 2 / abs(
        C * config.lam**2
    )
    return EstimateRecord(config.lam, e1, psi1, mag, attempts, p, sign_ambiguous=True)


def estimate_e2_no_rus(config: PTCircuitConfig) -> EstimateRecord:
    """Measurement-free variant: the gap-readout qubit is never collapsed;
    it controls a final multi-controlled NOT onto a fresh readout qubit.

    Exact mode must agree with estimate_e2 to 1e-10."""
    spectrum = make_spectrum_table(config.params)
    C = scale_constant(spectrum, config.k, config.C)
    base = build_psi1_circuit(config, spectrum, C)
    n_fwd = base.num_qubits

    if config.v_mode == "difference":
        # fresh combination ancilla for the adjoint stage, then the readout target
        anc2, ro = n_fwd, n_fwd + 1
    else:
        anc2, ro = None, n_fwd
    n = ro + 1

    labels = dict(base.register_labels)
    labels[ro] = "qr"
    if anc2 is not None:
        labels[anc2] = "qr"
    circ = Circuit(n, register_labels=labels)
    circ.add(*base.gates)

    if config.v_mode == "plain_exp":
        circ.add(*build_v_tilde(config).dagger().gates)
    else:
        circ.add(gate("h", anc2))
        udis = build_u_dis(config.params)
        circ.add(*udis.gates)
        half = -config.lam / 2.0
        for a, b in ZZ_PAIRS:
            circ.add(cnot(a, b),
                     GateInstance("rz", (-2.0 * half,), (b,), ((anc2, 1),)),
                     cnot(a, b))
        for a, b in ZZ_PAIRS:
            circ.add(cnot(a, b),
                     GateInstance("rz", (2.0 * half,), (b,), ((anc2, 0),)),
                     cnot(a, b))
        circ.add(*udis.dagger().gates)
        circ.add(gate("h", anc2))
    circ.add(*build_u_in(config.k).dagger().gates)

    controls = [(q, 0) for q in Q_SYS] + [(Q_READ, 1)]
    if config.v_mode == "difference":
        controls += [(Q_DIFF, 1), (anc2, 1)]
    circ.add(GateInstance("x", (), (ro,), tuple(controls)))

    state = run_circuit(new_zero_state(n), circ)
    target = 1 << (n - 1 - Q_READ)
    target |= 1 << (n - 1 - ro)
    if config.v_mode == "difference":
        target |= (1 << (n - 1 - Q_DIFF)) | (1 << (n - 1 - anc2))
    a_raw = amplitude(state, target)
    e2 = _e2_from_amplitude(a_raw, config, C)

    _, _, _, _, _, p, e1, psi1 = _run_estimation(config)

    if config.readout_mode == "exact_amplitude":
        return EstimateRecord(config.lam, e1, psi1, e2, 0, p)

    counts = sample_counts(state, [ro], config.shots, config.seed)
    frac = counts.get("1", 0) / config.shots
    mag = math.sqrt(frac) * _norm_factor(config.v_mode) ** 2 / abs(C * config.lam**2)
    return EstimateRecord(config.lam, e1, psi1, mag, 0, p, sign_ambiguous=True)


def sweep_records(config: PTCircuitConfig, lambda_grid) -> list[EstimateRecord]:
    """One EstimateRecord (psi1 + e2) per grid point, sorted by lambda."""
    records = []
    for lam in sorted(lambda_grid):
        records.append(estimate_e2(replace(config, lam=float(lam))))
    return records


@dataclass(frozen=True)
class FitResult:
    e1_fit: float
    e2_fit: float
    psi1_fit: np.ndarray
    e1_residual: float
    e2_residual: float
    psi1_residual: float


def fit_corrections(records: list[EstimateRecord]) -> FitResult:
    """Extrapolate the lambda-dependent estimates to their leading
    coefficients with least squares against [1, lambda^2]."""
    from .errors import FitRankError

    lams = np.array([r.lam for r in records])
    if len(records) < 3 or len(np.unique(lams)) < 3:
        raise FitRankError("need at least three distinct lambda points")
    design = np.column_stack([np.ones_like(lams), lams**2])

    def fit(y):
        beta, res, rank, _ = np.linalg.lstsq(design, y, rcond=None)
        if rank < 2:
            raise FitRankError("degenerate lambda grid")
        resid = float(np.linalg.norm(y - design @ beta))
        return beta[0], resid

    e1_fit, e1_res = fit(np.array([r.e1_est for r in records]))
    e2_fit, e2_res = fit(np.array([r.e2_est for r in records], dtype=float))
    psi = np.stack([r.psi1_est for r in records])
    psi_fit = np.zeros(DIM, dtype=complex)
    psi_res = 0.0
    for m in range(DIM):
        re_fit, re_res = fit(np.real(psi[:, m]))
        im_fit, im_res = fit(np.imag(psi[:, m]))
        psi_fit[m] = re_fit + 1j * im_fit
        psi_res += re_res**2 + im_res**2
    return FitResult(float(e1_fit), float(e2_fit), psi_fit,
                     e1_res, e2_res, math.sqrt(psi_res))


def v_tilde_matrix(config: PTCircuitConfig) -> np.ndarray:
    """Dense 16x16 matrix of the rotated perturbation circuit (plain mode)."""
    return circuit_unitary(build_v_tilde(config))
