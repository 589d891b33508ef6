"""Classical ground truth for the two-site extended Hubbard model.

Register convention (qubit -> fermionic mode): q1=1up, q2=2up, q3=1dn, q4=2dn
with qubit 0 (q1) the most significant bit; occupation n = (1 - sigma_z)/2.
Same-spin modes are adjacent, so the Jordan-Wigner strings of the hopping
term are trivial and it reduces to -(t/2)(XX + YY) per spin sector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateTargetError, LevelSplitError

DIM = 16
LEVEL_TOL = 1e-9

_I = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)

# qubit pairs entering the density-density perturbation: (site1 mode, site2 mode)
ZZ_PAIRS = ((0, 1), (0, 3), (2, 1), (2, 3))


@dataclass(frozen=True)
class HubbardParams:
    """Model energies; lambda = W/4 is the dimensionless perturbation strength
    (meant to stay well below 1, not enforced)."""

    t: float = 1.0
    U: float = 1.0
    W: float = 0.0

    def __post_init__(self):
        if self.t <= 0:
            raise ValueError("hopping t must be positive")

    @property
    def lam(self) -> float:
        return self.W / 4.0


def _pauli(ops: dict[int, np.ndarray]) -> np.ndarray:
    out = np.array([[1.0]], dtype=complex)
    for q in range(4):
        out = np.kron(out, ops.get(q, _I))
    return out


def number_operator(qubit: int) -> np.ndarray:
    return (np.eye(DIM) - _pauli({qubit: _Z})) / 2.0


def total_number() -> np.ndarray:
    return sum(number_operator(q) for q in range(4))


def build_h0(params: HubbardParams) -> np.ndarray:
    """Unperturbed Hamiltonian: hopping plus on-site interaction, 16x16."""
    h = np.zeros((DIM, DIM), dtype=complex)
    for a, b in ((0, 1), (2, 3)):
        h += -params.t / 2.0 * (_pauli({a: _X, b: _X}) + _pauli({a: _Y, b: _Y}))
    n = [number_operator(q) for q in range(4)]
    h += params.U * (n[0] @ n[2] + n[1] @ n[3])
    return h


def build_v(params: HubbardParams | None = None) -> np.ndarray:
    """Site-occupation product (n1up + n1dn)(n2up + n2dn): the physical
    density-density perturbation at unit amplitude; diagonal."""
    n = [number_operator(q) for q in range(4)]
    return (n[0] + n[2]) @ (n[1] + n[3])


def zz_perturbation() -> np.ndarray:
    """The Jordan-Wigner image the circuits exponentiate: the four sigma_z
    sigma_z cross-site terms. Identity: V_zz = 4 V_site + 4 I - 4 N, so it
    differs from 4 V_site only by sector constants (particle number is
    conserved), which shift E1 but leave psi1 and E2 untouched."""
    v = np.zeros((DIM, DIM), dtype=complex)
    for a, b in ZZ_PAIRS:
        v += _pauli({a: _Z, b: _Z})
    return v


def udis_mixing_angle(t: float, U: float) -> float:
    """Ry parameter of the doublon-sector rotation inside the disentangling
    unitary: theta = 2 arccos(r) with r the small ground-state component,

        r = (sqrt(U^2/4 + 4 t^2) - 2 t) / sqrt(U^2/4 + (sqrt(U^2/4 + 4 t^2) - 2 t)^2)
    """
    s = math.sqrt(U * U / 4.0 + 4.0 * t * t)
    r = (s - 2.0 * t) / math.sqrt(U * U / 4.0 + (s - 2.0 * t) ** 2)
    return 2.0 * math.acos(r)


def _fourier_pair_matrix() -> np.ndarray:
    """4x4 mode-space Fourier block: |01> -> (|01>+|10>)/sqrt2,
    |10> -> (-|01>+|10>)/sqrt2, |00> and |11> fixed."""
    s = 1.0 / math.sqrt(2.0)
    return np.array(
        [[1, 0, 0, 0], [0, s, -s, 0], [0, s, s, 0], [0, 0, 0, 1]], dtype=complex
    )


def _two_level(lo: int, hi: int, alpha: float) -> np.ndarray:
    r = np.eye(DIM, dtype=complex)
    r[lo, lo] = r[hi, hi] = math.cos(alpha)
    r[lo, hi] = -math.sin(alpha)
    r[hi, lo] = math.sin(alpha)
    return r


def assignment_matrix(params: HubbardParams) -> np.ndarray:
    """Dense disentangling unitary: column n is the eigenstate assigned to
    basis label |n>. Composition (rightmost acts first):

        U = (F x F) . R_{5,10}(theta/2) . R_{6,9}(pi/4) . X_{q1} X_{q3}

    The NOT gates run first so that |0000> lands on the ground state; the
    two-level rotations act on 0-based index pairs {5,10} and {6,9}.
    """
    f = _fourier_pair_matrix()
    beta = udis_mixing_angle(params.t, params.U) / 2.0
    return (
        np.kron(f, f)
        @ _two_level(5, 10, beta)
        @ _two_level(6, 9, math.pi / 4.0)
        @ _pauli({0: _X, 2: _X})
    )


@dataclass(frozen=True)
class Level:
    energy: float
    degeneracy: int
    members: tuple[int, ...]


@dataclass(frozen=True)
class SpectrumTable:
    """Unperturbed levels plus the basis-label -> eigenvector assignment.

    assignment column n is the eigenvector for label |n>; energies[n] its
    eigenvalue. Levels are sorted by energy."""

    levels: tuple[Level, ...]
    energies: np.ndarray
    assignment: np.ndarray
    params: HubbardParams = field(default=HubbardParams())

    def eigenvector(self, n: int) -> np.ndarray:
        return self.assignment[:, n]

    def energy_of(self, n: int) -> float:
        return float(self.energies[n])

    def level_of(self, n: int) -> Level:
        e = self.energies[n]
        for lv in self.levels:
            if abs(lv.energy - e) <= LEVEL_TOL:
                return lv
        raise LevelSplitError(f"label {n} matches no level")

    @property
    def ground_energy(self) -> float:
        return self.levels[0].energy

    @property
    def highest_energy(self) -> float:
        return self.levels[-1].energy


def make_spectrum_table(params: HubbardParams | None = None) -> SpectrumTable:
    """Diagonalize H0 through the disentangling construction and group levels.

    At t=U=1 this reproduces the six levels {E_gs, -1, 0, 1, 2, E_h} with
    degeneracies (1, 2, 6, 3, 3, 1); the E=2 level members are |0001>,
    |0100>, |0101> (all with first and third bit 0)."""
    params = params or HubbardParams()
    h0 = build_h0(params)
    ud = assignment_matrix(params)
    diag = ud.conj().T @ h0 @ ud
    off = np.max(np.abs(diag - np.diag(np.diag(diag))))
    if off > 1e-10:
        raise LevelSplitError(f"assignment failed to diagonalize H0 (offdiag {off:.2e})")
    energies = np.real(np.diag(diag))

    order = np.argsort(energies, kind="stable")
    groups: list[list[int]] = [[int(order[0])]]
    for idx in order[1:]:
        if energies[idx] - energies[groups[-1][-1]] <= LEVEL_TOL:
            groups[-1].append(int(idx))
        else:
            groups.append([int(idx)])
    levels = []
    for g in groups:
        es = [energies[m] for m in g]
        if max(es) - min(es) > LEVEL_TOL:
            raise LevelSplitError("levels closer than the grouping tolerance")
        levels.append(Level(float(np.mean(es)), len(g), tuple(sorted(g))))
    return SpectrumTable(tuple(levels), energies, ud, params)


@dataclass(frozen=True)
class PTReference:
    """Rayleigh-Schrodinger corrections for state k: first-order energy,
    first-order state coefficients against the basis labels, second-order
    energy."""

    k: int
    E0: float
    E1: float
    psi1: np.ndarray
    E2: float


def pt_corrections(spectrum: SpectrumTable, v: np.ndarray, k: int) -> PTReference:
    """First- and second-order corrections; the sums run over every label m
    whose level differs from k's. Requires k's level to be non-degenerate."""
    lv = spectrum.level_of(k)
    if lv.degeneracy > 1:
        raise DegenerateTargetError(
            f"level at E={lv.energy:.6f} has degeneracy {lv.degeneracy}"
        )
    ek = spectrum.energy_of(k)
    psi_k = spectrum.eigenvector(k)
    e1 = float(np.real(np.vdot(psi_k, v @ psi_k)))
    psi1 = np.zeros(DIM, dtype=complex)
    e2 = 0.0
    for m in range(DIM):
        em = spectrum.energy_of(m)
        if abs(em - ek) <= LEVEL_TOL:
            continue
        vmk = np.vdot(spectrum.eigenvector(m), v @ psi_k)
        psi1[m] = vmk / (ek - em)
        e2 += abs(vmk) ** 2 / (ek - em)
    return PTReference(k, float(ek), e1, psi1, float(e2))


def exact_eigen_sweep(
    params: HubbardParams, lambda_grid, v: np.ndarray | None = None
) -> list[tuple[float, float]]:
    """Exact ground energy of H0 + lambda V for every grid point."""
    grid = list(lambda_grid)
    if not grid:
        raise ValueError("lambda grid is empty")
    h0 = build_h0(params)
    v = zz_perturbation() if v is None else v
    out = []
    for lam in grid:
        w = np.linalg.eigvalsh(h0 + lam * v)
        out.append((float(lam), float(w[0])))
    return out
