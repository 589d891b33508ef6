"""Exception hierarchy.

ConfigError maps to CLI exit code 2, ContractError (and subclasses) to exit
code 3; everything else is a plain bug.
"""


class QpertError(Exception):
    pass


class ConfigError(QpertError):
    """Invalid run configuration (bad schema, missing seed, out-of-range value)."""


class ContractError(QpertError):
    """A numerical or structural contract was violated at runtime."""


class NonUnitaryError(ContractError):
    pass


class CollapseError(ContractError):
    """Selected measurement branch has probability below the dead-branch threshold."""


class AncillaError(ContractError):
    """Not enough ancilla qubits to lower a multi-controlled gate."""


class DegenerateTargetError(ContractError):
    """Non-degenerate perturbation theory asked for a degenerate level."""


class LevelSplitError(ContractError):
    """Energy level grouping is ambiguous at the configured tolerance."""


class ConstantBoundError(ContractError):
    """Scale constant violates the amplitude bound |C/(E_k - E_n)| <= 1."""


class PostselectionError(ContractError):
    """Postselected branch carries (numerically) zero probability."""


class RusExhaustedError(ContractError):
    """Repeat-until-success gave up after the configured number of attempts."""


class UnsupportedGateError(ContractError):
    pass


class UnmappedQubitError(ContractError):
    pass


class FitRankError(ContractError):
    """Regression grid is too small or degenerate."""
