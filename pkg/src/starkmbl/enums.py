from enum import Enum


__all__ = ['Axis', 'EvolutionMode', 'ReferenceKind', 'Resolution', 'ApplyPath', 'PatternPreset']


class Axis(Enum):
    """Rotation axes for single-site and global pulses."""

    def __str__(self) -> str:
        # noinspection PyTypeChecker
        return self.value

    X = 'x'
    Y = 'y'
    Z = 'z'


class EvolutionMode(Enum):
    """How a quench is propagated in time."""

    def __str__(self) -> str:
        # noinspection PyTypeChecker
        return self.value

    CONTINUOUS = 'continuous'
    TROTTER = 'trotter'


class ReferenceKind(Enum):
    """Analytic gap-ratio distributions."""

    def __str__(self) -> str:
        # noinspection PyTypeChecker
        return self.value

    POISSON = 'poisson'
    WIGNER_DYSON = 'wigner_dyson'


class Resolution(Enum):
    """How a spectrum is split into blocks before gap ratios are taken."""

    def __str__(self) -> str:
        # noinspection PyTypeChecker
        return self.value

    FULL = 'full'
    PARITY = 'parity'
    SECTOR = 'sector'


class ApplyPath(Enum):
    """Which kernel a ``SparseOperator`` uses for matrix-vector products."""

    def __str__(self) -> str:
        # noinspection PyTypeChecker
        return self.value

    AUTO = 'auto'
    STORED = 'stored'
    MATRIX_FREE = 'matrix_free'


class PatternPreset(Enum):
    """Named initial product states."""

    def __str__(self) -> str:
        # noinspection PyTypeChecker
        return self.value

    NEEL = 'neel'
    ANTI_NEEL = 'anti_neel'
    TWO_BLOCK = 'two_block'
    SINGLE_FLIP = 'single_flip'
