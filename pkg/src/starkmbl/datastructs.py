from __future__ import annotations

from typing import Optional, Union, List, Tuple, Dict, Iterator, Any
import math
import numpy as np
from .enums import PatternPreset


__all__ = ['StarkMBLException', 'InvalidPatternError', 'DimensionMismatchError', 'EmptySectorError',
           'CouplingFileError', 'UndefinedImbalanceError', 'ConfigError', 'ResourceGuardError',
           'NumericalError', 'StateVector', 'ChainConfig', 'SpinPattern', 'CouplingMatrix',
           'FieldProfile', 'TimeSeries', 'ImbalanceRecord', 'LevelStatsReport', 'DipoleTerm',
           'KrylovSettings', 'TrotterSettings', 'NoiseModel', 'DecayFit', 'DIPOLE_ELEMENT_SCALE']


# Plain complex ndarray of length 2^n (or of a sector dimension). Site j lives in bit (j - 1),
# a set bit is spin up.
StateVector = np.ndarray

_OptFloat = Optional[float]
_OptInt = Optional[int]

MAX_DYNAMICS_SITES = 20
MAX_SPECTRUM_SITES = 14

# Ising-chain matrix element per unit of DipoleTerm amplitude / g^2
DIPOLE_ELEMENT_SCALE = 1.0 / 6.0


class StarkMBLException(Exception):
    """Base class for every error raised on purpose by this package."""
    pass


class InvalidPatternError(StarkMBLException, ValueError):
    """A spin pattern string is malformed or does not fit the chain."""
    pass


class DimensionMismatchError(StarkMBLException, ValueError):
    """Two objects that must live on the same Hilbert space (or chain) do not."""

    def __init__(self, expected: int, got: int, what: str = 'dimension') -> None:
        self.expected = expected
        self.got = got
        super().__init__(f'Mismatched {what}: expected {expected}, got {got}.')


class EmptySectorError(StarkMBLException, ValueError):
    """No basis state has the requested magnetization."""
    pass


class CouplingFileError(StarkMBLException):
    """Exception class for malformed coupling files."""

    def __init__(self, path: Any, message: str, line: _OptInt = None) -> None:
        self.path = str(path)
        self.line = line
        where = self.path if line is None else f'{self.path}:{line}'
        super().__init__(f'{where}: {message}')


class UndefinedImbalanceError(StarkMBLException):
    """The generalized imbalance has no meaning for a fully polarized reference."""
    pass


class ConfigError(StarkMBLException):
    """Exception class for run configurations that fail to parse or validate."""

    def __init__(self, message: str, *, line: _OptInt = None, column: _OptInt = None,
                 key: Optional[str] = None) -> None:
        self.line = line
        self.column = column
        self.key = key
        prefix = ''
        if line is not None:
            prefix = f'line {line}' + (f', column {column}' if column is not None else '') + ': '
        if key:
            message = f'{key}: {message}'
        super().__init__(prefix + message)


class ResourceGuardError(StarkMBLException):
    """A requested computation is larger than the configured limit."""

    def __init__(self, requested: int, allowed: int, what: str = 'dimension') -> None:
        self.requested = requested
        self.allowed = allowed
        super().__init__(f'Requested {what} {requested} exceeds the allowed maximum of {allowed}.')


class NumericalError(StarkMBLException):
    """A numerical routine failed to meet its accuracy contract."""
    pass


class ChainConfig:
    """**An open chain of ``n`` spin-1/2 sites.**"""

    def __init__(self, n: int) -> None:
        if not isinstance(n, (int, np.integer)) or not 2 <= n <= MAX_DYNAMICS_SITES:
            raise ValueError(f'Chain length must be an integer between 2 and {MAX_DYNAMICS_SITES}.')
        self.n = int(n)

    @property
    def dimension(self) -> int:
        return 1 << self.n

    @property
    def allows_dense_spectrum(self) -> bool:
        return self.n <= MAX_SPECTRUM_SITES

    def __eq__(self, other: ChainConfig) -> bool:
        return self.n == other.n

    def __hash__(self) -> int:
        return hash(self.n)

    def __repr__(self) -> str:
        return f'<{self.__class__.__qualname__} n={self.n}>'


class SpinPattern:
    """**A product state written as a string of 0 (down) and 1 (up).**

    The leftmost character is site 1, so ``SpinPattern('01')`` is site 1 down
    and site 2 up.
    """

    @classmethod
    def neel(cls, n: int) -> SpinPattern:
        return cls(('01' * n)[:n])

    @classmethod
    def anti_neel(cls, n: int) -> SpinPattern:
        return cls(('10' * n)[:n])

    @classmethod
    def two_block(cls, n: int) -> SpinPattern:
        return cls(('0110' * n)[:n])

    @classmethod
    def single_flip(cls, n: int) -> SpinPattern:
        bits = ['0'] * n
        bits[(n - 1) // 2] = '1'
        return cls(''.join(bits))

    @classmethod
    def from_preset(cls, preset: Union[str, PatternPreset], n: int) -> SpinPattern:
        """Build one of the named patterns (see ``PatternPreset``) for ``n`` sites."""
        preset = PatternPreset(str(preset))
        if preset == PatternPreset.NEEL:
            return cls.neel(n)
        if preset == PatternPreset.ANTI_NEEL:
            return cls.anti_neel(n)
        if preset == PatternPreset.TWO_BLOCK:
            return cls.two_block(n)
        return cls.single_flip(n)

    @classmethod
    def parse(cls, text: str, n: _OptInt = None) -> SpinPattern:
        """Accept either a literal bit string or a preset name (which then needs ``n``)."""
        try:
            preset = PatternPreset(text)
        except ValueError:
            pattern = cls(text)
            if n is not None and len(pattern) != n:
                raise InvalidPatternError(
                    f'Pattern {text!r} has {len(pattern)} sites, the chain has {n}.')
            return pattern
        if n is None:
            raise InvalidPatternError(f'Preset {text!r} needs a chain length.')
        return cls.from_preset(preset, n)

    def __init__(self, bits: str) -> None:
        if not isinstance(bits, str) or not bits:
            raise InvalidPatternError('A spin pattern must be a non-empty string of 0 and 1.')
        bad = set(bits) - {'0', '1'}
        if bad:
            raise InvalidPatternError(
                f'Invalid character(s) {"".join(sorted(bad))!r} in spin pattern {bits!r}.')
        self.bits = bits

    @property
    def n(self) -> int:
        return len(self.bits)

    @property
    def spins(self) -> np.ndarray:
        """Per-site sigma^z eigenvalues, +1 for up and -1 for down."""
        return np.array([1.0 if b == '1' else -1.0 for b in self.bits])

    @property
    def up_sites(self) -> List[int]:
        return [j for j, b in enumerate(self.bits, 1) if b == '1']

    @property
    def down_sites(self) -> List[int]:
        return [j for j, b in enumerate(self.bits, 1) if b == '0']

    @property
    def magnetization(self) -> int:
        return 2 * self.bits.count('1') - self.n

    @property
    def dipole_moment(self) -> int:
        return sum(j * (1 if b == '1' else -1) for j, b in enumerate(self.bits, 1))

    @property
    def is_polarized(self) -> bool:
        return len(set(self.bits)) == 1

    def __len__(self) -> int:
        return self.n

    def __iter__(self) -> Iterator[str]:
        return iter(self.bits)

    def __eq__(self, other: SpinPattern) -> bool:
        return isinstance(other, SpinPattern) and self.bits == other.bits

    def __hash__(self) -> int:
        return hash(self.bits)

    def __repr__(self) -> str:
        return f'<{self.__class__.__qualname__} bits={self.bits!r}>'

    def __str__(self) -> str:
        return self.bits


class CouplingMatrix:
    """**Symmetric Ising couplings J_jj' in units of J0, zero on the diagonal.**"""

    def __init__(self, j: Any, *, tol: float = 1e-12) -> None:
        j = np.array(j, dtype=float)
        if j.ndim != 2 or j.shape[0] != j.shape[1]:
            raise ValueError(f'Couplings must form a square matrix, got shape {j.shape}.')
        if not np.all(np.isfinite(j)):
            raise ValueError('Couplings must be finite.')
        if np.max(np.abs(j - j.T), initial=0.0) > tol:
            raise ValueError(f'Couplings are not symmetric within {tol:g}.')
        if np.max(np.abs(np.diag(j)), initial=0.0) > tol:
            raise ValueError('Couplings must vanish on the diagonal.')
        # Exactly symmetric, exactly zero diagonal
        j = 0.5 * (j + j.T)
        np.fill_diagonal(j, 0.0)
        j.setflags(write=False)
        self._j = j

    @property
    def j(self) -> np.ndarray:
        return self._j

    @property
    def n(self) -> int:
        return self._j.shape[0]

    def pairs(self) -> Iterator[Tuple[int, int, float]]:
        """Yield ``(a, b, J_ab)`` with 0-based ``a < b`` for every nonzero coupling."""
        for a in range(self.n):
            for b in range(a + 1, self.n):
                if self._j[a, b] != 0.0:
                    yield a, b, float(self._j[a, b])

    def scaled(self, factor: float) -> CouplingMatrix:
        return CouplingMatrix(self._j * factor)

    def __eq__(self, other: CouplingMatrix) -> bool:
        return isinstance(other, CouplingMatrix) and np.array_equal(self._j, other._j)

    def __hash__(self) -> int:
        return hash(self._j.tobytes())

    def __repr__(self) -> str:
        nn = self._j[0, 1] if self.n > 1 else 0.0
        return f'<{self.__class__.__qualname__} n={self.n} nearest={nn:.6g}>'


class FieldProfile:
    """**Per-site longitudinal field B^z_j in units of J0.**

    The profile is stored as a uniform offset ``bz0`` plus a site-dependent ``shape``,
    so that ``bz = bz0 + shape``. Keeping them apart matters for the noise model (offset
    and shape fluctuate independently) and for Trotter cycles (the offset runs through the
    whole cycle, the shape only through the local-field segment).
    """

    def __init__(self, bz0: float, shape: Any, kind: str = 'custom') -> None:
        shape = np.array(shape, dtype=float)
        if shape.ndim != 1 or shape.size == 0:
            raise ValueError('A field profile needs a one-dimensional, non-empty shape.')
        if not math.isfinite(bz0) or not np.all(np.isfinite(shape)):
            raise ValueError('Field entries must be finite.')
        shape.setflags(write=False)
        self.bz0 = float(bz0)
        self._shape = shape
        self.kind = kind

    @classmethod
    def from_values(cls, bz: Any) -> FieldProfile:
        return cls(0.0, bz)

    @property
    def shape(self) -> np.ndarray:
        return self._shape

    @property
    def bz(self) -> np.ndarray:
        return self.bz0 + self._shape

    @property
    def n(self) -> int:
        return self._shape.size

    def local_slopes(self) -> np.ndarray:
        """Finite-difference slope of the field at each site (one-sided at the ends)."""
        if self.n < 2:
            return np.zeros(self.n)
        return np.gradient(self.bz)

    def with_offset(self, bz0: float) -> FieldProfile:
        return FieldProfile(bz0, self._shape, self.kind)

    def with_shape(self, shape: Any) -> FieldProfile:
        return FieldProfile(self.bz0, shape, self.kind)

    def with_deltas(self, deltas: Any) -> FieldProfile:
        deltas = np.asarray(deltas, dtype=float)
        if deltas.shape != self._shape.shape:
            raise DimensionMismatchError(self.n, deltas.size, 'site count')
        return FieldProfile(self.bz0, self._shape + deltas, self.kind)

    def __eq__(self, other: FieldProfile) -> bool:
        return isinstance(other, FieldProfile) and self.bz0 == other.bz0 \
            and np.array_equal(self._shape, other._shape)

    def __hash__(self) -> int:
        return hash((self.bz0, self._shape.tobytes()))

    def __repr__(self) -> str:
        return f'<{self.__class__.__qualname__} kind={self.kind!r} n={self.n} bz0={self.bz0:.6g}>'


class TimeSeries:
    """**Samples of an observable on an ascending grid of times tJ0.**

    ``values`` is either a vector (one scalar per time) or a matrix with one row per
    time and one column per site.
    """

    def __init__(self, times: Any, values: Any, label: str = 'value') -> None:
        times = np.array(times, dtype=float)
        values = np.array(values, dtype=float)
        if times.ndim != 1:
            raise ValueError('Times must be one-dimensional.')
        if values.ndim not in (1, 2) or values.shape[0] != times.size:
            raise DimensionMismatchError(times.size, values.shape[0] if values.ndim else 0,
                                         'sample count')
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError('Times must be strictly ascending.')
        self.times = times
        self.values = values
        self.label = label

    @property
    def is_per_site(self) -> bool:
        return self.values.ndim == 2

    def mask(self, t_lo: float, t_hi: float) -> np.ndarray:
        return (self.times >= t_lo) & (self.times <= t_hi)

    def column(self, site: int) -> TimeSeries:
        """Scalar series of one (1-based) site of a per-site series."""
        return TimeSeries(self.times, self.values[:, site - 1], f'{self.label}_{site}')

    def header(self) -> List[str]:
        if self.is_per_site:
            return ['t_j0'] + [f'{self.label}_{j}' for j in range(1, self.values.shape[1] + 1)]
        return ['t_j0', self.label]

    def rows(self) -> Iterator[List[float]]:
        for t, v in zip(self.times, self.values):
            yield [float(t)] + (list(map(float, v)) if self.is_per_site else [float(v)])

    def __len__(self) -> int:
        return self.times.size

    def __eq__(self, other: TimeSeries) -> bool:
        return isinstance(other, TimeSeries) and np.array_equal(self.times, other.times) \
            and np.array_equal(self.values, other.values)

    def __repr__(self) -> str:
        span = f'{self.times[0]:.3g}..{self.times[-1]:.3g}' if len(self) else 'empty'
        return f'<{self.__class__.__qualname__} label={self.label!r} points={len(self)} t={span}>'


class ImbalanceRecord:
    """**Generalized imbalance I(t) plus its late-time window average.**"""

    def __init__(self, series: TimeSeries, late_time_mean: float,
                 window: Tuple[float, float]) -> None:
        if np.any(np.abs(series.values) > 2.0 + 1e-9):
            raise ValueError('A generalized imbalance never exceeds 2 in magnitude.')
        self.series = series
        self.late_time_mean = float(late_time_mean)
        self.window = (float(window[0]), float(window[1]))

    def __repr__(self) -> str:
        return f'<{self.__class__.__qualname__} late_time_mean={self.late_time_mean:.4f} ' \
               f'window={self.window}>'


class LevelStatsReport:
    """**Result of a level-statistics analysis.**"""

    def __init__(self, eigenvalues: np.ndarray, r_values: np.ndarray,
                 histogram: Tuple[np.ndarray, np.ndarray], excluded_degenerate: int,
                 params: Optional[Dict[str, Any]] = None) -> None:
        self.eigenvalues = np.asarray(eigenvalues, dtype=float)
        self.r_values = np.asarray(r_values, dtype=float)
        self.mean_r = float(np.mean(self.r_values)) if self.r_values.size else float('nan')
        self.histogram = histogram
        self.excluded_degenerate = int(excluded_degenerate)
        self.params = dict(params or {})

    def summary(self) -> Dict[str, Any]:
        return {'params': self.params, 'mean_r': self.mean_r,
                'excluded_degenerate': self.excluded_degenerate,
                'levels': int(self.eigenvalues.size), 'ratios': int(self.r_values.size)}

    def __repr__(self) -> str:
        return f'<{self.__class__.__qualname__} mean_r={self.mean_r:.4f} ' \
               f'levels={self.eigenvalues.size} excluded={self.excluded_degenerate}>'


class DipoleTerm:
    """**One term s+_i s-_j s-_k s+_l + h.c. of the strong-tilt effective Hamiltonian.**

    Sites are 1-based with ``i < j < k < l``. The term raises ``i`` and ``l`` and lowers
    ``j`` and ``k``, so it conserves the dipole moment only when ``i + l == j + k``.
    ``amplitude`` is in units of J0^3/g^2. Between two configurations of ``build_ising``
    the process has the matrix element ``DIPOLE_ELEMENT_SCALE * amplitude / g^2``; the XY
    sector builder hops with J/2, so there the same process is eight times weaker.
    """

    def __init__(self, i: int, j: int, k: int, l: int, amplitude: float) -> None:
        if not 1 <= i < j < k < l:
            raise ValueError(f'Sites must satisfy 1 <= i < j < k < l, got {(i, j, k, l)}.')
        if i + l != j + k:
            raise ValueError(f'Sites {(i, j, k, l)} break dipole conservation (i + l != j + k).')
        if not math.isfinite(amplitude):
            raise ValueError('Amplitude must be finite.')
        self.i, self.j, self.k, self.l = int(i), int(j), int(k), int(l)
        self.amplitude = float(amplitude)

    @property
    def sites(self) -> Tuple[int, int, int, int]:
        return self.i, self.j, self.k, self.l

    def strength(self, g: float) -> float:
        """Ising-chain matrix element in units of J0 for a tilt ``g`` (also in J0)."""
        return DIPOLE_ELEMENT_SCALE * self.amplitude / g ** 2

    def __eq__(self, other: DipoleTerm) -> bool:
        return self.sites == other.sites and self.amplitude == other.amplitude

    def __hash__(self) -> int:
        return hash((self.sites, self.amplitude))

    def __repr__(self) -> str:
        return f'<{self.__class__.__qualname__} sites={self.sites} amplitude={self.amplitude:.6g}>'


class KrylovSettings:
    """**Parameters of the Lanczos propagator.**

    :param subspace_dim: largest Krylov subspace built per substep
    :param tolerance: bound on the residual error estimate of each substep
    :param max_substep: longest substep, in units of 1/J0
    :param min_substep: halving stops here and the propagation fails
    """

    def __init__(self, subspace_dim: int = 30, tolerance: float = 1e-10,
                 max_substep: float = 0.1, min_substep: float = 1e-6) -> None:
        if subspace_dim < 2:
            raise ValueError('The Krylov subspace needs at least two vectors.')
        if tolerance <= 0 or max_substep <= 0 or min_substep <= 0:
            raise ValueError('Tolerance and substep limits must be positive.')
        self.subspace_dim = int(subspace_dim)
        self.tolerance = float(tolerance)
        self.max_substep = float(max_substep)
        self.min_substep = float(min_substep)

    def __repr__(self) -> str:
        return f'<{self.__class__.__qualname__} m={self.subspace_dim} ' \
               f'tol={self.tolerance:g} max_substep={self.max_substep:g}>'


class TrotterSettings:
    """**Durations of one symmetrized Trotter cycle, in units of 1/J0.**

    ``dt1`` is the coupling (Ising plus bias) segment, ``dt2`` the local-field segment,
    applied as two halves around it.
    """

    def __init__(self, dt1: float, dt2: float, cycles: int = 1) -> None:
        if dt1 <= 0 or dt2 <= 0:
            raise ValueError('Both Trotter segment durations must be positive.')
        if cycles < 0:
            raise ValueError('The number of cycles cannot be negative.')
        self.dt1 = float(dt1)
        self.dt2 = float(dt2)
        self.cycles = int(cycles)

    @property
    def cycle_time(self) -> float:
        return self.dt1 + self.dt2

    @property
    def coupling_weight(self) -> float:
        return self.dt1 / self.cycle_time

    @property
    def field_weight(self) -> float:
        return self.dt2 / self.cycle_time

    def with_cycles(self, cycles: int) -> TrotterSettings:
        return TrotterSettings(self.dt1, self.dt2, cycles)

    def __repr__(self) -> str:
        return f'<{self.__class__.__qualname__} dt1={self.dt1:g} dt2={self.dt2:g} ' \
               f'cycles={self.cycles}>'


class NoiseModel:
    """**Shot-to-shot noise of the experiment.**

    :param init_rotation_angle: rotation of the initial product state in the Z-X plane
    :param sigma_bz0: standard deviation of the field offset, in J0
    :param sigma_g_frac: fractional standard deviation of the field slope
    :param sigma_local_frac: fractional standard deviation of each site's field term
    :param n_samples: number of random instances averaged
    :param seed: root seed; instance ``k`` draws from its own stream derived from ``(seed, k)``
    """

    def __init__(self, init_rotation_angle: float = 0.075 * math.pi, sigma_bz0: float = 2.4,
                 sigma_g_frac: float = 0.0625, sigma_local_frac: float = 0.03125,
                 n_samples: int = 50, seed: int = 0) -> None:
        if min(sigma_bz0, sigma_g_frac, sigma_local_frac) < 0:
            raise ValueError('Noise standard deviations cannot be negative.')
        if n_samples < 1:
            raise ValueError('At least one noise instance is needed.')
        self.init_rotation_angle = float(init_rotation_angle)
        self.sigma_bz0 = float(sigma_bz0)
        self.sigma_g_frac = float(sigma_g_frac)
        self.sigma_local_frac = float(sigma_local_frac)
        self.n_samples = int(n_samples)
        self.seed = int(seed)

    @classmethod
    def noiseless(cls, n_samples: int = 1, seed: int = 0) -> NoiseModel:
        return cls(0.0, 0.0, 0.0, 0.0, n_samples, seed)

    @property
    def is_noiseless(self) -> bool:
        return self.init_rotation_angle == 0.0 and self.sigma_bz0 == 0.0 \
            and self.sigma_g_frac == 0.0 and self.sigma_local_frac == 0.0

    def __repr__(self) -> str:
        return f'<{self.__class__.__qualname__} angle={self.init_rotation_angle:.4g} ' \
               f'sigma_bz0={self.sigma_bz0:g} sigma_g={self.sigma_g_frac:g} ' \
               f'sigma_local={self.sigma_local_frac:g} samples={self.n_samples} seed={self.seed}>'


class DecayFit:
    """**Exponential fit A exp(-t / tau).** ``tau`` is ``inf`` when the data do not decay."""

    def __init__(self, amplitude: float, tau: float, tau_stderr: float) -> None:
        self.amplitude = float(amplitude)
        self.tau = float(tau)
        self.tau_stderr = float(tau_stderr)

    def __repr__(self) -> str:
        return f'<{self.__class__.__qualname__} amplitude={self.amplitude:.4g} ' \
               f'tau={self.tau:.4g}+-{self.tau_stderr:.2g}>'
