from __future__ import annotations

from typing import Optional, Union
import math
import numpy as np
from .datastructs import SpinPattern, StateVector, InvalidPatternError, DimensionMismatchError, \
    EmptySectorError, MAX_DYNAMICS_SITES
from .utils import popcounts, basis_indices


__all__ = ['pattern_index', 'product_state', 'index_to_pattern', 'magnetization_of_index',
           'sector_indices', 'parity_indices', 'n_sites_of', 'normalize', 'random_state']


def pattern_index(pattern: Union[SpinPattern, str]) -> int:
    """Basis index of a product pattern: site j sets bit (j - 1) when it is up."""
    if not isinstance(pattern, SpinPattern):
        pattern = SpinPattern(pattern)
    return sum(1 << (j - 1) for j in pattern.up_sites)


def product_state(pattern: Union[SpinPattern, str], n: Optional[int] = None) -> StateVector:
    """**Product state of a spin pattern in the full 2^n basis.**

    :param pattern: a ``SpinPattern`` or its bit string
    :param n: optionally, the chain length the pattern has to match
    :return: a complex vector with a single amplitude 1 at the pattern's index
    """
    if not isinstance(pattern, SpinPattern):
        pattern = SpinPattern(pattern)
    if n is not None and pattern.n != n:
        raise InvalidPatternError(f'Pattern {pattern.bits!r} has {pattern.n} sites, the chain has {n}.')
    if pattern.n > MAX_DYNAMICS_SITES:
        raise InvalidPatternError(f'Patterns longer than {MAX_DYNAMICS_SITES} sites are not supported.')
    psi = np.zeros(1 << pattern.n, dtype=complex)
    psi[pattern_index(pattern)] = 1.0
    return psi


def index_to_pattern(b: int, n: int) -> SpinPattern:
    if not 0 <= b < (1 << n):
        raise ValueError(f'Basis index {b} out of range for {n} sites.')
    return SpinPattern(''.join('1' if (b >> k) & 1 else '0' for k in range(n)))


def magnetization_of_index(b: int, n: int) -> int:
    """Total sigma^z of basis state ``b``, i.e. ``2 popcount(b) - n``."""
    if not 0 <= b < (1 << n):
        raise ValueError(f'Basis index {b} out of range for {n} sites.')
    return 2 * bin(b).count('1') - n


def sector_indices(n: int, mz: int) -> np.ndarray:
    """Ascending basis indices with total magnetization ``mz``."""
    if abs(mz) > n or (n + mz) % 2:
        raise EmptySectorError(f'No basis state of {n} sites has magnetization {mz}.')
    ups = (n + mz) // 2
    indices = np.flatnonzero(popcounts(n) == ups)
    assert indices.size == math.comb(n, ups)
    return indices


def parity_indices(n: int, odd: bool) -> np.ndarray:
    """Basis indices with an odd (or even) number of up spins."""
    return np.flatnonzero((popcounts(n) & 1) == int(odd))


def n_sites_of(psi: StateVector) -> int:
    """Chain length of a full-space state vector."""
    dim = np.shape(psi)[0]
    n = dim.bit_length() - 1
    if dim < 2 or (1 << n) != dim:
        raise DimensionMismatchError(1 << max(n, 1), dim, 'state dimension (a power of two)')
    return n


def normalize(psi: StateVector) -> StateVector:
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise ValueError('Cannot normalize the zero vector.')
    return psi / norm


def random_state(n: int, rng: Optional[np.random.Generator] = None) -> StateVector:
    """Haar-random pure state of ``n`` sites."""
    rng = rng if rng is not None else np.random.default_rng()
    dim = basis_indices(n).size
    return normalize(rng.normal(size=dim) + 1j * rng.normal(size=dim))
