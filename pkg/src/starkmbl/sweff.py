from __future__ import annotations

from typing import Iterable, List, Optional, Sequence, Tuple, Union
import logging
import math
import numpy as np
import scipy.sparse as sp
from .datastructs import CouplingMatrix, DipoleTerm, SpinPattern, DimensionMismatchError, \
    InvalidPatternError, ResourceGuardError, DIPOLE_ELEMENT_SCALE
from .model import SparseOperator
from .spinspace import pattern_index, index_to_pattern
from .utils import basis_indices


__all__ = ['dipole_quadruples', 'power_law_amplitude', 'coupling_amplitude', 'heff3_terms',
           'term_operator', 'effective_hamiltonian', 'effective_matrix_element',
           'dominant_process', 'perturbative_transition_probability', 'ResonantBlock',
           'resonant_block', 'RESONANT_MAX_DIMENSION']


logger = logging.getLogger(__name__)

RESONANT_MAX_DIMENSION = 1 << 12

_Source = Union[CouplingMatrix, Tuple[float, int]]


def dipole_quadruples(n: int) -> Iterable[Tuple[int, int, int, int]]:
    """All 1-based ``i < j < k < l`` with ``i + l == j + k``."""
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            for k in range(j + 1, n + 1):
                l = j + k - i
                if k < l <= n:
                    yield i, j, k, l


def power_law_amplitude(i: int, j: int, k: int, l: int, alpha: float) -> float:
    """Amplitude (units of J0^3/g^2) of one process for couplings ``1/|a - b|^alpha``."""
    assert j - i >= 1 and k - i >= 1
    prefactor = 6.0 / ((j - i) ** (alpha + 1) * (k - i) ** (alpha + 1))
    return prefactor * ((k - j) ** -alpha - (l - i) ** -alpha)


def coupling_amplitude(c: CouplingMatrix, i: int, j: int, k: int, l: int) -> float:
    """Amplitude (units of J0^3/g^2) of one process for an arbitrary coupling matrix."""
    assert j - i >= 1 and k - i >= 1
    J = c.j
    a, b, d, e = i - 1, j - 1, k - 1, l - 1
    products = J[a, b] * J[b, d] * J[b, e] + J[a, d] * J[b, d] * J[d, e] \
        - J[a, b] * J[a, d] * J[a, e] - J[a, e] * J[b, e] * J[d, e]
    return 3.0 * products / ((j - i) * (k - i))


def heff3_terms(source: _Source, g: float) -> List[DipoleTerm]:
    """**Third-order dipole-conserving terms of the strong-tilt effective Hamiltonian.**

    :param source: a ``CouplingMatrix``, or ``(alpha, n)`` for pure power-law couplings
    :param g: the tilt in units of J0; amplitudes are quoted per ``J0^3/g^2`` and
        ``DipoleTerm.strength(g)`` gives the matrix element itself
    :return: one term per dipole-conserving quadruple, zero amplitudes included
    """
    if not g > 0:
        raise ValueError('The tilt g must be positive.')
    if isinstance(source, CouplingMatrix):
        terms = [DipoleTerm(*sites, coupling_amplitude(source, *sites))
                 for sites in dipole_quadruples(source.n)]
    else:
        alpha, n = source
        if alpha <= 0:
            raise ValueError('The power-law exponent must be positive.')
        terms = [DipoleTerm(*sites, power_law_amplitude(*sites, alpha))
                 for sites in dipole_quadruples(int(n))]
    logger.debug('Built %d third-order terms', len(terms))
    return terms


def _masks(term: DipoleTerm) -> Tuple[int, int]:
    """Bits set before the term acts (j, k up) and after it (i, l up)."""
    lowered = (1 << (term.j - 1)) | (1 << (term.k - 1))
    raised = (1 << (term.i - 1)) | (1 << (term.l - 1))
    return lowered, raised


def term_operator(term: DipoleTerm, n: int, g: Optional[float] = None) -> SparseOperator:
    """``s+_i s-_j s-_k s+_l + h.c.`` times the amplitude, or times ``term.strength(g)``."""
    if term.l > n:
        raise DimensionMismatchError(n, term.l, 'site count')
    return effective_hamiltonian([term], n, g)


def effective_hamiltonian(terms: Sequence[DipoleTerm], n: int,
                          g: Optional[float] = None) -> SparseOperator:
    """Sum of the off-diagonal terms on the full ``2^n`` basis.

    Without ``g`` the entries are the bare amplitudes; with it they are the Ising-chain
    matrix elements ``DipoleTerm.strength(g)``.
    """
    idx = basis_indices(n)
    scale = 1.0 if g is None else DIPOLE_ELEMENT_SCALE / g ** 2
    rows, cols, vals = [], [], []
    for term in terms:
        if term.l > n:
            raise DimensionMismatchError(n, term.l, 'site count')
        lowered, raised = _masks(term)
        source = idx[(idx & (lowered | raised)) == lowered]
        target = source ^ (lowered | raised)
        rows.append(np.minimum(source, target))
        cols.append(np.maximum(source, target))
        vals.append(np.full(source.size, term.amplitude * scale))
    if rows:
        offdiag = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    else:
        offdiag = np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0)
    return SparseOperator(np.zeros(idx.size), offdiag, label='heff3')


def _connects(term: DipoleTerm, a: int, b: int) -> bool:
    lowered, raised = _masks(term)
    mask = lowered | raised
    return (a ^ b) == mask and (a & mask) in (lowered, raised)


def effective_matrix_element(pattern_a: SpinPattern, pattern_b: SpinPattern,
                             terms: Iterable[DipoleTerm]) -> Tuple[float, bool]:
    """**Total amplitude linking two configurations.**

    :return: ``(amplitude, compatible)``; ``compatible`` is False (and the amplitude 0)
        when the patterns differ in magnetization or dipole moment
    """
    if pattern_a.n != pattern_b.n:
        raise DimensionMismatchError(pattern_a.n, pattern_b.n, 'pattern length')
    if pattern_a.magnetization != pattern_b.magnetization \
            or pattern_a.dipole_moment != pattern_b.dipole_moment:
        return 0.0, False
    a, b = pattern_index(pattern_a), pattern_index(pattern_b)
    if a == b:
        return 0.0, True
    return float(sum(t.amplitude for t in terms if _connects(t, a, b))), True


def dominant_process(pattern: SpinPattern, terms: Iterable[DipoleTerm]
                     ) -> Optional[Tuple[DipoleTerm, SpinPattern]]:
    """Largest-amplitude term acting on ``pattern`` and the configuration it leads to."""
    a = pattern_index(pattern)
    best = None
    for term in terms:
        if term.l > pattern.n:
            continue
        lowered, raised = _masks(term)
        mask = lowered | raised
        if (a & mask) not in (lowered, raised) or term.amplitude == 0:
            continue
        if best is None or abs(term.amplitude) > abs(best[0].amplitude):
            best = term, a ^ mask
    if best is None:
        return None
    term, b = best
    return term, index_to_pattern(b, pattern.n)


def perturbative_transition_probability(amplitude: float, g: float, t: float,
                                        detuning: float = 0.0) -> float:
    """**Two-level transfer between configurations linked by one effective process.**

    With ``V = DIPOLE_ELEMENT_SCALE * amplitude / g^2`` and ``Omega = sqrt(detuning^2 + 4 V^2)``
    the probability is ``(2V / Omega)^2 sin^2(Omega t / 2)``, which is ``sin^2(V t)`` on
    resonance. ``detuning`` is the difference of the two diagonal energies left after the
    second- and third-order shifts (see ``ResonantBlock.detuning``).
    """
    coupling = DIPOLE_ELEMENT_SCALE * amplitude / g ** 2
    omega = math.hypot(detuning, 2.0 * coupling)
    if omega == 0.0:
        return 0.0
    return (2.0 * coupling / omega) ** 2 * math.sin(omega * t / 2.0) ** 2


class ResonantBlock:
    """**Third-order effective Hamiltonian on one degenerate manifold of an operator.**

    ``basis`` holds the positions (in the operator's basis) of every configuration whose
    diagonal energy equals ``energy``; ``matrix`` is the effective Hamiltonian on them with
    ``energy`` subtracted, so its diagonal carries the second- and third-order shifts.
    """

    def __init__(self, n: int, positions: np.ndarray, indices: np.ndarray, matrix: np.ndarray,
                 energy: float) -> None:
        self.n = n
        self.basis = positions
        self.indices = indices
        self.matrix = matrix
        self.energy = energy

    @property
    def patterns(self) -> List[SpinPattern]:
        return [index_to_pattern(int(b), self.n) for b in self.indices]

    def _locate(self, pattern: SpinPattern) -> int:
        found = np.flatnonzero(self.indices == pattern_index(pattern))
        if found.size == 0:
            raise InvalidPatternError(f'{pattern} is not degenerate with this block.')
        return int(found[0])

    def coupling(self, a: SpinPattern, b: SpinPattern) -> float:
        return float(self.matrix[self._locate(a), self._locate(b)])

    def detuning(self, a: SpinPattern, b: SpinPattern) -> float:
        ia, ib = self._locate(a), self._locate(b)
        return float(self.matrix[ia, ia] - self.matrix[ib, ib])

    def transfer_probability(self, source: SpinPattern, target: SpinPattern,
                             times: Sequence[float]) -> np.ndarray:
        """Probability of finding ``target`` at each time after starting in ``source``."""
        i, j = self._locate(source), self._locate(target)
        energies, vectors = np.linalg.eigh(self.matrix)
        times = np.asarray(times, dtype=float)
        phases = np.exp(-1j * np.outer(times, energies))
        return np.abs(phases @ (vectors[j] * vectors[i])) ** 2

    def __repr__(self) -> str:
        return f'<{self.__class__.__qualname__} size={self.basis.size} energy={self.energy:.6g}>'


def resonant_block(H: SparseOperator, pattern: SpinPattern, atol: float = 1e-9,
                   max_dimension: int = RESONANT_MAX_DIMENSION) -> ResonantBlock:
    """**Degenerate perturbation theory to third order around one configuration.**

    The diagonal of ``H`` is the unperturbed energy and its off-diagonal part ``V`` the
    perturbation. States within ``atol`` of the diagonal energy of ``pattern`` form the
    manifold P; every other state must sit well away from it. With ``R = 1/(E - D_Q)``::

        H_eff = V_PP + V_PQ R V_QP + V_PQ R V_QQ R V_QP
                - (V_PQ R^2 V_QP V_PP + V_PP V_PQ R^2 V_QP) / 2

    Works on the full space or on a sector operator that contains ``pattern``.

    :raise ResourceGuardError: when ``H`` is larger than ``max_dimension``
    """
    if H.dimension > max_dimension:
        raise ResourceGuardError(H.dimension, max_dimension, 'resonant block dimension')
    index = pattern_index(pattern)
    if H.is_sector:
        seed = int(np.searchsorted(H.basis, index))
        if seed >= H.basis.size or H.basis[seed] != index:
            raise InvalidPatternError(f'{pattern} lies outside the sector of {H.label}.')
        indices_of = H.basis
    else:
        if H.dimension != 1 << pattern.n:
            raise DimensionMismatchError(H.dimension, 1 << pattern.n)
        seed = index
        indices_of = np.arange(H.dimension)

    diagonal = H.diagonal
    energy = float(diagonal[seed])
    inside = np.abs(diagonal - energy) <= atol
    p, q = np.flatnonzero(inside), np.flatnonzero(~inside)
    v = (H.to_csr() - sp.diags(diagonal)).tocsr()
    v_pp = v[p][:, p].toarray()
    v_pq = v[p][:, q].toarray()
    v_qq = v[q][:, q]

    resolvent = 1.0 / (energy - diagonal[q])
    x = v_pq * resolvent
    second = x @ v_pq.T
    third = x @ (v_qq @ x.T)
    overlap = (x * resolvent) @ v_pq.T
    matrix = v_pp + second + third - 0.5 * (overlap @ v_pp + v_pp @ overlap)
    matrix = 0.5 * (matrix + matrix.T)
    logger.debug('Resonant block of %d states around %s', p.size, pattern)
    return ResonantBlock(pattern.n, p, indices_of[p], matrix, energy)
