from __future__ import annotations

from typing import Any, Hashable, Optional, Tuple, Union
from pathlib import Path
import logging
import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator
from scipy.stats import linregress
from .baseop import BaseOperator
from .datastructs import CouplingMatrix, FieldProfile, StateVector, CouplingFileError, \
    DimensionMismatchError
from .enums import ApplyPath
from .spinspace import sector_indices
from .utils import basis_indices, write_csv


__all__ = ['MATRIX_FREE_MIN_SITES', 'SparseOperator', 'power_law_couplings',
           'nearest_neighbor_couplings', 'load_couplings', 'save_couplings', 'fit_power_law',
           'linear_field', 'quadratic_field', 'experimental_bias', 'save_field_profile',
           'field_diagonal', 'build_ising', 'build_xy_sector', 'apply']


logger = logging.getLogger(__name__)

# Chains at least this long apply the Ising Hamiltonian without storing it
MATRIX_FREE_MIN_SITES = 12

_Offdiag = Tuple[np.ndarray, np.ndarray, np.ndarray]
_EMPTY: _Offdiag = np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0)


class SparseOperator(BaseOperator):
    """**A real Hermitian operator in the computational basis.**

    The operator is a diagonal plus a list of upper-triangle entries ``(row, col, value)``
    with ``row < col``; the lower triangle is implied. Ising operators additionally keep
    their couplings and fields, which lets ``apply`` run without a stored matrix.

    Instances are obtained through the builders (``build_ising``, ``build_xy_sector``)
    rather than constructed by hand, except for special operators such as effective
    Hamiltonians.

    Operators are immutable once built. The stored path assembles its CSR matrix in the
    constructor; the matrix-free path keeps nothing beyond couplings and diagonal, and
    ``offdiag``/``to_csr`` rebuild the entries on every call.
    """

    def __init__(self, diagonal: Any, offdiag: Optional[_Offdiag] = None, *,
                 couplings: Optional[CouplingMatrix] = None, field: Optional[FieldProfile] = None,
                 basis: Optional[np.ndarray] = None, path: Union[str, ApplyPath] = ApplyPath.STORED,
                 label: str = 'operator', key: Hashable = None) -> None:
        if self._is_registered(key):
            return

        path = ApplyPath(str(path))
        diagonal = np.asarray(diagonal, dtype=float)
        if path == ApplyPath.MATRIX_FREE and couplings is None:
            raise ValueError('Only Ising operators can be applied matrix-free.')
        if path == ApplyPath.AUTO:
            raise ValueError('Resolve the apply path before constructing the operator.')

        self.diagonal = diagonal
        self.dimension = diagonal.size
        self.couplings = couplings
        self.field = field
        self.basis = basis
        self.path = path
        self.label = label
        self.key = key
        self._offdiag = offdiag
        self._csr: Optional[sp.csr_matrix] = None
        if path == ApplyPath.STORED:
            if offdiag is None:
                self._offdiag = _ising_offdiag(couplings) if couplings is not None else _EMPTY
            self._csr = self._assemble()

        self._register(key, self)

    @property
    def n(self) -> Optional[int]:
        if self.couplings is not None:
            return self.couplings.n
        if self.basis is None:
            return self.dimension.bit_length() - 1
        return None

    @property
    def is_sector(self) -> bool:
        return self.basis is not None

    @property
    def offdiag(self) -> _Offdiag:
        """Upper-triangle entries as ``(rows, cols, values)`` arrays."""
        if self._offdiag is None:
            return _ising_offdiag(self.couplings)
        return self._offdiag

    def _assemble(self) -> sp.csr_matrix:
        rows, cols, vals = self.offdiag
        dim = self.dimension
        upper = sp.coo_matrix((vals, (rows, cols)), shape=(dim, dim))
        return (upper + upper.T + sp.diags(self.diagonal)).tocsr()

    def to_csr(self) -> sp.csr_matrix:
        return self._assemble() if self._csr is None else self._csr

    def to_dense(self) -> np.ndarray:
        return self.to_csr().toarray()

    def trace(self) -> float:
        return float(self.diagonal.sum())

    def apply(self, psi: StateVector) -> StateVector:
        """Image ``H psi`` (not normalized)."""
        psi = np.asarray(psi)
        if psi.shape != (self.dimension,):
            raise DimensionMismatchError(self.dimension, psi.shape[0] if psi.ndim else 0)
        if self.path == ApplyPath.MATRIX_FREE:
            return _ising_matvec(self.couplings, self.diagonal, psi)
        return self.to_csr() @ psi

    def expectation(self, psi: StateVector) -> float:
        return float(np.vdot(psi, self.apply(psi)).real)

    def as_linear_operator(self) -> LinearOperator:
        return LinearOperator((self.dimension, self.dimension), matvec=self.apply,
                              dtype=complex)

    def with_path(self, path: Union[str, ApplyPath]) -> SparseOperator:
        """The same Ising operator with another apply kernel."""
        if self.couplings is None:
            raise ValueError('Only Ising operators can switch apply path.')
        return build_ising(self.couplings, self.field, path=path)

    def __repr__(self) -> str:
        return f'<{self.__class__.__qualname__} label={self.label!r} ' \
               f'dimension={self.dimension} path={self.path}>'


def _ising_offdiag(c: CouplingMatrix) -> _Offdiag:
    idx = basis_indices(c.n)
    rows, cols, vals = [], [], []
    for a, b, jab in c.pairs():
        flipped = idx ^ ((1 << a) | (1 << b))
        keep = idx < flipped
        rows.append(idx[keep])
        cols.append(flipped[keep])
        vals.append(np.full(int(keep.sum()), jab))
    if not rows:
        return _EMPTY
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


def _ising_matvec(c: CouplingMatrix, diagonal: np.ndarray, psi: StateVector) -> StateVector:
    n = c.n
    out = diagonal * psi
    tensor = psi.reshape((2,) * n)
    # Site j sits on axis n - j; flipping two axes of length 2 flips both bits
    for a, b, jab in c.pairs():
        out += jab * np.flip(tensor, axis=(n - 1 - a, n - 1 - b)).reshape(-1)
    return out


def field_diagonal(bz: Any, basis: Optional[np.ndarray] = None) -> np.ndarray:
    """Diagonal of ``sum_j bz[j] sigma^z_j`` on the full basis or on ``basis``."""
    bz = np.asarray(bz, dtype=float)
    idx = basis_indices(bz.size) if basis is None else np.asarray(basis)
    diagonal = np.zeros(idx.size)
    for k, field in enumerate(bz):
        diagonal += field * (2.0 * ((idx >> k) & 1) - 1.0)
    return diagonal


def power_law_couplings(n: int, alpha: float, j0: float = 1.0) -> CouplingMatrix:
    """``J[a, b] = j0 / |a - b|^alpha`` in units of J0."""
    if alpha <= 0:
        raise ValueError('The power-law exponent must be positive.')
    if n < 1:
        raise ValueError('A chain needs at least one site.')
    sites = np.arange(n)
    dist = np.abs(sites[:, None] - sites[None, :]).astype(float)
    with np.errstate(divide='ignore'):
        j = np.where(dist > 0, j0 / dist ** alpha, 0.0)
    return CouplingMatrix(j)


def nearest_neighbor_couplings(n: int, j0: float = 1.0) -> CouplingMatrix:
    j = np.zeros((n, n))
    for a in range(n - 1):
        j[a, a + 1] = j[a + 1, a] = j0
    return CouplingMatrix(j)


def load_couplings(path: Any) -> CouplingMatrix:
    """**Read a coupling file.**

    The first non-comment line holds ``n``, followed by ``n`` rows of ``n`` reals.
    Everything after ``#`` on a line is ignored. Asymmetry beyond 1e-9 is rejected.
    """
    try:
        with open(path, encoding='utf-8') as file:
            lines = file.readlines()
    except OSError as e:
        raise CouplingFileError(path, f'cannot read file ({e.strerror or e}).') from e

    n: Optional[int] = None
    rows = []
    for number, raw in enumerate(lines, 1):
        text = raw.split('#', 1)[0].strip()
        if not text:
            continue
        tokens = text.split()
        if n is None:
            if len(tokens) != 1:
                raise CouplingFileError(path, 'expected the site count alone on the first line.', number)
            try:
                n = int(tokens[0])
            except ValueError:
                raise CouplingFileError(path, f'invalid site count {tokens[0]!r}.', number) from None
            if n < 1:
                raise CouplingFileError(path, 'the site count must be positive.', number)
            continue
        if len(rows) == n:
            raise CouplingFileError(path, f'more than {n} coupling rows.', number)
        if len(tokens) != n:
            raise CouplingFileError(path, f'expected {n} values, found {len(tokens)}.', number)
        try:
            rows.append([float(token) for token in tokens])
        except ValueError as e:
            raise CouplingFileError(path, f'invalid number ({e}).', number) from None

    if n is None:
        raise CouplingFileError(path, 'file is empty.')
    if len(rows) != n:
        raise CouplingFileError(path, f'expected {n} coupling rows, found {len(rows)}.')
    try:
        c = CouplingMatrix(rows, tol=1e-9)
    except ValueError as e:
        raise CouplingFileError(path, str(e)) from None
    logger.debug('Loaded %d-site couplings from %s', n, path)
    return c


def save_couplings(c: CouplingMatrix, path: Any, comment: str = '') -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f'# {line}' for line in comment.splitlines()]
    lines.append(str(c.n))
    lines.extend(' '.join('%.17g' % v for v in row) for row in c.j)
    with open(path, 'w', encoding='utf-8', newline='\n') as file:
        file.write('\n'.join(lines) + '\n')
    return path


def fit_power_law(c: CouplingMatrix) -> Tuple[float, float]:
    """Least-squares fit of ``log J`` against ``log |a - b|``; returns ``(j0, alpha)``."""
    dists, values = [], []
    for a, b, jab in c.pairs():
        if jab > 0:
            dists.append(b - a)
            values.append(jab)
    if len(set(dists)) < 2:
        raise ValueError('A power-law fit needs positive couplings at two or more distances.')
    fit = linregress(np.log(dists), np.log(values))
    return float(np.exp(fit.intercept)), float(-fit.slope)


def linear_field(n: int, bz0: float, g: float) -> FieldProfile:
    """``bz[j] = bz0 + (j - 1) g``."""
    return FieldProfile(bz0, np.arange(n) * float(g), 'linear')


def quadratic_field(n: int, bz0: float, gamma: float, center_offset: float = 0.0) -> FieldProfile:
    """``bz[j] = bz0 + gamma (j - (n + 1)/2 - center_offset)^2 / (n - 1)``."""
    if n < 2:
        raise ValueError('A quadratic field needs at least two sites.')
    sites = np.arange(1, n + 1)
    shape = gamma * (sites - (n + 1) / 2 - center_offset) ** 2 / (n - 1)
    return FieldProfile(bz0, shape, 'quadratic')


def experimental_bias(g: float) -> float:
    """Field offset that came with a tilt ``g`` in the experimental runs (units of J0)."""
    return 4.4 * (1.0 + 3.0 * g / 5.0)


def save_field_profile(f: FieldProfile, path: Any, metadata: Optional[dict] = None) -> Path:
    return write_csv(path, ['site', 'bz_over_j0'],
                     ((j, bz) for j, bz in enumerate(f.bz, 1)), metadata)


def _check_sizes(c: CouplingMatrix, f: FieldProfile) -> None:
    if c.n != f.n:
        raise DimensionMismatchError(c.n, f.n, 'site count')


def build_ising(c: CouplingMatrix, f: FieldProfile, *,
                path: Union[str, ApplyPath] = ApplyPath.AUTO) -> SparseOperator:
    """**Tilted long-range Ising Hamiltonian.**

    ``H = sum_{j<j'} J_jj' sx_j sx_j' + sum_j bz[j] sz_j``. Chains of
    ``MATRIX_FREE_MIN_SITES`` sites or more are applied matrix-free unless ``path`` says
    otherwise. Building the same Hamiltonian again returns the live instance.
    """
    _check_sizes(c, f)
    path = ApplyPath(str(path))
    if path == ApplyPath.AUTO:
        path = ApplyPath.MATRIX_FREE if c.n >= MATRIX_FREE_MIN_SITES else ApplyPath.STORED
    key = ('ising', c.j.tobytes(), f.bz.tobytes(), path)
    return SparseOperator(field_diagonal(f.bz), None, couplings=c, field=f, path=path,
                          label='ising', key=key)


def build_xy_sector(c: CouplingMatrix, f: FieldProfile, mz: int) -> SparseOperator:
    """**Tilted XY Hamiltonian on one magnetization sector.**

    ``H = sum_{j<j'} (J_jj'/2)(s+_j s-_j' + h.c.) + sum_j bz[j] sz_j`` on the ascending
    basis ``sector_indices(n, mz)``, kept on the returned operator as ``basis``.

    Flip-flops hop with J/2, half the amplitude they have in ``build_ising``. For a large
    uniform ``bz0`` the band of ``build_ising(c, f)`` near magnetization ``mz`` reproduces
    ``build_xy_sector(c.scaled(2), f, mz)`` up to O(J^2/bz0).
    """
    _check_sizes(c, f)
    basis = sector_indices(c.n, mz)
    rows, cols, vals = [], [], []
    for a, b, jab in c.pairs():
        differ = ((basis >> a) & 1) != ((basis >> b) & 1)
        src = np.flatnonzero(differ)
        dst = np.searchsorted(basis, basis[src] ^ ((1 << a) | (1 << b)))
        keep = src < dst
        rows.append(src[keep])
        cols.append(dst[keep])
        vals.append(np.full(int(keep.sum()), jab / 2))
    if rows:
        offdiag = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    else:
        offdiag = _EMPTY
    key = ('xy', int(mz), c.j.tobytes(), f.bz.tobytes())
    return SparseOperator(field_diagonal(f.bz, basis), offdiag, field=f, basis=basis,
                          label=f'xy[mz={mz}]', key=key)


def apply(H: SparseOperator, psi: StateVector) -> StateVector:
    return H.apply(psi)
