from __future__ import annotations

from typing import Any, Dict, List, Optional, Tuple, Union
from pathlib import Path
import logging
import numpy as np
import scipy.linalg
from scipy.integrate import quad
from .datastructs import LevelStatsReport, NumericalError, ResourceGuardError, MAX_SPECTRUM_SITES
from .enums import ReferenceKind, Resolution
from .model import SparseOperator
from .spinspace import parity_indices
from .utils import write_csv, write_json


__all__ = ['MAX_SPECTRUM_DIMENSION', 'dense_eigenvalues', 'block_eigenvalues', 'gap_ratios',
           'poisson_pdf', 'wigner_dyson_pdf', 'mean_r_reference', 'r_histogram',
           'level_statistics', 'save_level_report']


logger = logging.getLogger(__name__)

MAX_SPECTRUM_DIMENSION = 1 << MAX_SPECTRUM_SITES


def _guard(dimension: int, max_dimension: int) -> None:
    if dimension > max_dimension:
        raise ResourceGuardError(dimension, max_dimension, 'dense spectrum dimension')


def _eigvalsh(matrix: np.ndarray, trace: float) -> np.ndarray:
    eigs = scipy.linalg.eigvalsh(matrix)
    if abs(eigs.sum() - trace) > 1e-6 * max(1, eigs.size):
        raise NumericalError(f'Eigenvalues sum to {eigs.sum():.12g}, the trace is {trace:.12g}.')
    return eigs


def dense_eigenvalues(H: SparseOperator, max_dimension: int = MAX_SPECTRUM_DIMENSION) -> np.ndarray:
    """**Full spectrum of ``H``, ascending.**

    :param H: the operator, applied through its stored form
    :param max_dimension: resource guard on the dense matrix
    :raises ResourceGuardError: when the dimension is larger than ``max_dimension``
    """
    _guard(H.dimension, max_dimension)
    return _eigvalsh(H.to_dense(), H.trace())


def block_eigenvalues(H: SparseOperator, resolve: Union[str, Resolution] = Resolution.FULL,
                      max_dimension: int = MAX_SPECTRUM_DIMENSION) -> List[np.ndarray]:
    """Spectra of the independent blocks of ``H`` selected by ``resolve``.

    ``parity`` splits a full-space Ising operator into the even and odd up-spin-count
    blocks (double flips never connect them). ``sector`` expects an operator that already
    lives on a magnetization sector.
    """
    resolve = Resolution(str(resolve))
    _guard(H.dimension, max_dimension)
    if resolve == Resolution.SECTOR:
        if not H.is_sector:
            raise ValueError('Sector resolution needs an operator built on a magnetization sector.')
        return [dense_eigenvalues(H, max_dimension)]
    if resolve == Resolution.FULL:
        return [dense_eigenvalues(H, max_dimension)]
    if H.is_sector or H.n is None:
        raise ValueError('Parity resolution needs a full-space operator.')

    csr = H.to_csr()
    blocks = []
    for odd in (False, True):
        idx = parity_indices(H.n, odd)
        if np.any(csr[idx][:, parity_indices(H.n, not odd)].data):
            raise ValueError('The operator couples the two parity blocks.')
        blocks.append(_eigvalsh(csr[idx][:, idx].toarray(), float(H.diagonal[idx].sum())))
    return blocks


def _gap_ratios(eigs: Any, degeneracy_tol: Optional[float]) -> Tuple[np.ndarray, int]:
    eigs = np.sort(np.asarray(eigs, dtype=float))
    if eigs.size < 3:
        raise ValueError('Gap ratios need at least three levels.')
    if degeneracy_tol is None:
        degeneracy_tol = 1e-12 * (eigs[-1] - eigs[0])
    gaps = np.diff(eigs)
    lo = np.minimum(gaps[1:], gaps[:-1])
    hi = np.maximum(gaps[1:], gaps[:-1])
    keep = hi >= degeneracy_tol
    keep &= hi > 0
    return lo[keep] / hi[keep], int(keep.size - keep.sum())


def gap_ratios(eigs: Any, degeneracy_tol: Optional[float] = None) -> np.ndarray:
    """**Adjacent gap ratios** ``min(s_n, s_n-1) / max(s_n, s_n-1)``.

    Pairs whose larger gap is below ``degeneracy_tol`` (default 1e-12 times the spectral
    width) are dropped and logged.
    """
    r, excluded = _gap_ratios(eigs, degeneracy_tol)
    if excluded:
        logger.warning('Excluded %d degenerate gap pair(s) out of %d', excluded, r.size + excluded)
    return r


def _check_r(r: Any) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if np.any((r < 0) | (r > 1)):
        raise ValueError('Gap ratios live in [0, 1].')
    return r


def poisson_pdf(r: Any) -> Any:
    r = _check_r(r)
    return 2.0 / (1.0 + r) ** 2


def wigner_dyson_pdf(r: Any) -> Any:
    r = _check_r(r)
    return 27.0 * (r + r ** 2) / (4.0 * (1.0 + r + r ** 2) ** 2.5)


def mean_r_reference(kind: Union[str, ReferenceKind]) -> float:
    """Mean gap ratio of the Poisson or Wigner-Dyson surmise distribution, by quadrature."""
    kind = ReferenceKind(str(kind))
    pdf = poisson_pdf if kind == ReferenceKind.POISSON else wigner_dyson_pdf
    value, _ = quad(lambda r: r * float(pdf(r)), 0.0, 1.0, epsabs=1e-12)
    return value


def r_histogram(rs: Any, n_bins: int = 20) -> Tuple[np.ndarray, np.ndarray]:
    """Density-normalized histogram of gap ratios on [0, 1]; returns ``(edges, densities)``."""
    rs = np.asarray(rs, dtype=float)
    if rs.size == 0:
        raise ValueError('Cannot histogram an empty set of gap ratios.')
    if n_bins < 2:
        raise ValueError('A histogram needs at least two bins.')
    densities, edges = np.histogram(rs, bins=n_bins, range=(0.0, 1.0), density=True)
    return edges, densities


def _inner(eigs: np.ndarray, fraction: float) -> np.ndarray:
    if fraction >= 1.0:
        return eigs
    drop = int(round(eigs.size * (1.0 - fraction) / 2))
    return eigs[drop:eigs.size - drop]


def level_statistics(H: SparseOperator, resolve: Union[str, Resolution] = Resolution.FULL, *,
                     n_bins: int = 20, inner_fraction: float = 1.0,
                     degeneracy_tol: Optional[float] = None,
                     max_dimension: int = MAX_SPECTRUM_DIMENSION,
                     params: Optional[Dict[str, Any]] = None) -> LevelStatsReport:
    """**Gap-ratio statistics of ``H``.**

    Ratios are taken inside each block picked by ``resolve`` and pooled. With
    ``inner_fraction < 1`` only the central part of each block's spectrum is used.
    """
    if not 0 < inner_fraction <= 1:
        raise ValueError('inner_fraction must lie in (0, 1].')
    blocks = block_eigenvalues(H, resolve, max_dimension)
    ratios, excluded = [], 0
    for eigs in blocks:
        eigs = _inner(eigs, inner_fraction)
        if eigs.size < 3:
            continue
        r, dropped = _gap_ratios(eigs, degeneracy_tol)
        ratios.append(r)
        excluded += dropped
    if not ratios:
        raise ValueError('No block has the three levels gap ratios need.')
    rs = np.concatenate(ratios)
    if excluded:
        logger.warning('Excluded %d degenerate gap pair(s) out of %d', excluded, rs.size + excluded)
    params = dict(params or {})
    params.setdefault('resolve', str(Resolution(str(resolve))))
    params.setdefault('inner_fraction', inner_fraction)
    report = LevelStatsReport(np.sort(np.concatenate(blocks)), rs, r_histogram(rs, n_bins),
                              excluded, params)
    logger.info('Level statistics: <r> = %.4f from %d ratios', report.mean_r, rs.size)
    return report


def save_level_report(report: LevelStatsReport, out_dir: Any,
                      metadata: Optional[Dict[str, Any]] = None, prefix: str = 'levels') -> List[Path]:
    """Write ``<prefix>.json`` and ``<prefix>_histogram.csv`` into ``out_dir``."""
    out_dir = Path(out_dir)
    edges, densities = report.histogram
    summary = report.summary()
    summary.update(metadata or {})
    return [
        write_json(out_dir / f'{prefix}.json', summary),
        write_csv(out_dir / f'{prefix}_histogram.csv', ['bin_lo', 'bin_hi', 'density'],
                  zip(edges[:-1], edges[1:], densities), metadata),
    ]
