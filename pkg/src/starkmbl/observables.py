from __future__ import annotations

from typing import Any, Union
import logging
import numpy as np
import scipy.linalg
from scipy.stats import linregress
from .datastructs import SpinPattern, StateVector, TimeSeries, DecayFit, DimensionMismatchError, \
    UndefinedImbalanceError, NumericalError
from .spinspace import n_sites_of
from .utils import site_signs


__all__ = ['site_magnetizations', 'generalized_imbalance', 'late_time_average', 'zz_correlator',
           'staggered_witness', 'qfi_staggered', 'bipartite_entropy', 'entropy_profile',
           'moving_average', 'fit_exponential_decay']


logger = logging.getLogger(__name__)

_ENTROPY_CUTOFF = 1e-14


def _probabilities(psi: StateVector) -> np.ndarray:
    return np.abs(np.asarray(psi)) ** 2


def site_magnetizations(psi: StateVector) -> np.ndarray:
    """``<sigma^z_j>`` for j = 1..n."""
    p = _probabilities(psi)
    n = n_sites_of(p)
    mags = np.empty(n)
    for j in range(1, n + 1):
        down, up = p.reshape(1 << (n - j), 2, 1 << (j - 1)).sum(axis=(0, 2))
        mags[j - 1] = up - down
    return mags


def generalized_imbalance(mags_t: Any, reference: Union[SpinPattern, str, Any]) -> float:
    """**Memory of the initial state.**

    With a product pattern as ``reference`` this is the mean magnetization of the spins
    that started up minus that of the spins that started down. With an array of initial
    magnetizations each site is weighted by ``1 + m_j(0)`` and ``1 - m_j(0)``.

    :raises UndefinedImbalanceError: for a fully polarized reference
    """
    mags_t = np.asarray(mags_t, dtype=float)
    if isinstance(reference, str):
        reference = SpinPattern(reference)
    m0 = reference.spins if isinstance(reference, SpinPattern) else np.asarray(reference, dtype=float)
    if m0.shape != mags_t.shape[-1:]:
        raise DimensionMismatchError(m0.size, mags_t.shape[-1], 'site count')
    up_weight, down_weight = 1.0 + m0, 1.0 - m0
    if up_weight.sum() <= 1e-12 or down_weight.sum() <= 1e-12:
        raise UndefinedImbalanceError('The imbalance of a fully polarized initial state is undefined.')
    return float(mags_t @ up_weight / up_weight.sum() - mags_t @ down_weight / down_weight.sum())


def late_time_average(ts: TimeSeries, t_lo: float, t_hi: float) -> Any:
    """Sample mean of ``ts`` over ``t_lo <= t <= t_hi``."""
    mask = ts.mask(t_lo, t_hi)
    if not mask.any():
        raise ValueError(f'No samples of {ts.label!r} inside the window [{t_lo:g}, {t_hi:g}].')
    mean = ts.values[mask].mean(axis=0)
    return float(mean) if np.ndim(mean) == 0 else mean


def zz_correlator(psi: StateVector, j: int, jp: int) -> float:
    p = _probabilities(psi)
    n = n_sites_of(p)
    if not (1 <= j <= n and 1 <= jp <= n):
        raise ValueError(f'Sites {(j, jp)} are outside the {n}-site chain.')
    if j == jp:
        return 1.0
    return float(p @ (site_signs(n, j) * site_signs(n, jp)))


def staggered_witness(n: int) -> np.ndarray:
    """Diagonal of ``sum_j (-1)^j sigma^z_j`` with ``(-1)^1 = -1``."""
    witness = np.zeros(1 << n)
    for j in range(1, n + 1):
        witness += (-1) ** j * site_signs(n, j)
    return witness


def qfi_staggered(psi: StateVector) -> float:
    """Variance of the staggered magnetization per site, for a pure state."""
    p = _probabilities(psi)
    n = n_sites_of(p)
    witness = staggered_witness(n)
    mean = p @ witness
    return float(max(p @ witness ** 2 - mean ** 2, 0.0) / n)


def bipartite_entropy(psi: StateVector, cut: int) -> float:
    """Von Neumann entropy in bits of sites ``1..cut``."""
    psi = np.asarray(psi)
    n = n_sites_of(psi)
    if not 1 <= cut < n:
        raise ValueError(f'Cut {cut} must lie between 1 and {n - 1}.')
    # Rows run over sites cut+1..n, columns over sites 1..cut
    schmidt = scipy.linalg.svdvals(psi.reshape(1 << (n - cut), 1 << cut))
    p = schmidt ** 2
    p = p[p > _ENTROPY_CUTOFF]
    return float(-(p * np.log2(p)).sum())


def entropy_profile(psi: StateVector) -> np.ndarray:
    n = n_sites_of(psi)
    return np.array([bipartite_entropy(psi, cut) for cut in range(1, n)])


def moving_average(ts: TimeSeries, window: float) -> TimeSeries:
    """Centered mean over ``[t - window/2, t + window/2]``, truncated at the ends."""
    if window <= 0:
        raise ValueError('The averaging window must be positive.')
    inside = np.abs(ts.times[:, None] - ts.times[None, :]) <= window / 2 + 1e-12
    weights = inside / inside.sum(axis=1, keepdims=True)
    return TimeSeries(ts.times, weights @ ts.values, ts.label)


def fit_exponential_decay(ts: TimeSeries, t_start: float = 0.0) -> DecayFit:
    """**Fit ``A exp(-t / tau)`` by linear regression of the logarithm.**

    Only samples with ``t >= t_start`` enter. A series that does not decay gives
    ``tau = inf``.

    :raises NumericalError: for non-positive samples
    """
    mask = ts.times >= t_start
    times, values = ts.times[mask], np.asarray(ts.values[mask], dtype=float)
    if values.ndim != 1:
        raise ValueError('Exponential fits need a scalar series.')
    if times.size < 4:
        raise ValueError(f'Need at least 4 points after t = {t_start:g}, got {times.size}.')
    if np.any(values <= 0):
        raise NumericalError('Exponential fits need strictly positive samples.')
    fit = linregress(times, np.log(values))
    if fit.slope >= 0:
        return DecayFit(float(np.exp(fit.intercept)), np.inf, np.inf)
    tau = -1.0 / fit.slope
    return DecayFit(float(np.exp(fit.intercept)), tau, fit.stderr / fit.slope ** 2)
