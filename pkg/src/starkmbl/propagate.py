from __future__ import annotations

from typing import Any, Callable, Iterable, Iterator, Optional, Sequence, Tuple, Union
import logging
import math
from weakref import WeakKeyDictionary
import numpy as np
import scipy.linalg
from .datastructs import CouplingMatrix, FieldProfile, KrylovSettings, TrotterSettings, \
    StateVector, NumericalError, ResourceGuardError, DimensionMismatchError
from .enums import Axis
from .model import SparseOperator, build_ising, field_diagonal
from .spinspace import n_sites_of


__all__ = ['SPECTRAL_MAX_DIMENSION', 'krylov_evolve', 'SpectralPropagator', 'make_propagator',
           'evolve_series', 'diagonal_phase', 'TrotterCycle', 'trotter_cycle',
           'averaged_hamiltonian', 'trotter_instantaneous', 'trotter_cycle_defect',
           'rotation_matrix', 'rotate_site', 'rotate_sites', 'rotate_global']


logger = logging.getLogger(__name__)

# Long runs diagonalize once when the Hilbert space is at most this large
SPECTRAL_MAX_DIMENSION = 1 << 13

_NORM_DRIFT_GUARD = 1e-8

# Eigendecompositions per live operator; propagators never point back at the operator
_SPECTRAL_CACHE: WeakKeyDictionary = WeakKeyDictionary()

Propagator = Callable[[StateVector, float], StateVector]


def _check_state(H: SparseOperator, psi: StateVector) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (H.dimension,):
        raise DimensionMismatchError(H.dimension, psi.shape[0] if psi.ndim else 0)
    return psi


def _tridiagonal_exp(alpha: np.ndarray, beta: np.ndarray, dt: float) -> np.ndarray:
    """First column of ``exp(-i T dt)`` for the Lanczos tridiagonal ``T``."""
    if alpha.size == 1:
        return np.array([np.exp(-1j * alpha[0] * dt)])
    w, u = scipy.linalg.eigh_tridiagonal(alpha, beta)
    return u @ (np.exp(-1j * w * dt) * u[0])


def _lanczos_step(H: SparseOperator, psi: np.ndarray, dt: float,
                  settings: KrylovSettings) -> Tuple[np.ndarray, float, int]:
    """One Krylov substep. Returns the evolved vector, the error estimate and the number
    of Krylov vectors used."""
    norm0 = np.linalg.norm(psi)
    m = settings.subspace_dim
    basis = np.empty((m, psi.size), dtype=complex)
    basis[0] = psi / norm0
    alpha, beta = [], []
    coeffs = np.ones(1, dtype=complex)
    error = math.inf
    for k in range(m):
        w = H.apply(basis[k])
        a = float(np.vdot(basis[k], w).real)
        alpha.append(a)
        w -= a * basis[k]
        if k:
            w -= beta[k - 1] * basis[k - 1]
        # Full reorthogonalization against the whole Krylov basis
        w -= basis[:k + 1].T @ (basis[:k + 1].conj() @ w)
        b = float(np.linalg.norm(w))
        coeffs = _tridiagonal_exp(np.array(alpha), np.array(beta), dt)
        if b < 1e-13 * max(1.0, abs(a)):
            # Invariant subspace reached, the result is exact
            logger.debug('Krylov breakdown after %d vectors', k + 1)
            error = 0.0
            break
        error = b * abs(coeffs[-1])
        if error < settings.tolerance:
            logger.debug('Krylov early exit after %d vectors (error %.2e)', k + 1, error)
            break
        if k + 1 < m:
            beta.append(b)
            basis[k + 1] = w / b
    return norm0 * (coeffs @ basis[:coeffs.size]), error, coeffs.size


def krylov_evolve(H: SparseOperator, psi: StateVector, t: float,
                  settings: Optional[KrylovSettings] = None) -> StateVector:
    """**Evolve ``psi`` by ``exp(-i H t)`` with the Lanczos method.**

    :param H: a Hermitian operator
    :param psi: the initial state
    :param t: evolution time in units of 1/J0, non-negative
    :param settings: subspace size, tolerance and substep limits
    :raises NumericalError: if a substep cannot reach the tolerance above the minimum
        substep, or if the norm drifts by more than 1e-8
    """
    settings = settings or KrylovSettings()
    if t < 0:
        raise ValueError('Evolution time must be non-negative.')
    psi = _check_state(H, psi)
    norm0 = np.linalg.norm(psi)
    if t == 0 or norm0 == 0:
        return psi.copy()

    elapsed = 0.0
    dt = settings.max_substep
    while t - elapsed > 1e-14 * max(1.0, t):
        step = min(dt, t - elapsed)
        candidate, error, used = _lanczos_step(H, psi, step, settings)
        if error > settings.tolerance:
            dt = step / 2
            logger.debug('Krylov substep halved to %.3g (error %.2e)', dt, error)
            if dt < settings.min_substep:
                raise NumericalError(f'Krylov propagation did not converge at substep {step:.3g} '
                                     f'(error {error:.2e}, tolerance {settings.tolerance:.2e}).')
            continue
        psi = candidate
        elapsed += step
        if used <= settings.subspace_dim // 2 and dt < settings.max_substep:
            # Converged with half the subspace to spare
            dt = min(2 * dt, settings.max_substep)
            logger.debug('Krylov substep grown to %.3g', dt)

    drift = abs(np.linalg.norm(psi) - norm0)
    if drift > _NORM_DRIFT_GUARD * norm0:
        raise NumericalError(f'Norm drifted by {drift:.2e} during Krylov propagation.')
    return psi * (norm0 / np.linalg.norm(psi))


class SpectralPropagator:
    """**Diagonalize once, evolve to any time.**"""

    def __init__(self, H: SparseOperator, max_dimension: int = SPECTRAL_MAX_DIMENSION) -> None:
        if H.dimension > max_dimension:
            raise ResourceGuardError(H.dimension, max_dimension, 'spectral propagator dimension')
        self.dimension = H.dimension
        self.energies, self.vectors = scipy.linalg.eigh(H.to_dense())

    def __call__(self, psi: StateVector, t: float) -> StateVector:
        return self.evolve(psi, t)

    def evolve(self, psi: StateVector, t: float) -> StateVector:
        psi = np.asarray(psi, dtype=complex)
        if psi.shape != (self.dimension,):
            raise DimensionMismatchError(self.dimension, psi.shape[0] if psi.ndim else 0)
        amplitudes = self.vectors.conj().T @ psi
        return self.vectors @ (np.exp(-1j * self.energies * t) * amplitudes)

    def __repr__(self) -> str:
        return f'<{self.__class__.__qualname__} dimension={self.dimension}>'


def make_propagator(H: SparseOperator, settings: Optional[KrylovSettings] = None,
                    spectral_max_dimension: int = SPECTRAL_MAX_DIMENSION) -> Propagator:
    """Spectral propagator for small spaces (cached per live ``H``), Krylov otherwise."""
    if H.dimension <= spectral_max_dimension:
        try:
            return _SPECTRAL_CACHE[H]
        except KeyError:
            propagator = _SPECTRAL_CACHE[H] = SpectralPropagator(H, spectral_max_dimension)
            return propagator
    settings = settings or KrylovSettings()
    return lambda psi, t: krylov_evolve(H, psi, t, settings)


def evolve_series(H: SparseOperator, psi0: StateVector, times: Sequence[float],
                  settings: Optional[KrylovSettings] = None,
                  propagator: Optional[Propagator] = None) -> Iterator[Tuple[float, StateVector]]:
    """Yield ``(t, psi(t))`` along an ascending grid, stepping from one time to the next."""
    propagator = propagator or make_propagator(H, settings)
    psi = _check_state(H, psi0)
    previous = 0.0
    for t in times:
        if t < previous:
            raise ValueError('Time grids must be ascending and start at or after 0.')
        psi = propagator(psi, t - previous) if t > previous else psi
        previous = t
        yield t, psi


def diagonal_phase(psi: StateVector, diagonal: np.ndarray, dt: float) -> StateVector:
    """Exact evolution under a diagonal generator."""
    return np.exp(-1j * dt * diagonal) * psi


class TrotterCycle:
    """**The symmetrized cycle of the experiment.**

    Each cycle applies half of the local-field segment as an exact diagonal phase, the
    coupling segment (Ising plus the uniform bias ``bz0``) for ``dt1``, and the second half
    of the local-field segment. The bias also acts during the local-field segment.
    """

    def __init__(self, c: CouplingMatrix, f_local: FieldProfile, bz0: float,
                 settings: TrotterSettings, krylov: Optional[KrylovSettings] = None) -> None:
        if c.n != f_local.n:
            raise DimensionMismatchError(c.n, f_local.n, 'site count')
        self.settings = settings
        self.coupling_hamiltonian = build_ising(c, FieldProfile(bz0, np.zeros(c.n)))
        self._half_phase = np.exp(-0.5j * settings.dt2 * field_diagonal(f_local.bz + bz0))
        self._coupling_step = make_propagator(self.coupling_hamiltonian, krylov)

    def step(self, psi: StateVector) -> StateVector:
        psi = self._half_phase * psi
        psi = self._coupling_step(psi, self.settings.dt1)
        return self._half_phase * psi

    def __call__(self, psi: StateVector, cycles: Optional[int] = None) -> StateVector:
        cycles = self.settings.cycles if cycles is None else cycles
        for _ in range(cycles):
            psi = self.step(psi)
        return psi

    def __repr__(self) -> str:
        return f'<{self.__class__.__qualname__} {self.settings!r}>'


def trotter_cycle(c: CouplingMatrix, f_local: FieldProfile, bz0: float, settings: TrotterSettings,
                  krylov: Optional[KrylovSettings] = None) -> TrotterCycle:
    return TrotterCycle(c, f_local, bz0, settings, krylov)


def averaged_hamiltonian(c: CouplingMatrix, f_local: FieldProfile, bz0: float,
                         settings: TrotterSettings) -> SparseOperator:
    """Time-averaged generator of one cycle: weighted couplings and local field, full bias."""
    averaged_field = FieldProfile(bz0 + settings.field_weight * f_local.bz0,
                                  settings.field_weight * f_local.shape, f_local.kind)
    return build_ising(c.scaled(settings.coupling_weight), averaged_field)


def trotter_instantaneous(c_target: CouplingMatrix, f_target: FieldProfile,
                          settings: TrotterSettings) -> Tuple[CouplingMatrix, FieldProfile, float]:
    """**Segment values that average to a target Hamiltonian.**

    :return: the instantaneous couplings, the local field (its offset folded into the
        returned bias) and the bias ``bz0``
    """
    couplings = c_target.scaled(1.0 / settings.coupling_weight)
    f_local = FieldProfile(0.0, f_target.shape / settings.field_weight, f_target.kind)
    return couplings, f_local, f_target.bz0


def trotter_cycle_defect(c: CouplingMatrix, f_local: FieldProfile, bz0: float,
                         settings: TrotterSettings, psi: StateVector) -> float:
    """Distance after one cycle between the Trotter state and the averaged evolution."""
    psi = np.asarray(psi, dtype=complex)
    trotterized = TrotterCycle(c, f_local, bz0, settings.with_cycles(1))(psi)
    averaged = averaged_hamiltonian(c, f_local, bz0, settings)
    exact = scipy.linalg.expm(-1j * settings.cycle_time * averaged.to_dense()) @ psi
    return float(np.linalg.norm(trotterized - exact))


def rotation_matrix(axis: Union[str, Axis], angle: float) -> np.ndarray:
    """``exp(-i angle sigma_axis / 2)`` in the (down, up) single-site basis."""
    axis = Axis(str(axis))
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    if axis == Axis.X:
        return np.array([[c, -1j * s], [-1j * s, c]])
    if axis == Axis.Y:
        # sigma^y is [[0, i], [-i, 0]] with down listed first
        return np.array([[c, s], [-s, c]], dtype=complex)
    return np.diag([np.exp(0.5j * angle), np.exp(-0.5j * angle)])


def rotate_site(psi: StateVector, site: int, axis: Union[str, Axis], angle: float) -> StateVector:
    """**Rotate one (1-based) site.** Pulses everywhere use ``exp(-i angle sigma / 2)``."""
    psi = np.asarray(psi, dtype=complex)
    n = n_sites_of(psi)
    if not 1 <= site <= n:
        raise ValueError(f'Site {site} is outside the {n}-site chain.')
    view = psi.reshape(1 << (n - site), 2, 1 << (site - 1))
    return np.einsum('ij,ajb->aib', rotation_matrix(axis, angle), view).reshape(-1)


def rotate_sites(psi: StateVector, sites: Iterable[int], axis: Union[str, Axis],
                 angle: float) -> StateVector:
    for site in sites:
        psi = rotate_site(psi, site, axis, angle)
    return psi


def rotate_global(psi: StateVector, axis: Union[str, Axis], angle: float) -> StateVector:
    return rotate_sites(psi, range(1, n_sites_of(psi) + 1), axis, angle)
