from __future__ import annotations

from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union
import logging
import math
import numpy as np
from .datastructs import CouplingMatrix, FieldProfile, SpinPattern, StateVector, TimeSeries, \
    ImbalanceRecord, KrylovSettings, TrotterSettings, ResourceGuardError, DimensionMismatchError
from .enums import Axis, EvolutionMode
from .model import build_ising
from .observables import site_magnetizations, generalized_imbalance, late_time_average, \
    qfi_staggered, bipartite_entropy, moving_average
from .propagate import make_propagator, evolve_series, TrotterCycle, trotter_instantaneous, \
    rotate_site, rotate_sites
from .spinspace import product_state


__all__ = ['QuenchConfig', 'QuenchResult', 'run_quench', 'quench_imbalance',
           'DeerConfig', 'DeerResult', 'run_deer', 'deer_difference', 'scan_deer_offsets',
           'scan_deer_fields', 'QuadraticConfig', 'QuadraticResult', 'run_quadratic',
           'StabilityConfig', 'StabilityResult', 'run_stability', 'late_time_spread']


logger = logging.getLogger(__name__)

MAX_STABILITY_SITES = 16

_Window = Tuple[float, float]


def _check_chain(c: CouplingMatrix, f: FieldProfile) -> None:
    if c.n != f.n:
        raise DimensionMismatchError(c.n, f.n, 'site count')


def _check_window(window: _Window, t_max: float) -> _Window:
    t_lo, t_hi = float(window[0]), float(window[1])
    if not 0 <= t_lo <= t_hi <= t_max:
        raise ValueError(f'Window [{t_lo:g}, {t_hi:g}] is not inside the grid [0, {t_max:g}].')
    return t_lo, t_hi


class QuenchConfig:
    """**A quench from a product state.**

    ``couplings`` and ``field`` describe the Hamiltonian the dynamics should realize. In
    Trotter mode they are the cycle-averaged target, and the segment values are derived
    from ``trotter``; the grid is then rounded to whole cycles.

    :param initial_state: optionally, a state to start from instead of the product of
        ``pattern`` (``pattern`` still defines the imbalance)
    """

    def __init__(self, couplings: CouplingMatrix, field: FieldProfile, pattern: SpinPattern, *,
                 t_max: float = 7.0, n_points: int = 40, window: _Window = (5.0, 7.0),
                 mode: Union[str, EvolutionMode] = EvolutionMode.CONTINUOUS,
                 trotter: Optional[TrotterSettings] = None, krylov: Optional[KrylovSettings] = None,
                 record_qfi: bool = False, record_entropy: bool = False,
                 initial_state: Optional[StateVector] = None) -> None:
        _check_chain(couplings, field)
        if pattern.n != couplings.n:
            raise DimensionMismatchError(couplings.n, pattern.n, 'pattern length')
        if t_max <= 0:
            raise ValueError('t_max must be positive.')
        if n_points < 2:
            raise ValueError('A time grid needs at least two points.')
        self.mode = EvolutionMode(str(mode))
        if self.mode == EvolutionMode.TROTTER and trotter is None:
            raise ValueError('Trotter mode needs TrotterSettings.')
        self.couplings = couplings
        self.field = field
        self.pattern = pattern
        self.t_max = float(t_max)
        self.n_points = int(n_points)
        self.window = _check_window(window, t_max)
        self.trotter = trotter
        self.krylov = krylov or KrylovSettings()
        self.record_qfi = record_qfi
        self.record_entropy = record_entropy
        self.initial_state = initial_state

    @property
    def n(self) -> int:
        return self.couplings.n

    def times(self) -> np.ndarray:
        grid = np.linspace(0.0, self.t_max, self.n_points)
        if self.mode == EvolutionMode.CONTINUOUS:
            return grid
        return np.unique(np.round(grid / self.trotter.cycle_time)) * self.trotter.cycle_time

    def with_start(self, field: FieldProfile, initial_state: Optional[StateVector]) -> QuenchConfig:
        """Copy with another field and starting state, as used for noise instances."""
        return QuenchConfig(self.couplings, field, self.pattern, t_max=self.t_max,
                            n_points=self.n_points, window=self.window, mode=self.mode,
                            trotter=self.trotter, krylov=self.krylov, record_qfi=self.record_qfi,
                            record_entropy=self.record_entropy, initial_state=initial_state)

    def __repr__(self) -> str:
        return f'<{self.__class__.__qualname__} n={self.n} pattern={self.pattern.bits!r} ' \
               f'mode={self.mode} t_max={self.t_max:g}>'


class QuenchResult:
    def __init__(self, magnetizations: TimeSeries, imbalance: ImbalanceRecord,
                 qfi: Optional[TimeSeries] = None, entropy: Optional[TimeSeries] = None) -> None:
        self.magnetizations = magnetizations
        self.imbalance = imbalance
        self.qfi = qfi
        self.entropy = entropy

    def __repr__(self) -> str:
        return f'<{self.__class__.__qualname__} late_time_mean={self.imbalance.late_time_mean:.4f}>'


def _trajectory(cfg: QuenchConfig, times: np.ndarray) -> Iterable[Tuple[float, StateVector]]:
    psi0 = cfg.initial_state if cfg.initial_state is not None else product_state(cfg.pattern)
    if cfg.mode == EvolutionMode.CONTINUOUS:
        H = build_ising(cfg.couplings, cfg.field)
        yield from evolve_series(H, psi0, times, propagator=make_propagator(H, cfg.krylov))
        return

    couplings, f_local, bz0 = trotter_instantaneous(cfg.couplings, cfg.field, cfg.trotter)
    cycle = TrotterCycle(couplings, f_local, bz0, cfg.trotter, cfg.krylov)
    psi, done = np.asarray(psi0, dtype=complex), 0
    for t in times:
        target = int(round(t / cfg.trotter.cycle_time))
        psi = cycle(psi, target - done)
        done = target
        yield t, psi


def run_quench(cfg: QuenchConfig) -> QuenchResult:
    """**Quench dynamics with per-site magnetizations and the generalized imbalance.**"""
    logger.info('Quench start: %r', cfg)
    times = cfg.times()
    mags, qfi, entropy = [], [], []
    for _, psi in _trajectory(cfg, times):
        mags.append(site_magnetizations(psi))
        if cfg.record_qfi:
            qfi.append(qfi_staggered(psi))
        if cfg.record_entropy:
            entropy.append(bipartite_entropy(psi, cfg.n // 2))

    magnetizations = TimeSeries(times, mags, 'sz')
    imbalance = TimeSeries(times, [generalized_imbalance(m, cfg.pattern) for m in mags], 'imbalance')
    record = ImbalanceRecord(imbalance, late_time_average(imbalance, *cfg.window), cfg.window)
    logger.info('Quench done: late-time imbalance %.4f over %s', record.late_time_mean, cfg.window)
    return QuenchResult(magnetizations, record,
                        TimeSeries(times, qfi, 'qfi') if cfg.record_qfi else None,
                        TimeSeries(times, entropy, 'entropy') if cfg.record_entropy else None)


def quench_imbalance(cfg: QuenchConfig, field: FieldProfile, initial_state: StateVector) -> TimeSeries:
    """Imbalance series of one noise instance."""
    return run_quench(cfg.with_start(field, initial_state)).imbalance.series


class DeerConfig:
    """**Spin echo on a probe spin, with and without pulses on a distant region.**

    The region covers ``region_size`` sites starting ``offset`` sites after the probe.
    Both arms start from the Néel state.
    """

    def __init__(self, couplings: CouplingMatrix, field: FieldProfile, *, offset: int = 1,
                 probe: int = 1, region_size: int = 3, axis: Union[str, Axis] = Axis.X,
                 t_max: float = 4.0, n_points: int = 21, window: _Window = (2.0, 4.0),
                 krylov: Optional[KrylovSettings] = None,
                 initial_state: Optional[StateVector] = None) -> None:
        _check_chain(couplings, field)
        n = couplings.n
        if offset < 1 or region_size < 1:
            raise ValueError('The region offset and size must be at least 1.')
        if not 1 <= probe <= n or probe + offset + region_size - 1 > n:
            raise ValueError(f'Probe {probe} with region offset {offset} and size {region_size} '
                             f'does not fit a {n}-site chain.')
        if t_max <= 0 or n_points < 2:
            raise ValueError('The echo grid needs t_max > 0 and at least two points.')
        self.couplings = couplings
        self.field = field
        self.offset = int(offset)
        self.probe = int(probe)
        self.region_size = int(region_size)
        self.axis = Axis(str(axis))
        self.t_max = float(t_max)
        self.n_points = int(n_points)
        self.window = _check_window(window, t_max)
        self.krylov = krylov or KrylovSettings()
        self.initial_state = initial_state

    @property
    def n(self) -> int:
        return self.couplings.n

    @property
    def region(self) -> List[int]:
        start = self.probe + self.offset
        return list(range(start, start + self.region_size))

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_max, self.n_points)

    def with_offset(self, offset: int) -> DeerConfig:
        return self._copy(offset=offset)

    def with_start(self, field: FieldProfile, initial_state: Optional[StateVector]) -> DeerConfig:
        return self._copy(field=field, initial_state=initial_state)

    def _copy(self, **changes: Any) -> DeerConfig:
        kwargs = dict(couplings=self.couplings, field=self.field, offset=self.offset,
                      probe=self.probe, region_size=self.region_size, axis=self.axis,
                      t_max=self.t_max, n_points=self.n_points, window=self.window,
                      krylov=self.krylov, initial_state=self.initial_state)
        kwargs.update(changes)
        couplings = kwargs.pop('couplings')
        field = kwargs.pop('field')
        return DeerConfig(couplings, field, **kwargs)

    def __repr__(self) -> str:
        return f'<{self.__class__.__qualname__} n={self.n} probe={self.probe} region={self.region}>'


class DeerResult:
    def __init__(self, echo: TimeSeries, deer: TimeSeries, difference: TimeSeries,
                 windowed_difference: float, offset: int) -> None:
        self.echo = echo
        self.deer = deer
        self.difference = difference
        self.windowed_difference = float(windowed_difference)
        self.offset = offset

    def __repr__(self) -> str:
        return f'<{self.__class__.__qualname__} offset={self.offset} ' \
               f'windowed_difference={self.windowed_difference:.4g}>'


def _deer_arm(cfg: DeerConfig, perturb: bool) -> np.ndarray:
    # Both arms build the Hamiltonian on their own and get the same live operator back
    H = build_ising(cfg.couplings, cfg.field)
    evolve = make_propagator(H, cfg.krylov)
    psi0 = cfg.initial_state if cfg.initial_state is not None else product_state(SpinPattern.neel(cfg.n))
    signal = []
    for t in cfg.times():
        psi = evolve(psi0, t / 2)
        psi = rotate_site(psi, cfg.probe, cfg.axis, math.pi)
        if perturb:
            psi = rotate_sites(psi, cfg.region, cfg.axis, math.pi / 2)
        psi = evolve(psi, t / 2)
        # The echo pulse inverts the probe, read it back in the toggled frame
        signal.append(-site_magnetizations(psi)[cfg.probe - 1])
    return np.array(signal)


def deer_difference(cfg: DeerConfig, field: FieldProfile, initial_state: StateVector) -> TimeSeries:
    """Difference series of one noise instance."""
    return run_deer(cfg.with_start(field, initial_state)).difference


def run_deer(cfg: DeerConfig) -> DeerResult:
    """**DEER and spin-echo signals of the probe, their difference and its window mean.**"""
    logger.info('DEER start: %r', cfg)
    times = cfg.times()
    # Held for the duration of both arms so they resolve to this instance
    H = build_ising(cfg.couplings, cfg.field)
    echo = TimeSeries(times, _deer_arm(cfg, False), 'echo')
    deer = TimeSeries(times, _deer_arm(cfg, True), 'deer')
    del H
    difference = TimeSeries(times, deer.values - echo.values, 'difference')
    windowed = late_time_average(difference, *cfg.window)
    logger.info('DEER done: windowed difference %.5f at offset %d', windowed, cfg.offset)
    return DeerResult(echo, deer, difference, windowed, cfg.offset)


def scan_deer_offsets(cfg: DeerConfig, offsets: Iterable[int]) -> List[DeerResult]:
    return [run_deer(cfg.with_offset(offset)) for offset in offsets]


def scan_deer_fields(cfg: DeerConfig, fields: Iterable[FieldProfile]) -> List[DeerResult]:
    return [run_deer(cfg.with_start(field, cfg.initial_state)) for field in fields]


class QuadraticConfig:
    """**Relaxation in a curved field.**

    Sites are classified from the last ``tail_points`` samples of their sign-corrected
    magnetization ``m_j(t) s_j(0)``.
    """

    def __init__(self, couplings: CouplingMatrix, field: FieldProfile, pattern: SpinPattern, *,
                 t_max: float = 7.0, n_points: int = 40, tail_points: int = 5,
                 krylov: Optional[KrylovSettings] = None) -> None:
        if tail_points < 2 or tail_points > n_points:
            raise ValueError('tail_points must be between 2 and n_points.')
        self.quench = QuenchConfig(couplings, field, pattern, t_max=t_max, n_points=n_points,
                                   window=(0.0, t_max), krylov=krylov)
        self.tail_points = int(tail_points)

    @property
    def field(self) -> FieldProfile:
        return self.quench.field

    def __repr__(self) -> str:
        return f'<{self.__class__.__qualname__} n={self.quench.n} tail_points={self.tail_points}>'


class QuadraticResult:
    """Per-site late-time memory and the innermost localized pair around the field minimum."""

    def __init__(self, magnetizations: TimeSeries, memory_mean: np.ndarray, memory_std: np.ndarray,
                 localized: np.ndarray, center: int, boundary: Tuple[Optional[int], Optional[int]],
                 slopes: np.ndarray) -> None:
        self.magnetizations = magnetizations
        self.memory_mean = memory_mean
        self.memory_std = memory_std
        self.localized = localized
        self.center = center
        self.boundary = boundary
        self.slopes = slopes

    @property
    def boundary_slopes(self) -> List[float]:
        return [float(abs(self.slopes[site - 1])) for site in self.boundary if site is not None]

    @property
    def has_localized_edges(self) -> bool:
        return bool(self.localized.any())

    def __repr__(self) -> str:
        return f'<{self.__class__.__qualname__} center={self.center} boundary={self.boundary}>'


def run_quadratic(cfg: QuadraticConfig) -> QuadraticResult:
    """**Quench in a quadratic field and split the chain into localized and thermal sites.**

    A site counts as localized when its late-time memory differs from the center spin's
    (the site of lowest field) by more than the sum of their standard deviations.
    """
    logger.info('Quadratic-field run start: %r', cfg)
    result = run_quench(cfg.quench)
    tail = result.magnetizations.values[-cfg.tail_points:] * cfg.quench.pattern.spins
    mean, std = tail.mean(axis=0), tail.std(axis=0)
    bz = cfg.field.bz
    center = int(np.argmin(bz)) + 1
    c = center - 1
    localized = np.abs(mean - mean[c]) > std + std[c]
    localized[c] = False
    left = [j for j in range(1, center) if localized[j - 1]]
    right = [j for j in range(center + 1, cfg.quench.n + 1) if localized[j - 1]]
    boundary = (left[-1] if left else None, right[0] if right else None)
    slopes = cfg.field.local_slopes()
    logger.info('Quadratic-field run done: center %d, boundary %s', center, boundary)
    return QuadraticResult(result.magnetizations, mean, std, localized, center, boundary, slopes)


class StabilityConfig:
    """Long runs for several initial patterns, smoothed with a moving average."""

    def __init__(self, couplings: CouplingMatrix, field: FieldProfile,
                 patterns: Sequence[SpinPattern], *, t_max: float = 100.0, n_points: int = 400,
                 smoothing: float = 5.0, krylov: Optional[KrylovSettings] = None) -> None:
        if couplings.n > MAX_STABILITY_SITES:
            raise ResourceGuardError(couplings.n, MAX_STABILITY_SITES, 'chain length for long runs')
        if not patterns:
            raise ValueError('At least one initial pattern is needed.')
        if smoothing <= 0:
            raise ValueError('The smoothing window must be positive.')
        self.quenches = [QuenchConfig(couplings, field, pattern, t_max=t_max, n_points=n_points,
                                      window=(max(0.0, t_max - smoothing), t_max), krylov=krylov)
                         for pattern in patterns]
        self.smoothing = float(smoothing)

    def __repr__(self) -> str:
        patterns = [cfg.pattern.bits for cfg in self.quenches]
        return f'<{self.__class__.__qualname__} patterns={patterns} smoothing={self.smoothing:g}>'


class StabilityResult:
    def __init__(self, patterns: List[SpinPattern], records: List[ImbalanceRecord],
                 smoothed: List[TimeSeries]) -> None:
        self.patterns = patterns
        self.records = records
        self.smoothed = smoothed

    def final_smoothed(self) -> Dict[str, float]:
        return {p.bits: float(s.values[-1]) for p, s in zip(self.patterns, self.smoothed)}

    def __repr__(self) -> str:
        return f'<{self.__class__.__qualname__} final={self.final_smoothed()}>'


def run_stability(cfg: StabilityConfig) -> StabilityResult:
    """**Late-time imbalance of each pattern over a long window.**

    Every record averages over the last ``smoothing`` time units; the moving average of
    the same width is returned for plotting.
    """
    logger.info('Stability run start: %r', cfg)
    records, smoothed = [], []
    for quench in cfg.quenches:
        record = run_quench(quench).imbalance
        records.append(record)
        smoothed.append(moving_average(record.series, cfg.smoothing))
    result = StabilityResult([q.pattern for q in cfg.quenches], records, smoothed)
    logger.info('Stability run done: %s', result.final_smoothed())
    return result


def late_time_spread(records: Iterable[Union[ImbalanceRecord, QuenchResult]]) -> float:
    """Largest minus smallest late-time imbalance over several runs."""
    means = [r.imbalance.late_time_mean if isinstance(r, QuenchResult) else r.late_time_mean
             for r in records]
    if not means:
        raise ValueError('No runs to compare.')
    return float(max(means) - min(means))
