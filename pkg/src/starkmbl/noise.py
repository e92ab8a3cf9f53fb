from __future__ import annotations

from typing import Callable, List, Optional, Tuple
from multiprocessing import Pool
import functools
import logging
import math
import numpy as np
from .datastructs import FieldProfile, NoiseModel, SpinPattern, StateVector, TimeSeries
from .enums import Axis
from .observables import late_time_average
from .propagate import rotate_global
from .spinspace import product_state
from .utils import pairwise_mean, pairwise_std


__all__ = ['instance_rng', 'sample_instance', 'NoiseResult', 'noise_average']


logger = logging.getLogger(__name__)

# (field, initial state) -> observable series; must be picklable to run on workers
InstanceRun = Callable[[FieldProfile, StateVector], TimeSeries]


def instance_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for instance ``index``, whatever order instances run in."""
    return np.random.default_rng(np.random.SeedSequence([seed, index]))


def sample_instance(model: NoiseModel, field: FieldProfile, pattern: SpinPattern,
                    rng: np.random.Generator) -> Tuple[FieldProfile, StateVector]:
    """**Draw one noisy realization of a run.**

    The field offset gets an additive Gaussian shift, the site-dependent part of the field
    is scaled by one global factor and then by one factor per site, and the initial
    product state is rotated about y on every site.
    """
    bz0 = field.bz0 + rng.normal(0.0, model.sigma_bz0)
    slope_factor = 1.0 + rng.normal(0.0, model.sigma_g_frac)
    local_factors = 1.0 + rng.normal(0.0, model.sigma_local_frac, size=field.n)
    noisy = FieldProfile(bz0, field.shape * slope_factor * local_factors, field.kind)
    psi = product_state(pattern)
    if model.init_rotation_angle:
        psi = rotate_global(psi, Axis.Y, model.init_rotation_angle)
    return noisy, psi


class NoiseResult:
    """Pointwise mean and standard error over noise instances."""

    def __init__(self, mean: TimeSeries, stderr: TimeSeries, late_time_mean: Optional[float] = None,
                 late_time_stderr: Optional[float] = None,
                 instances: Optional[List[TimeSeries]] = None) -> None:
        self.mean = mean
        self.stderr = stderr
        self.late_time_mean = late_time_mean
        self.late_time_stderr = late_time_stderr
        self.instances = instances

    def __repr__(self) -> str:
        return f'<{self.__class__.__qualname__} label={self.mean.label!r} ' \
               f'late_time_mean={self.late_time_mean}>'


def _run_instance(run: InstanceRun, model: NoiseModel, field: FieldProfile, pattern: SpinPattern,
                  index: int) -> TimeSeries:
    noisy_field, psi = sample_instance(model, field, pattern, instance_rng(model.seed, index))
    return run(noisy_field, psi)


def noise_average(run: InstanceRun, field: FieldProfile, pattern: SpinPattern, model: NoiseModel, *,
                  workers: int = 1, window: Optional[Tuple[float, float]] = None,
                  keep_instances: bool = False) -> NoiseResult:
    """**Average an observable over ``model.n_samples`` noise instances.**

    :param run: computes the observable for one sampled field and initial state
    :param field: the noiseless field
    :param pattern: the nominal initial pattern
    :param model: the noise model, including the root seed
    :param workers: processes to spread the instances over
    :param window: optionally, a window whose per-instance averages give a late-time mean
        and its standard error
    :param keep_instances: keep every instance's series on the result
    """
    job = functools.partial(_run_instance, run, model, field, pattern)
    indices = range(model.n_samples)
    logger.info('Noise average over %d instance(s) on %d worker(s)', model.n_samples, workers)
    if workers > 1 and model.n_samples > 1:
        with Pool(min(workers, model.n_samples)) as pool:
            # map keeps the instance order
            series = pool.map(job, indices)
    else:
        series = [job(index) for index in indices]

    times = series[0].times
    stack = np.stack([s.values for s in series])
    k = len(series)
    label = series[0].label
    mean = TimeSeries(times, pairwise_mean(stack), label)
    stderr = TimeSeries(times, pairwise_std(stack) / math.sqrt(k), f'{label}_stderr')

    late_mean = late_err = None
    if window is not None:
        late = np.array([late_time_average(s, *window) for s in series])
        late_mean = float(pairwise_mean(late))
        late_err = float(pairwise_std(late)) / math.sqrt(k)
    return NoiseResult(mean, stderr, late_mean, late_err, series if keep_instances else None)
