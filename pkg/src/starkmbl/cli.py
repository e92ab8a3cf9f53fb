from __future__ import annotations

from typing import Any, Callable, Dict, List, Optional, Sequence
from multiprocessing import Pool
from pathlib import Path
import argparse
import functools
import logging
import sys
from . import __version__
from .config import COMMANDS, RunConfig, load_config, sweep_points, couplings_from, field_from, \
    quench_from, deer_from, quadratic_from, stability_from, noise_from
from .datastructs import SpinPattern, TimeSeries, ConfigError, CouplingFileError, ResourceGuardError, \
    NumericalError, UndefinedImbalanceError, InvalidPatternError, DimensionMismatchError, \
    EmptySectorError
from .enums import Resolution
from .model import build_ising, build_xy_sector
from .noise import NoiseResult, noise_average
from .protocols import run_quench, quench_imbalance, run_deer, deer_difference, run_quadratic, \
    run_stability
from .spectrum import level_statistics, save_level_report
from .sweff import heff3_terms
from .utils import write_csv, write_json


__all__ = ['EXIT_OK', 'EXIT_CONFIG', 'EXIT_RESOURCE', 'EXIT_NUMERICAL', 'build_parser', 'main',
           'cmd_levels', 'cmd_quench', 'cmd_deer', 'cmd_quad', 'cmd_stability', 'cmd_sweff',
           'cmd_sweep']


logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RESOURCE = 3
EXIT_NUMERICAL = 4

_LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'

Summary = Dict[str, Any]


def _provenance(cfg: RunConfig, command: str) -> Dict[str, Any]:
    return {'command': command, 'config': cfg.to_dict(), 'seed': cfg['seed'], 'version': __version__}


def _write_series(path: Path, series: Sequence[TimeSeries], meta: Dict[str, Any]) -> Path:
    """Scalar series sharing one time grid, side by side."""
    header = ['t_j0'] + [s.label for s in series]
    rows = ([t] + [float(s.values[k]) for s in series] for k, t in enumerate(series[0].times))
    return write_csv(path, header, rows, meta)


def _write_noise(out: Path, prefix: str, result: NoiseResult, meta: Dict[str, Any]) -> None:
    _write_series(out / f'{prefix}.csv', [result.mean, result.stderr], meta)
    if result.instances:
        archive = [TimeSeries(s.times, s.values, f'instance_{k}') for k, s in enumerate(result.instances)]
        _write_series(out / f'{prefix}_instances.csv', archive, meta)


def cmd_levels(cfg: RunConfig, out: Path) -> Summary:
    """Level statistics of the configured Hamiltonian."""
    section = cfg['levels']
    c, f = couplings_from(cfg), field_from(cfg)
    resolve = Resolution(section['resolve'])
    if resolve == Resolution.SECTOR:
        mz = section['mz'] if section['mz'] is not None else -(c.n % 2)
        H = build_xy_sector(c, f, mz)
    else:
        H = build_ising(c, f)
    params = {'n': c.n, 'field': cfg['field'], 'couplings': cfg['couplings'], 'mz': section['mz']}
    report = level_statistics(H, resolve, n_bins=section['n_bins'],
                              inner_fraction=section['inner_fraction'],
                              max_dimension=section['max_dimension'], params=params)
    meta = _provenance(cfg, 'levels')
    extra = dict(meta)
    if report.eigenvalues.size <= 256:
        extra['eigenvalues'] = report.eigenvalues
    save_level_report(report, out, extra)
    return {'mean_r': report.mean_r, 'excluded_degenerate': report.excluded_degenerate}


def cmd_quench(cfg: RunConfig, out: Path) -> Summary:
    """Quench from a product pattern, optionally averaged over noise."""
    quench = quench_from(cfg)
    noise = noise_from(cfg)
    meta = _provenance(cfg, 'quench')
    if noise is not None:
        result = noise_average(functools.partial(quench_imbalance, quench), quench.field, quench.pattern,
                               noise, workers=cfg['workers'], window=quench.window,
                               keep_instances=cfg['noise']['archive'])
        _write_noise(out, 'quench_imbalance', result, meta)
        summary = {'late_time_mean': result.late_time_mean, 'late_time_stderr': result.late_time_stderr}
    else:
        result = run_quench(quench)
        write_csv(out / 'quench_magnetizations.csv', result.magnetizations.header(),
                  result.magnetizations.rows(), meta)
        extras = [s for s in (result.qfi, result.entropy) if s is not None]
        _write_series(out / 'quench_imbalance.csv', [result.imbalance.series] + extras, meta)
        summary = {'late_time_mean': result.imbalance.late_time_mean}
    summary['window'] = list(quench.window)
    write_json(out / 'quench_summary.json', dict(summary, **meta))
    return summary


def cmd_deer(cfg: RunConfig, out: Path) -> Summary:
    """DEER against spin echo for every configured region offset."""
    noise = noise_from(cfg)
    meta = _provenance(cfg, 'deer')
    windowed = {}
    for offset in cfg['deer']['offsets']:
        deer = deer_from(cfg, offset)
        if noise is not None:
            result = noise_average(functools.partial(deer_difference, deer), deer.field,
                                   SpinPattern.neel(deer.n), noise, workers=cfg['workers'],
                                   window=deer.window, keep_instances=cfg['noise']['archive'])
            _write_noise(out, f'deer_offset_{offset}', result, meta)
            windowed[str(offset)] = result.late_time_mean
        else:
            result = run_deer(deer)
            _write_series(out / f'deer_offset_{offset}.csv',
                          [result.echo, result.deer, result.difference], meta)
            windowed[str(offset)] = result.windowed_difference
    summary = {'windowed_difference': windowed, 'window': list(cfg['deer']['window'])}
    write_json(out / 'deer_summary.json', dict(summary, **meta))
    return summary


def cmd_quad(cfg: RunConfig, out: Path) -> Summary:
    """Quadratic-field relaxation and the localized/thermal boundary."""
    quad = quadratic_from(cfg)
    result = run_quadratic(quad)
    meta = _provenance(cfg, 'quad')
    write_csv(out / 'quad_magnetizations.csv', result.magnetizations.header(),
              result.magnetizations.rows(), meta)
    rows = ([j, quad.field.bz[j - 1], result.slopes[j - 1], result.memory_mean[j - 1],
             result.memory_std[j - 1], int(result.localized[j - 1])]
            for j in range(1, quad.quench.n + 1))
    write_csv(out / 'quad_sites.csv',
              ['site', 'bz_over_j0', 'slope', 'memory_mean', 'memory_std', 'localized'], rows, meta)
    summary = {'center': result.center, 'boundary': list(result.boundary),
               'boundary_slopes': result.boundary_slopes}
    write_json(out / 'quad_summary.json', dict(summary, **meta))
    return summary


def cmd_stability(cfg: RunConfig, out: Path) -> Summary:
    """Long-time imbalance for several initial patterns."""
    result = run_stability(stability_from(cfg))
    meta = _provenance(cfg, 'stability')
    for pattern, record, smoothed in zip(result.patterns, result.records, result.smoothed):
        smoothed = TimeSeries(smoothed.times, smoothed.values, 'smoothed')
        _write_series(out / f'stability_{pattern.bits}.csv', [record.series, smoothed], meta)
    summary = {'final_smoothed': result.final_smoothed(),
               'late_time_mean': {p.bits: r.late_time_mean for p, r in zip(result.patterns, result.records)}}
    write_json(out / 'stability_summary.json', dict(summary, **meta))
    return summary


def cmd_sweff(cfg: RunConfig, out: Path) -> Summary:
    """Third-order effective-Hamiltonian terms as CSV."""
    section = cfg['sweff']
    if section['source'] == 'couplings':
        source = couplings_from(cfg)
    else:
        source = (section['alpha'], cfg['chain']['n'])
    terms = heff3_terms(source, section['g'])
    write_csv(out / 'sweff_terms.csv', ['i', 'j', 'k', 'l', 'amplitude_j0cubed_over_g2'],
              ([*t.sites, t.amplitude] for t in terms), _provenance(cfg, 'sweff'))
    return {'terms': len(terms),
            'max_amplitude': max((abs(t.amplitude) for t in terms), default=0.0)}


_COMMANDS: Dict[str, Callable[[RunConfig, Path], Summary]] = {
    'levels': cmd_levels,
    'quench': cmd_quench,
    'deer': cmd_deer,
    'quad': cmd_quad,
    'stability': cmd_stability,
    'sweff': cmd_sweff,
}


def _sweep_point(command: str, cfg: RunConfig, out: Path, job: tuple) -> Dict[str, Any]:
    index, point = job
    entry: Dict[str, Any] = {'index': index, 'point': point}
    try:
        point_cfg = cfg.with_values(dict(point, workers=1))
        entry['summary'] = _COMMANDS[command](point_cfg, out / f'point_{index:04d}')
    except Exception as e:
        # A failed point is reported; the rest of the sweep carries on
        entry['error'] = f'{type(e).__name__}: {e}'
    return entry


def cmd_sweep(cfg: RunConfig, out: Path) -> Summary:
    """**Run one command over a parameter grid.**

    Points run on ``workers`` processes. Each writes into ``point_NNNN/``, numbered in grid
    order, and ``sweep_summary.json`` lists successes and failures in that order.
    """
    command = cfg['sweep']['command']
    jobs = list(enumerate(sweep_points(cfg)))
    logger.info('Sweep of %r over %d point(s)', command, len(jobs))
    task = functools.partial(_sweep_point, command, cfg, out)
    if cfg['workers'] > 1 and len(jobs) > 1:
        with Pool(min(cfg['workers'], len(jobs))) as pool:
            entries = pool.map(task, jobs)
    else:
        entries = [task(job) for job in jobs]

    done = [e for e in entries if 'error' not in e]
    failed = [e for e in entries if 'error' in e]
    for entry in failed:
        logger.warning('Sweep point %d %s failed: %s', entry['index'], entry['point'], entry['error'])
    summary = {'command': command, 'points': done, 'failed': failed}
    write_json(out / 'sweep_summary.json', dict(summary, **_provenance(cfg, 'sweep')))
    return summary


_COMMANDS['sweep'] = cmd_sweep


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', metavar='PATH', help='JSON run configuration')
    common.add_argument('--seed', type=int, help='root seed for noise sampling')
    common.add_argument('--workers', type=int, help='worker processes')
    common.add_argument('--out', metavar='DIR', help='output directory')
    common.add_argument('-v', '--verbose', action='store_true', help='debug logging')
    common.add_argument('--dry-run', action='store_true',
                        help='print the resolved configuration and exit')

    parser = argparse.ArgumentParser(
        prog='starkmbl', description='Numerics of Stark many-body localization in tilted spin chains.')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    commands = parser.add_subparsers(dest='command', metavar='COMMAND')
    commands.required = True
    helps = {
        'levels': 'gap-ratio level statistics',
        'quench': 'quench dynamics and generalized imbalance',
        'deer': 'DEER versus spin-echo interferometry',
        'quad': 'relaxation in a quadratic field',
        'stability': 'long-time state-dependent stability',
        'sweff': 'strong-tilt effective Hamiltonian terms',
        'sweep': 'run a command over a parameter grid',
    }
    for name in COMMANDS + ('sweep',):
        commands.add_parser(name, parents=[common], help=helps[name])
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=_LOG_FORMAT)

    flags = {key: getattr(args, key) for key in ('seed', 'workers', 'out')
             if getattr(args, key) is not None}
    try:
        cfg = load_config(args.config, overrides=flags)
        if args.dry_run:
            sys.stdout.write(cfg.serialize())
            return EXIT_OK
        summary = _COMMANDS[args.command](cfg, Path(cfg['out']))
    except (ConfigError, CouplingFileError, InvalidPatternError, DimensionMismatchError,
            EmptySectorError, ValueError) as e:
        logger.error('Configuration error: %s', e)
        return EXIT_CONFIG
    except ResourceGuardError as e:
        logger.error('Resource guard: %s', e)
        return EXIT_RESOURCE
    except (NumericalError, UndefinedImbalanceError) as e:
        logger.error('Numerical failure: %s', e)
        return EXIT_NUMERICAL
    if args.command == 'sweep' and summary['failed']:
        return EXIT_NUMERICAL
    logger.info('Done: %s', {k: v for k, v in summary.items() if k != 'points'})
    return EXIT_OK
