from __future__ import annotations

from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple
import copy
import json
import math
import os
import re
from .datastructs import ChainConfig, CouplingMatrix, FieldProfile, KrylovSettings, NoiseModel, \
    SpinPattern, TrotterSettings, ConfigError
from .enums import Axis, EvolutionMode, Resolution
from .model import power_law_couplings, nearest_neighbor_couplings, load_couplings, linear_field, \
    quadratic_field, experimental_bias
from .protocols import QuenchConfig, DeerConfig, QuadraticConfig, StabilityConfig
from .utils import khz_to_j0, us_to_tj0


__all__ = ['ENV_PREFIX', 'COMMANDS', 'Option', 'SCHEMA', 'RunConfig', 'parse_config', 'load_config',
           'env_overrides', 'couplings_from', 'field_from', 'krylov_from', 'trotter_from',
           'noise_from', 'quench_from', 'deer_from', 'quadratic_from', 'stability_from',
           'sweep_points']


ENV_PREFIX = 'STARKMBL_'
COMMANDS = ('levels', 'quench', 'deer', 'quad', 'stability', 'sweff')

_UNSET = object()


class Option:
    """One typed leaf of the configuration schema."""

    def __init__(self, kind: type, default: Any, *, choices: Optional[Sequence[str]] = None,
                 nullable: bool = False, minimum: Optional[float] = None, positive: bool = False,
                 items: Optional[type] = None, length: Optional[int] = None) -> None:
        self.kind = kind
        self.default = default
        self.choices = tuple(choices) if choices else None
        self.nullable = nullable or default is None
        self.minimum = minimum
        self.positive = positive
        self.items = items
        self.length = length

    def _scalar(self, value: Any, kind: type, where: str) -> Any:
        if kind is bool:
            if not isinstance(value, bool):
                raise ConfigError(f'expected true or false, got {value!r}.', key=where)
            return value
        if kind is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f'expected an integer, got {value!r}.', key=where)
            return value
        if kind is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f'expected a number, got {value!r}.', key=where)
            if not math.isfinite(value):
                raise ConfigError('expected a finite number.', key=where)
            return float(value)
        if not isinstance(value, str):
            raise ConfigError(f'expected a string, got {value!r}.', key=where)
        return value

    def _bounds(self, value: Any, where: str) -> None:
        if self.positive and value <= 0:
            raise ConfigError(f'must be positive, got {value!r}.', key=where)
        if self.minimum is not None and value < self.minimum:
            raise ConfigError(f'must be at least {self.minimum}, got {value!r}.', key=where)

    def validate(self, value: Any, where: str) -> Any:
        if value is None:
            if self.nullable:
                return None
            raise ConfigError('may not be null.', key=where)
        if self.kind is dict:
            if not isinstance(value, dict):
                raise ConfigError(f'expected an object, got {value!r}.', key=where)
            return copy.deepcopy(value)
        if self.kind is list:
            if not isinstance(value, list):
                raise ConfigError(f'expected a list, got {value!r}.', key=where)
            if self.length is not None and len(value) != self.length:
                raise ConfigError(f'expected {self.length} entries, got {len(value)}.', key=where)
            checked = [self._scalar(v, self.items, f'{where}[{k}]') for k, v in enumerate(value)]
            if self.items in (int, float):
                for k, v in enumerate(checked):
                    self._bounds(v, f'{where}[{k}]')
            return checked
        value = self._scalar(value, self.kind, where)
        if self.choices and value not in self.choices:
            raise ConfigError(f'expected one of {", ".join(self.choices)}, got {value!r}.', key=where)
        if self.kind in (int, float):
            self._bounds(value, where)
        return value

    def parse_text(self, text: str, where: str) -> Any:
        """Convert an environment string to this option's type."""
        try:
            if self.kind is bool:
                lowered = text.strip().lower()
                if lowered not in ('1', '0', 'true', 'false', 'yes', 'no'):
                    raise ValueError(text)
                return lowered in ('1', 'true', 'yes')
            if self.kind is int:
                return int(text)
            if self.kind is float:
                return float(text)
        except ValueError:
            raise ConfigError(f'cannot parse {text!r} as {self.kind.__name__}.', key=where) from None
        return text


_UNITS_TIME = ('j0', 'us')


def _time_section(t_max: float, n_points: int, window: Optional[List[float]] = None) -> Dict[str, Option]:
    section = {
        't_max': Option(float, t_max, positive=True),
        'n_points': Option(int, n_points, minimum=2),
        'time_units': Option(str, 'j0', choices=_UNITS_TIME),
    }
    if window is not None:
        section['window'] = Option(list, window, items=float, length=2, minimum=0.0)
    return section


SCHEMA: Dict[str, Any] = {
    'seed': Option(int, 0, minimum=0),
    'workers': Option(int, 1, minimum=1),
    'out': Option(str, 'results'),
    'j0_khz': Option(float, 0.25, positive=True),
    'chain': {
        'n': Option(int, 12, minimum=2),
    },
    'couplings': {
        'kind': Option(str, 'power_law', choices=('power_law', 'nearest_neighbor', 'file')),
        'alpha': Option(float, 1.3, positive=True),
        'j0': Option(float, 1.0, positive=True),
        'path': Option(str, None),
    },
    'field': {
        'kind': Option(str, 'linear', choices=('linear', 'quadratic', 'values')),
        'bias': Option(str, 'fixed', choices=('fixed', 'experimental')),
        'bz0': Option(float, 5.0),
        'g': Option(float, 1.0),
        'gamma': Option(float, 0.0),
        'center_offset': Option(float, 0.0),
        'values': Option(list, None, items=float),
        'deltas': Option(list, None, items=float),
        'units': Option(str, 'j0', choices=('j0', 'khz')),
    },
    'krylov': {
        'subspace_dim': Option(int, 30, minimum=2),
        'tolerance': Option(float, 1e-10, positive=True),
        'max_substep': Option(float, 0.1, positive=True),
    },
    'trotter': {
        'dt1': Option(float, None, positive=True),
        'dt2': Option(float, None, positive=True),
        'units': Option(str, 'j0', choices=_UNITS_TIME),
    },
    'noise': {
        'enabled': Option(bool, False),
        'init_rotation_angle': Option(float, 0.075 * math.pi),
        'sigma_bz0_khz': Option(float, 0.6, minimum=0.0),
        'sigma_g_frac': Option(float, 0.0625, minimum=0.0),
        'sigma_local_frac': Option(float, 0.03125, minimum=0.0),
        'n_samples': Option(int, 50, minimum=1),
        'archive': Option(bool, False),
    },
    'levels': {
        'resolve': Option(str, 'parity', choices=tuple(str(r) for r in Resolution)),
        'mz': Option(int, None),
        'n_bins': Option(int, 20, minimum=2),
        'inner_fraction': Option(float, 1.0, positive=True),
        'max_dimension': Option(int, 1 << 14, minimum=2),
    },
    'quench': dict(_time_section(7.0, 40, [5.0, 7.0]), **{
        'pattern': Option(str, 'neel'),
        'mode': Option(str, 'continuous', choices=tuple(str(m) for m in EvolutionMode)),
        'qfi': Option(bool, False),
        'entropy': Option(bool, False),
    }),
    'deer': dict(_time_section(4.0, 21, [2.0, 4.0]), **{
        'probe': Option(int, 1, minimum=1),
        'offsets': Option(list, [1], items=int, minimum=1),
        'region_size': Option(int, 3, minimum=1),
        'axis': Option(str, 'x', choices=tuple(str(a) for a in Axis)),
    }),
    'quad': dict(_time_section(7.0, 40), **{
        'pattern': Option(str, 'neel'),
        'tail_points': Option(int, 5, minimum=2),
    }),
    'stability': dict(_time_section(100.0, 400), **{
        'patterns': Option(list, ['neel', 'two_block'], items=str),
        'smoothing': Option(float, 5.0, positive=True),
    }),
    'sweff': {
        'source': Option(str, 'power_law', choices=('power_law', 'couplings')),
        'alpha': Option(float, 1.3, positive=True),
        'g': Option(float, 1.0, positive=True),
    },
    'sweep': {
        'command': Option(str, 'quench', choices=COMMANDS),
        'grid': Option(dict, {}),
    },
}


def _schema_at(path: Sequence[str]) -> Any:
    node: Any = SCHEMA
    for part in path:
        if not isinstance(node, dict) or part not in node:
            return None
        node = node[part]
    return node


def _locate(text: Optional[str], path: Sequence[str]) -> Tuple[Optional[int], Optional[int]]:
    """Line and column of the last key of ``path`` in the JSON source, if present."""
    if not text:
        return None, None
    pos = 0
    for part in path:
        match = re.compile(r'"%s"\s*:' % re.escape(part)).search(text, pos)
        if match is None:
            return None, None
        pos = match.start()
    line = text.count('\n', 0, pos) + 1
    return line, pos - (text.rfind('\n', 0, pos) + 1) + 1


def _validate(data: Any, schema: Dict[str, Any], path: Tuple[str, ...], text: Optional[str]) -> Dict[str, Any]:
    where = '.'.join(path) or 'configuration'
    if not isinstance(data, dict):
        raise ConfigError(f'expected an object, got {type(data).__name__}.', key=where,
                          line=_locate(text, path)[0])
    unknown = sorted(set(data) - set(schema))
    if unknown:
        line, column = _locate(text, path + (unknown[0],))
        raise ConfigError(f'unknown key {unknown[0]!r}.', key=where, line=line, column=column)

    result = {}
    for name, node in schema.items():
        sub = path + (name,)
        if isinstance(node, dict):
            result[name] = _validate(data.get(name, {}), node, sub, text)
            continue
        try:
            value = data.get(name, _UNSET)
            result[name] = copy.deepcopy(node.default) if value is _UNSET else node.validate(value, '.'.join(sub))
        except ConfigError as e:
            line, column = _locate(text, sub)
            raise ConfigError(str(e), line=line, column=column) from None
    _check_grid(result, path, text)
    return result


def _check_grid(section: Dict[str, Any], path: Tuple[str, ...], text: Optional[str]) -> None:
    if path != ('sweep',):
        return
    for dotted, values in section['grid'].items():
        target = _schema_at(dotted.split('.'))
        line, column = _locate(text, ('sweep', 'grid', dotted))
        if not isinstance(target, Option) or dotted.startswith('sweep.'):
            raise ConfigError(f'grid key {dotted!r} is not a configuration option.',
                              key='sweep.grid', line=line, column=column)
        if not isinstance(values, list) or not values:
            raise ConfigError(f'grid values for {dotted!r} must be a non-empty list.',
                              key='sweep.grid', line=line, column=column)
        for value in values:
            target.validate(value, f'sweep.grid.{dotted}')


def _set_path(data: Dict[str, Any], dotted: str, value: Any) -> None:
    parts = dotted.split('.')
    node = data
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f'cannot set {dotted!r}.', key=dotted)
    node[parts[-1]] = value


class RunConfig:
    """**A validated, fully resolved run configuration.**

    Sections are reached by item access (``cfg['field']['g']``) or by dotted path
    (``cfg.get('field.g')``). Equality ignores where the configuration came from.
    """

    def __init__(self, data: Dict[str, Any], text: Optional[str] = None) -> None:
        self._data = data
        self._text = text

    def __getitem__(self, key: str) -> Any:
        return self._data[key]

    def get(self, dotted: str) -> Any:
        node: Any = self._data
        for part in dotted.split('.'):
            node = node[part]
        return node

    def with_values(self, overrides: Mapping[str, Any]) -> RunConfig:
        data = self.to_dict()
        for dotted, value in overrides.items():
            _set_path(data, dotted, value)
        return RunConfig(_validate(data, SCHEMA, (), None), self._text)

    def error(self, dotted: str, message: str) -> ConfigError:
        line, column = _locate(self._text, dotted.split('.'))
        return ConfigError(message, key=dotted, line=line, column=column)

    def to_dict(self) -> Dict[str, Any]:
        return copy.deepcopy(self._data)

    def serialize(self) -> str:
        return json.dumps(self._data, sort_keys=True, indent=2) + '\n'

    def __eq__(self, other: RunConfig) -> bool:
        return isinstance(other, RunConfig) and self._data == other._data

    def __repr__(self) -> str:
        return f'<{self.__class__.__qualname__} n={self._data["chain"]["n"]} seed={self._data["seed"]}>'


def _loads(text: str) -> Dict[str, Any]:
    try:
        return json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as e:
        raise ConfigError(f'invalid JSON ({e.msg}).', line=e.lineno, column=e.colno) from None


def parse_config(text: str) -> RunConfig:
    """Validate JSON text against ``SCHEMA`` and fill in the defaults."""
    return RunConfig(_validate(_loads(text), SCHEMA, (), text), text)


def env_overrides(env: Optional[Mapping[str, str]] = None) -> Dict[str, Any]:
    """Top-level scalar options set through ``STARKMBL_<KEY>`` variables."""
    env = os.environ if env is None else env
    overrides = {}
    for name, node in SCHEMA.items():
        variable = ENV_PREFIX + name.upper()
        if isinstance(node, Option) and variable in env:
            overrides[name] = node.parse_text(env[variable], variable)
    return overrides


def load_config(path: Optional[Any] = None, *, env: Optional[Mapping[str, str]] = None,
                overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """**Resolve a configuration.**

    Defaults are overridden by the file at ``path``, then by ``STARKMBL_*`` environment
    variables, then by ``overrides`` (dotted keys, as the command line passes them).
    """
    text = None
    data: Dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, encoding='utf-8') as file:
                text = file.read()
        except OSError as e:
            raise ConfigError(f'cannot read {path} ({e.strerror or e}).') from None
        data = _loads(text)
        if not isinstance(data, dict):
            raise ConfigError('the configuration must be a JSON object.', line=1, column=1)
        # Report file problems against the file before anything is layered on top
        _validate(data, SCHEMA, (), text)
    for dotted, value in dict(env_overrides(env), **(overrides or {})).items():
        _set_path(data, dotted, value)
    return RunConfig(_validate(data, SCHEMA, (), text), text)


def sweep_points(cfg: RunConfig) -> List[Dict[str, Any]]:
    """Every combination of the sweep grid, ordered by sorted key and then by listed value."""
    grid = cfg['sweep']['grid']
    points: List[Dict[str, Any]] = [{}]
    for key in sorted(grid):
        points = [dict(point, **{key: value}) for point in points for value in grid[key]]
    return points


def _times(section: Dict[str, Any], cfg: RunConfig, *names: str) -> List[Any]:
    values = []
    for name in names:
        value = section[name]
        if section['time_units'] == 'us':
            value = us_to_tj0(value, cfg['j0_khz']) if not isinstance(value, list) \
                else [us_to_tj0(v, cfg['j0_khz']) for v in value]
        values.append(value)
    return values


def _guarded(cfg: RunConfig, dotted: str, build: Any, *args: Any, **kwargs: Any) -> Any:
    """Call a domain constructor and report its ValueError against the config key."""
    try:
        return build(*args, **kwargs)
    except ValueError as e:
        # Pattern and dimension errors are ValueErrors too; resource guards are not
        raise cfg.error(dotted, str(e)) from None


def couplings_from(cfg: RunConfig) -> CouplingMatrix:
    n = _guarded(cfg, 'chain.n', ChainConfig, cfg['chain']['n']).n
    section = cfg['couplings']
    if section['kind'] == 'power_law':
        return power_law_couplings(n, section['alpha'], section['j0'])
    if section['kind'] == 'nearest_neighbor':
        return nearest_neighbor_couplings(n, section['j0'])
    if section['path'] is None:
        raise cfg.error('couplings.path', 'a coupling file path is required for kind "file".')
    c = load_couplings(section['path'])
    if c.n != n:
        raise cfg.error('couplings.path', f'the coupling file has {c.n} sites, chain.n is {n}.')
    return c.scaled(section['j0']) if section['j0'] != 1.0 else c


def field_from(cfg: RunConfig) -> FieldProfile:
    n = cfg['chain']['n']
    section = cfg['field']

    def units(value: Any) -> Any:
        return khz_to_j0(value, cfg['j0_khz']) if section['units'] == 'khz' else value

    g = units(section['g'])
    bz0 = experimental_bias(g) if section['bias'] == 'experimental' else units(section['bz0'])
    if section['kind'] == 'linear':
        field = linear_field(n, bz0, g)
    elif section['kind'] == 'quadratic':
        field = _guarded(cfg, 'field.gamma', quadratic_field, n, bz0, units(section['gamma']),
                         section['center_offset'])
    else:
        if section['values'] is None or len(section['values']) != n:
            raise cfg.error('field.values', f'expected {n} field values.')
        field = FieldProfile(0.0, units(section['values']), 'values')
    if section['deltas'] is not None:
        if len(section['deltas']) != n:
            raise cfg.error('field.deltas', f'expected {n} field deltas.')
        field = field.with_deltas(units(section['deltas']))
    return field


def krylov_from(cfg: RunConfig) -> KrylovSettings:
    section = cfg['krylov']
    return KrylovSettings(section['subspace_dim'], section['tolerance'], section['max_substep'])


def trotter_from(cfg: RunConfig) -> Optional[TrotterSettings]:
    section = cfg['trotter']
    if section['dt1'] is None or section['dt2'] is None:
        return None
    dt1, dt2 = section['dt1'], section['dt2']
    if section['units'] == 'us':
        dt1, dt2 = us_to_tj0(dt1, cfg['j0_khz']), us_to_tj0(dt2, cfg['j0_khz'])
    return TrotterSettings(dt1, dt2)


def noise_from(cfg: RunConfig) -> Optional[NoiseModel]:
    section = cfg['noise']
    if not section['enabled']:
        return None
    return NoiseModel(section['init_rotation_angle'], khz_to_j0(section['sigma_bz0_khz'], cfg['j0_khz']),
                      section['sigma_g_frac'], section['sigma_local_frac'], section['n_samples'],
                      cfg['seed'])


def _pattern(cfg: RunConfig, dotted: str, text: str) -> SpinPattern:
    return _guarded(cfg, dotted, SpinPattern.parse, text, cfg['chain']['n'])


def quench_from(cfg: RunConfig) -> QuenchConfig:
    section = cfg['quench']
    t_max, window = _times(section, cfg, 't_max', 'window')
    mode = EvolutionMode(section['mode'])
    trotter = trotter_from(cfg)
    if mode == EvolutionMode.TROTTER and trotter is None:
        raise cfg.error('trotter', 'trotter mode needs trotter.dt1 and trotter.dt2.')
    return _guarded(cfg, 'quench', QuenchConfig, couplings_from(cfg), field_from(cfg),
                    _pattern(cfg, 'quench.pattern', section['pattern']), t_max=t_max,
                    n_points=section['n_points'], window=tuple(window), mode=mode, trotter=trotter,
                    krylov=krylov_from(cfg), record_qfi=section['qfi'],
                    record_entropy=section['entropy'])


def deer_from(cfg: RunConfig, offset: Optional[int] = None) -> DeerConfig:
    section = cfg['deer']
    t_max, window = _times(section, cfg, 't_max', 'window')
    return _guarded(cfg, 'deer', DeerConfig, couplings_from(cfg), field_from(cfg),
                    offset=section['offsets'][0] if offset is None else offset,
                    probe=section['probe'], region_size=section['region_size'], axis=section['axis'],
                    t_max=t_max, n_points=section['n_points'], window=tuple(window),
                    krylov=krylov_from(cfg))


def quadratic_from(cfg: RunConfig) -> QuadraticConfig:
    section = cfg['quad']
    t_max, = _times(section, cfg, 't_max')
    return _guarded(cfg, 'quad', QuadraticConfig, couplings_from(cfg), field_from(cfg),
                    _pattern(cfg, 'quad.pattern', section['pattern']), t_max=t_max,
                    n_points=section['n_points'], tail_points=section['tail_points'],
                    krylov=krylov_from(cfg))


def stability_from(cfg: RunConfig) -> StabilityConfig:
    section = cfg['stability']
    t_max, = _times(section, cfg, 't_max')
    patterns = [_pattern(cfg, 'stability.patterns', text) for text in section['patterns']]
    return _guarded(cfg, 'stability', StabilityConfig, couplings_from(cfg), field_from(cfg), patterns,
                    t_max=t_max, n_points=section['n_points'], smoothing=section['smoothing'],
                    krylov=krylov_from(cfg))
