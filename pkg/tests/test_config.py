import math
import os
import tempfile
import unittest
import numpy as np
from starkmbl import ConfigError, CouplingFileError, InvalidPatternError, EvolutionMode, \
    power_law_couplings, save_couplings
from starkmbl.config import parse_config, load_config, env_overrides, sweep_points, couplings_from, \
    field_from, trotter_from, noise_from, quench_from, deer_from, quadratic_from, stability_from


class TestParsing(unittest.TestCase):

    def test_defaults(self) -> None:
        cfg = parse_config('{}')
        self.assertEqual(cfg['chain']['n'], 12)
        self.assertEqual(cfg.get('field.g'), 1.0)
        self.assertEqual(cfg['seed'], 0)
        self.assertEqual(cfg.get('deer.window'), [2.0, 4.0])
        self.assertEqual(parse_config(''), cfg)

    def test_round_trip(self) -> None:
        cfg = parse_config('{"chain": {"n": 9}, "field": {"g": 2.4}, "sweep": {"grid": {"field.g": [1, 2]}}}')
        self.assertEqual(parse_config(cfg.serialize()), cfg)
        self.assertTrue(cfg.serialize().endswith('\n'))

    def test_unknown_key_line(self) -> None:
        text = '{\n  "chain": {"n": 4},\n  "field": {\n    "slope": 1.0\n  }\n}\n'
        with self.assertRaises(ConfigError) as ctx:
            parse_config(text)
        self.assertEqual(ctx.exception.line, 4)
        self.assertEqual(ctx.exception.column, 5)
        self.assertIn('slope', str(ctx.exception))

    def test_type_error_line(self) -> None:
        text = '{\n  "chain": {\n    "n": "twelve"\n  }\n}'
        with self.assertRaises(ConfigError) as ctx:
            parse_config(text)
        self.assertEqual(ctx.exception.line, 3)
        self.assertIn('chain.n', str(ctx.exception))

    def test_syntax_error_line(self) -> None:
        with self.assertRaises(ConfigError) as ctx:
            parse_config('{\n  "seed": 1,\n  "workers": \n}')
        self.assertEqual(ctx.exception.line, 4)

    def test_value_checks(self) -> None:
        with self.assertRaises(ConfigError):
            parse_config('{"workers": 0}')
        with self.assertRaises(ConfigError):
            parse_config('{"quench": {"mode": "magic"}}')
        with self.assertRaises(ConfigError):
            parse_config('{"quench": {"window": [1.0]}}')
        with self.assertRaises(ConfigError):
            parse_config('{"noise": {"enabled": 1}}')
        with self.assertRaises(ConfigError):
            parse_config('[]')

    def test_with_values(self) -> None:
        cfg = parse_config('{}').with_values({'field.g': 2.0, 'seed': 4})
        self.assertEqual(cfg.get('field.g'), 2.0)
        self.assertEqual(cfg['seed'], 4)
        with self.assertRaises(ConfigError):
            parse_config('{}').with_values({'field.slope': 1.0})


class TestLoading(unittest.TestCase):

    def setUp(self) -> None:
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.path = os.path.join(self.tmp.name, 'run.json')
        with open(self.path, 'w', encoding='utf-8') as file:
            file.write('{"seed": 3, "out": "from_file"}')

    def test_precedence(self) -> None:
        self.assertEqual(load_config(self.path, env={})['seed'], 3)
        self.assertEqual(load_config(self.path, env={'STARKMBL_SEED': '7'})['seed'], 7)
        cfg = load_config(self.path, env={'STARKMBL_SEED': '7'}, overrides={'seed': 9})
        self.assertEqual(cfg['seed'], 9)
        self.assertEqual(cfg['out'], 'from_file')
        self.assertEqual(load_config(env={})['seed'], 0)

    def test_env_parsing(self) -> None:
        self.assertEqual(env_overrides({'STARKMBL_J0_KHZ': '0.33', 'STARKMBL_WORKERS': '2', 'OTHER': 'x'}),
                         {'j0_khz': 0.33, 'workers': 2})
        with self.assertRaises(ConfigError):
            env_overrides({'STARKMBL_SEED': 'abc'})

    def test_missing_file(self) -> None:
        with self.assertRaises(ConfigError):
            load_config(os.path.join(self.tmp.name, 'missing.json'), env={})


class TestSweep(unittest.TestCase):

    def test_points_in_grid_order(self) -> None:
        cfg = parse_config('{"sweep": {"grid": {"seed": [1, 2], "field.g": [0.5, 1.5]}}}')
        self.assertEqual(sweep_points(cfg), [
            {'field.g': 0.5, 'seed': 1}, {'field.g': 0.5, 'seed': 2},
            {'field.g': 1.5, 'seed': 1}, {'field.g': 1.5, 'seed': 2},
        ])

    def test_empty_grid(self) -> None:
        self.assertEqual(sweep_points(parse_config('{}')), [{}])

    def test_bad_grid(self) -> None:
        with self.assertRaises(ConfigError):
            parse_config('{"sweep": {"grid": {"field.slope": [1]}}}')
        with self.assertRaises(ConfigError):
            parse_config('{"sweep": {"grid": {"field.g": []}}}')
        with self.assertRaises(ConfigError):
            parse_config('{"sweep": {"grid": {"chain.n": ["x"]}}}')


class TestBuilders(unittest.TestCase):

    def test_couplings(self) -> None:
        cfg = parse_config('{"chain": {"n": 5}}')
        self.assertEqual(couplings_from(cfg), power_law_couplings(5, 1.3))
        cfg = parse_config('{"chain": {"n": 5}, "couplings": {"kind": "nearest_neighbor"}}')
        self.assertEqual(len(list(couplings_from(cfg).pairs())), 4)
        with self.assertRaises(ConfigError):
            couplings_from(parse_config('{"chain": {"n": 5}, "couplings": {"kind": "file"}}'))
        with self.assertRaises(ConfigError):
            couplings_from(parse_config('{"chain": {"n": 30}}'))

    def test_coupling_file(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            path = save_couplings(power_law_couplings(4, 1.1), os.path.join(tmp, 'c.txt'))
            text = '{"chain": {"n": %d}, "couplings": {"kind": "file", "path": "%s"}}'
            self.assertEqual(couplings_from(parse_config(text % (4, path))), power_law_couplings(4, 1.1))
            with self.assertRaises(ConfigError):
                couplings_from(parse_config(text % (5, path)))
            with self.assertRaises(CouplingFileError):
                couplings_from(parse_config(text % (4, os.path.join(tmp, 'none.txt'))))

    def test_field_units(self) -> None:
        cfg = parse_config('{"chain": {"n": 3}, "field": {"g": 0.6, "bz0": 1.0, "units": "khz"}}')
        np.testing.assert_allclose(field_from(cfg).bz, [4.0, 6.4, 8.8])

    def test_field_kinds(self) -> None:
        cfg = parse_config('{"chain": {"n": 3}, "field": {"kind": "values", "values": [1, 2, 4],'
                           ' "deltas": [0.5, 0, 0]}}')
        np.testing.assert_allclose(field_from(cfg).bz, [1.5, 2.0, 4.0])
        with self.assertRaises(ConfigError):
            field_from(parse_config('{"chain": {"n": 3}, "field": {"kind": "values", "values": [1]}}'))
        cfg = parse_config('{"chain": {"n": 3}, "field": {"bias": "experimental", "g": 0.0}}')
        self.assertAlmostEqual(field_from(cfg).bz0, 4.4)
        cfg = parse_config('{"chain": {"n": 5}, "field": {"kind": "quadratic", "gamma": 1.8, "bz0": 0}}')
        self.assertEqual(field_from(cfg).kind, 'quadratic')

    def test_trotter_and_noise(self) -> None:
        self.assertIsNone(trotter_from(parse_config('{}')))
        cfg = parse_config('{"trotter": {"dt1": 1000, "dt2": 500, "units": "us"}}')
        trotter = trotter_from(cfg)
        self.assertAlmostEqual(trotter.dt1, math.pi / 2)
        self.assertAlmostEqual(trotter.dt2, math.pi / 4)
        self.assertIsNone(noise_from(parse_config('{}')))
        noise = noise_from(parse_config('{"seed": 5, "noise": {"enabled": true}}'))
        self.assertAlmostEqual(noise.sigma_bz0, 2.4)
        self.assertEqual(noise.seed, 5)

    def test_quench(self) -> None:
        cfg = parse_config('{"chain": {"n": 6}, "quench": {"pattern": "two_block", "t_max": 3000,'
                           ' "window": [2000, 3000], "time_units": "us"}}')
        quench = quench_from(cfg)
        self.assertEqual(quench.pattern.bits, '011001')
        self.assertAlmostEqual(quench.t_max, 1.5 * math.pi)
        self.assertAlmostEqual(quench.window[0], math.pi)
        self.assertEqual(quench.mode, EvolutionMode.CONTINUOUS)
        with self.assertRaises(ConfigError):
            quench_from(parse_config('{"chain": {"n": 6}, "quench": {"pattern": "0101"}}'))
        with self.assertRaises(ConfigError):
            quench_from(parse_config('{"chain": {"n": 6}, "quench": {"mode": "trotter"}}'))

    def test_pattern_errors_are_config_errors(self) -> None:
        with self.assertRaises(ConfigError):
            quench_from(parse_config('{"chain": {"n": 4}, "quench": {"pattern": "01x1"}}'))
        self.assertFalse(issubclass(ConfigError, InvalidPatternError))

    def test_other_commands(self) -> None:
        cfg = parse_config('{"chain": {"n": 6}, "deer": {"offsets": [1, 2]}, "stability": {"t_max": 10}}')
        self.assertEqual(deer_from(cfg).offset, 1)
        self.assertEqual(deer_from(cfg, 2).region, [3, 4, 5])
        self.assertEqual(quadratic_from(cfg).tail_points, 5)
        self.assertEqual(len(stability_from(cfg).quenches), 2)
        with self.assertRaises(ConfigError):
            deer_from(cfg, 4)


if __name__ == '__main__':
    unittest.main()
