import json
import math
import os
import tempfile
import unittest
import numpy as np
from scipy.integrate import trapezoid
from starkmbl import ResourceGuardError, power_law_couplings, linear_field, build_ising, \
    build_xy_sector, dense_eigenvalues, block_eigenvalues, gap_ratios, poisson_pdf, \
    wigner_dyson_pdf, mean_r_reference, r_histogram, level_statistics, save_level_report


class TestReferenceDistributions(unittest.TestCase):

    def test_mean_r(self) -> None:
        self.assertAlmostEqual(mean_r_reference('poisson'), 2 * math.log(2) - 1, places=8)
        self.assertAlmostEqual(mean_r_reference('poisson'), 0.386294, places=5)
        self.assertAlmostEqual(mean_r_reference('wigner_dyson'), 4 - 2 * math.sqrt(3), places=6)

    def test_pdfs_normalized(self) -> None:
        r = np.linspace(0, 1, 20001)
        self.assertAlmostEqual(trapezoid(poisson_pdf(r), r), 1.0, places=6)
        self.assertAlmostEqual(trapezoid(wigner_dyson_pdf(r), r), 1.0, places=6)
        self.assertEqual(float(wigner_dyson_pdf(0.0)), 0.0)

    def test_pdf_domain(self) -> None:
        with self.assertRaises(ValueError):
            poisson_pdf(1.5)
        with self.assertRaises(ValueError):
            wigner_dyson_pdf(-0.1)


class TestGapRatios(unittest.TestCase):

    def test_simple(self) -> None:
        np.testing.assert_allclose(gap_ratios([0.0, 1.0, 3.0, 4.0]), [0.5, 0.5])
        np.testing.assert_allclose(gap_ratios([4.0, 0.0, 3.0, 1.0]), [0.5, 0.5])

    def test_degenerate_pairs_are_dropped(self) -> None:
        with self.assertLogs('starkmbl.spectrum', level='WARNING'):
            r = gap_ratios([0.0, 0.0, 0.0, 1.0])
        np.testing.assert_allclose(r, [0.0])

    def test_affine_invariance(self) -> None:
        levels = np.sort(np.random.default_rng(3).uniform(0, 1, 200))
        r = gap_ratios(levels)
        np.testing.assert_allclose(gap_ratios(3.7 * levels - 12.0), r, atol=1e-9)
        np.testing.assert_allclose(gap_ratios(-levels), r[::-1], atol=1e-9)

    def test_too_few_levels(self) -> None:
        with self.assertRaises(ValueError):
            gap_ratios([0.0, 1.0])

    def test_poisson_levels(self) -> None:
        levels = np.random.default_rng(5).uniform(0, 1, 20000)
        self.assertAlmostEqual(float(np.mean(gap_ratios(levels))), mean_r_reference('poisson'), delta=0.02)

    def test_goe_levels(self) -> None:
        a = np.random.default_rng(7).normal(size=(1000, 1000))
        eigs = np.linalg.eigvalsh(a + a.T)
        r = gap_ratios(eigs[250:750])
        self.assertAlmostEqual(float(np.mean(r)), 0.53, delta=0.04)

    def test_histogram(self) -> None:
        edges, densities = r_histogram([0.75, 0.8], n_bins=2)
        np.testing.assert_allclose(edges, [0.0, 0.5, 1.0])
        np.testing.assert_allclose(densities, [0.0, 2.0])
        with self.assertRaises(ValueError):
            r_histogram([])


class TestSpectra(unittest.TestCase):
    H = None

    @classmethod
    def setUpClass(cls) -> None:
        cls.couplings = power_law_couplings(6, 1.3)
        cls.field = linear_field(6, 5.0, 1.1)
        cls.H = build_ising(cls.couplings, cls.field)

    def test_dense_matches_numpy(self) -> None:
        np.testing.assert_allclose(dense_eigenvalues(self.H), np.linalg.eigvalsh(self.H.to_dense()),
                                   atol=1e-10)

    def test_resource_guard(self) -> None:
        with self.assertRaises(ResourceGuardError) as ctx:
            dense_eigenvalues(self.H, max_dimension=32)
        self.assertEqual(ctx.exception.requested, 64)
        self.assertEqual(ctx.exception.allowed, 32)

    def test_parity_blocks_cover_spectrum(self) -> None:
        blocks = block_eigenvalues(self.H, 'parity')
        self.assertEqual([b.size for b in blocks], [32, 32])
        np.testing.assert_allclose(np.sort(np.concatenate(blocks)), dense_eigenvalues(self.H), atol=1e-10)

    def test_sector_needs_sector_operator(self) -> None:
        with self.assertRaises(ValueError):
            level_statistics(self.H, 'sector')
        with self.assertRaises(ValueError):
            level_statistics(build_xy_sector(self.couplings, self.field, 0), 'parity')

    def test_level_statistics(self) -> None:
        report = level_statistics(self.H, 'parity', n_bins=10)
        self.assertEqual(report.eigenvalues.size, 64)
        self.assertEqual(report.r_values.size + report.excluded_degenerate, 2 * 30)
        self.assertTrue(0.0 <= report.mean_r <= 1.0)
        self.assertEqual(report.params['resolve'], 'parity')
        edges, densities = report.histogram
        self.assertEqual(edges.size, 11)
        self.assertAlmostEqual(float(np.sum(densities * np.diff(edges))), 1.0)

    def test_sector_statistics(self) -> None:
        report = level_statistics(build_xy_sector(self.couplings, self.field, 0), 'sector')
        self.assertEqual(report.eigenvalues.size, 20)
        self.assertEqual(report.params['resolve'], 'sector')

    def test_inner_fraction(self) -> None:
        report = level_statistics(self.H, 'full', inner_fraction=0.5)
        self.assertEqual(report.r_values.size + report.excluded_degenerate, 30)
        with self.assertRaises(ValueError):
            level_statistics(self.H, 'full', inner_fraction=0.0)

    def test_save_report(self) -> None:
        report = level_statistics(self.H, 'full', n_bins=4)
        with tempfile.TemporaryDirectory() as tmp:
            json_path, csv_path = save_level_report(report, tmp, {'seed': 0})
            with open(json_path, encoding='utf-8') as file:
                summary = json.load(file)
            with open(csv_path, encoding='utf-8') as file:
                lines = file.read().splitlines()
            self.assertEqual(os.path.basename(csv_path), 'levels_histogram.csv')
        self.assertAlmostEqual(summary['mean_r'], report.mean_r)
        self.assertEqual(summary['seed'], 0)
        self.assertEqual(lines[0], '# seed: 0')
        self.assertEqual(lines[1], 'bin_lo,bin_hi,density')
        self.assertEqual(len(lines), 2 + 4)


if __name__ == '__main__':
    unittest.main()
