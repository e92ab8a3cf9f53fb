import os
import tempfile
import unittest
import numpy as np
from starkmbl import CouplingMatrix, FieldProfile, CouplingFileError, DimensionMismatchError, \
    ApplyPath, power_law_couplings, nearest_neighbor_couplings, load_couplings, save_couplings, \
    fit_power_law, linear_field, quadratic_field, experimental_bias, save_field_profile, \
    field_diagonal, build_ising, build_xy_sector, random_state


class TestCouplings(unittest.TestCase):

    def test_power_law(self) -> None:
        c = power_law_couplings(5, 1.3)
        self.assertAlmostEqual(c.j[0, 1], 1.0)
        self.assertAlmostEqual(c.j[0, 2], 2 ** -1.3, places=12)
        self.assertAlmostEqual(c.j[0, 2], 0.40613, places=5)
        self.assertEqual(c.j[3, 3], 0.0)
        np.testing.assert_array_equal(c.j, c.j.T)
        with self.assertRaises(ValueError):
            power_law_couplings(5, 0.0)

    def test_nearest_neighbor(self) -> None:
        c = nearest_neighbor_couplings(4)
        self.assertEqual(list(c.pairs()), [(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)])

    def test_validation(self) -> None:
        with self.assertRaises(ValueError):
            CouplingMatrix([[0, 1], [0.5, 0]])
        with self.assertRaises(ValueError):
            CouplingMatrix([[1, 1], [1, 0]])
        with self.assertRaises(ValueError):
            CouplingMatrix([[0, 1, 2], [1, 0, 3]])
        with self.assertRaises(ValueError):
            CouplingMatrix([[0, np.nan], [np.nan, 0]])

    def test_read_only(self) -> None:
        c = nearest_neighbor_couplings(3)
        with self.assertRaises(ValueError):
            c.j[0, 1] = 5.0

    def test_fit_power_law(self) -> None:
        j0, alpha = fit_power_law(power_law_couplings(8, 1.3, 2.0))
        self.assertAlmostEqual(j0, 2.0, places=8)
        self.assertAlmostEqual(alpha, 1.3, places=8)
        with self.assertRaises(ValueError):
            fit_power_law(nearest_neighbor_couplings(5))


class TestCouplingFiles(unittest.TestCase):

    def setUp(self) -> None:
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def _write(self, text: str) -> str:
        path = os.path.join(self.tmp.name, 'couplings.txt')
        with open(path, 'w', encoding='utf-8') as file:
            file.write(text)
        return path

    def test_round_trip(self) -> None:
        c = power_law_couplings(4, 1.1)
        path = save_couplings(c, os.path.join(self.tmp.name, 'c.txt'), comment='alpha 1.1')
        self.assertEqual(load_couplings(path), c)

    def test_comments_and_blank_lines(self) -> None:
        path = self._write('# two sites\n\n2\n0 0.5  # row one\n0.5 0\n')
        c = load_couplings(path)
        self.assertEqual(c.n, 2)
        self.assertEqual(c.j[0, 1], 0.5)

    def test_bad_row_reports_line(self) -> None:
        path = self._write('# header\n3\n0 1 0\n1 0\n0 1 0\n')
        with self.assertRaises(CouplingFileError) as ctx:
            load_couplings(path)
        self.assertEqual(ctx.exception.line, 4)
        self.assertIn(':4', str(ctx.exception))

    def test_bad_number(self) -> None:
        path = self._write('2\n0 x\n1 0\n')
        with self.assertRaises(CouplingFileError) as ctx:
            load_couplings(path)
        self.assertEqual(ctx.exception.line, 2)

    def test_missing_and_extra_rows(self) -> None:
        with self.assertRaises(CouplingFileError):
            load_couplings(self._write('3\n0 1 0\n1 0 1\n'))
        with self.assertRaises(CouplingFileError) as ctx:
            load_couplings(self._write('2\n0 1\n1 0\n0 0\n'))
        self.assertEqual(ctx.exception.line, 4)

    def test_asymmetric(self) -> None:
        with self.assertRaises(CouplingFileError):
            load_couplings(self._write('2\n0 1\n0.9 0\n'))

    def test_missing_file(self) -> None:
        with self.assertRaises(CouplingFileError):
            load_couplings(os.path.join(self.tmp.name, 'nope.txt'))


class TestFields(unittest.TestCase):

    def test_linear(self) -> None:
        f = linear_field(4, 5.0, 2.0)
        np.testing.assert_allclose(f.bz, [5, 7, 9, 11])
        np.testing.assert_allclose(f.local_slopes(), [2, 2, 2, 2])
        self.assertEqual(f.bz0, 5.0)

    def test_quadratic(self) -> None:
        n, gamma = 7, 1.8
        f = quadratic_field(n, 1.0, gamma)
        np.testing.assert_allclose(f.bz, f.bz[::-1])
        self.assertEqual(int(np.argmin(f.bz)), 3)
        self.assertAlmostEqual(f.bz[3], 1.0)
        self.assertAlmostEqual(f.local_slopes()[-1], gamma * (n - 2) / (n - 1))
        shifted = quadratic_field(n, 0.0, gamma, center_offset=1.0)
        self.assertEqual(int(np.argmin(shifted.bz)), 4)

    def test_deltas(self) -> None:
        f = linear_field(3, 1.0, 1.0).with_deltas([0.1, 0.0, -0.1])
        np.testing.assert_allclose(f.bz, [1.1, 2.0, 2.9])
        with self.assertRaises(DimensionMismatchError):
            f.with_deltas([0.0, 0.0])

    def test_experimental_bias(self) -> None:
        self.assertAlmostEqual(experimental_bias(0.0), 4.4)
        self.assertAlmostEqual(experimental_bias(5.0), 17.6)

    def test_save_profile(self) -> None:
        with tempfile.TemporaryDirectory() as tmp:
            path = save_field_profile(linear_field(2, 0.5, 1.0), os.path.join(tmp, 'f.csv'), {'g': 1})
            with open(path, encoding='utf-8') as file:
                lines = file.read().splitlines()
        self.assertEqual(lines, ['# g: 1', 'site,bz_over_j0', '1,0.5', '2,1.5'])

    def test_field_diagonal(self) -> None:
        np.testing.assert_allclose(field_diagonal([1.0, 2.0]), [-3, -1, 1, 3])


class TestHamiltonians(unittest.TestCase):

    def test_two_site_ising(self) -> None:
        H = build_ising(nearest_neighbor_couplings(2), FieldProfile(0.0, [0.0, 0.0]))
        expected = np.zeros((4, 4))
        expected[0, 3] = expected[3, 0] = expected[1, 2] = expected[2, 1] = 1.0
        np.testing.assert_allclose(H.to_dense(), expected)

    def test_ising_diagonal(self) -> None:
        H = build_ising(nearest_neighbor_couplings(2), FieldProfile(0.0, [1.0, 3.0]))
        np.testing.assert_allclose(np.diag(H.to_dense()), [-4, -2, 2, 4])
        self.assertAlmostEqual(H.trace(), 0.0)

    def test_hermitian(self) -> None:
        H = build_ising(power_law_couplings(6, 1.3), linear_field(6, 5.0, 1.0))
        dense = H.to_dense()
        np.testing.assert_allclose(dense, dense.T)

    def test_matrix_free_agrees(self) -> None:
        c, f = power_law_couplings(8, 1.3), linear_field(8, 5.0, 0.7)
        stored = build_ising(c, f, path='stored')
        free = build_ising(c, f, path='matrix_free')
        self.assertEqual(free.path, ApplyPath.MATRIX_FREE)
        psi = random_state(8, np.random.default_rng(11))
        np.testing.assert_allclose(free.apply(psi), stored.apply(psi), atol=1e-12)
        np.testing.assert_allclose(free.with_path('stored').apply(psi), stored.apply(psi), atol=1e-12)

    def test_auto_path(self) -> None:
        self.assertEqual(build_ising(power_law_couplings(4, 1.3), linear_field(4, 0, 1)).path,
                         ApplyPath.STORED)
        self.assertEqual(build_ising(power_law_couplings(12, 1.3), linear_field(12, 0, 1)).path,
                         ApplyPath.MATRIX_FREE)

    def test_shared_instance(self) -> None:
        c, f = power_law_couplings(5, 1.3), linear_field(5, 5.0, 2.4)
        first = build_ising(c, f)
        self.assertIs(build_ising(power_law_couplings(5, 1.3), linear_field(5, 5.0, 2.4)), first)
        self.assertIsNot(build_ising(c, linear_field(5, 5.0, 2.5)), first)

    def test_operators_hold_no_lazy_state(self) -> None:
        c, f = power_law_couplings(5, 1.3), linear_field(5, 5.0, 2.4)
        stored = build_ising(c, f, path='stored')
        state = dict(vars(stored))
        self.assertIs(stored.to_csr(), stored.to_csr())
        stored.apply(random_state(5, np.random.default_rng(0)))
        self.assertEqual(vars(stored).keys(), state.keys())
        self.assertTrue(all(vars(stored)[k] is v for k, v in state.items()))
        free = build_ising(c, f, path='matrix_free')
        self.assertIsNone(free._offdiag)
        np.testing.assert_allclose(free.to_dense(), stored.to_dense())
        self.assertIsNone(free._offdiag)
        self.assertFalse(hasattr(stored, 'cache'))

    def test_mismatch(self) -> None:
        with self.assertRaises(DimensionMismatchError):
            build_ising(power_law_couplings(4, 1.3), linear_field(5, 0, 1))
        H = build_ising(power_law_couplings(4, 1.3), linear_field(4, 0, 1))
        with self.assertRaises(DimensionMismatchError):
            H.apply(np.zeros(8))

    def test_expectation(self) -> None:
        H = build_ising(power_law_couplings(3, 1.3), FieldProfile(0.0, [1.0, 2.0, 3.0]))
        psi = np.zeros(8, dtype=complex)
        psi[0] = 1.0
        self.assertAlmostEqual(H.expectation(psi), -6.0)
        psi = random_state(3, np.random.default_rng(0))
        self.assertAlmostEqual(H.expectation(psi), float(np.vdot(psi, H.to_dense() @ psi).real))
        np.testing.assert_allclose(H.as_linear_operator().matvec(psi), H.apply(psi))

    def test_xy_two_sites(self) -> None:
        H = build_xy_sector(nearest_neighbor_couplings(2), FieldProfile(0.0, [0.0, 0.0]), 0)
        np.testing.assert_array_equal(H.basis, [1, 2])
        np.testing.assert_allclose(H.to_dense(), [[0, 0.5], [0.5, 0]])
        self.assertTrue(H.is_sector)

    def test_xy_field(self) -> None:
        H = build_xy_sector(nearest_neighbor_couplings(2), FieldProfile(0.0, [1.0, 3.0]), 0)
        # Basis 1 is site 1 up, basis 2 is site 2 up
        np.testing.assert_allclose(np.diag(H.to_dense()), [-2.0, 2.0])

    def test_xy_matches_full_space(self) -> None:
        c, f = power_law_couplings(5, 1.3), linear_field(5, 1.0, 0.5)
        H = build_xy_sector(c, f, -1)
        full = np.diag(field_diagonal(f.bz))
        sx = np.array([[0, 1], [1, 0]])
        sy = np.array([[0, 1j], [-1j, 0]])
        for a, b, jab in c.pairs():
            for pauli in (sx, sy):
                op = np.ones((1, 1))
                for site in range(4, -1, -1):
                    op = np.kron(op, pauli if site in (a, b) else np.eye(2))
                full = full + jab / 4 * op
        block = full[np.ix_(H.basis, H.basis)]
        np.testing.assert_allclose(H.to_dense(), block.real, atol=1e-12)
        np.testing.assert_allclose(block.imag, 0.0, atol=1e-12)

    def test_xy_offset_shifts_by_magnetization(self) -> None:
        c = power_law_couplings(6, 1.3)
        for mz in (-4, 0, 2):
            base = np.linalg.eigvalsh(build_xy_sector(c, linear_field(6, 1.0, 0.7), mz).to_dense())
            shifted = np.linalg.eigvalsh(build_xy_sector(c, linear_field(6, 1.0 + 0.35, 0.7), mz).to_dense())
            np.testing.assert_allclose(shifted - base, 0.35 * mz, atol=1e-10)

    def test_ising_band_is_xy_with_doubled_couplings(self) -> None:
        c = power_law_couplings(6, 1.13)
        for g in (0.0, 1.0):
            f = linear_field(6, 50.0, g)
            xy = np.linalg.eigvalsh(build_xy_sector(c.scaled(2), f, 0).to_dense())
            ising = np.linalg.eigvalsh(build_ising(c, f).to_dense())
            band = ising[np.abs(ising - xy.mean()) < 50.0]
            self.assertEqual(band.size, 20)
            np.testing.assert_allclose(band, xy, atol=0.01)
            if g == 0.0:
                half = np.linalg.eigvalsh(build_xy_sector(c, f, 0).to_dense())
                np.testing.assert_allclose(band, 2 * half, atol=0.01)


if __name__ == '__main__':
    unittest.main()
