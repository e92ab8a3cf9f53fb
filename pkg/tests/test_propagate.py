import math
import unittest
import weakref
from unittest import mock
import numpy as np
import scipy.linalg
from starkmbl import CouplingMatrix, FieldProfile, KrylovSettings, TrotterSettings, NumericalError, \
    DimensionMismatchError, SpinPattern, power_law_couplings, linear_field, build_ising, \
    product_state, random_state, site_magnetizations, krylov_evolve, SpectralPropagator, \
    make_propagator, evolve_series, diagonal_phase, TrotterCycle, trotter_cycle, averaged_hamiltonian, \
    trotter_instantaneous, trotter_cycle_defect, rotation_matrix, rotate_site, rotate_global, \
    field_diagonal
from starkmbl import propagate as propagate_module


SIGMA = {
    'x': np.array([[0, 1], [1, 0]], dtype=complex),
    'y': np.array([[0, 1j], [-1j, 0]]),
    'z': np.diag([-1.0, 1.0]).astype(complex),
}


class TestKrylov(unittest.TestCase):
    H = None

    @classmethod
    def setUpClass(cls) -> None:
        cls.H = build_ising(power_law_couplings(6, 1.3), linear_field(6, 5.0, 0.8))
        cls.psi = random_state(6, np.random.default_rng(2))

    def test_matches_expm(self) -> None:
        for t in (0.05, 1.7):
            exact = scipy.linalg.expm(-1j * t * self.H.to_dense()) @ self.psi
            self.assertLess(np.linalg.norm(krylov_evolve(self.H, self.psi, t) - exact), 1e-8)

    def test_matrix_free(self) -> None:
        H = build_ising(power_law_couplings(6, 1.3), linear_field(6, 5.0, 0.8), path='matrix_free')
        exact = scipy.linalg.expm(-1j * 2.0 * H.to_dense()) @ self.psi
        self.assertLess(np.linalg.norm(krylov_evolve(H, self.psi, 2.0) - exact), 1e-8)

    def test_norm_preserved(self) -> None:
        psi = krylov_evolve(self.H, self.psi, 3.0)
        self.assertAlmostEqual(np.linalg.norm(psi), 1.0, places=10)

    def test_zero_time(self) -> None:
        np.testing.assert_array_equal(krylov_evolve(self.H, self.psi, 0.0), self.psi)

    def test_eigenstate_breakdown(self) -> None:
        H = build_ising(CouplingMatrix(np.zeros((3, 3))), FieldProfile(0.0, [1.0, 2.0, 3.0]))
        psi = product_state('010')
        evolved = krylov_evolve(H, psi, 1.0)
        np.testing.assert_allclose(evolved, np.exp(-1j * H.diagonal[2]) * psi, atol=1e-12)

    def test_invalid_arguments(self) -> None:
        with self.assertRaises(ValueError):
            krylov_evolve(self.H, self.psi, -1.0)
        with self.assertRaises(DimensionMismatchError):
            krylov_evolve(self.H, np.ones(8), 1.0)

    def test_non_convergence(self) -> None:
        settings = KrylovSettings(subspace_dim=2, tolerance=1e-15, max_substep=1.0, min_substep=0.5)
        with self.assertRaises(NumericalError):
            krylov_evolve(self.H, self.psi, 1.0, settings)

    def test_substep_grows_back(self) -> None:
        H = build_ising(power_law_couplings(4, 1.3), linear_field(4, 0.5, 0.2))
        psi = random_state(4, np.random.default_rng(5))
        lanczos_step = propagate_module._lanczos_step
        steps = []

        def stiff_once(H, psi, dt, settings):
            steps.append(dt)
            if len(steps) == 1:
                return psi, math.inf, settings.subspace_dim
            return lanczos_step(H, psi, dt, settings)

        with mock.patch.object(propagate_module, '_lanczos_step', side_effect=stiff_once):
            evolved = krylov_evolve(H, psi, 1.0)
        self.assertEqual(steps[:4], [0.1, 0.05, 0.05, 0.1])
        exact = scipy.linalg.expm(-1j * H.to_dense()) @ psi
        self.assertLess(np.linalg.norm(evolved - exact), 1e-8)

    def test_energy_conserved(self) -> None:
        e0 = self.H.expectation(self.psi)
        for _, psi in evolve_series(self.H, self.psi, [0.0, 2.5, 5.0, 10.0], KrylovSettings(),
                                    lambda psi, t: krylov_evolve(self.H, psi, t)):
            self.assertLess(abs(self.H.expectation(psi) - e0), 1e-8 * max(1.0, abs(e0)))


class TestSpectralPropagator(unittest.TestCase):

    def test_agrees_with_krylov(self) -> None:
        H = build_ising(power_law_couplings(5, 1.3), linear_field(5, 2.0, 1.0))
        psi = random_state(5, np.random.default_rng(4))
        spectral = SpectralPropagator(H)
        np.testing.assert_allclose(spectral(psi, 2.2), krylov_evolve(H, psi, 2.2), atol=1e-8)

    def test_cached_per_operator(self) -> None:
        H = build_ising(power_law_couplings(4, 1.3), linear_field(4, 2.0, 1.0))
        propagator = make_propagator(H)
        self.assertIsInstance(propagator, SpectralPropagator)
        self.assertIs(make_propagator(H), propagator)
        psi = product_state('0110')
        expected = scipy.linalg.expm(-0.3j * H.to_dense()) @ psi
        ref = weakref.ref(H)
        del H
        self.assertIsNone(ref())
        np.testing.assert_allclose(propagator(psi, 0.3), expected, atol=1e-10)

    def test_evolve_series(self) -> None:
        H = build_ising(power_law_couplings(4, 1.3), linear_field(4, 2.0, 1.0))
        psi0 = product_state('0101')
        series = list(evolve_series(H, psi0, [0.0, 0.5, 1.5]))
        self.assertEqual([t for t, _ in series], [0.0, 0.5, 1.5])
        np.testing.assert_array_equal(series[0][1], psi0)
        exact = scipy.linalg.expm(-1.5j * H.to_dense()) @ psi0
        np.testing.assert_allclose(series[-1][1], exact, atol=1e-10)
        with self.assertRaises(ValueError):
            list(evolve_series(H, psi0, [1.0, 0.5]))


class TestTrotter(unittest.TestCase):

    @classmethod
    def setUpClass(cls) -> None:
        cls.couplings = power_law_couplings(4, 1.3)
        cls.f_local = linear_field(4, 0.5, 1.0)
        cls.psi = random_state(4, np.random.default_rng(8))

    def test_commuting_cycle_is_exact(self) -> None:
        zero = CouplingMatrix(np.zeros((4, 4)))
        settings = TrotterSettings(0.3, 0.2)
        self.assertLess(trotter_cycle_defect(zero, self.f_local, 1.5, settings, self.psi), 1e-10)

    def test_averaged_hamiltonian(self) -> None:
        settings = TrotterSettings(0.3, 0.1)
        H = averaged_hamiltonian(self.couplings, self.f_local, 2.0, settings)
        np.testing.assert_allclose(H.couplings.j, 0.75 * self.couplings.j)
        np.testing.assert_allclose(H.field.bz, 2.0 + 0.25 * self.f_local.bz)

    def test_instantaneous_round_trip(self) -> None:
        settings = TrotterSettings(0.2, 0.1)
        target = linear_field(4, 3.0, 1.2)
        c, f_local, bz0 = trotter_instantaneous(self.couplings, target, settings)
        self.assertEqual(bz0, 3.0)
        H = averaged_hamiltonian(c, f_local, bz0, settings)
        np.testing.assert_allclose(H.to_dense(), build_ising(self.couplings, target).to_dense(), atol=1e-12)

    def test_defect_shrinks_with_step(self) -> None:
        f_local = linear_field(4, 0.0, 0.3)
        coarse = trotter_cycle_defect(self.couplings, f_local, 0.2, TrotterSettings(0.04, 0.04), self.psi)
        fine = trotter_cycle_defect(self.couplings, f_local, 0.2, TrotterSettings(0.02, 0.02), self.psi)
        self.assertGreater(coarse, 0.0)
        self.assertLess(fine, coarse / 4)

    def test_cycle_matches_dense_segments(self) -> None:
        settings = TrotterSettings(0.15, 0.05)
        cycle = trotter_cycle(self.couplings, self.f_local, 1.0, settings)
        coupling = build_ising(self.couplings, FieldProfile(1.0, np.zeros(4))).to_dense()
        half = np.exp(-0.5j * 0.05 * field_diagonal(self.f_local.bz + 1.0))
        expected = half * (scipy.linalg.expm(-0.15j * coupling) @ (half * self.psi))
        np.testing.assert_allclose(cycle.step(self.psi), expected, atol=1e-9)
        with self.assertRaises(DimensionMismatchError):
            trotter_cycle(self.couplings, linear_field(5, 0.5, 1.0), 1.0, settings)

    def test_cycle_repeats(self) -> None:
        cycle = TrotterCycle(self.couplings, self.f_local, 1.0, TrotterSettings(0.1, 0.1, cycles=3))
        once = cycle.step(cycle.step(cycle.step(self.psi)))
        np.testing.assert_allclose(cycle(self.psi), once, atol=1e-12)
        np.testing.assert_array_equal(cycle(self.psi, 0), self.psi)

    def test_diagonal_phase(self) -> None:
        psi = np.ones(2, dtype=complex)
        np.testing.assert_allclose(diagonal_phase(psi, np.array([0.0, math.pi]), 1.0), [1, -1], atol=1e-12)


class TestRotations(unittest.TestCase):

    def test_matches_exponential(self) -> None:
        for axis, sigma in SIGMA.items():
            expected = scipy.linalg.expm(-0.5j * 0.7 * sigma)
            np.testing.assert_allclose(rotation_matrix(axis, 0.7), expected, atol=1e-12)
            u = rotation_matrix(axis, 1.1)
            np.testing.assert_allclose(u.conj().T @ u, np.eye(2), atol=1e-12)

    def test_pi_flip(self) -> None:
        psi = rotate_site(product_state('000'), 2, 'x', math.pi)
        probabilities = np.abs(psi) ** 2
        self.assertAlmostEqual(probabilities[product_state('010').argmax()], 1.0)

    def test_global_y_rotation(self) -> None:
        angle = 0.075 * math.pi
        mags = site_magnetizations(rotate_global(product_state(SpinPattern.neel(4)), 'y', angle))
        c = math.cos(angle)
        self.assertAlmostEqual(c, 0.9724, places=4)
        np.testing.assert_allclose(mags, [-c, c, -c, c], atol=1e-12)

    def test_z_rotation_keeps_magnetizations(self) -> None:
        psi = random_state(3, np.random.default_rng(1))
        np.testing.assert_allclose(site_magnetizations(rotate_site(psi, 3, 'z', 0.4)),
                                   site_magnetizations(psi), atol=1e-12)

    def test_site_out_of_range(self) -> None:
        with self.assertRaises(ValueError):
            rotate_site(product_state('00'), 3, 'x', 1.0)


if __name__ == '__main__':
    unittest.main()
