from unittest import TestCase
import numpy as np
import numpy.testing as npt
import dyadmhd.deterministic as mdl
from dyadmhd import shells


class TestDrifts(TestCase):
    def setUp(self):
        self.p = shells.ModelParams(lam=2.0, theta=1.0, sigma=1.0, n_shells=6)
        self.s_ab = shells.random_state(
            np.random.default_rng(0), 6, coords=shells.Coords.AB, size=20, rho=0.5
        )

    def test_elsasser_equivalence(self):
        lhs = shells.to_elsasser(mdl.drift_ab(self.s_ab, self.p))
        rhs = mdl.drift_pm(shells.to_elsasser(self.s_ab), self.p)
        npt.assert_allclose(lhs.first, rhs.first, atol=1e-12)
        npt.assert_allclose(lhs.second, rhs.second, atol=1e-12)

    def test_conserved_rates(self):
        # d/dt of energy and cross helicity vanish identically.
        a, b = self.s_ab.first, self.s_ab.second
        da, db = mdl.drift_ab_arrays(a, b, self.p)
        npt.assert_allclose(np.sum(a * da + b * db, axis=-1), 0.0, atol=1e-12)
        npt.assert_allclose(np.sum(a * db + b * da, axis=-1), 0.0, atol=1e-12)

        pm = shells.to_elsasser(self.s_ab)
        dP, dM = mdl.drift_pm_arrays(pm.first, pm.second, self.p)
        npt.assert_allclose(np.sum(pm.first * dP, axis=-1), 0.0, atol=1e-12)
        npt.assert_allclose(np.sum(pm.second * dM, axis=-1), 0.0, atol=1e-12)

    def test_euler_model(self):
        # With b = 0 the magnetic field stays zero.
        s = shells.ShellState(self.s_ab.first[0], np.zeros(6), shells.Coords.AB)
        npt.assert_array_equal(mdl.drift_ab(s, self.p).second, np.zeros(6))

    def test_zero_minus_field(self):
        # Every Elsässer term carries an M factor.
        s = shells.ShellState(np.ones(6), np.zeros(6))
        d = mdl.drift_pm(s, self.p)
        npt.assert_array_equal(d.first, np.zeros(6))
        npt.assert_array_equal(d.second, np.zeros(6))

    def test_coords_checked(self):
        with self.assertRaises(shells.CoordinateMismatchError):
            mdl.drift_pm(self.s_ab, self.p)


class TestIntegration(TestCase):
    def test_rk4_conservation(self):
        p = shells.ModelParams(lam=2.0, theta=1.0, sigma=1.0, n_shells=8)
        s0 = shells.random_state(
            np.random.default_rng(3), 8, total_energy=0.1, coords=shells.Coords.AB, rho=0.5
        )
        states = mdl.rk4_integrate(s0, p, 1e-4, 1000, record_stride=200)
        self.assertEqual(len(states), 6)
        self.assertIs(states[0], s0)
        for _s in states[1:]:
            self.assertAlmostEqual(shells.energy(_s), shells.energy(s0), places=9)
            self.assertAlmostEqual(shells.cross_helicity(_s), shells.cross_helicity(s0), places=9)

    def test_rk4_final_state_recorded(self):
        p = shells.ModelParams(n_shells=4)
        states = mdl.rk4_integrate(shells.point_mass(4), p, 1e-3, 7, record_stride=5)
        self.assertEqual(len(states), 3)

    def test_invalid_step(self):
        with self.assertRaises(ValueError):
            mdl.rk4_integrate(shells.point_mass(4), shells.ModelParams(n_shells=4), 0.0, 10)

    def test_blowup(self):
        with self.assertRaisesRegex(mdl.BlowUpError, "step 3"):
            mdl.check_blowup(3, np.array([1.0, np.nan]))
        with self.assertRaises(mdl.BlowUpError) as ctx:
            mdl.check_blowup(1, np.array([[1.0, 1.0], [1e13, 0.0], [0.0, 0.0]]))
        self.assertEqual(ctx.exception.paths, [1])
        mdl.check_blowup(1, np.ones((2, 3)), np.zeros((2, 3)))

    def test_euler_step(self):
        p = shells.ModelParams(n_shells=4)
        s = shells.point_mass(4)
        out = mdl.euler_step(s, p, 1e-3)
        d = mdl.drift_pm(s, p)
        npt.assert_allclose(out.first, s.first + 1e-3 * d.first)
