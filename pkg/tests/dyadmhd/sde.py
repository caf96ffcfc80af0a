from unittest import TestCase
import numpy as np
import numpy.testing as npt
import dyadmhd.sde as mdl
from dyadmhd import kolmogorov, shells
from dyadmhd.birth_death import make_rates
from dyadmhd.rng import PathStreams, path_stream


def _spec(**kwargs):
    kwargs = {
        "scheme": mdl.Scheme.LINEAR,
        "params": shells.ModelParams(lam=2.0, theta=1.0, sigma=1.0, n_shells=4),
        "s0": shells.point_mass(4, 0.1),
        "dt": 1e-4,
        "t_end": 0.01,
        "n_paths": 10,
        "master_seed": 7,
        "record_stride": 20,
        "batch_size": 4,
        **kwargs,
    }
    return mdl.EnsembleSpec(**kwargs)


class TestSteps(TestCase):
    def setUp(self):
        self.p = shells.ModelParams(lam=2.0, theta=1.0, sigma=1.0, n_shells=4)

    def test_sample_noise(self):
        inc = mdl.sample_noise(path_stream(0, 0), self.p, 0.01)
        self.assertEqual(inc.dWp.shape, (4,))

        # A batch of one consumes the stream like an unbatched draw.
        batched = mdl.sample_noise(path_stream(0, 0), self.p, 0.01, size=1)
        npt.assert_array_equal(batched.dWp[0], inc.dWp)
        npt.assert_array_equal(batched.dWm[0], inc.dWm)

        with self.assertRaises(ValueError):
            mdl.sample_noise(path_stream(0, 0), self.p, 0.0)

        streams = PathStreams(0, 2, 3)
        per_path = mdl.sample_noise(streams, self.p, 0.01, size=3)
        self.assertEqual(per_path.dWp.shape, (3, 4))
        own = mdl.sample_noise(path_stream(0, 3), self.p, 0.01)
        npt.assert_allclose(per_path.dWp[1], own.dWp, rtol=1e-14)
        npt.assert_allclose(per_path.dWm[1], own.dWm, rtol=1e-14)
        with self.assertRaises(ValueError):
            mdl.sample_noise(streams, self.p, 0.01, size=2)

    def test_ito_without_noise(self):
        s = shells.point_mass(4)
        inc = mdl.NoiseIncrements(np.zeros(4), np.zeros(4), 1e-3)
        out = mdl.step_ito(s, self.p.replace(sigma=0.0), inc)
        d = mdl.drift_pm_arrays(s.first, s.second, self.p)
        npt.assert_allclose(out.first, s.first + 1e-3 * d[0])
        npt.assert_allclose(out.second, s.second + 1e-3 * d[1])

    def test_linear_without_increments(self):
        s = shells.geometric_decay(4, 0.5)
        inc = mdl.NoiseIncrements(np.zeros(4), np.zeros(4), 1e-3)
        out = mdl.step_linear(s, self.p, inc)
        npt.assert_allclose(out.first, s.first * (1 - self.p.ito_damping * 1e-3))

    def test_noise_term_boundaries(self):
        x = np.ones(4)
        dW = np.ones(4)
        lower, upper = self.p.couplings
        out = mdl.noise_term(x, dW, self.p)
        self.assertAlmostEqual(out[0], -upper[0])
        self.assertAlmostEqual(out[-1], lower[-1])

    def test_heun_energy(self):
        p = self.p.replace(sigma=0.5)
        rng = path_stream(1, 0)
        P = np.broadcast_to(shells.point_mass(4).first, (10, 4)).copy()
        M = P.copy()
        for _ in range(1000):
            inc = mdl.sample_noise(rng, p, 1e-5, 10)
            P, M = mdl.heun_arrays(P, M, inc.dWp, inc.dWm, 1e-5, p)
        energy = 0.5 * np.sum(P**2 + M**2, axis=-1)
        npt.assert_allclose(energy, 1.0, atol=1e-3)

    def test_driving_increments(self):
        P, M = np.ones(4), 2 * np.ones(4)
        dWp, dWm = np.zeros(4), np.zeros(4)
        dU, dV = mdl.driving_increments(P, M, dWp, dWm, 0.1, self.p, mdl.Scheme.LINEAR)
        npt.assert_array_equal(dU, dWm)
        dU, dV = mdl.driving_increments(P, M, dWp, dWm, 0.1, self.p, mdl.Scheme.ITO)
        npt.assert_allclose(dU, 0.1 * P)
        npt.assert_allclose(dV, 0.1 * M)
        with self.assertRaises(ValueError):
            mdl.driving_increments(P, M, dWp, dWm, 0.1, self.p, mdl.Scheme.DETERMINISTIC)

    def test_coords_checked(self):
        s = shells.ShellState(np.ones(4), np.ones(4), shells.Coords.AB)
        inc = mdl.NoiseIncrements(np.zeros(4), np.zeros(4), 1e-3)
        with self.assertRaises(shells.CoordinateMismatchError):
            mdl.step_strat_heun(s, self.p, inc)


class TestIntegrate(TestCase):
    def setUp(self):
        self.p = shells.ModelParams(lam=2.0, theta=1.0, sigma=1.0, n_shells=4)
        self.s0 = shells.point_mass(4, 0.1)

    def test_records(self):
        out = mdl.integrate(self.s0, self.p, "ito", 1e-3, 25, path_stream(0, 0), record_stride=10)
        npt.assert_allclose(out.times, [0.0, 0.01, 0.02, 0.025])
        self.assertEqual(out.P.shape, (4, 4))
        self.assertEqual(out.z1.shape, (4,))
        npt.assert_array_equal(out.P[0], self.s0.first)

    def test_batch_of_one(self):
        single = mdl.integrate(self.s0, self.p, "strat_heun", 1e-3, 10, path_stream(2, 0))
        s_batch = shells.ShellState(self.s0.first[None, :], self.s0.second[None, :])
        batch = mdl.integrate(s_batch, self.p, "strat_heun", 1e-3, 10, path_stream(2, 0))
        npt.assert_array_equal(batch.P[:, 0], single.P)
        npt.assert_array_equal(batch.qv2[:, 0], single.qv2)

    def test_accumulators(self):
        dt = 1e-3
        out = mdl.integrate(self.s0, self.p, mdl.Scheme.LINEAR, dt, 1, path_stream(5, 0))
        inc = mdl.sample_noise(path_stream(5, 0), self.p, dt)
        P0, M0 = self.s0.first, self.s0.second
        self.assertAlmostEqual(out.z1[1], np.sum(P0 * inc.dWm))
        self.assertAlmostEqual(out.z2[1], np.sum(M0 * inc.dWp))
        self.assertAlmostEqual(out.qv1[1], np.sum(P0**2) * dt)
        self.assertEqual(out.z1[0], 0.0)

    def test_requires_noise(self):
        p = self.p.replace(sigma=0.0)
        with self.assertRaises(shells.InvalidParameterError):
            mdl.integrate(self.s0, p, mdl.Scheme.ITO, 1e-3, 5, path_stream(0, 0))
        out = mdl.integrate(self.s0, p, mdl.Scheme.DETERMINISTIC, 1e-3, 5, None)
        self.assertEqual(len(out.times), 6)

    def test_invalid_scheme(self):
        with self.assertRaises(ValueError):
            mdl.integrate(self.s0, self.p, "milstein", 1e-3, 5, path_stream(0, 0))

    def test_linear_second_moments(self):
        # Ensemble second moments of the linear scheme equal the exact discrete moments.
        p = shells.ModelParams(lam=2.0, theta=1.0, sigma=1.0, n_shells=3)
        s0 = shells.point_mass(3)
        n_paths, dt, steps = 20_000, 1e-3, 50
        batch = shells.ShellState(
            np.broadcast_to(s0.first, (n_paths, 3)), np.broadcast_to(s0.second, (n_paths, 3))
        )
        out = mdl.integrate(batch, p, mdl.Scheme.LINEAR, dt, steps, path_stream(11, 0), steps)
        energy = out.P[-1] ** 2 + out.M[-1] ** 2
        mean, se = mdl.mean_and_se(energy, axis=0)
        target = 2.0 * kolmogorov.linear_em_moments(shells.normalized_profile(s0), p, dt, steps)[-1]
        self.assertTrue(np.all(np.abs(mean - target) <= 5 * se + 1e-12))


class TestEnsemble(TestCase):
    def test_batches(self):
        self.assertEqual(
            _spec(n_paths=5, batch_size=2).batches(), [(0, 0, 2), (1, 2, 2), (2, 4, 1)]
        )
        self.assertEqual(_spec(t_end=0.01, dt=1e-4).steps, 100)

    def test_thread_invariance(self):
        serial = mdl.run_ensemble(_spec(scheme=mdl.Scheme.ITO))
        threaded = mdl.run_ensemble(_spec(scheme=mdl.Scheme.ITO, threads=3))
        for _name in ("P", "M", "z1", "z2", "qv1", "qv2"):
            npt.assert_array_equal(getattr(serial.paths, _name), getattr(threaded.paths, _name))

    def test_batch_streams(self):
        result = mdl.run_ensemble(_spec(n_paths=6, batch_size=3))
        s0 = _spec().s0
        second = mdl.integrate(
            shells.ShellState(
                np.broadcast_to(s0.first, (3, 4)), np.broadcast_to(s0.second, (3, 4))
            ),
            _spec().params,
            mdl.Scheme.LINEAR,
            1e-4,
            100,
            PathStreams(7, 3, 3),
            20,
        )
        npt.assert_array_equal(result.paths.P[:, 3:], second.P)

    def test_batch_size_invariance(self):
        spec = _spec(scheme=mdl.Scheme.ITO, n_paths=7)
        a = mdl.run_ensemble(spec)
        for _size in (1, 3, 7):
            b = mdl.run_ensemble(_spec(scheme=mdl.Scheme.ITO, n_paths=7, batch_size=_size))
            for _name in ("P", "M", "z1", "z2", "qv1", "qv2"):
                npt.assert_array_equal(getattr(a.paths, _name), getattr(b.paths, _name))

        # Path 5 on its own, drawing from its own stream.
        alone = mdl.integrate(spec.s0, spec.params, mdl.Scheme.ITO, 1e-4, 100, path_stream(7, 5), 20)
        npt.assert_allclose(a.paths.P[:, 5], alone.P, rtol=1e-12, atol=1e-15)
        npt.assert_allclose(a.paths.M[:, 5], alone.M, rtol=1e-12, atol=1e-15)

    def test_summary(self):
        result = mdl.run_ensemble(_spec(scheme=mdl.Scheme.DETERMINISTIC, n_paths=3))
        s = result.summary
        self.assertEqual(s.n_paths, 3)
        self.assertEqual(s.P2_mean.shape, (len(result.times), 4))
        npt.assert_allclose(s.energy_se, 0.0, atol=1e-15)
        npt.assert_allclose(s.energy_mean, 0.1, rtol=1e-8)
        npt.assert_allclose(result.energy()[:, 0], s.energy_mean)

        record = result.record(1)
        self.assertEqual(len(record.states), len(result.times))
        self.assertEqual(record.seed, 7)
        self.assertEqual(result.h_norm_integral().shape, (3,))

        fractions = result.dissipation_fractions()
        npt.assert_array_equal(fractions["below_eps"], 0.0)

    def test_mean_and_se(self):
        mean, se = mdl.mean_and_se(np.array([[1.0, 3.0]]))
        npt.assert_array_equal(mean, [2.0])
        npt.assert_allclose(se, [1.0])
        mean, se = mdl.mean_and_se(np.array([[1.0]]))
        npt.assert_array_equal(se, [0.0])

    def test_blowup(self):
        spec = _spec(
            s0=shells.point_mass(4), dt=1.0, t_end=200.0, n_paths=4, batch_size=2, record_stride=1
        )
        with self.assertLogs("dyadmhd.sde", "WARNING"):
            with self.assertRaises(mdl.EnsembleBlowUpError) as ctx:
                mdl.run_ensemble(spec)
        failures = ctx.exception.failures
        self.assertGreaterEqual(len(failures), 2)
        self.assertTrue(all(0 <= _p < 4 for _p, _ in failures))
        self.assertEqual(failures, sorted(failures))

    def test_linear_energy_nonincreasing(self):
        spec = _spec(
            s0=shells.point_mass(4, 1.0),
            t_end=0.2,
            n_paths=10_000,
            record_stride=200,
            batch_size=2500,
            master_seed=11,
        )
        s = mdl.run_ensemble(spec).summary
        self.assertEqual(len(s.times), 11)
        self.assertTrue(kolmogorov.is_decreasing(s.energy_mean, s.energy_se, n_se=2.0))
        forward = kolmogorov.integrate_forward(
            shells.point_mass(4, 1.0), make_rates(spec.params), 1e-4, 0.2, record_stride=200
        )
        npt.assert_allclose(s.energy_mean, forward.mass, atol=float(np.max(5 * s.energy_se)) + 1e-3)


class TestHNormSweep(TestCase):
    def test_frozen_state(self):
        # With M = 0 the deterministic drift vanishes, so the integrand is constant in time.
        p = shells.ModelParams(lam=2.0, theta=1.0, sigma=0.0, n_shells=2)
        spec = _spec(
            scheme=mdl.Scheme.DETERMINISTIC,
            params=p,
            s0=shells.ShellState([1.0, 1.0], [0.0, 0.0]),
            t_end=0.5,
            n_paths=2,
            record_stride=500,
        )
        sweep = mdl.h_norm_sweep(spec, [4, 2, 3])
        npt.assert_array_equal(sweep.truncations, [2, 3, 4])
        # (4 + 16) * 0.5
        npt.assert_allclose(sweep.mean, 10.0, rtol=1e-12)
        npt.assert_array_equal(sweep.se, 0.0)
        npt.assert_allclose(sweep.growth, 1.0)
        npt.assert_array_equal(sweep.dts, 1e-4)

    def test_truncated_initial_state(self):
        p = shells.ModelParams(lam=2.0, theta=1.0, sigma=0.0, n_shells=3)
        spec = _spec(
            scheme=mdl.Scheme.DETERMINISTIC,
            params=p,
            s0=shells.ShellState([1.0, 0.0, 2.0], [0.0, 0.0, 0.0]),
            t_end=0.1,
            n_paths=1,
            record_stride=100,
        )
        sweep = mdl.h_norm_sweep(spec, [2, 3])
        npt.assert_allclose(sweep.mean, [0.4, 0.4 + 256 * 0.1], rtol=1e-12)

    def test_stochastic_steps(self):
        spec = _spec(s0=shells.point_mass(4, 0.1), t_end=0.05, n_paths=200, record_stride=50, batch_size=100)
        sweep = mdl.h_norm_sweep(spec, [3, 5])
        self.assertEqual(sweep.dts[0], 1e-4)
        self.assertAlmostEqual(sweep.dts[1], spec.params.replace(n_shells=5).stiffness_bound(spec.stiffness_c))
        self.assertTrue(np.all(np.isfinite(sweep.mean)))
        self.assertTrue(np.all(sweep.mean > 0))
        self.assertEqual(sweep.growth.shape, (1,))

    def test_invalid(self):
        with self.assertRaises(ValueError):
            mdl.h_norm_sweep(_spec(), [1, 4])
        with self.assertRaises(ValueError):
            mdl.h_norm_sweep(_spec(), [])
