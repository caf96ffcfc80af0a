from unittest import TestCase
import tempfile
from pathlib import Path
import numpy as np
import numpy.testing as npt
import yaml
import dyadmhd.config as mdl
from dyadmhd.birth_death import Boundary
from dyadmhd.sde import Scheme
from dyadmhd.shells import Coords


class TestRunConfig(TestCase):
    def test_defaults(self):
        cfg = mdl.config_from_dict(None)
        self.assertEqual(cfg.model.lam, 2.0)
        self.assertEqual(cfg.run.scheme, Scheme.LINEAR)
        self.assertEqual(cfg.bd.boundary, Boundary.ABSORBING)
        self.assertEqual(cfg.initial.kind, "point_mass_1")
        self.assertEqual(cfg.forward.n_shells, 40)
        self.assertEqual(cfg.params().n_shells, 8)

    def test_lambda_alias(self):
        cfg = mdl.config_from_dict({"model": {"lambda": 3.0, "n_shells": 5}})
        self.assertEqual(cfg.params().lam, 3.0)
        self.assertEqual(cfg.resolved()["model"]["lambda"], 3.0)

    def test_violations(self):
        for data, pattern in [
            ({"model": {"lambda": 0.5}}, "lambda must exceed 1"),
            ({"model": {"n_shells": 1}}, "n_shells must be an integer >= 2"),
            ({"run": {"dt": 0.0}}, r"run\.dt"),
            ({"run": {"scheme": "milstein"}}, r"run\.scheme"),
            ({"run": {"master_seed": -1}}, r"run\.master_seed"),
            ({"model": {"sigma": 0.0}}, "sigma = 0 is only allowed with scheme = deterministic"),
            ({"model": {"n_shells": 50}}, "forward.n_shells"),
            ({"bd": {"j_max": 5, "initial_state": 5}}, "initial_state 5 must lie below j_max 5"),
            ({"bd": {"observe_times": [-1.0]}}, "observe_times must be nonnegative"),
            ({"initial": {"preset": "geometric_decay", "rho": 1.5}}, "0 < rho < 1"),
            ({"initial": {"first": [1.0, 0.0]}}, "needs both first and second"),
            ({"unknown": 1}, "unknown"),
            ({"run": {"stride": 3}}, r"run\.stride"),
            ({"report": {"h_norm_truncations": [1, 4]}}, "h_norm_truncations must be at least 2"),
        ]:
            with self.assertRaisesRegex(mdl.ConfigError, pattern):
                mdl.config_from_dict(data)

        with self.assertRaisesRegex(mdl.ConfigError, "mapping"):
            mdl.config_from_dict([1, 2])

    def test_all_violations_listed(self):
        with self.assertRaises(mdl.ConfigError) as ctx:
            mdl.config_from_dict({"run": {"dt": -1.0, "n_paths": 0}})
        self.assertIn("2 invalid config entries", str(ctx.exception))

    def test_h_norm_truncations(self):
        self.assertEqual(mdl.config_from_dict(None).report.h_norm_truncations, [])
        cfg = mdl.config_from_dict({"report": {"h_norm_truncations": [6, 2, 6]}})
        self.assertEqual(cfg.report.h_norm_truncations, [2, 6])

    def test_deterministic_without_noise(self):
        cfg = mdl.config_from_dict({"model": {"sigma": 0.0}, "run": {"scheme": "deterministic"}})
        self.assertEqual(cfg.params().sigma, 0.0)

    def test_explicit_initial(self):
        cfg = mdl.config_from_dict(
            {
                "model": {"n_shells": 3},
                "initial": {"first": [1.0, 0.0, 0.0], "second": [1.0, 0.0, 0.0], "coords": "ab"},
            }
        )
        state = cfg.initial_state()
        self.assertEqual(state.coords, Coords.ELSASSER)
        npt.assert_array_equal(state.first, [2.0, 0.0, 0.0])
        npt.assert_array_equal(state.second, [0.0, 0.0, 0.0])

        profile = cfg.initial_profile()
        self.assertEqual(profile.shape, (40,))
        self.assertEqual(profile[0], 1.0)

        with self.assertRaisesRegex(mdl.ConfigError, "initial.first has 2 entries but n_shells = 3"):
            mdl.config_from_dict(
                {"model": {"n_shells": 3}, "initial": {"first": [1.0, 0.0], "second": [1.0, 0.0]}}
            )
        with self.assertRaisesRegex(mdl.ConfigError, "not both"):
            mdl.config_from_dict(
                {"initial": {"preset": "zero", "first": [1.0] * 8, "second": [1.0] * 8}}
            )

    def test_presets(self):
        for preset, energy in [("zero", 0.0), ("point_mass_1", 0.5), ("geometric_decay", 0.5)]:
            cfg = mdl.config_from_dict({"initial": {"preset": preset, "energy": 0.5}})
            state = cfg.initial_state()
            self.assertEqual(state.n_shells, 8)
            self.assertAlmostEqual(0.5 * np.sum(state.first**2 + state.second**2), energy)

    def test_ensemble_spec(self):
        cfg = mdl.config_from_dict({"run": {"n_paths": 12, "master_seed": 4}})
        spec = cfg.ensemble_spec(3, scheme=Scheme.ITO)
        self.assertEqual(spec.scheme, Scheme.ITO)
        self.assertEqual(spec.n_paths, 12)
        self.assertEqual(spec.master_seed, 4)
        self.assertEqual(spec.threads, 3)

        rates = cfg.rates()
        self.assertEqual(float(rates.nu(1)), 4.0)

    def test_with_seed_and_hash(self):
        cfg = mdl.RunConfig()
        self.assertIs(cfg.with_seed(None), cfg)
        other = cfg.with_seed(11)
        self.assertEqual(other.run.master_seed, 11)
        self.assertEqual(cfg.run.master_seed, 0)
        self.assertNotEqual(other.config_hash(), cfg.config_hash())
        self.assertEqual(cfg.config_hash(), mdl.RunConfig().config_hash())
        self.assertEqual(len(cfg.config_hash()), 64)

    def test_dump(self):
        cfg = mdl.config_from_dict({"bd": {"boundary": "reflecting"}})
        data = yaml.safe_load(cfg.dump())
        self.assertEqual(data["bd"]["boundary"], "reflecting")
        self.assertEqual(data["bd"]["t_max"], "inf")
        # The dump is itself a valid config, apart from the non-finite horizon.
        data["bd"].pop("t_max")
        self.assertEqual(mdl.config_from_dict(data).config_hash(), cfg.config_hash())


class TestParseConfig(TestCase):
    def test_parse(self):
        with tempfile.TemporaryDirectory() as tmpd:
            path = Path(tmpd) / "run.yaml"
            path.write_text("model:\n  lambda: 2.5\n  sigma: 0.5\nrun:\n  scheme: ito\n")
            cfg = mdl.parse_config(path)
            self.assertEqual(cfg.model.lam, 2.5)
            self.assertEqual(cfg.run.scheme, Scheme.ITO)

    def test_yaml_error(self):
        with tempfile.TemporaryDirectory() as tmpd:
            path = Path(tmpd) / "run.yaml"
            path.write_text("model:\n  lambda: [2.5\n")
            with self.assertRaisesRegex(mdl.ConfigError, r"at line \d+, column \d+"):
                mdl.parse_config(path)

    def test_missing(self):
        with self.assertRaisesRegex(mdl.ConfigError, "Cannot read config"):
            mdl.parse_config("/nonexistent/run.yaml")
