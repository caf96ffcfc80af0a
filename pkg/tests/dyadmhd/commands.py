import contextlib
import filecmp
import io
import json
import tempfile
from pathlib import Path
from unittest import TestCase
import numpy as np
import dyadmhd.commands as mdl
from dyadmhd import __version__
from dyadmhd.config import config_from_dict

SMALL = {
    "model": {"n_shells": 4},
    "run": {"dt": 1e-4, "t_end": 0.01, "n_paths": 20, "record_stride": 10, "batch_size": 8},
    "bd": {"n_paths": 500, "batch_size": 200, "j_max": 20, "observe_times": [0.05, 0.1]},
    "forward": {"n_shells": 10, "dt": 0.01, "t_end": 0.1},
}


def _config(**sections):
    data = {_k: dict(_v) for _k, _v in SMALL.items()}
    for _name, _values in sections.items():
        data.setdefault(_name, {}).update(_values)
    return config_from_dict(data)


def _read_csv(path):
    lines = Path(path).read_text().splitlines()
    return lines[0], lines[1].split(","), np.loadtxt(path, delimiter=",", skiprows=2, ndmin=2)


def _read_jsonl(path):
    return [json.loads(_line) for _line in Path(path).read_text().splitlines()]


class TestSubcommands(TestCase):
    def setUp(self):
        self._tmpd = tempfile.TemporaryDirectory()
        self.out = Path(self._tmpd.name)

    def tearDown(self):
        self._tmpd.cleanup()

    def test_simulate(self):
        cfg = _config()
        outcome = mdl.run_command("simulate", cfg, self.out)
        self.assertEqual(outcome.exit_code, mdl.EXIT_SUCCESS)
        self.assertEqual(
            sorted(_p.name for _p in outcome.artifacts),
            ["config.resolved.yaml", "series.csv", "summary.jsonl"],
        )

        comment, header, data = _read_csv(self.out / "series.csv")
        self.assertEqual(
            comment, f"# dyadmhd {__version__} config_sha256={cfg.config_hash()} master_seed=0"
        )
        self.assertEqual(header[:4], ["t", "energy_mean", "energy_se", "cross_helicity_mean"])
        self.assertEqual(len(header), 4 + 4 * 4)
        self.assertEqual(data.shape, (11, len(header)))
        self.assertAlmostEqual(data[0, 1], 1.0)

        records = _read_jsonl(self.out / "summary.jsonl")
        self.assertEqual(records[0]["kind"], "config")
        self.assertEqual(records[0]["config"], cfg.resolved())
        self.assertEqual(records[1]["scheme"], "linear")
        self.assertIn("integrability", records[1])
        self.assertEqual(len(records), 2)

    def test_simulate_h_norm_sweep(self):
        cfg = _config(report={"h_norm_truncations": [4, 2]})
        self.assertEqual(mdl.run_command("simulate", cfg, self.out).exit_code, 0)
        records = _read_jsonl(self.out / "summary.jsonl")
        self.assertEqual(len(records), 3)
        sweep = records[2]
        self.assertEqual(sweep["kind"], "h_norm_sweep")
        self.assertEqual(sweep["sweep"]["truncations"], [2, 4])
        self.assertEqual(len(sweep["growth"]), 1)
        self.assertTrue(all(_m > 0 for _m in sweep["sweep"]["mean"]))

    def test_simulate_deterministic(self):
        cfg = _config(model={"sigma": 0.0}, run={"scheme": "deterministic"})
        self.assertEqual(mdl.run_command("simulate", cfg, self.out).exit_code, 0)
        records = _read_jsonl(self.out / "summary.jsonl")
        self.assertNotIn("integrability", records[1])
        self.assertAlmostEqual(records[1]["energy_final"], 1.0)

    def test_bd_sample(self):
        outcome = mdl.run_command("bd-sample", _config(), self.out)
        self.assertEqual(outcome.exit_code, 0)
        _, header, data = _read_csv(self.out / "histogram.csv")
        self.assertEqual(header, ["t", "state", "probability", "se"])
        self.assertEqual(data.shape, (2 * 22, 4))
        for _t in (0.05, 0.1):
            rows = data[data[:, 0] == _t]
            self.assertAlmostEqual(rows[:, 2].sum(), 1.0)
            self.assertEqual(rows[-1, 1], -1)

        _, header, visits = _read_csv(self.out / "visits.csv")
        self.assertEqual(header[0], "k")
        self.assertEqual(visits.shape[0], 10)

        records = _read_jsonl(self.out / "bd_summary.jsonl")
        summary = records[1]
        self.assertEqual(summary["n_paths"], 500)
        self.assertAlmostEqual(sum(summary["exits"].values()), 1.0)
        self.assertGreater(summary["residual_time_above_j_max"], 0.0)
        self.assertEqual(len(records), 2 + 10)

    def test_forward(self):
        outcome = mdl.run_command("forward", _config(), self.out)
        self.assertEqual(outcome.exit_code, 0)
        _, header, data = _read_csv(self.out / "profile.csv")
        self.assertEqual(
            header, ["t"] + [f"e_{_j}" for _j in range(1, 11)] + ["mass", "bottom_leak", "top_leak"]
        )
        self.assertEqual(data.shape, (11, 14))
        np.testing.assert_allclose(data[:, 11] + data[:, 12] + data[:, 13], 1.0, atol=1e-8)

        report = _read_jsonl(self.out / "forward_report.jsonl")[1]
        self.assertEqual(report["method"], "implicit")
        self.assertTrue(report["report"]["lower_bound_holds"])

        start_points = _read_jsonl(self.out / "forward_report.jsonl")[2]["comparison"]
        self.assertEqual(start_points["start_shells"], [1, 2, 3])
        self.assertTrue(start_points["dominated"])
        self.assertTrue(start_points["absorption_consistent"])

    def test_forward_stiffness(self):
        cfg = _config(forward={"method": "rk4", "n_shells": 40})
        outcome = mdl.run_command("forward", cfg, self.out)
        self.assertEqual(outcome.exit_code, mdl.EXIT_CONFIG_ERROR)
        self.assertIn("stiffness guard", outcome.message)

    def test_girsanov_check(self):
        cfg = _config(initial={"energy": 0.05})
        outcome = mdl.run_command("girsanov-check", cfg, self.out)
        self.assertEqual(outcome.exit_code, 0)
        _, header, data = _read_csv(self.out / "reweighting.csv")
        self.assertEqual(header, ["t"] + mdl.REWEIGHTING_COLUMNS)
        self.assertEqual(data.shape[0], 11)
        self.assertAlmostEqual(data[0, header.index("weight_mean")], 1.0)
        record = _read_jsonl(self.out / "girsanov.jsonl")[1]
        self.assertTrue(record["integrability"]["condition"])

    def test_quantities(self):
        stdout = io.StringIO()
        with contextlib.redirect_stdout(stdout):
            outcome = mdl.run_command("quantities", None, self.out)
        self.assertEqual(outcome.exit_code, 0)
        text = stdout.getvalue()
        self.assertIn("r_inf     = 0.444444444444", text)
        self.assertIn("R         = 0.444444444444", text)
        self.assertIn("S         = divergent", text)
        self.assertRegex(text, r"alpha     = 0\.74978")

        _, header, data = _read_csv(self.out / "quantities.csv")
        self.assertEqual(header, ["n", "r_n", "mean_occupation"])
        self.assertAlmostEqual(data[0, 1], 1 / 3)
        record = _read_jsonl(self.out / "quantities.jsonl")[1]
        self.assertTrue(record["S"]["divergent"])

    def test_seed_override(self):
        mdl.run_command("simulate", _config(), self.out, seed=5)
        comment, _, _ = _read_csv(self.out / "series.csv")
        self.assertTrue(comment.endswith("master_seed=5"))


class TestDeterminism(TestCase):
    def test_reruns(self):
        cfg = _config()
        with tempfile.TemporaryDirectory() as tmpd:
            for _sub in ("simulate", "bd-sample", "forward", "girsanov-check"):
                outcomes = [
                    mdl.run_command(_sub, cfg, Path(tmpd) / f"{_sub}_{_k}", threads=_threads)
                    for _k, _threads in enumerate((0, 3))
                ]
                self.assertEqual(len(outcomes[0].artifacts), len(outcomes[1].artifacts))
                for _a, _b in zip(outcomes[0].artifacts, outcomes[1].artifacts):
                    self.assertTrue(filecmp.cmp(_a, _b, shallow=False), f"{_sub}: {_a.name}")


class TestExitCodes(TestCase):
    def test_config_errors(self):
        with tempfile.TemporaryDirectory() as tmpd:
            outcome = mdl.run_command("simulate", Path(tmpd) / "missing.yaml", tmpd)
            self.assertEqual(outcome.exit_code, mdl.EXIT_CONFIG_ERROR)

            path = Path(tmpd) / "bad.yaml"
            path.write_text("model:\n  sigma: 0.0\n")
            outcome = mdl.run_command("simulate", path, tmpd)
            self.assertEqual(outcome.exit_code, mdl.EXIT_CONFIG_ERROR)
            self.assertIn("sigma = 0", outcome.message)

            outcome = mdl.run_command("simulate-all", None, tmpd)
            self.assertEqual(outcome.exit_code, mdl.EXIT_CONFIG_ERROR)

            cfg = _config(model={"sigma": 0.0}, run={"scheme": "deterministic"})
            self.assertEqual(mdl.run_command("quantities", cfg, tmpd).exit_code, 2)

    def test_blowup(self):
        cfg = _config(
            model={"n_shells": 4},
            run={"dt": 1.0, "t_end": 200.0, "n_paths": 4, "batch_size": 2, "record_stride": 1},
            initial={"energy": 1.0},
        )
        with tempfile.TemporaryDirectory() as tmpd:
            outcome = mdl.run_command("simulate", cfg, tmpd)
        self.assertEqual(outcome.exit_code, mdl.EXIT_BLOWUP)
        self.assertIn("blew up", outcome.message)
