from dataclasses import dataclass
from enum import Enum
import json
import tempfile
from pathlib import Path
from unittest import TestCase
import numpy as np
import dyadmhd.json as mdl
from dyadmhd.sde import Scheme


class _Color(str, Enum):
    RED = "red"


@dataclass
class _Record:
    name: str
    values: np.ndarray
    color: _Color


class TestFunctions(TestCase):
    def test_as_json_serializable(self):
        val = {"abc": 1, "def": 2}
        self.assertEqual(mdl.as_json_serializable(val), val)

        self.assertEqual(mdl.as_json_serializable(2), 2)
        self.assertEqual(mdl.as_json_serializable("abc"), "abc")
        self.assertEqual(mdl.as_json_serializable((1, 2, 3)), [1, 2, 3])

        nested = {
            "model": {"lambda": np.float64(2.0), "n_shells": np.int64(8)},
            "run": {"scheme": Scheme.ITO, "observe_times": (0.1, np.float32(0.5))},
            "report": {"S": {"value": np.inf, "divergent": np.bool_(True)}},
        }
        self.assertEqual(
            mdl.as_json_serializable(nested),
            {
                "model": {"lambda": 2.0, "n_shells": 8},
                "run": {"scheme": "ito", "observe_times": [0.1, 0.5]},
                "report": {"S": {"value": "inf", "divergent": True}},
            },
        )
        json.dumps(mdl.as_json_serializable(nested))

    def test_circular_reference(self):
        val = {"a": [1, 2]}
        val["a"].append(val)
        with self.assertRaisesRegex(ValueError, "Circular reference"):
            mdl.as_json_serializable(val)

        shared = [1.0]
        self.assertEqual(mdl.as_json_serializable({"x": shared, "y": shared}), {"x": [1.0], "y": [1.0]})

    def test_numpy_and_dataclasses(self):
        out = mdl.as_json_serializable(
            _Record("a", np.array([1.5, np.inf, np.nan]), _Color.RED)
        )
        self.assertEqual(out, {"name": "a", "values": [1.5, "inf", "nan"], "color": "red"})
        self.assertIs(type(mdl.as_json_serializable(np.int64(3))), int)
        self.assertIs(mdl.as_json_serializable(np.bool_(True)), True)
        self.assertEqual(mdl.as_json_serializable({1: None}), {"1": None})
        self.assertEqual(mdl.as_json_serializable(Path("x")), "x")


class TestThreadSafeJsonWriter(TestCase):
    def test_all(self):
        with tempfile.TemporaryDirectory() as tmpd:
            writer = mdl.ThreadSafeJsonWriter(Path(tmpd) / "out.jsonl")
            writer.write({"b": 1, "a": np.float64(0.5)})
            writer.write({"c": [np.int32(1)]})
            lines = writer.read().splitlines()
            self.assertEqual(lines[0], '{"a": 0.5, "b": 1}')
            self.assertEqual(json.loads(lines[1]), {"c": [1]})

            writer.truncate()
            self.assertEqual(writer.read(), "")
