from unittest import TestCase
import numpy as np
import numpy.testing as npt
import dyadmhd.rng as mdl


class TestFunctions(TestCase):
    def test_path_stream(self):
        a = mdl.path_stream(3, 1).normal(size=10)
        npt.assert_array_equal(a, mdl.path_stream(3, 1).normal(size=10))
        self.assertFalse(np.array_equal(a, mdl.path_stream(3, 2).normal(size=10)))
        self.assertFalse(np.array_equal(a, mdl.path_stream(4, 1).normal(size=10)))
        self.assertIsInstance(mdl.path_stream(0, 0).bit_generator, np.random.Philox)

        with self.assertRaises(ValueError):
            mdl.path_stream(-1, 0)

    def test_randomizer(self):
        rng = np.random.default_rng(0)
        self.assertIs(mdl.randomizer(rng), rng)
        npt.assert_array_equal(
            mdl.randomizer(5).random(3), mdl.path_stream(5, 0).random(3)
        )
        self.assertIsInstance(mdl.randomizer(None), np.random.Generator)
        with self.assertRaises(TypeError):
            mdl.randomizer("abc")


class TestPathStreams(TestCase):
    def test_rows_follow_own_stream(self):
        streams = mdl.PathStreams(9, 4, 3)
        self.assertEqual(len(streams), 3)
        draws = np.stack([streams.normal(2.0, (5,)) for _ in range(100)], axis=1)
        self.assertEqual(draws.shape, (3, 100, 5))
        for _k in range(3):
            npt.assert_allclose(
                draws[_k], 2.0 * mdl.path_stream(9, 4 + _k).standard_normal((100, 5)), rtol=1e-14
            )

    def test_subsets(self):
        streams = mdl.PathStreams(9, 0, 4)
        first = [streams.standard_exponential([1, 3]) for _ in range(70)]
        streams.standard_exponential([0])
        expected = mdl.path_stream(9, 3).standard_exponential(70)
        npt.assert_array_equal([_x[1] for _x in first], expected)
        # Each kind keeps its own position.
        u = streams.random(np.array([2]))
        self.assertEqual(u.shape, (1,))
        self.assertTrue(0.0 <= u[0] < 1.0)

    def test_invalid(self):
        with self.assertRaises(ValueError):
            mdl.PathStreams(0, 0, 0)
        with self.assertRaises(ValueError):
            mdl.PathStreams(-1, 0, 2)
