import threading
import time
from unittest import TestCase
import numpy as np
import dyadmhd.parallelization as mdl


def _worker(item, offset=0):
    time.sleep(0.01)
    return item * 2 + offset, threading.current_thread().name


class _TestParallelizer:
    def test_run(self):
        items = list(range(20))
        results = dict(self.parallelizer.run(_worker, items, offset=1))
        self.assertEqual(sorted(results), items)
        for _item, (_value, _) in results.items():
            self.assertEqual(_value, 2 * _item + 1)

    def test_do_raise_False(self):
        def worker(item):
            raise Exception("Error.")

        for _, result in self.parallelizer.run(worker, [0]):
            self.assertIsInstance(result, mdl.WorkerException)
            with self.assertRaisesRegex(Exception, "^Error\\.$"):
                raise result.error

    def test_do_raise_True(self):
        def worker(item):
            raise Exception("Error.")

        with self.assertRaisesRegex(Exception, "^Error\\.$"):
            for _ in type(self.parallelizer)(do_raise=True).run(worker, [0]):
                pass


class TestMockParallelizer(_TestParallelizer, TestCase):
    parallelizer = mdl.MockParallelizer()

    def test_calling_thread(self):
        for _, (_, name) in self.parallelizer.run(_worker, [0, 1]):
            self.assertEqual(name, threading.current_thread().name)


class TestThreadParallelizer(_TestParallelizer, TestCase):
    parallelizer = mdl.ThreadParallelizer(max_workers=4)

    def test_thread_names(self):
        names = {_name for _, (_, _name) in self.parallelizer.run(_worker, range(8))}
        self.assertTrue(all(_name.startswith("dyadmhd") for _name in names))


class TestFunctions(TestCase):
    def test_parallelizer(self):
        self.assertIsInstance(mdl.parallelizer(0), mdl.MockParallelizer)
        self.assertIsInstance(mdl.parallelizer(1), mdl.MockParallelizer)
        self.assertIsInstance(mdl.parallelizer(4), mdl.ThreadParallelizer)
        with self.assertRaises(ValueError):
            mdl.parallelizer(-1)

    def test_order_independent_merge(self):
        rng = np.random.default_rng(0)
        delays = rng.random(10) * 0.02

        def worker(index):
            time.sleep(delays[index])
            return index**2

        results = dict(mdl.parallelizer(5).run(worker, range(10)))
        self.assertEqual([results[_k] for _k in range(10)], [_k**2 for _k in range(10)])
