from pathlib import Path
import unittest

from twimpute.errors import ConfigError
from twimpute.utils import get_relative, make_callable, replicate_seed, resolve_cutoff


class TestMakeCallable(unittest.TestCase):
    def test_callable(self):
        def func():
            return 5

        wrapped = make_callable(func)

        self.assertTrue(callable(wrapped))
        self.assertEqual(wrapped(), 5)

    def test_direct(self):
        wrapped = make_callable(5)
        self.assertTrue(callable(wrapped))
        self.assertEqual(wrapped(), 5)

    def test_direct_ignores_arguments(self):
        wrapped = make_callable({"seed": 1})
        self.assertEqual(wrapped(seed=2), {"seed": 1})


class TestGetRelative(unittest.TestCase):
    def test_sibling(self):
        self.assertEqual(get_relative(Path("a/run.json"), Path("a/schema.json")), Path("schema.json"))

    def test_other_directory(self):
        self.assertEqual(
            get_relative(Path("a/run.json"), Path("b/schema.json")), Path("../b/schema.json")
        )


class TestResolveCutoff(unittest.TestCase):
    def test_fraction(self):
        self.assertEqual(resolve_cutoff(0.4, 1000), 400)
        self.assertEqual(resolve_cutoff(0.25, 81), 20)

    def test_index(self):
        self.assertEqual(resolve_cutoff(300, 1000), 300)
        self.assertEqual(resolve_cutoff(1.0, 1000), 1)
        self.assertEqual(resolve_cutoff(12.0, 1000), 12)

    def test_invalid(self):
        with self.assertRaises(ConfigError):
            resolve_cutoff(2.5, 1000)


class TestReplicateSeed(unittest.TestCase):
    def test_stable(self):
        self.assertEqual(replicate_seed(7, 3), replicate_seed(7, 3))

    def test_distinct(self):
        seeds = {replicate_seed(7, i) for i in range(100)}
        seeds.add(replicate_seed(8, 0))
        self.assertEqual(len(seeds), 101)

    def test_range(self):
        seed = replicate_seed(0, 0)
        self.assertGreaterEqual(seed, 0)
        self.assertLess(seed, 2 ** 64)
