import unittest

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from twimpute.core import TwiConfig
from twimpute.embed import EmbeddingView, cost_matrix, embed_vector, embedding_matrix, pairwise_cost
from twimpute.errors import ConfigError


class TestEmbedVector(unittest.TestCase):
    def test_univariate(self):
        w = np.arange(10.0)
        assert_array_equal(embed_vector(w, 4, 3), [4.0, 3.0, 2.0])

    def test_multivariate_stacks_series(self):
        w = np.column_stack([np.arange(10.0), 100 + np.arange(10.0)])
        assert_array_equal(embed_vector(w, 5, 2), [5.0, 4.0, 105.0, 104.0])

    def test_out_of_range(self):
        with self.assertRaises(IndexError):
            embed_vector(np.arange(10.0), 1, 3)
        with self.assertRaises(IndexError):
            embed_vector(np.arange(10.0), 10, 3)

    def test_matrix_matches_vectors(self):
        rng = np.random.default_rng(0)
        w = rng.standard_normal((30, 3))
        matrix = embedding_matrix(w, 4, 3, 30)
        expected = np.array([embed_vector(w, t, 4) for t in range(3, 30)])
        assert_array_equal(matrix, expected)


class TestEmbeddingView(unittest.TestCase):
    def test_supports(self):
        w = np.arange(20.0)
        cfg = TwiConfig(n1=8, p=3)
        view = EmbeddingView.of(w, cfg)
        self.assertEqual(list(view.indices_pre), list(range(2, 9)))
        self.assertEqual(list(view.indices_post), list(range(9, 20)))
        self.assertEqual(view.pre().shape, (cfg.pre_size(), 3))
        self.assertEqual(view.post().shape, (cfg.post_size(20), 3))
        assert_array_equal(view.post()[0], [9.0, 8.0, 7.0])

    def test_invalid_cutoff(self):
        with self.assertRaises(ConfigError):
            EmbeddingView.of(np.arange(20.0), TwiConfig(n1=1, p=3))


class TestCost(unittest.TestCase):
    def test_shape_and_values(self):
        rng = np.random.default_rng(1)
        w = rng.standard_normal((25, 2))
        cfg = TwiConfig(n1=10, p=3)
        cost = cost_matrix(w, cfg)
        self.assertEqual(cost.shape, (9, 14))
        self.assertTrue(np.all(cost >= 0))

        pre = embed_vector(w, 2, 3)
        post = embed_vector(w, 11, 3)
        self.assertAlmostEqual(cost[0, 0], float(np.sum((pre - post) ** 2)), places=12)

    def test_cost_order(self):
        rng = np.random.default_rng(2)
        u, v = rng.standard_normal((4, 3)), rng.standard_normal((5, 3))
        distance = np.linalg.norm(u[:, None, :] - v[None, :, :], axis=2)
        assert_allclose(pairwise_cost(u, v, 1.0), distance, rtol=1e-12)
        assert_allclose(pairwise_cost(u, v, 3.0), distance**3, rtol=1e-12)
        assert_allclose(pairwise_cost(u, v), distance**2, rtol=1e-12)

    def test_shift_invariance(self):
        """Adding a constant to every value leaves the cost unchanged"""
        w = np.arange(40.0).reshape(-1, 1) % 7
        cfg = TwiConfig(n1=15, p=4)
        assert_array_equal(cost_matrix(w, cfg), cost_matrix(w + 3.0, cfg))
