import math
import unittest
from unittest import mock

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from asln.core import generative
from asln.core.generative import (
    GenerativeProcess,
    Nonlinearity,
    SourceDistribution,
    build_process,
    ground_truth_decomposition,
    noise_covariance,
    register_nonlinearity,
    sample_batch,
)
from asln.core.random_streams import stream
from asln.core.spectral import svd_thin
from asln.errors import ConfigurationError, DimensionError


class BuildProcessTests(unittest.TestCase):
    def test_shapes(self):
        process = build_process(10, 1000, 1000, Nonlinearity("sign"), SourceDistribution("uniform"), seed=1)

        self.assertEqual(process.A.shape, (1000, 10))
        self.assertEqual(process.a.shape, (1000,))
        self.assertEqual(process.B.shape, (1000, 1000))

    def test_same_seed_is_bit_identical(self):
        first = build_process(5, 50, 40, "sign", "uniform", seed=7)
        second = build_process(5, 50, 40, "sign", "uniform", seed=7)

        assert_array_equal(first.A, second.A)
        assert_array_equal(first.a, second.a)
        assert_array_equal(first.B, second.B)

    def test_weights_do_not_depend_on_nonlinearity(self):
        sign = build_process(5, 50, 40, "sign", "uniform", seed=3)
        relu = build_process(5, 50, 40, "relu", "gaussian", seed=3)

        assert_array_equal(sign.A, relu.A)
        assert_array_equal(sign.B, relu.B)

    def test_mixing_variance(self):
        process = build_process(10, 10_000, 1, "sign", "uniform", seed=0)

        n = process.A.size
        target = 1.0 / 10
        self.assertLess(abs(process.A.var() - target), 3.0 * math.sqrt(2.0 / n) * target)

    def test_rejects_bad_dimensions(self):
        with self.assertRaises(ConfigurationError):
            build_process(20, 10, 10, "sign", "uniform", seed=0)
        with self.assertRaises(ConfigurationError):
            build_process(2, 10, 0, "sign", "uniform", seed=0)

    def test_unknown_kinds_are_configuration_errors(self):
        with self.assertRaises(ConfigurationError):
            Nonlinearity("softplus")
        with self.assertRaises(ConfigurationError):
            SourceDistribution("laplace")


class SourceDistributionTests(unittest.TestCase):
    def test_uniform_moments(self):
        T = 100_000
        S = SourceDistribution("uniform").sample(stream(0, "test"), (T, 4))

        self.assertTrue(np.all(np.abs(S) <= math.sqrt(3.0)))
        self.assertTrue(np.all(np.abs(S.mean(axis=0)) < 3.0 / math.sqrt(T)))
        self.assertTrue(np.all(np.abs(S.var(axis=0) - 1.0) < 3.0 * math.sqrt(2.0 / T)))

    def test_truncated_normal_has_unit_variance(self):
        T = 100_000
        s = SourceDistribution("truncated-normal").sample(stream(1, "test"), T)

        self.assertLess(abs(s.var() - 1.0), 3.0 * math.sqrt(2.0 / T))
        self.assertLess(SourceDistribution("truncated-normal").kurtosis, 0.0)

    def test_kurtosis_values(self):
        self.assertAlmostEqual(SourceDistribution("uniform").kurtosis, -1.2)
        self.assertEqual(SourceDistribution("gaussian").kurtosis, 0.0)
        self.assertAlmostEqual(SourceDistribution("uniform").fourth_moment, 1.8)


class NonlinearityTests(unittest.TestCase):
    def test_oddness_flags(self):
        odd = {kind: Nonlinearity(kind).is_odd for kind in ("sign", "cube", "relu", "tanh", "identity")}

        self.assertEqual(odd, {"sign": True, "cube": True, "relu": False, "tanh": True, "identity": True})

    def test_registered_nonlinearity_is_never_odd(self):
        with mock.patch.dict(generative._NONLINEARITIES):
            register_nonlinearity("softsign", lambda x: x / (1.0 + np.abs(x)))

            nl = Nonlinearity("softsign")

            self.assertFalse(nl.is_odd)
            assert_allclose(nl(np.array([1.0, -3.0])), [0.5, -0.75])
        with self.assertRaises(ConfigurationError):
            Nonlinearity("softsign")


class SampleBatchTests(unittest.TestCase):
    def test_identity_pass_through(self):
        n = 4
        process = GenerativeProcess(
            n_sources=n, n_bases=n, n_inputs=n, A=np.eye(n), a=np.zeros(n), B=np.eye(n),
            nonlinearity=Nonlinearity("identity"), source_dist=SourceDistribution("uniform"), seed=0,
        )

        batch = sample_batch(process, 100, seed=0)

        assert_array_equal(batch.X, batch.S)

    def test_sign_bases_are_plus_minus_one(self):
        process = build_process(3, 30, 20, "sign", "uniform", seed=2)

        batch = sample_batch(process, 500, seed=2)

        self.assertTrue(np.all(np.isin(batch.F, (-1.0, 1.0))))
        assert_allclose(batch.X, batch.F @ process.B.T)
        assert_allclose(batch.input_mean, batch.X.mean(axis=0))

    def test_shards_are_stable_under_longer_batches(self):
        process = build_process(3, 30, 20, "sign", "uniform", seed=2)

        short = sample_batch(process, 300, seed=5, shard_size=100)
        long = sample_batch(process, 500, seed=5, shard_size=100)

        assert_array_equal(short.S, long.S[:300])

    def test_needs_two_samples(self):
        process = build_process(3, 30, 20, "sign", "uniform", seed=2)

        with self.assertRaises(DimensionError):
            sample_batch(process, 1, seed=0)

    def test_split_keeps_rows_and_rejects_tiny_batches(self):
        process = build_process(3, 30, 20, "sign", "uniform", seed=2)
        batch = sample_batch(process, 10, seed=0)

        head, tail = batch.split()

        self.assertEqual((head.n_samples, tail.n_samples), (5, 5))
        assert_array_equal(tail.S, batch.S[5:])
        with self.assertRaises(DimensionError):
            sample_batch(process, 3, seed=0).split()


class GroundTruthTests(unittest.TestCase):
    def test_residual_is_uncorrelated_with_sources(self):
        T = 20_000
        process = build_process(4, 50, 30, "sign", "uniform", seed=4)
        batch = sample_batch(process, T, seed=4)

        truth = ground_truth_decomposition(process, batch)
        phi = truth.residuals(batch)

        cross = phi.T @ batch.S / T
        self.assertLess(np.max(np.abs(cross)), 5.0 / math.sqrt(T))
        assert_allclose(truth.Sigma, truth.Sigma.T)
        self.assertGreater(np.linalg.eigvalsh(truth.Sigma).min(), -1e-10)

    def test_identity_nonlinearity_has_no_noise(self):
        process = build_process(3, 20, 20, "identity", "uniform", seed=5)
        process = GenerativeProcess(
            n_sources=3, n_bases=20, n_inputs=20, A=process.A, a=np.zeros(20), B=process.B,
            nonlinearity=process.nonlinearity, source_dist=process.source_dist, seed=5,
        )
        batch = sample_batch(process, 20_000, seed=5)

        truth = ground_truth_decomposition(process, batch)

        self.assertLess(np.linalg.norm(truth.Sigma), 1e-3)
        assert_allclose(truth.H, process.A, atol=0.05)

    def test_sign_signal_singular_values(self):
        process = build_process(10, 1000, 100, "sign", "uniform", seed=1)
        batch = sample_batch(process, 10_000, seed=1)

        truth = ground_truth_decomposition(process, batch)

        expected = math.sqrt(2.0 / math.pi) * math.sqrt(1000 / 10)
        singular_values = svd_thin(truth.H).singular_values
        self.assertTrue(np.all(np.abs(singular_values / expected - 1.0) < 0.15))
        self.assertTrue(truth.undersampled)

    def test_covariance_splits_into_signal_and_noise(self):
        T = 20_000
        process = build_process(3, 30, 20, "sign", "uniform", seed=6)
        batch = sample_batch(process, T, seed=6)

        truth = ground_truth_decomposition(process, batch)

        Xc = batch.X - batch.input_mean
        cov_x = Xc.T @ Xc / T
        model = truth.BH @ truth.BH.T + noise_covariance(process, truth)
        self.assertLess(np.max(np.abs(cov_x - model)), 10.0 / math.sqrt(T))
        self.assertFalse(truth.undersampled)

    def test_half_batches_agree_on_h(self):
        T = 20_000
        process = build_process(3, 30, 20, "sign", "uniform", seed=8)
        head, tail = sample_batch(process, T, seed=8).split()

        first = ground_truth_decomposition(process, head)
        second = ground_truth_decomposition(process, tail)

        self.assertLess(np.max(np.abs(first.H - second.H)), 10.0 / math.sqrt(T))

    def test_basis_mean_shrinks_with_source_count(self):
        spreads = []
        for n_sources in (4, 16, 64):
            process = build_process(n_sources, 200, 1, "sign", "uniform", seed=9)
            truth = ground_truth_decomposition(process, sample_batch(process, 20_000, seed=9))
            spreads.append(float(np.sqrt(np.mean(truth.basis_mean ** 2))))

        self.assertGreater(spreads[0], spreads[1])
        self.assertGreater(spreads[1], spreads[2])


if __name__ == "__main__":
    unittest.main()
