import tempfile
import unittest
from pathlib import Path

import numpy as np
from numpy.testing import assert_array_equal

from asln.core.encoders import amari_train, pca_whiten_batch
from asln.core.generative import build_process, sample_batch
from asln.errors import ContainerFormatError
from asln.storage.container import (
    MAGIC,
    Section,
    load_encoders,
    load_process,
    read_container,
    save_encoders,
    save_process,
    write_container,
)


class ProcessContainerTests(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.dir = Path(self._tmp.name)
        self.process = build_process(3, 12, 8, "cube", "truncated-normal", seed=21)

    def tearDown(self):
        self._tmp.cleanup()

    def test_process_and_batch_are_restored_exactly(self):
        batch = sample_batch(self.process, 50, seed=21)
        path = save_process(self.dir / "p.asln", self.process, batch, batch_seed=21)

        process, restored = load_process(path)

        self.assertEqual(path.read_bytes()[:len(MAGIC)], MAGIC)
        self.assertEqual(process.nonlinearity.kind, "cube")
        self.assertEqual(process.source_dist.kind, "truncated-normal")
        self.assertEqual((process.n_sources, process.n_bases, process.n_inputs, process.seed), (3, 12, 8, 21))
        assert_array_equal(process.B, self.process.B)
        assert_array_equal(restored.X, batch.X)
        assert_array_equal(restored.input_mean, batch.input_mean)

    def test_process_without_batch(self):
        path = save_process(self.dir / "p.asln", self.process)

        _, batch = load_process(path)

        self.assertIsNone(batch)

    def test_bad_magic(self):
        path = self.dir / "bad.asln"
        path.write_bytes(b"NOPE!" + b"\x00" * 8)

        with self.assertRaises(ContainerFormatError):
            read_container(path)

    def test_truncated_and_trailing_bytes(self):
        data = save_process(self.dir / "p.asln", self.process).read_bytes()
        truncated = self.dir / "short.asln"
        truncated.write_bytes(data[:-3])
        padded = self.dir / "long.asln"
        padded.write_bytes(data + b"\x00")

        with self.assertRaises(ContainerFormatError):
            read_container(truncated)
        with self.assertRaises(ContainerFormatError):
            read_container(padded)

    def test_unknown_tag_is_refused_on_write(self):
        with self.assertRaises(ContainerFormatError):
            write_container(self.dir / "x.asln", [Section(tag=b"ABCD")])

    def test_missing_process_section(self):
        path = write_container(self.dir / "w.asln", [Section(tag=b"WICA", meta={"g_kind": "cube"},
                                                             arrays={"W_ica": np.eye(2)})])

        with self.assertRaises(ContainerFormatError):
            load_process(path)


class EncoderContainerTests(unittest.TestCase):
    def test_weights_round_trip(self):
        X = np.random.default_rng(0).standard_normal((400, 5))
        pca = pca_whiten_batch(X, 2)
        ica, _ = amari_train(pca.transform(X), epochs=2, seed=0)
        with tempfile.TemporaryDirectory() as tmp:
            path = save_encoders(Path(tmp) / "w.asln", pca, ica)

            loaded_pca, loaded_ica = load_encoders(path)

        assert_array_equal(loaded_pca.whitening, pca.whitening)
        assert_array_equal(loaded_ica.W_ica, ica.W_ica)
        self.assertEqual(loaded_ica.g_kind, "cube")
        assert_array_equal(loaded_ica.transform(loaded_pca.transform(X)), ica.transform(pca.transform(X)))


if __name__ == "__main__":
    unittest.main()
