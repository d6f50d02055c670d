import contextlib
import io
import math
import tempfile
import unittest
from pathlib import Path
from unittest import mock

from asln.config import ExperimentConfig
from asln.core import theory
from asln.core.encoders import pca_whiten_batch
from asln.core.generative import build_process, ground_truth_decomposition, sample_batch
from asln.core.metrics import subspace_error
from asln.errors import SingularityError
from asln.harness.plots import plot_preset
from asln.harness.presets import load_preset
from asln.harness.runner import failed_count, run_grid, seed_means
from asln.main import EXIT_CONFIG, EXIT_FAILED, EXIT_OK, main
from asln.storage.container import load_encoders, load_process
from asln.storage.results import emit_csv, read_csv


def _small_experiment(**grid) -> ExperimentConfig:
    values = {
        "n_sources": [2],
        "n_inputs": [8, 12],
        "nonlinearities": ["sign", "relu"],
        "n_samples": 2000,
        "seeds": [0, 1],
    }
    values.update(grid)
    return ExperimentConfig.from_dict({
        "name": "small",
        "grid": values,
        "encoder": {"epochs_ica": 3},
    })


class RunGridTests(unittest.TestCase):
    def test_records_follow_grid_order(self):
        experiment = _small_experiment(seeds=[0])

        records = run_grid(experiment, threads=1, quiet=True)

        self.assertEqual(len(records), 4)
        self.assertEqual([(r.n_inputs, r.nonlinearity) for r in records],
                         [(8, "sign"), (8, "relu"), (12, "sign"), (12, "relu")])
        self.assertEqual(failed_count(records), 0)
        self.assertTrue(all(r.n_bases == r.n_inputs for r in records))

    def test_asymptotic_prediction_only_for_odd_nonlinearities(self):
        records = run_grid(_small_experiment(seeds=[0], n_inputs=[8]), threads=1, quiet=True)

        sign, relu = records
        self.assertFalse(math.isnan(sign.predicted_mse_asymptotic))
        self.assertTrue(math.isnan(relu.predicted_mse_asymptotic))
        self.assertFalse(math.isnan(relu.predicted_mse_general))
        self.assertFalse(sign.undersampled)

    def test_reruns_are_byte_identical_across_thread_counts(self):
        experiment = _small_experiment()
        with tempfile.TemporaryDirectory() as tmp:
            serial = emit_csv(run_grid(experiment, threads=1, quiet=True), Path(tmp) / "a.csv").read_bytes()
            parallel = emit_csv(run_grid(experiment, threads=3, quiet=True), Path(tmp) / "b.csv").read_bytes()

        self.assertEqual(serial, parallel)

    def test_seed_results_do_not_depend_on_other_seeds(self):
        both = run_grid(_small_experiment(n_inputs=[8], nonlinearities=["sign"]), threads=1, quiet=True)
        alone = run_grid(_small_experiment(n_inputs=[8], nonlinearities=["sign"], seeds=[1]),
                         threads=1, quiet=True)

        self.assertEqual(both[1].to_row(), alone[0].to_row())

    def test_failing_cell_is_recorded_and_others_continue(self):
        real = theory.perturbation_correction

        def flaky(U_L, S_L, noise_cov):
            if U_L.shape[0] == 12:
                raise SingularityError("S_L contains zero singular values")
            return real(U_L, S_L, noise_cov)

        stderr = io.StringIO()
        with mock.patch("asln.harness.runner.perturbation_correction", side_effect=flaky), \
                contextlib.redirect_stderr(stderr), contextlib.redirect_stdout(io.StringIO()):
            records = run_grid(_small_experiment(seeds=[0], nonlinearities=["sign"]), threads=1)

        self.assertTrue(records[0].success)
        self.assertFalse(records[1].success)
        self.assertTrue(math.isnan(records[1].bss_mse))
        self.assertIn("SingularityError", records[1].error)
        self.assertEqual(records[1].n_inputs, 12)
        self.assertEqual(failed_count(records), 1)
        self.assertIn("FAILED", stderr.getvalue())

    def test_subspace_error_is_scored_on_the_whole_batch(self):
        records = run_grid(_small_experiment(seeds=[0], n_inputs=[8], nonlinearities=["sign"]),
                           threads=1, quiet=True)
        record = records[0]
        process = build_process(2, 8, 8, "sign", record.source_dist, 0)
        batch = sample_batch(process, 2000, 0)
        truth = ground_truth_decomposition(process, batch)

        expected = subspace_error(pca_whiten_batch(batch.X, 2, batch.input_mean).components, truth.U_L)

        self.assertAlmostEqual(record.subspace_error, expected, places=12)

    def test_records_carry_the_eigenvalue_bound(self):
        records = run_grid(_small_experiment(seeds=[0, 1]), threads=1, quiet=True)

        for record in records:
            self.assertTrue(record.eigenvalue_bound_holds)
            self.assertGreater(record.largest_error_eigenvalue, 0.0)
            self.assertLessEqual(record.largest_error_eigenvalue, record.eigenvalue_ratio * (1.0 + 1e-9))

    def test_trained_encoders_are_collected_in_grid_order(self):
        encoders = []

        records = run_grid(_small_experiment(seeds=[0], nonlinearities=["sign"]),
                           threads=2, quiet=True, encoders=encoders)

        self.assertEqual(len(encoders), len(records))
        for outcome, record in zip(encoders, records):
            self.assertIs(outcome.record, record)
        self.assertTrue(all(outcome.ica is not None for outcome in encoders))
        self.assertEqual(encoders[1].pca.input_mean.shape, (12,))

    def test_curves_are_collected(self):
        curves = []

        records = run_grid(_small_experiment(seeds=[0], n_inputs=[8], nonlinearities=["sign"]),
                           threads=1, quiet=True, curves=curves)

        self.assertEqual(len(curves), 3)
        self.assertTrue(all(point.stage == "ica" for point in curves))
        self.assertEqual(seed_means(records, "bss_mse"), {0: records[0].bss_mse})


class PlotTests(unittest.TestCase):
    def test_generic_charts_are_written(self):
        curves = []
        records = run_grid(_small_experiment(seeds=[0], nonlinearities=["sign"]),
                           threads=1, quiet=True, curves=curves)
        with tempfile.TemporaryDirectory() as tmp:
            paths = plot_preset("small", records, curves, tmp)

            self.assertEqual(len(paths), 2)
            self.assertTrue(all(path.exists() and path.suffix == ".svg" for path in paths))


class CommandLineTests(unittest.TestCase):
    def _run(self, argv):
        with contextlib.redirect_stdout(io.StringIO()) as out, contextlib.redirect_stderr(io.StringIO()):
            code = main(argv)
        return code, out.getvalue()

    def test_run_writes_records_and_curves(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "tiny.toml"
            path.write_text(
                '[grid]\nn_sources = [2]\nn_inputs = [6, 10]\nn_samples = 1000\nseeds = [0, 1, 2]\n'
                '[encoder]\nepochs_ica = 2\n',
                encoding="utf-8",
            )

            code, _ = self._run(["run", str(path), "--out", tmp, "--seed", "4", "--quiet"])

            records = read_csv(Path(tmp) / "tiny.csv")
            self.assertEqual(code, EXIT_OK)
            self.assertEqual([r.seed for r in records], [4, 4])
            self.assertTrue((Path(tmp) / "tiny_curves.csv").exists())

    def test_theory_table(self):
        with tempfile.TemporaryDirectory() as tmp:
            csv_path = Path(tmp) / "theory.csv"

            code, out = self._run(["theory", "--n-sources", "100", "--n-inputs", "10000", "--csv", str(csv_path)])

            lines = csv_path.read_text(encoding="utf-8").splitlines()
        self.assertEqual(code, EXIT_OK)
        self.assertIn("relu", out)
        sign_row = next(line for line in lines if line.startswith("sign,"))
        self.assertAlmostEqual(float(sign_row.split(",")[-1]), 0.016416, places=6)

    def test_gen_writes_a_container(self):
        with tempfile.TemporaryDirectory() as tmp:
            out = Path(tmp) / "p.asln"

            code, _ = self._run(["gen", "--n-sources", "2", "--n-bases", "10", "--samples", "50",
                                 "--out", str(out)])

            process, batch = load_process(out)
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(process.n_inputs, 10)
        self.assertEqual(batch.n_samples, 50)

    def test_run_saves_encoder_checkpoints(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "tiny.toml"
            path.write_text('[grid]\nn_sources = [2]\nn_inputs = [6, 10]\nn_samples = 1000\n'
                            '[encoder]\nepochs_ica = 2\n', encoding="utf-8")

            code, _ = self._run(["run", str(path), "--out", tmp, "--seed", "4", "--quiet", "--save-encoders"])

            saved = sorted(p.name for p in (Path(tmp) / "encoders").iterdir())
            pca, ica = load_encoders(Path(tmp) / "encoders" / "tiny_cell1_seed4.asln")
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(saved, ["tiny_cell0_seed4.asln", "tiny_cell1_seed4.asln"])
        self.assertEqual(pca.n_components, 2)
        self.assertEqual(pca.input_mean.shape, (10,))
        self.assertEqual(ica.g_kind, "cube")

    def test_figure_names_and_paper_scale_flag(self):
        with mock.patch("asln.main._finish_run", return_value=EXIT_OK) as finish:
            code, _ = self._run(["preset", "fig2", "--paper-scale", "--seed", "1"])

        name, experiment = finish.call_args.args[:2]
        self.assertEqual(code, EXIT_OK)
        self.assertEqual(name, "eigengap")
        self.assertEqual(experiment.grid.n_inputs, load_preset("eigengap", full_scale=True).grid.n_inputs)
        self.assertEqual(experiment.grid.seeds, [1])

    def test_theory_structure_table(self):
        code, out = self._run(["theory", "--n-sources", "2,3", "--n-inputs", "100", "--structure",
                               "--nonlinearity", "tanh", "--n-bases", "30", "--samples", "3000"])

        self.assertEqual(code, EXIT_OK)
        self.assertIn("Sigma_rel_err", out)
        rows = [line.split() for line in out.splitlines() if line.startswith("tanh") and line.split()[2] == "30"]
        self.assertEqual([row[1] for row in rows], ["2", "3"])
        self.assertTrue(all(math.isfinite(float(row[4])) for row in rows))

    def test_unwritable_output_exits_with_one(self):
        with tempfile.TemporaryDirectory() as tmp:
            blocker = Path(tmp) / "blocker"
            blocker.write_text("", encoding="utf-8")

            code, _ = self._run(["gen", "--n-sources", "2", "--n-bases", "10", "--samples", "50",
                                 "--out", str(blocker / "p.asln")])

        self.assertEqual(code, EXIT_FAILED)

    def test_configuration_errors_exit_with_two(self):
        with tempfile.TemporaryDirectory() as tmp:
            code, _ = self._run(["run", str(Path(tmp) / "missing.toml")])
        self.assertEqual(code, EXIT_CONFIG)

        code, _ = self._run(["lemma", "2", "--g", "softplus"])
        self.assertEqual(code, EXIT_CONFIG)


if __name__ == "__main__":
    unittest.main()
