import math
import tempfile
import unittest
from pathlib import Path

from asln.errors import ConfigurationError
from asln.storage.models import CurvePoint, ExperimentRecord, format_float, parse_float
from asln.storage.results import emit_csv, emit_curves_csv, read_csv


def _record(cell_index: int, seed: int, **overrides) -> ExperimentRecord:
    values = dict(
        experiment="demo", cell_index=cell_index, seed=seed, n_sources=10, n_inputs=100,
        n_bases=100, nonlinearity="sign", source_dist="uniform", n_samples=100_000,
        subspace_error=0.1 / 3.0, bss_mse=0.0625, diag_cov_min=0.97, offdiag_cov_max=0.02,
        predicted_mse_general=0.06, predicted_mse_asymptotic=0.0614, eigenvalue_ratio=0.2,
        largest_error_eigenvalue=0.004, eigenvalue_bound_holds=True, subspace_error_estimate=0.03,
        wall_clock=1.25,
    )
    values.update(overrides)
    return ExperimentRecord(**values)


class FloatFormatTests(unittest.TestCase):
    def test_round_trips_doubles(self):
        for value in (0.1, 1.0 / 3.0, 1e-300, 12345.678901234567):
            self.assertEqual(parse_float(format_float(value)), value)

    def test_nan(self):
        self.assertEqual(format_float(float("nan")), "nan")
        self.assertTrue(math.isnan(parse_float("nan")))
        self.assertTrue(math.isnan(parse_float("")))


class EmitCsvTests(unittest.TestCase):
    def test_four_records_give_five_lines(self):
        records = [_record(i, s) for i in range(2) for s in range(2)]
        with tempfile.TemporaryDirectory() as tmp:
            path = emit_csv(records, Path(tmp) / "out" / "records.csv")

            lines = path.read_text(encoding="utf-8").split("\n")

        self.assertEqual(lines[-1], "")
        self.assertEqual(len(lines) - 1, 5)
        self.assertEqual(lines[0], ",".join(ExperimentRecord.COLUMNS))

    def test_round_trip_preserves_values(self):
        records = [_record(0, 0), _record(1, 3, success=False, error="SingularityError: BH",
                                          predicted_mse_asymptotic=float("nan"))]
        with tempfile.TemporaryDirectory() as tmp:
            path = emit_csv(records, Path(tmp) / "records.csv")

            loaded = read_csv(path)

        self.assertEqual(loaded[0].subspace_error, 0.1 / 3.0)
        self.assertEqual(loaded[0].largest_error_eigenvalue, 0.004)
        self.assertTrue(loaded[0].eigenvalue_bound_holds)
        self.assertTrue(loaded[0].success)
        self.assertFalse(loaded[1].success)
        self.assertEqual(loaded[1].error, "SingularityError: BH")
        self.assertTrue(math.isnan(loaded[1].predicted_mse_asymptotic))
        self.assertTrue(math.isnan(loaded[0].wall_clock))

    def test_timing_column_is_opt_in(self):
        with tempfile.TemporaryDirectory() as tmp:
            plain = emit_csv([_record(0, 0)], Path(tmp) / "plain.csv").read_text(encoding="utf-8")
            timed = emit_csv([_record(0, 0)], Path(tmp) / "timed.csv", include_timing=True).read_text(
                encoding="utf-8")

        self.assertNotIn("wall_clock", plain)
        self.assertTrue(timed.splitlines()[0].endswith(",wall_clock"))
        self.assertTrue(timed.splitlines()[1].endswith(",1.25"))

    def test_rewriting_is_byte_identical(self):
        records = [_record(0, 0), _record(0, 1)]
        with tempfile.TemporaryDirectory() as tmp:
            first = emit_csv(records, Path(tmp) / "a.csv").read_bytes()
            second = emit_csv(records, Path(tmp) / "b.csv").read_bytes()

        self.assertEqual(first, second)

    def test_empty_input_is_rejected(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(ConfigurationError):
                emit_csv([], Path(tmp) / "empty.csv")


class CurvesCsvTests(unittest.TestCase):
    def test_writes_one_line_per_point(self):
        points = [CurvePoint("demo", 0, 0, "pca", epoch, 1.0 / epoch, 0.5) for epoch in (1, 2, 3)]
        with tempfile.TemporaryDirectory() as tmp:
            text = emit_curves_csv(points, Path(tmp) / "curves.csv").read_text(encoding="utf-8")

        lines = text.splitlines()
        self.assertEqual(lines[0], ",".join(CurvePoint.COLUMNS))
        self.assertEqual(lines[2], "demo,0,0,pca,2,0.5,0.5")
        self.assertEqual(len(lines), 4)


if __name__ == "__main__":
    unittest.main()
