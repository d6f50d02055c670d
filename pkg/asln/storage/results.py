"""CSV emission for experiment records and learning curves."""

import csv
from pathlib import Path
from typing import Iterable, List, Sequence

from ..errors import ConfigurationError
from .models import CurvePoint, ExperimentRecord


def emit_csv(records: Sequence[ExperimentRecord], path, include_timing: bool = False) -> Path:
    """Write records as UTF-8 CSV, header first, one record per line.

    Args:
        records: Non-empty list of records, written in the given order.
        path: Target file; parent directories are created.
        include_timing: Append the wall-clock column. Off by default so
            re-runs produce identical bytes.

    Returns:
        The path written.
    """
    if not records:
        raise ConfigurationError("No records to write")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(ExperimentRecord.columns(include_timing))
        for record in records:
            writer.writerow(record.to_row(include_timing))
    return path


def read_csv(path) -> List[ExperimentRecord]:
    """Parse a file written by :func:`emit_csv`."""
    with open(path, 'r', encoding='utf-8', newline='') as f:
        reader = csv.reader(f)
        header = next(reader)
        return [ExperimentRecord.from_row(header, row) for row in reader if row]


def emit_curves_csv(points: Iterable[CurvePoint], path) -> Path:
    """Write learning-curve points (one row per cell, seed, stage and epoch)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(CurvePoint.COLUMNS)
        for point in points:
            writer.writerow(point.to_row())
    return path
