"""Data models for asln results."""

import math
from dataclasses import dataclass, fields
from typing import List, Optional

NAN = float("nan")


def format_float(value: float) -> str:
    """17 significant digits, enough to round-trip any double."""
    if value is None:
        return ""
    if math.isnan(value):
        return "nan"
    return format(float(value), ".17g")


def parse_float(text: str) -> float:
    return NAN if text in ("", "nan") else float(text)


@dataclass
class ExperimentRecord:
    """One (grid cell, seed) of an experiment.

    Theory columns are NaN when they do not apply (e.g. the asymptotic
    prediction for a non-odd nonlinearity) or when the cell failed.
    """
    experiment: str = ""
    cell_index: int = 0
    seed: int = 0
    n_sources: int = 0
    n_inputs: int = 0
    n_bases: int = 0
    nonlinearity: str = ""
    source_dist: str = ""
    n_samples: int = 0
    mode: str = "batch"
    subspace_error: float = NAN
    bss_mse: float = NAN
    diag_cov_min: float = NAN
    offdiag_cov_max: float = NAN
    predicted_mse_general: float = NAN
    predicted_mse_asymptotic: float = NAN
    eigenvalue_ratio: float = NAN
    largest_error_eigenvalue: float = NAN
    eigenvalue_bound_holds: bool = False
    subspace_error_estimate: float = NAN
    undersampled: bool = False
    success: bool = True
    error: str = ""
    wall_clock: float = NAN

    # Fixed column order of the results CSV. wall_clock is optional and last.
    COLUMNS = (
        "experiment", "cell_index", "seed", "n_sources", "n_inputs", "n_bases",
        "nonlinearity", "source_dist", "n_samples", "mode",
        "subspace_error", "bss_mse", "diag_cov_min", "offdiag_cov_max",
        "predicted_mse_general", "predicted_mse_asymptotic", "eigenvalue_ratio",
        "largest_error_eigenvalue", "eigenvalue_bound_holds",
        "subspace_error_estimate", "undersampled", "success", "error",
    )
    TIMING_COLUMN = "wall_clock"

    @classmethod
    def columns(cls, include_timing: bool = False) -> List[str]:
        names = list(cls.COLUMNS)
        if include_timing:
            names.append(cls.TIMING_COLUMN)
        return names

    def to_row(self, include_timing: bool = False) -> List[str]:
        """Convert to CSV cells."""
        row = []
        for name in self.columns(include_timing):
            value = getattr(self, name)
            if isinstance(value, bool):
                row.append("true" if value else "false")
            elif isinstance(value, float):
                row.append(format_float(value))
            else:
                row.append(str(value))
        return row

    @classmethod
    def from_row(cls, header: List[str], row: List[str]) -> "ExperimentRecord":
        """Create an ExperimentRecord from CSV cells."""
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        for name, text in zip(header, row):
            kind = types.get(name)
            if kind is None:
                continue
            if kind in (bool, "bool"):
                values[name] = text == "true"
            elif kind in (int, "int"):
                values[name] = int(text)
            elif kind in (float, "float"):
                values[name] = parse_float(text)
            else:
                values[name] = text
        return cls(**values)


@dataclass
class CurvePoint:
    """One epoch of a learning curve, tagged with its grid cell."""
    experiment: str
    cell_index: int
    seed: int
    stage: str
    epoch: int
    error: float
    weight_change: float

    COLUMNS = ("experiment", "cell_index", "seed", "stage", "epoch", "error", "weight_change")

    def to_row(self) -> List[str]:
        return [self.experiment, str(self.cell_index), str(self.seed), self.stage,
                str(self.epoch), format_float(self.error), format_float(self.weight_change)]


def curve_points(experiment: str, cell_index: int, seed: int, log) -> List[CurvePoint]:
    """Flatten a TrainLog into CSV-ready points."""
    if log is None:
        return []
    return [CurvePoint(experiment, cell_index, seed, log.stage, r.epoch, r.error, r.weight_change)
            for r in log.records]


def failed_record(base: ExperimentRecord, error: Exception,
                  wall_clock: Optional[float] = None) -> ExperimentRecord:
    """Copy of ``base`` marked as failed, keeping its coordinates."""
    base.success = False
    base.error = f"{type(error).__name__}: {error}"
    if wall_clock is not None:
        base.wall_clock = wall_clock
    return base
