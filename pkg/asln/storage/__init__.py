"""Storage modules for asln."""

from .models import CurvePoint, ExperimentRecord
from .results import emit_csv, emit_curves_csv, read_csv

__all__ = ["CurvePoint", "ExperimentRecord", "emit_csv", "emit_curves_csv", "read_csv"]
