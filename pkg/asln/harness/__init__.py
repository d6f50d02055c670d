"""Experiment orchestration for asln."""

from .presets import PRESET_NAMES, load_preset, run_preset
from .runner import run_grid

__all__ = ["PRESET_NAMES", "load_preset", "run_grid", "run_preset"]
