"""Experiment presets shipped as TOML files under data/presets."""

from pathlib import Path
from typing import Any, List, Mapping, Optional

from ..config import ExperimentConfig, config
from ..errors import UnknownPresetError
from ..storage.models import CurvePoint, ExperimentRecord
from .runner import run_grid

PRESET_NAMES = ("eigengap", "identification", "error_law", "hebbian")

# Figure-numbered names, accepted wherever a preset name is.
PRESET_ALIASES = {
    "fig2": "eigengap",
    "fig3a": "identification",
    "fig3d": "error_law",
    "fig4": "hebbian",
}


def preset_name(name: str) -> str:
    """Canonical preset name for a name or an alias."""
    name = PRESET_ALIASES.get(name, name)
    if name not in PRESET_NAMES:
        available = ", ".join(PRESET_NAMES + tuple(PRESET_ALIASES))
        raise UnknownPresetError(f"Unknown preset '{name}' (available: {available})")
    return name


def preset_path(name: str) -> Path:
    return config.presets_dir / f"{preset_name(name)}.toml"


def load_preset(name: str, overrides: Optional[Mapping[str, Any]] = None,
                full_scale: bool = False) -> ExperimentConfig:
    """Desk-scale preset, or the full-size grid with ``full_scale``."""
    return ExperimentConfig.from_toml(preset_path(name), full_scale=full_scale).with_overrides(overrides)


def run_preset(name: str, overrides: Optional[Mapping[str, Any]] = None, full_scale: bool = False,
               threads: Optional[int] = None, quiet: bool = False,
               curves: Optional[List[CurvePoint]] = None) -> List[ExperimentRecord]:
    """Load a preset and run its grid."""
    experiment = load_preset(name, overrides, full_scale)
    return run_grid(experiment, threads=threads, quiet=quiet, curves=curves)
