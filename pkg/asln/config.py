"""Configuration for asln."""

import json
import os
import sys
from dataclasses import dataclass, field, fields, is_dataclass, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

from .errors import ConfigurationError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def _env_threads() -> Optional[int]:
    raw = os.getenv("ASLN_THREADS", "").strip()
    if not raw:
        return None
    try:
        value = int(raw)
    except ValueError:
        return None
    return value if value >= 1 else None


@dataclass
class RuntimeConfig:
    """Execution resources."""
    # None means "not set here"; resolve_threads() applies the fallback chain.
    threads: Optional[int] = field(default_factory=_env_threads)
    quadrature_nodes: int = 200


@dataclass
class OutputConfig:
    """Where and how results are written."""
    results_dir: Optional[str] = None  # None uses <base_dir>/results
    write_svg: bool = False
    include_timing: bool = False  # Wall-clock column breaks byte-identical re-runs


@dataclass
class Config:
    """Main application configuration."""
    runtime: RuntimeConfig = field(default_factory=RuntimeConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    # Paths
    base_dir: Path = field(default_factory=lambda: Path(__file__).parent.parent)

    @property
    def data_dir(self) -> Path:
        """Get the data directory path."""
        return self.base_dir / "data"

    @property
    def presets_dir(self) -> Path:
        """Get the figure preset directory path."""
        return self.data_dir / "presets"

    @property
    def results_dir(self) -> Path:
        """Get the default output directory path."""
        if self.output.results_dir:
            return Path(self.output.results_dir)
        return self.base_dir / "results"

    @property
    def settings_path(self) -> Path:
        """Get the user settings file path."""
        return self.data_dir / "settings.json"

    def ensure_directories(self) -> None:
        """Create necessary directories if they don't exist."""
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.results_dir.mkdir(parents=True, exist_ok=True)

    def resolve_threads(self, cli_threads: Optional[int] = None) -> int:
        """Worker count: CLI flag, then ASLN_THREADS or the settings file, then 1."""
        for candidate in (cli_threads, self.runtime.threads):
            if candidate is not None and candidate >= 1:
                return int(candidate)
        return 1

    def load_settings(self) -> None:
        """Load user settings from disk, overriding defaults."""
        if not self.settings_path.exists():
            return
        try:
            with open(self.settings_path, 'r', encoding='utf-8') as f:
                data = json.load(f)
            runtime = data.get("runtime", {})
            # ASLN_THREADS wins over the file.
            if "threads" in runtime and _env_threads() is None:
                self.runtime.threads = runtime["threads"]
            if "quadrature_nodes" in runtime:
                self.runtime.quadrature_nodes = int(runtime["quadrature_nodes"])
            output = data.get("output", {})
            if "results_dir" in output:
                self.output.results_dir = output["results_dir"] or None
            if "write_svg" in output:
                self.output.write_svg = bool(output["write_svg"])
            if "include_timing" in output:
                self.output.include_timing = bool(output["include_timing"])
        except (json.JSONDecodeError, IOError) as e:
            print(f"Warning: Could not load settings: {e}")

    def save_settings(self) -> None:
        """Save user settings to disk."""
        data = {
            "runtime": {
                "threads": self.runtime.threads,
                "quadrature_nodes": self.runtime.quadrature_nodes,
            },
            "output": {
                "results_dir": self.output.results_dir,
                "write_svg": self.output.write_svg,
                "include_timing": self.output.include_timing,
            },
        }
        try:
            self.data_dir.mkdir(parents=True, exist_ok=True)
            with open(self.settings_path, 'w', encoding='utf-8') as f:
                json.dump(data, f, indent=2)
        except IOError as e:
            print(f"Warning: Could not save settings: {e}")


# ---------------------------------------------------------------------------
# Experiment configuration (TOML)
# ---------------------------------------------------------------------------

NONLINEARITIES = ("sign", "cube", "relu", "tanh", "identity")
SOURCE_DISTRIBUTIONS = ("uniform", "truncated-normal", "gaussian")
ENCODER_MODES = ("batch", "oja")
ICA_NONLINEARITIES = ("cube", "tanh")


@dataclass(frozen=True)
class GridConfig:
    """Parameter grid. N_f always equals N_x."""
    n_sources: List[int] = field(default_factory=lambda: [10])
    n_inputs: List[int] = field(default_factory=lambda: [1000])
    nonlinearities: List[str] = field(default_factory=lambda: ["sign"])
    source_dists: List[str] = field(default_factory=lambda: ["uniform"])
    n_samples: Optional[int] = None  # None uses max(1e5, 20 N_f)
    seeds: List[int] = field(default_factory=lambda: [0])


@dataclass(frozen=True)
class EncoderConfig:
    """Cascade options."""
    mode: str = "batch"
    eta_pca: float = 1e-3
    eta_ica: float = 0.02
    epochs_pca: int = 30
    epochs_ica: int = 30
    batch_size: int = 256
    g_kind: str = "cube"
    held_out: bool = True  # Align and score on the second half of each batch


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a grid, encoder options and an output location."""
    name: str = "experiment"
    grid: GridConfig = field(default_factory=GridConfig)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    output: Optional[str] = None

    def cells(self) -> List[Dict[str, Any]]:
        """Grid cells in a stable order (N_s, N_x, nonlinearity, source)."""
        cells = []
        for n_sources in self.grid.n_sources:
            for n_inputs in self.grid.n_inputs:
                for nonlinearity in self.grid.nonlinearities:
                    for source_dist in self.grid.source_dists:
                        cells.append({
                            "n_sources": n_sources,
                            "n_inputs": n_inputs,
                            "nonlinearity": nonlinearity,
                            "source_dist": source_dist,
                        })
        return cells

    def validate(self) -> "ExperimentConfig":
        """Raise ConfigurationError on any invalid field."""
        grid, enc = self.grid, self.encoder
        if not grid.seeds:
            raise ConfigurationError("grid.seeds must not be empty")
        for name in ("n_sources", "n_inputs", "nonlinearities", "source_dists"):
            if not getattr(grid, name):
                raise ConfigurationError(f"grid.{name} must not be empty")
        for n_sources in grid.n_sources:
            for n_inputs in grid.n_inputs:
                if not 1 <= n_sources <= n_inputs:
                    raise ConfigurationError(
                        f"Grid cell violates 1 <= N_s <= N_f = N_x: N_s={n_sources}, N_x={n_inputs}"
                    )
        for nl in grid.nonlinearities:
            if nl not in NONLINEARITIES:
                raise ConfigurationError(f"Unknown nonlinearity '{nl}'")
        for dist in grid.source_dists:
            if dist not in SOURCE_DISTRIBUTIONS:
                raise ConfigurationError(f"Unknown source distribution '{dist}'")
        if grid.n_samples is not None and grid.n_samples < 4:
            raise ConfigurationError("grid.n_samples must be at least 4")
        if enc.mode not in ENCODER_MODES:
            raise ConfigurationError(f"encoder.mode must be one of {ENCODER_MODES}")
        if enc.g_kind not in ICA_NONLINEARITIES:
            raise ConfigurationError(f"encoder.g_kind must be one of {ICA_NONLINEARITIES}")
        if enc.eta_pca <= 0 or enc.eta_ica <= 0:
            raise ConfigurationError("Learning rates must be positive")
        if enc.epochs_pca < 1 or enc.epochs_ica < 1 or enc.batch_size < 1:
            raise ConfigurationError("Epoch counts and batch size must be positive")
        return self

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ExperimentConfig":
        """Build and validate from a parsed TOML/JSON mapping."""
        try:
            grid = _build_section(GridConfig, data.get("grid", {}), "grid")
            encoder = _build_section(EncoderConfig, data.get("encoder", {}), "encoder")
        except (TypeError, ValueError) as e:
            raise ConfigurationError(str(e)) from e
        unknown = set(data) - {"name", "grid", "encoder", "output", "full_scale"}
        if unknown:
            raise ConfigurationError(f"Unknown config sections: {sorted(unknown)}")
        return cls(
            name=str(data.get("name", "experiment")),
            grid=grid,
            encoder=encoder,
            output=data.get("output"),
        ).validate()

    @classmethod
    def from_toml(cls, path, full_scale: bool = False) -> "ExperimentConfig":
        """Load a TOML file. ``full_scale`` merges its ``[full_scale]`` table."""
        path = Path(path)
        try:
            with open(path, 'rb') as f:
                data = tomllib.load(f)
        except FileNotFoundError as e:
            raise ConfigurationError(f"Config file not found: {path}") from e
        except tomllib.TOMLDecodeError as e:
            raise ConfigurationError(f"Invalid TOML in {path}: {e}") from e
        data.setdefault("name", path.stem)
        if full_scale:
            data = merge_full_scale(data)
        return cls.from_dict(data)

    def with_overrides(self, overrides: Optional[Mapping[str, Any]]) -> "ExperimentConfig":
        """Apply dotted overrides such as ``{"grid.n_inputs": [100, 300]}``."""
        if not overrides:
            return self
        updated = self
        for key, value in overrides.items():
            section, _, attr = key.partition(".")
            if not attr:
                if section not in ("name", "output"):
                    raise ConfigurationError(f"Unknown override '{key}'")
                updated = replace(updated, **{section: value})
                continue
            target = getattr(updated, section, None)
            if not is_dataclass(target) or attr not in {f.name for f in fields(target)}:
                raise ConfigurationError(f"Unknown override '{key}'")
            updated = replace(updated, **{section: replace(target, **{attr: value})})
        return updated.validate()

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "name": self.name,
            "grid": {f.name: getattr(self.grid, f.name) for f in fields(self.grid)},
            "encoder": {f.name: getattr(self.encoder, f.name) for f in fields(self.encoder)},
        }
        if self.output is not None:
            data["output"] = self.output
        return data


def _build_section(cls, values: Mapping[str, Any], label: str):
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigurationError(f"Unknown keys in [{label}]: {sorted(unknown)}")
    kwargs = {}
    for key, value in values.items():
        # TOML arrays come back as lists; scalars for list fields are promoted.
        default = getattr(cls(), key)
        if isinstance(default, list) and not isinstance(value, list):
            value = [value]
        kwargs[key] = value
    return cls(**kwargs)


def merge_full_scale(data: Mapping[str, Any]) -> Dict[str, Any]:
    """Overlay the ``[full_scale]`` table onto the desk-scale sections."""
    merged = {key: (dict(value) if isinstance(value, dict) else value)
              for key, value in data.items() if key != "full_scale"}
    for section, values in data.get("full_scale", {}).items():
        if isinstance(values, dict):
            merged.setdefault(section, {}).update(values)
        else:
            merged[section] = values
    return merged


# Global configuration instance
config = Config()
config.load_settings()
