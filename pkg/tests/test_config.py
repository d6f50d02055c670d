import json
import os
import tempfile
import unittest
from pathlib import Path
from unittest import mock

from asln.config import Config, ExperimentConfig, merge_full_scale
from asln.errors import ConfigurationError, UnknownPresetError
from asln.harness.presets import PRESET_NAMES, load_preset, preset_name, preset_path


class ConfigSettingsPersistenceTests(unittest.TestCase):
    def _fresh_config(self, tmp: str) -> Config:
        # base_dir/data is where settings.json lives -> isolate from the real file.
        cfg = Config(base_dir=Path(tmp))
        cfg.ensure_directories()
        return cfg

    def test_default_results_dir_is_under_base_dir(self):
        with tempfile.TemporaryDirectory() as tmp:
            self.assertEqual(self._fresh_config(tmp).results_dir, Path(tmp) / "results")

    def test_save_and_load_roundtrip_persists_output_options(self):
        with tempfile.TemporaryDirectory() as tmp:
            cfg = self._fresh_config(tmp)
            cfg.output.write_svg = True
            cfg.runtime.quadrature_nodes = 120
            cfg.save_settings()

            data = json.loads(cfg.settings_path.read_text(encoding="utf-8"))
            self.assertTrue(data["output"]["write_svg"])

            reloaded = self._fresh_config(tmp)
            reloaded.load_settings()
            self.assertTrue(reloaded.output.write_svg)
            self.assertEqual(reloaded.runtime.quadrature_nodes, 120)

    def test_partial_settings_keep_defaults(self):
        with tempfile.TemporaryDirectory() as tmp:
            cfg = self._fresh_config(tmp)
            cfg.settings_path.write_text(json.dumps({"output": {"include_timing": True}}), encoding="utf-8")
            cfg.load_settings()

            self.assertTrue(cfg.output.include_timing)
            self.assertEqual(cfg.runtime.quadrature_nodes, 200)

    def test_thread_resolution_order(self):
        with mock.patch.dict(os.environ, {"ASLN_THREADS": "3"}):
            cfg = Config()
        self.assertEqual(cfg.resolve_threads(5), 5)
        self.assertEqual(cfg.resolve_threads(None), 3)

        with mock.patch.dict(os.environ, {"ASLN_THREADS": ""}):
            self.assertEqual(Config().resolve_threads(None), 1)

    def test_environment_wins_over_settings_file(self):
        with tempfile.TemporaryDirectory() as tmp, mock.patch.dict(os.environ, {"ASLN_THREADS": "2"}):
            cfg = self._fresh_config(tmp)
            cfg.settings_path.write_text(json.dumps({"runtime": {"threads": 8}}), encoding="utf-8")
            cfg.load_settings()

            self.assertEqual(cfg.resolve_threads(), 2)


class ExperimentConfigTests(unittest.TestCase):
    def test_scalars_are_promoted_and_cells_ordered(self):
        experiment = ExperimentConfig.from_dict({
            "grid": {"n_sources": 2, "n_inputs": [10, 20], "nonlinearities": ["sign", "cube"]},
        })

        cells = experiment.cells()
        self.assertEqual(experiment.grid.n_sources, [2])
        self.assertEqual(len(cells), 4)
        self.assertEqual([(c["n_inputs"], c["nonlinearity"]) for c in cells],
                         [(10, "sign"), (10, "cube"), (20, "sign"), (20, "cube")])

    def test_rejects_invalid_grids(self):
        bad = [
            {"grid": {"n_sources": [30], "n_inputs": [10]}},
            {"grid": {"nonlinearities": ["softplus"]}},
            {"grid": {"seeds": []}},
            {"grid": {"unknown_key": 1}},
            {"encoder": {"mode": "fastica"}},
            {"encoder": {"g_kind": "sign"}},
            {"solver": {}},
        ]
        for data in bad:
            with self.subTest(data=data):
                with self.assertRaises(ConfigurationError):
                    ExperimentConfig.from_dict(data)

    def test_overrides(self):
        experiment = ExperimentConfig().with_overrides({"grid.seeds": [7], "encoder.mode": "oja"})

        self.assertEqual(experiment.grid.seeds, [7])
        self.assertEqual(experiment.encoder.mode, "oja")
        with self.assertRaises(ConfigurationError):
            experiment.with_overrides({"grid.width": 3})

    def test_toml_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "small.toml"
            path.write_text('[grid]\nn_sources = [2]\nn_inputs = [8]\nseeds = [0, 1]\n', encoding="utf-8")

            experiment = ExperimentConfig.from_toml(path)

        self.assertEqual(experiment.name, "small")
        self.assertEqual(experiment.grid.seeds, [0, 1])

    def test_missing_or_invalid_toml(self):
        with tempfile.TemporaryDirectory() as tmp:
            broken = Path(tmp) / "broken.toml"
            broken.write_text("[grid\n", encoding="utf-8")

            with self.assertRaises(ConfigurationError):
                ExperimentConfig.from_toml(broken)
            with self.assertRaises(ConfigurationError):
                ExperimentConfig.from_toml(Path(tmp) / "missing.toml")

    def test_merge_full_scale(self):
        merged = merge_full_scale({
            "grid": {"n_sources": [10], "seeds": [0]},
            "full_scale": {"grid": {"n_sources": [100]}},
        })

        self.assertEqual(merged["grid"], {"n_sources": [100], "seeds": [0]})
        self.assertNotIn("full_scale", merged)


class PresetTests(unittest.TestCase):
    def test_every_preset_loads_at_both_scales(self):
        for name in PRESET_NAMES:
            with self.subTest(name=name):
                desk = load_preset(name)
                full = load_preset(name, full_scale=True)

                self.assertEqual(desk.name, name)
                self.assertGreaterEqual(max(full.grid.n_inputs), max(desk.grid.n_inputs))

    def test_hebbian_preset_uses_oja(self):
        encoder = load_preset("hebbian").encoder

        self.assertEqual((encoder.mode, encoder.eta_pca, encoder.eta_ica), ("oja", 0.001, 0.02))

    def test_figure_names_resolve_to_presets(self):
        expected = {"fig2": "eigengap", "fig3a": "identification", "fig3d": "error_law", "fig4": "hebbian"}
        for alias, name in expected.items():
            with self.subTest(alias=alias):
                self.assertEqual(preset_name(alias), name)
                self.assertEqual(load_preset(alias).to_dict(), load_preset(name).to_dict())

    def test_error_law_preset_uses_default_sample_count(self):
        self.assertIsNone(load_preset("error_law").grid.n_samples)

    def test_unknown_preset(self):
        with self.assertRaises(UnknownPresetError):
            preset_path("missing")


if __name__ == "__main__":
    unittest.main()
