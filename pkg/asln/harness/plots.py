"""Static SVG line charts of records and learning curves."""

import math
from collections import defaultdict
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from ..storage.models import CurvePoint, ExperimentRecord  # noqa: E402

# Fixed salt so repeated runs write identical SVG ids.
matplotlib.rcParams["svg.hashsalt"] = "asln"

# Metric and the prediction columns drawn next to it, per preset.
PRESET_CHARTS: Dict[str, List[Tuple[str, Sequence[str]]]] = {
    "eigengap": [("eigenvalue_ratio", ()), ("subspace_error", ("subspace_error_estimate",))],
    "identification": [("bss_mse", ("predicted_mse_asymptotic", "predicted_mse_general"))],
    "error_law": [("bss_mse", ("predicted_mse_asymptotic", "predicted_mse_general"))],
    "hebbian": [("subspace_error", ("subspace_error_estimate",)),
               ("bss_mse", ("predicted_mse_asymptotic",))],
}


def _series(records: Sequence[ExperimentRecord], metric: str):
    """{(N_s, f, source): {N_x: [values]}} over successful finite records."""
    groups = defaultdict(lambda: defaultdict(list))
    for record in records:
        value = getattr(record, metric)
        if record.success and not math.isnan(value):
            key = (record.n_sources, record.nonlinearity, record.source_dist)
            groups[key][record.n_inputs].append(value)
    return groups


def plot_metric(records: Sequence[ExperimentRecord], metric: str, path,
                predictions: Sequence[str] = (), title: str = "") -> Path:
    """Seed-mean metric against N_x on log-log axes, with min/max bands."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for key, by_nx in sorted(_series(records, metric).items()):
        xs = sorted(by_nx)
        means = [sum(by_nx[x]) / len(by_nx[x]) for x in xs]
        line, = ax.plot(xs, means, marker="o", label=f"N_s={key[0]} {key[1]} {key[2]}")
        ax.fill_between(xs, [min(by_nx[x]) for x in xs], [max(by_nx[x]) for x in xs],
                        color=line.get_color(), alpha=0.2)
        for style, column in zip(("--", ":"), predictions):
            predicted = _series([r for r in records if (r.n_sources, r.nonlinearity, r.source_dist) == key],
                                column).get(key, {})
            if predicted:
                px = sorted(predicted)
                ax.plot(px, [sum(predicted[x]) / len(predicted[x]) for x in px],
                        linestyle=style, color=line.get_color())
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("N_x")
    ax.set_ylabel(metric)
    ax.set_title(title or metric)
    if ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize="small")
    return _save(fig, path)


def plot_curves(points: Sequence[CurvePoint], path, stage: str, title: str = "") -> Path:
    """Learning curves of one stage: seed mean per cell against epoch."""
    by_cell = defaultdict(lambda: defaultdict(list))
    for point in points:
        if point.stage == stage and not math.isnan(point.error):
            by_cell[point.cell_index][point.epoch].append(point.error)
    fig, ax = plt.subplots(figsize=(6, 4))
    for cell_index, by_epoch in sorted(by_cell.items()):
        epochs = sorted(by_epoch)
        ax.plot(epochs, [sum(by_epoch[e]) / len(by_epoch[e]) for e in epochs], label=f"cell {cell_index}")
    ax.set_yscale("log")
    ax.set_xlabel("epoch")
    ax.set_ylabel("error")
    ax.set_title(title or f"{stage} learning curve")
    if ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize="small")
    return _save(fig, path)


def plot_preset(name: str, records: Sequence[ExperimentRecord], curves: Sequence[CurvePoint],
                out_dir) -> List[Path]:
    """Every chart associated with a preset (or a generic BSS chart)."""
    out_dir = Path(out_dir)
    written = []
    for metric, predictions in PRESET_CHARTS.get(name, [("bss_mse", ("predicted_mse_asymptotic",))]):
        written.append(plot_metric(records, metric, out_dir / f"{name}_{metric}.svg",
                                   predictions, title=f"{name}: {metric}"))
    for stage in sorted({point.stage for point in curves}):
        written.append(plot_curves(curves, out_dir / f"{name}_{stage}_curve.svg", stage,
                                   title=f"{name}: {stage} learning curve"))
    return written


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
