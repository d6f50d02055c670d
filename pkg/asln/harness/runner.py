"""Grid runner: process -> batch -> ground truth -> cascade -> metrics -> theory."""

import math
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from ..config import ExperimentConfig, config
from ..core.encoders import CascadeConfig, CascadeResult, IcaEncoder, PcaEncoder, cascade, pca_whiten_batch
from ..core.generative import (
    Nonlinearity,
    build_process,
    default_sample_count,
    ground_truth_decomposition,
    noise_covariance,
    sample_batch,
)
from ..core.metrics import evaluate, subspace_error
from ..core.theory import (
    anisotropy_delta,
    eigenvalue_bound,
    error_cov_asymptotic,
    gaussian_coefficients,
    perturbation_correction,
    signal_directions,
)
from ..storage.models import CurvePoint, ExperimentRecord, curve_points, failed_record


@dataclass
class CellOutcome:
    record: ExperimentRecord
    curves: List[CurvePoint] = field(default_factory=list)
    pca: Optional[PcaEncoder] = None
    ica: Optional[IcaEncoder] = None


def _base_record(experiment: ExperimentConfig, cell_index: int, cell: Dict, seed: int) -> ExperimentRecord:
    n_inputs = int(cell["n_inputs"])
    return ExperimentRecord(
        experiment=experiment.name,
        cell_index=cell_index,
        seed=int(seed),
        n_sources=int(cell["n_sources"]),
        n_inputs=n_inputs,
        n_bases=n_inputs,
        nonlinearity=cell["nonlinearity"],
        source_dist=cell["source_dist"],
        n_samples=int(experiment.grid.n_samples or default_sample_count(n_inputs)),
        mode=experiment.encoder.mode,
    )


def run_cell(experiment: ExperimentConfig, cell_index: int, cell: Dict, seed: int,
             quadrature_nodes: int = 200) -> CellOutcome:
    """Run one (cell, seed). Failures are returned as a record, never raised."""
    record = _base_record(experiment, cell_index, cell, seed)
    started = time.perf_counter()
    try:
        curves, result = _evaluate_cell(experiment, record, quadrature_nodes)
    except Exception as e:
        # Fresh record: partial metrics of the failed run are not reported.
        base = _base_record(experiment, cell_index, cell, seed)
        return CellOutcome(failed_record(base, e, time.perf_counter() - started))
    record.wall_clock = time.perf_counter() - started
    return CellOutcome(record, curves, result.pca, result.ica)


def _evaluate_cell(experiment: ExperimentConfig, record: ExperimentRecord,
                   quadrature_nodes: int) -> Tuple[List[CurvePoint], CascadeResult]:
    enc = experiment.encoder
    nonlinearity = Nonlinearity(record.nonlinearity)
    process = build_process(record.n_sources, record.n_bases, record.n_inputs,
                            nonlinearity, record.source_dist, record.seed)
    batch = sample_batch(process, record.n_samples, record.seed)
    truth = ground_truth_decomposition(process, batch)
    record.undersampled = truth.undersampled

    train, held = batch.split() if enc.held_out else (batch, batch)
    result = cascade(train, record.n_sources, CascadeConfig(
        mode=enc.mode, eta_pca=enc.eta_pca, eta_ica=enc.eta_ica,
        epochs_pca=enc.epochs_pca, epochs_ica=enc.epochs_ica,
        batch_size=enc.batch_size, g_kind=enc.g_kind, seed=record.seed,
    ), reference=truth.U_L)
    metrics, _ = evaluate(result.transform(held.X), held.S)
    record.bss_mse = metrics.bss_mse
    record.diag_cov_min = metrics.diag_cov_min
    record.offdiag_cov_max = metrics.offdiag_cov_max

    # The subspace error is scored on the same T samples the ground truth saw.
    if enc.mode == "batch" and train is not batch:
        components = pca_whiten_batch(batch.X, record.n_sources, batch.input_mean).components
    else:
        components = result.pca.components
    record.subspace_error = subspace_error(components, truth.U_L)

    bound = eigenvalue_bound(truth.BH, process.B, truth.Sigma)
    record.predicted_mse_general = bound.prediction.per_element_mse
    record.largest_error_eigenvalue = bound.largest_error_eigenvalue
    record.eigenvalue_ratio = bound.bound
    record.eigenvalue_bound_holds = bound.holds
    if nonlinearity.is_odd:
        coeffs = gaussian_coefficients(nonlinearity, quadrature_nodes)
        delta = anisotropy_delta(process.B, signal_directions(process.A))
        record.predicted_mse_asymptotic = error_cov_asymptotic(
            record.n_sources, record.n_bases, coeffs, delta).per_element_mse
    record.subspace_error_estimate = perturbation_correction(
        truth.U_L, truth.S_L, noise_covariance(process, truth)).subspace_error_estimate

    curves = curve_points(experiment.name, record.cell_index, record.seed, result.pca_log)
    curves += curve_points(experiment.name, record.cell_index, record.seed, result.ica_log)
    return curves, result


def run_grid(experiment: ExperimentConfig, threads: Optional[int] = None, quiet: bool = False,
             curves: Optional[List[CurvePoint]] = None,
             encoders: Optional[List[CellOutcome]] = None) -> List[ExperimentRecord]:
    """Run every (cell, seed) of the grid.

    Records come back ordered by (cell index, seed index) whatever the
    completion order. Learning-curve points are appended to ``curves`` in
    the same order when a list is given, and so are the outcomes of the
    successful runs (record plus trained encoders) to ``encoders``.
    """
    experiment.validate()
    cells = experiment.cells()
    jobs = [(index, cell, seed) for index, cell in enumerate(cells) for seed in experiment.grid.seeds]
    workers = config.resolve_threads(threads)
    nodes = config.runtime.quadrature_nodes
    total = len(cells)

    def job(index, cell, seed):
        outcome = run_cell(experiment, index, cell, seed, nodes)
        if not quiet:
            record = outcome.record
            status = "ok" if record.success else "FAILED"
            line = f"Cell {index + 1}/{total} seed {seed}: {status} ({record.wall_clock:.1f}s)"
            if record.success:
                print(line)
            else:
                print(f"{line}: {record.error}", file=sys.stderr)
        return outcome

    if workers == 1:
        outcomes = [job(*item) for item in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(lambda item: job(*item), jobs))

    if curves is not None:
        for outcome in outcomes:
            curves.extend(outcome.curves)
    if encoders is not None:
        encoders.extend(outcome for outcome in outcomes if outcome.pca is not None)
    return [outcome.record for outcome in outcomes]


def failed_count(records: List[ExperimentRecord]) -> int:
    return sum(1 for record in records if not record.success)


def seed_means(records: List[ExperimentRecord], metric: str) -> Dict[int, float]:
    """Per-cell mean of a metric over successful seeds."""
    sums: Dict[int, List[float]] = {}
    for record in records:
        value = getattr(record, metric)
        if record.success and not math.isnan(value):
            sums.setdefault(record.cell_index, []).append(value)
    return {index: sum(values) / len(values) for index, values in sums.items()}
