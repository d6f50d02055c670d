"""Desk-scale acceptance report for asln.

Runs every acceptance check at the reduced scales the repository targets
(N_s <= 30, N_x <= 3000) and reports, per check, the measured value, the
target and whether it holds. Full-size grids are out of reach on a desk
machine; the tolerances below stand in for them.

Usage:
    python -m benchmarks.benchmark_acceptance
    python -m benchmarks.benchmark_acceptance --seeds 3 --samples 20000
    python -m benchmarks.benchmark_acceptance --only coefficients lemma2 lemma3

Outputs:
    benchmarks/results/acceptance_<timestamp>.csv   (one row per check)
    benchmarks/results/acceptance_<timestamp>.md    (summary table + verdict)
"""

import argparse
import csv
import math
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional

from asln.config import ExperimentConfig, config
from asln.core.encoders import CascadeConfig, cascade, oja_train, pca_whiten_batch
from asln.core.generative import build_process, default_sample_count, ground_truth_decomposition, sample_batch
from asln.core.metrics import evaluate, subspace_error
from asln.core.oracles import lemma2_check, lemma3_check, random_mixing
from asln.core.theory import error_cov_asymptotic, gaussian_coefficients
from asln.harness.presets import PRESET_NAMES, load_preset
from asln.harness.runner import run_grid, seed_means
from asln.storage.results import emit_csv


# --------------------------------------------------------------------------- #
# Results
# --------------------------------------------------------------------------- #
@dataclass
class Check:
    criterion: str
    name: str
    measured: float
    target: str
    passed: bool


@dataclass
class CriterionResult:
    name: str
    checks: List[Check] = field(default_factory=list)
    seconds: float = 0.0
    error: Optional[str] = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(check.passed for check in self.checks)

    def add(self, name: str, measured: float, target: str, passed: bool) -> None:
        self.checks.append(Check(self.name, name, float(measured), target, bool(passed)))


def _within_factor(measured: float, predicted: float, factor: float = 2.0) -> bool:
    if not (measured > 0 and predicted > 0):
        return False
    return 1.0 / factor <= measured / predicted <= factor


def _grid(name: str, seeds: int, samples: Optional[int], **grid) -> ExperimentConfig:
    grid.setdefault("seeds", list(range(seeds)))
    # None keeps T = max(1e5, 20 N_f) per cell.
    if samples is not None:
        grid.setdefault("n_samples", samples)
    return ExperimentConfig.from_dict({"name": name, "grid": grid})


# --------------------------------------------------------------------------- #
# Criteria
# --------------------------------------------------------------------------- #
def check_sign_grid(result: CriterionResult, args) -> None:
    """Eigenvalue-ratio trend, subspace estimate and source identification."""
    n_inputs = [100, 300, 1000]
    records = run_grid(_grid("acceptance_sign", args.seeds, args.samples, n_sources=[10],
                             n_inputs=n_inputs, nonlinearities=["sign"]),
                       threads=args.threads, quiet=True)
    ratios = seed_means(records, "eigenvalue_ratio")
    trend = [ratios[i] for i in range(len(n_inputs))]
    decreasing = all(a > b for a, b in zip(trend, trend[1:]))
    result.add("ratio_decreasing", float(decreasing), "1", decreasing)
    result.add("ratio_nx1000", trend[-1], "< 0.1", trend[-1] < 0.1)

    last = len(n_inputs) - 1
    measured = seed_means(records, "subspace_error")[last]
    estimate = seed_means(records, "subspace_error_estimate")[last]
    result.add("subspace_error_nx1000", measured, f"x2 of {estimate:.4g}", _within_factor(measured, estimate))

    cells = [r for r in records if r.cell_index == last and r.success]
    identified = sum(1 for r in cells if r.diag_cov_min > 0.95 and r.offdiag_cov_max < 0.2)
    needed = math.ceil(0.8 * args.seeds)
    result.add("identified_seeds", identified, f">= {needed} of {args.seeds}", identified >= needed)


def check_error_law(result: CriterionResult, args) -> None:
    """Aligned MSE against the Delta = I prediction, slope and saturation."""
    n_inputs = [300, 1000, 3000]
    records = run_grid(_grid("acceptance_law", args.seeds, args.samples, n_sources=[10, 30],
                             n_inputs=n_inputs, nonlinearities=["sign"]),
                       threads=args.threads, quiet=True)
    means = seed_means(records, "bss_mse")
    coeffs = gaussian_coefficients("sign")

    # Cells run N_s-major: 0..2 are N_s=10, 3..5 are N_s=30.
    wide = [means[3 + i] for i in range(len(n_inputs))]
    for n, mse in zip(n_inputs, wide):
        predicted = error_cov_asymptotic(30, n, coeffs).per_element_mse
        result.add(f"mse_ns30_nx{n}", mse, f"x2 of {predicted:.4g}", _within_factor(mse, predicted))
    slope = math.log(wide[1] / wide[0]) / math.log(n_inputs[1] / n_inputs[0])
    result.add("slope_ns30", slope, "[-1.4, -0.6]", -1.4 <= slope <= -0.6)

    low, high = means[0], means[1]
    change = abs(low - high) / max(low, high)
    result.add("saturation_ns10", change, "< 0.5", change < 0.5)


def check_relu(result: CriterionResult, args) -> None:
    """Non-odd nonlinearity against the general prediction."""
    records = run_grid(_grid("acceptance_relu", args.seeds, args.samples, n_sources=[10],
                             n_inputs=[1000], nonlinearities=["relu"]),
                       threads=args.threads, quiet=True)
    measured = seed_means(records, "bss_mse")[0]
    predicted = seed_means(records, "predicted_mse_general")[0]
    result.add("mse_relu", measured, f"x2 of {predicted:.4g}", _within_factor(measured, predicted))


def check_hebbian(result: CriterionResult, args) -> None:
    """Oja against batch PCA, then the Oja + Amari cascade against the batch one."""
    process = build_process(20, 500, 500, "sign", "uniform", seed=0)
    batch = sample_batch(process, args.samples or default_sample_count(500), seed=0)
    truth = ground_truth_decomposition(process, batch)
    train, held = batch.split()

    batch_error = subspace_error(pca_whiten_batch(train.X, 20).components, truth.U_L)
    oja, _ = oja_train(train.X, 20, eta=1e-3, epochs=30, reference=truth.U_L)
    oja_error = subspace_error(oja.components, truth.U_L)
    result.add("oja_subspace_error", oja_error, f"<= 2 x {batch_error:.4g}", oja_error <= 2.0 * batch_error)

    mse = {}
    for mode in ("batch", "oja"):
        fitted = cascade(train, 20, CascadeConfig(mode=mode), reference=truth.U_L)
        metrics, _ = evaluate(fitted.transform(held.X), held.S)
        mse[mode] = metrics.bss_mse
    result.add("oja_cascade_mse", mse["oja"], f"<= 2 x {mse['batch']:.4g}", mse["oja"] <= 2.0 * mse["batch"])


def check_lemma3(result: CriterionResult, args) -> None:
    report = lemma3_check(random_mixing(1000, 10, seed=0))
    for item in report.checks:
        result.add(item.name, item.measured, f"{item.comparison} {item.predicted:.4g}", item.passed)


def check_lemma2(result: CriterionResult, args) -> None:
    report = lemma2_check(mc_samples=1_000_000, seed=0)
    for item in report.checks:
        result.add(item.name, item.measured, f"{item.predicted:.6g} +/- {item.tolerance:.2g}", item.passed)


def check_coefficients(result: CriterionResult, args) -> None:
    expected = {
        "sign": (math.sqrt(2.0 / math.pi), 1.0, -math.sqrt(2.0 / math.pi)),
        "cube": (3.0, 15.0, 6.0),
    }
    for kind, values in expected.items():
        coeffs = gaussian_coefficients(kind)
        got = (coeffs.f_bar_prime, coeffs.f_bar_sq, coeffs.f_bar_third)
        for label, value, target in zip(("f_bar_prime", "f_bar_sq", "f_bar_third"), got, values):
            result.add(f"{kind}_{label}", value, f"{target:.10g}", abs(value - target) <= 1e-10)


def check_determinism(result: CriterionResult, args) -> None:
    """Every preset twice (serial, then threaded) must give the same bytes."""
    overrides = {"grid.seeds": [0]}
    if args.samples is not None:
        overrides["grid.n_samples"] = args.samples
    with tempfile.TemporaryDirectory() as tmp:
        for name in PRESET_NAMES:
            experiment = load_preset(name, overrides)
            first = emit_csv(run_grid(experiment, threads=1, quiet=True), Path(tmp) / f"{name}_a.csv")
            second = emit_csv(run_grid(experiment, threads=args.threads, quiet=True), Path(tmp) / f"{name}_b.csv")
            same = first.read_bytes() == second.read_bytes()
            result.add(f"{name}_identical", float(same), "1", same)


CRITERIA: Dict[str, Callable] = {
    "sign_grid": check_sign_grid,
    "error_law": check_error_law,
    "relu": check_relu,
    "hebbian": check_hebbian,
    "lemma3": check_lemma3,
    "lemma2": check_lemma2,
    "coefficients": check_coefficients,
    "determinism": check_determinism,
}


def run_criterion(name: str, args) -> CriterionResult:
    result = CriterionResult(name)
    started = time.perf_counter()
    print(f"[{name}] running...", flush=True)
    try:
        CRITERIA[name](result, args)
    except Exception as e:
        result.error = f"{type(e).__name__}: {e}"
        print(f"[{name}] failed: {result.error}", file=sys.stderr)
    result.seconds = time.perf_counter() - started
    print(f"[{name}] {'PASS' if result.passed else 'FAIL'} ({result.seconds:.1f}s)")
    return result


# --------------------------------------------------------------------------- #
# Reports
# --------------------------------------------------------------------------- #
def write_reports(results: List[CriterionResult], args, out_dir: Path, stamp: str) -> tuple[Path, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"acceptance_{stamp}.csv"
    md_path = out_dir / f"acceptance_{stamp}.md"

    # ---- CSV: one row per check ----
    with open(csv_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["criterion", "check", "measured", "target", "passed"])
        for result in results:
            for check in result.checks:
                writer.writerow([check.criterion, check.name, format(check.measured, ".6g"),
                                 check.target, int(check.passed)])

    # ---- Markdown report ----
    lines = [
        "# Acceptance report",
        "",
        f"- Seeds per grid cell: **{args.seeds}**, samples per batch: **{args.samples or 'max(1e5, 20 N_f)'}**",
        f"- Threads: **{config.resolve_threads(args.threads)}**",
        f"- Run: `{stamp}`",
        "",
        "| Criterion | Checks passed | Time | Verdict |",
        "|-----------|---------------|------|---------|",
    ]
    for result in results:
        passed = sum(1 for check in result.checks if check.passed)
        verdict = "PASS" if result.passed else "FAIL"
        lines.append(f"| {result.name} | {passed}/{len(result.checks)} | {result.seconds:.1f}s | {verdict} |")
    lines.append("")

    failures = [(r, c) for r in results for c in r.checks if not c.passed]
    if failures:
        lines.append("## Failed checks")
        lines.append("")
        for result, check in failures:
            lines.append(f"- `{result.name}.{check.name}`: {check.measured:.6g} (target {check.target})")
        lines.append("")
    for result in results:
        if result.error:
            lines.append(f"- **{result.name}** raised `{result.error}`")
    total = sum(1 for r in results if r.passed)
    lines.append("")
    lines.append(f"**Verdict:** {total}/{len(results)} criteria pass.")
    md_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return csv_path, md_path


# --------------------------------------------------------------------------- #
# Entry point
# --------------------------------------------------------------------------- #
def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Desk-scale acceptance checks for asln.")
    parser.add_argument("--seeds", type=int, default=10, help="Seeds per grid cell")
    parser.add_argument("--samples", type=int, default=None,
                        help="Samples per batch (default: max(1e5, 20 N_f))")
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--only", nargs="+", choices=list(CRITERIA), default=list(CRITERIA))
    args = parser.parse_args(argv)
    if args.seeds < 1 or (args.samples is not None and args.samples < 2):
        print("Need at least 1 seed and 2 samples.", file=sys.stderr)
        return 2

    results = [run_criterion(name, args) for name in args.only]

    stamp = time.strftime("%Y%m%d_%H%M%S")
    out_dir = Path(__file__).parent / "results"
    csv_path, md_path = write_reports(results, args, out_dir, stamp)

    print("\n" + "=" * 60)
    print(md_path.read_text(encoding="utf-8"))
    print("=" * 60)
    print(f"\nCSV : {csv_path}")
    print(f"MD  : {md_path}")
    return 0 if all(result.passed for result in results) else 1


if __name__ == "__main__":
    raise SystemExit(main())
