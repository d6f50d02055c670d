"""Command-line entry point for asln.

Subcommands:
    gen       dump a process (and a sample batch) to a binary container
    theory    print Gaussian coefficients and asymptotic error predictions
    run       run an experiment TOML file
    preset    run one of the experiment presets
    lemma     run the numerical check of lemma 1, 2 or 3

Exit codes: 0 on success, 1 if any grid cell or lemma check failed, 2 on
configuration errors.
"""

import argparse
import csv
import sys
from pathlib import Path
from typing import List, Optional

from .config import NONLINEARITIES, SOURCE_DISTRIBUTIONS, ExperimentConfig, config
from .core.generative import (
    Nonlinearity,
    SourceDistribution,
    build_process,
    default_sample_count,
    ground_truth_decomposition,
    sample_batch,
)
from .core.oracles import LEMMA1_FUNCTIONS, LemmaReport, lemma1_probe, lemma2_check, lemma3_check, random_mixing
from .core.theory import compare_structure, error_cov_asymptotic, gaussian_coefficients
from .errors import AslnError, ConfigurationError
from .harness.plots import plot_preset
from .harness.presets import PRESET_ALIASES, PRESET_NAMES, load_preset, preset_name
from .harness.runner import CellOutcome, failed_count, run_grid
from .storage.container import save_encoders, save_process
from .storage.models import CurvePoint, format_float
from .storage.results import emit_csv, emit_curves_csv

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2


def _int_list(text: str) -> List[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"Expected comma-separated integers, got '{text}'") from e


def _float_list(text: str) -> List[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"Expected comma-separated numbers, got '{text}'") from e


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="Seed (run/preset: replaces the seed list)")
    common.add_argument("--threads", type=int, default=None, help="Worker threads (fallback: ASLN_THREADS)")
    common.add_argument("--csv", type=Path, default=None, help="CSV output path")
    common.add_argument("--svg", action="store_true", help="Also write SVG charts")
    common.add_argument("--quiet", action="store_true", help="No per-cell progress lines")
    common.add_argument("--timings", action="store_true", help="Append the wall-clock column to the CSV")

    parser = argparse.ArgumentParser(prog="asln", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", parents=[common], help="Dump a process and a sample batch")
    gen.add_argument("--n-sources", type=int, default=10)
    gen.add_argument("--n-bases", type=int, default=1000)
    gen.add_argument("--n-inputs", type=int, default=None, help="Defaults to --n-bases")
    gen.add_argument("--nonlinearity", choices=NONLINEARITIES, default="sign")
    gen.add_argument("--source-dist", choices=SOURCE_DISTRIBUTIONS, default="uniform")
    gen.add_argument("--samples", type=int, default=None, help="Batch size (0 for no batch)")
    gen.add_argument("--out", type=Path, default=None)

    theory = sub.add_parser("theory", parents=[common], help="Print coefficient and prediction tables")
    theory.add_argument("--n-sources", type=_int_list, default=[10, 30, 100])
    theory.add_argument("--n-inputs", type=_int_list, default=[100, 300, 1000, 3000, 10000])
    theory.add_argument("--structure", action="store_true",
                        help="Also compare sampled H and Sigma with their leading-order forms")
    theory.add_argument("--nonlinearity", choices=NONLINEARITIES, default="sign", help="With --structure")
    theory.add_argument("--source-dist", choices=SOURCE_DISTRIBUTIONS, default="uniform", help="With --structure")
    theory.add_argument("--n-bases", type=int, default=500, help="With --structure")
    theory.add_argument("--samples", type=int, default=None, help="With --structure")

    run = sub.add_parser("run", parents=[common], help="Run an experiment TOML file")
    run.add_argument("config_path", type=Path)
    run.add_argument("--full-scale", "--paper-scale", dest="full_scale", action="store_true",
                     help="Merge the [full_scale] table")
    run.add_argument("--out", type=Path, default=None, help="Output directory")
    run.add_argument("--save-encoders", action="store_true", help="Write trained weights per cell and seed")

    preset = sub.add_parser("preset", parents=[common], help="Run an experiment preset")
    preset.add_argument("name", choices=PRESET_NAMES + tuple(PRESET_ALIASES))
    preset.add_argument("--full-scale", "--paper-scale", dest="full_scale", action="store_true",
                        help="Merge the [full_scale] table")
    preset.add_argument("--out", type=Path, default=None, help="Output directory")
    preset.add_argument("--save-encoders", action="store_true", help="Write trained weights per cell and seed")

    lemma = sub.add_parser("lemma", parents=[common], help="Numerical lemma checks")
    lemma.add_argument("number", type=int, choices=(1, 2, 3))
    lemma.add_argument("--source-dist", choices=SOURCE_DISTRIBUTIONS, default="uniform")
    lemma.add_argument("--test-function", choices=LEMMA1_FUNCTIONS, default="quartic")
    lemma.add_argument("--ns-grid", type=_int_list, default=[4, 16, 64])
    lemma.add_argument("--samples", type=int, default=None)
    lemma.add_argument("--n-sources", type=int, default=10)
    lemma.add_argument("--n-bases", type=int, default=1000)
    lemma.add_argument("--g", dest="g_kinds", default="cube,tanh")
    lemma.add_argument("--correlations", type=_float_list, default=[0.1, 0.3])
    lemma.add_argument("--n-max", type=int, default=8)
    return parser


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_gen(args) -> int:
    seed = args.seed if args.seed is not None else 0
    n_inputs = args.n_inputs or args.n_bases
    process = build_process(args.n_sources, args.n_bases, n_inputs,
                            Nonlinearity(args.nonlinearity), SourceDistribution(args.source_dist), seed)
    n_samples = default_sample_count(args.n_bases) if args.samples is None else args.samples
    batch = sample_batch(process, n_samples, seed) if n_samples > 0 else None
    out = args.out or config.results_dir / f"process_ns{args.n_sources}_nf{args.n_bases}_seed{seed}.asln"
    save_process(out, process, batch, seed if batch is not None else None)
    print(f"Wrote {out}")
    return EXIT_OK


def cmd_theory(args) -> int:
    print(f"{'f':<10}{'odd':>5}{'f_bar_prime':>16}{'f_bar_sq':>16}{'f_bar_third':>16}")
    coefficients = {}
    for kind in NONLINEARITIES:
        coeffs = gaussian_coefficients(Nonlinearity(kind), config.runtime.quadrature_nodes)
        coefficients[kind] = coeffs
        print(f"{kind:<10}{'yes' if coeffs.odd else 'no':>5}"
              f"{coeffs.f_bar_prime:>16.10f}{coeffs.f_bar_sq:>16.10f}{coeffs.f_bar_third:>16.10f}")

    rows = []
    print()
    print(f"{'f':<10}{'N_s':>6}{'N_x':>8}{'width':>14}{'source':>14}{'per_element':>14}")
    for kind, coeffs in coefficients.items():
        if not coeffs.odd or coeffs.f_bar_prime == 0.0 or kind == "identity":
            continue
        for n_sources in args.n_sources:
            for n_inputs in args.n_inputs:
                if n_sources > n_inputs:
                    continue
                prediction = error_cov_asymptotic(n_sources, n_inputs, coeffs)
                rows.append([kind, n_sources, n_inputs, prediction.finite_width_term,
                             prediction.finite_source_term, prediction.per_element_mse])
                print(f"{kind:<10}{n_sources:>6}{n_inputs:>8}{prediction.finite_width_term:>14.6g}"
                      f"{prediction.finite_source_term:>14.6g}{prediction.per_element_mse:>14.6g}")
    if args.csv:
        args.csv.parent.mkdir(parents=True, exist_ok=True)
        with open(args.csv, 'w', encoding='utf-8', newline='') as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(["nonlinearity", "n_sources", "n_inputs", "finite_width_term",
                             "finite_source_term", "per_element_mse"])
            for row in rows:
                writer.writerow(row[:3] + [format_float(value) for value in row[3:]])
        print(f"Wrote {args.csv}")
    if args.structure:
        _print_structure(args)
    return EXIT_OK


def _print_structure(args) -> None:
    """Sampled H and Sigma against analytic_h and sigma_structure, one row per N_s."""
    seed = args.seed if args.seed is not None else 0
    nonlinearity = Nonlinearity(args.nonlinearity)
    coeffs = gaussian_coefficients(nonlinearity, config.runtime.quadrature_nodes)
    n_samples = args.samples or default_sample_count(args.n_bases)
    print()
    print(f"{'f':<10}{'N_s':>6}{'N_f':>8}{'T':>10}{'H_rel_err':>14}{'Sigma_rel_err':>16}")
    for n_sources in args.n_sources:
        if n_sources > args.n_bases:
            continue
        process = build_process(n_sources, args.n_bases, args.n_bases, nonlinearity,
                                SourceDistribution(args.source_dist), seed)
        truth = ground_truth_decomposition(process, sample_batch(process, n_samples, seed))
        comparison = compare_structure(truth.H, truth.Sigma, process.A, process.a, coeffs)
        print(f"{nonlinearity.kind:<10}{n_sources:>6}{args.n_bases:>8}{n_samples:>10}"
              f"{comparison.h_relative_error:>14.6g}{comparison.sigma_relative_error:>16.6g}")


def _experiment_overrides(args) -> dict:
    return {"grid.seeds": [args.seed]} if args.seed is not None else {}


def _finish_run(name: str, experiment: ExperimentConfig, args, out_dir: Path) -> int:
    curves: List[CurvePoint] = []
    encoders: Optional[List[CellOutcome]] = [] if args.save_encoders else None
    records = run_grid(experiment, threads=args.threads, quiet=args.quiet, curves=curves, encoders=encoders)
    include_timing = args.timings or config.output.include_timing
    csv_path = args.csv or Path(experiment.output or out_dir / f"{name}.csv")
    emit_csv(records, csv_path, include_timing=include_timing)
    print(f"Wrote {csv_path}")
    if curves:
        curves_path = csv_path.with_name(csv_path.stem + "_curves.csv")
        emit_curves_csv(curves, curves_path)
        print(f"Wrote {curves_path}")
    if args.svg or config.output.write_svg:
        for path in plot_preset(name, records, curves, csv_path.parent):
            print(f"Wrote {path}")
    for outcome in encoders or []:
        record = outcome.record
        path = csv_path.parent / "encoders" / f"{name}_cell{record.cell_index}_seed{record.seed}.asln"
        save_encoders(path, outcome.pca, outcome.ica)
    if encoders:
        print(f"Wrote {len(encoders)} encoder checkpoints to {csv_path.parent / 'encoders'}")
    failures = failed_count(records)
    if failures:
        print(f"{failures} of {len(records)} cell runs failed", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def cmd_run(args) -> int:
    experiment = ExperimentConfig.from_toml(args.config_path, full_scale=args.full_scale)
    experiment = experiment.with_overrides(_experiment_overrides(args))
    out_dir = args.out or config.results_dir / experiment.name
    return _finish_run(experiment.name, experiment, args, out_dir)


def cmd_preset(args) -> int:
    name = preset_name(args.name)
    experiment = load_preset(name, _experiment_overrides(args), full_scale=args.full_scale)
    out_dir = args.out or config.results_dir / name
    return _finish_run(name, experiment, args, out_dir)


def print_report(report: LemmaReport) -> None:
    print(f"Lemma {report.lemma}: {'PASS' if report.passed else 'FAIL'}"
          f"{' (inconclusive)' if report.inconclusive else ''}")
    for check in report.checks:
        print(f"  {check.name:<32} predicted {check.predicted:>14.6g}  measured {check.measured:>14.6g}"
              f"  [{check.comparison} {check.tolerance:.3g}]  {'ok' if check.passed else 'FAIL'}")
    for key, value in report.details.items():
        print(f"  {key:<32} {value:.6g}")


def cmd_lemma(args) -> int:
    seed = args.seed if args.seed is not None else 0
    if args.number == 1:
        report = lemma1_probe(SourceDistribution(args.source_dist), args.test_function, args.ns_grid,
                              n_samples=args.samples or 100_000, seed=seed)
    elif args.number == 2:
        g_kinds = [g.strip() for g in args.g_kinds.split(",") if g.strip()]
        for g in g_kinds:
            if g not in NONLINEARITIES:
                raise ConfigurationError(f"Unknown nonlinearity '{g}'")
        report = lemma2_check(g_kinds, args.correlations, n_max=args.n_max,
                              mc_samples=args.samples or 1_000_000, seed=seed)
    else:
        report = lemma3_check(random_mixing(args.n_bases, args.n_sources, seed))
    print_report(report)
    return EXIT_OK if report.passed else EXIT_FAILED


COMMANDS = {
    "gen": cmd_gen,
    "theory": cmd_theory,
    "run": cmd_run,
    "preset": cmd_preset,
    "lemma": cmd_lemma,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except AslnError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_FAILED
    except OSError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
