"""Command-line front end: generate, simulate, analyze, and render reports.

Commands
--------
``generate``  designed dataset (unevaluated signals) from a distribution spec.
``simulate``  fully evaluated dataset from a synthetic ground-truth config.
``analyze``   fit, reconstruct, and gap-classify an evaluated dataset; writes
              the machine-readable report plus plot-data CSVs.
``report``    re-render static SVG figures from an existing analyze output.

Exit codes: 0 success, 2 configuration/validation error, 3 I/O error,
4 solver failure.  stdout carries nothing except the optional ``--json``
summary; diagnostics go to stderr.  Every command writes a manifest with
enough context (settings snapshot, seeds, input digests) to reproduce the run.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .deformation_jensen import (
    DEFAULT_BOOTSTRAP_SEED,
    DEFAULT_RESAMPLES,
    DEFAULT_TOLERANCE,
    DeformationMap,
    FitError,
    JensenReport,
    QualityDrop,
    build_jensen_report,
    fit_deformation,
    quality_drop,
    std_expansion,
)
from .inverse_reconstruction import (
    DEFAULT_CONVERGENCE_TOL,
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_PRIOR_WEIGHT,
    InverseConfig,
    ReconstructionResult,
    SolverError,
    distributional_prior_from_designed,
    observed_matrix,
    reconstruct_dataset,
    write_reconstructions,
)
from .response_model import (
    DEFAULT_RIDGE,
    FitDiagnostics,
    ResponseSurface,
    diagnostics,
    fit_ridge,
)
from .stress_domain import (
    DEFAULT_DATASET_SEED,
    SIGNAL_DIM_NAMES,
    STRESS_DIM_NAMES,
    DatasetError,
    SampleRecord,
    StressDistributionSpec,
    build_designed_dataset,
    centered_matrix,
    ingest_records,
    write_records,
)
from .synthetic_harness import SyntheticArchitecture, simulate_dataset

FORMAT_VERSION = "1"
EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_SOLVER = 4

_SETTING_DEFAULTS = {
    "rho": DEFAULT_RIDGE,
    "lambda": DEFAULT_PRIOR_WEIGHT,
    "tolerance": DEFAULT_TOLERANCE,
    "resamples": DEFAULT_RESAMPLES,
    "bootstrap_seed": DEFAULT_BOOTSTRAP_SEED,
    "prior": "anchored",
}


@dataclass(frozen=True)
class RunManifest:
    """Reproduction context written next to every command's outputs."""

    command: str
    inputs: dict
    out: str
    settings: dict
    seeds: dict
    tool_version: str
    created_utc: str

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "inputs": self.inputs,
            "out": self.out,
            "settings": self.settings,
            "seeds": self.seeds,
            "tool_version": self.tool_version,
            "created_utc": self.created_utc,
        }


def _file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(path: Path, command: str, inputs: dict, out: str,
                    settings: dict, seeds: dict) -> None:
    manifest = RunManifest(
        command=command,
        inputs=inputs,
        out=out,
        settings=settings,
        seeds=seeds,
        tool_version=__version__,
        created_utc=datetime.now(timezone.utc).isoformat(),
    )
    path.write_text(json.dumps(manifest.to_dict(), indent=2) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class ArchitectureAnalysis:
    """Everything the pipeline produced for one architecture."""

    architecture_id: str
    records: list[SampleRecord]
    surface: ResponseSurface
    fit: FitDiagnostics
    results: list[ReconstructionResult]
    deformation: DeformationMap | None
    report: JensenReport
    spread_change: np.ndarray
    quality: QualityDrop | None


def analyze_records(
    records: Sequence[SampleRecord],
    rho: float = DEFAULT_RIDGE,
    prior: str = "anchored",
    prior_weight: float = DEFAULT_PRIOR_WEIGHT,
    tolerance: float = DEFAULT_TOLERANCE,
    resamples: int = DEFAULT_RESAMPLES,
    bootstrap_seed: int = DEFAULT_BOOTSTRAP_SEED,
    max_iterations: int = DEFAULT_MAX_ITERATIONS,
    convergence_tol: float = DEFAULT_CONVERGENCE_TOL,
) -> list[ArchitectureAnalysis]:
    """Run the full pipeline per architecture: fit, reconstruct, gap, label.

    Records must all be evaluated.  Architectures are processed in sorted id
    order so repeated runs produce identical output regardless of input order.
    """
    if not records:
        raise DatasetError("dataset is empty — nothing to analyze")
    unevaluated = [r for r in records if r.signals is None]
    if unevaluated:
        first = unevaluated[0]
        raise DatasetError(
            f"{len(unevaluated)} records have unevaluated signals "
            f"(first: {first.prompt_id}/{first.variant_id}); evaluate or simulate first"
        )
    if prior not in ("anchored", "distributional"):
        raise DatasetError(f"prior must be 'anchored' or 'distributional', got {prior!r}")
    analyses = []
    for arch_id in sorted({r.architecture_id for r in records}):
        arch_records = [r for r in records if r.architecture_id == arch_id]
        X = centered_matrix(arch_records)
        surface = fit_ridge(arch_records, rho)
        cfg = InverseConfig(
            prior_weight=prior_weight,
            prior=(
                distributional_prior_from_designed(X)
                if prior == "distributional"
                else InverseConfig().prior
            ),
            max_iterations=max_iterations,
            convergence_tol=convergence_tol,
        )
        results = reconstruct_dataset(arch_records, surface, cfg)
        X_obs = observed_matrix(results)
        deformation = (
            fit_deformation(list(zip(X, X_obs)), rho, arch_id) if len(X) >= 17 else None
        )
        report = build_jensen_report(
            arch_id, X, X_obs,
            tolerance=tolerance, resamples=resamples, bootstrap_seed=bootstrap_seed,
        )
        try:
            quality = quality_drop(arch_records)
        except DatasetError:
            quality = None  # no clean rows (or no perturbed rows) in this slice
        analyses.append(
            ArchitectureAnalysis(
                architecture_id=arch_id,
                records=arch_records,
                surface=surface,
                fit=diagnostics(surface, arch_records),
                results=results,
                deformation=deformation,
                report=report,
                spread_change=std_expansion(X, X_obs),
                quality=quality,
            )
        )
    return analyses


def _analysis_payload(analyses: Sequence[ArchitectureAnalysis], settings: dict) -> dict:
    architectures = []
    for a in analyses:
        entry = a.report.to_dict()
        entry["tolerance"] = settings["tolerance"]
        entry["n_clean"] = sum(r.is_clean for r in a.records)
        entry["n_perturbed"] = sum(not r.is_clean for r in a.records)
        entry["std_expansion"] = dict(
            zip(STRESS_DIM_NAMES, (float(v) for v in a.spread_change))
        )
        entry["quality_drop"] = None if a.quality is None else a.quality.to_dict()
        entry["fit_diagnostics"] = a.fit.to_dict()
        entry["reconstruction"] = {
            "n_converged": sum(r.converged for r in a.results),
            "mean_iterations": float(np.mean([r.iterations for r in a.results])),
            "mean_objective": float(np.mean([r.objective_value for r in a.results])),
        }
        entry["files"] = {
            "model": f"model_{a.architecture_id}.json",
            "reconstruction": f"reconstruction_{a.architecture_id}.jsonl",
            "deformation": (
                None if a.deformation is None else f"deformation_{a.architecture_id}.json"
            ),
        }
        architectures.append(entry)
    return {
        "format_version": FORMAT_VERSION,
        "potential": "squared_norm",
        "variance_convention": "population",
        "settings": settings,
        "architectures": architectures,
    }


def _write_analysis_outputs(
    analyses: Sequence[ArchitectureAnalysis], out_dir: Path, settings: dict
) -> dict:
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = _analysis_payload(analyses, settings)
    (out_dir / "report.json").write_text(
        json.dumps(payload, indent=2) + "\n", encoding="utf-8"
    )
    for a in analyses:
        a.surface.save(out_dir / f"model_{a.architecture_id}.json")
        if a.deformation is not None:
            a.deformation.save(out_dir / f"deformation_{a.architecture_id}.json")
        write_reconstructions(
            a.records, a.results, out_dir / f"reconstruction_{a.architecture_id}.jsonl"
        )
    with open(out_dir / "gap_summary.csv", "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(
            ["architecture_id", "n_samples", "expected_dispersion", "observed_dispersion",
             "gap", "ci_low", "ci_high", "classification"]
        )
        for a in analyses:
            r = a.report
            writer.writerow(
                [r.architecture_id, r.n_samples, r.expected_dispersion,
                 r.observed_dispersion, r.gap, r.ci_low, r.ci_high, r.classification]
            )
    with open(out_dir / "marginal_scatter.csv", "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["architecture_id", "dimension", "designed", "reconstructed"])
        for a in analyses:
            for record, result in zip(a.records, a.results):
                designed = record.designed_stress.as_array()
                observed = result.psi_obs.as_array()
                for d, name in enumerate(STRESS_DIM_NAMES):
                    writer.writerow(
                        [a.architecture_id, name, designed[d], observed[d]]
                    )
    with open(out_dir / "fit_diagnostics.csv", "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["architecture_id", "signal", "r_squared", "rmse", "mae"])
        for a in analyses:
            for name in SIGNAL_DIM_NAMES:
                fit = a.fit.per_signal[name]
                writer.writerow(
                    [a.architecture_id, name,
                     "" if fit.r_squared is None else fit.r_squared, fit.rmse, fit.mae]
                )
    return payload


def _load_settings(args: argparse.Namespace) -> dict:
    """Effective analyze settings: CLI flag > config file > built-in default."""
    from_file: dict = {}
    if args.config is not None:
        try:
            from_file = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise DatasetError(f"config file {args.config} is not valid JSON: {exc}") from exc
        unknown = set(from_file) - set(_SETTING_DEFAULTS)
        if unknown:
            raise DatasetError(f"unknown config keys: {sorted(unknown)}")
    settings = {}
    for key, default in _SETTING_DEFAULTS.items():
        flag_value = getattr(args, key.replace("-", "_"))
        if flag_value is not None:
            settings[key] = flag_value
        elif key in from_file:
            settings[key] = from_file[key]
        else:
            settings[key] = default
    if settings["prior"] not in ("anchored", "distributional"):
        raise DatasetError(
            f"prior must be 'anchored' or 'distributional', got {settings['prior']!r}"
        )
    return settings


def _cmd_generate(args: argparse.Namespace) -> dict:
    spec = (
        StressDistributionSpec.default()
        if args.spec is None
        else StressDistributionSpec.from_json_file(args.spec)
    )
    records = build_designed_dataset(spec, args.clean, args.variants, args.seed, args.arch)
    out = Path(args.out)
    write_records(records, out)
    _write_manifest(
        out.with_name(out.name + ".manifest.json"),
        "generate",
        {} if args.spec is None else {"spec": {"path": str(Path(args.spec).resolve()),
                                               "sha256": _file_digest(Path(args.spec))}},
        str(out),
        {"spec": spec.to_dict(), "clean": args.clean, "variants": args.variants,
         "architecture_id": args.arch},
        {"dataset": args.seed},
    )
    print(f"wrote {len(records)} records to {out}", file=sys.stderr)
    return {"command": "generate", "records": len(records), "out": str(out)}


def _cmd_simulate(args: argparse.Namespace) -> dict:
    arch = SyntheticArchitecture.from_json_file(args.config)
    spec = (
        StressDistributionSpec.default()
        if args.spec is None
        else StressDistributionSpec.from_json_file(args.spec)
    )
    records = simulate_dataset(spec, arch, args.clean, args.variants, args.seed)
    out = Path(args.out)
    write_records(records, out)
    inputs = {"harness_config": {"path": str(Path(args.config).resolve()),
                                 "sha256": _file_digest(Path(args.config))}}
    if args.spec is not None:
        inputs["spec"] = {"path": str(Path(args.spec).resolve()),
                          "sha256": _file_digest(Path(args.spec))}
    _write_manifest(
        out.with_name(out.name + ".manifest.json"),
        "simulate",
        inputs,
        str(out),
        {"architecture": arch.to_dict(), "spec": spec.to_dict(),
         "clean": args.clean, "variants": args.variants},
        {"dataset": args.seed, "signal_noise": args.seed + 1},
    )
    print(f"wrote {len(records)} evaluated records to {out}", file=sys.stderr)
    return {"command": "simulate", "records": len(records), "out": str(out)}


def _cmd_analyze(args: argparse.Namespace) -> dict:
    settings = _load_settings(args)
    dataset = Path(args.dataset)
    records = ingest_records(dataset)
    analyses = analyze_records(
        records,
        rho=settings["rho"],
        prior=settings["prior"],
        prior_weight=settings["lambda"],
        tolerance=settings["tolerance"],
        resamples=settings["resamples"],
        bootstrap_seed=settings["bootstrap_seed"],
    )
    out_dir = Path(args.out)
    payload = _write_analysis_outputs(analyses, out_dir, settings)
    _write_manifest(
        out_dir / "manifest.json",
        "analyze",
        {"dataset": {"path": str(dataset.resolve()), "sha256": _file_digest(dataset)}},
        str(out_dir),
        settings,
        {"bootstrap": settings["bootstrap_seed"]},
    )
    for a in analyses:
        print(
            f"{a.architecture_id}: gap={a.report.gap:+.4f} "
            f"CI=[{a.report.ci_low:+.4f}, {a.report.ci_high:+.4f}] "
            f"-> {a.report.classification}",
            file=sys.stderr,
        )
    return {
        "command": "analyze",
        "out": str(out_dir),
        "architectures": [
            {"architecture_id": a.report.architecture_id, "gap": a.report.gap,
             "ci_low": a.report.ci_low, "ci_high": a.report.ci_high,
             "classification": a.report.classification}
            for a in analyses
        ],
        "format_version": payload["format_version"],
    }


def _render_figures(analysis_dir: Path, out_dir: Path) -> list[str]:
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "stressgap"
    import matplotlib.pyplot as plt

    report_path = analysis_dir / "report.json"
    payload = json.loads(report_path.read_text(encoding="utf-8"))
    architectures = payload["architectures"]
    if not architectures:
        raise DatasetError(f"{report_path} lists no architectures")
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []

    ids = [a["architecture_id"] for a in architectures]
    gaps = np.array([a["gap"] for a in architectures])
    err_low = gaps - np.array([a["ci_low"] for a in architectures])
    err_high = np.array([a["ci_high"] for a in architectures]) - gaps
    tolerance = payload["settings"]["tolerance"]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(ids, gaps, color="#4878d0")
    ax.errorbar(
        ids, gaps, yerr=np.vstack([err_low, err_high]), fmt="none", ecolor="#333333", capsize=4
    )
    ax.axhspan(-tolerance, tolerance, color="#999999", alpha=0.25, label="resilient band")
    ax.axhline(0.0, color="#333333", linewidth=0.8)
    ax.set_ylabel("Jensen gap (observed - expected dispersion)")
    ax.set_xlabel("architecture")
    ax.legend()
    fig.tight_layout()
    gap_path = out_dir / "gap_by_architecture.svg"
    fig.savefig(gap_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    written.append(str(gap_path))

    scatter_path = analysis_dir / "marginal_scatter.csv"
    rows: dict[tuple[str, str], list[tuple[float, float]]] = {}
    with open(scatter_path, "r", encoding="utf-8", newline="") as handle:
        for row in csv.DictReader(handle):
            key = (row["architecture_id"], row["dimension"])
            rows.setdefault(key, []).append(
                (float(row["designed"]), float(row["reconstructed"]))
            )
    fig, axes = plt.subplots(2, 2, figsize=(8, 8))
    for ax, dim in zip(axes.ravel(), STRESS_DIM_NAMES):
        for arch_id in ids:
            points = rows.get((arch_id, dim), [])
            if points:
                xs, ys = zip(*points)
                ax.scatter(xs, ys, s=6, alpha=0.4, label=arch_id)
        ax.plot([0, 1], [0, 1], color="#333333", linewidth=0.8, linestyle="--")
        ax.set_title(dim)
        ax.set_xlabel("designed stress")
        ax.set_ylabel("reconstructed stress")
        ax.set_xlim(-0.02, 1.02)
        ax.set_ylim(-0.02, 1.02)
    axes[0, 0].legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    marginal_path = out_dir / "marginal_scatter.svg"
    fig.savefig(marginal_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    written.append(str(marginal_path))
    return written


def _cmd_report(args: argparse.Namespace) -> dict:
    analysis_dir = Path(args.analysis_dir)
    out_dir = Path(args.out) if args.out else analysis_dir
    written = _render_figures(analysis_dir, out_dir)
    for path in written:
        print(f"wrote {path}", file=sys.stderr)
    return {"command": "report", "figures": written}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stressgap",
        description="Stress-response modeling and Jensen-gap analysis for stressed evaluations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="emit a designed dataset (signals unevaluated)")
    gen.add_argument("--spec", help="stress distribution spec JSON (default: built-in)")
    gen.add_argument("--seed", type=int, default=DEFAULT_DATASET_SEED,
                     help="dataset generation seed")
    gen.add_argument("--clean", type=int, default=50, help="number of clean prompts")
    gen.add_argument("--variants", type=int, default=10,
                     help="perturbed variants per clean prompt")
    gen.add_argument("--arch", default="A0", help="architecture id stamped on the records")
    gen.add_argument("--out", required=True, help="output JSONL path")
    gen.add_argument("--json", action="store_true", help="print a JSON summary to stdout")

    sim = sub.add_parser("simulate", help="emit a fully evaluated synthetic dataset")
    sim.add_argument("--config", required=True, help="synthetic architecture JSON")
    sim.add_argument("--spec", help="stress distribution spec JSON (default: built-in)")
    sim.add_argument("--seed", type=int, default=DEFAULT_DATASET_SEED,
                     help="dataset seed (signal noise uses seed+1)")
    sim.add_argument("--clean", type=int, default=50, help="number of clean prompts")
    sim.add_argument("--variants", type=int, default=10,
                     help="perturbed variants per clean prompt")
    sim.add_argument("--out", required=True, help="output JSONL path")
    sim.add_argument("--json", action="store_true", help="print a JSON summary to stdout")

    ana = sub.add_parser("analyze", help="fit, reconstruct, and gap-classify a dataset")
    ana.add_argument("dataset", help="evaluated dataset JSONL")
    ana.add_argument("--out", required=True, help="output directory")
    ana.add_argument("--config", help="settings JSON (flags override it)")
    ana.add_argument("--rho", type=float, help="ridge strength (default 1e-3)")
    ana.add_argument("--lambda", dest="lambda", type=float,
                     help="inverse prior weight (default 0.05)")
    ana.add_argument("--tolerance", type=float, help="resilience band half-width (default 0.01)")
    ana.add_argument("--resamples", type=int, help="bootstrap resamples (default 500)")
    ana.add_argument("--bootstrap-seed", dest="bootstrap_seed", type=int,
                     help="bootstrap seed (default 7)")
    ana.add_argument("--prior", choices=["anchored", "distributional"],
                     help="inverse regularizer (default anchored)")
    ana.add_argument("--json", action="store_true", help="print a JSON summary to stdout")

    rep = sub.add_parser("report", help="render SVG figures from an analyze output directory")
    rep.add_argument("analysis_dir", help="directory written by analyze")
    rep.add_argument("--out", help="figure output directory (default: analysis dir)")
    rep.add_argument("--json", action="store_true", help="print a JSON summary to stdout")

    return parser


_COMMANDS = {
    "generate": _cmd_generate,
    "simulate": _cmd_simulate,
    "analyze": _cmd_analyze,
    "report": _cmd_report,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        summary = _COMMANDS[args.command](args)
    except SolverError as exc:
        print(f"error: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DatasetError, FitError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyError as exc:
        print(f"error: missing required field {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.json:
        print(json.dumps(summary))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
