"""Command-line orchestrator: validate -> augment-names -> compute -> analyze -> report.

Stages communicate through files so external tools (samplers, scorers) can
interoperate. Exit codes are a stable contract: 0 success, 1 validation or
analysis failure, 2 usage error, 3 partial completion.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from . import __version__
from .analysis import analyze_bins, analyze_correlations, analyze_effects
from .bias import DEFAULT_NAMES, augment_with_names, build_contrast_sets, pronoun_template
from .dataset import (
    dump_json,
    load_instances,
    load_manifest,
    load_metric_records,
    validate_corpus,
    write_effect_tables,
    write_instances,
    write_metric_records,
)
from .entropy import DEFAULT_ALPHA_GRID
from .pipeline import ALL_METHODS, ComputeConfig, compute_corpus
from .report import (
    BINS_FILE,
    CORRELATIONS_CSV,
    CORRELATIONS_FILE,
    EFFECTS_CSV,
    EFFECTS_FILE,
    METRICS_FILE,
    RUN_FILE,
    SUMMARY_FILE,
    generate_report,
)
from .types import Gender, ValidationError
from .analysis import bins_to_json

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_PARTIAL = 3

logger = logging.getLogger("uqbias")


def _fail(message: str, code: int = EXIT_FAILURE) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _parse_methods(raw: str) -> tuple[str, ...]:
    methods = tuple(m.strip().lower() for m in raw.split(",") if m.strip())
    unknown = set(methods) - set(ALL_METHODS)
    if unknown:
        raise click.BadParameter(f"unknown methods {sorted(unknown)}; choose from {ALL_METHODS}")
    if not methods:
        raise click.BadParameter("at least one method is required")
    return methods


@click.group()
@click.version_option(version=__version__, prog_name="uqbias")
@click.option("--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool) -> None:
    """Gender-bias evaluation for machine translation from Monte-Carlo samples."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(path_type=Path))
@click.option("--out", "out_path", type=click.Path(path_type=Path), default=None,
              help="Where to write the validation report (JSON).")
@click.option("--strict", is_flag=True, help="Treat warnings as failures.")
def validate(manifest_path: Path, out_path: Path | None, strict: bool) -> None:
    """Check a corpus manifest and every file it references."""
    try:
        manifest = load_manifest(manifest_path)
    except ValidationError as exc:
        _fail(str(exc))
    report = validate_corpus(manifest)
    if out_path is not None:
        dump_json(out_path, report.to_json())
    for violation in report.violations:
        click.echo(f"{violation.severity}: {violation.location}: {violation.message}", err=True)
    click.echo(f"validation: {len(report.errors)} error(s), {len(report.warnings)} warning(s)")
    if not report.ok(strict=strict):
        sys.exit(EXIT_FAILURE)


@main.command("augment-names")
@click.option("--instances", "instances_path", required=True, type=click.Path(path_type=Path))
@click.option("--language", required=True, help="Target language the names are chosen for.")
@click.option("--out", "out_path", required=True, type=click.Path(path_type=Path))
@click.option("--names-file", type=click.Path(path_type=Path), default=None,
              help="JSON override: {language: {masculine: name, feminine: name}}.")
def augment_names(instances_path: Path, language: str, out_path: Path, names_file: Path | None) -> None:
    """Add name-augmented variants of every unambiguous instance.

    Each unambiguous instance gains a copy with a gender-matched given name
    inserted after the focus noun. Contrast keys of the emitted corpus are
    re-derived from the pronoun-slotted templates so grouping stays
    canonical for the augmented sentences.
    """
    names = DEFAULT_NAMES
    if names_file is not None:
        import json

        raw = json.loads(names_file.read_text(encoding="utf-8"))
        names = {
            lang: {Gender.parse(g): str(n) for g, n in table.items()}
            for lang, table in raw.items()
        }
    try:
        instances = load_instances(instances_path)
        augmented = []
        for instance in instances:
            if instance.ambiguous:
                continue
            variant = augment_with_names(instance, language, names)
            variant.instance_id = f"{instance.instance_id}-named"
            augmented.append(variant)
        combined = instances + augmented
        # Canonical keys: every instance keyed by its own template group.
        from .bias import contrast_key_for

        for instance in combined:
            instance.contrast_key = contrast_key_for(pronoun_template(instance.source_text))
        build_contrast_sets(combined)  # rejects duplicates before writing
        write_instances(out_path, combined)
    except ValidationError as exc:
        _fail(str(exc))
    click.echo(f"wrote {len(combined)} instances ({len(augmented)} augmented) to {out_path}")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(path_type=Path))
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--methods", default="se,s3e,ge", show_default=True,
              help=f"Comma-separated subset of {','.join(ALL_METHODS)}.")
@click.option("--alpha", default="1.0", show_default=True,
              help="Similarity exponent, or 'tune' to grid-search per (model, language).")
@click.option("--alpha-grid", default=",".join(str(a) for a in DEFAULT_ALPHA_GRID), show_default=True)
@click.option("--entail-threshold", default=0.5, show_default=True, type=float)
@click.option("--similarity-floor", default=1e-6, show_default=True, type=float)
@click.option("--norm-tolerance", default=1e-9, show_default=True, type=float)
@click.option("--jobs", default=1, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--skip-validation", is_flag=True, help="Trust the corpus without re-validating.")
def compute(
    manifest_path: Path,
    out_dir: Path,
    methods: str,
    alpha: str,
    alpha_grid: str,
    entail_threshold: float,
    similarity_floor: float,
    norm_tolerance: float,
    jobs: int,
    seed: int,
    skip_validation: bool,
) -> None:
    """Compute per-instance metrics and per-pair summaries."""
    if alpha.strip().lower() == "tune":
        alpha_value = None
    else:
        try:
            alpha_value = float(alpha)
        except ValueError:
            raise click.BadParameter("--alpha must be a number or 'tune'")
    try:
        grid = tuple(float(a) for a in alpha_grid.split(",") if a.strip())
    except ValueError:
        raise click.BadParameter("--alpha-grid must be comma-separated numbers")

    try:
        manifest = load_manifest(manifest_path)
        if not skip_validation:
            report = validate_corpus(manifest)
            if not report.ok():
                for violation in report.errors:
                    click.echo(f"error: {violation.location}: {violation.message}", err=True)
                _fail("corpus failed validation; run `uqbias validate` for the full report")
        config = ComputeConfig(
            methods=_parse_methods(methods),
            alpha=alpha_value,
            alpha_grid=grid,
            entailment_threshold=entail_threshold,
            similarity_floor=similarity_floor,
            norm_tolerance=norm_tolerance,
            jobs=jobs,
            seed=seed,
        )
        result = compute_corpus(manifest, config)
    except ValidationError as exc:
        _fail(str(exc))

    out_dir.mkdir(parents=True, exist_ok=True)
    write_metric_records(result.records, out_dir / METRICS_FILE)
    dump_json(out_dir / SUMMARY_FILE, result.summaries)
    dump_json(out_dir / RUN_FILE, result.run_meta)
    click.echo(f"wrote {len(result.records)} records to {out_dir / METRICS_FILE}")
    if result.partial:
        for reason in result.skipped:
            click.echo(f"skipped: {reason}", err=True)
        sys.exit(EXIT_PARTIAL)


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(path_type=Path))
@click.option("--records", "records_path", type=click.Path(path_type=Path), default=None,
              help="Metric records (defaults to <out>/metrics.jsonl).")
@click.option("--out", "out_dir", required=True, type=click.Path(path_type=Path))
@click.option("--bins", default=3, show_default=True, type=int)
@click.option("--reference", "references", multiple=True, metavar="CUE=LEVEL",
              help="Override a cue's reference group (repeatable).")
def analyze(
    manifest_path: Path,
    records_path: Path | None,
    out_dir: Path,
    bins: int,
    references: tuple[str, ...],
) -> None:
    """Estimate cue effects, rank correlations, and quality-binned summaries."""
    if bins < 2:
        raise click.BadParameter("--bins must be >= 2")
    overrides = {}
    for item in references:
        if "=" not in item:
            raise click.BadParameter(f"--reference needs CUE=LEVEL, got {item!r}")
        cue, level = item.split("=", 1)
        overrides[cue.strip()] = level.strip()

    records_path = records_path or out_dir / METRICS_FILE
    summary_path = out_dir / SUMMARY_FILE
    try:
        manifest = load_manifest(manifest_path)
        instances = {i.instance_id: i for i in load_instances(manifest.resolve(manifest.instances_path))}
        records = load_metric_records(records_path)
        if not summary_path.exists():
            _fail(f"missing {summary_path}; run `uqbias compute` first")
        import json

        summaries = json.loads(summary_path.read_text(encoding="utf-8"))
        effect_rows, notes = analyze_effects(records, instances, reference_overrides=overrides)
        correlations = analyze_correlations(summaries)
        binned = analyze_bins(records, instances, bins)
    except ValidationError as exc:
        _fail(str(exc))

    out_dir.mkdir(parents=True, exist_ok=True)
    write_effect_tables(effect_rows, out_dir / EFFECTS_FILE)
    _write_effects_csv(effect_rows, out_dir / EFFECTS_CSV)
    dump_json(out_dir / CORRELATIONS_FILE, [c.to_json() for c in correlations])
    _write_correlations_csv(correlations, out_dir / CORRELATIONS_CSV)
    dump_json(out_dir / BINS_FILE, bins_to_json(binned))
    for note in notes:
        click.echo(f"note: {note}", err=True)
    click.echo(f"wrote {len(effect_rows)} effect estimates to {out_dir / EFFECTS_FILE}")


def _write_effects_csv(effect_rows, path: Path) -> None:
    import csv

    header = [
        "model_id", "language", "method", "dependent", "cue", "level", "reference_level",
        "coefficient", "p_value", "significant", "n_level", "n_reference", "degenerate",
    ]
    ordered = sorted(effect_rows, key=lambda r: (r[0], r[1], r[2], r[3], r[4].cue, r[4].level))
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for model, lang, method, dependent, est in ordered:
            writer.writerow([
                model, lang, method, dependent, est.cue, est.level, est.reference_level,
                est.coefficient, "" if est.p_value is None else est.p_value,
                est.significant, est.n_level, est.n_reference, est.degenerate,
            ])


def _write_correlations_csv(correlations, path: Path) -> None:
    import csv

    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["metric", "n", "spearman", "kendall", "spearman_ranked", "kendall_ranked"])
        for row in correlations:
            writer.writerow([
                row.metric, row.n,
                "" if row.spearman is None else row.spearman,
                "" if row.kendall is None else row.kendall,
                "" if row.spearman_ranked is None else row.spearman_ranked,
                "" if row.kendall_ranked is None else row.kendall_ranked,
            ])


@main.command()
@click.option("--analysis", "analysis_dir", required=True, type=click.Path(path_type=Path),
              help="Directory holding compute and analyze outputs.")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None,
              help="Report directory (defaults to <analysis>/report).")
def report(analysis_dir: Path, out_dir: Path | None) -> None:
    """Render ranking, ambiguity-entropy, and cue-effect tables plus plot data."""
    out_dir = out_dir or analysis_dir / "report"
    try:
        written = generate_report(analysis_dir, out_dir)
    except ValidationError as exc:
        _fail(str(exc))
    for path in written:
        click.echo(f"wrote {path}")


if __name__ == "__main__":
    main()
