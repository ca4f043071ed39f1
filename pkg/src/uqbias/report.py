"""Report stage: human-readable tables and plot-ready JSON from analysis files.

Emits model rankings per metric, the ambiguity-entropy table, the pivoted
cue-effect table with significance markers, and violin-plot data. No image
rendering happens here; the JSON payloads carry everything a plotting
frontend needs.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Mapping, Sequence

from .stats import rank_models
from .types import ValidationError

# Conventional artifact names inside an output directory.
METRICS_FILE = "metrics.jsonl"
SUMMARY_FILE = "summary.json"
RUN_FILE = "run.json"
VALIDATION_FILE = "validation.json"
EFFECTS_FILE = "effects.jsonl"
EFFECTS_CSV = "effects.csv"
CORRELATIONS_FILE = "correlations.json"
CORRELATIONS_CSV = "correlations.csv"
BINS_FILE = "comet_bins.json"

RANKINGS_CSV = "rankings.csv"
RANKINGS_TXT = "rankings.txt"
DELTA_H_CSV = "delta_h.csv"
DELTA_H_TXT = "delta_h.txt"
ANOVA_CSV = "anova.csv"
ANOVA_TXT = "anova.txt"
VIOLIN_JSON = "violin.json"

# Metric name -> ascending sort? Lower relative surprisal/entropy difference
# means less bias; higher quality and accuracy mean better systems.
_ASCENDING_PREFIXES = ("delta_i_", "delta_h_")


def _require(path: Path, produced_by: str) -> Path:
    if not path.exists():
        raise ValidationError(f"missing {path.name}; run `uqbias {produced_by}` first", str(path))
    return path


def _fmt(value: Any) -> str:
    if value is None:
        return "n/a"
    if isinstance(value, float):
        return f"{value:.4f}"
    return str(value)


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else v for v in row])


def _write_text_table(path: Path, title: str, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> None:
    cells = [[_fmt(v) for v in row] for row in rows]
    widths = [max(len(h), *(len(r[i]) for r in cells)) if cells else len(h) for i, h in enumerate(header)]
    lines = [title, ""]
    lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip())
    lines.append("  ".join("-" * w for w in widths))
    for row in cells:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _system_name(summary: Mapping[str, Any]) -> str:
    return f"{summary['model_id']}-{summary['language']}"


def _collect_ranking_metrics(summaries: Sequence[Mapping[str, Any]]) -> dict[str, dict[str, float]]:
    metrics: dict[str, dict[str, float]] = {}

    def put(metric: str, system: str, value: Any) -> None:
        if value is not None:
            metrics.setdefault(metric, {})[system] = float(value)

    for summary in summaries:
        system = _system_name(summary)
        put("comet_mean", system, summary.get("comet_mean"))
        put("gender_accuracy", system, summary.get("gender_accuracy"))
        put("delta_logprob", system, summary.get("delta_logprob"))
        for method, stats_obj in sorted(summary.get("methods", {}).items()):
            put(f"delta_i_{method}", system, stats_obj.get("delta_i_mean"))
            put(f"delta_h_{method}", system, stats_obj.get("delta_h"))
    return metrics


def write_rankings(summaries: Sequence[Mapping[str, Any]], out_dir: Path) -> None:
    metrics = _collect_ranking_metrics(summaries)
    csv_rows: list[list[Any]] = []
    txt_rows: list[list[Any]] = []
    for metric in sorted(metrics):
        ascending = metric.startswith(_ASCENDING_PREFIXES)
        ranking = rank_models(metrics[metric], ascending=ascending)
        for position, (system, value) in enumerate(ranking, start=1):
            csv_rows.append([metric, position, system, value])
            txt_rows.append([metric, position, system, value])
    _write_csv(out_dir / RANKINGS_CSV, ["metric", "rank", "system", "value"], csv_rows)
    _write_text_table(
        out_dir / RANKINGS_TXT,
        "Model rankings per metric (rank 1 is best)",
        ["metric", "rank", "system", "value"],
        txt_rows,
    )


def write_delta_h_table(summaries: Sequence[Mapping[str, Any]], out_dir: Path) -> None:
    rows: list[list[Any]] = []
    for summary in sorted(summaries, key=lambda s: (s["language"], s["model_id"])):
        for method, stats_obj in sorted(summary.get("methods", {}).items()):
            rows.append(
                [
                    summary["language"],
                    summary["model_id"],
                    method,
                    stats_obj.get("h_unambiguous"),
                    stats_obj.get("h_ambiguous"),
                    stats_obj.get("delta_h"),
                ]
            )
    header = ["language", "model", "method", "h_unambiguous", "h_ambiguous", "delta_h"]
    _write_csv(out_dir / DELTA_H_CSV, header, rows)
    _write_text_table(
        out_dir / DELTA_H_TXT,
        "Mean entropy by ambiguity partition and relative difference",
        header,
        rows,
    )


def write_anova_table(effect_rows: Sequence[Mapping[str, Any]], out_dir: Path) -> None:
    """Pivot normalised-entropy effects into one row per (language, model, method).

    Cells carry the coefficient, with a trailing ``*`` marking significance
    at p < 0.05.
    """
    norm_rows = [r for r in effect_rows if r.get("dependent") == "norm_entropy"]
    columns = sorted({f"{r['cue']}:{r['level']}" for r in norm_rows})
    by_system: dict[tuple[str, str, str], dict[str, str]] = {}
    for row in norm_rows:
        key = (row["language"], row["model_id"], row["method"])
        cell = f"{row['coefficient']:.2f}" + ("*" if row["significant"] else "")
        by_system.setdefault(key, {})[f"{row['cue']}:{row['level']}"] = cell

    header = ["language", "model", "method"] + columns
    rows = []
    for (lang, model, method) in sorted(by_system):
        cells = by_system[(lang, model, method)]
        rows.append([lang, model, method] + [cells.get(c, "n/a") for c in columns])
    _write_csv(out_dir / ANOVA_CSV, header, rows)
    _write_text_table(
        out_dir / ANOVA_TXT,
        "Single-effect coefficients on normalised entropy (* = p < 0.05)",
        header,
        rows,
    )


def write_violin_data(bins_payload: Any, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = {"kind": "violin", "panels": bins_payload}
    (out_dir / VIOLIN_JSON).write_text(
        json.dumps(payload, ensure_ascii=False, allow_nan=False, indent=2) + "\n",
        encoding="utf-8",
    )


def generate_report(analysis_dir: str | Path, out_dir: str | Path) -> list[str]:
    """Render every report table. Returns the artifact paths written."""
    analysis_dir = Path(analysis_dir)
    out_dir = Path(out_dir)

    summary_path = _require(analysis_dir / SUMMARY_FILE, "compute")
    effects_path = _require(analysis_dir / EFFECTS_FILE, "analyze")
    bins_path = _require(analysis_dir / BINS_FILE, "analyze")

    summaries = json.loads(summary_path.read_text(encoding="utf-8"))
    effect_rows = [
        json.loads(line)
        for line in effects_path.read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]
    bins_payload = json.loads(bins_path.read_text(encoding="utf-8"))

    write_rankings(summaries, out_dir)
    write_delta_h_table(summaries, out_dir)
    write_anova_table(effect_rows, out_dir)
    write_violin_data(bins_payload, out_dir)
    return [
        str(out_dir / name)
        for name in (RANKINGS_CSV, RANKINGS_TXT, DELTA_H_CSV, DELTA_H_TXT, ANOVA_CSV, ANOVA_TXT, VIOLIN_JSON)
    ]
