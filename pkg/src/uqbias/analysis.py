"""Analyze stage: cue-effect tables, cross-model rank correlations, and
quality-binned entropy summaries assembled from computed metric records.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, Mapping, Sequence

from .stats import comet_bins, kendall_tau_b, ranked_correlations, single_effect_anova, spearman_rho
from .types import (
    BinnedSummary,
    EffectEstimate,
    Gender,
    Instance,
    MetricRecord,
    RoleCue,
    ValidationError,
)

# Cue factors: name -> (level extractor, default reference level). Extractors
# return the level label for an instance; levels never seen simply drop out.
_GENDER_LEVEL = {Gender.MASCULINE: "masculine", Gender.FEMININE: "feminine", Gender.NEUTRAL: "neutral"}
_ROLE_LEVEL = {
    RoleCue.SUBJ_F: "subj-f",
    RoleCue.SUBJ_M: "subj-m",
    RoleCue.OBJ_F: "obj-f",
    RoleCue.OBJ_M: "obj-m",
    RoleCue.NONE: "none",
}

CUE_FACTORS: dict[str, tuple[Any, str]] = {
    "names": (lambda i: "named" if i.cues.names_present else "no-name", "no-name"),
    "recency": (lambda i: _GENDER_LEVEL[i.cues.recency], "neutral"),
    "implicit-causality": (lambda i: _ROLE_LEVEL[i.cues.ic_role], "none"),
    "stereotype": (lambda i: _ROLE_LEVEL[i.cues.stereotype_role], "none"),
    "subject": (lambda i: _GENDER_LEVEL[i.cues.subject], "neutral"),
    "pronoun": (lambda i: _GENDER_LEVEL[i.pronoun_gender], "neutral"),
    "default-m": (lambda i: "default-m" if i.default_masculine else "no-default", "no-default"),
    "ambiguity": (lambda i: "ambiguous" if i.ambiguous else "unambiguous", "unambiguous"),
}

# The default-masculine classification only applies to Russian targets.
_RU_ONLY_CUES = frozenset({"default-m"})

EffectRow = tuple[str, str, str, str, EffectEstimate]  # model, language, method, dependent, estimate


def analyze_effects(
    records: Sequence[MetricRecord],
    instances: Mapping[str, Instance],
    dependents: Sequence[str] = ("norm_entropy", "entropy"),
    reference_overrides: Mapping[str, str] | None = None,
) -> tuple[list[EffectRow], list[str]]:
    """Single-effect estimates of every cue, per (model, language, method).

    The dependent variable is the normalised entropy by default (instances
    whose normalisation is flagged missing are excluded, not imputed) and
    the raw entropy as a companion table. Returns the effect rows plus notes
    for any cue that could not be estimated.
    """
    overrides = dict(reference_overrides or {})
    unknown = set(overrides) - set(CUE_FACTORS)
    if unknown:
        raise ValidationError(f"reference overrides for unknown cues: {sorted(unknown)}")

    grouped: dict[tuple[str, str], list[MetricRecord]] = {}
    for record in records:
        grouped.setdefault((record.model_id, record.language), []).append(record)

    rows: list[EffectRow] = []
    notes: list[str] = []
    for (model, lang) in sorted(grouped):
        pair_records = grouped[(model, lang)]
        methods = sorted({m for r in pair_records for m in r.methods})
        for method in methods:
            for dependent in dependents:
                values: list[float] = []
                labels_per_cue: dict[str, list[str]] = {cue: [] for cue in CUE_FACTORS}
                for record in pair_records:
                    metrics = record.methods.get(method)
                    if metrics is None:
                        continue
                    value = getattr(metrics, dependent)
                    if value is None:
                        continue
                    instance = instances.get(record.instance_id)
                    if instance is None:
                        raise ValidationError(
                            f"record references unknown instance {record.instance_id!r}"
                        )
                    values.append(value)
                    for cue, (extract, _) in CUE_FACTORS.items():
                        labels_per_cue[cue].append(extract(instance))
                for cue, (_, default_reference) in CUE_FACTORS.items():
                    if cue in _RU_ONLY_CUES and lang != "ru":
                        continue
                    reference = overrides.get(cue, default_reference)
                    try:
                        estimates = single_effect_anova(values, labels_per_cue[cue], reference)
                    except ValidationError as exc:
                        notes.append(f"{model}/{lang}/{method}/{dependent}: {cue}: {exc}")
                        continue
                    for estimate in estimates:
                        rows.append((model, lang, method, dependent, replace(estimate, cue=cue)))
    return rows, notes


@dataclass
class CorrelationRow:
    """Cross-model agreement between a bias metric and gender accuracy."""

    metric: str
    n: int
    spearman: float | None
    kendall: float | None
    spearman_ranked: float | None
    kendall_ranked: float | None

    def to_json(self) -> dict[str, Any]:
        return {
            "metric": self.metric,
            "n": self.n,
            "spearman": self.spearman,
            "kendall": self.kendall,
            "spearman_ranked": self.spearman_ranked,
            "kendall_ranked": self.kendall_ranked,
        }


def analyze_correlations(summaries: Sequence[Mapping[str, Any]]) -> list[CorrelationRow]:
    """Correlate per-system bias metrics against gender accuracy.

    Systems are the (model, language) pairs, ordered by (language, model).
    Alongside the plain tie-corrected statistics, the ranked variants first
    convert both series to rankings (ties broken by that presentation
    order), matching how systems are ranked before comparison.
    """
    ordered = sorted(summaries, key=lambda s: (s["language"], s["model_id"]))

    metric_series: dict[str, list[tuple[float, float]]] = {}
    for summary in ordered:
        accuracy = summary.get("gender_accuracy")
        if accuracy is None:
            continue
        for method, stats_obj in sorted(summary.get("methods", {}).items()):
            value = stats_obj.get("delta_i_mean")
            if value is not None:
                metric_series.setdefault(f"delta_i_{method}", []).append((accuracy, value))
        if summary.get("delta_logprob") is not None:
            metric_series.setdefault("delta_logprob", []).append(
                (accuracy, summary["delta_logprob"])
            )

    rows: list[CorrelationRow] = []
    for metric in sorted(metric_series):
        pairs = metric_series[metric]
        accuracies = [a for a, _ in pairs]
        values = [v for _, v in pairs]
        if len(pairs) < 3:
            rows.append(CorrelationRow(metric, len(pairs), None, None, None, None))
            continue
        rho = spearman_rho(accuracies, values)
        tau = kendall_tau_b(accuracies, values)
        rho_ranked, tau_ranked = ranked_correlations(accuracies, values)
        rows.append(CorrelationRow(metric, len(pairs), rho, tau, rho_ranked, tau_ranked))
    return rows


def analyze_bins(
    records: Sequence[MetricRecord],
    instances: Mapping[str, Instance],
    k: int,
) -> dict[tuple[str, str, str], list[BinnedSummary]]:
    """Quality-binned entropy summaries per (model, language, method)."""
    grouped: dict[tuple[str, str, str], list[tuple[float, float, bool]]] = {}
    for record in records:
        if record.comet_score is None:
            continue
        instance = instances.get(record.instance_id)
        if instance is None:
            raise ValidationError(f"record references unknown instance {record.instance_id!r}")
        for method, metrics in record.methods.items():
            grouped.setdefault((record.model_id, record.language, method), []).append(
                (record.comet_score, metrics.entropy, instance.ambiguous)
            )

    out: dict[tuple[str, str, str], list[BinnedSummary]] = {}
    for key in sorted(grouped):
        out[key] = comet_bins(grouped[key], k)
    return out


def bins_to_json(bins: Mapping[tuple[str, str, str], list[BinnedSummary]]) -> list[dict[str, Any]]:
    return [
        {
            "model_id": model,
            "language": lang,
            "method": method,
            "bins": [b.to_json() for b in summaries],
        }
        for (model, lang, method), summaries in sorted(bins.items())
    ]
