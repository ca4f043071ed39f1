"""Compute stage: per-instance metrics and per-pair summaries for a corpus.

Work is parallelizable across instances; every per-instance computation is
a pure function, and aggregation happens after a deterministic sort, so the
worker count never changes the output.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from . import __version__
from .bias import (
    aggregate_ambiguity_entropies,
    build_contrast_sets,
    correctness_surprisals,
    delta_logprob,
    gender_accuracy,
    normalized_entropy,
    relative_surprisal,
)
from .dataset import CorpusManifest, load_instances, load_sample_sets, load_scores
from .entropy import (
    DEFAULT_ALPHA_GRID,
    DEFAULT_ENTAILMENT_THRESHOLD,
    cluster_by_entailment,
    cosine_similarity_matrix,
    gender_entropy,
    s3e_entropy,
    semantic_entropy,
    tune_alpha,
)
from .stats import max_reference_aggregation
from .types import (
    GENDER_ORDER,
    Gender,
    Instance,
    MethodMetrics,
    MetricRecord,
    SampleSet,
    SimilarityConfig,
    ValidationError,
)

logger = logging.getLogger(__name__)

ALL_METHODS = ("shannon", "se", "s3e", "ge")


@dataclass(frozen=True)
class ComputeConfig:
    methods: tuple[str, ...] = ("se", "s3e", "ge")
    alpha: float | None = 1.0  # None means: tune on each (model, language)
    alpha_grid: tuple[float, ...] = DEFAULT_ALPHA_GRID
    entailment_threshold: float = DEFAULT_ENTAILMENT_THRESHOLD
    similarity_floor: float = 1e-6
    norm_tolerance: float = 1e-9
    jobs: int = 1
    seed: int = 0  # recorded for provenance; nothing is randomized by default

    def __post_init__(self):
        if not self.methods:
            raise ValidationError("at least one method is required")
        unknown = set(self.methods) - set(ALL_METHODS)
        if unknown:
            raise ValidationError(f"unknown methods: {sorted(unknown)} (choose from {ALL_METHODS})")
        if self.jobs < 1:
            raise ValidationError("jobs must be >= 1")


@dataclass
class ComputeResult:
    records: list[MetricRecord]
    summaries: list[dict[str, Any]]
    run_meta: dict[str, Any]
    skipped: list[str] = field(default_factory=list)

    @property
    def partial(self) -> bool:
        return bool(self.skipped)


def _method_surprisals(
    sample_set: SampleSet,
    methods: tuple[str, ...],
    alpha: float,
    config: ComputeConfig,
) -> tuple[dict[str, Any], list[str]]:
    """Entropy result per requested method, with reasons for any skips."""
    results: dict[str, Any] = {}
    skips: list[str] = []
    for method in methods:
        if method == "shannon":
            surprisal = -sample_set.log_probs
            results[method] = (float(surprisal.mean()), surprisal)
        elif method == "ge":
            res = gender_entropy(sample_set)
            results[method] = (res.entropy, res.per_sample_surprisal)
        elif method == "se":
            if sample_set.entailment is None:
                skips.append("se: no entailment matrix")
                continue
            assignment = cluster_by_entailment(
                sample_set, sample_set.entailment, config.entailment_threshold
            )
            res = semantic_entropy(assignment)
            results[method] = (res.entropy, res.per_sample_surprisal)
        elif method == "s3e":
            if not sample_set.has_embeddings():
                skips.append("s3e: no embeddings")
                continue
            similarity = cosine_similarity_matrix(sample_set, floor=config.similarity_floor)
            res = s3e_entropy(similarity, SimilarityConfig(alpha=alpha, floor=config.similarity_floor))
            results[method] = (res.entropy, res.per_sample_surprisal)
    return results, skips


def _compute_record(
    instance: Instance,
    sample_set: SampleSet,
    methods: tuple[str, ...],
    alpha: float,
    config: ComputeConfig,
    score_entry,
) -> tuple[MetricRecord, list[str]]:
    per_method, skips = _method_surprisals(sample_set, methods, alpha, config)

    record = MetricRecord(
        instance_id=instance.instance_id,
        model_id=sample_set.model_id,
        language=sample_set.language,
    )
    labels = sample_set.gender_labels
    for method, (entropy, surprisal) in per_method.items():
        metrics = MethodMetrics(entropy=entropy)
        for gender in GENDER_ORDER:
            values = [s for s, g in zip(surprisal, labels) if g is gender]
            if values:
                metrics.surprisal_by_gender[gender] = float(np.mean(values))
        if not instance.ambiguous:
            i_correct, i_incorrect = correctness_surprisals(
                sample_set, instance.gold_gender, surprisal
            )
            metrics.i_correct = i_correct
            metrics.i_incorrect = i_incorrect
            if i_correct is not None and i_incorrect is not None:
                metrics.delta_i = relative_surprisal(i_correct, i_incorrect)
        record.methods[method] = metrics

    if not instance.ambiguous:
        log_probs = sample_set.log_probs
        opposite = Gender.FEMININE if instance.gold_gender is Gender.MASCULINE else Gender.MASCULINE
        correct = [p for p, g in zip(log_probs, labels) if g is instance.gold_gender]
        incorrect = [p for p, g in zip(log_probs, labels) if g is opposite]
        record.logprob_correct = float(np.mean(correct)) if correct else None
        record.logprob_incorrect = float(np.mean(incorrect)) if incorrect else None

    if score_entry is not None:
        if score_entry.comet_scores:
            record.comet_score = max_reference_aggregation([s for _, s in score_entry.comet_scores])
        record.prediction_gender = score_entry.prediction_gender

    return record, skips


def _mean_or_none(values: list[float]) -> float | None:
    return float(np.mean(values)) if values else None


def _summarize_pair(
    model_id: str,
    language: str,
    records: list[MetricRecord],
    instances: Mapping[str, Instance],
) -> dict[str, Any]:
    ambiguity = aggregate_ambiguity_entropies(records, instances)
    methods: dict[str, Any] = {}
    present = sorted({m for r in records for m in r.methods})
    for method in present:
        agg = ambiguity[(model_id, language, method)]
        delta_is = [
            r.methods[method].delta_i for r in records
            if method in r.methods and r.methods[method].delta_i is not None
        ]
        i_corrects = [
            r.methods[method].i_correct for r in records
            if method in r.methods and r.methods[method].i_correct is not None
        ]
        i_incorrects = [
            r.methods[method].i_incorrect for r in records
            if method in r.methods and r.methods[method].i_incorrect is not None
        ]
        i_correct_mean = _mean_or_none(i_corrects)
        i_incorrect_mean = _mean_or_none(i_incorrects)
        # Two aggregations of the relative surprisal: the mean of per-instance
        # values, and the relative difference of the class means.
        delta_i_of_means = (
            relative_surprisal(i_correct_mean, i_incorrect_mean)
            if i_correct_mean is not None and i_incorrect_mean is not None
            else None
        )
        methods[method] = {
            "h_unambiguous": agg.h_unambiguous,
            "h_ambiguous": agg.h_ambiguous,
            "delta_h": agg.delta_h,
            "n_unambiguous": agg.n_unambiguous,
            "n_ambiguous": agg.n_ambiguous,
            "delta_i_mean": _mean_or_none(delta_is),
            "n_delta_i": len(delta_is),
            "i_correct_mean": i_correct_mean,
            "i_incorrect_mean": i_incorrect_mean,
            "delta_i_of_means": delta_i_of_means,
        }

    predictions = {
        r.instance_id: r.prediction_gender for r in records if r.prediction_gender is not None
    }
    lp_corrects = [r.logprob_correct for r in records if r.logprob_correct is not None]
    lp_incorrects = [r.logprob_incorrect for r in records if r.logprob_incorrect is not None]
    lp_correct_mean = _mean_or_none(lp_corrects)
    lp_incorrect_mean = _mean_or_none(lp_incorrects)
    comets = [r.comet_score for r in records if r.comet_score is not None]

    return {
        "model_id": model_id,
        "language": language,
        "n_instances": len(records),
        "methods": methods,
        "gender_accuracy": gender_accuracy(predictions, instances),
        "n_predictions": len(predictions),
        "logprob_correct_mean": lp_correct_mean,
        "logprob_incorrect_mean": lp_incorrect_mean,
        "delta_logprob": (
            delta_logprob(lp_correct_mean, lp_incorrect_mean)
            if lp_correct_mean is not None and lp_incorrect_mean is not None
            else None
        ),
        "comet_mean": _mean_or_none(comets),
    }


def compute_corpus(manifest: CorpusManifest, config: ComputeConfig) -> ComputeResult:
    """Run the full metric computation over every (model, language) pair."""
    instances = load_instances(manifest.resolve(manifest.instances_path))
    by_id = {i.instance_id: i for i in instances}
    groups = build_contrast_sets(instances)

    scores = {}
    if manifest.scores_path is not None:
        scores = load_scores(manifest.resolve(manifest.scores_path))

    records: list[MetricRecord] = []
    summaries: list[dict[str, Any]] = []
    skipped: list[str] = []
    alphas: dict[str, float | None] = {}
    tuning_corr: dict[str, float | None] = {}

    for model, lang in sorted(manifest.samples_paths):
        pair_name = f"{model}/{lang}"
        embeddings = manifest.embeddings_paths.get((model, lang))
        entailment = manifest.entailment_paths.get((model, lang))
        _, sets = load_sample_sets(
            manifest.resolve(manifest.samples_paths[(model, lang)]),
            embeddings_path=manifest.resolve(embeddings) if embeddings else None,
            entailment_path=manifest.resolve(entailment) if entailment else None,
        )

        alpha = config.alpha
        if alpha is None and "s3e" in config.methods:
            calibration = [s for s in sets.values() if s.has_embeddings()]
            try:
                tuned = tune_alpha(calibration, config.alpha_grid, floor=config.similarity_floor)
                alpha = tuned.alpha
                tuning_corr[pair_name] = tuned.correlation
            except ValidationError as exc:
                alpha = 1.0
                skipped.append(f"{pair_name}: alpha tuning failed ({exc}); using alpha=1.0")
                logger.warning("alpha tuning failed for %s: %s", pair_name, exc)
        elif alpha is None:
            alpha = 1.0
        alphas[pair_name] = alpha

        ordered_ids = sorted(set(by_id) & set(sets))

        def work(instance_id: str, alpha=alpha, sets=sets) -> tuple[MetricRecord, list[str]]:
            return _compute_record(
                by_id[instance_id],
                sets[instance_id],
                config.methods,
                alpha,
                config,
                scores.get((instance_id, sets[instance_id].model_id, sets[instance_id].language)),
            )

        if config.jobs > 1:
            with ThreadPoolExecutor(max_workers=config.jobs) as pool:
                outcomes = list(pool.map(work, ordered_ids))
        else:
            outcomes = [work(i) for i in ordered_ids]

        pair_records = [record for record, _ in outcomes]
        skip_reasons = sorted({reason for _, reasons in outcomes for reason in reasons})
        for reason in skip_reasons:
            skipped.append(f"{pair_name}: {reason}")
            logger.warning("%s: %s", pair_name, reason)

        # Normalised entropy needs the whole contrast group, so it runs after
        # the per-instance pass.
        record_by_id = {r.instance_id: r for r in pair_records}
        for method in config.methods:
            entropies = {
                r.instance_id: r.methods[method].entropy for r in pair_records if method in r.methods
            }
            for group in groups:
                if not all(m in entropies for m in group.member_instance_ids):
                    continue
                for instance_id, value in normalized_entropy(
                    group, entropies, tolerance=config.norm_tolerance
                ).items():
                    record_by_id[instance_id].methods[method].norm_entropy = value

        records.extend(pair_records)
        summaries.append(_summarize_pair(model, lang, pair_records, by_id))

    run_meta = {
        "version": __version__,
        "dataset_name": manifest.dataset_name,
        "format_version": manifest.format_version,
        # jobs is deliberately absent: parallelism never shapes results, and
        # run metadata must be byte-identical across worker counts.
        "config": {
            "methods": list(config.methods),
            "alpha": config.alpha,
            "alpha_grid": list(config.alpha_grid),
            "entailment_threshold": config.entailment_threshold,
            "similarity_floor": config.similarity_floor,
            "norm_tolerance": config.norm_tolerance,
            "seed": config.seed,
        },
        "alpha_by_pair": {k: alphas[k] for k in sorted(alphas)},
        "alpha_tuning_correlation": {k: tuning_corr[k] for k in sorted(tuning_corr)},
        "skipped": sorted(skipped),
        "contrast_groups": len(groups),
    }
    records.sort(key=lambda r: r.sort_key)
    summaries.sort(key=lambda s: (s["language"], s["model_id"]))
    return ComputeResult(records=records, summaries=summaries, run_meta=run_meta, skipped=skipped)
