"""Bias metrics over entropy and surprisal, plus contrast-set machinery.

Three desiderata drive the metrics:

1. On unambiguous inputs, correct-gender translations should be less
   surprising than incorrect ones: minimise the relative surprisal
   delta_i = (I_correct - I_incorrect) / mean(I_correct, I_incorrect).
2. Entropy should not react to bias cues: normalised entropy divides an
   instance's entropy by the mean entropy of its contrast set (the
   minimal-pair group differing only in the pronoun).
3. Ambiguous inputs should carry more uncertainty than unambiguous ones:
   minimise the relative entropy delta_h over the two partitions.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .types import (
    BINARY_GENDERS,
    ContrastGroup,
    Gender,
    Instance,
    MetricRecord,
    SampleSet,
    ValidationError,
)

# Pronoun slots that may differ within a contrast group.
PRONOUN_LEXICON = frozenset(
    {"he", "she", "they", "him", "her", "them", "his", "their", "hers", "theirs"}
)

# Common given names per target language, chosen for cross-linguistic familiarity.
DEFAULT_NAMES: dict[str, dict[Gender, str]] = {
    "es": {Gender.FEMININE: "Carla", Gender.MASCULINE: "Gabriel"},
    "fr": {Gender.FEMININE: "Anne", Gender.MASCULINE: "Victor"},
    "uk": {Gender.FEMININE: "Anna", Gender.MASCULINE: "Ivan"},
    "ru": {Gender.FEMININE: "Anna", Gender.MASCULINE: "Ivan"},
}

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)
_EPS = 1e-12


def _symmetric_relative(a: float, b: float) -> float:
    if a < 0 or b < 0:
        raise ValidationError(f"inputs must be non-negative, got ({a}, {b})")
    if a < _EPS and b < _EPS:
        return 0.0
    return (a - b) / (0.5 * (a + b))


def relative_surprisal(i_correct: float, i_incorrect: float) -> float:
    """Relative difference of correct- vs incorrect-gender surprisal, in [-2, 2]."""
    return _symmetric_relative(i_correct, i_incorrect)


def relative_entropy(h_unambiguous: float, h_ambiguous: float) -> float:
    """Relative difference of unambiguous vs ambiguous entropy, in [-2, 2].

    Negative is the desired direction: more uncertainty on ambiguous inputs.
    Antisymmetric under swapping the arguments.
    """
    return _symmetric_relative(h_unambiguous, h_ambiguous)


def correctness_surprisals(
    samples: SampleSet,
    gold_gender: Gender,
    per_sample_surprisal: Sequence[float],
) -> tuple[float | None, float | None]:
    """Mean surprisal over correct-gender and opposite-gender samples.

    Neutral and unknown labels belong to neither class. An empty class is
    reported as None rather than fabricated; the relative surprisal is then
    undefined for the instance.
    """
    if gold_gender not in BINARY_GENDERS:
        raise ValidationError(f"gold gender must be masculine or feminine, got {gold_gender.value}")
    surprisal = np.asarray(per_sample_surprisal, dtype=float)
    if surprisal.shape != (len(samples),):
        raise ValidationError(
            f"surprisal list has length {surprisal.shape[0] if surprisal.ndim else 0}, "
            f"expected {len(samples)}"
        )
    opposite = Gender.FEMININE if gold_gender is Gender.MASCULINE else Gender.MASCULINE
    labels = samples.gender_labels
    correct = [s for s, g in zip(surprisal, labels) if g is gold_gender]
    incorrect = [s for s, g in zip(surprisal, labels) if g is opposite]
    i_correct = float(np.mean(correct)) if correct else None
    i_incorrect = float(np.mean(incorrect)) if incorrect else None
    return i_correct, i_incorrect


def normalized_entropy(
    group: ContrastGroup,
    entropies: Mapping[str, float],
    tolerance: float = 1e-9,
) -> dict[str, float | None]:
    """Entropy of each member divided by the group's mean entropy.

    The denominator averages over all members including the instance itself,
    so defined values always average to 1 across the group. A group whose
    mean entropy falls below the tolerance is degenerate: every member is
    flagged missing instead of dividing by noise.
    """
    missing = [m for m in group.member_instance_ids if m not in entropies]
    if missing:
        raise ValidationError(
            f"contrast group {group.contrast_key!r} has members without entropies: {missing}"
        )
    values = [entropies[m] for m in group.member_instance_ids]
    denominator = float(np.mean(values))
    if denominator < tolerance:
        return {m: None for m in group.member_instance_ids}
    return {m: entropies[m] / denominator for m in group.member_instance_ids}


@dataclass
class AmbiguityAggregate:
    """Partition means of per-instance entropy and their relative difference."""

    h_unambiguous: float | None
    h_ambiguous: float | None
    delta_h: float | None
    n_unambiguous: int
    n_ambiguous: int


def aggregate_ambiguity_entropies(
    records: Sequence[MetricRecord],
    instances: Mapping[str, Instance],
) -> dict[tuple[str, str, str], AmbiguityAggregate]:
    """Mean entropy per ambiguity partition and delta_h, per (model, language, method)."""
    buckets: dict[tuple[str, str, str], dict[bool, list[float]]] = {}
    for record in records:
        instance = instances.get(record.instance_id)
        if instance is None:
            raise ValidationError(f"record references unknown instance {record.instance_id!r}")
        for method, metrics in record.methods.items():
            key = (record.model_id, record.language, method)
            buckets.setdefault(key, {True: [], False: []})[instance.ambiguous].append(metrics.entropy)

    out: dict[tuple[str, str, str], AmbiguityAggregate] = {}
    for key in sorted(buckets):
        ambiguous = buckets[key][True]
        unambiguous = buckets[key][False]
        h_unamb = float(np.mean(unambiguous)) if unambiguous else None
        h_amb = float(np.mean(ambiguous)) if ambiguous else None
        delta = relative_entropy(h_unamb, h_amb) if (h_unamb is not None and h_amb is not None) else None
        out[key] = AmbiguityAggregate(
            h_unambiguous=h_unamb,
            h_ambiguous=h_amb,
            delta_h=delta,
            n_unambiguous=len(unambiguous),
            n_ambiguous=len(ambiguous),
        )
    return out


def delta_logprob(correct_mean: float, incorrect_mean: float) -> float:
    """Relative difference of mean sequence log-probabilities.

    Same form as the relative surprisal, applied to log-probabilities of
    correct- vs incorrect-gender samples. Positive when correct translations
    are more probable, which requires the magnitude of the symmetric mean in
    the denominator (log-probabilities are non-positive).
    """
    if not (np.isfinite(correct_mean) and np.isfinite(incorrect_mean)):
        raise ValidationError("log-probability means must be finite")
    denominator = 0.5 * abs(correct_mean + incorrect_mean)
    if denominator < _EPS:
        return 0.0
    return (correct_mean - incorrect_mean) / denominator


def gender_accuracy(
    predictions: Mapping[str, Gender],
    instances: Mapping[str, Instance],
) -> float | None:
    """Percent of unambiguous instances whose predicted focus-noun gender is gold.

    Predictions are ingested labels for the top (beam) translation. Neutral
    or unknown predictions count against accuracy but stay in the
    denominator. Returns None when no unambiguous instance has a prediction.
    """
    total = 0
    correct = 0
    for instance_id, predicted in predictions.items():
        instance = instances.get(instance_id)
        if instance is None or instance.ambiguous:
            continue
        total += 1
        if predicted is instance.gold_gender:
            correct += 1
    if total == 0:
        return None
    return 100.0 * correct / total


def tokenize(text: str) -> list[str]:
    """Split on whitespace and punctuation, keeping punctuation tokens."""
    return _TOKEN_RE.findall(text)


def pronoun_template(text: str) -> tuple[str, ...]:
    """Token sequence with every pronoun-lexicon token replaced by a slot."""
    return tuple("<pron>" if t.lower() in PRONOUN_LEXICON else t for t in tokenize(text))


def contrast_key_for(template: tuple[str, ...]) -> str:
    digest = hashlib.sha1("\x1f".join(template).encode("utf-8")).hexdigest()
    return digest[:12]


def build_contrast_sets(instances: Iterable[Instance]) -> list[ContrastGroup]:
    """Group instances whose token sequences differ only at pronoun slots.

    Two instances share a group exactly when their pronoun-slotted templates
    match, which makes the grouping maximal, deterministic, and independent
    of input order. Two same-pronoun instances on one template are rejected
    as duplicates.
    """
    by_template: dict[tuple[str, ...], list[Instance]] = {}
    for instance in instances:
        by_template.setdefault(pronoun_template(instance.source_text), []).append(instance)

    groups: list[ContrastGroup] = []
    for template, members in by_template.items():
        seen: dict[Gender, str] = {}
        for member in members:
            if member.pronoun_gender in seen:
                raise ValidationError(
                    f"instances {seen[member.pronoun_gender]!r} and {member.instance_id!r} "
                    f"share a template and the pronoun gender {member.pronoun_gender.value}"
                )
            seen[member.pronoun_gender] = member.instance_id
        groups.append(
            ContrastGroup(
                contrast_key=contrast_key_for(template),
                member_instance_ids=tuple(sorted(m.instance_id for m in members)),
            )
        )
    groups.sort(key=lambda g: g.contrast_key)
    return groups


def augment_with_names(
    instance: Instance,
    language: str,
    names: Mapping[str, Mapping[Gender, str]] = DEFAULT_NAMES,
) -> Instance:
    """Insert a gender-matched given name right after the focus noun.

    "The mechanic called ..." becomes "The mechanic Anne called ..." for a
    feminine pronoun in French. Only unambiguous instances can be augmented;
    the focus-noun span is unchanged because the name lands after it, and
    removing the inserted token restores the original text byte for byte.
    """
    if instance.ambiguous:
        raise ValidationError(
            f"instance {instance.instance_id!r} is ambiguous; no gendered name applies"
        )
    table = names.get(language)
    name = table.get(instance.pronoun_gender) if table else None
    if name is None:
        raise ValidationError(
            f"no name for language {language!r} and gender {instance.pronoun_gender.value!r}"
        )
    _, end = instance.focus_span
    augmented_text = instance.source_text[:end] + " " + name + instance.source_text[end:]
    return replace(
        instance,
        source_text=augmented_text,
        cues=replace(instance.cues, names_present=True),
    )
