"""Domain types shared across the evaluation engine.

Instances, sample sets and their sidecar payloads are validated on
construction so that every downstream operation can assume well-formed
inputs. Violations raise :class:`ValidationError`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping

import numpy as np


class ValidationError(ValueError):
    """Raised when an input violates a documented invariant."""

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


class Gender(str, Enum):
    MASCULINE = "masculine"
    FEMININE = "feminine"
    NEUTRAL = "neutral"
    UNKNOWN = "unknown"

    @classmethod
    def parse(cls, raw: str, allowed: tuple["Gender", ...] | None = None) -> "Gender":
        try:
            value = cls(raw)
        except ValueError:
            raise ValidationError(f"unknown gender label {raw!r}") from None
        if allowed is not None and value not in allowed:
            names = ", ".join(g.value for g in allowed)
            raise ValidationError(f"gender {raw!r} not allowed here (expected one of: {names})")
        return value


BINARY_GENDERS = (Gender.MASCULINE, Gender.FEMININE)
PRONOUN_GENDERS = (Gender.MASCULINE, Gender.FEMININE, Gender.NEUTRAL)
# Canonical label order for deterministic per-gender grouping.
GENDER_ORDER = (Gender.MASCULINE, Gender.FEMININE, Gender.NEUTRAL, Gender.UNKNOWN)


class RoleCue(str, Enum):
    """Bias-cue levels that combine grammatical role and gender."""

    SUBJ_F = "subj-f"
    SUBJ_M = "subj-m"
    OBJ_F = "obj-f"
    OBJ_M = "obj-m"
    NONE = "none"

    @classmethod
    def parse(cls, raw: str) -> "RoleCue":
        try:
            return cls(raw)
        except ValueError:
            raise ValidationError(f"unknown role cue {raw!r}") from None


@dataclass(frozen=True)
class SamplingMeta:
    """Provenance of a Monte-Carlo draw. Recorded, never interpreted."""

    num_samples: int
    epsilon: float
    seed: int

    def to_json(self) -> dict[str, Any]:
        return {"num_samples": self.num_samples, "epsilon": self.epsilon, "seed": self.seed}

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "SamplingMeta":
        return cls(
            num_samples=int(obj["num_samples"]),
            epsilon=float(obj["epsilon"]),
            seed=int(obj["seed"]),
        )


@dataclass
class Sample:
    """One drawn translation with its sequence log-probability (nats)."""

    text: str
    log_prob: float
    gender_label: Gender
    embedding: np.ndarray | None = None

    def __post_init__(self):
        if not math.isfinite(self.log_prob):
            raise ValidationError(f"log_prob must be finite, got {self.log_prob}")
        if self.log_prob > 0:
            raise ValidationError(f"log_prob must be <= 0, got {self.log_prob}")
        if self.embedding is not None:
            emb = np.asarray(self.embedding, dtype=float)
            if emb.ndim != 1 or emb.size == 0:
                raise ValidationError("embedding must be a non-empty 1-d vector")
            if not np.isfinite(emb).all():
                raise ValidationError("embedding contains non-finite values")
            if float(np.linalg.norm(emb)) == 0.0:
                raise ValidationError("embedding has zero norm")
            self.embedding = emb


@dataclass
class EntailmentMatrix:
    """Pairwise entailment probabilities; scores[i][j] = P(sample i entails sample j)."""

    scores: np.ndarray

    def __post_init__(self):
        scores = np.asarray(self.scores, dtype=float)
        if scores.ndim != 2 or scores.shape[0] != scores.shape[1] or scores.shape[0] == 0:
            raise ValidationError(f"entailment matrix must be square and non-empty, got shape {scores.shape}")
        if not np.isfinite(scores).all():
            raise ValidationError("entailment matrix contains non-finite entries")
        if (scores < 0).any() or (scores > 1).any():
            raise ValidationError("entailment probabilities must lie in [0, 1]")
        diag = np.diagonal(scores)
        if np.abs(diag - 1.0).max() > 1e-9:
            raise ValidationError("entailment matrix diagonal must be 1.0 (self-entailment)")
        self.scores = scores

    @property
    def size(self) -> int:
        return self.scores.shape[0]


@dataclass
class SampleSet:
    """All Monte-Carlo draws for one (instance, model, language)."""

    instance_id: str
    model_id: str
    language: str
    samples: list[Sample]
    sampling_meta: SamplingMeta | None = None
    entailment: EntailmentMatrix | None = None

    def __post_init__(self):
        if not self.samples:
            raise ValidationError(f"sample set for {self.instance_id!r} is empty")
        dims = {s.embedding.shape[0] for s in self.samples if s.embedding is not None}
        if len(dims) > 1:
            raise ValidationError(f"inconsistent embedding dimensions {sorted(dims)} in {self.instance_id!r}")
        if self.entailment is not None and self.entailment.size != len(self.samples):
            raise ValidationError(
                f"entailment matrix is {self.entailment.size}x{self.entailment.size} "
                f"but sample set has {len(self.samples)} samples"
            )

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def log_probs(self) -> np.ndarray:
        return np.array([s.log_prob for s in self.samples], dtype=float)

    @property
    def gender_labels(self) -> list[Gender]:
        return [s.gender_label for s in self.samples]

    def has_embeddings(self) -> bool:
        return all(s.embedding is not None for s in self.samples)

    def embedding_matrix(self) -> np.ndarray:
        if not self.has_embeddings():
            raise ValidationError(f"sample set {self.instance_id!r} is missing embeddings")
        return np.stack([s.embedding for s in self.samples])


@dataclass
class ClusterAssignment:
    """Sample-to-cluster mapping with contiguous cluster indices."""

    cluster_of: list[int]
    num_clusters: int

    def __post_init__(self):
        if not self.cluster_of:
            raise ValidationError("cluster assignment is empty")
        seen = set(self.cluster_of)
        if seen != set(range(self.num_clusters)):
            raise ValidationError(
                f"cluster indices must be contiguous 0..{self.num_clusters - 1}, got {sorted(seen)}"
            )

    def counts(self) -> np.ndarray:
        return np.bincount(self.cluster_of, minlength=self.num_clusters)


@dataclass(frozen=True)
class SimilarityConfig:
    """Similarity shaping for the expected-similarity entropy estimator."""

    alpha: float = 1.0
    floor: float = 1e-6

    def __post_init__(self):
        if not (self.alpha > 0):
            raise ValidationError(f"alpha must be positive, got {self.alpha}")
        if not (0 < self.floor < 1):
            raise ValidationError(f"floor must lie in (0, 1), got {self.floor}")


@dataclass(frozen=True)
class CueAnnotations:
    recency: Gender = Gender.NEUTRAL
    ic_role: RoleCue = RoleCue.NONE
    stereotype_role: RoleCue = RoleCue.NONE
    subject: Gender = Gender.NEUTRAL
    names_present: bool = False

    def __post_init__(self):
        if self.recency not in PRONOUN_GENDERS:
            raise ValidationError(f"recency cue must be masculine/feminine/neutral, got {self.recency.value}")
        if self.subject not in PRONOUN_GENDERS:
            raise ValidationError(f"subject cue must be masculine/feminine/neutral, got {self.subject.value}")

    def to_json(self) -> dict[str, Any]:
        return {
            "recency": self.recency.value,
            "ic_role": self.ic_role.value,
            "stereotype_role": self.stereotype_role.value,
            "subject": self.subject.value,
            "names_present": self.names_present,
        }

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "CueAnnotations":
        return cls(
            recency=Gender.parse(obj.get("recency", "neutral"), PRONOUN_GENDERS),
            ic_role=RoleCue.parse(obj.get("ic_role", "none")),
            stereotype_role=RoleCue.parse(obj.get("stereotype_role", "none")),
            subject=Gender.parse(obj.get("subject", "neutral"), PRONOUN_GENDERS),
            names_present=bool(obj.get("names_present", False)),
        )


@dataclass
class Instance:
    """One source sentence with its focus noun and bias-cue annotations."""

    instance_id: str
    source_text: str
    focus_noun: str
    focus_span: tuple[int, int]
    pronoun_gender: Gender
    stereotype_gender: Gender
    cues: CueAnnotations
    contrast_key: str
    ambiguous: bool
    gold_gender: Gender | None = None
    default_masculine: bool = False
    extra: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.pronoun_gender not in PRONOUN_GENDERS:
            raise ValidationError(f"pronoun_gender must be masculine/feminine/neutral, got {self.pronoun_gender.value}")
        if self.stereotype_gender not in PRONOUN_GENDERS:
            raise ValidationError("stereotype_gender must be masculine/feminine/neutral")
        if self.ambiguous != (self.pronoun_gender is Gender.NEUTRAL):
            raise ValidationError(
                f"instance {self.instance_id!r}: ambiguous flag must hold exactly when the pronoun is neutral"
            )
        if self.ambiguous and self.gold_gender is not None:
            raise ValidationError(f"instance {self.instance_id!r}: ambiguous instances cannot carry a gold gender")
        if not self.ambiguous and self.gold_gender is None:
            raise ValidationError(f"instance {self.instance_id!r}: unambiguous instances require a gold gender")
        if self.gold_gender is not None and self.gold_gender not in BINARY_GENDERS:
            raise ValidationError(f"instance {self.instance_id!r}: gold gender must be masculine or feminine")
        start, end = self.focus_span
        if not (0 <= start < end <= len(self.source_text)):
            raise ValidationError(f"instance {self.instance_id!r}: focus span {self.focus_span} out of bounds")
        if self.source_text[start:end] != self.focus_noun:
            raise ValidationError(
                f"instance {self.instance_id!r}: focus span does not cover the focus noun "
                f"({self.source_text[start:end]!r} != {self.focus_noun!r})"
            )

    def to_json(self) -> dict[str, Any]:
        obj: dict[str, Any] = {
            "instance_id": self.instance_id,
            "source_text": self.source_text,
            "focus_noun": self.focus_noun,
            "focus_span": list(self.focus_span),
            "pronoun_gender": self.pronoun_gender.value,
            "stereotype_gender": self.stereotype_gender.value,
            "cues": self.cues.to_json(),
            "ambiguous": self.ambiguous,
            "contrast_key": self.contrast_key,
            "gold_gender": self.gold_gender.value if self.gold_gender else None,
            "default_masculine": self.default_masculine,
        }
        obj.update(self.extra)
        return obj

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "Instance":
        known = {
            "instance_id", "source_text", "focus_noun", "focus_span", "pronoun_gender",
            "stereotype_gender", "cues", "ambiguous", "contrast_key", "gold_gender",
            "default_masculine",
        }
        missing = {"instance_id", "source_text", "focus_noun", "focus_span",
                   "pronoun_gender", "contrast_key"} - set(obj)
        if missing:
            raise ValidationError(f"instance record missing fields: {', '.join(sorted(missing))}")
        span = obj["focus_span"]
        if not (isinstance(span, (list, tuple)) and len(span) == 2):
            raise ValidationError("focus_span must be a [start, end] pair")
        gold = obj.get("gold_gender")
        return cls(
            instance_id=str(obj["instance_id"]),
            source_text=str(obj["source_text"]),
            focus_noun=str(obj["focus_noun"]),
            focus_span=(int(span[0]), int(span[1])),
            pronoun_gender=Gender.parse(obj["pronoun_gender"], PRONOUN_GENDERS),
            stereotype_gender=Gender.parse(obj.get("stereotype_gender", "neutral"), PRONOUN_GENDERS),
            cues=CueAnnotations.from_json(obj.get("cues", {})),
            ambiguous=bool(obj.get("ambiguous", obj["pronoun_gender"] == "neutral")),
            contrast_key=str(obj["contrast_key"]),
            gold_gender=Gender.parse(gold, BINARY_GENDERS) if gold is not None else None,
            default_masculine=bool(obj.get("default_masculine", False)),
            extra={k: v for k, v in obj.items() if k not in known},
        )


@dataclass(frozen=True)
class ContrastGroup:
    """Minimal-pair group of instances that differ only in the pronoun."""

    contrast_key: str
    member_instance_ids: tuple[str, ...]


@dataclass
class MethodMetrics:
    """Per-instance metric values for one entropy method."""

    entropy: float
    norm_entropy: float | None = None
    surprisal_by_gender: dict[Gender, float] = field(default_factory=dict)
    i_correct: float | None = None
    i_incorrect: float | None = None
    delta_i: float | None = None

    def to_json(self) -> dict[str, Any]:
        return {
            "entropy": self.entropy,
            "norm_entropy": self.norm_entropy,
            "surprisal_by_gender": {g.value: v for g, v in self.surprisal_by_gender.items()},
            "i_correct": self.i_correct,
            "i_incorrect": self.i_incorrect,
            "delta_i": self.delta_i,
        }

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "MethodMetrics":
        return cls(
            entropy=float(obj["entropy"]),
            norm_entropy=None if obj.get("norm_entropy") is None else float(obj["norm_entropy"]),
            surprisal_by_gender={
                Gender.parse(k): float(v) for k, v in obj.get("surprisal_by_gender", {}).items()
            },
            i_correct=None if obj.get("i_correct") is None else float(obj["i_correct"]),
            i_incorrect=None if obj.get("i_incorrect") is None else float(obj["i_incorrect"]),
            delta_i=None if obj.get("delta_i") is None else float(obj["delta_i"]),
        )


# Canonical method identifiers, in serialization order.
METHOD_ORDER = ("shannon", "se", "s3e", "ge")


@dataclass
class MetricRecord:
    """Computed metrics for one (instance, model, language) triple."""

    instance_id: str
    model_id: str
    language: str
    methods: dict[str, MethodMetrics] = field(default_factory=dict)
    logprob_correct: float | None = None
    logprob_incorrect: float | None = None
    comet_score: float | None = None
    prediction_gender: Gender | None = None

    @property
    def sort_key(self) -> tuple[str, str, str]:
        return (self.instance_id, self.model_id, self.language)

    def to_json(self) -> dict[str, Any]:
        return {
            "instance_id": self.instance_id,
            "model_id": self.model_id,
            "language": self.language,
            "methods": {m: self.methods[m].to_json() for m in METHOD_ORDER if m in self.methods},
            "logprob_correct": self.logprob_correct,
            "logprob_incorrect": self.logprob_incorrect,
            "comet_score": self.comet_score,
            "prediction_gender": self.prediction_gender.value if self.prediction_gender else None,
        }

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "MetricRecord":
        pred = obj.get("prediction_gender")
        return cls(
            instance_id=str(obj["instance_id"]),
            model_id=str(obj["model_id"]),
            language=str(obj["language"]),
            methods={m: MethodMetrics.from_json(v) for m, v in obj.get("methods", {}).items()},
            logprob_correct=None if obj.get("logprob_correct") is None else float(obj["logprob_correct"]),
            logprob_incorrect=None if obj.get("logprob_incorrect") is None else float(obj["logprob_incorrect"]),
            comet_score=None if obj.get("comet_score") is None else float(obj["comet_score"]),
            prediction_gender=Gender.parse(pred) if pred is not None else None,
        )


@dataclass
class ScoreRecord:
    """Ingested quality scores and top-translation gender for one triple."""

    instance_id: str
    model_id: str
    language: str
    comet_scores: list[tuple[str, float]] = field(default_factory=list)
    prediction_gender: Gender | None = None

    def __post_init__(self):
        ref_ids = [r for r, _ in self.comet_scores]
        if len(ref_ids) != len(set(ref_ids)):
            raise ValidationError(f"duplicate reference ids in scores for {self.instance_id!r}")
        for ref, score in self.comet_scores:
            if not (0.0 <= score <= 100.0):
                raise ValidationError(f"comet score {score} for reference {ref!r} outside [0, 100]")

    def to_json(self) -> dict[str, Any]:
        return {
            "instance_id": self.instance_id,
            "model_id": self.model_id,
            "language": self.language,
            "comet": [{"reference_id": r, "score": s} for r, s in self.comet_scores],
            "prediction_gender": self.prediction_gender.value if self.prediction_gender else None,
        }

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "ScoreRecord":
        pred = obj.get("prediction_gender")
        return cls(
            instance_id=str(obj["instance_id"]),
            model_id=str(obj["model_id"]),
            language=str(obj["language"]),
            comet_scores=[(str(e["reference_id"]), float(e["score"])) for e in obj.get("comet", [])],
            prediction_gender=Gender.parse(pred) if pred is not None else None,
        )


@dataclass
class EffectEstimate:
    """Single-effect coefficient of one cue level against its reference group."""

    cue: str
    level: str
    reference_level: str
    coefficient: float
    p_value: float | None
    significant: bool
    n_level: int
    n_reference: int
    degenerate: bool = False

    def __post_init__(self):
        expected = self.p_value is not None and self.p_value < 0.05
        if self.significant != expected:
            raise ValidationError(
                f"significance flag inconsistent with p-value for {self.cue}/{self.level}"
            )

    def to_json(self) -> dict[str, Any]:
        return {
            "cue": self.cue,
            "level": self.level,
            "reference_level": self.reference_level,
            "coefficient": self.coefficient,
            "p_value": self.p_value,
            "significant": self.significant,
            "n_level": self.n_level,
            "n_reference": self.n_reference,
            "degenerate": self.degenerate,
        }


@dataclass
class BinnedSummary:
    """Plot-ready distribution summary for one (quality bin, ambiguity condition)."""

    bin_index: int
    bin_lo: float
    bin_hi: float
    condition: str  # "ambiguous" | "unambiguous"
    count: int
    minimum: float | None = None
    q1: float | None = None
    median: float | None = None
    q3: float | None = None
    maximum: float | None = None
    density_x: list[float] = field(default_factory=list)
    density_y: list[float] = field(default_factory=list)
    merged: bool = False

    def to_json(self) -> dict[str, Any]:
        return {
            "bin_index": self.bin_index,
            "bin_lo": self.bin_lo,
            "bin_hi": self.bin_hi,
            "condition": self.condition,
            "count": self.count,
            "min": self.minimum,
            "q1": self.q1,
            "median": self.median,
            "q3": self.q3,
            "max": self.maximum,
            "density_x": self.density_x,
            "density_y": self.density_y,
            "merged": self.merged,
        }
