"""File formats: schema validation, (de)serialization, and corpus assembly.

All record streams are UTF-8 line-delimited JSON with documented field
names (see the README for the full contract). Loading never guesses:
malformed content raises :class:`ValidationError` with a location, and
:func:`validate_corpus` converts every failure into a located report entry
instead of crashing.

Format summary:

- ``manifest.json``          corpus index; all paths relative to it
- ``instances.jsonl``        one instance per line
- ``samples.<model>.<lang>.jsonl``   header line, then one sample per line
- ``embeddings.<model>.<lang>.f32``  optional sidecar: 8-byte little-endian
  row count, then rows of 32-bit floats; rows align with sample line order
- ``entailment.<model>.<lang>.jsonl``  one row-major matrix per instance
- ``scores.jsonl``           quality scores and top-translation genders
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Iterator, Mapping

import numpy as np

from .bias import pronoun_template
from .types import (
    EffectEstimate,
    EntailmentMatrix,
    Gender,
    Instance,
    MetricRecord,
    Sample,
    SampleSet,
    SamplingMeta,
    ScoreRecord,
    ValidationError,
)

FORMAT_VERSION = "1.0.0"


def _major(version: str) -> str:
    return version.split(".", 1)[0]


def check_format_version(version: str, location: str) -> None:
    if not isinstance(version, str) or _major(version) != _major(FORMAT_VERSION):
        raise ValidationError(
            f"format_version {version!r} is incompatible with {FORMAT_VERSION}", location
        )


# ---------------------------------------------------------------------------
# Validation reporting


@dataclass(frozen=True)
class Violation:
    severity: str  # "error" | "warning"
    location: str
    message: str

    def to_json(self) -> dict[str, str]:
        return {"severity": self.severity, "location": self.location, "message": self.message}


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    def error(self, location: str, message: str) -> None:
        self.violations.append(Violation("error", location, message))

    def warning(self, location: str, message: str) -> None:
        self.violations.append(Violation("warning", location, message))

    @property
    def errors(self) -> list[Violation]:
        return [v for v in self.violations if v.severity == "error"]

    @property
    def warnings(self) -> list[Violation]:
        return [v for v in self.violations if v.severity == "warning"]

    def ok(self, strict: bool = False) -> bool:
        return not self.errors and not (strict and self.warnings)

    def to_json(self) -> dict[str, Any]:
        return {
            "errors": len(self.errors),
            "warnings": len(self.warnings),
            "violations": [v.to_json() for v in self.violations],
        }


# ---------------------------------------------------------------------------
# Manifest


@dataclass
class CorpusManifest:
    dataset_name: str
    format_version: str
    languages: list[str]
    models: list[str]
    instances_path: Path
    samples_paths: dict[tuple[str, str], Path]
    embeddings_paths: dict[tuple[str, str], Path] = field(default_factory=dict)
    entailment_paths: dict[tuple[str, str], Path] = field(default_factory=dict)
    scores_path: Path | None = None
    root: Path = Path(".")

    def pairs(self) -> list[tuple[str, str]]:
        return [(m, l) for m in self.models for l in self.languages]

    def to_json(self) -> dict[str, Any]:
        def nest(paths: Mapping[tuple[str, str], Path]) -> dict[str, dict[str, str]]:
            out: dict[str, dict[str, str]] = {}
            for (model, lang), path in sorted(paths.items()):
                out.setdefault(model, {})[lang] = str(path)
            return out

        obj: dict[str, Any] = {
            "format_version": self.format_version,
            "dataset_name": self.dataset_name,
            "languages": list(self.languages),
            "models": list(self.models),
            "instances": str(self.instances_path),
            "samples": nest(self.samples_paths),
        }
        if self.embeddings_paths:
            obj["embeddings"] = nest(self.embeddings_paths)
        if self.entailment_paths:
            obj["entailment"] = nest(self.entailment_paths)
        if self.scores_path is not None:
            obj["scores"] = str(self.scores_path)
        return obj

    def resolve(self, path: Path) -> Path:
        return path if path.is_absolute() else self.root / path


def load_manifest(path: str | Path) -> CorpusManifest:
    path = Path(path)
    location = str(path)
    try:
        obj = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ValidationError(f"cannot read manifest: {exc}", location) from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"manifest is not valid JSON: {exc}", location) from exc

    for key in ("format_version", "dataset_name", "languages", "models", "instances", "samples"):
        if key not in obj:
            raise ValidationError(f"manifest missing required field {key!r}", location)
    check_format_version(obj["format_version"], location)

    models = [str(m) for m in obj["models"]]
    languages = [str(l) for l in obj["languages"]]
    if not models or not languages:
        raise ValidationError("manifest must list at least one model and one language", location)

    def unnest(section: Any, name: str) -> dict[tuple[str, str], Path]:
        paths: dict[tuple[str, str], Path] = {}
        if not isinstance(section, dict):
            raise ValidationError(f"manifest section {name!r} must map model -> language -> path", location)
        for model, by_lang in section.items():
            if not isinstance(by_lang, dict):
                raise ValidationError(f"manifest section {name!r} must map model -> language -> path", location)
            for lang, rel in by_lang.items():
                paths[(str(model), str(lang))] = Path(str(rel))
        return paths

    samples = unnest(obj["samples"], "samples")
    expected = {(m, l) for m in models for l in languages}
    if set(samples) != expected:
        missing = sorted(expected - set(samples))
        extra = sorted(set(samples) - expected)
        parts = []
        if missing:
            parts.append(f"missing samples files for {missing}")
        if extra:
            parts.append(f"samples files for undeclared pairs {extra}")
        raise ValidationError("; ".join(parts), location)

    return CorpusManifest(
        dataset_name=str(obj["dataset_name"]),
        format_version=str(obj["format_version"]),
        languages=languages,
        models=models,
        instances_path=Path(str(obj["instances"])),
        samples_paths=samples,
        embeddings_paths=unnest(obj.get("embeddings", {}), "embeddings"),
        entailment_paths=unnest(obj.get("entailment", {}), "entailment"),
        scores_path=Path(str(obj["scores"])) if obj.get("scores") else None,
        root=path.parent,
    )


# ---------------------------------------------------------------------------
# Line-delimited JSON plumbing


def _iter_jsonl(path: Path) -> Iterator[tuple[int, dict[str, Any]]]:
    with path.open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"malformed JSON: {exc}", f"{path}:{line_number}") from exc
            if not isinstance(obj, dict):
                raise ValidationError("each line must hold a JSON object", f"{path}:{line_number}")
            yield line_number, obj


def write_jsonl(path: str | Path, rows: Iterable[Mapping[str, Any]]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row, ensure_ascii=False, allow_nan=False) + "\n")


def dump_json(path: str | Path, obj: Any) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(obj, ensure_ascii=False, allow_nan=False, indent=2) + "\n", encoding="utf-8"
    )


# ---------------------------------------------------------------------------
# Instances


def load_instances(path: str | Path) -> list[Instance]:
    """Parse and validate a line-delimited instances file.

    Unknown fields are preserved for round-tripping. Invariant violations
    are aggregated and raised together with their line numbers.
    """
    path = Path(path)
    instances: list[Instance] = []
    problems: list[str] = []
    seen: set[str] = set()
    for line_number, obj in _iter_jsonl(path):
        try:
            instance = Instance.from_json(obj)
        except ValidationError as exc:
            problems.append(f"{path}:{line_number}: {exc}")
            continue
        if instance.instance_id in seen:
            problems.append(f"{path}:{line_number}: duplicate instance_id {instance.instance_id!r}")
            continue
        seen.add(instance.instance_id)
        instances.append(instance)
    if problems:
        raise ValidationError("; ".join(problems))
    return instances


def write_instances(path: str | Path, instances: Iterable[Instance]) -> None:
    write_jsonl(path, (i.to_json() for i in instances))


# ---------------------------------------------------------------------------
# Sample sets


@dataclass
class SamplesHeader:
    format_version: str
    model_id: str
    language: str
    sampling: SamplingMeta

    def to_json(self) -> dict[str, Any]:
        return {
            "kind": "samples_header",
            "format_version": self.format_version,
            "model_id": self.model_id,
            "language": self.language,
            "sampling": self.sampling.to_json(),
        }

    @classmethod
    def from_json(cls, obj: Mapping[str, Any], location: str) -> "SamplesHeader":
        if obj.get("kind") != "samples_header":
            raise ValidationError("first line must be a samples_header object", location)
        check_format_version(obj.get("format_version", ""), location)
        try:
            return cls(
                format_version=str(obj["format_version"]),
                model_id=str(obj["model_id"]),
                language=str(obj["language"]),
                sampling=SamplingMeta.from_json(obj["sampling"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"invalid samples header: {exc}", location) from exc


def read_embedding_sidecar(path: str | Path) -> np.ndarray:
    """Read a flat float32 sidecar: 8-byte little-endian row count, then rows."""
    path = Path(path)
    data = path.read_bytes()
    if len(data) < 8:
        raise ValidationError("sidecar shorter than its 8-byte header", str(path))
    (rows,) = struct.unpack("<Q", data[:8])
    payload = len(data) - 8
    if rows == 0:
        if payload:
            raise ValidationError("sidecar declares 0 rows but has payload bytes", str(path))
        return np.zeros((0, 0), dtype=np.float32)
    if payload % (4 * rows) != 0:
        raise ValidationError(
            f"sidecar payload of {payload} bytes does not divide into {rows} float32 rows", str(path)
        )
    dim = payload // (4 * rows)
    if dim == 0:
        raise ValidationError("sidecar rows have zero dimension", str(path))
    return np.frombuffer(data, dtype="<f4", offset=8).reshape(int(rows), int(dim))


def write_embedding_sidecar(path: str | Path, rows: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = np.ascontiguousarray(rows, dtype="<f4")
    with path.open("wb") as handle:
        handle.write(struct.pack("<Q", rows.shape[0]))
        handle.write(rows.tobytes())


def load_sample_sets(
    path: str | Path,
    embeddings_path: str | Path | None = None,
    entailment_path: str | Path | None = None,
) -> tuple[SamplesHeader, dict[str, SampleSet]]:
    """Load every sample set in a samples file, keyed by instance id.

    Embedding sidecar rows align with sample line order across the whole
    file. A file may carry inline embeddings or reference a sidecar, not
    both.
    """
    path = Path(path)
    header: SamplesHeader | None = None
    rows: list[tuple[int, dict[str, Any]]] = []
    for line_number, obj in _iter_jsonl(path):
        if header is None:
            header = SamplesHeader.from_json(obj, f"{path}:{line_number}")
            continue
        rows.append((line_number, obj))
    if header is None:
        raise ValidationError("samples file is empty (missing header line)", str(path))

    sidecar: np.ndarray | None = None
    if embeddings_path is not None:
        sidecar = read_embedding_sidecar(embeddings_path)
        if sidecar.shape[0] != len(rows):
            raise ValidationError(
                f"sidecar has {sidecar.shape[0]} rows but samples file has {len(rows)} samples",
                str(embeddings_path),
            )

    by_instance: dict[str, list[Sample]] = {}
    for row_index, (line_number, obj) in enumerate(rows):
        location = f"{path}:{line_number}"
        for key in ("instance_id", "text", "log_prob", "gender"):
            if key not in obj:
                raise ValidationError(f"sample line missing field {key!r}", location)
        embedding = obj.get("embedding")
        if embedding is not None and sidecar is not None:
            raise ValidationError("inline embedding conflicts with the declared sidecar", location)
        if sidecar is not None:
            embedding = sidecar[row_index]
        try:
            sample = Sample(
                text=str(obj["text"]),
                log_prob=float(obj["log_prob"]),
                gender_label=Gender.parse(obj["gender"]),
                embedding=None if embedding is None else np.asarray(embedding, dtype=float),
            )
        except (TypeError, ValueError) as exc:
            raise ValidationError(str(exc), location) from exc
        by_instance.setdefault(str(obj["instance_id"]), []).append(sample)

    entailment: dict[str, EntailmentMatrix] = {}
    if entailment_path is not None:
        entailment = load_entailment(entailment_path)

    sets: dict[str, SampleSet] = {}
    for instance_id, samples in by_instance.items():
        matrix = entailment.get(instance_id)
        try:
            sets[instance_id] = SampleSet(
                instance_id=instance_id,
                model_id=header.model_id,
                language=header.language,
                samples=samples,
                sampling_meta=header.sampling,
                entailment=matrix,
            )
        except ValidationError as exc:
            raise ValidationError(str(exc), str(path)) from exc
    return header, sets


def load_sample_set(
    path: str | Path,
    instance_id: str,
    embeddings_path: str | Path | None = None,
    entailment_path: str | Path | None = None,
) -> SampleSet:
    _, sets = load_sample_sets(path, embeddings_path, entailment_path)
    if instance_id not in sets:
        raise ValidationError(f"no samples for instance {instance_id!r}", str(path))
    return sets[instance_id]


def write_sample_sets(
    path: str | Path,
    header: SamplesHeader,
    sets: Iterable[SampleSet],
    inline_embeddings: bool = True,
) -> None:
    def rows() -> Iterator[dict[str, Any]]:
        yield header.to_json()
        for sample_set in sets:
            for sample in sample_set.samples:
                row: dict[str, Any] = {
                    "instance_id": sample_set.instance_id,
                    "text": sample.text,
                    "log_prob": sample.log_prob,
                    "gender": sample.gender_label.value,
                }
                if inline_embeddings and sample.embedding is not None:
                    row["embedding"] = [float(v) for v in sample.embedding]
                yield row

    write_jsonl(path, rows())


# ---------------------------------------------------------------------------
# Entailment matrices


def load_entailment(path: str | Path) -> dict[str, EntailmentMatrix]:
    path = Path(path)
    matrices: dict[str, EntailmentMatrix] = {}
    for line_number, obj in _iter_jsonl(path):
        location = f"{path}:{line_number}"
        if "instance_id" not in obj or "scores" not in obj:
            raise ValidationError("entailment line needs instance_id and scores", location)
        instance_id = str(obj["instance_id"])
        if instance_id in matrices:
            raise ValidationError(f"duplicate entailment matrix for {instance_id!r}", location)
        try:
            matrices[instance_id] = EntailmentMatrix(np.asarray(obj["scores"], dtype=float))
        except (ValidationError, ValueError) as exc:
            raise ValidationError(f"invalid entailment matrix for {instance_id!r}: {exc}", location) from exc
    return matrices


def write_entailment(path: str | Path, matrices: Mapping[str, EntailmentMatrix]) -> None:
    write_jsonl(
        path,
        (
            {"instance_id": iid, "scores": [[float(v) for v in row] for row in matrices[iid].scores]}
            for iid in sorted(matrices)
        ),
    )


# ---------------------------------------------------------------------------
# Scores


def load_scores(path: str | Path) -> dict[tuple[str, str, str], ScoreRecord]:
    path = Path(path)
    scores: dict[tuple[str, str, str], ScoreRecord] = {}
    for line_number, obj in _iter_jsonl(path):
        location = f"{path}:{line_number}"
        try:
            record = ScoreRecord.from_json(obj)
        except (ValidationError, KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"invalid score record: {exc}", location) from exc
        key = (record.instance_id, record.model_id, record.language)
        if key in scores:
            raise ValidationError(f"duplicate score record for {key}", location)
        scores[key] = record
    return scores


def write_scores(path: str | Path, records: Iterable[ScoreRecord]) -> None:
    ordered = sorted(records, key=lambda r: (r.instance_id, r.model_id, r.language))
    write_jsonl(path, (r.to_json() for r in ordered))


# ---------------------------------------------------------------------------
# Metric records and effect tables


def write_metric_records(records: Iterable[MetricRecord], path: str | Path) -> None:
    """Write metric records sorted by (instance_id, model_id, language).

    Field order is fixed and floats round-trip at full precision, so
    identical inputs always produce byte-identical output.
    """
    ordered = sorted(records, key=lambda r: r.sort_key)
    write_jsonl(path, (r.to_json() for r in ordered))


def load_metric_records(path: str | Path) -> list[MetricRecord]:
    records = []
    for line_number, obj in _iter_jsonl(Path(path)):
        try:
            records.append(MetricRecord.from_json(obj))
        except (ValidationError, KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"invalid metric record: {exc}", f"{path}:{line_number}") from exc
    return records


def write_effect_tables(
    estimates: Iterable[tuple[str, str, str, str, EffectEstimate]],
    path: str | Path,
) -> None:
    """Write (model, language, method, dependent, estimate) rows as JSONL."""
    def row_key(row: tuple[str, str, str, str, EffectEstimate]) -> tuple:
        model, language, method, dependent, est = row
        return (model, language, method, dependent, est.cue, est.level)

    ordered = sorted(estimates, key=row_key)
    write_jsonl(
        path,
        (
            {"model_id": m, "language": l, "method": meth, "dependent": dep, **est.to_json()}
            for m, l, meth, dep, est in ordered
        ),
    )


# ---------------------------------------------------------------------------
# Corpus-level validation


def _guard(report: ValidationReport, location: str, action: Callable[[], None]) -> None:
    """Run one validation step, downgrading any crash to a report entry."""
    try:
        action()
    except ValidationError as exc:
        report.error(exc.location or location, str(exc))
    except OSError as exc:
        report.error(location, f"cannot read file: {exc}")
    except Exception as exc:  # total validation: never crash on bad input
        report.error(location, f"unexpected failure: {exc}")


def validate_corpus(manifest: CorpusManifest) -> ValidationReport:
    """Cross-file consistency checks over a whole corpus.

    Checks instance invariants, contrast-group well-formedness, per-pair
    sample coverage and alignment, entailment matrix contracts, and score
    constraints. Every failure becomes a located report entry.
    """
    report = ValidationReport()
    instances: list[Instance] = []

    instances_path = manifest.resolve(manifest.instances_path)

    def load_all_instances() -> None:
        nonlocal instances
        instances = load_instances(instances_path)

    _guard(report, str(instances_path), load_all_instances)
    by_id = {i.instance_id: i for i in instances}

    # Contrast groups: within one key, at most one instance per pronoun
    # gender, and all members must differ only at pronoun slots.
    by_key: dict[str, list[Instance]] = {}
    for instance in instances:
        by_key.setdefault(instance.contrast_key, []).append(instance)
    for key, members in sorted(by_key.items()):
        genders = [m.pronoun_gender for m in members]
        if len(genders) != len(set(genders)):
            report.error(
                str(instances_path),
                f"contrast group {key!r} holds more than one instance for a pronoun gender",
            )
        templates = {pronoun_template(m.source_text) for m in members}
        if len(templates) > 1:
            report.error(
                str(instances_path),
                f"contrast group {key!r} members differ outside the pronoun slots",
            )

    if any(i.default_masculine for i in instances) and "ru" not in manifest.languages:
        report.warning(
            str(instances_path),
            "default-masculine flags are set but the corpus has no Russian target",
        )

    # Per-pair samples files: coverage both ways plus sidecar alignment.
    for (model, lang) in sorted(manifest.samples_paths):
        samples_path = manifest.resolve(manifest.samples_paths[(model, lang)])
        embeddings = manifest.embeddings_paths.get((model, lang))
        entailment = manifest.entailment_paths.get((model, lang))

        def check_pair(model=model, lang=lang, samples_path=samples_path,
                       embeddings=embeddings, entailment=entailment) -> None:
            header, sets = load_sample_sets(
                samples_path,
                embeddings_path=manifest.resolve(embeddings) if embeddings else None,
                entailment_path=manifest.resolve(entailment) if entailment else None,
            )
            if header.model_id != model or header.language != lang:
                report.error(
                    str(samples_path),
                    f"header declares ({header.model_id}, {header.language}), "
                    f"manifest expects ({model}, {lang})",
                )
            covered = set(sets)
            for instance_id in sorted(set(by_id) - covered):
                report.error(str(samples_path), f"missing coverage for instance {instance_id!r}")
            for instance_id in sorted(covered - set(by_id)):
                report.error(str(samples_path), f"samples for unknown instance {instance_id!r}")

        _guard(report, str(samples_path), check_pair)

    # Scores: range and uniqueness happen at parse time; cross-checks here.
    if manifest.scores_path is not None:
        scores_path = manifest.resolve(manifest.scores_path)

        def check_scores() -> None:
            known_pairs = set(manifest.pairs())
            for key, record in sorted(load_scores(scores_path).items()):
                instance_id, model, lang = key
                instance = by_id.get(instance_id)
                if instance is None:
                    report.error(str(scores_path), f"score for unknown instance {instance_id!r}")
                    continue
                if (model, lang) not in known_pairs:
                    report.error(str(scores_path), f"score for undeclared pair ({model}, {lang})")
                if instance.ambiguous and 0 < len(record.comet_scores) < 2:
                    report.warning(
                        str(scores_path),
                        f"ambiguous instance {instance_id!r} needs scores for >= 2 references "
                        f"(multi-reference aggregation), found {len(record.comet_scores)}",
                    )

        _guard(report, str(scores_path), check_scores)

    return report
