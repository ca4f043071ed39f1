"""Staged corpus production: sample -> embed/entail -> tag/score -> manifest.

Each stage reads and writes the engine's file formats, so stages can be
rerun independently and third-party tools can replace any of them. A model
failure on one instance produces an error record and the run continues;
the engine's validator will then flag the missing coverage rather than
this sampler papering over it.
"""

from __future__ import annotations

import json
import logging
import shutil
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .backends import OfflineBackend
from .config import SamplerConfig
from .formats import (
    entailment_row,
    merge_scores_file,
    sample_row,
    samples_header,
    score_row,
    update_manifest,
    write_embedding_sidecar,
    write_jsonl,
)
from .instances import SourceInstance, load_source_instances

logger = logging.getLogger(__name__)


@dataclass
class RunPaths:
    out_dir: Path
    samples: Path
    embeddings: Path
    entailment: Path
    scores: Path
    errors: Path
    manifest: Path
    instances: Path

    @classmethod
    def for_config(cls, out_dir: str | Path, config: SamplerConfig) -> "RunPaths":
        out_dir = Path(out_dir)
        stem = f"{config.model_id}.{config.language}"
        return cls(
            out_dir=out_dir,
            samples=out_dir / f"samples.{stem}.jsonl",
            embeddings=out_dir / f"embeddings.{stem}.f32",
            entailment=out_dir / f"entailment.{stem}.jsonl",
            scores=out_dir / "scores.jsonl",
            errors=out_dir / f"errors.{stem}.jsonl",
            manifest=out_dir / "manifest.json",
            instances=out_dir / "instances.jsonl",
        )


def _build_backend(config: SamplerConfig):
    if config.backend == "offline":
        return OfflineBackend.from_config(config)
    from .hf import HFBackend

    return HFBackend.from_config(config)


def sample_translations(
    instances: list[SourceInstance],
    config: SamplerConfig,
    paths: RunPaths,
    backend=None,
) -> list[dict[str, Any]]:
    """Draw num_samples epsilon-sampled translations per instance.

    Gender fields are written as "unknown" placeholders; the tagging stage
    fills them in. Returns error records for instances that failed.
    """
    backend = backend or _build_backend(config)
    errors: list[dict[str, Any]] = []
    rows: list[dict[str, Any]] = [
        samples_header(config.model_id, config.language, config.num_samples, config.epsilon, config.seed)
    ]
    for instance in instances:
        try:
            draws = backend.translator.sample_many(instance, config.seed)
        except Exception as exc:
            logger.warning("sampling failed for %s: %s", instance.instance_id, exc)
            errors.append({"stage": "sample", "instance_id": instance.instance_id, "error": str(exc)})
            continue
        for draw in draws:
            rows.append(sample_row(instance.instance_id, draw.text, draw.log_prob, "unknown"))
    write_jsonl(paths.samples, rows)
    if errors:
        write_jsonl(paths.errors, errors)
    return errors


def _read_samples(paths: RunPaths) -> tuple[dict[str, Any], list[dict[str, Any]]]:
    lines = paths.samples.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ValueError(f"{paths.samples} is empty; run the sampling stage first")
    header = json.loads(lines[0])
    rows = [json.loads(line) for line in lines[1:] if line.strip()]
    return header, rows


def embed_and_entail(config: SamplerConfig, paths: RunPaths, backend=None) -> None:
    """Row-aligned embedding sidecar plus per-instance entailment matrices."""
    backend = backend or _build_backend(config)
    _, rows = _read_samples(paths)
    texts = [row["text"] for row in rows]
    embeddings = backend.encoder.encode(texts)
    norms = np.linalg.norm(embeddings, axis=1, keepdims=True)
    write_embedding_sidecar(paths.embeddings, embeddings / np.maximum(norms, 1e-12))

    by_instance: dict[str, list[str]] = {}
    for row in rows:
        by_instance.setdefault(row["instance_id"], []).append(row["text"])
    entailment_rows = [
        entailment_row(instance_id, backend.entailment.pairwise(instance_texts))
        for instance_id, instance_texts in by_instance.items()
    ]
    write_jsonl(paths.entailment, entailment_rows)


def load_references(path: str | Path) -> dict[str, list[tuple[str, str]]]:
    """references.jsonl: {"instance_id", "references": [{"reference_id", "text"}]}"""
    references: dict[str, list[tuple[str, str]]] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        references[str(obj["instance_id"])] = [
            (str(r["reference_id"]), str(r["text"])) for r in obj["references"]
        ]
    return references


def tag_gender_and_score(
    instances: list[SourceInstance],
    config: SamplerConfig,
    paths: RunPaths,
    references: dict[str, list[tuple[str, str]]] | None = None,
    backend=None,
) -> None:
    """Fill per-sample gender labels; score greedy translations per reference.

    The samples file is rewritten with real gender labels. Scores carry one
    entry per provided reference (ambiguous items should come with both
    gendered references) and the greedy translation's tagged gender as the
    prediction label.
    """
    backend = backend or _build_backend(config)
    by_id = {i.instance_id: i for i in instances}
    header, rows = _read_samples(paths)
    for row in rows:
        instance = by_id.get(row["instance_id"])
        if instance is None:
            continue
        row["gender"] = backend.tagger.tag(instance.focus_noun, row["text"])
    write_jsonl(paths.samples, [header] + rows)

    if references is None:
        return
    score_rows = []
    for instance in instances:
        refs = references.get(instance.instance_id)
        if not refs:
            continue
        greedy = backend.translator.greedy(instance)
        prediction = backend.tagger.tag(instance.focus_noun, greedy.text)
        comet = [(ref_id, backend.scorer.score(greedy.text, text)) for ref_id, text in refs]
        score_rows.append(
            score_row(
                instance.instance_id,
                config.model_id,
                config.language,
                comet,
                None if prediction == "unknown" else prediction,
            )
        )
    merge_scores_file(paths.scores, score_rows)


def install_instances_file(source: str | Path, paths: RunPaths) -> None:
    """Copy the instances file into the corpus, refusing silent mismatches."""
    source = Path(source)
    if paths.instances.exists():
        if paths.instances.read_bytes() != source.read_bytes():
            raise ValueError(
                f"{paths.instances} already exists with different content; "
                "one corpus directory must be built from one instances file"
            )
        return
    paths.out_dir.mkdir(parents=True, exist_ok=True)
    shutil.copyfile(source, paths.instances)


def run_all(
    instances_path: str | Path,
    out_dir: str | Path,
    config: SamplerConfig,
    references_path: str | Path | None = None,
    dataset_name: str = "sampled-corpus",
) -> RunPaths:
    """Full pipeline for one (model, language) pair into a corpus directory."""
    paths = RunPaths.for_config(out_dir, config)
    instances = load_source_instances(instances_path)
    backend = _build_backend(config)

    install_instances_file(instances_path, paths)
    errors = sample_translations(instances, config, paths, backend)
    embed_and_entail(config, paths, backend)
    references = load_references(references_path) if references_path else None
    tag_gender_and_score(instances, config, paths, references, backend)
    update_manifest(
        paths.manifest,
        dataset_name=dataset_name,
        model_id=config.model_id,
        language=config.language,
        samples_file=paths.samples.name,
        embeddings_file=paths.embeddings.name,
        entailment_file=paths.entailment.name,
        scores_file=paths.scores.name if references else None,
    )
    if errors:
        logger.warning("%d instance(s) failed; see %s", len(errors), paths.errors)
    return paths
