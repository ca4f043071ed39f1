"""Writers for the evaluation engine's file contract.

Implemented against the documented formats, independently of the engine's
own code: line-delimited UTF-8 JSON streams, a float32 embedding sidecar
with an 8-byte little-endian row-count header, and a manifest whose paths
are relative to its own location.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Any, Iterable, Mapping

import numpy as np

FORMAT_VERSION = "1.0.0"


def write_jsonl(path: str | Path, rows: Iterable[Mapping[str, Any]]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as handle:
        for row in rows:
            handle.write(json.dumps(row, ensure_ascii=False, allow_nan=False) + "\n")


def samples_header(model_id: str, language: str, num_samples: int, epsilon: float, seed: int) -> dict:
    return {
        "kind": "samples_header",
        "format_version": FORMAT_VERSION,
        "model_id": model_id,
        "language": language,
        "sampling": {"num_samples": num_samples, "epsilon": epsilon, "seed": seed},
    }


def sample_row(instance_id: str, text: str, log_prob: float, gender: str) -> dict:
    return {"instance_id": instance_id, "text": text, "log_prob": log_prob, "gender": gender}


def write_embedding_sidecar(path: str | Path, rows: np.ndarray) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = np.ascontiguousarray(rows, dtype="<f4")
    with path.open("wb") as handle:
        handle.write(struct.pack("<Q", rows.shape[0]))
        handle.write(rows.tobytes())


def entailment_row(instance_id: str, scores: np.ndarray) -> dict:
    return {
        "instance_id": instance_id,
        "scores": [[float(v) for v in row] for row in np.asarray(scores, dtype=float)],
    }


def score_row(
    instance_id: str,
    model_id: str,
    language: str,
    comet: list[tuple[str, float]],
    prediction_gender: str | None,
) -> dict:
    return {
        "instance_id": instance_id,
        "model_id": model_id,
        "language": language,
        "comet": [{"reference_id": r, "score": s} for r, s in comet],
        "prediction_gender": prediction_gender,
    }


def update_manifest(
    manifest_path: str | Path,
    dataset_name: str,
    model_id: str,
    language: str,
    samples_file: str,
    embeddings_file: str | None,
    entailment_file: str | None,
    scores_file: str | None,
) -> None:
    """Create or extend a corpus manifest with one (model, language) pair.

    Repeated sampler runs over different models and languages accumulate
    into a single manifest; the engine requires exactly one samples file
    per declared pair, so declarations and files are kept in lockstep.
    """
    manifest_path = Path(manifest_path)
    if manifest_path.exists():
        obj = json.loads(manifest_path.read_text(encoding="utf-8"))
        if obj.get("format_version", "").split(".")[0] != FORMAT_VERSION.split(".")[0]:
            raise ValueError(f"existing manifest has incompatible format_version {obj.get('format_version')!r}")
    else:
        obj = {
            "format_version": FORMAT_VERSION,
            "dataset_name": dataset_name,
            "languages": [],
            "models": [],
            "instances": "instances.jsonl",
            "samples": {},
        }

    if language not in obj["languages"]:
        obj["languages"].append(language)
    if model_id not in obj["models"]:
        obj["models"].append(model_id)
    obj["samples"].setdefault(model_id, {})[language] = samples_file
    if embeddings_file is not None:
        obj.setdefault("embeddings", {}).setdefault(model_id, {})[language] = embeddings_file
    if entailment_file is not None:
        obj.setdefault("entailment", {}).setdefault(model_id, {})[language] = entailment_file
    if scores_file is not None:
        obj["scores"] = scores_file

    missing = [
        (m, l)
        for m in obj["models"]
        for l in obj["languages"]
        if l not in obj["samples"].get(m, {})
    ]
    if missing:
        raise ValueError(
            f"manifest would declare pairs without samples files: {missing}; "
            "run the sampler for those (model, language) pairs first or use a separate output directory"
        )

    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    manifest_path.write_text(
        json.dumps(obj, ensure_ascii=False, allow_nan=False, indent=2) + "\n", encoding="utf-8"
    )


def merge_scores_file(path: str | Path, new_rows: list[dict]) -> None:
    """Append score rows, replacing any previous rows for the same keys."""
    path = Path(path)
    rows: dict[tuple[str, str, str], dict] = {}
    if path.exists():
        for line in path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            obj = json.loads(line)
            rows[(obj["instance_id"], obj["model_id"], obj["language"])] = obj
    for obj in new_rows:
        rows[(obj["instance_id"], obj["model_id"], obj["language"])] = obj
    ordered = [rows[k] for k in sorted(rows)]
    write_jsonl(path, ordered)
