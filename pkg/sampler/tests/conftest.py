"""Fixture instances and references for sampler tests."""

from __future__ import annotations

import json
from pathlib import Path

import pytest


def _instance(instance_id, text, noun, pronoun, stereotype, key, subject="neutral"):
    start = text.index(noun)
    ambiguous = pronoun == "neutral"
    return {
        "instance_id": instance_id,
        "source_text": text,
        "focus_noun": noun,
        "focus_span": [start, start + len(noun)],
        "pronoun_gender": pronoun,
        "stereotype_gender": stereotype,
        "cues": {
            "recency": "neutral",
            "ic_role": "none",
            "stereotype_role": "none",
            "subject": subject,
            "names_present": False,
        },
        "ambiguous": ambiguous,
        "contrast_key": key,
        "gold_gender": None if ambiguous else pronoun,
        "default_masculine": False,
    }


FIXTURE_INSTANCES = [
    _instance("plumber-he", "The plumber phoned to explain that he repaired the sink .",
              "plumber", "masculine", "masculine", "grp-plumber", subject="masculine"),
    _instance("plumber-she", "The plumber phoned to explain that she repaired the sink .",
              "plumber", "feminine", "masculine", "grp-plumber", subject="feminine"),
    _instance("plumber-they", "The plumber phoned to explain that they repaired the sink .",
              "plumber", "neutral", "masculine", "grp-plumber"),
    _instance("nurse-she", "The nurse waved because she finished the shift early .",
              "nurse", "feminine", "feminine", "grp-nurse", subject="feminine"),
    _instance("developer-he", "The developer smiled because he shipped the release .",
              "developer", "masculine", "masculine", "grp-developer", subject="masculine"),
]


@pytest.fixture()
def instances_file(tmp_path) -> Path:
    path = tmp_path / "instances.jsonl"
    path.write_text(
        "\n".join(json.dumps(row, ensure_ascii=False) for row in FIXTURE_INSTANCES) + "\n",
        encoding="utf-8",
    )
    return path


@pytest.fixture()
def references_file(tmp_path) -> Path:
    def refs(row):
        noun = row["focus_noun"]
        masc = {"plumber": "el fontanero", "nurse": "el enfermero", "developer": "el desarrollador"}[noun]
        fem = {"plumber": "la fontanera", "nurse": "la enfermera", "developer": "la desarrolladora"}[noun]
        if row["ambiguous"]:
            return [
                {"reference_id": "ref-m", "text": f"{masc} terminó el trabajo"},
                {"reference_id": "ref-f", "text": f"{fem} terminó el trabajo"},
            ]
        gold = masc if row["gold_gender"] == "masculine" else fem
        return [{"reference_id": "ref-gold", "text": f"{gold} terminó el trabajo"}]

    path = tmp_path / "references.jsonl"
    path.write_text(
        "\n".join(
            json.dumps({"instance_id": row["instance_id"], "references": refs(row)}, ensure_ascii=False)
            for row in FIXTURE_INSTANCES
        )
        + "\n",
        encoding="utf-8",
    )
    return path
