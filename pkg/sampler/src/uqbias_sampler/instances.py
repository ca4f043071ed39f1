"""Minimal reader for the engine's `instances.jsonl` contract.

Only the fields the sampler needs are interpreted; everything else is
carried through untouched so the file can be copied verbatim into the
output corpus.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

_GENDERS = {"masculine", "feminine", "neutral"}


@dataclass(frozen=True)
class SourceInstance:
    instance_id: str
    source_text: str
    focus_noun: str
    pronoun_gender: str  # masculine | feminine | neutral
    stereotype_gender: str
    ambiguous: bool
    gold_gender: str | None
    raw: dict[str, Any]


def load_source_instances(path: str | Path) -> list[SourceInstance]:
    instances: list[SourceInstance] = []
    with Path(path).open("r", encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{line_number}: malformed JSON: {exc}") from exc
            for key in ("instance_id", "source_text", "focus_noun", "pronoun_gender"):
                if key not in obj:
                    raise ValueError(f"{path}:{line_number}: missing field {key!r}")
            pronoun = str(obj["pronoun_gender"])
            if pronoun not in _GENDERS:
                raise ValueError(f"{path}:{line_number}: bad pronoun_gender {pronoun!r}")
            instances.append(
                SourceInstance(
                    instance_id=str(obj["instance_id"]),
                    source_text=str(obj["source_text"]),
                    focus_noun=str(obj["focus_noun"]),
                    pronoun_gender=pronoun,
                    stereotype_gender=str(obj.get("stereotype_gender", "neutral")),
                    ambiguous=bool(obj.get("ambiguous", pronoun == "neutral")),
                    gold_gender=obj.get("gold_gender"),
                    raw=obj,
                )
            )
    return instances
