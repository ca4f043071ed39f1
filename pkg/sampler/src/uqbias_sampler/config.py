"""Sampler configuration: JSON config file with flag overrides."""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any


@dataclass(frozen=True)
class SamplerConfig:
    translation_model: str = "lexical-nmt"
    nli_model: str = "overlap-nli"
    embedding_model: str = "hash-encoder"
    qe_model: str = "overlap-qe"
    backend: str = "offline"  # "offline" | "hf"
    epsilon: float = 0.02
    num_samples: int = 128
    seed: int = 0
    batch_size: int = 16
    device: str = "cpu"
    language: str = "es"
    embedding_dim: int = 32

    def __post_init__(self):
        if self.num_samples < 1:
            raise ValueError(f"num_samples must be >= 1, got {self.num_samples}")
        if not (0.0 < self.epsilon < 1.0):
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if self.backend not in ("offline", "hf"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.embedding_dim < 2:
            raise ValueError("embedding_dim must be >= 2")

    @property
    def model_id(self) -> str:
        """Identifier used in file names and headers."""
        return self.translation_model.replace("/", "-")

    @classmethod
    def load(cls, path: str | Path | None = None, **overrides: Any) -> "SamplerConfig":
        values: dict[str, Any] = {}
        if path is not None:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
            known = {f.name for f in fields(cls)}
            unknown = set(raw) - known
            if unknown:
                raise ValueError(f"unknown config keys: {sorted(unknown)}")
            values.update(raw)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    def with_overrides(self, **overrides: Any) -> "SamplerConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})
