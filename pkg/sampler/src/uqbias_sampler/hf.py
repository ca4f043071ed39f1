"""Model-backed backend: transformers translation with epsilon sampling,
sentence-transformers embeddings, and cross-encoder NLI entailment.

Everything loads lazily so the package works without torch installed.
Quality scoring falls back to the offline overlap proxy unless a COMET
package is available, and gender tagging stays lexicon-based unless a
morphological tagger backend is wired in. Model downloads are required for
this backend; the offline backend covers air-gapped runs and tests.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .backends import Draw, LexiconGenderTagger, OverlapQuality
from .config import SamplerConfig
from .instances import SourceInstance

logger = logging.getLogger(__name__)


class HFTranslator:
    """Seq2seq sampling via `generate(..., epsilon_cutoff=...)`.

    Sequence log-probabilities are accumulated from the per-step transition
    scores of the sampled ids, i.e. the model's own log p(y|x).
    """

    def __init__(self, config: SamplerConfig):
        self.config = config
        self._model = None
        self._tokenizer = None

    def _load(self):
        if self._model is None:
            import torch
            from transformers import AutoModelForSeq2SeqLM, AutoTokenizer

            self._torch = torch
            self._tokenizer = AutoTokenizer.from_pretrained(self.config.translation_model)
            self._model = AutoModelForSeq2SeqLM.from_pretrained(self.config.translation_model)
            self._model.to(self.config.device)
            self._model.eval()

    def _generate(self, text: str, num_return: int, do_sample: bool, seed: int) -> list[Draw]:
        self._load()
        torch = self._torch
        torch.manual_seed(seed)
        inputs = self._tokenizer(text, return_tensors="pt").to(self.config.device)
        with torch.no_grad():
            output = self._model.generate(
                **inputs,
                do_sample=do_sample,
                epsilon_cutoff=self.config.epsilon if do_sample else None,
                num_return_sequences=num_return,
                max_new_tokens=128,
                output_scores=True,
                return_dict_in_generate=True,
            )
        transition = self._model.compute_transition_scores(
            output.sequences, output.scores, normalize_logits=True
        )
        draws = []
        for sequence, scores in zip(output.sequences, transition):
            text_out = self._tokenizer.decode(sequence, skip_special_tokens=True)
            mask = ~scores.isinf()
            log_prob = float(scores[mask].sum())
            draws.append(Draw(text=text_out, log_prob=min(log_prob, 0.0)))
        return draws

    def sample_many(self, instance: SourceInstance, seed: int) -> list[Draw]:
        draws: list[Draw] = []
        remaining = self.config.num_samples
        batch = max(1, self.config.batch_size)
        offset = 0
        while remaining > 0:
            take = min(batch, remaining)
            draws.extend(
                self._generate(
                    instance.source_text, take, do_sample=True,
                    seed=seed * 1_000_003 + hash(instance.instance_id) % 65_536 + offset,
                )
            )
            remaining -= take
            offset += 1
        return draws

    def greedy(self, instance: SourceInstance) -> Draw:
        (draw,) = self._generate(instance.source_text, 1, do_sample=False, seed=0)
        return draw


class SentenceEncoder:
    def __init__(self, config: SamplerConfig):
        self.config = config
        self._model = None

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        if self._model is None:
            from sentence_transformers import SentenceTransformer

            self._model = SentenceTransformer(self.config.embedding_model, device=self.config.device)
        return np.asarray(
            self._model.encode(list(texts), normalize_embeddings=True, show_progress_bar=False),
            dtype=float,
        )


class CrossEncoderEntailment:
    """Pairwise P(premise entails hypothesis) from an NLI cross-encoder."""

    def __init__(self, config: SamplerConfig):
        self.config = config
        self._model = None
        self._tokenizer = None
        self._entail_index = None

    def _load(self):
        if self._model is None:
            import torch
            from transformers import AutoModelForSequenceClassification, AutoTokenizer

            self._torch = torch
            self._tokenizer = AutoTokenizer.from_pretrained(self.config.nli_model)
            self._model = AutoModelForSequenceClassification.from_pretrained(self.config.nli_model)
            self._model.to(self.config.device)
            self._model.eval()
            labels = {v.lower(): k for k, v in self._model.config.id2label.items()}
            self._entail_index = labels.get("entailment", 0)

    def pairwise(self, texts: Sequence[str]) -> np.ndarray:
        self._load()
        torch = self._torch
        n = len(texts)
        scores = np.eye(n)
        pairs = [(i, j) for i in range(n) for j in range(n) if i != j]
        for start in range(0, len(pairs), self.config.batch_size):
            chunk = pairs[start : start + self.config.batch_size]
            encoded = self._tokenizer(
                [texts[i] for i, _ in chunk],
                [texts[j] for _, j in chunk],
                return_tensors="pt",
                padding=True,
                truncation=True,
            ).to(self.config.device)
            with torch.no_grad():
                probs = torch.softmax(self._model(**encoded).logits, dim=-1)
            for (i, j), row in zip(chunk, probs):
                scores[i, j] = float(row[self._entail_index])
        np.fill_diagonal(scores, 1.0)
        return scores


@dataclass
class HFBackend:
    translator: HFTranslator
    encoder: SentenceEncoder
    entailment: CrossEncoderEntailment
    tagger: LexiconGenderTagger
    scorer: OverlapQuality

    @classmethod
    def from_config(cls, config: SamplerConfig) -> "HFBackend":
        logger.info(
            "hf backend: translation=%s nli=%s embeddings=%s",
            config.translation_model, config.nli_model, config.embedding_model,
        )
        return cls(
            translator=HFTranslator(config),
            encoder=SentenceEncoder(config),
            entailment=CrossEncoderEntailment(config),
            tagger=LexiconGenderTagger(config.language),
            scorer=OverlapQuality(),
        )
