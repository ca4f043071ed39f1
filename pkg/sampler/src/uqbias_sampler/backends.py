"""Deterministic offline backend.

A miniature lexical translation model with a real epsilon-sampling loop,
hash-seeded sentence embeddings, token-overlap entailment, a lexicon-based
morphological gender tagger, and an overlap-based quality proxy. Everything
is a pure function of (inputs, seed), which is what makes seeded reruns
byte-reproducible. Heavyweight model-backed equivalents live in `hf.py`.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .config import SamplerConfig
from .epsilon import epsilon_sample, greedy_choice
from .instances import SourceInstance

_TOKEN_RE = re.compile(r"\w+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    return [t.lower() for t in _TOKEN_RE.findall(text)]


def _stable_seed(*parts: str | int) -> list[int]:
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode("utf-8")).digest()
    return [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]


# Gendered noun-phrase lexicon: English profession -> (masculine, feminine).
PROFESSION_LEXICON: dict[str, dict[str, tuple[str, str]]] = {
    "es": {
        "mechanic": ("el mecánico", "la mecánica"),
        "plumber": ("el fontanero", "la fontanera"),
        "nurse": ("el enfermero", "la enfermera"),
        "developer": ("el desarrollador", "la desarrolladora"),
        "teacher": ("el profesor", "la profesora"),
        "baker": ("el panadero", "la panadera"),
        "clerk": ("el secretario", "la secretaria"),
        "writer": ("el escritor", "la escritora"),
    },
    "fr": {
        "mechanic": ("le mécanicien", "la mécanicienne"),
        "plumber": ("le plombier", "la plombière"),
        "nurse": ("l'infirmier", "l'infirmière"),
        "developer": ("le développeur", "la développeuse"),
        "teacher": ("le professeur", "la professeure"),
        "baker": ("le boulanger", "la boulangère"),
        "clerk": ("le secrétaire", "la secrétaire"),
        "writer": ("l'écrivain", "l'écrivaine"),
    },
    "uk": {
        "mechanic": ("механік", "механікиня"),
        "plumber": ("сантехнік", "сантехніца"),
        "nurse": ("медбрат", "медсестра"),
        "developer": ("розробник", "розробниця"),
        "teacher": ("вчитель", "вчителька"),
        "baker": ("пекар", "пекарка"),
        "clerk": ("секретар", "секретарка"),
        "writer": ("письменник", "письменниця"),
    },
    "ru": {
        "mechanic": ("механик", "механикесса"),
        "plumber": ("сантехник", "сантехница"),
        "nurse": ("медбрат", "медсестра"),
        "developer": ("разработчик", "разработчица"),
        "teacher": ("учитель", "учительница"),
        "baker": ("пекарь", "пекарша"),
        "clerk": ("секретарь", "секретарша"),
        "writer": ("писатель", "писательница"),
    },
}

# Verb-phrase alternatives per language with model probabilities; the
# sampler draws one under epsilon truncation.
_VERB_PHRASES: dict[str, tuple[tuple[str, ...], tuple[float, ...]]] = {
    "es": (("terminó el trabajo", "completó la tarea", "acabó el encargo"), (0.72, 0.25, 0.03)),
    "fr": (("a terminé le travail", "a fini la tâche", "a achevé la mission"), (0.72, 0.25, 0.03)),
    "uk": (("закінчив роботу", "завершив завдання", "виконав доручення"), (0.72, 0.25, 0.03)),
    "ru": (("закончил работу", "завершил задание", "выполнил поручение"), (0.72, 0.25, 0.03)),
}

# P(feminine noun form) by disambiguating pronoun, nudged by the stereotype.
_BASE_P_FEMININE = {"masculine": 0.10, "feminine": 0.68, "neutral": 0.38}
_STEREOTYPE_NUDGE = {"masculine": -0.06, "feminine": 0.06, "neutral": 0.0}


@dataclass
class Draw:
    text: str
    log_prob: float


class LexicalTranslator:
    """Toy NMT: gendered noun phrase + sampled verb phrase, scored per token.

    The generation factorizes into two epsilon-sampled decisions (noun-form
    gender, verb phrase); the sequence log-probability is their sum under
    the untruncated model distribution.
    """

    def __init__(self, config: SamplerConfig):
        self.config = config
        lexicon = PROFESSION_LEXICON.get(config.language)
        if lexicon is None:
            raise ValueError(f"no lexicon for language {config.language!r}")
        self.lexicon = lexicon
        self.verbs, self.verb_probs = _VERB_PHRASES[config.language]

    def _noun_distribution(self, instance: SourceInstance) -> tuple[list[str], list[float]]:
        forms = self.lexicon.get(instance.focus_noun.lower())
        if forms is None:
            # Out-of-lexicon noun: copy the source token, gender unresolved.
            return [instance.focus_noun], [1.0]
        p_fem = _BASE_P_FEMININE[instance.pronoun_gender] + _STEREOTYPE_NUDGE[instance.stereotype_gender]
        p_fem = min(max(p_fem, 0.02), 0.98)
        return [forms[0], forms[1]], [1.0 - p_fem, p_fem]

    def _compose(self, noun_phrase: str, verb_phrase: str) -> str:
        return f"{noun_phrase} {verb_phrase}"

    def sample(self, instance: SourceInstance, rng: np.random.Generator) -> Draw:
        nouns, noun_probs = self._noun_distribution(instance)
        noun, noun_lp = epsilon_sample(nouns, noun_probs, self.config.epsilon, rng)
        verb, verb_lp = epsilon_sample(list(self.verbs), list(self.verb_probs), self.config.epsilon, rng)
        return Draw(text=self._compose(noun, verb), log_prob=noun_lp + verb_lp)

    def greedy(self, instance: SourceInstance) -> Draw:
        nouns, noun_probs = self._noun_distribution(instance)
        noun, noun_lp = greedy_choice(nouns, noun_probs)
        verb, verb_lp = greedy_choice(list(self.verbs), list(self.verb_probs))
        return Draw(text=self._compose(noun, verb), log_prob=noun_lp + verb_lp)

    def sample_many(self, instance: SourceInstance, seed: int) -> list[Draw]:
        rng = np.random.default_rng(_stable_seed(seed, instance.instance_id, self.config.language))
        return [self.sample(instance, rng) for _ in range(self.config.num_samples)]


class HashEncoder:
    """Deterministic sentence embeddings: seeded unit vector per token,
    mean-pooled and L2-normalized. Identical texts get identical rows.
    """

    def __init__(self, dim: int = 32):
        self.dim = dim
        self._cache: dict[str, np.ndarray] = {}

    def _token_vector(self, token: str) -> np.ndarray:
        vector = self._cache.get(token)
        if vector is None:
            rng = np.random.default_rng(_stable_seed("token", token))
            vector = rng.normal(size=self.dim)
            vector /= np.linalg.norm(vector)
            self._cache[token] = vector
        return vector

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        rows = np.empty((len(texts), self.dim))
        for i, text in enumerate(texts):
            tokens = tokenize(text) or [""]
            pooled = np.mean([self._token_vector(t) for t in tokens], axis=0)
            norm = float(np.linalg.norm(pooled))
            rows[i] = pooled / norm if norm > 0 else self._token_vector("")
        return rows


class OverlapEntailment:
    """Entailment probability as hypothesis-token coverage by the premise.

    scores[i][j] estimates P(sample i entails sample j); the diagonal is
    exactly 1. Paraphrases with shared vocabulary score high in both
    directions, unrelated sentences score near zero.
    """

    def pairwise(self, texts: Sequence[str]) -> np.ndarray:
        token_sets = [set(tokenize(t)) for t in texts]
        n = len(texts)
        scores = np.empty((n, n))
        for i in range(n):
            for j in range(n):
                if i == j or texts[i] == texts[j]:
                    scores[i, j] = 1.0
                elif token_sets[j]:
                    scores[i, j] = len(token_sets[i] & token_sets[j]) / len(token_sets[j])
                else:
                    scores[i, j] = 0.0
        np.fill_diagonal(scores, 1.0)
        return scores


class LexiconGenderTagger:
    """Morphological gender of the translated focus noun, by lexicon lookup.

    Matches the gendered noun-phrase forms of the focus noun in the
    translation. Anything unmatched degrades to "unknown"; the tagger never
    guesses.
    """

    def __init__(self, language: str):
        lexicon = PROFESSION_LEXICON.get(language)
        if lexicon is None:
            raise ValueError(f"no lexicon for language {language!r}")
        self.lexicon = lexicon

    def tag(self, focus_noun: str, translation: str) -> str:
        forms = self.lexicon.get(focus_noun.lower())
        if forms is None:
            return "unknown"
        masculine, feminine = forms
        text = translation.lower()
        if feminine.lower() in text:
            return "feminine"
        if masculine.lower() in text:
            return "masculine"
        return "unknown"


class OverlapQuality:
    """Reference-based quality proxy on a 0..100 scale: token-level F1."""

    def score(self, hypothesis: str, reference: str) -> float:
        hyp = tokenize(hypothesis)
        ref = tokenize(reference)
        if not hyp or not ref:
            return 0.0
        overlap = 0
        remaining = list(ref)
        for token in hyp:
            if token in remaining:
                overlap += 1
                remaining.remove(token)
        if overlap == 0:
            return 0.0
        precision = overlap / len(hyp)
        recall = overlap / len(ref)
        return 100.0 * 2 * precision * recall / (precision + recall)


@dataclass
class OfflineBackend:
    """Bundle of the deterministic components behind one constructor."""

    translator: LexicalTranslator
    encoder: HashEncoder
    entailment: OverlapEntailment
    tagger: LexiconGenderTagger
    scorer: OverlapQuality

    @classmethod
    def from_config(cls, config: SamplerConfig) -> "OfflineBackend":
        return cls(
            translator=LexicalTranslator(config),
            encoder=HashEncoder(dim=config.embedding_dim),
            entailment=OverlapEntailment(),
            tagger=LexiconGenderTagger(config.language),
            scorer=OverlapQuality(),
        )
