"""Shared fixtures: a small synthetic corpus exercising every file format."""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np
import pytest

from uqbias.bias import build_contrast_sets
from uqbias.dataset import (
    FORMAT_VERSION,
    CorpusManifest,
    SamplesHeader,
    dump_json,
    write_embedding_sidecar,
    write_entailment,
    write_instances,
    write_sample_sets,
    write_scores,
)
from uqbias.types import (
    CueAnnotations,
    EntailmentMatrix,
    Gender,
    Instance,
    RoleCue,
    Sample,
    SampleSet,
    SamplingMeta,
    ScoreRecord,
)

MODELS = ("nmt-a", "nmt-b")
LANGUAGES = ("es", "uk")
NUM_SAMPLES = 8
EMBED_DIM = 6

_PRONOUNS = {Gender.MASCULINE: "he", Gender.FEMININE: "she", Gender.NEUTRAL: "they"}
_OBJ_PRONOUNS = {Gender.MASCULINE: "him", Gender.FEMININE: "her", Gender.NEUTRAL: "them"}


def build_fixture_instances() -> list[Instance]:
    instances: list[Instance] = []

    def add(instance_id, text, noun, pronoun, stereotype, cues, key):
        start = text.index(noun)
        instances.append(
            Instance(
                instance_id=instance_id,
                source_text=text,
                focus_noun=noun,
                focus_span=(start, start + len(noun)),
                pronoun_gender=pronoun,
                stereotype_gender=stereotype,
                cues=cues,
                contrast_key=key,
                ambiguous=pronoun is Gender.NEUTRAL,
                gold_gender=None if pronoun is Gender.NEUTRAL else pronoun,
            )
        )

    for gender in (Gender.MASCULINE, Gender.FEMININE, Gender.NEUTRAL):
        pron = _PRONOUNS[gender]
        add(
            f"plumber-{pron}",
            f"The plumber phoned to explain that {pron} had repaired the sink .",
            "plumber",
            gender,
            Gender.MASCULINE,
            CueAnnotations(
                subject=gender,
                stereotype_role=RoleCue.SUBJ_M,
            ),
            "grp-plumber",
        )
        ic = {Gender.MASCULINE: RoleCue.SUBJ_M, Gender.FEMININE: RoleCue.SUBJ_F,
              Gender.NEUTRAL: RoleCue.NONE}[gender]
        add(
            f"nurse-{pron}",
            f"The nurse thanked the driver because {pron} appreciated the ride .",
            "nurse",
            gender,
            Gender.FEMININE,
            CueAnnotations(
                recency=Gender.MASCULINE,
                ic_role=ic,
                stereotype_role=RoleCue.SUBJ_F,
                subject=gender,
            ),
            "grp-nurse",
        )
        obj = _OBJ_PRONOUNS[gender]
        add(
            f"developer-{obj}",
            f"The developer met the designer and praised {obj} for the layout .",
            "developer",
            gender,
            Gender.MASCULINE,
            CueAnnotations(
                recency=Gender.FEMININE,
                stereotype_role=RoleCue.OBJ_M,
            ),
            "grp-developer",
        )
    return instances


_NOUN_FORMS = {
    "es": {
        "plumber": ("el fontanero", "la fontanera"),
        "nurse": ("el enfermero", "la enfermera"),
        "developer": ("el desarrollador", "la desarrolladora"),
    },
    "uk": {
        "plumber": ("сантехнік", "сантехніца"),
        "nurse": ("медбрат", "медсестра"),
        "developer": ("розробник", "розробниця"),
    },
}

_GENDER_BASES = {
    Gender.MASCULINE: 0,
    Gender.FEMININE: 1,
    Gender.UNKNOWN: 2,
}


def build_sample_set(instance: Instance, model: str, lang: str, seed: int = 7) -> SampleSet:
    stable_id = int.from_bytes(hashlib.sha1(instance.instance_id.encode()).digest()[:4], "little")
    rng = np.random.default_rng([seed, MODELS.index(model), LANGUAGES.index(lang), stable_id])
    p_feminine = {Gender.MASCULINE: 0.15, Gender.FEMININE: 0.65, Gender.NEUTRAL: 0.35}[
        instance.pronoun_gender
    ]
    masc, fem = _NOUN_FORMS[lang][instance.focus_noun]
    bases = np.eye(EMBED_DIM)

    samples = []
    genders = []
    for _ in range(NUM_SAMPLES):
        if rng.random() < 0.08:
            gender = Gender.UNKNOWN
        else:
            gender = Gender.FEMININE if rng.random() < p_feminine else Gender.MASCULINE
        variant = int(rng.integers(0, 2))
        noun = fem if gender is Gender.FEMININE else masc
        text = f"{noun} terminó el trabajo v{variant}" if lang == "es" else f"{noun} закінчив роботу v{variant}"
        embedding = bases[_GENDER_BASES[gender]] + 0.08 * rng.normal(size=EMBED_DIM)
        samples.append(
            Sample(
                text=text,
                log_prob=-(8.0 + float(rng.exponential(2.0))),
                gender_label=gender,
                embedding=embedding,
            )
        )
        genders.append(gender)

    scores = np.empty((NUM_SAMPLES, NUM_SAMPLES))
    for i in range(NUM_SAMPLES):
        for j in range(NUM_SAMPLES):
            if i == j:
                scores[i, j] = 1.0
            elif genders[i] is genders[j]:
                scores[i, j] = 0.9 if samples[i].text == samples[j].text else 0.75
            else:
                scores[i, j] = 0.08
    return SampleSet(
        instance_id=instance.instance_id,
        model_id=model,
        language=lang,
        samples=samples,
        sampling_meta=SamplingMeta(num_samples=NUM_SAMPLES, epsilon=0.02, seed=seed),
        entailment=EntailmentMatrix(scores),
    )


def build_score_records(instances: list[Instance], seed: int = 7) -> list[ScoreRecord]:
    records = []
    for model in MODELS:
        base = {"nmt-a": 82.0, "nmt-b": 64.0}[model]
        accuracy = {"nmt-a": 0.8, "nmt-b": 0.55}[model]
        for lang in LANGUAGES:
            for idx, instance in enumerate(instances):
                rng = np.random.default_rng([seed + 1, MODELS.index(model), LANGUAGES.index(lang), idx])
                if instance.ambiguous:
                    comet = [
                        ("ref-f", min(100.0, base + float(rng.uniform(-6, 6)))),
                        ("ref-m", min(100.0, base + float(rng.uniform(-6, 6)))),
                    ]
                    prediction = None
                else:
                    comet = [("ref-gold", min(100.0, base + float(rng.uniform(-6, 6))))]
                    correct = rng.random() < accuracy
                    opposite = (
                        Gender.FEMININE
                        if instance.gold_gender is Gender.MASCULINE
                        else Gender.MASCULINE
                    )
                    prediction = instance.gold_gender if correct else opposite
                records.append(
                    ScoreRecord(
                        instance_id=instance.instance_id,
                        model_id=model,
                        language=lang,
                        comet_scores=comet,
                        prediction_gender=prediction,
                    )
                )
    return records


def write_fixture_corpus(root: Path, seed: int = 7) -> Path:
    """Write a complete corpus under root; returns the manifest path.

    The es samples carry inline embeddings; the uk samples reference a
    float32 sidecar, so both embedding paths get exercised.
    """
    root.mkdir(parents=True, exist_ok=True)
    instances = build_fixture_instances()
    build_contrast_sets(instances)  # sanity: fixture must group cleanly
    write_instances(root / "instances.jsonl", instances)

    samples_paths = {}
    embeddings_paths = {}
    entailment_paths = {}
    for model in MODELS:
        for lang in LANGUAGES:
            sets = [build_sample_set(i, model, lang, seed) for i in instances]
            samples_name = f"samples.{model}.{lang}.jsonl"
            header = SamplesHeader(
                format_version=FORMAT_VERSION,
                model_id=model,
                language=lang,
                sampling=SamplingMeta(num_samples=NUM_SAMPLES, epsilon=0.02, seed=seed),
            )
            inline = lang == "es"
            write_sample_sets(root / samples_name, header, sets, inline_embeddings=inline)
            samples_paths[(model, lang)] = Path(samples_name)
            if not inline:
                sidecar_name = f"embeddings.{model}.{lang}.f32"
                rows = np.vstack([s.embedding for ss in sets for s in ss.samples])
                write_embedding_sidecar(root / sidecar_name, rows)
                embeddings_paths[(model, lang)] = Path(sidecar_name)
            entailment_name = f"entailment.{model}.{lang}.jsonl"
            write_entailment(root / entailment_name, {ss.instance_id: ss.entailment for ss in sets})
            entailment_paths[(model, lang)] = Path(entailment_name)

    write_scores(root / "scores.jsonl", build_score_records(instances, seed))

    manifest = CorpusManifest(
        dataset_name="fixture",
        format_version=FORMAT_VERSION,
        languages=list(LANGUAGES),
        models=list(MODELS),
        instances_path=Path("instances.jsonl"),
        samples_paths=samples_paths,
        embeddings_paths=embeddings_paths,
        entailment_paths=entailment_paths,
        scores_path=Path("scores.jsonl"),
        root=root,
    )
    manifest_path = root / "manifest.json"
    dump_json(manifest_path, manifest.to_json())
    return manifest_path


def make_synthetic_population(n_pairs=200, names_shift=0.30, sigma=0.05, seed=123, language="es"):
    """Paired synthetic corpus for planted-effect recovery: each base index
    yields one named and one unnamed instance with otherwise identical cue
    levels, so every other cue is exactly balanced with respect to the
    names flag and only the names coefficient carries the planted shift.
    """
    from uqbias.types import MethodMetrics, MetricRecord, RoleCue

    rng = np.random.default_rng(seed)
    recency_levels = [Gender.MASCULINE, Gender.FEMININE, Gender.NEUTRAL]
    role_levels = [RoleCue.SUBJ_F, RoleCue.SUBJ_M, RoleCue.OBJ_F, RoleCue.OBJ_M, RoleCue.NONE]

    instances = {}
    records = []
    for base in range(n_pairs):
        recency = recency_levels[base % 3]
        ic = role_levels[(base // 3) % 5]
        stereotype = role_levels[(base // 2) % 5]
        subject = recency_levels[(base // 5) % 3]
        pronoun = recency_levels[(base // 7) % 3]
        for named in (False, True):
            instance_id = f"s{base}-{'n' if named else 'p'}"
            text = f"The broker s{base} spoke before xyz left ."
            instances[instance_id] = Instance(
                instance_id=instance_id,
                source_text=text,
                focus_noun="broker",
                focus_span=(4, 10),
                pronoun_gender=pronoun,
                stereotype_gender=Gender.MASCULINE,
                cues=CueAnnotations(
                    recency=recency,
                    ic_role=ic,
                    stereotype_role=stereotype,
                    subject=subject,
                    names_present=named,
                ),
                contrast_key=f"grp{base}",
                ambiguous=pronoun is Gender.NEUTRAL,
                gold_gender=None if pronoun is Gender.NEUTRAL else pronoun,
            )
            value = float(rng.normal(loc=1.0, scale=sigma)) + (names_shift if named else 0.0)
            records.append(
                MetricRecord(
                    instance_id=instance_id,
                    model_id="toy",
                    language=language,
                    methods={"s3e": MethodMetrics(entropy=max(value, 0.0), norm_entropy=value)},
                )
            )
    return records, instances


@pytest.fixture(scope="session")
def fixture_corpus(tmp_path_factory) -> Path:
    """Manifest path of a session-wide read-only fixture corpus."""
    root = tmp_path_factory.mktemp("corpus")
    return write_fixture_corpus(root)


@pytest.fixture()
def corpus_factory(tmp_path):
    """Factory building a fresh, mutable fixture corpus per test."""
    counter = 0

    def build(seed: int = 7) -> Path:
        nonlocal counter
        counter += 1
        return write_fixture_corpus(tmp_path / f"corpus{counter}", seed)

    return build


@pytest.fixture()
def make_sample_set():
    """Factory for ad-hoc sample sets in unit tests."""

    def build(
        genders,
        log_probs=None,
        embeddings=None,
        entailment=None,
        instance_id="inst",
    ) -> SampleSet:
        n = len(genders)
        log_probs = log_probs if log_probs is not None else [-1.0] * n
        samples = [
            Sample(
                text=f"sample {i}",
                log_prob=float(log_probs[i]),
                gender_label=genders[i],
                embedding=None if embeddings is None else np.asarray(embeddings[i], dtype=float),
            )
            for i in range(n)
        ]
        return SampleSet(
            instance_id=instance_id,
            model_id="test-model",
            language="es",
            samples=samples,
            entailment=None if entailment is None else EntailmentMatrix(np.asarray(entailment, dtype=float)),
        )

    return build
