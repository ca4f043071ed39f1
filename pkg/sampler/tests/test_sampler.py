"""Sampler tests: component behaviour plus the corpus contract.

The contract test shells out to the engine's `validate` command, which is
the only way the sampler ever touches the engine.
"""

import json
import shutil
import subprocess
import sys
from collections import Counter

import numpy as np
import pytest

from uqbias_sampler.backends import (
    HashEncoder,
    LexicalTranslator,
    LexiconGenderTagger,
    OverlapEntailment,
    OverlapQuality,
)
from uqbias_sampler.config import SamplerConfig
from uqbias_sampler.epsilon import epsilon_sample, greedy_choice
from uqbias_sampler.instances import load_source_instances
from uqbias_sampler.run import run_all


def engine_command(*args) -> list[str]:
    """Invocation of the engine CLI: console script, else module form."""
    exe = shutil.which("uqbias")
    if exe:
        return [exe, *args]
    return [sys.executable, "-m", "uqbias.cli", *args]


class TestEpsilonSampling:
    def test_truncated_tokens_never_drawn(self):
        rng = np.random.default_rng(0)
        drawn = {
            epsilon_sample(["a", "b", "c"], [0.55, 0.44, 0.01], epsilon=0.02, rng=rng)[0]
            for _ in range(300)
        }
        assert "c" not in drawn
        assert drawn == {"a", "b"}

    def test_log_prob_is_untruncated_model_prob(self):
        rng = np.random.default_rng(1)
        token, log_prob = epsilon_sample(["a", "b"], [0.75, 0.25], epsilon=0.5, rng=rng)
        assert token == "a"  # b is truncated away
        assert log_prob == pytest.approx(np.log(0.75))

    def test_all_below_epsilon_keeps_argmax(self):
        rng = np.random.default_rng(2)
        token, _ = epsilon_sample(["a", "b", "c", "d"], [0.4, 0.3, 0.2, 0.1], epsilon=0.9, rng=rng)
        assert token == "a"

    def test_rejects_unnormalized(self):
        rng = np.random.default_rng(3)
        with pytest.raises(ValueError):
            epsilon_sample(["a", "b"], [0.6, 0.6], epsilon=0.1, rng=rng)

    def test_greedy_choice(self):
        token, log_prob = greedy_choice(["x", "y"], [0.3, 0.7])
        assert token == "y"
        assert log_prob == pytest.approx(np.log(0.7))


class TestLexicalTranslator:
    def _translator(self, **overrides):
        options = {"language": "es", "num_samples": 8}
        options.update(overrides)
        return LexicalTranslator(SamplerConfig(**options))

    def test_single_sample_log_prob_nonpositive(self, instances_file):
        instance = load_source_instances(instances_file)[0]
        translator = self._translator(num_samples=1)
        (draw,) = translator.sample_many(instance, seed=5)
        assert draw.log_prob <= 0.0
        assert draw.text

    def test_seeded_reruns_identical(self, instances_file):
        instance = load_source_instances(instances_file)[0]
        translator = self._translator()
        first = [d.text for d in translator.sample_many(instance, seed=5)]
        second = [d.text for d in translator.sample_many(instance, seed=5)]
        assert first == second
        different = [d.text for d in translator.sample_many(instance, seed=6)]
        assert first != different  # 8 draws over >= 6 outcomes collide with ~0 probability

    def test_feminine_pronoun_raises_feminine_rate(self, instances_file):
        instances = {i.instance_id: i for i in load_source_instances(instances_file)}
        translator = self._translator(num_samples=200)
        tagger = LexiconGenderTagger("es")

        def feminine_rate(instance_id):
            draws = translator.sample_many(instances[instance_id], seed=1)
            tags = Counter(tagger.tag(instances[instance_id].focus_noun, d.text) for d in draws)
            return tags["feminine"] / 200

        assert feminine_rate("plumber-she") > feminine_rate("plumber-they") > feminine_rate("plumber-he")

    def test_greedy_is_argmax_not_sampled(self, instances_file):
        instance = load_source_instances(instances_file)[0]  # masculine pronoun
        translator = self._translator()
        greedy = translator.greedy(instance)
        assert greedy.text.startswith("el fontanero")

    def test_unknown_noun_copied_through(self):
        translator = self._translator(num_samples=1)
        import uqbias_sampler.instances as inst

        instance = inst.SourceInstance(
            instance_id="x", source_text="The astronaut waved because he left .",
            focus_noun="astronaut", pronoun_gender="masculine",
            stereotype_gender="masculine", ambiguous=False, gold_gender="masculine", raw={},
        )
        (draw,) = translator.sample_many(instance, seed=0)
        assert "astronaut" in draw.text


class TestEncoderEntailmentTaggerScorer:
    def test_duplicate_texts_identical_rows(self):
        encoder = HashEncoder(dim=16)
        rows = encoder.encode(["la fontanera terminó", "otro texto", "la fontanera terminó"])
        np.testing.assert_array_equal(rows[0], rows[2])
        assert np.linalg.norm(rows, axis=1) == pytest.approx([1.0, 1.0, 1.0])

    def test_entailment_contract(self):
        scores = OverlapEntailment().pairwise(["a b c", "a b", "x y z"])
        assert np.all(np.diagonal(scores) == 1.0)
        assert np.all((scores >= 0.0) & (scores <= 1.0))

    def test_paraphrases_beat_unrelated(self):
        texts = [
            "la fontanera terminó el trabajo",
            "la fontanera completó el trabajo",
            "el navegante observó las estrellas",
        ]
        scores = OverlapEntailment().pairwise(texts)
        paraphrase = min(scores[0, 1], scores[1, 0])
        unrelated = max(scores[0, 2], scores[2, 0])
        assert paraphrase > unrelated

    def test_tagger_feminine_spanish(self):
        tagger = LexiconGenderTagger("es")
        assert tagger.tag("mechanic", "La mecánica terminó el trabajo") == "feminine"
        assert tagger.tag("mechanic", "El mecánico terminó el trabajo") == "masculine"

    def test_tagger_never_guesses(self):
        tagger = LexiconGenderTagger("es")
        assert tagger.tag("mechanic", "zzz qqq blorp") == "unknown"
        assert tagger.tag("astronaut", "el astronauta llegó") == "unknown"

    def test_tagger_prefix_forms_resolved_correctly(self):
        # uk masculine form is a prefix of the feminine form
        tagger = LexiconGenderTagger("uk")
        assert tagger.tag("mechanic", "механікиня закінчила роботу") == "feminine"
        assert tagger.tag("mechanic", "механік закінчив роботу") == "masculine"

    def test_quality_proxy_range_and_order(self):
        scorer = OverlapQuality()
        perfect = scorer.score("la fontanera terminó el trabajo", "la fontanera terminó el trabajo")
        partial = scorer.score("la fontanera completó la tarea", "la fontanera terminó el trabajo")
        zero = scorer.score("qqq zzz", "la fontanera terminó el trabajo")
        assert perfect == 100.0
        assert 0.0 < partial < perfect
        assert zero == 0.0


class TestConfig:
    def test_defaults(self):
        config = SamplerConfig()
        assert config.num_samples == 128
        assert config.epsilon == 0.02

    def test_bounds(self):
        with pytest.raises(ValueError):
            SamplerConfig(epsilon=0.0)
        with pytest.raises(ValueError):
            SamplerConfig(num_samples=0)
        with pytest.raises(ValueError):
            SamplerConfig(backend="quantum")

    def test_file_plus_overrides(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"language": "uk", "num_samples": 4}))
        config = SamplerConfig.load(path, seed=9, language=None)
        assert (config.language, config.num_samples, config.seed) == ("uk", 4, 9)

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(json.dumps({"temperature": 1.0}))
        with pytest.raises(ValueError):
            SamplerConfig.load(path)


def _run_fixture(instances_file, references_file, out_dir, seed=0):
    config = SamplerConfig(language="es", num_samples=8, seed=seed, embedding_dim=16)
    return run_all(instances_file, out_dir, config, references_file)


class TestSamplerContract:
    """Exit criterion: 5 fixture instances, 8 samples each."""

    def test_emitted_corpus_passes_engine_validation(self, instances_file, references_file, tmp_path):
        paths = _run_fixture(instances_file, references_file, tmp_path / "corpus")
        result = subprocess.run(
            engine_command("validate", "--manifest", str(paths.manifest), "--strict"),
            capture_output=True,
            text=True,
        )
        assert result.returncode == 0, f"stdout={result.stdout}\nstderr={result.stderr}"
        assert "0 error(s), 0 warning(s)" in result.stdout

    def test_seeded_reruns_produce_identical_sample_texts(self, instances_file, references_file, tmp_path):
        first = _run_fixture(instances_file, references_file, tmp_path / "one", seed=3)
        second = _run_fixture(instances_file, references_file, tmp_path / "two", seed=3)
        texts_first = [
            json.loads(line)["text"]
            for line in first.samples.read_text(encoding="utf-8").splitlines()[1:]
        ]
        texts_second = [
            json.loads(line)["text"]
            for line in second.samples.read_text(encoding="utf-8").splitlines()[1:]
        ]
        assert texts_first == texts_second
        assert first.samples.read_bytes() == second.samples.read_bytes()

    def test_entailment_matrices_have_unit_diagonals(self, instances_file, references_file, tmp_path):
        paths = _run_fixture(instances_file, references_file, tmp_path / "corpus")
        rows = [
            json.loads(line)
            for line in paths.entailment.read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]
        assert len(rows) == 5
        for row in rows:
            matrix = np.asarray(row["scores"], dtype=float)
            assert matrix.shape == (8, 8)
            assert np.all(np.diagonal(matrix) == 1.0)

    def test_samples_file_shape(self, instances_file, references_file, tmp_path):
        paths = _run_fixture(instances_file, references_file, tmp_path / "corpus")
        lines = paths.samples.read_text(encoding="utf-8").splitlines()
        header = json.loads(lines[0])
        assert header["kind"] == "samples_header"
        assert header["sampling"] == {"num_samples": 8, "epsilon": 0.02, "seed": 0}
        body = [json.loads(line) for line in lines[1:]]
        assert len(body) == 5 * 8
        per_instance = Counter(row["instance_id"] for row in body)
        assert set(per_instance.values()) == {8}
        assert all(row["log_prob"] <= 0.0 for row in body)
        assert all(row["gender"] in {"masculine", "feminine", "neutral", "unknown"} for row in body)

    def test_embedding_sidecar_row_alignment(self, instances_file, references_file, tmp_path):
        paths = _run_fixture(instances_file, references_file, tmp_path / "corpus")
        data = paths.embeddings.read_bytes()
        (rows,) = np.frombuffer(data[:8], dtype="<u8")
        assert rows == 40
        payload = np.frombuffer(data, dtype="<f4", offset=8).reshape(40, -1)
        assert payload.shape[1] == 16
        np.testing.assert_allclose(np.linalg.norm(payload, axis=1), 1.0, atol=1e-5)

    def test_ambiguous_items_scored_against_both_references(self, instances_file, references_file, tmp_path):
        paths = _run_fixture(instances_file, references_file, tmp_path / "corpus")
        rows = [json.loads(l) for l in paths.scores.read_text(encoding="utf-8").splitlines()]
        by_id = {row["instance_id"]: row for row in rows}
        assert len(by_id["plumber-they"]["comet"]) == 2
        assert len(by_id["plumber-he"]["comet"]) == 1
        assert all(0.0 <= entry["score"] <= 100.0 for row in rows for entry in row["comet"])

    def test_manifest_accumulates_pairs(self, instances_file, references_file, tmp_path):
        out = tmp_path / "corpus"
        _run_fixture(instances_file, references_file, out)
        config_uk = SamplerConfig(language="uk", num_samples=8, embedding_dim=16)
        run_all(instances_file, out, config_uk, references_path=None)
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["languages"] == ["es", "uk"]
        assert manifest["models"] == ["lexical-nmt"]
        assert manifest["samples"]["lexical-nmt"]["uk"] == "samples.lexical-nmt.uk.jsonl"

    def test_cli_run(self, instances_file, references_file, tmp_path):
        from click.testing import CliRunner

        from uqbias_sampler.cli import main

        out = tmp_path / "corpus"
        result = CliRunner().invoke(
            main,
            ["run", "--instances", str(instances_file), "--out", str(out),
             "--language", "es", "--num-samples", "8", "--references", str(references_file)],
            catch_exceptions=False,
        )
        assert result.exit_code == 0, result.output
        assert (out / "manifest.json").exists()
