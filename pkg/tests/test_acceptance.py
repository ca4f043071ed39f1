"""Acceptance suite: one test per exit criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines as they complete. Reference values marked "recorded" come from
published full-scale evaluation runs of twelve translation systems; they
pin formula-level behaviour, not re-runs of those systems.
"""

import hashlib
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from uqbias.analysis import analyze_effects
from uqbias.bias import normalized_entropy, relative_entropy
from uqbias.cli import main
from uqbias.entropy import s3e_entropy, semantic_entropy, shannon_entropy
from uqbias.stats import rank_models, ranked_correlations
from uqbias.types import ClusterAssignment, ContrastGroup, SimilarityConfig

from conftest import make_synthetic_population


@contextmanager
def criterion(name):
    started = time.perf_counter()
    try:
        yield
    except Exception:
        print(f"[ACCEPTANCE] {name}: FAIL")
        raise
    print(f"[ACCEPTANCE] {name}: PASS ({time.perf_counter() - started:.2f}s)")


# Recorded per-system entropy means on the unambiguous/ambiguous partitions
# and the relative difference reported alongside them (expected-similarity
# method, twelve systems, inputs rounded to 2 decimals).
RECORDED_PARTITION_MEANS = {
    "opus-mt-es": (1.23, 1.12, 0.09),
    "deb-opus-mt-es": (0.97, 0.89, 0.08),
    "m2m100-es": (1.79, 1.45, 0.19),
    "opus-mt-fr": (1.79, 1.43, 0.20),
    "deb-opus-mt-fr": (1.21, 1.08, 0.11),
    "m2m100-fr": (3.22, 2.78, 0.14),
    "opus-mt-uk": (1.96, 2.16, -0.10),
    "deb-opus-mt-uk": (1.98, 2.15, -0.09),
    "m2m100-uk": (2.05, 2.28, -0.11),
    "opus-mt-ru": (1.56, 1.68, -0.08),
    "deb-opus-mt-ru": (1.05, 0.97, 0.08),
    "m2m100-ru": (1.83, 2.29, -0.25),
}

# Recorded per-system gender accuracy and mean relative surprisal
# (expected-similarity method), in presentation order, plus the rank
# correlations reported for these two columns.
RECORDED_GENDER_ACCURACY = [
    67.95, 68.13, 70.77, 64.27, 64.79, 61.66, 45.34, 46.12, 47.76, 48.57, 48.42, 48.49,
]
RECORDED_DELTA_I = [
    -0.10, -0.13, -0.13, -0.04, -0.08, -0.07, -0.03, -0.03, -0.02, 0.00, -0.03, -0.03,
]
RECORDED_SPEARMAN = -0.78
RECORDED_KENDALL = -0.58


class TestAcceptance:
    def test_delta_h_formula_reproduction(self):
        with criterion("delta-H formula reproduction (12 systems)"):
            started = time.perf_counter()
            for system, (h_unamb, h_amb, reported) in RECORDED_PARTITION_MEANS.items():
                computed = relative_entropy(h_unamb, h_amb)
                assert computed == pytest.approx(reported, abs=0.03), system
            tight = {"opus-mt-es": 0.09, "opus-mt-uk": -0.10}
            for system, reported in tight.items():
                h_unamb, h_amb, _ = RECORDED_PARTITION_MEANS[system]
                assert relative_entropy(h_unamb, h_amb) == pytest.approx(reported, abs=0.005), system
            assert time.perf_counter() - started < 1.0

    def test_rank_correlation_reproduction(self):
        with criterion("rank-correlation reproduction (rho ~ -0.78, tau ~ -0.58)"):
            started = time.perf_counter()
            rho, tau = ranked_correlations(RECORDED_GENDER_ACCURACY, RECORDED_DELTA_I)
            assert rho == pytest.approx(RECORDED_SPEARMAN, abs=0.05)
            assert tau == pytest.approx(RECORDED_KENDALL, abs=0.05)
            assert time.perf_counter() - started < 1.0

    def test_per_element_entropy_equals_cluster_shannon(self):
        with criterion("per-element surprisal entropy == cluster-level Shannon (1000 cases, 1e-12)"):
            rng = np.random.default_rng(2024)
            for _ in range(1000):
                n = int(rng.integers(1, 257))
                k = int(rng.integers(1, 17))
                raw = rng.integers(0, k, size=n)
                order = sorted(set(raw.tolist()))
                index = {c: i for i, c in enumerate(order)}
                assignment = ClusterAssignment([index[c] for c in raw.tolist()], len(order))
                per_element = semantic_entropy(assignment).entropy
                counts = assignment.counts()
                cluster_level = shannon_entropy(counts / counts.sum())
                assert abs(per_element - cluster_level) < 1e-12

    def test_s3e_degenerates_to_semantic_entropy(self):
        with criterion("indicator-similarity s3e == semantic entropy (200 cases, 1e-6)"):
            rng = np.random.default_rng(7)
            for _ in range(200):
                n = int(rng.integers(2, 65))
                k = int(rng.integers(1, 9))
                raw = rng.integers(0, k, size=n)
                order = sorted(set(raw.tolist()))
                index = {c: i for i, c in enumerate(order)}
                cluster_of = [index[c] for c in raw.tolist()]
                assignment = ClusterAssignment(cluster_of, len(order))
                ids = np.asarray(cluster_of)
                sim = np.where(np.equal.outer(ids, ids), 1.0, 1e-12)
                s3e = s3e_entropy(sim, SimilarityConfig(alpha=1.0, floor=1e-12))
                se = semantic_entropy(assignment)
                assert abs(s3e.entropy - se.entropy) < 1e-6

    def test_norm_h_group_mean_invariant(self):
        with criterion("norm-H member mean == 1 (500 groups, 1e-9); degenerate flagged"):
            rng = np.random.default_rng(99)
            for case in range(500):
                size = int(rng.integers(1, 7))
                ids = tuple(f"i{case}-{k}" for k in range(size))
                group = ContrastGroup(f"g{case}", ids)
                entropies = {i: float(rng.uniform(0.05, 5.0)) for i in ids}
                values = normalized_entropy(group, entropies, tolerance=1e-9)
                assert all(v is not None for v in values.values())
                assert np.mean(list(values.values())) == pytest.approx(1.0, abs=1e-9)

                degenerate = normalized_entropy(group, {i: 0.0 for i in ids}, tolerance=1e-9)
                assert all(v is None for v in degenerate.values())

    def test_planted_effect_anova_recovery(self):
        with criterion("planted names effect: 0.30 +/- 0.03, p < 0.001, others null"):
            started = time.perf_counter()
            records, instances = make_synthetic_population(
                n_pairs=200, names_shift=0.30, sigma=0.05, seed=123
            )
            rows, notes = analyze_effects(records, instances, dependents=("norm_entropy",))
            assert not notes
            names_estimates = [est for (_, _, _, _, est) in rows if est.cue == "names"]
            assert len(names_estimates) == 1
            names = names_estimates[0]
            assert names.n_level == names.n_reference == 200
            assert names.coefficient == pytest.approx(0.30, abs=0.03)
            assert names.p_value is not None and names.p_value < 1e-3
            assert names.significant
            others = [est for (_, _, _, _, est) in rows if est.cue != "names"]
            assert others
            for estimate in others:
                assert estimate.coefficient == pytest.approx(0.0, abs=0.03), estimate.cue
                assert not estimate.significant, estimate.cue
            assert time.perf_counter() - started < 5.0

    def test_analytic_entropy_fixtures(self):
        with criterion("analytic entropy fixtures (ln 2, 1.0397, 0.5623, 0.4481)"):
            ln2 = float(np.log(2.0))
            assert shannon_entropy([1.0]) == 0.0
            assert shannon_entropy([0.5, 0.5]) == pytest.approx(ln2, abs=1e-4)
            assert shannon_entropy([0.7, 0.2, 0.1]) == pytest.approx(0.8018, abs=1e-4)

            even = ClusterAssignment([0] * 64 + [1] * 64, 2)
            assert semantic_entropy(even).entropy == pytest.approx(ln2, abs=1e-4)
            skewed = ClusterAssignment([0] * 64 + [1] * 32 + [2] * 32, 3)
            assert semantic_entropy(skewed).entropy == pytest.approx(1.0397, abs=1e-4)
            gender_split = ClusterAssignment([0] * 96 + [1] * 32, 2)
            assert semantic_entropy(gender_split).entropy == pytest.approx(0.5623, abs=1e-4)

            sim = np.array([[1.0, 0.8, 0.2], [0.8, 1.0, 0.4], [0.2, 0.4, 1.0]])
            result = s3e_entropy(sim, SimilarityConfig(alpha=1.0))
            assert result.entropy == pytest.approx(0.4481, abs=1e-4)
            assert result.per_sample_surprisal == pytest.approx([0.4055, 0.3102, 0.6286], abs=1e-4)

    def test_pipeline_determinism(self, fixture_corpus, tmp_path):
        with criterion("byte-identical outputs across 3 runs and jobs {1, 4}"):
            runner = CliRunner()

            def run(out_dir: Path, jobs: int) -> dict[str, str]:
                for args in (
                    ["compute", "--manifest", str(fixture_corpus), "--out", str(out_dir),
                     "--alpha", "tune", "--jobs", str(jobs)],
                    ["analyze", "--manifest", str(fixture_corpus), "--out", str(out_dir)],
                    ["report", "--analysis", str(out_dir)],
                ):
                    result = runner.invoke(main, args, catch_exceptions=False)
                    assert result.exit_code == 0, result.output
                return {
                    str(p.relative_to(out_dir)): hashlib.sha256(p.read_bytes()).hexdigest()
                    for p in sorted(out_dir.rglob("*"))
                    if p.is_file()
                }

            runs = [
                run(tmp_path / "run1", jobs=1),
                run(tmp_path / "run2", jobs=1),
                run(tmp_path / "run3", jobs=1),
                run(tmp_path / "run4", jobs=4),
            ]
            assert len(runs[0]) >= 14  # compute + analyze + report artifacts
            for other in runs[1:]:
                assert other == runs[0]

    def test_recorded_ranking_order_reproduced(self):
        with criterion("recomputed delta-H ranking matches the recorded ordering"):
            recomputed = {
                system: relative_entropy(h_unamb, h_amb)
                for system, (h_unamb, h_amb, _) in RECORDED_PARTITION_MEANS.items()
            }
            ranked = [system for system, _ in rank_models(recomputed, ascending=True)]
            assert ranked == [
                "m2m100-ru",
                "m2m100-uk",
                "opus-mt-uk",
                "deb-opus-mt-uk",
                "opus-mt-ru",
                "deb-opus-mt-ru",
                "deb-opus-mt-es",
                "opus-mt-es",
                "deb-opus-mt-fr",
                "m2m100-fr",
                "m2m100-es",
                "opus-mt-fr",
            ]

    def test_headline_numbers_are_reference_only(self):
        with criterion("full-scale headline numbers pinned as reference constants only"):
            # Absolute gender accuracies and entropy levels require sampling
            # from the actual translation models, which this suite does not
            # do. The formula-level reproductions and property suites above
            # stand in for those paths; here we only assert the reference
            # constants stay self-consistent.
            assert len(RECORDED_GENDER_ACCURACY) == len(RECORDED_DELTA_I) == 12
            assert len(RECORDED_PARTITION_MEANS) == 12
            assert all(0 <= a <= 100 for a in RECORDED_GENDER_ACCURACY)
            assert all(-2 <= d <= 2 for d in RECORDED_DELTA_I)
