"""Entropy and surprisal estimators over Monte-Carlo translation samples.

All estimators share the same shape: a per-sample surprisal I(y) whose
mean over the drawn samples estimates the entropy H = E[I(y)]. They differ
in how I is defined:

- ``shannon``: I(y) = -log p(y), the sequence log-probability.
- semantic entropy: I(y) = -log(n_c / N) where c is y's meaning cluster
  from bidirectional entailment.
- gender entropy: same mechanics with clusters given by the morphological
  gender of the translated focus noun.
- expected-similarity entropy (s3e): I(y) = -log mean_j S(y, y_j)^alpha
  over all drawn samples, with S a cosine similarity clamped into (0, 1].

Everything is in nats. All functions are pure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .types import (
    GENDER_ORDER,
    ClusterAssignment,
    EntailmentMatrix,
    SampleSet,
    SimilarityConfig,
    ValidationError,
)

DEFAULT_ALPHA_GRID = (0.25, 0.5, 1.0, 2.0, 4.0, 8.0)
DEFAULT_ENTAILMENT_THRESHOLD = 0.5


@dataclass
class EntropyResult:
    entropy: float
    per_sample_surprisal: np.ndarray


@dataclass
class TunedAlpha:
    alpha: float
    correlation: float | None


def shannon_entropy(probabilities: Sequence[float]) -> float:
    """Shannon entropy -sum(p log p) of a normalized distribution, in nats."""
    p = np.asarray(probabilities, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise ValidationError("probabilities must be a non-empty 1-d sequence")
    if not np.isfinite(p).all():
        raise ValidationError("probabilities contain non-finite values")
    if (p < 0).any():
        raise ValidationError("probabilities must be non-negative")
    total = float(p.sum())
    if abs(total - 1.0) > 1e-9:
        raise ValidationError(f"probabilities must sum to 1 (got {total!r})")
    nz = p[p > 0]
    # 0 * log 0 := 0; clamp -0.0 from the degenerate case.
    return max(0.0, float(-(nz * np.log(nz)).sum()))


def cluster_by_entailment(
    samples: SampleSet,
    matrix: EntailmentMatrix,
    threshold: float = DEFAULT_ENTAILMENT_THRESHOLD,
) -> ClusterAssignment:
    """Greedy single-pass clustering by bidirectional entailment.

    Samples are visited in order. Sample i joins the first existing cluster
    whose representative r (the cluster's founding sample) entails it and is
    entailed by it, both with probability >= threshold. Otherwise i founds a
    new cluster. Deterministic given the input order.
    """
    n = len(samples)
    if matrix.size != n:
        raise ValidationError(
            f"entailment matrix is {matrix.size}x{matrix.size} but sample set has {n} samples"
        )
    if not (0 < threshold < 1):
        raise ValidationError(f"entailment threshold must lie in (0, 1), got {threshold}")

    scores = matrix.scores
    representatives: list[int] = []
    assignment: list[int] = []
    for i in range(n):
        for cluster_index, rep in enumerate(representatives):
            if scores[i, rep] >= threshold and scores[rep, i] >= threshold:
                assignment.append(cluster_index)
                break
        else:
            representatives.append(i)
            assignment.append(len(representatives) - 1)
    return ClusterAssignment(cluster_of=assignment, num_clusters=len(representatives))


def semantic_entropy(assignment: ClusterAssignment) -> EntropyResult:
    """Entropy over meaning clusters via per-sample surprisal.

    I(y_i) = -log(n_c / N) for the cluster c containing y_i. The mean of
    these surprisals equals the Shannon entropy of the cluster-size
    distribution, since each cluster contributes n_c copies of its own
    surprisal.
    """
    counts = assignment.counts()
    n = len(assignment.cluster_of)
    surprisal = -np.log(counts[np.asarray(assignment.cluster_of)] / n)
    surprisal = np.maximum(surprisal, 0.0)
    return EntropyResult(entropy=float(surprisal.mean()), per_sample_surprisal=surprisal)


def gender_clusters(samples: SampleSet) -> ClusterAssignment:
    """Cluster samples by the gender label of the translated focus noun.

    Unknown is kept as its own cluster; dropping it would change N and bias
    the estimate. Cluster indices follow the canonical label order, so the
    assignment does not depend on which label happens to appear first.
    """
    present = [g for g in GENDER_ORDER if g in set(samples.gender_labels)]
    index_of = {g: i for i, g in enumerate(present)}
    return ClusterAssignment(
        cluster_of=[index_of[g] for g in samples.gender_labels],
        num_clusters=len(present),
    )


def gender_entropy(samples: SampleSet) -> EntropyResult:
    """Entropy over the gender classes of the translated focus noun."""
    return semantic_entropy(gender_clusters(samples))


def cosine_similarity_matrix(samples: SampleSet, floor: float = 1e-6) -> np.ndarray:
    """Pairwise cosine similarity of sample embeddings, clamped into [floor, 1].

    Cosine can be negative but the similarity function must map into [0, 1]
    and its log must stay finite, hence the lower clamp. The diagonal is
    exactly 1.0.
    """
    if not (0 < floor < 1):
        raise ValidationError(f"floor must lie in (0, 1), got {floor}")
    embeddings = samples.embedding_matrix()
    norms = np.linalg.norm(embeddings, axis=1, keepdims=True)
    if (norms == 0).any():
        raise ValidationError("zero-norm embedding")
    unit = embeddings / norms
    sim = np.clip(unit @ unit.T, floor, 1.0)
    np.fill_diagonal(sim, 1.0)
    return sim


def s3e_entropy(similarity: np.ndarray, config: SimilarityConfig = SimilarityConfig()) -> EntropyResult:
    """Expected-similarity entropy.

    I(y_i) = -log( (1/N) sum_j S(i, j)^alpha ), the expectation taken over
    all drawn samples including y_i itself, which keeps the argument of the
    log at or above 1/N.
    """
    sim = np.asarray(similarity, dtype=float)
    if sim.ndim != 2 or sim.shape[0] != sim.shape[1] or sim.shape[0] == 0:
        raise ValidationError(f"similarity matrix must be square and non-empty, got shape {sim.shape}")
    if not np.isfinite(sim).all():
        raise ValidationError("similarity matrix contains non-finite entries")
    if (sim <= 0).any():
        raise ValidationError("similarity entries must be positive after clamping")
    if (sim > 1 + 1e-9).any():
        raise ValidationError("similarity entries must not exceed 1")
    if np.abs(np.diagonal(sim) - 1.0).max() > 1e-9:
        raise ValidationError("similarity matrix diagonal must be 1.0")

    expected = np.minimum(sim, 1.0) ** config.alpha
    surprisal = -np.log(expected.mean(axis=1))
    surprisal = np.maximum(surprisal, 0.0)
    return EntropyResult(entropy=float(surprisal.mean()), per_sample_surprisal=surprisal)


def tune_alpha(
    calibration: Sequence[SampleSet],
    grid: Iterable[float] = DEFAULT_ALPHA_GRID,
    floor: float = 1e-6,
) -> TunedAlpha:
    """Pick the similarity exponent whose entropies track gender entropy best.

    For each alpha in the grid, computes per-instance pairs of
    (expected-similarity entropy, gender entropy) over the calibration sets
    and scores their Spearman rank correlation. Returns the alpha with the
    highest correlation, ties broken toward the smallest alpha.
    """
    from .stats import spearman_rho

    grid = sorted(set(float(a) for a in grid))
    if not grid:
        raise ValidationError("alpha grid is empty")
    if any(a <= 0 for a in grid):
        raise ValidationError("alpha grid values must be positive")
    if len(calibration) < 3:
        raise ValidationError(
            f"alpha tuning needs at least 3 calibration instances, got {len(calibration)}"
        )

    h_gender = [gender_entropy(s).entropy for s in calibration]
    similarities = [cosine_similarity_matrix(s, floor=floor) for s in calibration]

    best_alpha = grid[0]
    best_corr: float | None = None
    for alpha in grid:
        config = SimilarityConfig(alpha=alpha, floor=floor)
        h_sim = [s3e_entropy(sim, config).entropy for sim in similarities]
        corr = spearman_rho(h_sim, h_gender)
        if corr is not None and (best_corr is None or corr > best_corr):
            best_alpha, best_corr = alpha, corr
    return TunedAlpha(alpha=best_alpha, correlation=best_corr)
