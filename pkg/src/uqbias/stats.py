"""Statistical analysis layer: single-effect coefficients, rank correlations,
quantile binning for plot export, and deterministic model ranking.

The Welch test and both rank correlations are implemented directly so the
test suite can check them against an independent library oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import special
from scipy.stats import gaussian_kde

from .types import BinnedSummary, EffectEstimate, ValidationError

SIGNIFICANCE_LEVEL = 0.05
_DENSITY_POINTS = 64


@dataclass
class WelchResult:
    t: float
    df: float
    p: float
    degenerate: bool = False


def welch_t_test(a: Sequence[float], b: Sequence[float]) -> WelchResult:
    """Two-sided Welch t-test with the Welch-Satterthwaite degrees of freedom.

    Degenerate inputs (both groups with zero variance) are flagged: equal
    means give t = 0, p = 1; unequal means give p = 0.
    """
    x = np.asarray(a, dtype=float)
    y = np.asarray(b, dtype=float)
    if x.size < 2 or y.size < 2:
        raise ValidationError(f"both groups need >= 2 observations, got {x.size} and {y.size}")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValidationError("groups contain non-finite values")

    mean_diff = float(x.mean() - y.mean())
    vx = float(x.var(ddof=1))
    vy = float(y.var(ddof=1))
    sq_x = vx / x.size
    sq_y = vy / y.size
    se2 = sq_x + sq_y
    if se2 == 0.0:
        if mean_diff == 0.0:
            return WelchResult(t=0.0, df=0.0, p=1.0, degenerate=True)
        return WelchResult(t=math.copysign(math.inf, mean_diff), df=0.0, p=0.0, degenerate=True)

    t = mean_diff / math.sqrt(se2)
    # Welch-Satterthwaite, written with the variance ratios so extreme
    # magnitudes cannot underflow the squared terms.
    rx = sq_x / se2
    ry = sq_y / se2
    df = 1.0 / (rx**2 / (x.size - 1) + ry**2 / (y.size - 1))
    p = 2.0 * float(special.stdtr(df, -abs(t)))
    return WelchResult(t=t, df=df, p=min(p, 1.0))


def single_effect_anova(
    values: Sequence[float],
    factor: Sequence[str],
    reference: str,
) -> list[EffectEstimate]:
    """Group-mean deviations from a reference level, one cue at a time.

    Each non-reference level yields a coefficient mean(level) - mean(reference)
    with a two-sided Welch p-value against the reference group. Levels with
    fewer than 2 observations (or a reference that small) get an absent
    p-value instead of a fabricated one.
    """
    if len(values) != len(factor):
        raise ValidationError(f"values and factor lengths differ ({len(values)} vs {len(factor)})")
    groups: dict[str, list[float]] = {}
    for value, label in zip(values, factor):
        groups.setdefault(label, []).append(float(value))
    if reference not in groups:
        raise ValidationError(f"reference level {reference!r} has no observations")

    ref_values = groups[reference]
    ref_mean = float(np.mean(ref_values))
    estimates: list[EffectEstimate] = []
    for level in sorted(groups):
        if level == reference:
            continue
        level_values = groups[level]
        coefficient = float(np.mean(level_values)) - ref_mean
        p_value: float | None = None
        degenerate = False
        if len(level_values) >= 2 and len(ref_values) >= 2:
            welch = welch_t_test(level_values, ref_values)
            p_value = welch.p
            degenerate = welch.degenerate
        estimates.append(
            EffectEstimate(
                cue="",
                level=level,
                reference_level=reference,
                coefficient=coefficient,
                p_value=p_value,
                significant=p_value is not None and p_value < SIGNIFICANCE_LEVEL,
                n_level=len(level_values),
                n_reference=len(ref_values),
                degenerate=degenerate,
            )
        )
    return estimates


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks with ties sharing their average rank."""
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.size, dtype=float)
    i = 0
    while i < v.size:
        j = i
        while j + 1 < v.size and v[order[j + 1]] == v[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def first_occurrence_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks with ties broken by position in the input."""
    v = np.asarray(values, dtype=float)
    order = np.argsort(v, kind="stable")
    ranks = np.empty(v.size, dtype=float)
    ranks[order] = np.arange(1, v.size + 1)
    return ranks


def _check_pair(x: Sequence[float], y: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(x, dtype=float)
    b = np.asarray(y, dtype=float)
    if a.size != b.size:
        raise ValidationError(f"series lengths differ ({a.size} vs {b.size})")
    if a.size < 3:
        raise ValidationError(f"need at least 3 paired observations, got {a.size}")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ValidationError("series contain non-finite values")
    return a, b


def spearman_rho(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Spearman rank correlation: Pearson correlation of average ranks.

    None for a constant series, where the correlation is undefined.
    """
    a, b = _check_pair(x, y)
    ra = average_ranks(a)
    rb = average_ranks(b)
    da = ra - ra.mean()
    db = rb - rb.mean()
    denom = math.sqrt(float((da * da).sum()) * float((db * db).sum()))
    if denom == 0.0:
        return None
    return float((da * db).sum()) / denom


def kendall_tau_b(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Kendall's tau-b with tie correction in both series.

    None when either series is constant.
    """
    a, b = _check_pair(x, y)
    n = a.size
    concordant = 0
    discordant = 0
    ties_x = 0
    ties_y = 0
    for i in range(n - 1):
        # Signs, not raw difference products: products of tiny differences
        # can underflow to zero and silently drop a pair.
        sx = np.sign(a[i] - a[i + 1 :])
        sy = np.sign(b[i] - b[i + 1 :])
        product = sx * sy
        concordant += int((product > 0).sum())
        discordant += int((product < 0).sum())
        ties_x += int(((sx == 0) & (sy != 0)).sum())
        ties_y += int(((sy == 0) & (sx != 0)).sum())
    # Pairs tied in both series count toward neither correction term.
    n0 = n * (n - 1) // 2
    both_tied = n0 - concordant - discordant - ties_x - ties_y
    denom = math.sqrt((n0 - (ties_x + both_tied)) * (n0 - (ties_y + both_tied)))
    if denom == 0.0:
        return None
    return (concordant - discordant) / denom


def ranked_correlations(x: Sequence[float], y: Sequence[float]) -> tuple[float | None, float | None]:
    """Spearman and Kendall correlations of the two series' rankings.

    Both series are first converted to ranks with ties broken by input
    order, mirroring how cross-model comparisons rank systems before
    correlating. On the tie-broken ranks Spearman reduces to Pearson and
    tau-b to tau-a.
    """
    a, b = _check_pair(x, y)
    ra = first_occurrence_ranks(a)
    rb = first_occurrence_ranks(b)
    return spearman_rho(ra, rb), kendall_tau_b(ra, rb)


def max_reference_aggregation(scores_per_reference: Sequence[float]) -> float:
    """Best score across acceptable references (ambiguous items have several)."""
    if len(scores_per_reference) == 0:
        raise ValidationError("no reference scores to aggregate")
    return float(max(scores_per_reference))


def rank_models(metric_values: Mapping[str, float], ascending: bool = True) -> list[tuple[str, float]]:
    """Order models by a metric; ties broken by model identifier."""
    if not metric_values:
        raise ValidationError("no models to rank")
    items = sorted(metric_values.items())  # tie-break by id, stable under the value sort
    return sorted(items, key=lambda kv: kv[1], reverse=not ascending)


def comet_bins(
    records: Sequence[tuple[float, float, bool]],
    k: int,
) -> list[BinnedSummary]:
    """Quantile-bin records by quality score and summarise entropy per condition.

    Records are (comet_score, entropy, ambiguous) triples. Bins hold equal
    counts up to quantile granularity; when duplicate-heavy scores collapse
    quantile edges the collapsed bins are merged and flagged. Every bin is
    summarised separately for ambiguous and unambiguous records with
    quartiles, extremes, and kernel-density support points for violin-style
    export.
    """
    if k < 2:
        raise ValidationError(f"bin count must be >= 2, got {k}")
    if not records:
        raise ValidationError("no records to bin")
    scores = np.asarray([r[0] for r in records], dtype=float)
    if not np.isfinite(scores).all():
        raise ValidationError("scores contain non-finite values")

    lo = float(scores.min())
    hi = float(scores.max())
    interior = np.quantile(scores, [i / k for i in range(1, k)], method="linear")
    # Duplicate-heavy data can collapse quantile edges; keep only edges that
    # actually separate records (scores equal to an edge fall above it, so an
    # edge at the minimum would leave an empty bottom bin).
    edges: list[float] = []
    for edge in interior:
        if (not edges or edge > edges[-1]) and lo < edge <= hi:
            edges.append(float(edge))
    merged = len(edges) < k - 1
    num_bins = len(edges) + 1
    bin_of = np.searchsorted(edges, scores, side="right")

    summaries: list[BinnedSummary] = []
    for bin_index in range(num_bins):
        bin_lo = lo if bin_index == 0 else edges[bin_index - 1]
        bin_hi = hi if bin_index == num_bins - 1 else edges[bin_index]
        in_bin = bin_of == bin_index
        for condition, flag in (("unambiguous", False), ("ambiguous", True)):
            values = np.asarray(
                [r[1] for r, keep in zip(records, in_bin) if keep and r[2] == flag], dtype=float
            )
            summary = BinnedSummary(
                bin_index=bin_index,
                bin_lo=bin_lo,
                bin_hi=bin_hi,
                condition=condition,
                count=int(values.size),
                merged=merged,
            )
            if values.size:
                q1, median, q3 = np.quantile(values, [0.25, 0.5, 0.75])
                summary.minimum = float(values.min())
                summary.q1 = float(q1)
                summary.median = float(median)
                summary.q3 = float(q3)
                summary.maximum = float(values.max())
                summary.density_x, summary.density_y = _density_support(values)
            summaries.append(summary)
    return summaries


def _density_support(values: np.ndarray) -> tuple[list[float], list[float]]:
    if values.size < 2 or float(values.var()) == 0.0:
        # Point mass: a single support point carries the whole distribution.
        return [float(values[0])], [1.0]
    grid = np.linspace(float(values.min()), float(values.max()), _DENSITY_POINTS)
    density = gaussian_kde(values)(grid)
    return [float(v) for v in grid], [float(v) for v in density]
