"""Truncated (epsilon) sampling over categorical distributions.

Tokens whose probability falls below epsilon are dropped and the remainder
renormalized before drawing. The reported log-probability is the original
model probability of the drawn token, not the truncated one, so sequence
scores stay comparable across epsilon settings.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np


def epsilon_sample(
    choices: Sequence[str],
    probabilities: Sequence[float],
    epsilon: float,
    rng: np.random.Generator,
) -> tuple[str, float]:
    """Draw one token under epsilon-truncated sampling.

    Returns (token, log p(token)) with the log-probability taken from the
    untruncated distribution. If every token falls below epsilon, the
    single most probable token is kept (truncation never empties the
    support).
    """
    p = np.asarray(probabilities, dtype=float)
    if len(choices) != p.size or p.size == 0:
        raise ValueError("choices and probabilities must be non-empty and aligned")
    if (p < 0).any() or not math.isclose(float(p.sum()), 1.0, abs_tol=1e-9):
        raise ValueError("probabilities must be a normalized distribution")

    keep = p >= epsilon
    if not keep.any():
        keep = p == p.max()
    kept = p[keep] / p[keep].sum()
    index_within = int(rng.choice(np.flatnonzero(keep), p=kept))
    return choices[index_within], float(np.log(p[index_within]))


def greedy_choice(choices: Sequence[str], probabilities: Sequence[float]) -> tuple[str, float]:
    """Most probable token and its log-probability (the 'beam' path)."""
    p = np.asarray(probabilities, dtype=float)
    index = int(np.argmax(p))
    return choices[index], float(np.log(p[index]))
