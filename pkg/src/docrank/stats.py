"""Paired comparison statistics: Wilcoxon signed-rank, Cliff's delta, BH."""

from __future__ import annotations

import bisect
import math
from fractions import Fraction
from typing import Sequence

import numpy as np

__all__ = [
    "EXACT_LIMIT",
    "benjamini_hochberg",
    "cliffs_delta",
    "delta_magnitude",
    "signed_rank_distribution",
    "wilcoxon_signed_rank",
]

# exact null distribution up to this many nonzero differences
EXACT_LIMIT = 25


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing their mean rank."""
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def signed_rank_distribution(doubled_ranks: Sequence[int]) -> list[int]:
    """Number of sign assignments giving each doubled positive-rank sum.

    Ranks are passed doubled so that mid-ranks of ties stay integral.
    """
    total = sum(doubled_ranks)
    counts = [0] * (total + 1)
    counts[0] = 1
    reach = 0
    for r in doubled_ranks:
        for s in range(reach, -1, -1):
            if counts[s]:
                counts[s + r] += counts[s]
        reach += r
    return counts


def wilcoxon_signed_rank(a: Sequence[float], b: Sequence[float]) -> float:
    """Two-sided p-value of the Wilcoxon signed-rank test on pairs (a_i, b_i).

    Zero differences are dropped.  Up to ``EXACT_LIMIT`` remaining pairs the
    exact permutation distribution (ties included) is used; above it a normal
    approximation with tie correction and no continuity correction.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("samples must be one-dimensional and of equal length")
    diff = a - b
    if not np.all(np.isfinite(diff)):
        raise ValueError("samples must be finite")
    diff = diff[diff != 0]
    m = len(diff)
    if m == 0:
        return 1.0
    ranks = _average_ranks(np.abs(diff))
    if m <= EXACT_LIMIT:
        doubled = [int(round(2 * r)) for r in ranks]
        t_plus = sum(r for r, d in zip(doubled, diff) if d > 0)
        counts = signed_rank_distribution(doubled)
        lower = sum(counts[:t_plus + 1])
        upper = sum(counts[t_plus:])
        p = Fraction(2 * min(lower, upper), 2 ** m)
        return float(min(p, Fraction(1)))
    t_plus = float(np.sum(ranks[diff > 0]))
    mean = m * (m + 1) / 4
    var = m * (m + 1) * (2 * m + 1) / 24
    _, tie_sizes = np.unique(ranks, return_counts=True)
    var -= float(np.sum(tie_sizes ** 3 - tie_sizes)) / 48
    if var <= 0:
        return 1.0
    z = (t_plus - mean) / math.sqrt(var)
    return min(1.0, math.erfc(abs(z) / math.sqrt(2)))


def delta_magnitude(delta: float) -> str:
    size = abs(delta)
    if size < 0.147:
        return "negligible"
    if size < 0.33:
        return "small"
    if size < 0.474:
        return "moderate"
    return "large"


def cliffs_delta(a: Sequence[float], b: Sequence[float]) -> tuple[float, str]:
    """Cliff's delta of ``a`` against ``b`` and its magnitude band."""
    if len(a) == 0 or len(b) == 0:
        raise ValueError("both samples must be non-empty")
    ordered = sorted(b)
    greater = less = 0
    for x in a:
        less += len(ordered) - bisect.bisect_right(ordered, x)
        greater += bisect.bisect_left(ordered, x)
    delta = (greater - less) / (len(a) * len(b))
    return delta, delta_magnitude(delta)


def benjamini_hochberg(p_values: Sequence[float]) -> list[float]:
    """Benjamini-Hochberg step-up adjusted p-values, in input order."""
    p = np.asarray(p_values, dtype=float)
    if p.ndim != 1:
        raise ValueError("p_values must be one-dimensional")
    if np.any(~np.isfinite(p)) or np.any((p < 0) | (p > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    m = len(p)
    if m == 0:
        return []
    order = np.argsort(p, kind="mergesort")
    scaled = p[order] * m / np.arange(1, m + 1)
    adjusted_sorted = np.minimum.accumulate(scaled[::-1])[::-1]
    adjusted = np.empty(m)
    adjusted[order] = np.minimum(adjusted_sorted, 1.0)
    return adjusted.tolist()
