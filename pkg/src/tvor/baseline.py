"""Comparison scorers: leave-one-out Pearson chi-squared and digit-preference indices."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .histogram import Histogram
from .model import descending_ranks

EPSILON = 1e-6


@dataclass
class Chi2Report:
    label: str | None
    N: int
    chi2: float
    rank: int

    def to_dict(self) -> dict:
        return {"label": self.label, "N": self.N, "dtv": None, "predicted": None,
                "score": self.chi2, "rank": self.rank, "method": "chi2"}


def chi2_scores(X: np.ndarray, epsilon: float = EPSILON) -> np.ndarray:
    """Pearson statistic of each row against the pooled other rows.

    Expected counts for row i are the bin totals of all other rows, rescaled
    to row i's size, plus ``epsilon``.
    """
    X = np.asarray(X, dtype=float)
    sizes = X.sum(axis=1)
    bin_sums = X.sum(axis=0)
    total = sizes.sum()
    others = total - sizes
    if np.any(others <= 0):
        raise ValidationError("a histogram holds all the data; nothing to compare it to")
    expected = (bin_sums[None, :] - X) / others[:, None] * sizes[:, None] + epsilon
    return ((X - expected) ** 2 / expected).sum(axis=1)


def run_chi2_baseline(histograms: Sequence[Histogram], epsilon: float = EPSILON) -> list[Chi2Report]:
    if len(histograms) < 2:
        raise ValidationError("need at least two histograms")
    if len({h.n for h in histograms}) != 1:
        raise ValidationError("histograms have different bin counts")
    X = np.vstack([h.counts for h in histograms])
    scores = chi2_scores(X, epsilon)
    ranks = descending_ranks(scores)
    return [Chi2Report(h.label, h.N, float(s), int(r))
            for h, s, r in zip(histograms, scores, ranks)]


def _in_range(values, value_range):
    v = np.asarray(values)
    if v.size and v.dtype.kind == "f":
        if np.any(v != np.round(v)):
            raise ValidationError("digit indices need integer values")
        v = v.astype(np.int64)
    if value_range is not None:
        lo, hi = value_range
        if lo > hi:
            raise ValidationError(f"empty range [{lo}, {hi}]")
        v = v[(v >= lo) & (v <= hi)]
    return v


def whipple_index(values, value_range: tuple[int, int] | None = None) -> float:
    """Whipple's index on terminal digits 0 and 5.

    100 means no preference, 500 means every value ends in 0 or 5.  The
    default range is all values; the classic age window is (23, 62).
    """
    v = _in_range(values, value_range)
    if v.size == 0:
        raise ValidationError("no values inside the Whipple range")
    heaped = np.count_nonzero(v % 5 == 0)
    return 500.0 * heaped / v.size


def myers_blended_counts(values, value_range: tuple[int, int] | None = None,
                         decades: int = 10) -> np.ndarray:
    v = _in_range(values, value_range)
    if v.size == 0:
        raise ValidationError("no values inside the Myers range")
    if v.max() - v.min() < 9:
        raise ValidationError("Myers' index needs values spanning at least 10 consecutive integers")
    if decades < 2:
        raise ValidationError("Myers' index needs a window of at least 2 decades")
    start = (int(v.min()) // 10) * 10
    digits = v % 10
    first = (v >= start) & (v < start + 10 * (decades - 1))
    second = (v >= start + 10) & (v < start + 10 * decades)
    sum1 = np.bincount(digits[first], minlength=10)
    sum2 = np.bincount(digits[second], minlength=10)
    d = np.arange(10)
    return (d + 1) * sum1 + (9 - d) * sum2


def myers_index(values, value_range: tuple[int, int] | None = None, decades: int = 10) -> float:
    """Myers' blended index: 0 for no digit preference, 90 for a single digit.

    The blending window starts at the decade containing the smallest value in
    range and spans ``decades`` decades; counts over its first ``decades - 1``
    decades are weighted by d + 1 and counts over its last ``decades - 1``
    decades by 9 - d.
    """
    blended = myers_blended_counts(values, value_range, decades)
    total = blended.sum()
    if total == 0:
        raise ValidationError("no values inside the Myers blending window")
    return 0.5 * float(np.abs(100.0 * blended / total - 10.0).sum())
