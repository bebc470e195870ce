"""Size/variation model, outlier scores and Monte Carlo tables.

The expected DTV of a histogram of N items is modelled as ``a*N + b*sqrt(N)``.
A histogram's score is the distance of its DTV from the model, divided by
sqrt(N) because the spread of the DTV grows like sqrt(N).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (DegenerateTableError, NoConsensusError, RankDeficientError,
                     ValidationError)
from .histogram import (DistributionSpec, Histogram, RngSeed, SeedLike,
                        as_generator, dtv, sample_many)

MIN_SIGMA = 1e-9


@dataclass
class DtvModel:
    a: float
    b: float
    fit_kind: str = "least-squares"
    inlier_mask: np.ndarray | None = None
    residual_scale: float = 0.0

    def predict(self, N):
        N = np.asarray(N, dtype=float)
        out = self.a * N + self.b * np.sqrt(N)
        return float(out) if out.ndim == 0 else out

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "fit_kind": self.fit_kind,
                "residual_scale": self.residual_scale}

    @classmethod
    def from_dict(cls, d: dict) -> "DtvModel":
        try:
            return cls(float(d["a"]), float(d["b"]), d.get("fit_kind", "least-squares"),
                       None, float(d.get("residual_scale", 0.0)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed model: {exc}") from None


@dataclass
class ScoreReport:
    label: str | None
    N: int
    dtv: int
    predicted: float
    score: float
    rank: int
    method: str

    def to_dict(self) -> dict:
        return {"label": self.label, "N": self.N, "dtv": self.dtv,
                "predicted": self.predicted, "score": self.score,
                "rank": self.rank, "method": self.method}


def descending_ranks(scores) -> np.ndarray:
    """0-based ranks by descending score; ties keep input order."""
    s = np.asarray(scores, dtype=float)
    order = np.argsort(-s, kind="stable")
    ranks = np.empty(s.size, dtype=np.int64)
    ranks[order] = np.arange(s.size)
    return ranks


def _points(points):
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValidationError("points must be (N, dtv) pairs")
    if np.any(arr[:, 0] < 0):
        raise ValidationError("sample sizes must be non-negative")
    return arr[:, 0], arr[:, 1]


def _scaled_residuals(model_a, model_b, sizes, dtvs):
    root = np.sqrt(sizes)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.abs(dtvs - model_a * sizes - model_b * root) / root
    return np.where(root > 0, r, np.inf)


def _lstsq(sizes, dtvs):
    if sizes.size < 2 or np.unique(sizes[sizes > 0]).size < 2:
        raise RankDeficientError("fitting a*N + b*sqrt(N) needs at least two distinct positive sizes")
    design = np.column_stack([sizes, np.sqrt(sizes)])
    (a, b), *_ = np.linalg.lstsq(design, dtvs, rcond=None)
    return float(a), float(b)


def _finish(a, b, kind, sizes, dtvs, mask=None):
    r = _scaled_residuals(a, b, sizes, dtvs)
    r = r[np.isfinite(r)]
    scale = float(np.sqrt(np.mean(r ** 2))) if r.size else 0.0
    if sizes.size and np.any(a * sizes + b * np.sqrt(sizes) < 0):
        warnings.warn("fitted model predicts a negative DTV inside the data range")
    return DtvModel(a, b, kind, mask, scale)


def fit_model(points) -> DtvModel:
    """Least squares of DTV on {N, sqrt(N)} without intercept."""
    sizes, dtvs = _points(points)
    a, b = _lstsq(sizes, dtvs)
    return _finish(a, b, "least-squares", sizes, dtvs)


RANSAC_THRESHOLD = 2.0
RANSAC_ITERATIONS = 500


def fit_model_ransac(points, threshold: float = RANSAC_THRESHOLD,
                     iterations: int = RANSAC_ITERATIONS, min_points: int | None = None,
                     seed: SeedLike = 0) -> DtvModel:
    """RANSAC over minimal two-point samples, then least squares on the consensus.

    A point is an inlier when ``|dtv - m(N)| / sqrt(N) <= threshold``.
    ``min_points`` defaults to ``max(10, 20% of the points)``, capped at the
    number of points.
    """
    sizes, dtvs = _points(points)
    if threshold <= 0 or iterations < 1:
        raise ValidationError("RANSAC needs threshold > 0 and iterations >= 1")
    _lstsq(sizes, dtvs)  # rank check on the full set
    m = sizes.size
    if min_points is None:
        min_points = min(m, max(10, math.ceil(0.2 * m)))

    rng = as_generator(seed)
    i = rng.integers(0, m, size=iterations)
    j = (i + rng.integers(1, m, size=iterations)) % m  # distinct from i
    n1, n2, v1, v2 = sizes[i], sizes[j], dtvs[i], dtvs[j]
    r1, r2 = np.sqrt(n1), np.sqrt(n2)
    det = n1 * r2 - n2 * r1
    ok = np.abs(det) > 1e-12 * np.maximum(n1 * r2, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = (v1 * r2 - v2 * r1) / det
        b = (n1 * v2 - n2 * v1) / det
    a, b = a[ok], b[ok]

    best = None
    if a.size:
        root = np.sqrt(sizes)
        with np.errstate(divide="ignore", invalid="ignore"):
            resid = np.abs(dtvs[None, :] - a[:, None] * sizes[None, :]
                           - b[:, None] * root[None, :]) / root[None, :]
        inliers = resid <= threshold
        counts = inliers.sum(axis=1)
        k = int(np.argmax(counts))  # first best hypothesis wins ties
        best = inliers[k]
    if best is None or best.sum() < min_points:
        got = 0 if best is None else int(best.sum())
        raise NoConsensusError(f"largest consensus set has {got} points, need {min_points}")
    try:
        fa, fb = _lstsq(sizes[best], dtvs[best])
    except RankDeficientError:
        raise NoConsensusError("consensus set has fewer than two distinct sizes") from None
    return _finish(fa, fb, "ransac", sizes[best], dtvs[best], best.copy())


def score_d1(h, model: DtvModel) -> float:
    """|dtv - (a*N + b*sqrt(N))| / sqrt(N)."""
    c = h.counts if isinstance(h, Histogram) else np.asarray(h)
    N = int(c.sum())
    if N < 1:
        raise ValidationError("cannot score an empty histogram")
    return abs(dtv(c) - model.predict(N)) / math.sqrt(N)


def _stack(histograms: Sequence[Histogram]) -> np.ndarray:
    if len(histograms) < 2:
        raise ValidationError("need at least two histograms")
    lengths = {h.n for h in histograms}
    if len(lengths) != 1:
        raise ValidationError(f"histograms have different bin counts: {sorted(lengths)}")
    return np.vstack([h.counts for h in histograms])


def run_tvor(histograms: Sequence[Histogram], ransac: bool = False,
             threshold: float = RANSAC_THRESHOLD, iterations: int = RANSAC_ITERATIONS,
             min_points: int | None = None, seed: SeedLike = 0,
             model: DtvModel | None = None):
    """Score every histogram against a model fitted to all of them.

    Returns ``(reports, model)``; reports follow the input order.  A
    pre-fitted ``model`` skips the fit.
    """
    X = _stack(histograms)
    sizes = X.sum(axis=1)
    if np.any(sizes == 0):
        raise ValidationError("cannot score an empty histogram")
    variations = np.abs(np.diff(X, axis=1)).sum(axis=1)
    if model is None:
        pts = np.column_stack([sizes, variations])
        if ransac:
            model = fit_model_ransac(pts, threshold, iterations, min_points, seed)
        else:
            model = fit_model(pts)
    predicted = model.predict(sizes)
    scores = np.abs(variations - predicted) / np.sqrt(sizes)
    ranks = descending_ranks(scores)
    method = "tvor-d1"
    reports = [
        ScoreReport(h.label, int(s), int(v), float(p), float(d), int(r), method)
        for h, s, v, p, d, r in zip(histograms, sizes, variations, predicted, scores, ranks)
    ]
    return reports, model


def tvor_scores(X: np.ndarray, ransac: bool = False, seed: SeedLike = 0, **ransac_kw) -> np.ndarray:
    """Scores only, for a ``(M, n)`` count matrix; used by the experiments."""
    sizes = X.sum(axis=1).astype(float)
    variations = np.abs(np.diff(X, axis=1)).sum(axis=1).astype(float)
    pts = np.column_stack([sizes, variations])
    model = fit_model_ransac(pts, seed=seed, **ransac_kw) if ransac else fit_model(pts)
    return np.abs(variations - model.predict(sizes)) / np.sqrt(sizes)


# ---------------------------------------------------------------------------
# Monte Carlo tables

@dataclass
class McTable:
    sizes: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    trials: np.ndarray
    source: str = ""
    base_seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        order = np.argsort(self.sizes)
        self.sizes = np.asarray(self.sizes, dtype=np.int64)[order]
        self.mean = np.asarray(self.mean, dtype=float)[order]
        self.std = np.asarray(self.std, dtype=float)[order]
        self.trials = np.asarray(self.trials, dtype=np.int64)[order]
        if np.unique(self.sizes).size != self.sizes.size:
            raise ValidationError("duplicate sizes in Monte Carlo table")

    def __len__(self):
        return int(self.sizes.size)

    def rows(self):
        return list(zip(self.sizes.tolist(), self.mean.tolist(),
                        self.std.tolist(), self.trials.tolist()))

    def lookup(self, N: int, extrapolate: bool = False) -> tuple[float, float]:
        """(mean, std) at size N, linear in sqrt(N) between rows."""
        hit = np.flatnonzero(self.sizes == N)
        if hit.size:
            k = hit[0]
            return float(self.mean[k]), float(self.std[k])
        if len(self) < 2:
            raise ValidationError(f"size {N} not in a single-row table")
        lo, hi = self.sizes[0], self.sizes[-1]
        if not lo <= N <= hi and not extrapolate:
            raise ValidationError(f"size {N} outside table range [{lo}, {hi}]")
        x = np.sqrt(self.sizes.astype(float))
        k = int(np.clip(np.searchsorted(x, math.sqrt(N)), 1, len(self) - 1))
        t = (math.sqrt(N) - x[k - 1]) / (x[k] - x[k - 1])
        mu = self.mean[k - 1] + t * (self.mean[k] - self.mean[k - 1])
        sd = self.std[k - 1] + t * (self.std[k] - self.std[k - 1])
        return float(mu), float(sd)


def build_mc_table(source, sizes: Sequence[int], trials: int, seed: SeedLike = 0,
                   label: str = "") -> McTable:
    """Mean and standard deviation of the DTV over ``trials`` random samples.

    ``source`` is a ``DistributionSpec`` (samples drawn from it) or a
    ``Histogram`` (samples drawn from its items without replacement).  Row k
    uses the stream ``seed.child(k)`` so rows can be computed in any order.
    """
    if trials < 2:
        raise ValidationError("a Monte Carlo table needs at least 2 trials per size")
    if isinstance(seed, np.random.Generator):
        raise ValidationError("build_mc_table needs a reproducible seed, not a Generator")
    root = seed if isinstance(seed, RngSeed) else RngSeed(int(seed or 0))
    pooled = isinstance(source, Histogram)
    if not pooled and not isinstance(source, DistributionSpec):
        raise ValidationError("source must be a DistributionSpec or a Histogram")
    sizes = [int(s) for s in sizes]
    if pooled:
        bad = [s for s in sizes if not 0 <= s <= source.N]
        if bad:
            raise ValidationError(f"sizes {bad} exceed the pooled histogram's {source.N} items")
    means, stds = [], []
    for k, size in enumerate(sizes):
        rng = root.child(k).generator()
        if pooled:
            X = rng.multivariate_hypergeometric(source.counts, size, size=trials)
        else:
            X = sample_many(source, size, trials, rng)
        v = np.abs(np.diff(X, axis=1)).sum(axis=1)
        means.append(v.mean())
        stds.append(v.std(ddof=1))
    src = label or (f"pooled:{source.label}" if pooled else f"spec:{source.kind}")
    return McTable(np.array(sizes), np.array(means), np.array(stds),
                   np.full(len(sizes), trials), src, root.base)


def score_d2(h, table: McTable, extrapolate: bool = False) -> float:
    """|dtv - mean_N| / std_N from a Monte Carlo table."""
    c = h.counts if isinstance(h, Histogram) else np.asarray(h)
    N = int(c.sum())
    mu, sd = table.lookup(N, extrapolate)
    if sd < MIN_SIGMA:
        raise DegenerateTableError(f"Monte Carlo std at N={N} is {sd:g}; cannot normalise")
    return abs(dtv(c) - mu) / sd


def run_mc_scores(histograms: Sequence[Histogram], table: McTable,
                  extrapolate: bool = False) -> list[ScoreReport]:
    scores, rows = [], []
    for h in histograms:
        mu, _ = table.lookup(h.N, extrapolate)
        s = score_d2(h, table, extrapolate)
        scores.append(s)
        rows.append((h, mu, s))
    ranks = descending_ranks(scores)
    return [ScoreReport(h.label, h.N, dtv(h), mu, s, int(r), "mc-d2")
            for (h, mu, s), r in zip(rows, ranks)]


def fit_stderr_model(table: McTable) -> float:
    """Coefficient s of std ~ s * sqrt(N), least squares through the origin."""
    if len(table) < 2:
        raise ValidationError("need at least two table rows")
    N = table.sizes.astype(float)
    if not np.any(N > 0):
        raise ValidationError("table has no positive sizes")
    return float(np.dot(table.std, np.sqrt(N)) / N.sum())
