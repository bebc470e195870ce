"""Synthetic mean-rank experiments and the census / partition pipelines."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .baseline import chi2_scores
from .errors import ValidationError
from .histogram import (CONTINUOUS_KINDS, Binning, DistributionSpec, Histogram,
                        RngSeed, apply_heaping)
from .model import (DtvModel, McTable, ScoreReport, build_mc_table,
                    descending_ranks, run_mc_scores, run_tvor, tvor_scores)

log = logging.getLogger(__name__)

METHODS = ("tvor", "tvor-ransac", "chi2", "random")


@dataclass
class ExperimentConfig:
    inlier: DistributionSpec
    outlier: DistributionSpec | None = None
    inlier_count: int = 100
    outlier_count: int = 1
    size_range: tuple[int, int] = (500, 1000)
    heaping_fraction: float = 0.0
    heaping_period: int = 5
    heaping_pick: str = "item"
    trials: int = 1000
    seed: int = 0
    methods: tuple[str, ...] = ("tvor", "chi2")
    ransac_threshold: float = 2.0
    ransac_iterations: int = 500
    threads: int = 1

    def __post_init__(self):
        if self.inlier_count < 1 or self.outlier_count < 1:
            raise ValidationError("inlier and outlier counts must be >= 1")
        lo, hi = self.size_range
        if not 1 <= lo <= hi:
            raise ValidationError(f"bad size range {self.size_range}")
        if self.trials < 1:
            raise ValidationError("trials must be >= 1")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValidationError(f"unknown methods {sorted(unknown)}")
        out = self.outlier_spec
        if out.n != self.inlier.n or out.binning != self.inlier.binning:
            raise ValidationError("inlier and outlier histograms must share the same bins")

    @property
    def outlier_spec(self) -> DistributionSpec:
        return self.outlier if self.outlier is not None else self.inlier

    @property
    def total(self) -> int:
        return self.inlier_count + self.outlier_count


@dataclass
class MeanRankResult:
    mean_rank: dict[str, float]
    ideal: float
    null: float
    trials: int
    per_trial: dict[str, np.ndarray] = field(repr=False, default_factory=dict)

    def stderr(self, method: str) -> float:
        x = self.per_trial[method]
        return float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else math.nan


def draw_histograms(spec: DistributionSpec, sizes: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One clamped histogram per entry of ``sizes`` as a ``(len(sizes), n)`` array."""
    n = spec.n
    if spec.kind in CONTINUOUS_KINDS:
        values = spec.draw_values(rng, int(sizes.sum()))
        idx = spec.binning.bin_indices(values)
        row = np.repeat(np.arange(sizes.size), sizes)
        flat = np.bincount(row * n + idx, minlength=sizes.size * n)
        return flat.reshape(sizes.size, n)
    p = spec.bin_probabilities()
    return np.vstack([rng.multinomial(int(s), p) for s in sizes])


def mean_outlier_rank(scores: np.ndarray, outlier_mask: np.ndarray) -> float:
    return float(descending_ranks(scores)[outlier_mask].mean())


def _score(method: str, X: np.ndarray, rng: np.random.Generator, cfg: ExperimentConfig) -> np.ndarray:
    if method == "tvor":
        return tvor_scores(X)
    if method == "tvor-ransac":
        return tvor_scores(X, ransac=True, seed=rng, threshold=cfg.ransac_threshold,
                           iterations=cfg.ransac_iterations)
    if method == "chi2":
        return chi2_scores(X)
    return rng.random(X.shape[0])


def _trial(cfg: ExperimentConfig, trial: int) -> dict[str, float]:
    rng = RngSeed(cfg.seed).child(trial).generator()
    lo, hi = cfg.size_range
    sizes_in = rng.integers(lo, hi + 1, cfg.inlier_count)
    sizes_out = rng.integers(lo, hi + 1, cfg.outlier_count)
    X_in = draw_histograms(cfg.inlier, sizes_in, rng)
    X_out = draw_histograms(cfg.outlier_spec, sizes_out, rng)
    if cfg.heaping_fraction > 0:
        X_out = np.vstack([
            apply_heaping(Histogram(row), cfg.heaping_fraction, cfg.heaping_period,
                          rng, cfg.heaping_pick).counts
            for row in X_out
        ])
    X = np.vstack([X_in, X_out])
    mask = np.zeros(cfg.total, dtype=bool)
    mask[cfg.inlier_count:] = True
    return {m: mean_outlier_rank(_score(m, X, rng, cfg), mask) for m in cfg.methods}


def _run(cfg: ExperimentConfig) -> MeanRankResult:
    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as pool:
            results = list(pool.map(lambda t: _trial(cfg, t), range(cfg.trials)))
    else:
        results = [_trial(cfg, t) for t in range(cfg.trials)]
    per_trial = {m: np.array([r[m] for r in results]) for m in cfg.methods}
    return MeanRankResult(
        {m: float(v.mean()) for m, v in per_trial.items()},
        ideal=(cfg.outlier_count - 1) / 2,
        null=(cfg.total - 1) / 2,
        trials=cfg.trials,
        per_trial=per_trial,
    )


def run_distribution_experiment(cfg: ExperimentConfig) -> MeanRankResult:
    """Inliers and outliers from different distributions over the same bins."""
    if cfg.outlier is None:
        raise ValidationError("a distribution experiment needs an outlier distribution")
    return _run(cfg)


def run_heaping_experiment(cfg: ExperimentConfig) -> MeanRankResult:
    """Outliers share the inlier distribution but are passed through heaping."""
    if cfg.outlier is not None and cfg.outlier != cfg.inlier:
        raise ValidationError("heaping outliers are drawn from the inlier distribution")
    return _run(cfg)


# ---------------------------------------------------------------------------
# census lists

def per_value_binning(value_lists: Sequence[Sequence[int]]) -> Binning:
    non_empty = [np.asarray(v) for v in value_lists if len(v)]
    if not non_empty:
        raise ValidationError("no values to bin")
    lo = min(int(v.min()) for v in non_empty)
    hi = max(int(v.max()) for v in non_empty)
    return Binning(lo, hi, per_value=True)


def score_distribution(scores, bins: int = 50) -> list[tuple[float, float, int]]:
    counts, edges = np.histogram(np.asarray(scores, dtype=float), bins=bins)
    return [(float(a), float(b), int(c)) for a, b, c in zip(edges[:-1], edges[1:], counts)]


@dataclass
class CensusResult:
    reports: list[ScoreReport]
    model: DtvModel
    binning: Binning
    mc_reports: list[ScoreReport] | None = None
    mc_table: McTable | None = None

    def ranked(self, which: str = "d1") -> list[ScoreReport]:
        reps = self.reports if which == "d1" else self.mc_reports
        return sorted(reps, key=lambda r: r.rank)

    def plot_rows(self) -> list[tuple]:
        return [(r.label, r.N, r.dtv, r.predicted) for r in self.reports]

    def score_table(self, bins: int = 50):
        return score_distribution([r.score for r in self.reports], bins)


def _clean_lists(lists: Mapping[str, Sequence[int]]) -> dict[str, np.ndarray]:
    out = {}
    for label, values in lists.items():
        v = np.asarray(values)
        if v.size == 0:
            log.warning("skipping empty list %s", label)
            continue
        out[label] = v
    if len(out) < 2:
        raise ValidationError("the census pipeline needs at least two non-empty lists")
    return out


def mc_sizes_for(sizes: Sequence[int], cap: int, points: int = 40) -> np.ndarray:
    """Geometric grid of table sizes covering ``sizes`` (limited to ``cap``)."""
    lo = max(1, int(min(sizes)))
    hi = min(int(max(sizes)), cap)
    if hi <= lo:
        return np.array([min(lo, cap)])
    grid = np.unique(np.round(np.geomspace(lo, hi, points)).astype(np.int64))
    return grid


def run_census_pipeline(lists: Mapping[str, Sequence[int]], reference: Sequence[int] | None = None,
                        ransac: bool = False, mc_trials: int = 1000, mc_sizes=None,
                        seed: int = 0) -> CensusResult:
    """Score per-list birth-year histograms (one bin per year).

    With a ``reference`` sample (a large census) the lists are also scored
    with d'' against a Monte Carlo table of reference subsamples; reference
    values outside the lists' year range are dropped.
    """
    clean = _clean_lists(lists)
    binning = per_value_binning(list(clean.values()))
    hists = [binning.histogram(v, label) for label, v in clean.items()]
    reports, model = run_tvor(hists, ransac=ransac, seed=seed)
    result = CensusResult(reports, model, binning)
    if reference is not None:
        ref = binning.histogram(reference, "reference", out_of_range="discard")
        sizes = mc_sizes if mc_sizes is not None else mc_sizes_for([h.N for h in hists], ref.N)
        table = build_mc_table(ref, sizes, mc_trials, RngSeed(seed, 1))
        result.mc_table = table
        result.mc_reports = run_mc_scores(hists, table, extrapolate=True)
    return result


def run_partition_analysis(lists: Mapping[str, Sequence[int]], target: str,
                           groups: Sequence | Callable, ransac: bool = False,
                           seed: int = 0) -> tuple[list[ScoreReport], list[ScoreReport]]:
    """Split one list by group, add the parts to the set, and rescore.

    ``groups`` gives the group of every value of ``lists[target]`` (a parallel
    sequence, or a function of the value index).  Returns all reports and the
    reports for the group histograms, labelled ``"<target>:<group>"``.
    """
    if target not in lists:
        raise ValidationError(f"unknown target list {target!r}")
    values = np.asarray(lists[target])
    labels = [groups(i) for i in range(values.size)] if callable(groups) else list(groups)
    if len(labels) != values.size:
        raise ValidationError("one group label per value is required")
    parts: dict[str, list] = {}
    for v, g in zip(values.tolist(), labels):
        parts.setdefault(str(g), []).append(v)
    extended = dict(_clean_lists(lists))
    group_labels = []
    for g, vals in parts.items():
        name = f"{target}:{g}"
        if name in extended:
            raise ValidationError(f"group label collides with list {name!r}")
        extended[name] = np.asarray(vals)
        group_labels.append(name)
    binning = per_value_binning(list(extended.values()))
    hists = [binning.histogram(v, label) for label, v in extended.items()]
    reports, _ = run_tvor(hists, ransac=ransac, seed=seed)
    wanted = set(group_labels)
    return reports, [r for r in reports if r.label in wanted]
