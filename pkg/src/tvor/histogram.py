"""Histograms over shared bins, their discrete total variation, and sampling.

Every random operation takes a seed (``RngSeed``, a plain int, or an existing
``numpy.random.Generator``).  Seeds are expanded with numpy's ``SeedSequence``
into a ``PCG64`` stream, so a given ``(base, stream)`` pair reproduces the same
draws on every platform and regardless of how work is split across threads.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np
from scipy import stats

from .errors import ValidationError

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngSeed:
    base: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence([self.base & _MASK64, self.stream & _MASK64])
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, index: int) -> "RngSeed":
        """Derive an independent stream for sub-task ``index``."""
        mixed = np.random.SeedSequence(
            [self.stream & _MASK64, index & _MASK64]
        ).generate_state(1, np.uint64)[0]
        return RngSeed(self.base, int(mixed))


SeedLike = Union[RngSeed, int, np.random.Generator, None]


def as_generator(seed: SeedLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, RngSeed):
        return seed.generator()
    if seed is None:
        return np.random.default_rng()
    return RngSeed(int(seed)).generator()


class Histogram:
    """Non-negative integer bin counts with an optional label."""

    __slots__ = ("counts", "label")

    def __init__(self, counts, label: str | None = None):
        arr = np.asarray(counts)
        if arr.ndim != 1 or arr.size < 1:
            raise ValidationError("a histogram needs a 1-d sequence of at least one count")
        if arr.dtype.kind == "f":
            if not np.all(np.isfinite(arr)) or np.any(arr != np.round(arr)):
                raise ValidationError("histogram counts must be integers")
        elif arr.dtype.kind not in "iub":
            raise ValidationError("histogram counts must be integers")
        arr = arr.astype(np.int64)
        if np.any(arr < 0):
            raise ValidationError("histogram counts must be non-negative")
        arr.setflags(write=False)
        self.counts = arr
        self.label = label

    @property
    def N(self) -> int:
        return int(self.counts.sum())

    @property
    def n(self) -> int:
        return int(self.counts.size)

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, Histogram):
            return NotImplemented
        return self.label == other.label and np.array_equal(self.counts, other.counts)

    def __repr__(self):
        return f"Histogram({self.counts.tolist()!r}, label={self.label!r})"

    def with_counts(self, counts) -> "Histogram":
        return Histogram(counts, self.label)


def _counts(h) -> np.ndarray:
    if isinstance(h, Histogram):
        return h.counts
    return Histogram(h).counts


def dtv(h) -> int:
    """Sum of absolute differences between neighbouring bins."""
    c = _counts(h)
    return int(np.abs(np.diff(c)).sum())


def circular_dtv(h) -> int:
    """``dtv`` plus the wrap-around term between the last and first bin."""
    c = _counts(h)
    if c.size < 2:
        raise ValidationError("circular variation needs at least two bins")
    return dtv(c) + int(abs(c[0] - c[-1]))


# ---------------------------------------------------------------------------
# binning and distributions

@dataclass(frozen=True)
class Binning:
    """Equal-width bins over ``[lo, hi]``, or one bin per integer value.

    With ``per_value=True`` the bins are the integers ``lo..hi`` inclusive and
    ``n`` is derived.  Otherwise ``n`` bins of width ``(hi - lo) / n`` are used
    and ``hi`` itself falls into the last bin.
    """

    lo: float
    hi: float
    n: int = 0
    per_value: bool = False

    def __post_init__(self):
        if self.per_value:
            if int(self.lo) != self.lo or int(self.hi) != self.hi:
                raise ValidationError("per-value binning needs integer bounds")
            object.__setattr__(self, "n", int(self.hi) - int(self.lo) + 1)
        if not self.hi >= self.lo or (not self.per_value and self.hi == self.lo):
            raise ValidationError(f"empty binning interval [{self.lo}, {self.hi}]")
        if self.n < 1:
            raise ValidationError("binning needs at least one bin")

    def edges(self) -> np.ndarray:
        if self.per_value:
            return np.arange(self.n + 1) + self.lo - 0.5
        return np.linspace(self.lo, self.hi, self.n + 1)

    def bin_indices(self, values, out_of_range: str = "clamp") -> np.ndarray:
        """Map values to 0-based bin indices.

        ``out_of_range="clamp"`` sends values outside the interval to the
        nearest end bin; ``"discard"`` drops them.
        """
        v = np.asarray(values, dtype=float)
        if self.per_value:
            idx = np.floor(v - self.lo + 0.5).astype(np.int64)
        else:
            width = (self.hi - self.lo) / self.n
            idx = np.floor((v - self.lo) / width).astype(np.int64)
            idx[v == self.hi] = self.n - 1
        if out_of_range == "clamp":
            return np.clip(idx, 0, self.n - 1)
        if out_of_range == "discard":
            return idx[(idx >= 0) & (idx < self.n)]
        raise ValidationError(f"unknown out_of_range policy {out_of_range!r}")

    def histogram(self, values, label=None, out_of_range: str = "clamp") -> Histogram:
        idx = self.bin_indices(values, out_of_range)
        return Histogram(np.bincount(idx, minlength=self.n), label)


CONTINUOUS_KINDS = ("uniform", "triangular", "normal", "beta")
DISCRETE_KINDS = ("square", "square-root", "geometric", "poisson", "binomial", "explicit")
KINDS = CONTINUOUS_KINDS + DISCRETE_KINDS

DEFAULT_TAIL_EPS = 1e-12


@dataclass(frozen=True)
class DistributionSpec:
    """A named distribution together with the bins it is counted into.

    Continuous kinds (uniform, triangular, normal, beta) are binned with
    ``binning``; values outside the interval land in the end bins.  Discrete
    kinds define one bin per support point.  Geometric and Poisson supports
    are unbounded: unless ``n`` is given they are cut where the CDF first
    reaches ``1 - tail_eps``, and the last bin absorbs the remaining tail.

    Parameters per kind::

        uniform      -
        triangular   mode (default: middle of the binning interval)
        normal       mean (0), sigma (1)
        beta         alpha, beta
        square       p_i proportional to i**2, i = 1..n
        square-root  p_i proportional to sqrt(i), i = 1..n
        geometric    p; support 1, 2, ...
        poisson      lam; support 0, 1, ...
        binomial     trials, p (0.5); support 0..trials
        explicit     probs
    """

    kind: str
    params: Mapping[str, float] = field(default_factory=dict)
    binning: Binning | None = None
    n: int | None = None
    probs: tuple[float, ...] | None = None
    tail_eps: float = DEFAULT_TAIL_EPS

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown distribution kind {self.kind!r}")
        object.__setattr__(self, "params", dict(self.params))
        p = self.params
        if self.kind in CONTINUOUS_KINDS:
            if self.binning is None:
                lo, hi = (-5.0, 5.0) if self.kind == "normal" else (0.0, 1.0)
                if self.n is None:
                    raise ValidationError(f"{self.kind} needs a binning or a bin count n")
                object.__setattr__(self, "binning", Binning(lo, hi, self.n))
            object.__setattr__(self, "n", self.binning.n)
        if self.kind == "normal" and p.get("sigma", 1.0) <= 0:
            raise ValidationError("normal sigma must be positive")
        if self.kind == "beta" and (p.get("alpha", 0) <= 0 or p.get("beta", 0) <= 0):
            raise ValidationError("beta alpha and beta must be positive")
        if self.kind == "triangular":
            b = self.binning
            mode = p.get("mode", (b.lo + b.hi) / 2)
            if not b.lo <= mode <= b.hi:
                raise ValidationError("triangular mode must lie inside the binning interval")
        if self.kind == "geometric" and not 0 < p.get("p", 0) <= 1:
            raise ValidationError("geometric p must be in (0, 1]")
        if self.kind == "poisson" and p.get("lam", 0) <= 0:
            raise ValidationError("poisson lam must be positive")
        if self.kind == "binomial":
            trials = int(p.get("trials", -1))
            if trials < 0 or not 0 <= p.get("p", 0.5) <= 1:
                raise ValidationError("binomial needs trials >= 0 and p in [0, 1]")
            object.__setattr__(self, "n", trials + 1)
        if self.kind == "explicit":
            if self.probs is None:
                raise ValidationError("explicit spec needs probs")
            pr = np.asarray(self.probs, dtype=float)
            if pr.ndim != 1 or pr.size < 1 or np.any(pr < 0) or abs(pr.sum() - 1) > 1e-9:
                raise ValidationError("explicit probs must be non-negative and sum to 1")
            object.__setattr__(self, "probs", tuple(float(x) for x in pr))
            object.__setattr__(self, "n", pr.size)
        if self.kind in ("square", "square-root") and (self.n is None or self.n < 1):
            raise ValidationError(f"{self.kind} needs a bin count n")
        if self.kind in ("geometric", "poisson") and self.n is None:
            object.__setattr__(self, "n", self._truncation_bins())

    # convenience constructors used throughout the experiments
    @classmethod
    def normal(cls, sigma: float, c: float, n: int, mean: float = 0.0):
        return cls("normal", {"mean": mean, "sigma": sigma}, Binning(-c, c, n))

    @classmethod
    def beta_dist(cls, alpha: float, beta: float, n: int, lo=0.0, hi=1.0):
        return cls("beta", {"alpha": alpha, "beta": beta}, Binning(lo, hi, n))

    @classmethod
    def triangular(cls, n: int, lo=0.0, hi=1.0, mode=None):
        params = {} if mode is None else {"mode": mode}
        return cls("triangular", params, Binning(lo, hi, n))

    @classmethod
    def uniform(cls, n: int, lo=0.0, hi=1.0):
        return cls("uniform", {}, Binning(lo, hi, n))

    @classmethod
    def explicit(cls, probs: Sequence[float]):
        return cls("explicit", probs=tuple(probs))

    def _truncation_bins(self) -> int:
        target = 1.0 - self.tail_eps
        if self.kind == "geometric":
            q = 1.0 - self.params["p"]
            if q == 0:
                return 1
            # P(X <= k) = 1 - q**k
            return max(1, math.ceil(math.log(self.tail_eps) / math.log(q)))
        lam = self.params["lam"]
        return int(stats.poisson.ppf(target, lam)) + 1

    def _continuous_cdf(self, x: np.ndarray) -> np.ndarray:
        p, b = self.params, self.binning
        if self.kind == "uniform":
            return np.clip((x - b.lo) / (b.hi - b.lo), 0.0, 1.0)
        if self.kind == "normal":
            return stats.norm.cdf(x, loc=p.get("mean", 0.0), scale=p.get("sigma", 1.0))
        if self.kind == "beta":
            return stats.beta.cdf(x, p["alpha"], p["beta"])
        mode = p.get("mode", (b.lo + b.hi) / 2)
        return stats.triang.cdf(x, (mode - b.lo) / (b.hi - b.lo), loc=b.lo, scale=b.hi - b.lo)

    def bin_probabilities(self) -> np.ndarray:
        """Probability of each bin under clamping; sums to 1."""
        n = self.n
        if self.kind in CONTINUOUS_KINDS:
            if self.kind == "uniform":
                return np.full(n, 1.0 / n)
            inner = self._continuous_cdf(self.binning.edges()[1:-1])
            cdf = np.concatenate(([0.0], inner, [1.0]))
            return np.diff(cdf)
        if self.kind == "explicit":
            return np.asarray(self.probs, dtype=float)
        i = np.arange(1, n + 1, dtype=float)
        if self.kind == "square":
            w = i ** 2
            return w / w.sum()
        if self.kind == "square-root":
            w = np.sqrt(i)
            return w / w.sum()
        if self.kind == "binomial":
            return stats.binom.pmf(np.arange(n), n - 1, self.params.get("p", 0.5))
        if self.kind == "geometric":
            pr = stats.geom.pmf(i, self.params["p"])
            pr[-1] = stats.geom.sf(n - 1, self.params["p"])
            return pr
        pr = stats.poisson.pmf(np.arange(n), self.params["lam"])
        pr[-1] = stats.poisson.sf(n - 2, self.params["lam"])
        return pr

    def draw_values(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Raw (unbinned) draws for continuous kinds."""
        p, b = self.params, self.binning
        if self.kind == "uniform":
            return rng.uniform(b.lo, b.hi, size)
        if self.kind == "normal":
            return rng.normal(p.get("mean", 0.0), p.get("sigma", 1.0), size)
        if self.kind == "beta":
            return rng.beta(p["alpha"], p["beta"], size)
        if self.kind == "triangular":
            return rng.triangular(b.lo, p.get("mode", (b.lo + b.hi) / 2), b.hi, size)
        raise ValidationError(f"{self.kind} has no continuous values to draw")


def sample(spec: DistributionSpec, size: int, seed: SeedLike = None,
           out_of_range: str = "clamp", label=None) -> Histogram:
    """Histogram of ``size`` i.i.d. draws from ``spec``.

    Continuous kinds draw raw values and bin them, so ``out_of_range`` applies
    (with ``"discard"`` the result may hold fewer than ``size`` items).
    Discrete kinds are drawn directly as a multinomial over their bins.
    """
    if size < 0:
        raise ValidationError("sample size must be non-negative")
    rng = as_generator(seed)
    if spec.kind in CONTINUOUS_KINDS:
        values = spec.draw_values(rng, size)
        return spec.binning.histogram(values, label, out_of_range)
    return Histogram(rng.multinomial(size, spec.bin_probabilities()), label)


def sample_many(spec: DistributionSpec, size: int, count: int,
                seed: SeedLike = None) -> np.ndarray:
    """``count`` clamped samples of equal size as a ``(count, n)`` array.

    Uses the multinomial over the bin probabilities, which has the same
    distribution as drawing values and clamping them.
    """
    rng = as_generator(seed)
    return rng.multinomial(size, spec.bin_probabilities(), size=count)


def subsample(h: Histogram, size: int, seed: SeedLike = None) -> Histogram:
    """Draw ``size`` items without replacement from the histogram's items."""
    c = _counts(h)
    total = int(c.sum())
    if not 0 <= size <= total:
        raise ValidationError(f"subsample size {size} outside [0, {total}]")
    rng = as_generator(seed)
    out = rng.multivariate_hypergeometric(c, size)
    return Histogram(out, getattr(h, "label", None))


def heaping_targets(n: int, period: int) -> np.ndarray:
    """0-based index of the nearest bin whose 1-based ordinal divides by ``period``.

    Equidistant bins go to the lower ordinal.  When no ordinal in ``1..n`` is
    a multiple of ``period`` every bin maps to itself.
    """
    if period < 1:
        raise ValidationError("target period must be >= 1")
    multiples = np.arange(period, n + 1, period)
    ordinals = np.arange(1, n + 1)
    if multiples.size == 0:
        return ordinals - 1
    dist = np.abs(ordinals[:, None] - multiples[None, :])
    # argmin returns the first minimum, i.e. the lower ordinal on ties
    return multiples[np.argmin(dist, axis=1)] - 1


def apply_heaping(h: Histogram, fraction: float, target_period: int = 5,
                  seed: SeedLike = None, pick: str = "item") -> Histogram:
    """Move ``floor(fraction * N)`` randomly picked items to heaping bins.

    Each move takes one item out of its bin and puts it into the nearest bin
    whose 1-based ordinal is a multiple of ``target_period``.  With
    ``pick="item"`` the source is an item chosen uniformly (so a bin is chosen
    in proportion to its count); picking an item that already sits in a
    target bin is a no-op.  ``pick="bin"`` chooses uniformly among the
    non-empty bins instead.
    """
    if not 0 <= fraction <= 1:
        raise ValidationError("heaping fraction must be in [0, 1]")
    c = _counts(h).copy()
    total = int(c.sum())
    targets = heaping_targets(c.size, target_period)
    moves = int(math.floor(fraction * total + 1e-9))
    label = getattr(h, "label", None)
    if moves == 0 or total == 0:
        return Histogram(c, label)
    rng = as_generator(seed)

    if pick == "item":
        # An item only moves the first time it is picked: afterwards it sits
        # in a target bin.  So the result depends only on the set of distinct
        # items hit by `moves` uniform picks with replacement.
        picked = np.unique(rng.integers(0, total, size=moves))
        src = np.searchsorted(np.cumsum(c), picked, side="right")
        src = src[targets[src] != src]
        np.subtract.at(c, src, 1)
        np.add.at(c, targets[src], 1)
    elif pick == "bin":
        for _ in range(moves):
            nonempty = np.flatnonzero(c)
            b = nonempty[rng.integers(nonempty.size)]
            t = targets[b]
            if t != b:
                c[b] -= 1
                c[t] += 1
    else:
        raise ValidationError(f"unknown pick mode {pick!r}")
    return Histogram(c, label)
