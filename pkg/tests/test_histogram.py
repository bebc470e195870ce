import itertools
import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tvor.errors import ValidationError
from tvor.histogram import (Binning, DistributionSpec, Histogram, RngSeed,
                            apply_heaping, circular_dtv, dtv, heaping_targets,
                            sample, subsample)

counts_st = st.lists(st.integers(0, 50), min_size=1, max_size=30)
counts2_st = st.lists(st.integers(0, 50), min_size=2, max_size=30)


@pytest.mark.parametrize("counts,expected", [([3, 1, 4], 5), ([5, 5, 5, 5], 0), ([0, 10, 0, 10], 30), ([7], 0)])
def test_dtv_examples(counts, expected):
    assert dtv(Histogram(counts)) == expected


@pytest.mark.parametrize("counts,expected", [([3, 1, 4], 6), ([5, 5, 5], 0), ([1, 0, 0], 2)])
def test_circular_dtv_examples(counts, expected):
    assert circular_dtv(counts) == expected


def test_circular_dtv_needs_two_bins():
    with pytest.raises(ValidationError):
        circular_dtv([4])


def test_histogram_rejects_bad_counts():
    with pytest.raises(ValidationError):
        Histogram([1, -1])
    with pytest.raises(ValidationError):
        Histogram([1.5, 2])
    with pytest.raises(ValidationError):
        Histogram([])


@given(counts_st)
def test_dtv_bounded_and_reversal_invariant(counts):
    h = Histogram(counts)
    assert 0 <= dtv(h) <= 2 * h.N
    assert dtv(h) == dtv(counts[::-1])


@given(counts2_st, st.integers(0, 29))
def test_circular_dtv_properties(counts, shift):
    c = circular_dtv(counts)
    assert c >= dtv(counts)
    assert c % 2 == 0
    k = shift % len(counts)
    assert circular_dtv(counts[k:] + counts[:k]) == c


def test_rng_seed_reproducible_and_distinct():
    a = RngSeed(7, 3).generator().integers(0, 1 << 30, 5)
    b = RngSeed(7, 3).generator().integers(0, 1 << 30, 5)
    c = RngSeed(7, 4).generator().integers(0, 1 << 30, 5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert RngSeed(7, 3).child(1) == RngSeed(7, 3).child(1)
    assert RngSeed(7, 3).child(1) != RngSeed(7, 3).child(2)


# --- distributions -----------------------------------------------------------

SPECS = [
    DistributionSpec.uniform(7),
    DistributionSpec.triangular(9),
    DistributionSpec.normal(1.0, 5, 10),
    DistributionSpec.normal(0.5, 1, 12),
    DistributionSpec.beta_dist(2, 3, 100),
    DistributionSpec("square", n=20),
    DistributionSpec("square-root", n=20),
    DistributionSpec("geometric", {"p": 0.3}),
    DistributionSpec("geometric", {"p": 0.3}, n=6),
    DistributionSpec("poisson", {"lam": 4.5}),
    DistributionSpec("binomial", {"trials": 12}),
    DistributionSpec.explicit([0.2, 0.5, 0.3]),
]


@pytest.mark.parametrize("spec", SPECS, ids=lambda s: s.kind)
def test_bin_probabilities_sum_to_one(spec):
    p = spec.bin_probabilities()
    assert p.size == spec.n
    assert np.all(p >= 0)
    assert abs(p.sum() - 1) < 1e-12


def test_invalid_specs_rejected():
    with pytest.raises(ValidationError):
        DistributionSpec.normal(0.0, 5, 10)
    with pytest.raises(ValidationError):
        DistributionSpec("beta", {"alpha": -1, "beta": 2}, n=5)
    with pytest.raises(ValidationError):
        DistributionSpec("nope", n=3)
    with pytest.raises(ValidationError):
        DistributionSpec.explicit([0.5, 0.6])


def test_sample_zero_size():
    h = sample(DistributionSpec.normal(1, 5, 10), 0, RngSeed(1))
    assert h.counts.tolist() == [0] * 10


def test_sample_uniform_concentration():
    size, n = 10 ** 6, 4
    h = sample(DistributionSpec.uniform(n), size, RngSeed(11))
    sigma = math.sqrt(size * 0.25 * 0.75)
    assert h.N == size
    assert np.all(np.abs(h.counts - size / 4) < 5 * sigma)


def _normal_cdf(x, sigma=1.0):
    return 0.5 * (1 + math.erf(x / (sigma * math.sqrt(2))))


def test_sample_normal_matches_cdf_differences():
    c, n, size = 5.0, 10, 10 ** 5
    edges = [-c + 2 * c * k / n for k in range(n + 1)]
    cdf = [0.0] + [_normal_cdf(e) for e in edges[1:-1]] + [1.0]
    p = np.diff(cdf)
    spec = DistributionSpec.normal(1.0, c, n)
    assert np.allclose(spec.bin_probabilities(), p, atol=1e-15)
    h = sample(spec, size, RngSeed(5))
    tol = 5 * np.sqrt(p * (1 - p) / size)
    assert np.all(np.abs(h.counts / size - p) <= tol + 1e-12)


def test_sample_clamps_out_of_range_values():
    spec = DistributionSpec.normal(10.0, 1, 4)
    h = sample(spec, 1000, RngSeed(2))
    assert h.N == 1000
    # most mass sits far outside [-1, 1] and lands in the end bins
    assert h.counts[0] + h.counts[-1] > 800
    d = sample(spec, 1000, RngSeed(2), out_of_range="discard")
    assert d.N < 300


def test_binning_edges_and_per_value():
    b = Binning(0, 1, 4)
    assert b.bin_indices([0, 0.25, 0.999, 1.0]).tolist() == [0, 1, 3, 3]
    years = Binning(1850, 1945, per_value=True)
    assert years.n == 96
    assert years.bin_indices([1850, 1900, 1945]).tolist() == [0, 50, 95]


# --- subsampling -------------------------------------------------------------

def test_subsample_endpoints():
    h = Histogram([3, 0, 5, 2], "x")
    assert subsample(h, h.N, RngSeed(1)).counts.tolist() == [3, 0, 5, 2]
    assert subsample(h, 0, RngSeed(1)).counts.tolist() == [0, 0, 0, 0]
    with pytest.raises(ValidationError):
        subsample(h, h.N + 1, RngSeed(1))


def _hypergeometric_oracle(counts, size):
    items = [b for b, c in enumerate(counts) for _ in range(c)]
    outcomes = Counter()
    combos = list(itertools.combinations(range(len(items)), size))
    for combo in combos:
        out = [0] * len(counts)
        for i in combo:
            out[items[i]] += 1
        outcomes[tuple(out)] += 1
    return {k: v / len(combos) for k, v in outcomes.items()}


def test_subsample_frequencies_match_hypergeometric():
    expected = _hypergeometric_oracle([2, 2], 2)
    assert expected == pytest.approx({(2, 0): 1 / 6, (1, 1): 4 / 6, (0, 2): 1 / 6})
    trials = 10 ** 5
    rng = RngSeed(3).generator()
    got = Counter(tuple(subsample(Histogram([2, 2]), 2, rng).counts.tolist()) for _ in range(trials))
    for k, p in expected.items():
        sd = math.sqrt(p * (1 - p) / trials)
        assert abs(got[k] / trials - p) <= 3 * sd


def test_nested_subsample_matches_direct():
    h = Histogram([2, 1, 2])
    expected = _hypergeometric_oracle([2, 1, 2], 2)
    trials = 40000
    rng = RngSeed(9).generator()
    got = Counter(
        tuple(subsample(subsample(h, 4, rng), 2, rng).counts.tolist()) for _ in range(trials)
    )
    for k, p in expected.items():
        sd = math.sqrt(p * (1 - p) / trials)
        assert abs(got[k] / trials - p) <= 4 * sd


# --- heaping -----------------------------------------------------------------

def test_heaping_targets_nearest_multiple():
    t = heaping_targets(12, 5) + 1
    assert t.tolist() == [5, 5, 5, 5, 5, 5, 5, 10, 10, 10, 10, 10]
    # equidistant from 2 and 4 -> lower ordinal
    assert (heaping_targets(4, 2) + 1).tolist() == [2, 2, 2, 4]
    assert heaping_targets(3, 5).tolist() == [0, 1, 2]


def test_heaping_zero_fraction_is_identity():
    h = Histogram([4, 5, 6, 7, 8, 9])
    assert apply_heaping(h, 0.0, 5, RngSeed(1)).counts.tolist() == h.counts.tolist()


def test_heaping_no_op_when_mass_on_targets():
    h = Histogram([0, 0, 0, 0, 9, 0, 0, 0, 0, 4])
    for pick in ("item", "bin"):
        assert apply_heaping(h, 1.0, 5, RngSeed(4), pick).counts.tolist() == h.counts.tolist()


def test_heaping_empty_histogram():
    h = Histogram([0, 0, 0])
    assert apply_heaping(h, 0.5, 5, RngSeed(1)).N == 0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 40), min_size=1, max_size=40),
       st.floats(0, 1), st.integers(1, 7), st.integers(0, 2 ** 32), st.sampled_from(["item", "bin"]))
def test_heaping_conserves_and_feeds_targets(counts, fraction, period, seed, pick):
    h = Histogram(counts)
    out = apply_heaping(h, fraction, period, RngSeed(seed), pick)
    assert out.N == h.N
    targets = np.unique(heaping_targets(h.n, period))
    assert np.all(out.counts[targets] >= h.counts[targets])
    moved = out.counts - h.counts
    assert np.all(moved[np.setdiff1d(np.arange(h.n), targets)] <= 0)


def _sequential_heaping(counts, fraction, period, rng):
    """Literal item-by-item process: pick an item uniformly, move it to its target."""
    items = [b for b, c in enumerate(counts) for _ in range(c)]
    targets = heaping_targets(len(counts), period)
    for _ in range(int(math.floor(fraction * len(items) + 1e-9))):
        i = rng.integers(len(items))
        items[i] = int(targets[items[i]])
    return np.bincount(items, minlength=len(counts))


def test_item_heaping_matches_sequential_process_in_distribution():
    counts = [3, 2, 0, 1, 4, 2, 1]
    trials = 20000
    rng = RngSeed(21).generator()
    fast = Counter(tuple(apply_heaping(Histogram(counts), 0.5, 5, rng).counts.tolist())
                   for _ in range(trials))
    slow = Counter(tuple(_sequential_heaping(counts, 0.5, 5, rng).tolist()) for _ in range(trials))
    for key in set(fast) | set(slow):
        p = (fast[key] + slow[key]) / (2 * trials)
        sd = math.sqrt(2 * p * (1 - p) / trials)
        assert abs(fast[key] - slow[key]) / trials <= 5 * sd + 1e-9
