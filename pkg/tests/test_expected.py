import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tvor.errors import OracleLimitError, ValidationError
from tvor.expected import (approximation_error_grid, closed_form_dtv, expected_dtv,
                           f2_exact, f_asymptotic, f_circular, f_exact, f_oracle,
                           hypothesis_checks, jensen_upper_bound, nonuniform_upper_bound,
                           theoretical_dtv)
from tvor.histogram import DistributionSpec, RngSeed, sample_many


def test_f2_small_values():
    assert f2_exact(0) == 0
    assert f2_exact(1) == pytest.approx(1.0)
    assert f2_exact(1, exact=True) == 1
    # N=2: outcomes (2,0),(1,1),(0,2) with DTV 2,0,2 and probs 1/4,1/2,1/4
    assert f2_exact(2, exact=True) == Fraction(1)


@pytest.mark.parametrize("N,value", [(100, 7.95892), (1000, 25.2250)])
def test_f2_table_values(N, value):
    assert f2_exact(N) == pytest.approx(value, abs=5e-4)


def test_f2_large_N_is_finite():
    v = f2_exact(10 ** 7)
    assert v == pytest.approx(math.sqrt(2 / math.pi) * math.sqrt(10 ** 7), rel=1e-6)


def test_f2_equal_neighbours_exact():
    for r in range(1, 41):
        assert f2_exact(2 * r, exact=True) == f2_exact(2 * r - 1, exact=True)


def test_f2_float_matches_exact_fraction():
    for N in (1, 2, 7, 30, 151):
        assert f2_exact(N) == pytest.approx(float(f2_exact(N, exact=True)), rel=1e-12)


def test_f_exact_dispatches_two_bins():
    for N in (0, 1, 5, 64, 999, 10 ** 4):
        assert f_exact(2, N) == pytest.approx(f2_exact(N), rel=1e-12)


def test_f_exact_rejects_one_bin():
    with pytest.raises(ValidationError):
        f_exact(1, 10)


@pytest.mark.parametrize("n,N,value", [(3, 1, 4 / 3), (4, 100, 16.9045), (50, 1000, 246.522)])
def test_f_exact_examples(n, N, value):
    assert f_exact(n, N) == pytest.approx(value, abs=5e-4)


def test_f_asymptotic_examples():
    assert f_asymptotic(2, 100) == pytest.approx(7.97885, abs=5e-4)
    assert f_asymptotic(10, 1000) == pytest.approx(101.554, abs=5e-4)
    for N in (1, 17, 400):
        assert f_asymptotic(2, N) == pytest.approx(math.sqrt(2 / math.pi) * math.sqrt(N), rel=1e-14)


def test_f_circular_examples():
    assert f_circular(3, 1) == pytest.approx(2.0, rel=1e-12)
    assert f_circular(2, 100) == pytest.approx(15.91784, abs=1e-3)
    assert f_circular(4, 100) == pytest.approx(22.5393, abs=1e-3)


def test_f_oracle_examples():
    assert f_oracle(2, 1) == pytest.approx(1.0)
    # hand enumeration of the 6 trinomial outcomes:
    # DTV {[2,0,0]:2, [0,2,0]:4, [0,0,2]:2, [1,1,0]:1, [1,0,1]:2, [0,1,1]:1}
    # probs {1/9, 1/9, 1/9, 2/9, 2/9, 2/9}  ->  8/9 + 8/9
    assert f_oracle(3, 2) == pytest.approx(16 / 9, rel=1e-15)
    assert f_oracle(4, 6) == pytest.approx(f_exact(4, 6), rel=1e-10)


def test_f_oracle_nonuniform_probs():
    # n=2, N=1 with p=(0.25, 0.75): DTV always 1
    assert f_oracle(2, 1, [0.25, 0.75]) == pytest.approx(1.0)
    # n=2, N=2: DTV 2 unless (1,1) which has prob 2*p*q
    p = 0.25
    assert f_oracle(2, 2, [p, 1 - p]) == pytest.approx(2 * (1 - 2 * p * (1 - p)))


def test_f_oracle_guard():
    with pytest.raises(OracleLimitError) as exc:
        f_oracle(10, 30, limit=1000)
    assert exc.value.outcomes == math.comb(39, 9)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_exact_matches_oracle(n):
    for N in range(0, 11):
        o = f_oracle(n, N)
        assert f_exact(n, N) == pytest.approx(o, rel=1e-9, abs=1e-15)


def test_monte_carlo_converges_to_exact():
    trials = 20000
    X = sample_many(DistributionSpec.uniform(5), 40, trials, RngSeed(12))
    v = np.abs(np.diff(X, axis=1)).sum(axis=1)
    assert abs(v.mean() - f_exact(5, 40)) <= 4 * v.std(ddof=1) / math.sqrt(trials)


@given(st.integers(2, 30), st.integers(0, 300))
def test_identities_and_bounds(n, N):
    e = f_exact(n, N)
    assert e >= 0
    assert f_circular(n, N) * (n - 1) / n == pytest.approx(e, rel=1e-12, abs=1e-300)
    assert e <= jensen_upper_bound(n, N) + 1e-9


def test_jensen_examples():
    assert jensen_upper_bound(2, 100) == pytest.approx(10.0)
    assert jensen_upper_bound(2, 0) == 0
    assert jensen_upper_bound(4, 100) == pytest.approx(3 * math.sqrt(50))


def test_expected_dtv_dispatch():
    assert expected_dtv(4, 100).value == pytest.approx(16.9045, abs=5e-4)
    assert expected_dtv(2, 100, "closed2").value == pytest.approx(7.95892, abs=5e-4)
    with pytest.raises(ValidationError):
        expected_dtv(3, 100, "closed2")
    with pytest.raises(ValidationError):
        expected_dtv(3, 100, "bogus")


# --- theoretical variation ---------------------------------------------------

def test_theoretical_uniform_is_zero():
    for n in (2, 5, 17):
        assert theoretical_dtv(DistributionSpec.uniform(n)) == pytest.approx(0.0, abs=1e-15)


def test_theoretical_geometric_is_p():
    assert theoretical_dtv(DistributionSpec("geometric", {"p": 0.3})) == pytest.approx(0.3, abs=1e-9)


@pytest.mark.parametrize("n", [4, 6, 10, 3, 5, 9])
def test_theoretical_triangular_matches_closed_form(n):
    exact = (4 * n - 8) / n ** 2 if n % 2 == 0 else (4 * n - 6) / n ** 2
    assert theoretical_dtv(DistributionSpec.triangular(n)) == pytest.approx(exact, rel=1e-10)
    assert closed_form_dtv("triangular", {}, n) == pytest.approx(exact)


def test_theoretical_triangular_n4():
    assert theoretical_dtv(DistributionSpec.triangular(4)) == pytest.approx(0.5, abs=1e-12)


def test_closed_forms():
    assert closed_form_dtv("square", {}, 100) == pytest.approx(0.03)
    assert closed_form_dtv("square-root", {}, 100) == pytest.approx(0.015)
    assert closed_form_dtv("normal", {"sigma": 1, "c": 5}, 50) == pytest.approx(0.15958, abs=1e-5)
    assert closed_form_dtv("uniform", {}, 10) == 0
    with pytest.raises(ValidationError):
        closed_form_dtv("cauchy", {}, 10)


@pytest.mark.parametrize("kind,params,n,rel", [
    ("square", {}, 200, 0.03),
    ("binomial", {"trials": 400}, 400, 0.01),
    ("poisson", {"lam": 20.3}, None, 0.05),
    ("normal", {"sigma": 1.0, "c": 5}, 100, 0.01),
])
def test_closed_forms_approximate_exact_sums(kind, params, n, rel):
    if kind == "binomial":
        spec = DistributionSpec("binomial", params)
    elif kind == "normal":
        spec = DistributionSpec.normal(params["sigma"], params["c"], n)
    elif kind == "poisson":
        spec = DistributionSpec("poisson", params)
    else:
        spec = DistributionSpec(kind, params, n=n)
    assert theoretical_dtv(spec) == pytest.approx(closed_form_dtv(kind, params, n), rel=rel)


@given(st.lists(st.floats(0, 1), min_size=2, max_size=20).filter(lambda x: sum(x) > 0))
def test_theoretical_reversal_invariant(weights):
    p = np.asarray(weights) / sum(weights)
    assert theoretical_dtv(p) == pytest.approx(theoretical_dtv(p[::-1]), abs=1e-15)


@pytest.mark.parametrize("spec", [
    DistributionSpec.triangular(11), DistributionSpec.normal(0.7, 3, 25),
    DistributionSpec.beta_dist(2, 3, 40), DistributionSpec("poisson", {"lam": 6}),
    DistributionSpec("binomial", {"trials": 30}),
], ids=lambda s: s.kind)
def test_unimodal_bound(spec):
    p = spec.bin_probabilities()
    assert 0 <= theoretical_dtv(spec) <= 2 * p.max() + 1e-12


def test_nonuniform_upper_bound():
    assert nonuniform_upper_bound(DistributionSpec.uniform(5), 100) == pytest.approx(40.0)
    assert nonuniform_upper_bound(DistributionSpec.uniform(5), 0) == 0
    g = DistributionSpec("geometric", {"p": 0.3})
    assert nonuniform_upper_bound(g, 100) == pytest.approx(30 + 2 * math.sqrt(g.n - 1) * 10, rel=1e-9)


def test_nonuniform_bound_holds_by_simulation():
    spec = DistributionSpec.beta_dist(2, 3, 20)
    X = sample_many(spec, 500, 4000, RngSeed(8))
    mean = np.abs(np.diff(X, axis=1)).sum(axis=1).mean()
    assert mean <= nonuniform_upper_bound(spec, 500)


# --- numerical studies -------------------------------------------------------

def test_approximation_error_grid_rows():
    rows = {(r["n"], r["N"]): r for r in approximation_error_grid([2, 50], [100, 1000])}
    assert rows[(2, 100)]["abs_err"] == pytest.approx(7.97885 - 7.95892, abs=5e-4)
    assert rows[(2, 1000)]["rel_err"] == pytest.approx((25.2313 - 25.2250) / 25.2250, abs=2e-5)
    assert rows[(50, 100)]["rel_err"] == pytest.approx((78.1927 - 75.7182) / 75.7182, abs=1e-4)


def test_hypothesis_checks():
    rep = hypothesis_checks([10], [1000])
    assert rep.two_bin_deviation[(10, 1000)] < 1e-2
    rep = hypothesis_checks([4], range(1, 101))
    assert rep.monotonicity_violations == []
    assert rep.concavity_violations == []
    rep2 = hypothesis_checks([2], range(1, 41))
    # F(2, 2r) == F(2, 2r-1): allowed for n=2, concavity not checked
    assert rep2.ok
    assert rep2.concavity_violations == []
