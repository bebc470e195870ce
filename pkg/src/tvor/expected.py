"""Expected discrete total variation of multinomial histograms.

``F(n, N)`` denotes the expected DTV of a histogram with ``n`` bins holding
``N`` uniformly distributed values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy.special import gammaln

from .errors import OracleLimitError, ValidationError
from .histogram import DistributionSpec

ORACLE_LIMIT = 10 ** 6
METHODS = ("exact", "asymptotic", "closed2", "oracle", "circular")


@dataclass(frozen=True)
class ExpectedDtv:
    n: int
    N: int
    value: float
    method: str


def _check_n(n):
    if n < 2:
        raise ValidationError(f"need at least 2 bins, got n={n}")


def _check_N(N):
    if N < 0:
        raise ValidationError(f"sample size must be non-negative, got N={N}")


def f2_exact(N: int, exact: bool = False):
    """Closed form of F(2, N).

    ``exact=True`` returns a ``Fraction`` computed with integer arithmetic;
    otherwise the value is evaluated in log space, which stays finite for any
    N that fits in memory.
    """
    _check_N(N)
    if N == 0:
        return Fraction(0) if exact else 0.0
    half = N // 2
    if exact:
        return Fraction((N + 1) // 2 * math.comb(N, half), 2 ** (N - 1))
    log_val = (
        (1 - N) * math.log(2)
        + math.log((N + 1) // 2)
        + math.lgamma(N + 1) - math.lgamma(half + 1) - math.lgamma(N - half + 1)
    )
    return math.exp(log_val)


def f_exact(n: int, N: int) -> float:
    """Exact F(n, N) from the double sum over the first two bin counts.

    Each summand
        N!/(k1! k2! (N-k1-k2)!) * (n-2)**(N-k1-k2) / n**N * 2(n-1)(k2-k1)
    for k1 < k2, k1 + k2 <= N is formed in log space and the positive terms
    are added with compensated summation.
    """
    _check_n(n)
    _check_N(N)
    if n == 2:
        return f2_exact(N)
    if N == 0:
        return 0.0
    k1, k2 = np.meshgrid(np.arange(N + 1.0), np.arange(N + 1.0), indexing="ij")
    keep = (k1 < k2) & (k1 + k2 <= N)
    k1, k2 = k1[keep], k2[keep]
    rest = N - k1 - k2
    log_terms = (
        gammaln(N + 1) - gammaln(k1 + 1) - gammaln(k2 + 1) - gammaln(rest + 1)
        + rest * math.log(n - 2) - N * math.log(n)
        + np.log(2.0 * (n - 1) * (k2 - k1))
    )
    return math.fsum(np.exp(log_terms).tolist())


def f_asymptotic(n: int, N: int) -> float:
    """Large-N approximation 2(n-1)/sqrt(n*pi) * sqrt(N)."""
    _check_n(n)
    _check_N(N)
    return 2.0 * (n - 1) / math.sqrt(n * math.pi) * math.sqrt(N)


def f_circular(n: int, N: int) -> float:
    """Expected circular variation, n/(n-1) * F(n, N)."""
    _check_n(n)
    return n / (n - 1) * f_exact(n, N)


def _compositions(N: int, n: int):
    """All n-tuples of non-negative integers summing to N, lexicographically."""
    if n == 1:
        yield (N,)
        return
    for first in range(N, -1, -1):
        for rest in _compositions(N - first, n - 1):
            yield (first,) + rest


def oracle_outcomes(n: int, N: int) -> int:
    return math.comb(N + n - 1, n - 1)


def f_oracle(n: int, N: int, probs: Sequence[float] | None = None,
             limit: int = ORACLE_LIMIT) -> float:
    """Expected DTV by enumerating every multinomial outcome.

    Probabilities are accumulated as exact fractions (float ``probs`` are
    taken at their exact binary value), so the only rounding is the final
    conversion to float.
    """
    _check_N(N)
    if probs is None:
        _check_n(n)
        p = [Fraction(1, n)] * n
    else:
        p = [Fraction(x) for x in probs]
        if len(p) != n:
            raise ValidationError(f"got {len(p)} probabilities for n={n} bins")
    outcomes = oracle_outcomes(n, N)
    if outcomes > limit:
        raise OracleLimitError(outcomes, limit)
    fact = [math.factorial(k) for k in range(N + 1)]
    total = Fraction(0)
    for ks in _compositions(N, n):
        variation = sum(abs(ks[i + 1] - ks[i]) for i in range(n - 1))
        if variation == 0:
            continue
        coef = fact[N]
        prob = Fraction(1)
        for k, pk in zip(ks, p):
            coef //= fact[k]
            if k:
                prob *= pk ** k
        total += coef * prob * variation
    return float(total)


def expected_dtv(n: int, N: int, method: str = "exact") -> ExpectedDtv:
    if method == "exact":
        value = f_exact(n, N)
    elif method == "asymptotic":
        value = f_asymptotic(n, N)
    elif method == "closed2":
        if n != 2:
            raise ValidationError("the closed form only covers n = 2")
        value = f2_exact(N)
    elif method == "oracle":
        value = f_oracle(n, N)
    elif method == "circular":
        value = f_circular(n, N)
    else:
        raise ValidationError(f"unknown method {method!r}; choose from {METHODS}")
    return ExpectedDtv(n, N, value, method)


# ---------------------------------------------------------------------------
# theoretical variation of distributions and bounds

def theoretical_dtv(spec_or_probs) -> float:
    """Sum of absolute differences of adjacent bin probabilities."""
    if isinstance(spec_or_probs, DistributionSpec):
        p = spec_or_probs.bin_probabilities()
    else:
        p = np.asarray(spec_or_probs, dtype=float)
    if p.size < 2:
        raise ValidationError("theoretical variation needs at least 2 bins")
    return math.fsum(np.abs(np.diff(p)).tolist())


def closed_form_dtv(kind: str, params: dict | None = None, n: int | None = None) -> float:
    """Closed-form (mostly approximate) theoretical DTV of named distributions.

    ``n`` is the number of bins, except for ``binomial`` where it is the
    number of trials of the symmetric binomial.
    """
    params = params or {}
    if kind == "uniform":
        return 0.0
    if kind == "triangular":
        if n is None or n < 2:
            raise ValidationError("triangular needs n >= 2")
        return (4 * n - 8) / n ** 2 if n % 2 == 0 else (4 * n - 6) / n ** 2
    if kind == "square":
        return 3.0 / n
    if kind == "square-root":
        return 3.0 / (2 * n)
    if kind == "geometric":
        return float(params["p"])
    if kind == "poisson":
        lam = float(params["lam"])
        if lam <= 1:
            raise ValidationError("the Poisson closed form needs lam > 1")
        k = math.floor(lam)
        return 2.0 * math.exp(k * math.log(lam) - lam - math.lgamma(k + 1))
    if kind == "binomial":
        return math.sqrt(8.0 / (math.pi * n))
    if kind == "normal":
        sigma = float(params.get("sigma", 1.0))
        c = float(params["c"])
        return 2.0 * c / (n * sigma) * math.sqrt(2.0 / math.pi)
    raise ValidationError(f"no closed form for kind {kind!r}")


def jensen_upper_bound(n: int, N: int) -> float:
    """Upper bound (n-1) * sqrt(2N/n) on F(n, N)."""
    _check_n(n)
    _check_N(N)
    return (n - 1) * math.sqrt(2.0 * N / n)


def nonuniform_upper_bound(spec: DistributionSpec, N: int) -> float:
    """Rough bound on the expected DTV of N draws from ``spec``."""
    _check_N(N)
    return theoretical_dtv(spec) * N + 2.0 * math.sqrt(spec.n - 1) * math.sqrt(N)


# ---------------------------------------------------------------------------
# numerical studies

def approximation_error_grid(n_values: Iterable[int], N_values: Iterable[int]) -> list[dict]:
    rows = []
    N_values = list(N_values)
    for n in n_values:
        for N in N_values:
            exact = f_exact(n, N)
            asym = f_asymptotic(n, N)
            err = abs(asym - exact)
            rows.append({
                "n": n, "N": N, "exact": exact, "asymptotic": asym,
                "abs_err": err, "rel_err": err / exact if exact else math.nan,
            })
    return rows


def f2_real(x: float) -> float:
    """F(2, x) for real x >= 0, linear between neighbouring integers."""
    lo = math.floor(x)
    frac = x - lo
    if frac == 0:
        return f2_exact(lo)
    return (1 - frac) * f2_exact(lo) + frac * f2_exact(lo + 1)


@dataclass
class HypothesisReport:
    two_bin_deviation: dict[tuple[int, int], float]
    monotonicity_violations: list[tuple[int, int]]
    concavity_violations: list[tuple[int, int]]

    @property
    def ok(self) -> bool:
        return not (self.monotonicity_violations or self.concavity_violations)


def hypothesis_checks(n_values: Iterable[int], N_values: Sequence[int]) -> HypothesisReport:
    """Check the two-bin reduction and the shape of N -> F(n, N).

    For every n and N records |F(n,N) - (n-1)F(2, 2N/n)| / F(n,N).  Over the
    consecutive integers of ``N_values`` it also records where F fails to
    increase (n >= 3: strictly; n = 2: non-decreasing) and, for n >= 3, where
    F(n,N+1) + F(n,N-1) < 2F(n,N) does not hold.
    """
    dev = {}
    mono, conc = [], []
    N_sorted = sorted(set(N_values))
    for n in n_values:
        values = {N: f_exact(n, N) for N in N_sorted}
        for N, v in values.items():
            if v > 0:
                dev[(n, N)] = abs(v - (n - 1) * f2_real(2.0 * N / n)) / v
        for N in N_sorted:
            if N + 1 in values:
                step = values[N + 1] - values[N]
                # F(2, 2r) == F(2, 2r-1) exactly; allow for rounding there
                if step < -1e-12 * values[N] or (n >= 3 and step <= 0):
                    mono.append((n, N))
            if n >= 3 and N - 1 in values and N + 1 in values:
                if not values[N + 1] + values[N - 1] < 2 * values[N]:
                    conc.append((n, N))
    return HypothesisReport(dev, mono, conc)
