"""Closed-form moments, bracket bounds and urn simulators.

These are the independent oracles the experiment harness checks the
tree simulation against.  N_i is the size of the maximal homogeneous
(unmarked) subtree rooted at vertex i in the mark/flip decomposition
with mark probability 2q; Nbar_i counts the tree leaves inside it.

Key exact identities (uniform attachment):
    E[N_i] = prod_{t=i}^{n-1} (1 + (1-2q)/(t+1))
           = Gamma(a+n+1) Gamma(i+1) / (Gamma(n+1) Gamma(a+i+1)),  a = 1-2q
and for linear preferential attachment with weight offset beta, with
r = 1 - 2 beta q/(beta+1) and r1 = 1/(beta+1):
    E[N_i] = (1 + beta * prod_{j=i}^{n-1} (1 + r/(j+1-r1))) / (beta+1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath
import numpy as np

from .rng import RngStream

_E = math.e


@dataclass(frozen=True)
class MomentBound:
    """A one-sided or two-sided bound on a scalar moment.

    Bounds are data, not assertions: consumers decide pass/fail with
    their own tolerances.
    """

    quantity: str
    source: str
    lower: float | None = None
    upper: float | None = None
    exact: float | None = None

    def contains(self, value: float) -> bool:
        if self.lower is not None and value < self.lower:
            return False
        if self.upper is not None and value > self.upper:
            return False
        return True


def gamma_ratio_product(alpha: float, i: int, n: int) -> float:
    """prod_{t=i}^{n-1} (1 + alpha/(t+1)), validated against its Gamma form
    Gamma(a+n+1) Gamma(i+1) / (Gamma(n+1) Gamma(a+i+1)).

    The two evaluations must agree to 1e-12 relative error; disagreement
    raises instead of silently returning a wrong value.  The Gamma form is
    evaluated at 40 digits (double-precision lgamma differences lose too
    many digits to cancellation once n is in the thousands).
    """
    if not (0 <= i <= n):
        raise ValueError("need 0 <= i <= n")
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    t = np.arange(i + 1, n + 1, dtype=np.float64)
    log_product = math.fsum(np.log1p(alpha / t).tolist()) if t.size else 0.0
    product = math.exp(log_product)
    with mpmath.workdps(40):
        a = mpmath.mpf(alpha)
        log_gamma_form = (
            mpmath.loggamma(a + n + 1)
            - mpmath.loggamma(n + 1)
            + mpmath.loggamma(i + 1)
            - mpmath.loggamma(a + i + 1)
        )
        gamma_form = float(mpmath.e**log_gamma_form)
    if abs(product - gamma_form) > 1e-12 * max(abs(product), abs(gamma_form)):
        raise ArithmeticError(
            f"product and Gamma forms disagree: {product!r} vs {gamma_form!r}"
        )
    return product


def expected_Ni_exact(q: float, i: int, n: int) -> float:
    """Exact E[N_i] for uniform attachment, q <= 1/2."""
    if not (0 <= q <= 0.5):
        raise ValueError("q must lie in [0, 1/2]")
    return gamma_ratio_product(1.0 - 2.0 * q, i, n)


def expected_Ni_exact_pa(q: float, i: int, n: int, beta: float) -> float:
    """Exact E[N_i] for linear preferential attachment, q <= 1/2.

    Two exact recursions combine: the homogeneous-subtree weight satisfies
    E[w_j] = beta * prod_{t=i}^{j-1} (1 + r/(t+1-r1)) (every attachment
    into the subtree adds expected weight 2q*1 + (1-2q)(1+beta)), and the
    vertex count grows only on unmarked attachments, so
    E[N] = 1 + (1-2q)/(beta+1) * sum_j E[w_j]/(j+1-r1).
    """
    if not (0 <= q <= 0.5):
        raise ValueError("q must lie in [0, 1/2]")
    if beta <= 0:
        raise ValueError("beta must be positive")
    r = 1.0 - 2.0 * beta * q / (beta + 1.0)
    r1 = 1.0 / (beta + 1.0)
    j = np.arange(i, n, dtype=np.float64)
    if j.size == 0:
        return 1.0
    log_w = np.concatenate(([0.0], np.cumsum(np.log1p(r / (j[:-1] + 1.0 - r1)))))
    w = beta * np.exp(log_w)  # E[w_j], j = i..n-1
    return 1.0 + (1.0 - 2.0 * q) / (beta + 1.0) * float((w / (j + 1.0 - r1)).sum())


@lru_cache(maxsize=64)
def zeta_series(alpha: float, terms: int = 10_000_000) -> float:
    """zeta(alpha) for alpha > 1 by direct summation plus an integral tail.

    sum_{i>K} f(i) = int_K^inf f - f(K)/2 + O(f'(K)); the neglected term
    is below 1e-9 for K = 1e7 and alpha > 1.02.
    """
    if alpha <= 1:
        raise ValueError("zeta diverges for alpha <= 1")
    k = np.arange(1, terms + 1, dtype=np.float64)
    head = float((k**-alpha).sum())
    K = float(terms)
    tail = K ** (1 - alpha) / (alpha - 1) - 0.5 * K**-alpha
    return head + tail


@lru_cache(maxsize=64)
def zeta_log_series(alpha: float, terms: int = 10_000_000) -> float:
    """sum_i log(i)/i^alpha for alpha > 1, same truncation scheme."""
    if alpha <= 1:
        raise ValueError("series diverges for alpha <= 1")
    k = np.arange(1, terms + 1, dtype=np.float64)
    head = float((np.log(k) * k**-alpha).sum())
    K = float(terms)
    lk = math.log(K)
    tail = K ** (1 - alpha) * (lk / (alpha - 1) + 1.0 / (alpha - 1) ** 2)
    tail -= 0.5 * lk * K**-alpha
    return head + tail


def _require(cond: bool, msg: str):
    if not cond:
        raise ValueError(msg)


def gamma_ratio_bounds(alpha: float, n: int) -> MomentBound:
    """((n+1)/e)^a <= Gamma(a+n+1)/Gamma(n+1) <= (n+1)^a for a in [0,1]."""
    _require(0 <= alpha <= 1, "gamma ratio bracket needs alpha in [0,1]")
    _require(n >= 1, "gamma ratio bracket needs n >= 1")
    exact = math.exp(math.lgamma(alpha + n + 1) - math.lgamma(n + 1))
    return MomentBound(
        quantity="Gamma(alpha+n+1)/Gamma(n+1)",
        source="gamma_ratio",
        lower=((n + 1) / _E) ** alpha,
        upper=float(n + 1) ** alpha,
        exact=exact,
    )


def mean_Ni_bounds(q: float, i: int, n: int) -> MomentBound:
    """e^{-1} R^{1-2q} <= E[N_i] <= e R^{1-2q}, R = (n+1)/(i+1)."""
    _require(0 <= q <= 0.5, "mean bracket needs q <= 1/2")
    ratio = (n + 1) / (i + 1)
    a = 1 - 2 * q
    return MomentBound(
        quantity="E[N_i]",
        source="mean_bracket",
        lower=ratio**a / _E,
        upper=ratio**a * _E,
        exact=expected_Ni_exact(q, i, n),
    )


def second_moment_Ni_bound(q: float, i: int, n: int) -> MomentBound:
    """E[N_i^2] <= R^{2-4q} e^{2(1-2q)} (4+e) + e(1-2q)."""
    _require(0 <= q <= 0.5, "second-moment bound needs q <= 1/2")
    a = 1 - 2 * q
    ratio = (n + 1) / (i + 1)
    upper = ratio ** (2 * a) * math.exp(2 * a) * (4 + _E) + _E * a
    return MomentBound(quantity="E[N_i^2]", source="second_moment", upper=upper)


def variance_N0_bound(q: float, n: int) -> MomentBound:
    """Var(N_0) <= 2q e^2 (4+e) (n+1)^{2-4q} zeta(2-4q) + 2nq e^2
                 + 12 e^3 q^2 (n+1)^{2-4q} zeta~(2-4q) + 4 e^2 q^2 n log n.

    Needs 2-4q > 1, i.e. q < 1/4, for the series to converge.  All terms
    are kept at the concrete n (no asymptotic dropping)."""
    _require(0 <= q < 0.25, "variance bound needs q < 1/4")
    _require(n >= 2, "variance bound needs n >= 2")
    a2 = 2 - 4 * q
    z = zeta_series(a2)
    zl = zeta_log_series(a2)
    e2, e3 = _E**2, _E**3
    upper = (
        2 * q * e2 * (4 + _E) * (n + 1) ** a2 * z
        + 2 * n * q * e2
        + 12 * e3 * q * q * (n + 1) ** a2 * zl
        + 4 * e2 * q * q * n * math.log(n)
    )
    return MomentBound(quantity="Var(N_0)", source="variance_N0", upper=upper)


def leaf_moment_bounds(q: float, i: int, n: int) -> list[MomentBound]:
    """Bracket for E[Nbar_i] and the matching second-moment bound."""
    _require(0 <= q <= 0.5, "leaf bracket needs q <= 1/2")
    a = 1 - 2 * q
    ratio = (n + 1) / (i + 1)
    lower = ratio**a / (32 * _E) - i / (8 * n * _E)
    mean = MomentBound(
        quantity="E[Nbar_i]", source="leaf_mean", lower=lower, upper=_E * ratio**a
    )
    second = MomentBound(
        quantity="E[Nbar_i^2]",
        source="leaf_second_moment",
        upper=ratio ** (2 * a) * math.exp(2 * a) * (4 + _E) + _E * a,
    )
    return [mean, second]


def pa_moment_bounds(q: float, i: int, n: int, beta: float) -> list[MomentBound]:
    """Preferential-attachment brackets for E[N_i] and E[N_i^2] (q < 1/8)."""
    _require(0 <= q < 0.125, "pa brackets need q < 1/8")
    _require(beta > 0, "beta must be positive")
    r = 1 - 2 * beta * q / (beta + 1)
    r1 = 1 / (beta + 1)
    R = (n + 1 - r1) / (i + 1 - r1)
    b1 = beta / (beta + 1)
    mean = MomentBound(
        quantity="E[N_i]",
        source="pa_mean",
        lower=(3 * b1 / (8 * _E)) * R**r - 3 * b1 / (4 * _E),
        upper=b1 * _E * R**r + r1,
        exact=expected_Ni_exact_pa(q, i, n, beta),
    )
    c = beta * _E + beta * _E**2 * (1 + beta) + r * _E**2 * (1 + beta) ** 2
    second = MomentBound(
        quantity="E[N_i^2]",
        source="pa_second_moment",
        upper=4.0 / (1 + beta) ** 2 * c * R ** (2 * r),
    )
    return [mean, second]


def pa_leaf_moment_bounds(q: float, i: int, n: int, beta: float) -> list[MomentBound]:
    """Preferential-attachment brackets for E[Nbar_i], E[Nbar_i^2] (q < 1/8)."""
    _require(0 <= q < 0.125, "pa leaf brackets need q < 1/8")
    _require(beta > 0, "beta must be positive")
    r = 1 - 2 * beta * q / (beta + 1)
    r1 = 1 / (beta + 1)
    R = (n + 1 - r1) / (i + 1 - r1)
    b1 = beta / (beta + 1)
    mean = MomentBound(
        quantity="E[Nbar_i]",
        source="pa_leaf_mean",
        lower=(b1 / (8 * _E)) * R**r - 3 * b1 / (8 * _E),
        upper=b1 * _E * R**r + r1,
    )
    c = beta * _E + beta * _E**2 * (1 + beta) + r * _E**2 * (1 + beta) ** 2
    second = MomentBound(
        quantity="E[Nbar_i^2]",
        source="pa_leaf_second_moment",
        upper=4.0 / (1 + beta) ** 2 * c * R ** (2 * r),
    )
    return [mean, second]


_LEMMA_DISPATCH = {
    "l8": lambda q, i, n, beta: [
        MomentBound(
            quantity="gamma_ratio_product",
            source="product_identity",
            exact=gamma_ratio_product(1 - 2 * q, i, n),
        )
    ],
    "l9": lambda q, i, n, beta: [gamma_ratio_bounds(1 - 2 * q, n)],
    "l10": lambda q, i, n, beta: [mean_Ni_bounds(q, i, n)],
    "l12": lambda q, i, n, beta: [second_moment_Ni_bound(q, i, n)],
    "l14": lambda q, i, n, beta: [variance_N0_bound(q, n)],
    "leaf": lambda q, i, n, beta: leaf_moment_bounds(q, i, n),
    "pa1": lambda q, i, n, beta: pa_moment_bounds(q, i, n, beta),
    "pa2": lambda q, i, n, beta: pa_leaf_moment_bounds(q, i, n, beta),
}


def lemma_bounds(lemma: str, q: float, i: int, n: int, beta: float | None = None):
    """Evaluate one named bound family; raises if its domain is violated."""
    if lemma not in _LEMMA_DISPATCH:
        raise ValueError(f"unknown lemma {lemma!r}; choose from {sorted(_LEMMA_DISPATCH)}")
    if lemma.startswith("pa") and beta is None:
        raise ValueError("pa bounds need beta")
    return _LEMMA_DISPATCH[lemma](q, i, n, beta)


def bound_suite(
    q: float, i: int, n: int, model: str = "urrt", beta: float | None = None
) -> list[MomentBound]:
    """All bound families whose stated domain covers (q, i, n, model)."""
    out: list[MomentBound] = []
    if model == "urrt":
        if 0 <= q <= 0.5:
            out.append(gamma_ratio_bounds(1 - 2 * q, max(n, 1)))
            out.append(mean_Ni_bounds(q, i, n))
            out.append(second_moment_Ni_bound(q, i, n))
            out.extend(leaf_moment_bounds(q, i, n))
        if 0 <= q < 0.25 and n >= 2:
            out.append(variance_N0_bound(q, n))
    elif model == "pa":
        if beta is None:
            raise ValueError("pa model needs beta")
        if 0 <= q < 0.125:
            out.extend(pa_moment_bounds(q, i, n, beta))
            out.extend(pa_leaf_moment_bounds(q, i, n, beta))
    else:
        raise ValueError(f"unknown model {model!r}")
    return out


def depth_moments(i: int) -> tuple[float, float]:
    """Exact mean H_i and variance of the insertion depth of vertex i.

    depth(i) is a sum of independent Bernoulli(1/j), j = 1..i, so the
    mean is the harmonic number and the variance sum_j (1/j)(1 - 1/j),
    which stays below log(i) for i >= 2 (self-checked).
    """
    if i < 1:
        raise ValueError("i must be >= 1")
    j = np.arange(1, i + 1, dtype=np.float64)
    mean = float((1.0 / j).sum())
    var = float(((1.0 / j) * (1.0 - 1.0 / j)).sum())
    if i >= 2 and var > math.log(i):
        raise AssertionError("depth variance exceeded its log bound")
    return mean, var


# ---------------------------------------------------------------------------
# urn processes

TWO_COLOR = "two_color"
FOUR_COLOR_LEAF = "four_color_leaf"
PA_WEIGHT = "pa_weight"


@dataclass
class UrnState:
    """Color counts (weights for the PA urn) plus the replacement rule id."""

    counts: np.ndarray
    kind: str
    q: float
    beta: float | None = None
    steps_done: int = 0


def two_color_urn(q: float) -> UrnState:
    """Same-bit / opposite-bit vertex counts; starts with the root."""
    return UrnState(np.array([1.0, 0.0]), TWO_COLOR, q)


def four_color_urn(q: float) -> UrnState:
    """(leaf same, leaf opposite, internal same, internal opposite);
    starts with the root as a same-bit leaf."""
    return UrnState(np.array([1.0, 0.0, 0.0, 0.0]), FOUR_COLOR_LEAF, q)


def pa_weight_urn(q: float, beta: float) -> UrnState:
    """Weights of the four categories; each draw adds total weight 1+beta."""
    return UrnState(np.array([beta, 0.0, 0.0, 0.0]), PA_WEIGHT, q, beta=beta)


def urn_simulate(state: UrnState, steps: int, rng: RngStream) -> UrnState:
    """Advance one urn trajectory by `steps` draws."""
    gen = rng.generator()
    counts = state.counts.copy()
    q = state.q
    if state.kind == TWO_COLOR:
        for _ in range(steps):
            total = counts.sum()
            same = gen.random() * total < counts[0]
            flip = gen.random() < q
            counts[0 if same ^ flip else 1] += 1.0
    elif state.kind == FOUR_COLOR_LEAF:
        for _ in range(steps):
            total = counts.sum()
            x = gen.random() * total
            cat = 0
            acc = counts[0]
            while x >= acc and cat < 3:
                cat += 1
                acc += counts[cat]
            if cat < 2:  # a drawn leaf becomes internal
                counts[cat] -= 1.0
                counts[cat + 2] += 1.0
            parent_same = cat % 2 == 0
            flip = gen.random() < q
            counts[0 if parent_same ^ flip else 1] += 1.0
    elif state.kind == PA_WEIGHT:
        beta = state.beta
        for _ in range(steps):
            total = counts.sum()
            x = gen.random() * total
            cat = 0
            acc = counts[0]
            while x >= acc and cat < 3:
                cat += 1
                acc += counts[cat]
            if cat < 2:  # leaf category: its weight beta moves to internal
                counts[cat] -= beta
                counts[cat + 2] += beta + 1.0
            else:
                counts[cat] += 1.0  # outdegree of the drawn vertex grows
            parent_same = cat % 2 == 0
            flip = gen.random() < q
            counts[0 if parent_same ^ flip else 1] += beta
    else:
        raise ValueError(f"unknown urn kind {state.kind!r}")
    return UrnState(counts, state.kind, q, state.beta, state.steps_done + steps)


def simulate_two_color_final(q: float, steps: int, runs: int, rng: RngStream) -> np.ndarray:
    """Vectorized two-color urn: same-bit counts after `steps` draws, per run."""
    gen = rng.generator()
    same = np.ones(runs, dtype=np.float64)
    for i in range(1, steps + 1):
        picked_same = gen.random(runs) * i < same
        flip = gen.random(runs) < q
        same += picked_same ^ flip
    return same.astype(np.int64)


def simulate_four_color_final(q: float, steps: int, runs: int, rng: RngStream) -> np.ndarray:
    """Vectorized four-color urn: (runs, 4) counts after `steps` draws."""
    gen = rng.generator()
    counts = np.zeros((runs, 4), dtype=np.float64)
    counts[:, 0] = 1.0
    for i in range(1, steps + 1):
        x = gen.random(runs) * i
        c0 = counts[:, 0]
        c01 = c0 + counts[:, 1]
        c012 = c01 + counts[:, 2]
        cat = (x >= c0).astype(np.int64) + (x >= c01) + (x >= c012)
        rows = np.arange(runs)
        is_leaf_draw = cat < 2
        counts[rows[is_leaf_draw], cat[is_leaf_draw]] -= 1.0
        counts[rows[is_leaf_draw], cat[is_leaf_draw] + 2] += 1.0
        parent_same = cat % 2 == 0
        flip = gen.random(runs) < q
        new_same = parent_same ^ flip
        counts[rows, np.where(new_same, 0, 1)] += 1.0
    return counts.astype(np.int64)
