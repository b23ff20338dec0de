"""One-sample Mantel-Haenszel estimators and per-basket summaries.

Every pooled estimator here is a ratio of sums ``sum(R_k) / sum(S_k)`` and
is therefore the root of the estimating function
``U(delta) = sum(R_k) - delta * sum(S_k)``. The contributions are

======  ===========================  ===========================
scale   R_k                          S_k
======  ===========================  ===========================
RD      y_k - n_k * pi0_k            n_k
RR      w_k * y_k                    w_k * n_k * pi0_k
OR      w_k * (1 - pi0_k) * y_k      w_k * pi0_k * (n_k - y_k)
======  ===========================  ===========================

Variances use the unbiased per-basket binomial variance
``n_k / (n_k - 1) * p(1 - p)``, so they stay consistent whether the baskets
grow large or the number of baskets does.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import special, stats

from .core_types import (
    BasketTable,
    EffectEstimate,
    EffectScale,
    Scale,
    WeightPolicy,
)
from .errors import DegenerateDenominator, InvalidWeight, SingletonBasket

__all__ = [
    "MhComponents",
    "resolve_weights",
    "mh_components",
    "basket_effects",
    "mh_estimate",
    "mh_variance",
    "wald_ci",
    "z_quantile",
    "estimate",
    "clopper_pearson",
    "misspecification_limit",
]


@dataclass(frozen=True)
class MhComponents:
    R: np.ndarray
    S: np.ndarray
    w: np.ndarray

    @property
    def sum_r(self) -> float:
        return float(self.R.sum())

    @property
    def sum_s(self) -> float:
        return float(self.S.sum())

    def estimating_function(self, delta: float) -> float:
        return self.sum_r - delta * self.sum_s


def resolve_weights(table: BasketTable, scale: EffectScale) -> np.ndarray:
    """Per-basket weights for ``scale``.

    RD ignores weights entirely. For RR and OR the policy gives the default,
    and a weight stored on a basket overrides it. The user-supplied policy
    requires every basket to carry one.
    """
    if scale.scale is Scale.RD:
        return np.ones(table.K)
    if scale.weights is WeightPolicy.USER:
        missing = [b.label for b in table.baskets if b.weight is None]
        if missing:
            raise InvalidWeight(f"user-supplied weights missing for baskets {missing}")
    if scale.weights is WeightPolicy.INVERSE_PI0:
        w = 1.0 / table.pi0
    else:
        w = np.ones(table.K)
    if table.has_weights:
        w = np.array(
            [w_k if b.weight is None else b.weight for w_k, b in zip(w, table.baskets)]
        )
    return w


def mh_components(
    table: BasketTable, scale: EffectScale, weights: Optional[Sequence[float]] = None
) -> MhComponents:
    w = resolve_weights(table, scale) if weights is None else np.asarray(weights, float)
    y, n, p0 = table.y, table.n, table.pi0
    if scale.scale is Scale.RD:
        R = y - n * p0
        S = n.copy()
        w = np.ones(table.K)
    elif scale.scale is Scale.RR:
        R = w * y
        S = w * n * p0
    else:
        R = w * (1.0 - p0) * y
        S = w * p0 * (n - y)
    return MhComponents(R, S, w)


def basket_effects(table: BasketTable, scale: EffectScale) -> np.ndarray:
    """Per-basket effects with the observed rate in place of the true one.

    On the OR scale a basket with ``y == n`` has infinite odds; it is returned
    as ``inf`` (check with ``np.isinf``).
    """
    p = table.rates
    p0 = table.pi0
    if scale.scale is Scale.RD:
        return p - p0
    if scale.scale is Scale.RR:
        return p / p0
    with np.errstate(divide="ignore"):
        odds = np.where(p < 1.0, p / np.where(p < 1.0, 1.0 - p, 1.0), np.inf)
    return odds * (1.0 - p0) / p0


def mh_estimate(
    table: BasketTable, scale: EffectScale, weights: Optional[Sequence[float]] = None
) -> float:
    c = mh_components(table, scale, weights)
    denom = c.sum_s
    if not denom > 0:
        raise DegenerateDenominator(
            f"sum of S_k is {denom!r} on the {scale} scale; estimate undefined"
        )
    return c.sum_r / denom


def mh_variance(
    table: BasketTable,
    scale: EffectScale,
    point: Optional[float] = None,
    weights: Optional[Sequence[float]] = None,
) -> float:
    """Dually consistent variance of the pooled estimator.

    ``point`` is only needed on the OR scale, where the variance depends on
    the estimate; it is computed when omitted.
    """
    small = [b.label for b in table.baskets if b.n < 2]
    if small:
        raise SingletonBasket(f"variance needs n_k >= 2; baskets {small} have n_k = 1")
    c = mh_components(table, scale, weights)
    denom = c.sum_s
    if not denom > 0:
        raise DegenerateDenominator(f"sum of S_k is {denom!r}; variance undefined")
    n = table.n
    p = table.rates
    unbiased = n * n / (n - 1.0) * p * (1.0 - p)
    if scale.scale is Scale.RD:
        terms = unbiased
    elif scale.scale is Scale.RR:
        terms = c.w**2 * unbiased
    else:
        if point is None:
            point = c.sum_r / denom
        terms = c.w**2 * (1.0 + (point - 1.0) * table.pi0) ** 2 * unbiased
    return float(max(terms.sum(), 0.0) / (denom * denom))


def z_quantile(alpha: float) -> float:
    """Upper ``1 - alpha/2`` standard normal quantile."""
    return float(-special.ndtri(alpha / 2.0))


def wald_ci(point: float, variance: float, alpha: float = 0.05) -> tuple[float, float]:
    """Symmetric Wald interval on the natural scale (no log transform)."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if variance < 0:
        raise ValueError(f"variance must be non-negative, got {variance}")
    half = z_quantile(alpha) * math.sqrt(variance)
    return point - half, point + half


def estimate(
    table: BasketTable,
    scale: EffectScale,
    alpha: float = 0.05,
    weights: Optional[Sequence[float]] = None,
) -> EffectEstimate:
    point = mh_estimate(table, scale, weights)
    var = mh_variance(table, scale, point, weights)
    lo, hi = wald_ci(point, var, alpha)
    return EffectEstimate(scale, point, var, lo, hi, alpha, table.total_n)


def clopper_pearson(y: int, n: int, alpha: float = 0.05) -> tuple[float, float]:
    """Exact two-sided binomial interval from beta quantiles."""
    if n < 1 or not 0 <= y <= n:
        raise ValueError(f"need 0 <= y <= n and n >= 1, got y={y}, n={n}")
    lo = 0.0 if y == 0 else float(stats.beta.ppf(alpha / 2.0, y, n - y + 1))
    hi = 1.0 if y == n else float(stats.beta.ppf(1.0 - alpha / 2.0, y + 1, n - y))
    return lo, hi


def misspecification_limit(
    table: BasketTable, true_rates: Sequence[float], scale: EffectScale
) -> float:
    """Large-strata limit of the pooled estimator under arbitrary true rates.

    This is ``sum E[R_k] / sum E[S_k]``: the sample-size weighted mean RD for
    RD, and the ``w_k n_k pi0_k`` weighted mean RR for RR.
    """
    pi = np.asarray(true_rates, dtype=float)
    if pi.shape != (table.K,):
        raise ValueError(f"need {table.K} true rates, got {pi.shape}")
    if np.any((pi <= 0) | (pi >= 1)):
        raise ValueError("true rates must lie in (0, 1)")
    n, p0 = table.n, table.pi0
    w = resolve_weights(table, scale)
    if scale.scale is Scale.RD:
        return float(np.sum(n * (pi - p0)) / np.sum(n))
    if scale.scale is Scale.RR:
        return float(np.sum(w * n * p0 * (pi / p0)) / np.sum(w * n * p0))
    return float(np.sum(w * (1 - p0) * n * pi) / np.sum(w * p0 * n * (1 - pi)))
