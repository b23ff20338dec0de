"""Chi-squared goodness-of-fit test of a common effect across baskets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .core_types import BasketTable, EffectScale
from .errors import DegenerateFit
from .estimators import mh_estimate
from .links import link


@dataclass(frozen=True)
class GofResult:
    statistic: float
    df: int
    p_value: float
    fitted_rates: np.ndarray
    pearson: bool = False


def chi2_sf(x: float, df: int) -> float:
    """Chi-squared upper tail via the regularized upper incomplete gamma."""
    if x <= 0:
        return 1.0
    return float(special.gammaincc(df / 2.0, x / 2.0))


def gof_test(table: BasketTable, scale: EffectScale, pearson: bool = False) -> GofResult:
    """Compare observed responders with those implied by the pooled effect.

    The default statistic is ``sum (y - n*p)^2 / (n*p)`` with ``p`` the fitted
    rate. ``pearson=True`` divides by ``n*p*(1-p)`` instead, the usual
    binomial Pearson form, for sensitivity checks.
    """
    if table.K < 2:
        raise ValueError("goodness-of-fit needs at least two baskets")
    delta = mh_estimate(table, scale)
    fitted, _ = link(scale, table.pi0, delta)
    if np.any(fitted <= 0) or np.any(fitted >= 1):
        raise DegenerateFit(f"fitted rates {np.round(fitted, 4)} leave (0, 1)")
    expected = table.n * fitted
    denom = expected * (1.0 - fitted) if pearson else expected
    z2 = float(np.sum((table.y - expected) ** 2 / denom))
    df = table.K - 1
    return GofResult(z2, df, chi2_sf(z2, df), fitted, pearson)
