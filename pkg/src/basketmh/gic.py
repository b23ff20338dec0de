"""Generalized information criterion for subclass models of baskets.

A model partitions the baskets into subclasses that each share one effect.
Each subclass is fitted by its Mantel-Haenszel estimate and scored by

    GIC = -loglik(h(delta)) + bias(delta)

where the bias term is the M-estimator correction for the estimating
function ``U(delta) = sum(R_k - delta S_k)``. A model's GIC is the sum over
its subclasses; smaller is better.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np
from scipy import special

from .core_types import BasketTable, EffectEstimate, EffectScale, Partition
from .errors import CombinatorialLimit, DegenerateFit, EstimationError
from .estimators import estimate, mh_components
from .links import link
from .partitions import bell, set_partitions

CLAMP = 1e-12
DEFAULT_MAX_MODELS = bell(12)

BiasWeighting = Literal["unit", "weighted"]


class Strategy(str, enum.Enum):
    TWO = "two-subclass"
    ALL = "all-subclasses"
    NONSPARSE = "non-sparse"

    @classmethod
    def parse(cls, name: "str | Strategy") -> "Strategy":
        if isinstance(name, Strategy):
            return name
        key = name.strip().lower().replace("_", "-")
        aliases = {"two": cls.TWO, "all": cls.ALL, "nonsparse": cls.NONSPARSE}
        if key in aliases:
            return aliases[key]
        return cls(key)


@dataclass(frozen=True)
class SubclassFit:
    members: tuple[int, ...]
    estimate: EffectEstimate
    gic: float
    loglik: float
    bias: float

    @property
    def point(self) -> float:
        return self.estimate.point


@dataclass(frozen=True)
class GicResult:
    """Score of one partition; ``subclasses`` is in ascending-estimate order."""

    partition: Partition
    gic: float
    subclasses: tuple[SubclassFit, ...]
    loglik: float
    bias: float

    @property
    def estimates(self) -> list[EffectEstimate]:
        return [s.estimate for s in self.subclasses]

    def subclass_of(self, basket: int) -> SubclassFit:
        for s in self.subclasses:
            if basket in s.members:
                return s
        raise KeyError(basket)


@dataclass(frozen=True)
class GicRanking:
    results: tuple[GicResult, ...]
    strategy: Strategy
    near_optimal_window: float = 1.0
    scale: Optional[EffectScale] = None
    near_optimal: tuple[bool, ...] = field(init=False)

    def __post_init__(self):
        best = self.results[0].gic if self.results else math.nan
        flags = tuple(r.gic - best <= self.near_optimal_window for r in self.results)
        object.__setattr__(self, "near_optimal", flags)

    @property
    def best(self) -> GicResult:
        return self.results[0]

    def __len__(self) -> int:
        return len(self.results)

    def __getitem__(self, i) -> GicResult:
        return self.results[i]

    def rank_of(self, partition: Partition) -> int:
        """1-based rank of ``partition``."""
        for i, r in enumerate(self.results, start=1):
            if r.partition == partition:
                return i
        raise KeyError(partition)


def _fit(
    table: BasketTable,
    members: Sequence[int],
    scale: EffectScale,
    alpha: float,
    bias_weighting: BiasWeighting,
) -> SubclassFit:
    sub = table.subset(members)
    est = estimate(sub, scale, alpha)
    delta = est.point
    c = mh_components(sub, scale)
    y, n = sub.y, sub.n
    h, hdot = link(scale, sub.pi0, delta)

    low = h < CLAMP
    high = h > 1.0 - CLAMP
    bad = (low & (y > 0)) | (high & (y < n))
    if np.any(bad):
        which = [sub.labels[i] for i in np.flatnonzero(bad)]
        raise DegenerateFit(
            f"implied rate outside (0, 1) for baskets {which} with responders "
            f"and non-responders (delta={delta:.6g}, {scale})"
        )
    # remaining boundary values only meet zero coefficients, so 0*log(0) = 0
    hc = np.clip(h, 0.0, 1.0)
    loglik = float(np.sum(special.xlogy(y, hc) + special.xlogy(n - y, 1.0 - hc)))

    with np.errstate(divide="ignore", invalid="ignore"):
        score = np.where(y > 0, y * hdot / hc, 0.0) - np.where(n - y > 0, (n - y) * hdot / (1.0 - hc), 0.0)
    psi = c.R - delta * c.S
    if bias_weighting == "unit":
        denom = float(np.sum(c.S / c.w))
    elif bias_weighting == "weighted":
        denom = c.sum_s
    else:
        raise ValueError(f"unknown bias weighting {bias_weighting!r}")
    bias = float(np.sum(psi * score) / denom)
    return SubclassFit(tuple(members), est, -loglik + bias, loglik, bias)


def subclass_gic(
    table_slice: BasketTable,
    scale: EffectScale,
    alpha: float = 0.05,
    bias_weighting: BiasWeighting = "unit",
) -> SubclassFit:
    """Score the baskets of ``table_slice`` as one subclass.

    ``bias_weighting="unit"`` normalizes the bias term by the unit-weight sum
    of ``S_k`` (the convention behind the published iwRR rankings);
    ``"weighted"`` uses the weighted sum, which makes the GIC invariant to
    rescaling the weights. Both agree whenever all weights are equal to one.
    """
    return _fit(table_slice, range(table_slice.K), scale, alpha, bias_weighting)


def _combine(partition, fits) -> GicResult:
    ordered = tuple(sorted(fits, key=lambda f: (f.point, f.members)))
    return GicResult(
        partition,
        float(sum(f.gic for f in fits)),
        ordered,
        float(sum(f.loglik for f in fits)),
        float(sum(f.bias for f in fits)),
    )


def model_gic(
    table: BasketTable,
    partition: Partition,
    scale: EffectScale,
    alpha: float = 0.05,
    bias_weighting: BiasWeighting = "unit",
) -> GicResult:
    if partition.K != table.K:
        raise ValueError(f"partition covers {partition.K} baskets, table has {table.K}")
    fits = [_fit(table, b, scale, alpha, bias_weighting) for b in partition.blocks()]
    return _combine(partition, fits)


def model_count(K: int, strategy: Strategy) -> int:
    """Number of candidate models before any sparsity filtering."""
    if strategy is Strategy.TWO:
        return 2 ** (K - 1)
    return bell(K)


def enumerate_models(
    K: int,
    strategy: "Strategy | str" = Strategy.TWO,
    min_subclass_patients: int = 10,
    table: Optional[BasketTable] = None,
    max_models: int = DEFAULT_MAX_MODELS,
) -> list[Partition]:
    """Candidate partitions in canonical (restricted-growth) order.

    Non-sparse keeps only partitions whose every subclass enrolls strictly
    more than ``min_subclass_patients`` patients, so it needs ``table``.
    """
    strategy = Strategy.parse(strategy)
    if K < 1:
        raise ValueError("need at least one basket")
    count = model_count(K, strategy)
    if count > max_models:
        raise CombinatorialLimit(
            f"{strategy.value} with K={K} gives {count} models (cap {max_models}); "
            "use the two-subclass strategy or raise the cap"
        )
    if strategy is Strategy.TWO:
        return list(set_partitions(K, max_blocks=2))
    models = list(set_partitions(K))
    if strategy is Strategy.NONSPARSE:
        if table is None or table.K != K:
            raise ValueError("non-sparse enumeration needs the table of K baskets")
        sizes = [b.n for b in table.baskets]
        models = [
            p for p in models
            if all(sum(sizes[i] for i in b) > min_subclass_patients for b in p.blocks())
        ]
    return models


class _FitCache:
    """Memoizes subclass fits; shared subsets recur across many partitions."""

    def __init__(self, table, scale, alpha, bias_weighting):
        self.args = (scale, alpha, bias_weighting)
        self.table = table
        self.fits: dict[tuple[int, ...], SubclassFit] = {}

    def score(self, partition: Partition) -> GicResult:
        fits = []
        for b in partition.blocks():
            fit = self.fits.get(b)
            if fit is None:
                fit = self.fits[b] = _fit(self.table, b, *self.args)
            fits.append(fit)
        return _combine(partition, fits)


def score_models(
    table: BasketTable,
    models: Sequence[Partition],
    scale: EffectScale,
    alpha: float = 0.05,
    bias_weighting: BiasWeighting = "unit",
) -> list[GicResult]:
    """Score each partition, reusing fits of shared subclasses."""
    cache = _FitCache(table, scale, alpha, bias_weighting)
    return [cache.score(p) for p in models]


def try_score_models(
    table: BasketTable,
    models: Sequence[Partition],
    scale: EffectScale,
    alpha: float = 0.05,
    bias_weighting: BiasWeighting = "unit",
) -> tuple[list[GicResult], int]:
    """Like :func:`score_models` but drops unscorable models.

    Returns the scored models and how many were dropped because a subclass
    fit raised an estimation error.
    """
    cache = _FitCache(table, scale, alpha, bias_weighting)
    out, skipped = [], 0
    for p in models:
        try:
            out.append(cache.score(p))
        except EstimationError:
            skipped += 1
    return out, skipped


def rank_models(
    table: BasketTable,
    scale: EffectScale,
    strategy: "Strategy | str" = Strategy.TWO,
    min_subclass_patients: int = 10,
    window: float = 1.0,
    alpha: float = 0.05,
    bias_weighting: BiasWeighting = "unit",
    max_models: int = DEFAULT_MAX_MODELS,
) -> GicRanking:
    """Score every candidate model and sort by ascending GIC.

    Ties fall back to canonical partition order. Models within ``window`` of
    the minimum are flagged in ``near_optimal``.
    """
    strategy = Strategy.parse(strategy)
    models = enumerate_models(table.K, strategy, min_subclass_patients, table, max_models)
    results = score_models(table, models, scale, alpha, bias_weighting)
    results.sort(key=lambda r: (r.gic, r.partition.assignment))
    return GicRanking(tuple(results), strategy, window, scale)
