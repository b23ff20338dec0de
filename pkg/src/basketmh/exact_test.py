"""Conditional exact test of the global null via the weighted responder sum.

Under the global null every ``Y_k ~ Bin(n_k, pi0_k)`` independently, so the
law of ``T_w = sum w_k Y_k`` is a convolution of (scaled) binomials. With
rational weights it lives on an integer lattice and can be computed exactly;
otherwise it is approximated by Monte Carlo.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Literal, Optional, Sequence

import numpy as np
from scipy import stats

from .core_types import BasketTable, EffectScale
from .errors import LatticeOverflow
from .estimators import resolve_weights

DEFAULT_SEED = 20230216
DEFAULT_REPS = 10_000
LATTICE_LIMIT = 10**6
MAX_DENOMINATOR = 10**4
MC_BLOCK = 4096

Method = Literal["exact", "mc"]


@dataclass(frozen=True)
class NullDistribution:
    support: np.ndarray
    pmf: np.ndarray
    method: str
    reps: Optional[int] = None
    seed: Optional[int] = None

    def sf(self, t: float) -> float:
        """P(T >= t), inclusive of ``t``."""
        return p_value(self, t)

    def upper_tails(self, t: np.ndarray) -> np.ndarray:
        """Vectorized ``P(T >= t)`` for many observed statistics."""
        t = np.asarray(t, dtype=float)
        # one reverse cumulative sum keeps the tails monotone in t
        tail = np.append(np.cumsum(self.pmf[::-1])[::-1], 0.0)
        idx = np.searchsorted(self.support, t - 1e-9 * np.maximum(1.0, np.abs(t)), "left")
        return np.minimum(tail[idx], 1.0)


@dataclass(frozen=True)
class ExactTestResult:
    statistic: float
    p_value: float
    weights: np.ndarray
    distribution: NullDistribution

    def reject(self, alpha: float) -> bool:
        return self.p_value <= alpha


def statistic(table: BasketTable, weights: Sequence[float]) -> float:
    w = np.asarray(weights, dtype=float)
    if np.any(w <= 0):
        raise ValueError("weights must be positive")
    return float(np.dot(w, table.y))


def _lattice(weights: np.ndarray, max_denominator: int) -> tuple[list[int], Fraction]:
    """Integer weights ``m_k`` and a unit ``u`` with ``w_k == m_k * u``."""
    fracs = []
    for w in weights:
        f = Fraction(float(w)).limit_denominator(max_denominator)
        if abs(float(f) - w) > 1e-9 * max(1.0, abs(w)):
            raise LatticeOverflow(
                f"weight {w!r} has no rational form with denominator <= {max_denominator}"
            )
        fracs.append(f)
    denom = math.lcm(*(f.denominator for f in fracs))
    ints = [int(f * denom) for f in fracs]
    g = math.gcd(*ints)
    return [m // g for m in ints], Fraction(g, denom)


def _exact(table, w, lattice_limit, max_denominator) -> NullDistribution:
    ints, unit = _lattice(w, max_denominator)
    size = sum(m * b.n for m, b in zip(ints, table.baskets)) + 1
    if size > lattice_limit:
        raise LatticeOverflow(
            f"exact null law needs {size} lattice points (limit {lattice_limit})"
        )
    pmf = np.zeros(size)
    reach = np.zeros(size, dtype=bool)
    pmf[0] = 1.0
    reach[0] = True
    top = 0
    for m, b in zip(ints, table.baskets):
        terms = stats.binom.pmf(np.arange(b.n + 1), b.n, b.pi0)
        new = np.zeros(size)
        new_reach = np.zeros(size, dtype=bool)
        width = top + 1
        for j, pj in enumerate(terms):
            lo = j * m
            new[lo : lo + width] += pj * pmf[:width]
            new_reach[lo : lo + width] |= reach[:width]
        pmf, reach = new, new_reach
        top += m * b.n
    idx = np.flatnonzero(reach)
    support = idx * float(unit)
    return NullDistribution(support, pmf[idx], "exact")


def _mc_block(n, pi0, w, seed, block, count):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))
    draws = rng.binomial(n.astype(np.int64), pi0, size=(count, len(n)))
    return draws @ w


def _mc(table, w, reps, seed, workers) -> NullDistribution:
    if reps < 1:
        raise ValueError("reps must be positive")
    n, p0 = table.n, table.pi0
    blocks = [(i, min(MC_BLOCK, reps - i * MC_BLOCK)) for i in range(-(-reps // MC_BLOCK))]

    def run(spec):
        return _mc_block(n, p0, w, seed, *spec)

    if workers and workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    values = np.concatenate(parts)
    # merge float noise so equal lattice values count as one support point
    values = np.round(values, 9)
    support, counts = np.unique(values, return_counts=True)
    return NullDistribution(support, counts / reps, "monte-carlo", reps, seed)


def null_distribution(
    table: BasketTable,
    weights: Sequence[float],
    method: Method = "exact",
    reps: int = DEFAULT_REPS,
    seed: int = DEFAULT_SEED,
    lattice_limit: int = LATTICE_LIMIT,
    max_denominator: int = MAX_DENOMINATOR,
    workers: int = 1,
) -> NullDistribution:
    """Null law of ``T_w``.

    Monte Carlo draws come in fixed-size blocks, each from its own substream
    keyed by ``(seed, block index)``, so the result does not depend on
    ``workers``.
    """
    w = np.asarray(weights, dtype=float)
    if w.shape != (table.K,) or np.any(w <= 0):
        raise ValueError("need one positive weight per basket")
    if method == "exact":
        return _exact(table, w, lattice_limit, max_denominator)
    if method in ("mc", "monte-carlo"):
        return _mc(table, w, int(reps), int(seed), workers)
    raise ValueError(f"unknown method {method!r}")


def p_value(dist: NullDistribution, t_obs: float, add_one: bool = False) -> float:
    """One-sided upper p-value ``P(T >= t_obs)``.

    ``add_one`` applies the ``(count + 1) / (reps + 1)`` correction to Monte
    Carlo distributions, which keeps the p-value valid at finite ``reps``.
    """
    tail = float(dist.upper_tails(np.array([t_obs]))[0])
    if dist.method == "exact" or not add_one:
        return tail
    count = int(round(tail * dist.reps))
    return (count + 1) / (dist.reps + 1)


def exact_test(
    table: BasketTable,
    scale: Optional[EffectScale] = None,
    weights: Optional[Sequence[float]] = None,
    method: Method = "exact",
    reps: int = DEFAULT_REPS,
    seed: int = DEFAULT_SEED,
    add_one: bool = False,
    fallback: bool = True,
    **kwargs,
) -> ExactTestResult:
    """Test the global null with ``T_w``.

    Weights default to the ones matching ``scale`` (unit for RD, ``1/pi0``
    for iwRR). An exact request whose weights overflow the lattice falls back
    to Monte Carlo unless ``fallback`` is false.
    """
    if weights is None:
        if scale is None:
            raise ValueError("give either scale or weights")
        weights = resolve_weights(table, scale)
    w = np.asarray(weights, dtype=float)
    t = statistic(table, w)
    try:
        dist = null_distribution(table, w, method, reps, seed, **kwargs)
    except LatticeOverflow:
        if not fallback or method != "exact":
            raise
        dist = null_distribution(table, w, "mc", reps, seed, workers=kwargs.get("workers", 1))
    return ExactTestResult(t, p_value(dist, t, add_one), w, dist)
