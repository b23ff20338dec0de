"""Operating characteristics by simulation.

Two studies are supported. The estimation study checks bias, Wald coverage
and one-sided test size of the pooled estimators. The identification study
selects a subclass model by minimum GIC in every replicate and records how
often each basket is declared effective.

Replicate ``r`` draws its data from its own random substream keyed by
``(seed, r)``. Per-replicate results are reduced in replicate order, so the
output for a given seed is bit-identical for any number of workers.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Optional

import numpy as np

from .core_types import IWRR, RD, RR, BasketTable, EffectScale
from .errors import EstimationError, LatticeOverflow, ScenarioError
from .estimators import estimate, misspecification_limit, resolve_weights
from .exact_test import DEFAULT_SEED, null_distribution
from .gic import Strategy, enumerate_models, try_score_models
from .links import link

DESK_REPS = 2_000
FULL_REPS = 10_000

ESTIMATORS: dict[str, EffectScale] = {"MH-RD": RD, "MH-RR": RR, "MH-iwRR": IWRR}
FAMILY_ESTIMATORS = {
    "null": ("MH-RD", "MH-RR", "MH-iwRR"),
    "rd": ("MH-RD",),
    "rr": ("MH-RR", "MH-iwRR"),
}


@dataclass(frozen=True)
class ScenarioSpec:
    label: str
    sizes: tuple[int, ...]
    null_rates: tuple[float, ...]
    true_rates: tuple[float, ...]
    kind: str = "estimation"
    family: str = "null"
    effect_scale: Optional[str] = None
    effects: Optional[tuple[float, ...]] = None
    replicates: int = DESK_REPS
    seed: int = DEFAULT_SEED
    strategy: Strategy = Strategy.TWO
    alpha: float = 0.05
    test_alpha: float = 0.025
    min_subclass_patients: int = 10
    estimators: tuple[str, ...] = ()
    note: str = ""

    def __post_init__(self):
        _validate(self)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ScenarioSpec":
        """Build from the scenario-file mapping, deriving true rates if needed."""
        d = dict(data)
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known - {"K"}
        if unknown:
            raise ScenarioError(sorted(unknown)[0], "unknown field")
        for req in ("label", "sizes", "null_rates"):
            if req not in d:
                raise ScenarioError(req, "required")
        try:
            sizes = tuple(int(v) for v in d["sizes"])
        except (TypeError, ValueError):
            raise ScenarioError("sizes", "must be a list of integers") from None
        try:
            null_rates = tuple(float(v) for v in d["null_rates"])
        except (TypeError, ValueError):
            raise ScenarioError("null_rates", "must be a list of numbers") from None
        if "K" in d and int(d["K"]) != len(sizes):
            raise ScenarioError("K", f"says {d['K']} but sizes has {len(sizes)} entries")
        scale = d.get("effect_scale")
        effects = d.get("effects")
        if "true_rates" in d:
            true_rates = tuple(float(v) for v in d["true_rates"])
        elif scale is not None and effects is not None:
            effects = tuple(float(v) for v in effects)
            if len(effects) != len(null_rates):
                raise ScenarioError("effects", f"need {len(null_rates)} values, got {len(effects)}")
            if str(scale).upper() == "RD":
                true_rates = tuple(p + e for p, e in zip(null_rates, effects))
            elif str(scale).upper() == "RR":
                true_rates = tuple(p * e for p, e in zip(null_rates, effects))
            else:
                raise ScenarioError("effect_scale", f"must be RD or RR, got {scale!r}")
        else:
            raise ScenarioError("true_rates", "give true_rates or effect_scale with effects")
        if effects is not None:
            effects = tuple(float(v) for v in effects)
        family = d.get("family")
        if family is None:
            if scale is None or all(math.isclose(t, p) for t, p in zip(true_rates, null_rates)):
                family = "null"
            else:
                family = str(scale).lower()
        kw = {
            k: d[k]
            for k in ("kind", "replicates", "seed", "alpha", "test_alpha",
                      "min_subclass_patients", "note")
            if k in d
        }
        if "strategy" in d:
            try:
                kw["strategy"] = Strategy.parse(d["strategy"])
            except ValueError:
                raise ScenarioError("strategy", f"unknown strategy {d['strategy']!r}") from None
        if "estimators" in d:
            kw["estimators"] = tuple(d["estimators"])
        return cls(
            label=str(d["label"]),
            sizes=sizes,
            null_rates=null_rates,
            true_rates=true_rates,
            family=family,
            effect_scale=None if scale is None else str(scale).upper(),
            effects=effects,
            **kw,
        )

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["strategy"] = self.strategy.value
        return d

    def replace(self, **changes) -> "ScenarioSpec":
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update({k: v for k, v in changes.items() if v is not None})
        if "strategy" in changes and changes["strategy"] is not None:
            d["strategy"] = Strategy.parse(changes["strategy"])
        return ScenarioSpec(**d)

    @property
    def K(self) -> int:
        return len(self.sizes)

    @property
    def estimator_names(self) -> tuple[str, ...]:
        return self.estimators or FAMILY_ESTIMATORS[self.family]

    def base_table(self) -> BasketTable:
        return BasketTable.from_arrays([0] * self.K, self.sizes, self.null_rates)


def _validate(s: ScenarioSpec) -> None:
    if not s.label:
        raise ScenarioError("label", "must be non-empty")
    if len(s.sizes) == 0:
        raise ScenarioError("sizes", "need at least one basket")
    if any(n < 1 for n in s.sizes):
        raise ScenarioError("sizes", "every size must be a positive integer")
    for name, vals in (("null_rates", s.null_rates), ("true_rates", s.true_rates)):
        if len(vals) != len(s.sizes):
            raise ScenarioError(name, f"need {len(s.sizes)} values, got {len(vals)}")
        if any(not 0.0 < v < 1.0 for v in vals):
            raise ScenarioError(name, "every rate must lie strictly between 0 and 1")
    if s.kind not in ("estimation", "identification"):
        raise ScenarioError("kind", "must be 'estimation' or 'identification'")
    if s.family not in FAMILY_ESTIMATORS:
        raise ScenarioError("family", f"must be one of {sorted(FAMILY_ESTIMATORS)}")
    if not isinstance(s.replicates, int) or s.replicates < 1:
        raise ScenarioError("replicates", "must be a positive integer")
    if not 0 < s.alpha < 1:
        raise ScenarioError("alpha", "must lie in (0, 1)")
    if not 0 < s.test_alpha < 1:
        raise ScenarioError("test_alpha", "must lie in (0, 1)")
    for name in s.estimators:
        if name not in ESTIMATORS:
            raise ScenarioError("estimators", f"unknown estimator {name!r}")


def replicate_rng(seed: int, replicate_index: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(replicate_index,)))
    )


def generate_dataset(spec: ScenarioSpec, replicate_index: int) -> BasketTable:
    rng = replicate_rng(spec.seed, replicate_index)
    y = rng.binomial(np.array(spec.sizes, dtype=np.int64), np.array(spec.true_rates))
    return spec.base_table().with_counts(y)


# --- estimation study ---------------------------------------------------


@dataclass(frozen=True)
class EstimatorMetrics:
    estimator: str
    true: float
    mean: float
    bias: float
    mc_se: float
    coverage: float
    size_asymptotic: float
    size_exact: float
    n_valid: int
    n_failed: int
    failures: dict[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class EstimationMetrics:
    scenario: ScenarioSpec
    rows: tuple[EstimatorMetrics, ...]

    def row(self, estimator: str) -> EstimatorMetrics:
        for r in self.rows:
            if r.estimator == estimator:
                return r
        raise KeyError(estimator)


def _estimation_chunk(spec: ScenarioSpec, start: int, stop: int):
    out = []
    for r in range(start, stop):
        table = generate_dataset(spec, r)
        rec = {}
        for name in spec.estimator_names:
            try:
                est = estimate(table, ESTIMATORS[name], spec.alpha)
                rec[name] = (est.point, est.ci_low, est.ci_high, None)
            except EstimationError as exc:
                rec[name] = (math.nan, math.nan, math.nan, type(exc).__name__)
        out.append((table.y.copy(), rec))
    return out


def _run_chunks(func, spec: ScenarioSpec, workers: int, chunk: int = 250):
    bounds = [(i, min(i + chunk, spec.replicates)) for i in range(0, spec.replicates, chunk)]
    if workers and workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(func, [spec] * len(bounds), *zip(*bounds)))
    else:
        parts = [func(spec, a, b) for a, b in bounds]
    return [item for part in parts for item in part]


def run_estimation_study(spec: ScenarioSpec, workers: int = 1) -> EstimationMetrics:
    """Bias, coverage and one-sided size of each pooled estimator.

    The true value of each estimator is its large-strata limit under the
    scenario's true rates. The asymptotic test rejects when the two-sided
    interval's lower bound exceeds the null value; the exact test uses
    ``T_w`` with the estimator's weights and rejects when ``p <= test_alpha``.
    """
    records = _run_chunks(_estimation_chunk, spec, workers)
    base = spec.base_table()
    ys = np.array([y for y, _ in records])
    rows = []
    for name in spec.estimator_names:
        scale = ESTIMATORS[name]
        true = misspecification_limit(base, spec.true_rates, scale)
        w = resolve_weights(base, scale)
        try:
            dist = null_distribution(base, w, "exact")
        except LatticeOverflow:
            dist = null_distribution(base, w, "mc", reps=FULL_REPS * 10, seed=spec.seed)
        pvals = dist.upper_tails(ys @ w)
        exact_rej = pvals <= spec.test_alpha

        vals = np.array([rec[name][:3] for _, rec in records])
        failed = Counter(rec[name][3] for _, rec in records if rec[name][3])
        ok = ~np.isnan(vals[:, 0])
        pts, lo, hi = vals[ok, 0], vals[ok, 1], vals[ok, 2]
        nv = int(ok.sum())
        mean = float(pts.mean()) if nv else math.nan
        rows.append(
            EstimatorMetrics(
                estimator=name,
                true=true,
                mean=mean,
                bias=mean - true,
                mc_se=float(pts.std(ddof=1) / math.sqrt(nv)) if nv > 1 else math.nan,
                coverage=float(np.mean((lo <= true) & (true <= hi))) if nv else math.nan,
                size_asymptotic=float(np.mean(lo > scale.null_value)) if nv else math.nan,
                size_exact=float(np.mean(exact_rej)),
                n_valid=nv,
                n_failed=int(sum(failed.values())),
                failures=dict(failed),
            )
        )
    return EstimationMetrics(spec, tuple(rows))


# --- identification study -----------------------------------------------


@dataclass(frozen=True)
class IdentificationMetrics:
    scenario: ScenarioSpec
    estimate: tuple[float, ...]
    bias100: tuple[float, ...]
    mse100: tuple[float, ...]
    reject_pct: tuple[float, ...]
    n_valid: int
    n_failed: int
    model_failures: int
    selected: dict[str, int]


def _identification_chunk(spec: ScenarioSpec, start: int, stop: int):
    scale = RD
    models = enumerate_models(
        spec.K, spec.strategy, spec.min_subclass_patients, spec.base_table()
    )
    out = []
    for r in range(start, stop):
        table = generate_dataset(spec, r)
        results, skipped = try_score_models(table, models, scale, spec.alpha)
        if not results:
            out.append((None, None, None, skipped))
            continue
        best = min(results, key=lambda g: (g.gic, g.partition.assignment))
        fitted = np.empty(spec.K)
        reject = np.zeros(spec.K, dtype=bool)
        for fit in best.subclasses:
            h, _ = link(scale, table.pi0[list(fit.members)], fit.point)
            fitted[list(fit.members)] = h
            reject[list(fit.members)] = fit.estimate.ci_low > scale.null_value
        out.append((fitted, reject, best.partition.label(), skipped))
    return out


def run_identification_study(spec: ScenarioSpec, workers: int = 1) -> IdentificationMetrics:
    """Per-basket accuracy and %Reject of minimum-GIC subclass selection.

    A basket is declared effective when the lower bound of its subclass's
    two-sided Wald interval for the risk difference exceeds zero. The
    per-basket estimate is the fitted rate ``pi0_k + delta_subclass``.
    """
    records = _run_chunks(_identification_chunk, spec, workers)
    good = [r for r in records if r[0] is not None]
    model_failures = sum(r[3] for r in records)
    truth = np.array(spec.true_rates)
    if good:
        fitted = np.array([r[0] for r in good])
        reject = np.array([r[1] for r in good])
        est = fitted.mean(axis=0)
        bias100 = 100 * (est - truth)
        mse100 = 100 * ((fitted - truth) ** 2).mean(axis=0)
        rej = 100 * reject.mean(axis=0)
    else:
        est = bias100 = mse100 = rej = np.full(spec.K, math.nan)
    selected = Counter(r[2] for r in good)
    return IdentificationMetrics(
        scenario=spec,
        estimate=tuple(map(float, est)),
        bias100=tuple(map(float, bias100)),
        mse100=tuple(map(float, mse100)),
        reject_pct=tuple(map(float, rej)),
        n_valid=len(good),
        n_failed=len(records) - len(good),
        model_failures=model_failures,
        selected=dict(sorted(selected.items(), key=lambda kv: (-kv[1], kv[0]))),
    )


def run_study(spec: ScenarioSpec, workers: int = 1):
    if spec.kind == "identification":
        return run_identification_study(spec, workers)
    return run_estimation_study(spec, workers)


__all__ = [
    "ScenarioSpec",
    "EstimatorMetrics",
    "EstimationMetrics",
    "IdentificationMetrics",
    "generate_dataset",
    "replicate_rng",
    "run_estimation_study",
    "run_identification_study",
    "run_study",
]
