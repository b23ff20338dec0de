"""Shared data model: basket tables, effect scales, estimates and partitions."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    DuplicateLabel,
    EmptySubclass,
    EmptyTable,
    InvalidCount,
    InvalidNullRate,
    InvalidWeight,
)


@dataclass(frozen=True)
class BasketRecord:
    label: str
    y: int
    n: int
    pi0: float
    weight: Optional[float] = None

    @property
    def rate(self) -> float:
        return self.y / self.n


@dataclass(frozen=True)
class BasketTable:
    """Aggregate responder counts for the K baskets of one trial.

    Baskets keep their input order; reports number them 1..K in that order.
    Construction validates every invariant, so a ``BasketTable`` that exists
    is always a valid one.
    """

    baskets: tuple[BasketRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "baskets", tuple(self.baskets))
        _check(self)

    @classmethod
    def from_arrays(
        cls,
        y: Sequence[int],
        n: Sequence[int],
        pi0: Sequence[float] | float,
        labels: Optional[Sequence[str]] = None,
        weights: Optional[Sequence[Optional[float]]] = None,
    ) -> "BasketTable":
        k = len(n)
        if len(y) != k:
            raise InvalidCount(f"y has {len(y)} entries but n has {k}")
        if np.isscalar(pi0):
            pi0 = [float(pi0)] * k
        if len(pi0) != k:
            raise InvalidNullRate(f"pi0 has {len(pi0)} entries but n has {k}")
        if labels is None:
            labels = [str(i + 1) for i in range(k)]
        if weights is None:
            weights = [None] * k
        records = [
            BasketRecord(
                str(lab),
                _as_int(yy, "y"),
                _as_int(nn, "n"),
                float(p),
                None if w is None else float(w),
            )
            for lab, yy, nn, p, w in zip(labels, y, n, pi0, weights)
        ]
        return cls(tuple(records))

    @property
    def K(self) -> int:
        return len(self.baskets)

    @cached_property
    def y(self) -> np.ndarray:
        return np.array([b.y for b in self.baskets], dtype=float)

    @cached_property
    def n(self) -> np.ndarray:
        return np.array([b.n for b in self.baskets], dtype=float)

    @cached_property
    def pi0(self) -> np.ndarray:
        return np.array([b.pi0 for b in self.baskets], dtype=float)

    @property
    def labels(self) -> list[str]:
        return [b.label for b in self.baskets]

    @property
    def has_weights(self) -> bool:
        return any(b.weight is not None for b in self.baskets)

    @property
    def total_n(self) -> int:
        return sum(b.n for b in self.baskets)

    @property
    def rates(self) -> np.ndarray:
        return self.y / self.n

    def subset(self, indices: Iterable[int]) -> "BasketTable":
        """Slice by 0-based basket indices, keeping the given order."""
        return BasketTable(tuple(self.baskets[i] for i in indices))

    def with_counts(self, y: Sequence[int]) -> "BasketTable":
        """Same baskets with new responder counts (used by simulation)."""
        return BasketTable(
            tuple(
                BasketRecord(b.label, int(v), b.n, b.pi0, b.weight)
                for b, v in zip(self.baskets, y)
            )
        )


def _as_int(value, name) -> int:
    if isinstance(value, (bool, np.bool_)):
        raise InvalidCount(f"{name} must be an integer, got {value!r}")
    try:
        as_float = float(value)
    except (TypeError, ValueError):
        raise InvalidCount(f"{name} must be an integer, got {value!r}") from None
    if not math.isfinite(as_float) or as_float != int(as_float):
        raise InvalidCount(f"{name} must be an integer, got {value!r}")
    return int(as_float)


def _check(table: BasketTable) -> None:
    if not table.baskets:
        raise EmptyTable("table has no baskets")
    seen = set()
    for i, b in enumerate(table.baskets, start=1):
        where = f"basket {i} ({b.label!r})"
        if b.label in seen:
            raise DuplicateLabel(f"{where}: label used more than once")
        seen.add(b.label)
        if not isinstance(b.n, (int, np.integer)) or b.n < 1:
            raise InvalidCount(f"{where}: n must be a positive integer, got {b.n!r}")
        if not isinstance(b.y, (int, np.integer)) or b.y < 0 or b.y > b.n:
            raise InvalidCount(f"{where}: need 0 <= y <= n, got y={b.y!r}, n={b.n}")
        if not (isinstance(b.pi0, (int, float)) and 0.0 < b.pi0 < 1.0):
            raise InvalidNullRate(f"{where}: pi0 must lie in (0, 1), got {b.pi0!r}")
        if b.weight is not None and not (math.isfinite(b.weight) and b.weight > 0):
            raise InvalidWeight(f"{where}: weight must be positive, got {b.weight!r}")


def validate_table(raw: BasketTable) -> BasketTable:
    """Return ``raw`` unchanged if it satisfies every table invariant."""
    _check(raw)
    return raw


class Scale(str, enum.Enum):
    RD = "RD"
    RR = "RR"
    OR = "OR"


class WeightPolicy(str, enum.Enum):
    ONE = "constant-one"
    INVERSE_PI0 = "inverse-pi0"
    USER = "user-supplied"


@dataclass(frozen=True)
class EffectScale:
    """Effect measure plus the weight policy used by RR and OR."""

    scale: Scale
    weights: WeightPolicy = WeightPolicy.ONE

    def __post_init__(self):
        object.__setattr__(self, "scale", Scale(self.scale))
        object.__setattr__(self, "weights", WeightPolicy(self.weights))
        if self.scale is Scale.RD and self.weights is not WeightPolicy.ONE:
            raise ValueError("risk difference always uses constant weights")

    @classmethod
    def parse(cls, name: str) -> "EffectScale":
        key = name.strip().lower()
        try:
            return _NAMED_SCALES[key]
        except KeyError:
            choices = ", ".join(sorted(_NAMED_SCALES))
            raise ValueError(f"unknown scale {name!r}; choose from {choices}") from None

    @property
    def name(self) -> str:
        if self.scale is Scale.RR and self.weights is WeightPolicy.INVERSE_PI0:
            return "iwRR"
        if self.weights is WeightPolicy.INVERSE_PI0:
            return f"iw{self.scale.value}"
        if self.weights is WeightPolicy.USER:
            return f"{self.scale.value}(w)"
        return self.scale.value

    @property
    def null_value(self) -> float:
        return 0.0 if self.scale is Scale.RD else 1.0

    def __str__(self) -> str:
        return self.name


RD = EffectScale(Scale.RD)
RR = EffectScale(Scale.RR)
IWRR = EffectScale(Scale.RR, WeightPolicy.INVERSE_PI0)
OR = EffectScale(Scale.OR)
IWOR = EffectScale(Scale.OR, WeightPolicy.INVERSE_PI0)

_NAMED_SCALES = {
    "rd": RD,
    "rr": RR,
    "iwrr": IWRR,
    "or": OR,
    "iwor": IWOR,
    "rr-user": EffectScale(Scale.RR, WeightPolicy.USER),
    "or-user": EffectScale(Scale.OR, WeightPolicy.USER),
}


@dataclass(frozen=True)
class EffectEstimate:
    """Pooled point estimate with its variance and Wald interval."""

    scale: EffectScale
    point: float
    variance: float
    ci_low: float
    ci_high: float
    alpha: float
    n_effective: int

    @property
    def se(self) -> float:
        return math.sqrt(self.variance)

    def excludes_null(self) -> bool:
        """True when the interval lies entirely above the null value."""
        return self.ci_low > self.scale.null_value


@dataclass(frozen=True, order=True)
class Partition:
    """Assignment of K baskets to L non-empty subclasses.

    ``assignment[i]`` is the 1-based subclass id of basket ``i``. Instances
    built through :func:`canonicalize_partition` or :meth:`from_blocks` are in
    canonical form: ids appear in order of their first member.
    """

    assignment: tuple[int, ...]
    L: int = field(init=False, compare=False)

    def __post_init__(self):
        assignment = tuple(int(a) for a in self.assignment)
        object.__setattr__(self, "assignment", assignment)
        object.__setattr__(self, "L", max(assignment) if assignment else 0)

    @classmethod
    def from_blocks(cls, blocks: Iterable[Iterable[int]], K: Optional[int] = None) -> "Partition":
        """Build from 0-based member lists; every basket must appear exactly once."""
        blocks = [sorted(set(b)) for b in blocks]
        members = [i for b in blocks for i in b]
        if K is None:
            K = len(members)
        if sorted(members) != list(range(K)):
            raise ValueError(f"blocks {blocks} do not partition 0..{K - 1}")
        assignment = [0] * K
        for sub, block in enumerate(blocks, start=1):
            if not block:
                raise EmptySubclass(f"subclass {sub} is empty")
            for i in block:
                assignment[i] = sub
        return canonicalize_partition(cls(tuple(assignment)))

    @classmethod
    def single(cls, K: int) -> "Partition":
        return cls((1,) * K)

    @property
    def K(self) -> int:
        return len(self.assignment)

    def blocks(self) -> tuple[tuple[int, ...], ...]:
        """Members of each subclass (0-based), in subclass-id order."""
        out = [[] for _ in range(self.L)]
        for i, a in enumerate(self.assignment):
            out[a - 1].append(i)
        return tuple(tuple(b) for b in out)

    def label(self, names: Optional[Sequence[str]] = None) -> str:
        """Render as ``"1 2 6/ 3 4 5"`` (1-based numbers unless names given)."""
        def show(i):
            return str(i + 1) if names is None else str(names[i])

        return "/ ".join(" ".join(show(i) for i in b) for b in self.blocks())


def canonicalize_partition(p: Partition) -> Partition:
    """Relabel subclasses in order of first appearance.

    Raises :class:`EmptySubclass` when an id between 1 and the largest id
    has no members, or when ids are not positive.
    """
    if any(a < 1 for a in p.assignment):
        raise EmptySubclass(f"subclass ids must be >= 1, got {p.assignment}")
    used = set(p.assignment)
    missing = [i for i in range(1, p.L + 1) if i not in used]
    if missing:
        raise EmptySubclass(f"subclass id(s) {missing} have no members")
    relabel: dict[int, int] = {}
    for a in p.assignment:
        if a not in relabel:
            relabel[a] = len(relabel) + 1
    return Partition(tuple(relabel[a] for a in p.assignment))
