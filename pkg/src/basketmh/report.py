"""Analysis and ranking reports as aligned text or JSON-ready dictionaries.

Displayed rates and effects carry 3 decimals and p-values 4; the dictionary
forms keep full precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

from .core_types import RD, RR, BasketTable, EffectEstimate, EffectScale
from .errors import DegenerateFit
from .estimators import basket_effects, clopper_pearson, estimate
from .exact_test import DEFAULT_REPS, DEFAULT_SEED, ExactTestResult, exact_test
from .gic import GicRanking
from .gof import GofResult, gof_test


def fmt(x: float, digits: int = 3) -> str:
    if x is None:
        return ""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    s = f"{x:.{digits}f}"
    # avoid "-0.000"
    return s[1:] if s.startswith("-") and float(s) == 0 else s


def fmt_p(p: float) -> str:
    return fmt(p, 4)


@dataclass(frozen=True)
class BasketRow:
    label: str
    y: int
    n: int
    rate: float
    cp_low: float
    cp_high: float
    pi0: float
    rd: float
    rr: float


@dataclass(frozen=True)
class ScaleSummary:
    scale: EffectScale
    estimate: EffectEstimate
    test: ExactTestResult
    gof: Optional[GofResult] = None
    gof_note: str = ""


@dataclass(frozen=True)
class AnalysisReport:
    table: BasketTable
    alpha: float
    rows: tuple[BasketRow, ...]
    summaries: tuple[ScaleSummary, ...]
    method: str
    reps: int
    seed: int
    ranking: Optional[GicRanking] = None
    notes: tuple[str, ...] = field(default_factory=tuple)

    def summary(self, name: str) -> ScaleSummary:
        for s in self.summaries:
            if s.scale.name.lower() == name.lower():
                return s
        raise KeyError(name)


def build_report(
    table: BasketTable,
    scales: Sequence[EffectScale] = (RD, RR),
    alpha: float = 0.05,
    method: str = "exact",
    reps: int = DEFAULT_REPS,
    seed: int = DEFAULT_SEED,
    add_one: bool = False,
    ranking: Optional[GicRanking] = None,
) -> AnalysisReport:
    """Per-basket summaries plus, for each scale, the pooled estimate, test and GOF.

    Estimation errors propagate; a goodness-of-fit test that cannot be run
    (one basket, or a fitted rate outside (0, 1)) is noted instead.
    """
    rd = basket_effects(table, RD)
    rr = basket_effects(table, RR)
    rows = []
    for k, b in enumerate(table.baskets):
        lo, hi = clopper_pearson(b.y, b.n, alpha)
        rows.append(BasketRow(b.label, b.y, b.n, b.rate, lo, hi, b.pi0, float(rd[k]), float(rr[k])))
    summaries = []
    for sc in scales:
        est = estimate(table, sc, alpha)
        test = exact_test(table, sc, method=method, reps=reps, seed=seed, add_one=add_one)
        gof, note = None, ""
        try:
            gof = gof_test(table, sc)
        except (ValueError, DegenerateFit) as exc:
            note = str(exc)
        summaries.append(ScaleSummary(sc, est, test, gof, note))
    return AnalysisReport(table, alpha, tuple(rows), tuple(summaries), method, reps, seed, ranking)


# --- text rendering ---------------------------------------------------------


def _align(rows: list[list[str]], right: Sequence[bool]) -> list[str]:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    out = []
    for r in rows:
        cells = [c.rjust(w) if ra else c.ljust(w) for c, w, ra in zip(r, widths, right)]
        out.append("  ".join(cells).rstrip())
    return out


def _ci(lo: float, hi: float) -> str:
    return f"({fmt(lo)}, {fmt(hi)})"


def _method_text(test: ExactTestResult) -> str:
    d = test.distribution
    if d.method == "exact":
        return "exact"
    return f"MC reps={d.reps} seed={d.seed}"


def format_report(report: AnalysisReport) -> str:
    conf = f"{100 * (1 - report.alpha):g}%"
    head = ["basket", "Y", "n", "rate", f"({conf} CI)", "pi0", "RD", "RR"]
    body = [head]
    for i, r in enumerate(report.rows, start=1):
        body.append([
            f"{i}: {r.label}", str(r.y), str(r.n), fmt(r.rate), _ci(r.cp_low, r.cp_high),
            fmt(r.pi0), fmt(r.rd), fmt(r.rr),
        ])
    lines = _align(body, [False, True, True, True, False, True, True, True])
    lines.append("")

    head = ["Mantel-Haenszel", "estimate", f"({conf} CI)", "T", "P (test)", "test", "GOF Z2", "df", "GOF P"]
    body = [head]
    for s in report.summaries:
        e, t, g = s.estimate, s.test, s.gof
        body.append([
            f"MH-{s.scale.name}", fmt(e.point), _ci(e.ci_low, e.ci_high),
            fmt(t.statistic), fmt_p(t.p_value), _method_text(t),
            fmt(g.statistic) if g else "-", str(g.df) if g else "-",
            fmt_p(g.p_value) if g else "-",
        ])
    lines += _align(body, [False, True, False, True, True, False, True, True, True])
    for s in report.summaries:
        if s.gof_note:
            lines.append(f"note: GOF for MH-{s.scale.name} not available: {s.gof_note}")
    if report.method != "exact" or any(s.test.distribution.method != "exact" for s in report.summaries):
        lines.append(f"seed: {report.seed}")
    if report.ranking is not None:
        lines.append("")
        lines.append(format_ranking(report.ranking, report.table))
    return "\n".join(lines)


def _subclass_cells(result, table: BasketTable) -> list[str]:
    cells = []
    for s in result.subclasses:
        members = " ".join(str(i + 1) for i in s.members)
        cells.append(f"{{{members}}} {fmt(s.point)} {_ci(s.estimate.ci_low, s.estimate.ci_high)}")
    return cells


def _model_string(result) -> str:
    # blocks in canonical order; subclass rows are sorted by estimate instead
    return result.partition.label()


def _rank_rows(ranking: GicRanking, top: Optional[int], last: Optional[int]):
    n = len(ranking)
    idx = list(range(n))
    if top is None and last is None:
        return idx
    keep = set(idx[: top or 0])
    if last:
        keep |= set(idx[max(0, n - last):])
    return sorted(keep)


def format_ranking(
    ranking: GicRanking,
    table: BasketTable,
    top: Optional[int] = None,
    last: Optional[int] = None,
) -> str:
    """Rank, GIC, model string and per-subclass estimates, one model per line."""
    scale = ranking.scale.name if ranking.scale else ""
    head = ["rank", "GIC", "model", f"subclass MH-{scale} estimates (CI)", ""]
    body = [head]
    shown = _rank_rows(ranking, top, last)
    prev = -1
    lines_gap = []
    for i in shown:
        r = ranking[i]
        if prev >= 0 and i != prev + 1:
            lines_gap.append(len(body))
        flag = "*" if ranking.near_optimal[i] else ""
        body.append([str(i + 1), fmt(r.gic), _model_string(r), "; ".join(_subclass_cells(r, table)), flag])
        prev = i
    lines = _align(body, [True, True, False, False, False])
    for pos in reversed(lines_gap):
        lines.insert(pos, "...")
    lines.append(
        f"{len(ranking)} models ({ranking.strategy.value}); "
        f"* within {ranking.near_optimal_window:g} of the minimum GIC"
    )
    return "\n".join(lines)


# --- machine-readable forms -------------------------------------------------


def _num(x: float) -> Any:
    # JSON has no inf or nan
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def estimate_dict(e: EffectEstimate) -> dict[str, Any]:
    return {
        "scale": e.scale.name,
        "point": _num(e.point),
        "variance": _num(e.variance),
        "ci_low": _num(e.ci_low),
        "ci_high": _num(e.ci_high),
        "alpha": e.alpha,
    }


def report_dict(report: AnalysisReport) -> dict[str, Any]:
    out: dict[str, Any] = {
        "alpha": report.alpha,
        "method": report.method,
        "reps": report.reps if report.method != "exact" else None,
        "seed": report.seed,
        "baskets": [
            {k: _num(v) for k, v in r.__dict__.items()} for r in report.rows
        ],
        "summaries": [],
    }
    for s in report.summaries:
        d = s.test.distribution
        out["summaries"].append({
            "estimate": estimate_dict(s.estimate),
            "test": {
                "statistic": s.test.statistic,
                "p_value": s.test.p_value,
                "weights": [float(w) for w in s.test.weights],
                "method": d.method,
                "reps": d.reps,
                "seed": d.seed,
            },
            "gof": None if s.gof is None else {
                "statistic": s.gof.statistic, "df": s.gof.df, "p_value": s.gof.p_value,
            },
            "gof_note": s.gof_note or None,
        })
    if report.ranking is not None:
        out["ranking"] = ranking_dict(report.ranking)
    return out


def ranking_dict(ranking: GicRanking, top: Optional[int] = None,
                 last: Optional[int] = None) -> dict[str, Any]:
    models = []
    for i in _rank_rows(ranking, top, last):
        r = ranking[i]
        models.append({
            "rank": i + 1,
            "gic": r.gic,
            "loglik": r.loglik,
            "bias": r.bias,
            "model": _model_string(r),
            "assignment": list(r.partition.assignment),
            "near_optimal": ranking.near_optimal[i],
            "subclasses": [
                {"members": [m + 1 for m in s.members], **estimate_dict(s.estimate),
                 "gic": s.gic}
                for s in r.subclasses
            ],
        })
    return {
        "strategy": ranking.strategy.value,
        "scale": ranking.scale.name if ranking.scale else None,
        "window": ranking.near_optimal_window,
        "n_models": len(ranking),
        "models": models,
    }


def ranking_rows(ranking: GicRanking, top: Optional[int] = None,
                 last: Optional[int] = None) -> list[dict[str, Any]]:
    """Flat CSV rows: one per (model, subclass)."""
    rows = []
    for m in ranking_dict(ranking, top, last)["models"]:
        for j, s in enumerate(m["subclasses"], start=1):
            rows.append({
                "rank": m["rank"], "gic": m["gic"], "model": m["model"],
                "near_optimal": m["near_optimal"], "subclass": j,
                "members": " ".join(map(str, s["members"])),
                "estimate": s["point"], "ci_low": s["ci_low"], "ci_high": s["ci_high"],
            })
    return rows


def gof_dict(g: GofResult, scale: EffectScale) -> dict[str, Any]:
    return {
        "scale": scale.name,
        "statistic": g.statistic,
        "df": g.df,
        "p_value": g.p_value,
        "pearson": g.pearson,
        "fitted_rates": [float(v) for v in g.fitted_rates],
    }


def exact_test_dict(t: ExactTestResult, label: str) -> dict[str, Any]:
    d = t.distribution
    return {
        "scale": label,
        "statistic": t.statistic,
        "p_value": t.p_value,
        "weights": [float(w) for w in t.weights],
        "method": d.method,
        "reps": d.reps,
        "seed": d.seed,
    }


__all__ = [
    "AnalysisReport", "BasketRow", "ScaleSummary", "build_report", "format_report",
    "format_ranking", "report_dict", "ranking_dict", "ranking_rows", "gof_dict",
    "exact_test_dict", "fmt", "fmt_p",
]
