"""Reading and writing datasets, scenario files and result tables."""

from __future__ import annotations

import csv
import io
import json
import os
from importlib import resources
from pathlib import Path
from typing import Any, Iterable, TextIO, Union

from .core_types import BasketRecord, BasketTable
from .errors import DataError, DuplicateLabel, EmptyTable, ParseError, ScenarioError
from .simulation import EstimationMetrics, IdentificationMetrics, ScenarioSpec

PathLike = Union[str, os.PathLike]

REQUIRED_COLUMNS = ("label", "y", "n", "pi0")
OUTPUT_DIR_ENV = "BASKETMH_OUTPUT_DIR"


def _record(row: dict[str, Any], path, line) -> BasketRecord:
    def num(name, kind):
        raw = row.get(name)
        if raw is None or (isinstance(raw, str) and not raw.strip()):
            raise ParseError(f"missing value for {name!r}", path, line)
        try:
            value = kind(raw.strip()) if isinstance(raw, str) else raw
            if kind is int and isinstance(value, float):
                if not value.is_integer():
                    raise ValueError
                value = int(value)
            return kind(value)
        except (TypeError, ValueError):
            raise ParseError(f"{name}={raw!r} is not a valid {kind.__name__}", path, line) from None

    weight = row.get("weight")
    if isinstance(weight, str) and not weight.strip():
        weight = None
    rec = BasketRecord(
        label=str(row.get("label", "")).strip(),
        y=num("y", int),
        n=num("n", int),
        pi0=num("pi0", float),
        weight=None if weight is None else num("weight", float),
    )
    if not rec.label:
        raise ParseError("empty label", path, line)
    try:
        BasketTable((rec,))
    except DataError as exc:
        raise type(exc)(f"{path}:{line}: {exc}") from None
    return rec


def _assemble(records, lines, path) -> BasketTable:
    if not records:
        raise EmptyTable(f"{path}: no basket rows")
    seen = {}
    for rec, line in zip(records, lines):
        if rec.label in seen:
            raise DuplicateLabel(
                f"{path}:{line}: label {rec.label!r} already used on line {seen[rec.label]}"
            )
        seen[rec.label] = line
    return BasketTable(tuple(records))


def parse_csv(text: str, path: str = "<csv>") -> BasketTable:
    """Parse ``label,y,n,pi0[,weight]`` rows; ``#`` lines and blank lines are skipped."""
    numbered = [
        (i, ln) for i, ln in enumerate(text.splitlines(), start=1)
        if ln.strip() and not ln.lstrip().startswith("#")
    ]
    if not numbered:
        raise EmptyTable(f"{path}: file has no header or data")
    header_line, header = numbered[0]
    columns = [c.strip().lower() for c in next(csv.reader([header]))]
    missing = [c for c in REQUIRED_COLUMNS if c not in columns]
    if missing:
        raise ParseError(f"header lacks column(s) {missing}; expected label,y,n,pi0[,weight]",
                         path, header_line)
    extra = [c for c in columns if c not in REQUIRED_COLUMNS + ("weight",)]
    if extra:
        raise ParseError(f"unknown column(s) {extra}", path, header_line)
    records, lines = [], []
    for line_no, ln in numbered[1:]:
        cells = next(csv.reader([ln]))
        if len(cells) != len(columns):
            raise ParseError(f"expected {len(columns)} fields, found {len(cells)}", path, line_no)
        records.append(_record(dict(zip(columns, cells)), path, line_no))
        lines.append(line_no)
    return _assemble(records, lines, path)


def table_from_dict(data: Any, path: str = "<json>") -> BasketTable:
    rows = data.get("baskets") if isinstance(data, dict) else data
    if not isinstance(rows, list):
        raise ParseError("expected a list of baskets or an object with 'baskets'", path)
    records = []
    for i, row in enumerate(rows, start=1):
        if not isinstance(row, dict):
            raise ParseError(f"basket entry {i} is not an object", path)
        records.append(_record(row, path, f"basket {i}"))
    return _assemble(records, [f"basket {i}" for i in range(1, len(records) + 1)], path)


def table_to_dict(table: BasketTable) -> dict[str, Any]:
    rows = []
    for b in table.baskets:
        row = {"label": b.label, "y": b.y, "n": b.n, "pi0": b.pi0}
        if b.weight is not None:
            row["weight"] = b.weight
        rows.append(row)
    return {"baskets": rows}


def table_to_csv(table: BasketTable) -> str:
    buf = io.StringIO()
    cols = list(REQUIRED_COLUMNS) + (["weight"] if table.has_weights else [])
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for b in table.baskets:
        row = [b.label, b.y, b.n, repr(b.pi0)]
        if table.has_weights:
            row.append("" if b.weight is None else repr(b.weight))
        writer.writerow(row)
    return buf.getvalue()


def read_table(path: PathLike) -> BasketTable:
    """Load a dataset; ``.json`` files use the structured format, anything else CSV."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read file ({exc.strerror})", str(path)) from None
    except UnicodeDecodeError:
        raise ParseError("file is not valid UTF-8", str(path)) from None
    if path.suffix.lower() == ".json":
        if not text.strip():
            raise EmptyTable(f"{path}: empty file")
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, str(path), exc.lineno) from None
        return table_from_dict(data, str(path))
    return parse_csv(text, str(path))


def write_table(table: BasketTable, path: PathLike) -> None:
    path = Path(path)
    if path.suffix.lower() == ".json":
        path.write_text(json.dumps(table_to_dict(table), indent=2) + "\n", encoding="utf-8")
    else:
        path.write_text(table_to_csv(table), encoding="utf-8")


# --- bundled data ----------------------------------------------------------


def _data_dir():
    return resources.files("basketmh") / "data"


def dataset_path(name: str) -> Path:
    """Path of a bundled dataset (``"vemurafenib"`` or ``"imatinib"``)."""
    p = _data_dir() / f"{name}.csv"
    if not p.is_file():
        raise FileNotFoundError(name)
    return Path(str(p))


def load_dataset(name: str) -> BasketTable:
    return read_table(dataset_path(name))


def builtin_scenarios() -> list[str]:
    return sorted(p.name[:-5] for p in (_data_dir() / "scenarios").iterdir()
                  if p.name.endswith(".json"))


def load_scenario(source: PathLike) -> ScenarioSpec:
    """Read a scenario file, or a bundled scenario by name (e.g. ``table7_2ga``)."""
    path = Path(source)
    if not path.exists():
        bundled = _data_dir() / "scenarios" / f"{source}.json"
        if not bundled.is_file():
            raise ParseError("no such scenario file or bundled scenario", str(source))
        path = Path(str(bundled))
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, str(path), exc.lineno) from None
    if not isinstance(data, dict):
        raise ScenarioError("<root>", "scenario file must hold one object")
    return ScenarioSpec.from_dict(data)


# --- result tables ----------------------------------------------------------

ESTIMATION_COLUMNS = [
    "K", "dataset", "true", "estimator", "average", "cp_pct",
    "size_asymptotic_pct", "size_exact_pct", "bias", "mc_se", "n_valid", "n_failed",
]


def estimation_rows(m: EstimationMetrics) -> list[dict[str, Any]]:
    """Rows in the estimation-table layout; size columns only for null scenarios."""
    null = m.scenario.family == "null"
    rows = []
    for r in m.rows:
        rows.append({
            "K": m.scenario.K,
            "dataset": m.scenario.label,
            "true": r.true,
            "estimator": r.estimator,
            "average": r.mean,
            "cp_pct": 100 * r.coverage,
            "size_asymptotic_pct": 100 * r.size_asymptotic if null else "",
            "size_exact_pct": 100 * r.size_exact if null else "",
            "bias": r.bias,
            "mc_se": r.mc_se,
            "n_valid": r.n_valid,
            "n_failed": r.n_failed,
        })
    return rows


def identification_rows(m: IdentificationMetrics) -> list[dict[str, Any]]:
    """Rows in the identification-table layout: one row per item, one column per basket."""
    items = [
        ("Estimate", m.estimate),
        ("100xBias", m.bias100),
        ("100xMSE", m.mse100),
        ("%Reject", m.reject_pct),
    ]
    rows = []
    for item, values in items:
        row = {"scenario": m.scenario.label, "strategy": m.scenario.strategy.value, "item": item}
        row.update({f"basket_{k}": v for k, v in enumerate(values, start=1)})
        row["n_valid"] = m.n_valid
        row["n_failed"] = m.n_failed
        rows.append(row)
    return rows


def metrics_rows(m) -> list[dict[str, Any]]:
    if isinstance(m, IdentificationMetrics):
        return identification_rows(m)
    return estimation_rows(m)


def write_csv_rows(rows: Iterable[dict[str, Any]], out: TextIO) -> None:
    rows = list(rows)
    if not rows:
        return
    writer = csv.DictWriter(out, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt_cell(v) for k, v in row.items()})


def _fmt_cell(v):
    if isinstance(v, float):
        return repr(v)
    return v


def resolve_output(path: PathLike) -> Path:
    """Relative output paths land in ``$BASKETMH_OUTPUT_DIR`` when it is set."""
    p = Path(path)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p
