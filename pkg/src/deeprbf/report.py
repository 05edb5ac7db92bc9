"""Comparison tables (published fixture and computed reports) and plot-data files."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .data import atomic_write
from .errors import ConfigError, DataError, MissingArtifactError

FIXTURE_NAME = "mae_by_vehicle_count.csv"


@dataclass(frozen=True, eq=False)
class ComparisonTable:
    """Rows keyed by ``row_key`` values, one column per method."""

    row_key: str
    rows: tuple[str, ...]
    columns: tuple[str, ...]
    values: np.ndarray  # (len(rows), len(columns))
    source: str = "computed"
    decimals: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.shape != (len(self.rows), len(self.columns)):
            raise DataError(f"table is not rectangular: {v.shape} vs {len(self.rows)}x{len(self.columns)}")
        if len(set(self.rows)) != len(self.rows):
            raise DataError("duplicate row keys")
        object.__setattr__(self, "values", v)

    def column(self, name) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def column_means(self) -> dict:
        return {c: float(np.mean(self.values[:, j])) for j, c in enumerate(self.columns)}


def _decimals(text):
    return len(text.split(".", 1)[1]) if "." in text else 0


def parse_table_csv(text: str, source="fixture") -> ComparisonTable:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise DataError("empty table")
    header, body = rows[0], [r for r in rows[1:] if r]
    width = len(header)
    keys, values, decimals = [], [], set()
    for lineno, r in enumerate(body, start=2):
        if len(r) != width:
            raise DataError(f"expected {width} cells, got {len(r)}", row=lineno)
        keys.append(r[0])
        try:
            values.append([float(c) for c in r[1:]])
        except ValueError as exc:
            raise DataError(str(exc), row=lineno) from None
        decimals.update(_decimals(c) for c in r[1:])
    dec = decimals.pop() if len(decimals) == 1 else None
    return ComparisonTable(header[0], tuple(keys), tuple(header[1:]), values, source, dec)


def load_fixture(path=None) -> ComparisonTable:
    """The shipped published MAE table (or a table file in the same format)."""
    if path is None:
        pkg = resources.files("deeprbf") / "fixtures"
        text = (pkg / FIXTURE_NAME).read_text(encoding="utf-8")
        meta = json.loads((pkg / FIXTURE_NAME.replace(".csv", ".meta.json")).read_text(encoding="utf-8"))
    else:
        path = Path(path)
        if not path.exists():
            raise MissingArtifactError(f"table file not found: {path}")
        text = path.read_text(encoding="utf-8")
        sidecar = path.with_name(path.stem + ".meta.json")
        meta = json.loads(sidecar.read_text(encoding="utf-8")) if sidecar.exists() else {}
    table = parse_table_csv(text, "fixture")
    return ComparisonTable(table.row_key, table.rows, table.columns, table.values, "fixture", table.decimals, meta)


def _cell(v, decimals):
    return f"{v:.{decimals}f}" if decimals is not None else repr(float(v))


def render_csv(table: ComparisonTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow((table.row_key,) + table.columns)
    for key, row in zip(table.rows, table.values):
        w.writerow([key] + [_cell(v, table.decimals) for v in row])
    return buf.getvalue()


def render_markdown(table: ComparisonTable, notes=()) -> str:
    lines = [
        "| " + " | ".join((table.row_key,) + table.columns) + " |",
        "|" + "---|" * (len(table.columns) + 1),
    ]
    for key, row in zip(table.rows, table.values):
        lines.append("| " + " | ".join([key] + [_cell(v, table.decimals) for v in row]) + " |")
    if notes:
        lines.append("")
        lines += [f"- {n}" for n in notes]
    return "\n".join(lines) + "\n"


def table_notes(table: ComparisonTable, tolerance=0.005) -> list[str]:
    """Recomputed column means, checked against any means stated alongside the table."""
    means = table.column_means()
    notes = [f"recomputed mean of {c}: {m:.4f}" for c, m in means.items()]
    for col, stated in table.meta.get("stated_column_means", {}).items():
        if col not in means:
            continue
        got = means[col]
        if abs(got - stated) > tolerance:
            notes.append(
                f"DISCREPANCY: stated mean of {col} is {stated}, but the tabulated values average {got:.2f}"
            )
        else:
            notes.append(f"stated mean of {col} ({stated}) matches the tabulated values")
    ref = table.meta.get("reference_column")
    if ref in table.columns:
        j = table.columns.index(ref)
        others = np.delete(table.values, j, axis=1)
        lowest = np.all(table.values[:, j][:, None] <= others, axis=1)
        notes.append(f"{ref} is lowest in {int(lowest.sum())} of {len(table.rows)} rows")
    return notes


def compare_report(reports=None, fixture=None) -> ComparisonTable:
    """Tabulate evaluation reports (metric rows x model columns), or return a fixture table as-is.

    ``fixture`` may be a ``ComparisonTable`` or the text of a table CSV.
    """
    if fixture is not None:
        return parse_table_csv(fixture) if isinstance(fixture, str) else fixture
    if not reports:
        raise ConfigError("nothing to compare")
    columns, cells = [], {}
    metric_rows = []
    for r in reports:
        label = r.model_id
        if label not in columns:
            columns.append(label)
        for name, value in r.metric_items():
            if name not in metric_rows:
                metric_rows.append(name)
            cells[(name, label)] = value
    tasks = {}
    for r in reports:
        tasks.setdefault(r.model_id, set()).add(r.task)
    first = tasks[columns[0]]
    if any(t != first for t in tasks.values()):
        raise DataError("reports cover inconsistent task sets, rows would not line up")
    values = [[cells[(m, c)] for c in columns] for m in metric_rows]
    return ComparisonTable("metric", tuple(metric_rows), tuple(columns), values, "computed")


# -- plot data ---------------------------------------------------------------

PLOT_KINDS = ("loss", "fitness", "mae_vs_vehicles")


def plot_data_csv(data, kind) -> str:
    """Headered CSV series behind a loss, fitness or MAE-by-vehicle-count plot."""
    if kind in ("loss", "fitness"):
        if len(data) == 0:
            raise DataError(f"empty {kind} history")
        return data.to_csv()
    if kind == "mae_vs_vehicles":
        if len(data.rows) == 0:
            raise DataError("empty table")
        return render_csv(data)
    raise ConfigError(f"unknown plot kind {kind!r}")


def emit_plot_data(data, kind, path):
    atomic_write(path, plot_data_csv(data, kind))
    return Path(path)
