"""Result persistence and rendering: records CSV, text tables, plot data.

All CSV output uses '.' decimals and 17 significant digits, so files
round-trip float64 exactly and are byte-identical across reruns.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import InvalidInputError
from .matrices import fmt_float
from .simulate import BenchRecord

__all__ = [
    "TableSpec",
    "records_to_csv",
    "records_from_csv",
    "render_table",
    "emit_plot_data",
]

_COLUMNS = (
    "method",
    "setting",
    "n",
    "p",
    "ktr",
    "s",
    "replicates",
    "op_err_mean",
    "op_err_se",
    "fro_err_mean",
    "fro_err_se",
    "k_hat_mode",
    "k_opt",
)

_INT_FIELDS = {"setting", "n", "p", "ktr", "replicates", "k_hat_mode", "k_opt"}
_FLOAT_FIELDS = {"s", "op_err_mean", "op_err_se", "fro_err_mean", "fro_err_se"}


@dataclass(frozen=True)
class TableSpec:
    """Layout of the rendered benchmark table.

    Columns form a (ktr, p) grid; the three panels stack a k-selection
    comparison over the norm panels.
    """

    methods: tuple[str, ...]
    p_values: tuple[int, ...]
    ktr_values: tuple[int, ...]
    panels: tuple[str, ...] = ("k-selection", "operator-norm", "frobenius-norm")

    @staticmethod
    def from_records(records: Sequence[BenchRecord]) -> "TableSpec":
        if not records:
            raise InvalidInputError("cannot infer a table layout from zero records")
        methods = tuple(dict.fromkeys(r.method for r in records))
        return TableSpec(
            methods=methods,
            p_values=tuple(sorted({r.p for r in records})),
            ktr_values=tuple(sorted({r.ktr for r in records})),
        )


def records_to_csv(records: Sequence[BenchRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(_COLUMNS)
        for r in records:
            row = []
            for col in _COLUMNS:
                v = getattr(r, col)
                if v is None:
                    row.append("")
                elif col in _FLOAT_FIELDS:
                    row.append(fmt_float(v))
                else:
                    row.append(str(v))
            writer.writerow(row)


def records_from_csv(path: str | Path) -> list[BenchRecord]:
    records = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or tuple(reader.fieldnames) != _COLUMNS:
            raise InvalidInputError(f"{path}: unexpected columns {reader.fieldnames}")
        for row in reader:
            kwargs = {}
            for col in _COLUMNS:
                raw = row[col]
                if raw == "":
                    kwargs[col] = None
                elif col in _INT_FIELDS:
                    kwargs[col] = int(raw)
                elif col in _FLOAT_FIELDS:
                    kwargs[col] = float(raw)
                else:
                    kwargs[col] = raw
            records.append(BenchRecord(**kwargs))
    return records


def _cell_lookup(records: Sequence[BenchRecord]):
    by_key: dict[tuple[str, int, int], BenchRecord] = {}
    for r in records:
        by_key[(r.method, r.ktr, r.p)] = r
    return by_key


def render_table(records: Sequence[BenchRecord], spec: TableSpec | None = None) -> str:
    """Fixed-width three-panel text table; missing cells render as an em dash."""
    spec = spec or TableSpec.from_records(records)
    by_key = _cell_lookup(records)
    columns = [(ktr, p) for ktr in spec.ktr_values for p in spec.p_values]

    label_w = max(12, *(len(m) for m in spec.methods)) + 2
    col_w = 16

    def fmt_row(label: str, cells: list[str]) -> str:
        return label.ljust(label_w) + "".join(c.rjust(col_w) for c in cells)

    def stat_cell(r: BenchRecord | None, which: str) -> str:
        if r is None:
            return "—"
        mean = getattr(r, f"{which}_err_mean")
        se = getattr(r, f"{which}_err_se")
        return f"{mean:.2f} ({se:.2f})"

    lines: list[str] = []
    header_ktr = fmt_row("ktr", [str(ktr) for ktr, _ in columns])
    header_p = fmt_row("p", [str(p) for _, p in columns])
    rule = "-" * (label_w + col_w * len(columns))
    lines += [header_ktr, header_p, rule]

    for panel in spec.panels:
        lines.append(f"[{panel}]")
        if panel == "k-selection":
            for label, attr in (("k_opt", "k_opt"), ("k_sure", "k_hat_mode")):
                cells = []
                for ktr, p in columns:
                    r = by_key.get(("cd", ktr, p))
                    v = getattr(r, attr) if r is not None else None
                    cells.append("—" if v is None else str(v))
                lines.append(fmt_row(label, cells))
        else:
            which = "op" if panel == "operator-norm" else "fro"
            for method in spec.methods:
                cells = [stat_cell(by_key.get((method, ktr, p)), which) for ktr, p in columns]
                lines.append(fmt_row(method.upper(), cells))
        lines.append(rule)
    return "\n".join(lines) + "\n"


def emit_plot_data(records: Sequence[BenchRecord], path: str | Path) -> None:
    """Long-format CSV (s, method, norm, mean, se) for external plotting."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(("s", "method", "norm", "mean", "se"))
        for r in records:
            for norm, mean, se in (
                ("op", r.op_err_mean, r.op_err_se),
                ("fro", r.fro_err_mean, r.fro_err_se),
            ):
                writer.writerow((fmt_float(r.s), r.method, norm, fmt_float(mean), fmt_float(se)))
