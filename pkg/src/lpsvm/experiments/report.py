"""Markdown and CSV renderings of cross-validation results."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import fields

from .cv import MetricsRow, best_row

CSV_FIELDS = tuple(f.name for f in fields(MetricsRow))
_INTS = {"r", "s", "eta", "failed_folds"}


def _fmt(value: float, digits: int) -> str:
    return "-" if math.isnan(value) else f"{value:.{digits}f}"


def best_per_cell(rows: list[MetricsRow]) -> dict[tuple[int, str], MetricsRow]:
    """The grid-search winner for every (eta, p) cell."""
    groups: dict[tuple[int, str], list[MetricsRow]] = {}
    for row in rows:
        groups.setdefault((row.eta, row.p_label), []).append(row)
    return {key: best_row(group) for key, group in groups.items()}


def markdown_report(rows: list[MetricsRow], include_time: bool = True) -> str:
    """Rows are eta values; each norm contributes a group of metric columns."""
    if not rows:
        raise ValueError("no rows to report")
    cells = best_per_cell(rows)
    etas = sorted({eta for eta, _ in cells})
    norms = []
    for row in rows:
        if row.p_label not in norms:
            norms.append(row.p_label)
    metrics = ["ACC^Tr", "ACC^Test"] + (["Time"] if include_time else []) + ["%NonZ"]

    head = ["eta"] + [f"p={p} {m}" for p in norms for m in metrics]
    lines = ["| " + " | ".join(head) + " |", "|" + "---|" * len(head)]
    for eta in etas:
        out = [str(eta)]
        for p in norms:
            row = cells.get((eta, p))
            if row is None:
                out.extend([""] * len(metrics))
                continue
            vals = [_fmt(row.acc_train, 2), _fmt(row.acc_test, 2)]
            if include_time:
                vals.append(_fmt(row.time, 3))
            vals.append(_fmt(row.pct_nonzero, 2))
            out.extend(vals)
        lines.append("| " + " | ".join(out) + " |")
    return "\n".join(lines) + "\n"


def csv_report(rows: list[MetricsRow], include_time: bool = True) -> str:
    """Every row at full precision (repr of floats), so parsing restores it."""
    if not rows:
        raise ValueError("no rows to report")
    names = [f for f in CSV_FIELDS if include_time or f != "time"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for row in rows:
        writer.writerow([repr(getattr(row, f)) if isinstance(getattr(row, f), float) else getattr(row, f)
                         for f in names])
    return buf.getvalue()


def parse_csv_report(text: str) -> list[MetricsRow]:
    reader = csv.DictReader(io.StringIO(text))
    out = []
    for rec in reader:
        kw = {}
        for name in CSV_FIELDS:
            if name not in rec:
                kw[name] = math.nan
            elif name in _INTS:
                kw[name] = int(rec[name])
            elif name == "transform":
                kw[name] = rec[name]
            else:
                kw[name] = float(rec[name])
        out.append(MetricsRow(**kw))
    return out


def emit_report(rows: list[MetricsRow], format: str = "markdown", include_time: bool = True) -> str:
    if format == "markdown":
        return markdown_report(rows, include_time)
    if format == "csv":
        return csv_report(rows, include_time)
    raise ValueError(f"unknown report format {format!r}")
