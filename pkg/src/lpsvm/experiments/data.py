"""Readers for the two accepted on-disk formats: headed CSV and LIBSVM text."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from ..core import Dataset


class DataFormatError(ValueError):
    """Malformed input; the message names the offending line (1-based)."""


class LabelDomainError(DataFormatError):
    pass


_LABELS = {1.0: 1.0, -1.0: -1.0, 0.0: -1.0}


def _label(token: str, line: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise DataFormatError(f"line {line}: label {token!r} is not a number") from None
    if value not in _LABELS:
        raise LabelDomainError(f"line {line}: label {token!r} is not one of -1, 0, 1")
    return _LABELS[value]


def load_csv(path) -> Dataset:
    """One header row, numeric features, label in the last column ({-1,1} or {0,1})."""
    rows, labels = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataFormatError("line 1: empty file")
        width = len(header)
        if width < 2:
            raise DataFormatError("line 1: need at least one feature column and a label")
        for record in reader:
            line = reader.line_num
            if not record or all(not cell.strip() for cell in record):
                continue
            if len(record) != width:
                raise DataFormatError(f"line {line}: expected {width} fields, got {len(record)}")
            feats = []
            for name, cell in zip(header[:-1], record[:-1]):
                try:
                    feats.append(float(cell))
                except ValueError:
                    raise DataFormatError(
                        f"line {line}, column {name!r}: {cell!r} is not a number"
                    ) from None
            rows.append(feats)
            labels.append(_label(record[-1].strip(), line))
    if not rows:
        raise DataFormatError("no data rows")
    return Dataset(np.array(rows), np.array(labels))


def load_libsvm(path) -> Dataset:
    """Lines ``label idx:val ...`` with 1-based strictly ascending indices."""
    entries: list[dict[int, float]] = []
    labels: list[float] = []
    width = 0
    for line_no, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        # tolerate the typographic minus sign
        text = raw.split("#", 1)[0].replace("\u2212", "-").strip()
        if not text:
            continue
        tokens = text.split()
        labels.append(_label(tokens[0], line_no))
        row: dict[int, float] = {}
        last = 0
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            try:
                if not sep:
                    raise ValueError
                idx, val = int(idx_s), float(val_s)
            except ValueError:
                raise DataFormatError(f"line {line_no}: malformed entry {tok!r}") from None
            if idx < 1:
                raise DataFormatError(f"line {line_no}: index {idx} is below 1")
            if idx in row:
                raise DataFormatError(f"line {line_no}: duplicate index {idx}")
            if idx < last:
                raise DataFormatError(f"line {line_no}: index {idx} out of ascending order")
            row[idx] = val
            last = idx
        width = max(width, last)
        entries.append(row)
    if not entries:
        raise DataFormatError("no data rows")
    X = np.zeros((len(entries), width))
    for i, row in enumerate(entries):
        for idx, val in row.items():
            X[i, idx - 1] = val
    return Dataset(X, np.array(labels))


def load_dataset(path, fmt: str = "csv") -> Dataset:
    if fmt == "csv":
        return load_csv(path)
    if fmt == "libsvm":
        return load_libsvm(path)
    raise ValueError(f"unknown data format {fmt!r}")
