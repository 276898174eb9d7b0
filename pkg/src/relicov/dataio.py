"""CSV ingestion and scenario/matrix file loading.

All CSV inputs require a header row; parse failures carry 1-based line
numbers.
"""

from __future__ import annotations

import csv
import json

import numpy as np

from relicov.anova import GroupedObservations
from relicov.core import SampleSet
from relicov.exceptions import DataValidationError
from relicov.reliability import ItemResponseMatrix

__all__ = ["ingest_csv", "load_matrix", "load_scenario", "save_scenario"]


def _read_csv_rows(path):
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataValidationError(f"cannot read {path}: {exc}") from None
    rows = [r for r in rows if r]  # drop blank lines
    if len(rows) < 2:
        raise DataValidationError(f"{path}: need a header row and at least one data row")
    header = rows[0]
    width = len(header)
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise DataValidationError(
                f"{path}: line {lineno}: expected {width} fields, got {len(row)}"
            )
    return header, rows[1:]


def _parse_float(value: str, path, lineno: int, column: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise DataValidationError(
            f"{path}: line {lineno}: non-numeric value {value!r} in column {column!r}"
        ) from None


def _numeric_table(path, header, records) -> np.ndarray:
    data = np.empty((len(records), len(header)))
    for i, row in enumerate(records):
        for j, cell in enumerate(row):
            data[i, j] = _parse_float(cell, path, i + 2, header[j])
    return data


def ingest_csv(path, layout: str):
    """Read a CSV file into the domain object selected by ``layout``.

    ``items``: every column is an item score; binary data (all 0/1) is
    detected automatically.  ``samples``: every column is a variable;
    the column means serve as the (estimated) mean vector.  ``groups``:
    exactly two columns, group label then observation value.
    """
    header, records = _read_csv_rows(path)
    if layout == "items":
        return ItemResponseMatrix(scores=_numeric_table(path, header, records))
    if layout == "samples":
        data = _numeric_table(path, header, records)
        return SampleSet(rows=data, mu=data.mean(axis=0))
    if layout == "groups":
        if len(header) != 2:
            raise DataValidationError(
                f"{path}: groups layout needs exactly 2 columns (label, value), got {len(header)}"
            )
        labels = [row[0] for row in records]
        values = [
            _parse_float(row[1], path, i + 2, header[1]) for i, row in enumerate(records)
        ]
        return GroupedObservations.from_labels(labels, values)
    raise DataValidationError(f"unknown layout {layout!r}")


def load_matrix(path) -> np.ndarray:
    """Square matrix from a JSON array-of-arrays or a headerless CSV."""
    path = str(path)
    try:
        if path.endswith(".json"):
            with open(path, encoding="utf-8") as fh:
                mat = np.asarray(json.load(fh), dtype=np.float64)
        else:
            mat = np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        raise DataValidationError(f"cannot load matrix from {path}: {exc}") from None
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DataValidationError(f"{path}: expected a square matrix, got {mat.shape}")
    return mat


def load_scenario(path):
    from relicov.bench import ScenarioConfig

    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataValidationError(f"cannot load scenario from {path}: {exc}") from None
    return ScenarioConfig.from_dict(data)


def save_scenario(cfg, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
