"""Reading paired observations: daily dam-occupancy series and plain pair files."""

from __future__ import annotations

import csv
import datetime as dt
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .copula import PairedSample

__all__ = [
    "DamRecord",
    "DataError",
    "DEFAULT_MONTHS",
    "DAM_SNAPSHOT",
    "read_dam_records",
    "monthly_means",
    "ingest_dams",
    "load_pairs",
]

DEFAULT_MONTHS = frozenset({9, 10, 11, 12})
# location of the bundled daily snapshot; see README for provenance
DAM_SNAPSHOT = Path(__file__).with_name("datasets") / "istanbul_dams.csv"


class DataError(ValueError):
    """Malformed or empty input data."""


@dataclass(frozen=True)
class DamRecord:
    date: dt.date
    occupancy_x: float
    occupancy_y: float

    def __post_init__(self):
        for v in (self.occupancy_x, self.occupancy_y):
            if not (0 <= v <= 100):
                raise DataError(f"occupancy {v} outside [0, 100] on {self.date}")


def _pick(header: list, wanted: str, fallback: str) -> str:
    lower = {h.strip().lower(): h for h in header}
    for name in (wanted, fallback):
        if name.lower() in lower:
            return lower[name.lower()]
    raise DataError(f"missing column {wanted!r} (header: {', '.join(header)})")


def read_dam_records(csv_path, x_col: str = "terkos", y_col: str = "omerli") -> list:
    """Parse a ``date,<x>,<y>`` CSV of daily occupancies in percent.

    Column names are matched case-insensitively; ``x`` and ``y`` are
    accepted when the named columns are absent.
    """
    path = Path(csv_path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    records = []
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path} is empty")
        dcol = _pick(reader.fieldnames, "date", "date")
        xc = _pick(reader.fieldnames, x_col, "x")
        yc = _pick(reader.fieldnames, y_col, "y")
        for lineno, row in enumerate(reader, start=2):
            try:
                day = dt.date.fromisoformat(row[dcol].strip())
            except (ValueError, AttributeError) as exc:
                raise DataError(f"{path}:{lineno}: unparseable date {row.get(dcol)!r}") from exc
            try:
                rec = DamRecord(day, float(row[xc]), float(row[yc]))
            except (TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
            records.append(rec)
    return records


def monthly_means(records: Iterable[DamRecord]) -> dict:
    """``{(year, month): (mean_x, mean_y)}`` over the days present in each month."""
    acc: dict = defaultdict(list)
    for r in records:
        acc[(r.date.year, r.date.month)].append((r.occupancy_x, r.occupancy_y))
    return {k: tuple(np.mean(v, axis=0)) for k, v in sorted(acc.items())}


def ingest_dams(
    csv_path=DAM_SNAPSHOT,
    months: Iterable[int] = DEFAULT_MONTHS,
    scale: float = 0.01,
    x_col: str = "terkos",
    y_col: str = "omerli",
) -> PairedSample:
    """Monthly mean occupancies for the chosen calendar months, as fractions.

    Daily values are averaged within each (year, month); partial months use
    the days available. ``X`` is the ``x_col`` dam (strength), ``Y`` the
    ``y_col`` dam (stress).
    """
    months = set(months)
    if not months <= set(range(1, 13)):
        raise DataError(f"invalid months {sorted(months)}")
    means = monthly_means(read_dam_records(csv_path, x_col, y_col))
    pairs = [v for (_, m), v in means.items() if m in months]
    if not pairs:
        raise DataError(f"no observations fall in months {sorted(months)}")
    arr = np.asarray(pairs, dtype=float) * scale
    try:
        return PairedSample(arr[:, 0], arr[:, 1])
    except ValueError as exc:
        raise DataError(f"{csv_path}: {exc}") from exc


def load_pairs(csv_path, x_col: Optional[str] = None, y_col: Optional[str] = None) -> PairedSample:
    """Read already-paired observations from a CSV with two numeric columns.

    Without explicit names the first two columns other than ``date`` are used.
    """
    path = Path(csv_path)
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if not reader.fieldnames:
            raise DataError(f"{path} is empty")
        cols = [c for c in reader.fieldnames if c.strip().lower() != "date"]
        xc = _pick(reader.fieldnames, x_col, "x") if x_col else cols[0]
        yc = _pick(reader.fieldnames, y_col, "y") if y_col else (cols[1] if len(cols) > 1 else None)
        if yc is None:
            raise DataError(f"{path} needs two value columns")
        xs, ys = [], []
        for lineno, row in enumerate(reader, start=2):
            try:
                xs.append(float(row[xc]))
                ys.append(float(row[yc]))
            except (TypeError, ValueError) as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from exc
    try:
        return PairedSample(xs, ys)
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
