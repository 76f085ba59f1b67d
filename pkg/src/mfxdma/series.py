"""Loading, validation and alignment of dated value series."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np


class SeriesError(ValueError):
    """Raised for malformed or inconsistent input series."""


@dataclass(frozen=True)
class RawSeries:
    """A labeled sequence of dated positive levels, sorted by date."""

    label: str
    dates: np.ndarray  # datetime64[D], strictly increasing
    values: np.ndarray  # float64, positive

    def __post_init__(self):
        if self.dates.shape != self.values.shape or self.dates.ndim != 1:
            raise SeriesError(f"{self.label}: dates/values shape mismatch")
        if self.values.size < 2:
            raise SeriesError(f"{self.label}: need at least 2 observations")
        if not np.all(np.isfinite(self.values)):
            raise SeriesError(f"{self.label}: non-finite value present")
        if np.any(self.values <= 0.0):
            raise SeriesError(f"{self.label}: non-positive value present")
        if np.any(np.diff(self.dates).astype(int) <= 0):
            raise SeriesError(f"{self.label}: dates not strictly increasing")

    @property
    def length(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class ReturnSeries:
    """Log returns with the date of the later observation of each pair."""

    label: str
    dates: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.dates.shape != self.values.shape or self.dates.ndim != 1:
            raise SeriesError(f"{self.label}: dates/values shape mismatch")
        if not np.all(np.isfinite(self.values)):
            raise SeriesError(f"{self.label}: non-finite return present")

    @property
    def n(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class AlignedPair:
    x: ReturnSeries
    y: ReturnSeries

    def __post_init__(self):
        if self.x.n != self.y.n:
            raise SeriesError("pair lengths differ")
        if not np.array_equal(self.x.dates, self.y.dates):
            raise SeriesError("pair dates differ")

    @property
    def n(self) -> int:
        return self.x.n


def load_csv(path, date_column: str = "date", value_column: str = "value",
             label: str | None = None) -> RawSeries:
    """Read a dated series from a UTF-8 CSV with a header row.

    Dates must be ISO-8601 calendar days, values positive decimal reals.
    Rows are sorted by date on load; duplicate dates are an error.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except FileNotFoundError:
        raise SeriesError(f"input file not found: {path}") from None
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SeriesError(f"{path}: empty file, expected a header row")
        for col in (date_column, value_column):
            if col not in reader.fieldnames:
                raise SeriesError(
                    f"{path}: missing column {col!r} (header has {reader.fieldnames})"
                )
        dates = []
        values = []
        for row in reader:
            rownum = reader.line_num
            raw_date = (row.get(date_column) or "").strip()
            raw_value = (row.get(value_column) or "").strip()
            try:
                d = np.datetime64(raw_date, "D")
            except ValueError:
                raise SeriesError(
                    f"{path} row {rownum}: unparseable date {raw_date!r}"
                ) from None
            try:
                v = float(raw_value)
            except ValueError:
                raise SeriesError(
                    f"{path} row {rownum}: unparseable value {raw_value!r}"
                ) from None
            if not math.isfinite(v) or v <= 0.0:
                raise SeriesError(
                    f"{path} row {rownum}: value must be a positive finite real, got {raw_value}"
                )
            dates.append(d)
            values.append(v)
    if len(dates) < 2:
        raise SeriesError(f"{path}: need at least 2 data rows, got {len(dates)}")
    dates_arr = np.array(dates, dtype="datetime64[D]")
    values_arr = np.array(values, dtype=np.float64)
    order = np.argsort(dates_arr, kind="stable")
    dates_arr = dates_arr[order]
    values_arr = values_arr[order]
    dup = np.nonzero(np.diff(dates_arr).astype(int) == 0)[0]
    if dup.size:
        raise SeriesError(f"{path}: duplicate date {dates_arr[dup[0]]}")
    return RawSeries(label=label or str(path), dates=dates_arr, values=values_arr)


def log_returns(s: RawSeries) -> ReturnSeries:
    """First differences of log levels, dated by the later observation."""
    if s.length < 2:
        raise SeriesError(f"{s.label}: need at least 2 observations for returns")
    vals = np.diff(np.log(s.values))
    return ReturnSeries(label=s.label, dates=s.dates[1:], values=vals)


def align(a: RawSeries, b: RawSeries) -> AlignedPair:
    """Intersect on dates, then take log returns of each side.

    Dates present in only one series are dropped; no interpolation is
    performed, so every return spans exactly one retained-date step.
    """
    common, ia, ib = np.intersect1d(a.dates, b.dates, return_indices=True)
    if common.size < 3:
        raise SeriesError(
            f"series {a.label!r} and {b.label!r} share only {common.size} dates; need >= 3"
        )
    ra = RawSeries(label=a.label, dates=common, values=a.values[ia])
    rb = RawSeries(label=b.label, dates=common, values=b.values[ib])
    return AlignedPair(x=log_returns(ra), y=log_returns(rb))
