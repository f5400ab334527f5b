"""Multivariate time-series panels, CSV ingestion and lag specifications."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .errors import ContractError, DegenerateSeriesError, IngestionError, SchemaError


@dataclass(frozen=True)
class TimeSeriesPanel:
    """``n`` named series observed at ``T`` common time points.

    ``values`` is ``n x T`` (rows are variables) and stored Fortran-ordered so
    that each time slice is contiguous. The array is read-only.
    """

    names: tuple[str, ...]
    values: np.ndarray
    time_index: tuple = field(default=())

    def __post_init__(self) -> None:
        names = tuple(str(x) for x in self.names)
        values = np.array(self.values, dtype=float, order="F", ndmin=2)
        if values.ndim != 2:
            raise ContractError("panel values must be a 2-d array")
        n, T = values.shape
        if len(names) != n:
            raise ContractError(f"{len(names)} names for {n} series")
        if len(set(names)) != n:
            raise ContractError("series names must be unique")
        if n < 1 or T < 2:
            raise ContractError("a panel needs at least one series and two observations")
        if not np.all(np.isfinite(values)):
            raise IngestionError("panel contains missing or non-finite values")
        index = tuple(self.time_index) if self.time_index else tuple(range(T))
        if len(index) != T:
            raise ContractError("time index length does not match the number of observations")
        if any(not (a < b) for a, b in zip(index, index[1:])):
            raise ContractError("time index must be strictly increasing")
        values.flags.writeable = False
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "time_index", index)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def T(self) -> int:
        return self.values.shape[1]

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ContractError(f"unknown variable {name!r}") from None

    def select(self, names: Iterable[str]) -> "TimeSeriesPanel":
        names = list(names)
        idx = [self.index_of(x) for x in names]
        return TimeSeriesPanel(tuple(names), self.values[idx], self.time_index)

    def with_values(self, values: np.ndarray) -> "TimeSeriesPanel":
        return TimeSeriesPanel(self.names, values, self.time_index)

    def series(self, name: str) -> np.ndarray:
        return self.values[self.index_of(name)]


@dataclass(frozen=True)
class LagSpec:
    """A non-empty sorted set of positive lags, e.g. ``{1, 2}`` or ``{1, 2, 5, 7, 12, 20}``."""

    lags: tuple[int, ...]

    def __post_init__(self) -> None:
        try:
            lags = tuple(sorted({int(x) for x in self.lags}))
        except (TypeError, ValueError):
            raise ContractError(f"invalid lag set {self.lags!r}") from None
        if not lags:
            raise ContractError("lag set must be non-empty")
        if lags[0] < 1:
            raise ContractError("lags must be positive")
        object.__setattr__(self, "lags", lags)

    @classmethod
    def parse(cls, text: str | int | Sequence[int] | "LagSpec") -> "LagSpec":
        if isinstance(text, LagSpec):
            return text
        if isinstance(text, int):
            return cls(tuple(range(1, text + 1)))
        if isinstance(text, str):
            try:
                return cls(tuple(int(x) for x in text.replace(" ", "").split(",") if x))
            except ValueError:
                raise ContractError(f"invalid lag set {text!r}") from None
        return cls(tuple(text))

    @property
    def max_lag(self) -> int:
        return self.lags[-1]

    def __len__(self) -> int:
        return len(self.lags)

    def __iter__(self):
        return iter(self.lags)

    def __str__(self) -> str:
        return ",".join(str(x) for x in self.lags)


def _parse_index(labels: list[str]) -> tuple:
    try:
        return tuple(int(x) for x in labels)
    except ValueError:
        return tuple(labels)


def load_panel(
    source: str | Path | IO[str],
    schema: Sequence[str] | None = None,
    *,
    delimiter: str = ",",
    time_column: str | None = None,
) -> TimeSeriesPanel:
    """Read a delimiter-separated file with a header row.

    Parameters
    ----------
    source
        Path or open text stream (UTF-8).
    schema
        Column names to load, in the order they should appear as panel rows.
        Defaults to every column except ``time_column``.
    time_column
        Optional column holding strictly increasing integer or date labels.

    Raises
    ------
    SchemaError
        A requested column is absent.
    IngestionError
        A cell is blank or does not parse as a real number; the message
        names the 1-based data row and the column.
    """
    if isinstance(source, (str, Path)):
        with open(source, newline="", encoding="utf-8") as fh:
            return load_panel(fh, schema, delimiter=delimiter, time_column=time_column)

    reader = csv.reader(source, delimiter=delimiter)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise SchemaError("input has no header row") from None
    if time_column is not None and time_column not in header:
        raise SchemaError(f"time column {time_column!r} not found in header")
    if schema is None:
        schema = [h for h in header if h != time_column]
    missing = [c for c in schema if c not in header]
    if missing:
        raise SchemaError(f"column(s) not found in header: {', '.join(missing)}")
    cols = [header.index(c) for c in schema]
    tcol = header.index(time_column) if time_column is not None else None

    rows: list[list[float]] = []
    labels: list[str] = []
    for lineno, record in enumerate(reader, start=1):
        if not record or all(not cell.strip() for cell in record):
            raise IngestionError(f"row {lineno}: empty line", row=lineno)
        parsed = []
        for name, c in zip(schema, cols):
            cell = record[c].strip() if c < len(record) else ""
            if not cell:
                raise IngestionError(f"row {lineno}, column {name!r}: missing value", row=lineno, column=name)
            try:
                value = float(cell)
            except ValueError:
                raise IngestionError(
                    f"row {lineno}, column {name!r}: cannot parse {cell!r} as a number", row=lineno, column=name
                ) from None
            if not math.isfinite(value):
                raise IngestionError(f"row {lineno}, column {name!r}: non-finite value", row=lineno, column=name)
            parsed.append(value)
        rows.append(parsed)
        if tcol is not None:
            labels.append(record[tcol].strip() if tcol < len(record) else "")
    if len(rows) < 2:
        raise IngestionError("need at least two data rows")
    index = _parse_index(labels) if tcol is not None else ()
    try:
        return TimeSeriesPanel(tuple(schema), np.array(rows).T, index)
    except ContractError as exc:
        raise IngestionError(str(exc)) from None


def write_panel(panel: TimeSeriesPanel, dest: str | Path | IO[str], *, delimiter: str = ",",
                time_column: str | None = None) -> None:
    """Write ``panel`` as CSV using shortest round-trip float formatting."""
    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="", encoding="utf-8") as fh:
            write_panel(panel, fh, delimiter=delimiter, time_column=time_column)
        return
    writer = csv.writer(dest, delimiter=delimiter, lineterminator="\n")
    header = list(panel.names)
    if time_column is not None:
        header = [time_column] + header
    writer.writerow(header)
    for t in range(panel.T):
        row = [repr(float(v)) for v in panel.values[:, t]]
        if time_column is not None:
            row = [str(panel.time_index[t])] + row
        writer.writerow(row)


def panel_to_csv(panel: TimeSeriesPanel, **kwargs) -> str:
    buf = io.StringIO()
    write_panel(panel, buf, **kwargs)
    return buf.getvalue()


def standardize(panel: TimeSeriesPanel) -> TimeSeriesPanel:
    """Rescale every series to sample mean 0 and sample variance 1 (ddof=1)."""
    x = panel.values
    sd = x.std(axis=1, ddof=1)
    bad = [panel.names[i] for i in np.flatnonzero(~(sd > 0))]
    if bad:
        raise DegenerateSeriesError(f"constant series cannot be standardized: {', '.join(bad)}")
    z = (x - x.mean(axis=1, keepdims=True)) / sd[:, None]
    return panel.with_values(z)
