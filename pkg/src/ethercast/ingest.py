"""Daily OHLCV ingestion: CSV parsing, gap regularization, splits and windowing.

Input files are header-first CSV with one row per calendar day.  Column names
are free-form; a schema maps the canonical roles (date, open, high, low,
close, volume, change) onto the actual header names.  Dates are accepted as
ISO-8601 (``2023-03-01``) or ``Mon DD, YYYY`` (``Mar 01, 2023``) and always
canonicalized to ISO.  Numeric cells may carry thousands separators, percent
signs, and K/M/B magnitude suffixes (common in exported market data); all are
stripped during parsing.  Change cells with a percent sign are stored as
fractions (``6.5%`` -> 0.065); bare change values are taken as fractions
already (the canonical format writes fractions).  A bare ``-`` in the volume
or change column is read as 0.

The canonical output format (see :func:`write_price_csv`) uses ISO dates,
plain decimals, and an appended ``filled`` column marking gap-imputed rows.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    ContinuityError,
    CsvParseError,
    DuplicateDateError,
    EmptyInputError,
    InsufficientDataError,
    SchemaError,
    SplitSpecError,
)

ROLES = ("date", "open", "high", "low", "close", "volume", "change")
REQUIRED_ROLES = ("date", "open", "high", "low", "close")

# header-name aliases used by infer_schema, lowercase, punctuation-insensitive
_ROLE_ALIASES = {
    "date": ("date", "day", "timestamp"),
    "open": ("open", "opening price", "open price"),
    "high": ("high", "highest price", "high price"),
    "low": ("low", "lowest price", "low price"),
    "close": ("close", "price", "closing price", "close price", "daily price"),
    "volume": ("volume", "vol", "vol."),
    "change": ("change", "change %", "change%", "chg", "chg%"),
    "filled": ("filled",),
}

_MAGNITUDE_SUFFIX = {"K": 1e3, "M": 1e6, "B": 1e9}

_MONTHS = {
    "jan": 1, "feb": 2, "mar": 3, "apr": 4, "may": 5, "jun": 6,
    "jul": 7, "aug": 8, "sep": 9, "oct": 10, "nov": 11, "dec": 12,
}


@dataclass(frozen=True)
class PriceRecord:
    """One trading day.  ``filled`` marks rows synthesized by gap filling."""

    date: date
    open: float
    high: float
    low: float
    close: float
    volume: float
    change_pct: float
    filled: bool = False

    def __post_init__(self):
        if not (self.open > 0):
            raise ValueError(f"{self.date}: open must be positive, got {self.open}")
        if self.volume < 0:
            raise ValueError(f"{self.date}: volume must be non-negative, got {self.volume}")
        if self.high < max(self.open, self.close):
            raise ValueError(
                f"{self.date}: high {self.high} below max(open, close) "
                f"{max(self.open, self.close)}"
            )
        if self.low > min(self.open, self.close):
            raise ValueError(
                f"{self.date}: low {self.low} above min(open, close) "
                f"{min(self.open, self.close)}"
            )


class PriceSeries:
    """An ordered daily price sequence with strictly increasing dates."""

    def __init__(self, records: Sequence[PriceRecord]):
        records = list(records)
        if not records:
            raise EmptyInputError("a price series must contain at least one record")
        for prev, cur in zip(records, records[1:]):
            if cur.date <= prev.date:
                raise ValueError(
                    f"dates must be strictly increasing, got {prev.date} then {cur.date}"
                )
        self.records = records

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return PriceSeries(self.records[idx])
        return self.records[idx]

    def __eq__(self, other) -> bool:
        return isinstance(other, PriceSeries) and self.records == other.records

    def dates(self) -> list[date]:
        return [r.date for r in self.records]

    def values(self, channel: str = "open") -> np.ndarray:
        """Extract one channel as a float64 vector."""
        attr = {"change": "change_pct"}.get(channel, channel)
        if attr not in ("open", "high", "low", "close", "volume", "change_pct"):
            raise ValueError(f"unknown channel {channel!r}")
        return np.array([getattr(r, attr) for r in self.records], dtype=np.float64)

    def is_contiguous_daily(self) -> bool:
        one_day = timedelta(days=1)
        return all(
            b.date - a.date == one_day for a, b in zip(self.records, self.records[1:])
        )


@dataclass(frozen=True)
class SplitSpec:
    """Chronological split fractions; must sum to 1."""

    train_ratio: float = 0.7
    val_ratio: float = 0.1
    test_ratio: float = 0.2

    def __post_init__(self):
        for name, r in (("train", self.train_ratio), ("val", self.val_ratio),
                        ("test", self.test_ratio)):
            if not (0.0 < r < 1.0):
                raise SplitSpecError(f"{name}_ratio must lie in (0, 1), got {r}")
        total = self.train_ratio + self.val_ratio + self.test_ratio
        if abs(total - 1.0) > 1e-9:
            raise SplitSpecError(f"split ratios must sum to 1, got {total}")


@dataclass
class SplitResult:
    train: PriceSeries
    val: PriceSeries
    test: PriceSeries
    warnings: list[str] = field(default_factory=list)


@dataclass
class WindowSet:
    """Stride-1 sliding (input, target) pairs over a single split segment.

    ``origin_indices[k]`` is the offset of window k's first input value in the
    source segment, so the target of window k covers segment positions
    ``origin_indices[k] + seq_len .. + seq_len + pred_len``.
    """

    inputs: np.ndarray        # (n_windows, seq_len)
    targets: np.ndarray       # (n_windows, pred_len)
    origin_indices: np.ndarray  # (n_windows,)
    seq_len: int
    pred_len: int

    def __len__(self) -> int:
        return len(self.inputs)


def infer_schema(header: Sequence[str]) -> dict[str, str]:
    """Guess the role→column mapping from header names.

    Raises SchemaError if any required role cannot be matched.
    """
    normalized = {h.strip().lower().rstrip("."): h for h in header}
    schema: dict[str, str] = {}
    for role, aliases in _ROLE_ALIASES.items():
        for alias in aliases:
            hit = normalized.get(alias.rstrip("."))
            if hit is not None and hit not in schema.values():
                schema[role] = hit
                break
    missing = [r for r in REQUIRED_ROLES if r not in schema]
    if missing:
        raise SchemaError(f"could not infer columns for roles: {', '.join(missing)}")
    return schema


def _parse_date(text: str) -> date:
    text = text.strip().strip('"')
    try:
        return date.fromisoformat(text)
    except ValueError:
        pass
    # "Mar 01, 2023" / "March 1, 2023"
    parts = text.replace(",", " ").split()
    if len(parts) == 3:
        mon = _MONTHS.get(parts[0][:3].lower())
        if mon is not None:
            try:
                return date(int(parts[2]), mon, int(parts[1]))
            except ValueError:
                pass
    raise ValueError(f"unrecognized date {text!r}")


def _parse_number(text: str, allow_dash_zero: bool = False) -> float:
    cleaned = text.strip().strip('"').replace(",", "").replace("%", "").strip()
    if cleaned in ("-", "") and allow_dash_zero:
        return 0.0
    mult = 1.0
    if cleaned and cleaned[-1].upper() in _MAGNITUDE_SUFFIX:
        mult = _MAGNITUDE_SUFFIX[cleaned[-1].upper()]
        cleaned = cleaned[:-1]
    return float(cleaned) * mult


def parse_price_csv(stream, schema: dict[str, str] | None = None) -> PriceSeries:
    """Parse a daily OHLCV CSV into a PriceSeries sorted ascending by date.

    ``stream`` may be a text or byte stream, a path, or a str of CSV content
    containing a newline.  ``schema`` maps canonical roles to column names;
    when omitted it is inferred from the header.  Percent changes are stored
    as fractions (``6.5%`` → 0.065).
    """
    text = _as_text(stream)
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise EmptyInputError("no header row found")
    header = [h.strip() for h in header]

    if schema is None:
        schema = infer_schema(header)
    col_index: dict[str, int] = {}
    for role in ROLES + ("filled",):
        col = schema.get(role)
        if col is None:
            if role in REQUIRED_ROLES:
                raise SchemaError(f"schema does not map required role {role!r}")
            continue
        if col not in header:
            raise SchemaError(f"mapped column {col!r} for role {role!r} not in header")
        col_index[role] = header.index(col)

    records = []
    for rownum, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue

        def cell(role: str) -> str:
            idx = col_index[role]
            if idx >= len(row):
                raise CsvParseError(f"row has no column for role {role!r}", rownum)
            return row[idx]

        try:
            d = _parse_date(cell("date"))
            open_ = _parse_number(cell("open"))
            high = _parse_number(cell("high"))
            low = _parse_number(cell("low"))
            close = _parse_number(cell("close"))
            volume = _parse_number(cell("volume"), allow_dash_zero=True) if "volume" in col_index else 0.0
            # %-suffixed change cells are percentages; bare values are
            # already fractions (the canonical format writes fractions)
            if "change" in col_index:
                raw_change = cell("change")
                change = _parse_number(raw_change, allow_dash_zero=True)
                if "%" in raw_change:
                    change /= 100.0
            else:
                change = 0.0
            filled = cell("filled").strip().lower() in ("true", "1", "yes") if "filled" in col_index else False
            records.append(PriceRecord(d, open_, high, low, close, volume, change, filled))
        except CsvParseError:
            raise
        except (ValueError, KeyError) as exc:
            raise CsvParseError(str(exc), rownum) from exc

    if not records:
        raise EmptyInputError("CSV contains a header but no data rows")
    records.sort(key=lambda r: r.date)
    for prev, cur in zip(records, records[1:]):
        if cur.date == prev.date:
            raise DuplicateDateError(f"duplicate date {cur.date}")
    return PriceSeries(records)


def write_price_csv(series: PriceSeries, target) -> None:
    """Write the canonical CSV form: ISO dates, plain decimals, filled flag."""
    close = False
    if isinstance(target, (str, bytes)) or hasattr(target, "__fspath__"):
        target = open(target, "w", newline="")
        close = True
    try:
        writer = csv.writer(target)
        writer.writerow(["date", "open", "high", "low", "close", "volume", "change", "filled"])
        for r in series:
            writer.writerow([
                r.date.isoformat(),
                repr(r.open), repr(r.high), repr(r.low), repr(r.close),
                repr(r.volume), repr(r.change_pct),
                "true" if r.filled else "false",
            ])
    finally:
        if close:
            target.close()


def regularize_daily(series, policy: str = "forward_fill") -> PriceSeries:
    """Force exactly one record per calendar day between first and last date.

    ``forward_fill`` copies the previous day's prices into missing days with
    volume 0, change 0 and ``filled=True``.  ``strict`` raises ContinuityError
    listing the missing dates.  Accepts a PriceSeries or a sorted record
    sequence; duplicate dates always raise.
    """
    if policy not in ("forward_fill", "strict"):
        raise ValueError(f"unknown gap policy {policy!r}")
    if not isinstance(series, PriceSeries):
        records = list(series)
        if not records:
            raise EmptyInputError("nothing to regularize")
        for prev, cur in zip(records, records[1:]):
            if cur.date == prev.date:
                raise DuplicateDateError(f"duplicate date {cur.date}")
        series = PriceSeries(records)

    one_day = timedelta(days=1)
    missing: list[date] = []
    out: list[PriceRecord] = [series[0]]
    for rec in series.records[1:]:
        d = out[-1].date + one_day
        while d < rec.date:
            missing.append(d)
            prev = out[-1]
            out.append(PriceRecord(
                date=d, open=prev.open, high=prev.high, low=prev.low,
                close=prev.close, volume=0.0, change_pct=0.0, filled=True,
            ))
            d += one_day
        out.append(rec)
    if missing and policy == "strict":
        raise ContinuityError(missing)
    return PriceSeries(out)


def chronological_split(
    series: PriceSeries,
    spec: SplitSpec,
    min_segment: int | None = None,
) -> SplitResult:
    """Split into contiguous train → val → test segments in time order.

    Sizes are floor(train_ratio·N) and floor(val_ratio·N); test takes the
    remainder.  When ``min_segment`` is given (normally seq_len + pred_len),
    segments too short to yield a window are reported in ``warnings``.
    """
    n = len(series)
    if n < 10:
        raise InsufficientDataError(f"need at least 10 records to split, got {n}")
    n_train = math.floor(spec.train_ratio * n)
    n_val = math.floor(spec.val_ratio * n)
    n_test = n - n_train - n_val
    result = SplitResult(
        train=series[:n_train],
        val=series[n_train:n_train + n_val],
        test=series[n_train + n_val:],
    )
    if min_segment is not None:
        for name, seg in (("train", result.train), ("val", result.val), ("test", result.test)):
            if len(seg) < min_segment:
                result.warnings.append(
                    f"{name} segment has {len(seg)} records, fewer than the "
                    f"{min_segment} needed for one window"
                )
    assert n_train + n_val + n_test == n
    return result


def make_windows(
    segment,
    seq_len: int,
    pred_len: int,
    channel: str = "open",
) -> WindowSet:
    """Build stride-1 sliding windows over one segment.

    ``segment`` is a PriceSeries (the ``channel`` field is extracted) or a 1-D
    value array.  Window k takes values[k .. k+seq_len) as input and
    values[k+seq_len .. k+seq_len+pred_len) as target.
    """
    if seq_len < 1 or pred_len < 1:
        raise ValueError("seq_len and pred_len must be positive")
    if isinstance(segment, PriceSeries):
        values = segment.values(channel)
    else:
        values = np.asarray(segment, dtype=np.float64).reshape(-1)
    n = len(values)
    need = seq_len + pred_len
    if n < need:
        raise InsufficientDataError(
            f"segment of {n} values cannot yield a ({seq_len}, {pred_len}) window; "
            f"need at least {need}"
        )
    count = n - need + 1
    inputs = np.stack([values[k:k + seq_len] for k in range(count)])
    targets = np.stack([values[k + seq_len:k + need] for k in range(count)])
    return WindowSet(
        inputs=inputs,
        targets=targets,
        origin_indices=np.arange(count),
        seq_len=seq_len,
        pred_len=pred_len,
    )


def few_shot_truncate(
    train: PriceSeries,
    fraction: float,
    seq_len: int | None = None,
    pred_len: int | None = None,
) -> PriceSeries:
    """Keep only the first ceil(fraction·N) timesteps of the training segment.

    Validation and test segments are never truncated; callers pass the train
    segment only.  With seq_len/pred_len given, a result too short for one
    window raises InsufficientDataError.
    """
    if not (0.0 < fraction <= 1.0):
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    keep = math.ceil(fraction * len(train))
    truncated = train[:keep]
    if seq_len is not None and pred_len is not None and keep < seq_len + pred_len:
        raise InsufficientDataError(
            f"few-shot training segment of {keep} timesteps cannot yield a "
            f"({seq_len}, {pred_len}) window; need at least {seq_len + pred_len}"
        )
    return truncated


def _as_text(stream) -> str:
    if isinstance(stream, bytes):
        return stream.decode("utf-8")
    if isinstance(stream, str):
        if "\n" in stream or "," in stream:
            return stream
        with open(stream, "r", encoding="utf-8") as fh:
            return fh.read()
    if hasattr(stream, "__fspath__"):
        with open(stream, "r", encoding="utf-8") as fh:
            return fh.read()
    data = stream.read()
    if isinstance(data, bytes):
        return data.decode("utf-8")
    return data
