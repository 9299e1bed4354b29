"""Daily OHLCV + Fear & Greed ingestion, validation, alignment, and caching.

Data sources are the public exchange klines endpoint (daily candles, UTC
midnight-to-midnight) and the alternative.me Fear & Greed endpoint. Both
series are keyed by UTC calendar day, so an inner join on date aligns them
without interpolation. Auxiliary series (implied vol, VIX, stablecoin price,
cross-exchange dispersion) are user-supplied CSVs and never fetched.

The cache is a deterministic CSV: sorted dates, fixed column order, and
``repr``-formatted floats so a save/load round trip is lossless and two saves
of the same series are byte identical.
"""

from __future__ import annotations

import datetime as dt
import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd
import requests

from .errors import (
    DataQualityError,
    EmptySampleError,
    InsufficientDataError,
    ParseError,
    SchemaError,
    TransportError,
)

KLINES_BASE_URL = "https://api.binance.com"
KLINES_PATH = "/api/v3/klines"
FEAR_GREED_URL = "https://api.alternative.me/fng/"

#: Fixed cache schema; the header line doubles as the schema version.
CACHE_COLUMNS = [
    "date", "open", "high", "low", "close", "volume",
    "fg_value", "dvol", "vix", "stable_px", "xdisp",
]
AUX_COLUMNS = ["dvol", "vix", "stable_px", "xdisp"]

_MS_PER_DAY = 86_400_000
_PAGE_LIMIT = 1000
_MIN_REQUEST_GAP = 0.25         # seconds between pages, public-API etiquette
_MAX_RETRIES = 5
_RETRY_STATUS = {418, 429, 500, 502, 503, 504}


@dataclass(frozen=True)
class OhlcvBar:
    """One UTC daily candle. Prices strictly positive, volume nonnegative."""

    date: dt.date
    open: float
    high: float
    low: float
    close: float
    volume: float

    def __post_init__(self):
        for name in ("open", "high", "low", "close"):
            v = getattr(self, name)
            if not math.isfinite(v) or v <= 0:
                raise DataQualityError(f"{self.date}: {name}={v!r} not a finite positive price")
        if not math.isfinite(self.volume) or self.volume < 0:
            raise DataQualityError(f"{self.date}: volume={self.volume!r} negative or non-finite")
        if self.low > min(self.open, self.close) or max(self.open, self.close) > self.high:
            raise DataQualityError(
                f"{self.date}: OHLC ordering violated "
                f"(O={self.open}, H={self.high}, L={self.low}, C={self.close})"
            )


@dataclass(frozen=True)
class FearGreedReading:
    """One daily Fear & Greed index value in [0, 100]."""

    date: dt.date
    value: int
    label: Optional[str] = None

    def __post_init__(self):
        if not 0 <= self.value <= 100:
            raise DataQualityError(f"{self.date}: fear/greed value {self.value} outside [0, 100]")


@dataclass
class AuxiliarySeries:
    """Optional date-keyed auxiliary columns (dvol, vix, stable_px, xdisp).

    Each column is either absent or defined on a subset of dates; NaN rows are
    treated as absent. Values are validated on construction.
    """

    frame: pd.DataFrame = field(default_factory=lambda: pd.DataFrame(columns=AUX_COLUMNS))

    def __post_init__(self):
        f = self.frame
        unknown = [c for c in f.columns if c not in AUX_COLUMNS]
        if unknown:
            raise SchemaError(f"unknown auxiliary columns: {unknown}")
        if len(f) and not f.index.is_unique:
            raise DataQualityError("auxiliary series has duplicate dates")
        for col, lower_ok in (("dvol", False), ("vix", False), ("stable_px", False), ("xdisp", True)):
            if col in f.columns:
                vals = f[col].dropna()
                bad = vals <= 0 if not lower_ok else vals < 0
                if bad.any():
                    first = vals[bad].index[0]
                    raise DataQualityError(f"{col} at {first}: value {vals[bad].iloc[0]!r} out of domain")

    @classmethod
    def from_csvs(cls, paths: dict) -> "AuxiliarySeries":
        """Build from per-column CSVs with header ``date,value``."""
        cols = {}
        for col, path in paths.items():
            if col not in AUX_COLUMNS:
                raise SchemaError(f"unknown auxiliary column {col!r}")
            raw = pd.read_csv(path)
            if list(raw.columns) != ["date", "value"]:
                raise SchemaError(f"{path}: expected header 'date,value', got {list(raw.columns)}")
            s = pd.Series(raw["value"].astype(float).values,
                          index=pd.to_datetime(raw["date"]).dt.normalize())
            cols[col] = s
        frame = pd.DataFrame(cols).sort_index()
        return cls(frame)

    def is_empty(self) -> bool:
        return self.frame.empty or self.frame.dropna(how="all").empty


@dataclass
class AlignedSeries:
    """Inner-joined daily table of OHLCV + Fear & Greed (+ auxiliaries).

    ``frame`` is indexed by a normalized DatetimeIndex with the fixed column
    order of :data:`CACHE_COLUMNS` (minus the date index). Metadata records
    how many input rows each side lost in the join.
    """

    frame: pd.DataFrame
    symbol: str = ""
    dropped_bars: int = 0
    dropped_readings: int = 0

    def __post_init__(self):
        idx = self.frame.index
        if len(idx) == 0:
            raise EmptySampleError("aligned series is empty")
        if not idx.is_monotonic_increasing or not idx.is_unique:
            raise DataQualityError("aligned dates must be strictly increasing and unique")

    @property
    def n(self) -> int:
        return len(self.frame)

    @property
    def start(self) -> dt.date:
        return self.frame.index[0].date()

    @property
    def end(self) -> dt.date:
        return self.frame.index[-1].date()

    def bars(self) -> list[OhlcvBar]:
        return [
            OhlcvBar(ts.date(), r.open, r.high, r.low, r.close, r.volume)
            for ts, r in self.frame.iterrows()
        ]

    def readings(self) -> list[FearGreedReading]:
        return [FearGreedReading(ts.date(), int(r.fg_value)) for ts, r in self.frame.iterrows()]


# ---------------------------------------------------------------------------
# Fetching
# ---------------------------------------------------------------------------

def _utc_ms(day: dt.date) -> int:
    return int(dt.datetime(day.year, day.month, day.day, tzinfo=dt.timezone.utc).timestamp() * 1000)


def _get_with_retry(session, url, params, timeout=30.0):
    delay = 0.5
    last = None
    for _ in range(_MAX_RETRIES):
        try:
            resp = session.get(url, params=params, timeout=timeout)
        except requests.RequestException as exc:
            last = exc
            time.sleep(delay)
            delay *= 2
            continue
        if resp.status_code in _RETRY_STATUS:
            last = RuntimeError(f"HTTP {resp.status_code}")
            time.sleep(delay)
            delay *= 2
            continue
        if resp.status_code != 200:
            raise TransportError(f"GET {url} -> HTTP {resp.status_code}")
        return resp
    raise TransportError(f"GET {url} failed after {_MAX_RETRIES} retries: {last}")


def _parse_kline_row(row) -> OhlcvBar:
    if not isinstance(row, (list, tuple)) or len(row) < 7:
        raise ParseError(f"kline row has {len(row) if isinstance(row, (list, tuple)) else 'no'} fields, expected >= 7")
    names = ("open_time", "open", "high", "low", "close", "volume", "close_time")
    vals = {}
    for i, name in enumerate(names):
        try:
            vals[name] = int(row[i]) if name.endswith("_time") else float(row[i])
        except (TypeError, ValueError) as exc:
            raise ParseError(f"kline field {name!r}: cannot parse {row[i]!r}") from exc
    day = dt.datetime.fromtimestamp(vals["open_time"] / 1000, tz=dt.timezone.utc).date()
    return OhlcvBar(day, vals["open"], vals["high"], vals["low"], vals["close"], vals["volume"])


def fetch_ohlcv(symbol: str, start: dt.date, end: dt.date, *,
                session=None, base_url: str = KLINES_BASE_URL) -> list[OhlcvBar]:
    """Fetch daily UTC candles for ``symbol`` over [start, end], inclusive.

    Pages through the klines endpoint 1000 rows at a time with a fixed
    minimum inter-request delay and exponential backoff on throttling.
    """
    if start > end:
        raise ValueError(f"start {start} after end {end}")
    if session is None:
        session = requests.Session()

    bars: list[OhlcvBar] = []
    cursor = _utc_ms(start)
    end_ms = _utc_ms(end)
    first = True
    while cursor <= end_ms:
        if not first:
            time.sleep(_MIN_REQUEST_GAP)
        first = False
        resp = _get_with_retry(session, base_url + KLINES_PATH, {
            "symbol": symbol, "interval": "1d",
            "startTime": cursor, "endTime": end_ms, "limit": _PAGE_LIMIT,
        })
        try:
            payload = resp.json()
        except ValueError as exc:
            raise ParseError(f"klines response is not JSON: {exc}") from exc
        if not isinstance(payload, list):
            raise ParseError(f"klines response not a list: {type(payload).__name__}")
        if not payload:
            break
        for row in payload:
            bars.append(_parse_kline_row(row))
        cursor = int(payload[-1][0]) + _MS_PER_DAY
        if len(payload) < _PAGE_LIMIT:
            break

    seen = set()
    for bar in bars:
        if bar.date in seen:
            raise DataQualityError(f"duplicate kline for {bar.date}")
        seen.add(bar.date)
    return [b for b in bars if start <= b.date <= end]


def fetch_fear_greed(start: dt.date, end: dt.date, *, session=None,
                     url: str = FEAR_GREED_URL) -> list[FearGreedReading]:
    """Fetch Fear & Greed readings covering [start, end], one per day."""
    if start > end:
        raise ValueError(f"start {start} after end {end}")
    if session is None:
        session = requests.Session()
    resp = _get_with_retry(session, url, {"limit": 0, "format": "json"})
    try:
        payload = resp.json()
    except ValueError as exc:
        raise ParseError(f"fear/greed response is not JSON: {exc}") from exc
    rows = payload.get("data")
    if rows is None:
        raise ParseError("fear/greed response missing 'data' field")

    readings = []
    for row in rows:
        try:
            value = int(row["value"])
            ts = int(row["timestamp"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"fear/greed row field unparseable: {row!r}") from exc
        day = dt.datetime.fromtimestamp(ts, tz=dt.timezone.utc).date()
        if not start <= day <= end:
            continue
        readings.append(FearGreedReading(day, value, row.get("value_classification")))
    readings.sort(key=lambda r: r.date)
    dates = [r.date for r in readings]
    if len(set(dates)) != len(dates):
        dup = next(d for i, d in enumerate(dates) if d in dates[:i])
        raise DataQualityError(f"duplicate fear/greed reading for {dup}")
    return readings


# ---------------------------------------------------------------------------
# Alignment
# ---------------------------------------------------------------------------

def align(bars: Sequence[OhlcvBar], readings: Sequence[FearGreedReading],
          aux: Optional[AuxiliarySeries] = None, symbol: str = "") -> AlignedSeries:
    """Inner-join bars and readings on date; attach auxiliaries where present.

    No interpolation: a day survives only if both a bar and a reading exist.
    """
    bar_dates = {b.date for b in bars}
    fg_dates = {r.date for r in readings}
    common = bar_dates & fg_dates
    if not common:
        raise EmptySampleError("no overlapping dates between bars and fear/greed readings")

    by_date = {b.date: b for b in bars}
    fg_by_date = {r.date: r for r in readings}
    days = sorted(common)
    idx = pd.DatetimeIndex([pd.Timestamp(d) for d in days])
    frame = pd.DataFrame({
        "open": [by_date[d].open for d in days],
        "high": [by_date[d].high for d in days],
        "low": [by_date[d].low for d in days],
        "close": [by_date[d].close for d in days],
        "volume": [by_date[d].volume for d in days],
        "fg_value": [float(fg_by_date[d].value) for d in days],
    }, index=idx)

    for col in AUX_COLUMNS:
        frame[col] = np.nan
    if aux is not None and not aux.frame.empty:
        aux_frame = aux.frame.reindex(idx)
        for col in AUX_COLUMNS:
            if col in aux.frame.columns:
                frame[col] = aux_frame[col].astype(float)

    return AlignedSeries(
        frame=frame[[c for c in CACHE_COLUMNS if c != "date"]],
        symbol=symbol,
        dropped_bars=len(bar_dates) - len(common),
        dropped_readings=len(fg_dates) - len(common),
    )


# ---------------------------------------------------------------------------
# Cache
# ---------------------------------------------------------------------------

def _format_cell(value) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return repr(float(value))


def persist_cache(series: AlignedSeries, path) -> None:
    """Write the deterministic cache CSV (two saves are byte identical)."""
    lines = [",".join(CACHE_COLUMNS)]
    frame = series.frame.sort_index()
    for ts, row in frame.iterrows():
        cells = [ts.date().isoformat()]
        for col in CACHE_COLUMNS[1:]:
            if col == "fg_value":
                cells.append(str(int(row[col])))
            else:
                cells.append(_format_cell(row[col]))
        lines.append(",".join(cells))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def load_cache(path, symbol: str = "") -> AlignedSeries:
    """Load a cache CSV, validating the schema header and all invariants."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header.split(",") != CACHE_COLUMNS:
            raise SchemaError(f"{path}: cache header {header!r} does not match expected schema")
        body = fh.read()

    dates, records = [], []
    for lineno, line in enumerate(body.splitlines(), start=2):
        if not line:
            continue
        cells = line.split(",")
        if len(cells) != len(CACHE_COLUMNS):
            raise SchemaError(f"{path}:{lineno}: expected {len(CACHE_COLUMNS)} cells, got {len(cells)}")
        try:
            day = dt.date.fromisoformat(cells[0])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: bad date {cells[0]!r}") from exc
        rec = {}
        for col, cell in zip(CACHE_COLUMNS[1:], cells[1:]):
            rec[col] = float(cell) if cell != "" else math.nan
        dates.append(day)
        records.append(rec)
    if not records:
        raise EmptySampleError(f"{path}: cache has no rows")

    frame = pd.DataFrame(records, index=pd.DatetimeIndex([pd.Timestamp(d) for d in dates]))
    series = AlignedSeries(frame=frame, symbol=symbol)
    series.bars()        # re-validate OHLCV invariants, raises DataQualityError
    for ts, fg in frame["fg_value"].items():
        if math.isnan(fg) or not 0 <= fg <= 100 or fg != int(fg):
            raise DataQualityError(f"{ts.date()}: cached fg_value {fg!r} invalid")
    return series


# ---------------------------------------------------------------------------
# Derived columns
# ---------------------------------------------------------------------------

def compute_log_returns(series) -> pd.Series:
    """Daily log returns ln(c_t / c_{t-1}); the first day is NaN.

    Accepts an :class:`AlignedSeries` or any frame with a ``close`` column.
    The leading NaN mirrors the complete-case convention used by every
    lag-dependent analysis: boundary rows are dropped, never filled.
    """
    frame = series.frame if isinstance(series, AlignedSeries) else series
    close = frame["close"].astype(float)
    if len(close) < 2:
        raise InsufficientDataError("need at least 2 days for returns")
    if (close <= 0).any():
        bad = close.index[close <= 0][0]
        raise DataQualityError(f"{bad.date()}: nonpositive close")
    return np.log(close / close.shift(1))
