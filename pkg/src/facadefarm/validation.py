"""Sensor calibration, measured DLI, hourly aggregation and agreement metrics."""
from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta
from decimal import ROUND_DOWN, Decimal
from importlib import resources
from typing import Optional

import numpy as np
from scipy.stats import rankdata

from .errors import GapError, InputError, ParseError, UndefinedCorrelationError

SAMPLE_SECONDS = 300
SAMPLES_PER_DAY = 288
DAY_START = time(6)            # survey days run 6am to 6am
_SPACING_TOL = 1.0             # seconds


@dataclass(frozen=True)
class CalibrationEquation:
    sensor_id: str
    a: float
    b: float
    r_squared: float = 1.0

    def __post_init__(self):
        if not self.a > 0:
            raise InputError(f"sensor {self.sensor_id}: slope must be positive")


def calibrate(eq: CalibrationEquation, raw):
    """Apply ``y = a x + b``, clamping negative output to zero."""
    x = np.asarray(raw, float)
    if np.any(x < 0):
        raise InputError("raw PAR must be non-negative")
    y = np.maximum(0.0, eq.a * x + eq.b)
    return float(y) if y.ndim == 0 else y


class CalibrationTable(dict):
    def equation(self, sensor_id: str) -> CalibrationEquation:
        try:
            return self[str(sensor_id)]
        except KeyError:
            raise InputError(f"no calibration equation for sensor {sensor_id!r}") from None

    def calibrate(self, sensor_id: str, raw):
        return calibrate(self.equation(sensor_id), raw)


def load_calibration(path=None) -> CalibrationTable:
    """Calibration CSV (sensor_id, a, b, r_squared); defaults to the bundled survey table."""
    if path is None:
        text = (resources.files("facadefarm") / "data" / "calibration.csv").read_text()
        name = "calibration.csv"
    else:
        with open(path, newline="") as fh:
            text = fh.read()
        name = str(path)
    table = CalibrationTable()
    for lineno, row in enumerate(csv.reader(text.splitlines()), start=1):
        if not row or row[0].strip().lower() in ("sensor_id", "") or row[0].startswith("#"):
            continue
        try:
            eq = CalibrationEquation(row[0].strip(), float(row[1]), float(row[2]),
                                     float(row[3]) if len(row) > 3 else 1.0)
        except (ValueError, IndexError):
            raise ParseError("expected sensor_id,a,b,r_squared", lineno, name) from None
        table[eq.sensor_id] = eq
    return table


@dataclass(frozen=True)
class SensorLocation:
    facade: str
    row: int
    col: int
    label: str = ""

    @property
    def key(self) -> str:
        return self.label or f"{self.facade}:{self.row}:{self.col}"


@dataclass(frozen=True)
class SensorLog:
    sensor_id: str
    samples: tuple                       # ((datetime, par), ...)
    location: Optional[SensorLocation] = None

    def __post_init__(self):
        samples = tuple((t, max(0.0, float(v))) for t, v in self.samples)
        for (t0, _), (t1, _) in zip(samples, samples[1:]):
            if t1 <= t0:
                raise InputError(f"sensor {self.sensor_id}: timestamps not strictly increasing at {t1}")
        object.__setattr__(self, "samples", samples)

    def scaled(self, factor: float) -> "SensorLog":
        return SensorLog(self.sensor_id, tuple((t, v * factor) for t, v in self.samples), self.location)


def _slots(log: SensorLog, start: datetime, n: int) -> list:
    """Assign samples to the ``n`` 5-minute slots from ``start`` (None where absent)."""
    out = [None] * n
    end = start + timedelta(seconds=SAMPLE_SECONDS * n)
    for t, v in log.samples:
        if not start - timedelta(seconds=_SPACING_TOL) <= t < end - timedelta(seconds=_SPACING_TOL):
            continue
        offset = (t - start).total_seconds()
        k = int(round(offset / SAMPLE_SECONDS))
        if abs(offset - k * SAMPLE_SECONDS) > _SPACING_TOL or not 0 <= k < n:
            raise InputError(f"sensor {log.sensor_id}: sample at {t} is off the 5-minute grid")
        out[k] = v
    return out


def _gaps(values, start: datetime):
    return [(start + timedelta(seconds=SAMPLE_SECONDS * k),
             start + timedelta(seconds=SAMPLE_SECONDS * (k + 1)))
            for k, v in enumerate(values) if v is None]


def measured_dli(log: SensorLog, day: date) -> float:
    """DLI (mol m-2 day-1) from the 288 five-minute means of a 6am-to-6am day."""
    start = datetime.combine(day, DAY_START)
    vals = _slots(log, start, SAMPLES_PER_DAY)
    missing = _gaps(vals, start)
    if missing:
        listed = ", ".join(f"{a:%Y-%m-%d %H:%M}-{b:%H:%M}" for a, b in missing[:10])
        more = f" (+{len(missing) - 10} more)" if len(missing) > 10 else ""
        raise GapError(f"sensor {log.sensor_id}: {len(missing)} missing five-minute "
                       f"sample(s) on {day}: {listed}{more}", missing)
    return sum(v * SAMPLE_SECONDS for v in vals) * 1e-6


def hourly_aggregate(log: SensorLog, day: date, start_hour: int = 7, end_hour: int = 19) -> list[float]:
    """Mean PAR of the twelve samples in each clock hour [h, h+1)."""
    out = []
    for h in range(start_hour, end_hour):
        t0 = datetime.combine(day, time()) + timedelta(hours=h)
        vals = _slots(log, t0, 12)
        if any(v is None for v in vals):
            n = sum(v is None for v in vals)
            raise GapError(f"sensor {log.sensor_id}: hour {t0:%Y-%m-%d %H}:00 is missing "
                           f"{n} of 12 samples", _gaps(vals, t0))
        out.append(sum(vals) / 12.0)
    return out


def _pair(a, b, min_len: int):
    x = np.asarray(a, float).ravel()
    y = np.asarray(b, float).ravel()
    if len(x) != len(y):
        raise InputError(f"series lengths differ ({len(x)} vs {len(y)})")
    if len(x) < min_len:
        raise InputError(f"need at least {min_len} paired values, got {len(x)}")
    return x, y


def spearman_rho(a, b) -> float:
    """Spearman's rank correlation (Pearson on average ranks)."""
    x, y = _pair(a, b, 3)
    rx, ry = rankdata(x), rankdata(y)
    dx, dy = rx - rx.mean(), ry - ry.mean()
    den = np.sqrt((dx * dx).sum() * (dy * dy).sum())
    if den == 0:
        raise UndefinedCorrelationError("correlation undefined for a constant series")
    return float(np.clip((dx * dy).sum() / den, -1.0, 1.0))


def mae_rmse(a, b) -> tuple[float, float]:
    x, y = _pair(a, b, 1)
    err = x - y
    return float(np.mean(np.abs(err))), float(np.sqrt(np.mean(err * err)))


def percent_reduction(unshaded: float, shaded: float) -> float:
    """Shading loss in percent, truncated to two decimals."""
    if unshaded <= 0:
        raise InputError("unshaded PAR must be positive")
    if shaded > unshaded:
        raise InputError("shaded PAR exceeds unshaded PAR")
    pct = Decimal(repr(unshaded - shaded)) * 100 / Decimal(repr(unshaded))
    return float(pct.quantize(Decimal("0.01"), rounding=ROUND_DOWN))


@dataclass(frozen=True)
class ValidationMetrics:
    rho: float
    mae: float
    rmse: float
    n: int


def compare(simulated, measured) -> ValidationMetrics:
    rho = spearman_rho(simulated, measured)
    mae, rmse = mae_rmse(simulated, measured)
    return ValidationMetrics(rho, mae, rmse, len(np.ravel(simulated)))


def _parse_time(text, lineno, name):
    try:
        return datetime.fromisoformat(text.strip())
    except ValueError:
        raise ParseError(f"bad timestamp {text!r}", lineno, name) from None


def load_sensor_logs(path, calibration: Optional[CalibrationTable] = None) -> dict:
    """Sensor CSV: ``sensor_id, timestamp, par[, facade, row, col, label]``.

    With ``calibration`` the ``par`` column is treated as raw logger output.
    """
    rows = defaultdict(list)
    locs = {}
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].strip().lower() in ("sensor_id", "") or row[0].startswith("#"):
                continue
            if len(row) < 3:
                raise ParseError("expected sensor_id,timestamp,par", lineno, path)
            sid = row[0].strip()
            t = _parse_time(row[1], lineno, path)
            try:
                v = float(row[2])
            except ValueError:
                raise ParseError(f"non-numeric par {row[2]!r}", lineno, path) from None
            if calibration is not None:
                v = calibration.calibrate(sid, v)
            rows[sid].append((t, v))
            if len(row) >= 6 and sid not in locs:
                try:
                    locs[sid] = SensorLocation(row[3].strip(), int(row[4]), int(row[5]),
                                               row[6].strip() if len(row) > 6 else "")
                except ValueError:
                    raise ParseError("row/col must be integers", lineno, path) from None
    return {sid: SensorLog(sid, tuple(sorted(s)), locs.get(sid)) for sid, s in rows.items()}


def hourly_series_from_log(log: SensorLog, start_hour: int = 7, end_hour: int = 19) -> dict:
    """{hour-start datetime: mean PAR} over every complete hour of the log in the window."""
    by_day = sorted({t.date() for t, _ in log.samples})
    out = {}
    for d in by_day:
        for h in range(start_hour, end_hour):
            t0 = datetime.combine(d, time(h))
            vals = _slots(log, t0, 12)
            if all(v is not None for v in vals):
                out[t0] = sum(vals) / 12.0
    return out
