"""EPW weather parsing, forecast skytypes and synthetic clear-sky irradiance."""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Optional

from .errors import InputError, ParseError, UnknownSkytypeError
from .solarpos import SunVector

EPW_HEADER_LINES = 8
EPW_FIELDS = 35
# 1-based positions inside a data row
F_YEAR, F_MONTH, F_DAY, F_HOUR = 1, 2, 3, 4
F_DRY_BULB = 7
F_GHI, F_DNI, F_DHI = 14, 15, 16

SOLAR_CONSTANT = 1361.0
DEFAULT_TURBIDITY = 2.75


@dataclass(frozen=True)
class EpwHeader:
    city: str
    latitude: float
    longitude: float
    timezone: float
    elevation: float
    lines: tuple = ()


@dataclass(frozen=True)
class WeatherRecord:
    """One hourly EPW row; ``None`` marks a value the file flags as missing."""
    timestamp: datetime          # start of the hour the row covers
    dni: Optional[float]
    dhi: Optional[float]
    ghi: Optional[float]
    dry_bulb: Optional[float]
    year: int = 0
    hour: int = 1                # EPW hour 1..24, interval ending at hour:00
    fields: tuple = ()

    @property
    def midpoint(self) -> datetime:
        return self.timestamp + timedelta(minutes=30)

    @property
    def radiation_missing(self) -> bool:
        return self.dni is None or self.dhi is None


@dataclass(frozen=True)
class EpwData:
    header: EpwHeader
    records: tuple

    def __len__(self):
        return len(self.records)

    def select(self, month: Optional[int] = None) -> list:
        if month is None:
            return list(self.records)
        return [r for r in self.records if r.timestamp.month == month]


def _num(text: str, lineno: int, name: str, source) -> float:
    try:
        return float(text)
    except ValueError:
        raise ParseError(f"non-numeric {name} field {text!r}", lineno, source) from None


def _decode(value: float, sentinel: float) -> Optional[float]:
    return None if value >= sentinel else value


def _parse_header(lines, source) -> EpwHeader:
    loc = lines[0].split(",")
    if loc[0].strip().upper() != "LOCATION" or len(loc) < 10:
        raise ParseError("first header line must be a LOCATION record", 1, source)
    return EpwHeader(
        city=loc[1].strip(),
        latitude=_num(loc[6], 1, "latitude", source),
        longitude=_num(loc[7], 1, "longitude", source),
        timezone=_num(loc[8], 1, "timezone", source),
        elevation=_num(loc[9], 1, "elevation", source),
        lines=tuple(lines),
    )


def parse_epw(stream, require_full_year: bool = True, source=None) -> EpwData:
    """Parse an EnergyPlus weather file.

    ``stream`` may be a binary or text file object, ``bytes`` or ``str``
    content.  With ``require_full_year`` the data must hold exactly one row
    per hour of a year (8760, or 8784 when it includes 29 Feb).
    """
    if isinstance(stream, (bytes, bytearray)):
        text = stream.decode("utf-8", errors="replace")
    elif isinstance(stream, str):
        text = stream
    else:
        raw = stream.read()
        text = raw.decode("utf-8", errors="replace") if isinstance(raw, bytes) else raw
    lines = text.splitlines()
    if len(lines) < EPW_HEADER_LINES:
        raise ParseError(f"file has {len(lines)} lines, fewer than the "
                         f"{EPW_HEADER_LINES} header lines", len(lines), source)
    header = _parse_header(lines[:EPW_HEADER_LINES], source)

    records = []
    for lineno, line in enumerate(lines[EPW_HEADER_LINES:], start=EPW_HEADER_LINES + 1):
        if not line.strip():
            continue
        f = line.split(",")
        if len(f) != EPW_FIELDS:
            raise ParseError(f"expected {EPW_FIELDS} comma-separated fields, found {len(f)}",
                             lineno, source)
        year = int(_num(f[F_YEAR - 1], lineno, "year", source))
        month = int(_num(f[F_MONTH - 1], lineno, "month", source))
        day = int(_num(f[F_DAY - 1], lineno, "day", source))
        hour = int(_num(f[F_HOUR - 1], lineno, "hour", source))
        if not 1 <= hour <= 24:
            raise ParseError(f"hour {hour} outside 1..24", lineno, source)
        try:
            start = datetime(year, month, day) + timedelta(hours=hour - 1)
        except ValueError as exc:
            raise ParseError(f"invalid date: {exc}", lineno, source) from None
        records.append(WeatherRecord(
            timestamp=start,
            dni=_decode(_num(f[F_DNI - 1], lineno, "direct normal radiation", source), 9999),
            dhi=_decode(_num(f[F_DHI - 1], lineno, "diffuse horizontal radiation", source), 9999),
            ghi=_decode(_num(f[F_GHI - 1], lineno, "global horizontal radiation", source), 9999),
            dry_bulb=_decode(_num(f[F_DRY_BULB - 1], lineno, "dry bulb", source), 99.9),
            year=year, hour=hour, fields=tuple(f),
        ))
        r = records[-1]
        for name in ("dni", "dhi", "ghi"):
            val = getattr(r, name)
            if val is not None and val < 0:
                raise ParseError(f"negative {name} {val}", lineno, source)

    if require_full_year:
        n = len(records)
        has_leap_day = any(r.timestamp.month == 2 and r.timestamp.day == 29 for r in records)
        expected = 8784 if has_leap_day else 8760
        if n != expected:
            raise ParseError(f"expected {expected} hourly records, found {n}",
                             EPW_HEADER_LINES + n, source)
    return EpwData(header, tuple(records))


def read_epw(path, require_full_year: bool = True) -> EpwData:
    with open(path, "rb") as fh:
        return parse_epw(fh, require_full_year, source=Path(path).name)


def _fmt(v: Optional[float], sentinel: str) -> str:
    if v is None:
        return sentinel
    return repr(float(v)) if v != int(v) else str(int(v))


def serialize_epw(data: EpwData) -> str:
    """Write records back out; radiation and dry-bulb fields come from the records."""
    lines = list(data.header.lines) if data.header.lines else [
        f"LOCATION,{data.header.city},-,-,-,0,{data.header.latitude},{data.header.longitude},"
        f"{data.header.timezone},{data.header.elevation}"] + ["COMMENTS"] * (EPW_HEADER_LINES - 1)
    for r in data.records:
        f = list(r.fields) if r.fields else ["0"] * EPW_FIELDS
        ts = r.timestamp
        f[F_YEAR - 1] = str(r.year or ts.year)
        f[F_MONTH - 1] = str(ts.month)
        f[F_DAY - 1] = str(ts.day)
        f[F_HOUR - 1] = str(r.hour)
        f[F_DNI - 1] = _fmt(r.dni, "9999")
        f[F_DHI - 1] = _fmt(r.dhi, "9999")
        f[F_GHI - 1] = _fmt(r.ghi, "9999")
        f[F_DRY_BULB - 1] = _fmt(r.dry_bulb, "99.9")
        lines.append(",".join(f))
    return "\n".join(lines) + "\n"


def make_record(when: datetime, dni: float, dhi: float, ghi: Optional[float] = None,
                dry_bulb: float = 27.0) -> WeatherRecord:
    """Build a record for the hour starting at ``when`` (handy for synthetic series)."""
    ghi = dni + dhi if ghi is None else ghi
    return WeatherRecord(when, dni, dhi, ghi, dry_bulb, year=when.year, hour=when.hour + 1)


class SkyCondition(enum.Enum):
    SUNNY = "Sunny"
    PARTLY_CLOUDY = "PartlyCloudy"
    CLOUDY = "Cloudy"


_FORECAST_TO_SKY = {
    "fair": SkyCondition.SUNNY,
    "fair & warm": SkyCondition.SUNNY,
    "partly cloudy": SkyCondition.PARTLY_CLOUDY,
    "showers": SkyCondition.CLOUDY,
    "thundery showers": SkyCondition.CLOUDY,
}


def classify_skytype(forecast: str) -> SkyCondition:
    key = " ".join(str(forecast).strip().lower().split())
    key = key.replace(" and ", " & ")
    try:
        return _FORECAST_TO_SKY[key]
    except KeyError:
        raise UnknownSkytypeError(f"unrecognised forecast category {forecast!r}") from None


def parse_sky(text: str) -> SkyCondition:
    """Accept either a skytype name (``sunny``, ``PartlyCloudy``) or a forecast string."""
    key = str(text).strip().lower().replace("_", "").replace(" ", "")
    for sky in SkyCondition:
        if key == sky.value.lower():
            return sky
    return classify_skytype(text)


SEGMENTS = ("morning", "afternoon", "night")


def segment_of(instant: datetime) -> tuple[date, str]:
    """Forecast segment covering an instant: morning 6-12, afternoon 12-18, night 18-6."""
    h = instant.hour
    if 6 <= h < 12:
        return instant.date(), "morning"
    if 12 <= h < 18:
        return instant.date(), "afternoon"
    if h >= 18:
        return instant.date(), "night"
    return instant.date() - timedelta(days=1), "night"


@dataclass
class SkySchedule:
    entries: dict = field(default_factory=dict)   # (date, segment) -> SkyCondition

    def at(self, instant: datetime) -> SkyCondition:
        key = segment_of(instant)
        try:
            return self.entries[key]
        except KeyError:
            raise InputError(f"no skytype scheduled for {key[0]} {key[1]}") from None


def load_sky_schedule(path) -> SkySchedule:
    """CSV with columns ``date, segment, category`` (forecast wording or skytype name)."""
    sched = SkySchedule()
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].strip().lower() in ("date", "") or row[0].startswith("#"):
                continue
            if len(row) < 3:
                raise ParseError("expected date,segment,category", lineno, path)
            try:
                d = date.fromisoformat(row[0].strip())
            except ValueError:
                raise ParseError(f"bad date {row[0]!r}", lineno, path) from None
            seg = row[1].strip().lower()
            if seg not in SEGMENTS:
                raise ParseError(f"segment must be one of {SEGMENTS}", lineno, path)
            sched.entries[(d, seg)] = parse_sky(row[2])
    return sched


@dataclass(frozen=True)
class IrradianceComponents:
    dni: float
    dhi: float
    ghi: float

    def __post_init__(self):
        if min(self.dni, self.dhi, self.ghi) < 0:
            raise InputError("irradiance components must be non-negative")


ZERO = IrradianceComponents(0.0, 0.0, 0.0)


def air_mass(elevation_deg: float) -> float:
    """Kasten-Young relative optical air mass."""
    e = elevation_deg
    return 1.0 / (math.sin(math.radians(e)) + 0.50572 * (e + 6.07995) ** -1.6364)


def clear_sky_components(sun: SunVector, turbidity: float = DEFAULT_TURBIDITY) -> IrradianceComponents:
    """Simple clear-sky beam/diffuse split used for skytype snapshots."""
    e = sun.elevation
    if e <= 0:
        return ZERO
    sin_e = math.sin(math.radians(e))
    am = air_mass(e)
    dni = SOLAR_CONSTANT * 0.7 ** (am ** 0.678) * math.exp(-0.02 * (turbidity - DEFAULT_TURBIDITY))
    dhi = 0.10 * SOLAR_CONSTANT * sin_e
    return IrradianceComponents(dni, dhi, dni * sin_e + dhi)


@dataclass(frozen=True)
class SkyMultipliers:
    """(beam, diffuse) scale factors per skytype."""
    sunny: tuple = (1.0, 1.0)
    partly_cloudy: tuple = (0.15, 1.2)
    cloudy: tuple = (0.0, 0.7)

    def for_sky(self, sky: SkyCondition) -> tuple:
        return {SkyCondition.SUNNY: self.sunny,
                SkyCondition.PARTLY_CLOUDY: self.partly_cloudy,
                SkyCondition.CLOUDY: self.cloudy}[sky]


DEFAULT_MULTIPLIERS = SkyMultipliers()


def skytype_adjust(c: IrradianceComponents, sky: SkyCondition, sin_elevation: Optional[float] = None,
                   multipliers: SkyMultipliers = DEFAULT_MULTIPLIERS) -> IrradianceComponents:
    """Scale beam and diffuse for a skytype and recompute GHI.

    GHI is rebuilt as ``dni * sin(e) + dhi``.  When the sun elevation is not
    supplied, the beam's horizontal share is recovered from the input
    components (``(ghi - dhi) / dni``).
    """
    kb, kd = multipliers.for_sky(sky)
    if sin_elevation is None:
        sin_elevation = (c.ghi - c.dhi) / c.dni if c.dni > 0 else 0.0
        sin_elevation = min(max(sin_elevation, 0.0), 1.0)
    dni = kb * c.dni
    dhi = kd * c.dhi
    return IrradianceComponents(dni, dhi, dni * sin_elevation + dhi)
