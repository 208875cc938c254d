"""Sun position from low-order analytic formulas.

Positions use the Astronomical Almanac low-precision solar coordinates
(mean longitude and anomaly as linear functions of the Julian day), good to
about 0.01 deg over 1950-2050.  The classic day-of-year series (Spencer
declination and equation of time, Cooper declination) remain available.  No
refraction correction is applied.
"""
from __future__ import annotations

import calendar
import math
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta
from typing import Optional

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class SitePosition:
    latitude: float
    longitude: float
    utc_offset: float = 0.0

    def __post_init__(self):
        if not -90.0 <= self.latitude <= 90.0:
            raise InputError(f"latitude {self.latitude} outside [-90, 90]")
        if not -180.0 <= self.longitude <= 180.0:
            raise InputError(f"longitude {self.longitude} outside [-180, 180]")


SINGAPORE = SitePosition(1.35, 103.7, 8.0)


@dataclass(frozen=True)
class SunVector:
    azimuth: float
    elevation: float
    unit_dir: np.ndarray

    @classmethod
    def from_angles(cls, azimuth: float, elevation: float) -> "SunVector":
        return cls(azimuth % 360.0, elevation, direction(azimuth, elevation))

    @property
    def above_horizon(self) -> bool:
        return self.elevation > 0.0


def direction(azimuth, elevation):
    """Unit vector(s) (East, North, Up) for azimuth/elevation in degrees."""
    a = np.radians(azimuth)
    e = np.radians(elevation)
    ce = np.cos(e)
    return np.stack([ce * np.sin(a), ce * np.cos(a), np.sin(e)], axis=-1)


def _year_days(year: Optional[int]) -> int:
    return 366 if year is not None and calendar.isleap(year) else 365


_REF_YEAR = 2019        # year assumed by the day-of-year helpers when none is given
_JD_ORDINAL = 1721424.5  # Julian day of proleptic-Gregorian ordinal 0 at 00:00 UT
_METHODS = ("almanac", "spencer", "cooper")


def _check_day(day_of_year, year_days):
    if not 1 <= math.floor(day_of_year) <= year_days:
        raise InputError(f"day of year {day_of_year} outside 1..{year_days}")


def _check_method(method, allowed=_METHODS):
    if method not in allowed:
        raise InputError(f"unknown method {method!r}; expected one of {', '.join(allowed)}")


def _day_args(day_of_year, hour, year):
    year = _REF_YEAR if year is None else int(year)
    yd = _year_days(year)
    n = np.asarray(day_of_year, float)
    _check_day(np.min(n), yd)
    _check_day(np.max(n), yd)
    return n, np.asarray(hour, float), year, yd


def _julian_day_of(n, hour, year):
    return date(year, 1, 1).toordinal() + _JD_ORDINAL + (n - 1) + hour / 24.0


def solar_declination(day_of_year, hour=12.0, year: Optional[int] = None, method: str = "spencer"):
    """Solar declination in degrees on day ``day_of_year`` at ``hour`` UT.

    ``method`` selects the Spencer Fourier series (default, year-agnostic),
    Cooper's single sine ``23.45 sin(360 (284 + n) / 365)`` or the almanac
    coordinates for the given ``year``.  Against the almanac the series
    errors reach about 0.3 deg (Spencer) and 1.3 deg (Cooper).
    """
    _check_method(method)
    n, hour, year, yd = _day_args(day_of_year, hour, year)
    if method == "cooper":
        return 23.45 * np.sin(np.radians(360.0 * (284.0 + n + (hour - 12.0) / 24.0) / yd))
    if method == "spencer":
        return _spencer_declination(n, hour, yd)
    return np.degrees(_almanac(_julian_day_of(n, hour, year))[0])


def equation_of_time(day_of_year, hour=12.0, year: Optional[int] = None, method: str = "spencer"):
    """Apparent minus mean solar time, in minutes (Spencer series unless ``method="almanac"``)."""
    _check_method(method, ("almanac", "spencer"))
    n, hour, year, yd = _day_args(day_of_year, hour, year)
    if method == "spencer":
        return _spencer_eot(n, hour, yd)
    return _almanac(_julian_day_of(n, hour, year))[1]


def _almanac(jd):
    """(declination rad, equation of time min) from the Julian day (UT)."""
    d = np.asarray(jd, float) - 2451545.0
    mean_lon = np.mod(280.460 + 0.9856474 * d, 360.0)
    g = np.radians(357.528 + 0.9856003 * d)
    lam = np.radians(mean_lon + 1.915 * np.sin(g) + 0.020 * np.sin(2 * g))
    eps = np.radians(23.439 - 4.0e-7 * d)
    decl = np.arcsin(np.sin(eps) * np.sin(lam))
    ra = np.degrees(np.arctan2(np.cos(eps) * np.sin(lam), np.cos(lam)))
    eot = 4.0 * (np.mod(mean_lon - ra + 180.0, 360.0) - 180.0)
    return decl, eot


def _spencer_gamma(n, hour, yd):
    return 2.0 * np.pi / yd * (n - 1 + (hour - 12.0) / 24.0)


def _spencer_declination(n, hour, yd):
    g = _spencer_gamma(n, hour, yd)
    return np.degrees(0.006918 - 0.399912 * np.cos(g) + 0.070257 * np.sin(g)
                      - 0.006758 * np.cos(2 * g) + 0.000907 * np.sin(2 * g)
                      - 0.002697 * np.cos(3 * g) + 0.00148 * np.sin(3 * g))


def _spencer_eot(n, hour, yd):
    g = _spencer_gamma(n, hour, yd)
    return 229.18 * (0.000075 + 0.001868 * np.cos(g) - 0.032077 * np.sin(g)
                     - 0.014615 * np.cos(2 * g) - 0.040849 * np.sin(2 * g))


def sun_position(site: SitePosition, instant: datetime) -> SunVector:
    """Sun azimuth/elevation at a civil (site standard time) instant."""
    if not isinstance(instant, datetime):
        raise InputError(f"expected a datetime, got {type(instant).__name__}")
    az, el = sun_positions(site, [instant])
    return SunVector.from_angles(float(az[0]), float(el[0]))


def sun_positions(site: SitePosition, instants) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ``sun_position``: returns (azimuth[], elevation[]) arrays."""
    instants = list(instants)
    if not instants:
        return np.empty(0), np.empty(0)
    hour = np.array([t.hour + t.minute / 60.0 + t.second / 3600.0 + t.microsecond / 3.6e9
                     for t in instants])
    ut = hour - site.utc_offset
    jd = np.array([t.toordinal() for t in instants], float) + _JD_ORDINAL + ut / 24.0
    decl, eot = _almanac(jd)
    solar_time = ut + (4.0 * site.longitude + eot) / 60.0
    h = np.radians(15.0 * (solar_time - 12.0))
    phi = math.radians(site.latitude)
    sin_e = np.sin(phi) * np.sin(decl) + np.cos(phi) * np.cos(decl) * np.cos(h)
    elev = np.degrees(np.arcsin(np.clip(sin_e, -1.0, 1.0)))
    az = np.degrees(np.arctan2(-np.cos(decl) * np.sin(h),
                               np.sin(decl) * np.cos(phi) - np.cos(decl) * np.sin(phi) * np.cos(h)))
    return np.mod(az, 360.0), elev


@dataclass(frozen=True)
class PathSample:
    time: datetime
    sun: SunVector

    @property
    def above_horizon(self) -> bool:
        return self.sun.elevation > 0.0


def sun_path(site: SitePosition, day: date, step: int = 60) -> list[PathSample]:
    """Sun positions over one civil day at ``step``-minute intervals, midnight first."""
    if step <= 0 or (24 * 60) % step:
        raise InputError(f"step of {step} min does not divide 24 h")
    start = datetime.combine(day, time())
    return [PathSample(t, sun_position(site, t))
            for t in (start + timedelta(minutes=k * step) for k in range((24 * 60) // step))]


def analemma(site: SitePosition, year: int, hour: int, every_days: int = 7) -> list[PathSample]:
    """Positions at a fixed clock hour through the year (one ring of the sun-path chart)."""
    out = []
    d = date(year, 1, 1)
    while d.year == year:
        t = datetime.combine(d, time(hour))
        out.append(PathSample(t, sun_position(site, t)))
        d += timedelta(days=every_days)
    return out


@dataclass(frozen=True)
class DaylightWindow:
    sunrise: Optional[datetime]
    sunset: Optional[datetime]
    polar: Optional[str] = None     # "day" (sun never sets) or "night" (never rises)

    @property
    def has_crossing(self) -> bool:
        return self.polar is None


def _elev_at(site, t):
    return sun_position(site, t).elevation


def _bisect(site, lo: datetime, hi: datetime, rising: bool) -> datetime:
    # elevation at lo is below (rising) / above (setting) the horizon
    while (hi - lo) > timedelta(seconds=1):
        mid = lo + (hi - lo) / 2
        up = _elev_at(site, mid) > 0.0
        if up == rising:
            hi = mid
        else:
            lo = mid
    return lo + (hi - lo) / 2


def daylight_window(site: SitePosition, day: date) -> DaylightWindow:
    """Sunrise and sunset (elevation zero crossings) on a civil day."""
    start = datetime.combine(day, time())
    times = [start + timedelta(minutes=10 * k) for k in range(145)]
    elev = [_elev_at(site, t) for t in times]
    rise = set_ = None
    for i in range(len(times) - 1):
        if rise is None and elev[i] <= 0.0 < elev[i + 1]:
            rise = _bisect(site, times[i], times[i + 1], rising=True)
        if elev[i] > 0.0 >= elev[i + 1]:
            set_ = _bisect(site, times[i], times[i + 1], rising=False)
    if rise is None and set_ is None:
        return DaylightWindow(None, None, "day" if elev[72] > 0 else "night")
    return DaylightWindow(rise, set_)
