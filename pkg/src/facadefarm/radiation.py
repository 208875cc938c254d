"""Shadow fractions, sky view factors, PAR snapshots and cumulative DLI maps.

All map builders evaluate cells independently over an immutable scene, so
``workers > 1`` splits cells across threads without changing any result.
Each cell's hemisphere samples come from its own RNG stream seeded by
``(seed, row, col)``.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta
from typing import Optional, Sequence

import numpy as np

from .citymodel import CityScene, FacadeGrid, GridCell
from .errors import InputError
from .raycast import ray_occluded
from .solarpos import SINGAPORE, SitePosition, SunVector, direction, sun_position, sun_positions
from .weather import (DEFAULT_MULTIPLIERS, DEFAULT_TURBIDITY, EpwData, IrradianceComponents,
                      SkyCondition, SkyMultipliers, clear_sky_components, skytype_adjust)

log = logging.getLogger(__name__)

PAR_PER_WATT = 2.02                 # umol m-2 s-1 per W m-2
DLI_PER_KWH_DAY = 3.6 * PAR_PER_WATT  # mol m-2 day-1 per kWh m-2 day-1 (= 7.272)
SVF_SAMPLES = 1024


def par_from_irradiance(e):
    """Irradiance (W m-2) to PAR (umol m-2 s-1)."""
    arr = np.asarray(e, float)
    if np.any(arr < 0):
        raise InputError("irradiance must be non-negative")
    out = PAR_PER_WATT * arr
    return float(out) if out.ndim == 0 else out


def kwh_per_day_to_dli(kwh_per_m2_day):
    return DLI_PER_KWH_DAY * np.asarray(kwh_per_m2_day, float)


def round_half_up(values):
    return np.floor(np.asarray(values, float) + 0.5).astype(int)


# --------------------------------------------------------------------------- direct sun

def sunlit_matrix(scene: CityScene, points, normals, sun_dirs, elevations) -> np.ndarray:
    """Boolean (points x suns): sun up, facing the cell, and unobstructed."""
    points = np.atleast_2d(np.asarray(points, float))
    normals = np.atleast_2d(np.asarray(normals, float))
    sun_dirs = np.atleast_2d(np.asarray(sun_dirs, float))
    elevations = np.atleast_1d(np.asarray(elevations, float))
    facing = (normals @ sun_dirs.T > 0) & (elevations[None, :] > 0)
    out = np.zeros(facing.shape, bool)
    pi, si = np.nonzero(facing)
    if pi.size:
        out[pi, si] = ~scene.index.occluded(points[pi], sun_dirs[si])
    return out


def cell_sunlit(scene: CityScene, cell: GridCell, sun: SunVector) -> bool:
    if sun.elevation <= 0 or float(np.dot(cell.normal, sun.unit_dir)) <= 0:
        return False
    return not ray_occluded(scene, cell.centroid, sun.unit_dir).hit


def _sample_times(day: date, window, step: float) -> list[datetime]:
    t0, t1 = (_as_datetime(day, w) for w in window)
    if not t0 < t1:
        raise InputError("window start must precede its end")
    if step <= 0:
        raise InputError("step must be positive")
    n = int(math.floor((t1 - t0).total_seconds() / 60.0 / step + 1e-9))
    # midpoint rule over equal sub-intervals
    return [t0 + timedelta(minutes=(k + 0.5) * step) for k in range(n)]


def _as_datetime(day: date, t) -> datetime:
    if isinstance(t, datetime):
        return t
    if isinstance(t, time):
        return datetime.combine(day, t)
    hours = float(t)
    return datetime.combine(day, time()) + timedelta(hours=hours)


@dataclass(frozen=True)
class ShadowResult:
    fraction: float
    sunlit: int
    daylight_samples: int

    @property
    def no_daylight(self) -> bool:
        return self.daylight_samples == 0


def _shadow_counts(scene, points, normals, site, day, window, step):
    times = _sample_times(day, window, step)
    az, el = sun_positions(site, times)
    up = el > 0
    lit = sunlit_matrix(scene, points, normals, direction(az[up], el[up]), el[up])
    return lit.sum(axis=1), int(up.sum())


def shadow_fraction(scene: CityScene, cell: GridCell, day: date, window, step: float = 10,
                    site: SitePosition = SINGAPORE) -> ShadowResult:
    """Share of above-horizon samples in ``window`` when the cell sees the sun.

    ``window`` is a pair of clock times (``datetime.time``, hours as floats or
    full datetimes).  A window with no daylight yields 0 and ``no_daylight``.
    """
    lit, n_up = _shadow_counts(scene, cell.centroid[None], cell.normal[None], site, day, window, step)
    frac = float(lit[0]) / n_up if n_up else 0.0
    return ShadowResult(frac, int(lit[0]), n_up)


@dataclass(frozen=True)
class ShadowMap:
    grid: FacadeGrid
    period: tuple
    values: np.ndarray          # (rows, cols) fraction in [0, 1]
    daylight_samples: int

    def __post_init__(self):
        assert self.values.shape == (self.grid.rows, self.grid.cols)


def shadow_map(scene: CityScene, grid: FacadeGrid, day: date, window, step: float = 10,
               site: SitePosition = SINGAPORE) -> ShadowMap:
    lit, n_up = _shadow_counts(scene, grid.centroids, grid.normals, site, day, window, step)
    vals = lit / n_up if n_up else np.zeros(len(lit))
    t0, t1 = (_as_datetime(day, w) for w in window)
    return ShadowMap(grid, (t0, t1), vals.reshape(grid.rows, grid.cols), n_up)


def instant_sunlit_map(scene: CityScene, grid: FacadeGrid, instant: datetime,
                       site: SitePosition = SINGAPORE) -> np.ndarray:
    """Binary (rows, cols) map of direct sun at one instant."""
    sun = sun_position(site, instant)
    lit = sunlit_matrix(scene, grid.centroids, grid.normals, sun.unit_dir[None], [sun.elevation])
    return lit[:, 0].reshape(grid.rows, grid.cols).astype(float)


# --------------------------------------------------------------------------- sky view

def _tangent_frame(n: np.ndarray):
    helper = np.array([0.0, 0.0, 1.0]) if abs(n[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    t = np.cross(helper, n)
    t /= np.linalg.norm(t)
    return t, np.cross(n, t)


def hemisphere_directions(normal, samples: int, rng: np.random.Generator) -> np.ndarray:
    """Cosine-weighted, jittered-stratified directions about ``normal``."""
    if samples < 64:
        raise InputError("sky view factor needs at least 64 samples")
    nx = int(math.isqrt(samples))
    ny = samples // nx
    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    u1 = (i.ravel() + rng.random(nx * ny)) / nx
    u2 = (j.ravel() + rng.random(nx * ny)) / ny
    r = np.sqrt(u1)
    phi = 2.0 * np.pi * u2
    n = np.asarray(normal, float)
    t, b = _tangent_frame(n)
    local = np.column_stack([r * np.cos(phi), r * np.sin(phi), np.sqrt(np.maximum(0.0, 1.0 - u1))])
    return local[:, :1] * t + local[:, 1:2] * b + local[:, 2:] * n


def cell_rng(row: int, col: int, seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(row), int(col)]))


def sky_view_factor(scene: CityScene, cell: GridCell, samples: int = SVF_SAMPLES,
                    seed: int = 0) -> float:
    """Cosine-weighted share of the hemisphere that reaches open sky.

    Directions at or below the horizon never count as sky.
    """
    dirs = hemisphere_directions(cell.normal, samples, cell_rng(cell.row, cell.col, seed))
    up = dirs[:, 2] > 0
    open_sky = np.zeros(len(dirs), bool)
    if up.any():
        open_sky[up] = ~scene.index.occluded(np.broadcast_to(cell.centroid, (int(up.sum()), 3)), dirs[up])
    return float(open_sky.mean())


def ground_view_factor(normal) -> float:
    """View factor to an infinite horizontal ground plane: (1 - cos tilt) / 2."""
    return (1.0 - float(np.asarray(normal, float)[2])) / 2.0


def _per_cell(fn, cells, workers: int):
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, cells))
    return [fn(c) for c in cells]


def sky_view_factors(scene: CityScene, grid: FacadeGrid, samples: int = SVF_SAMPLES,
                     seed: int = 0, workers: int = 1) -> np.ndarray:
    vals = _per_cell(lambda c: sky_view_factor(scene, c, samples, seed), grid.cells, workers)
    return np.array(vals).reshape(grid.rows, grid.cols)


# --------------------------------------------------------------------------- irradiance

def instantaneous_irradiance(scene: CityScene, cell: GridCell, sun: SunVector,
                             c: IrradianceComponents, albedo: Optional[float] = None,
                             svf: Optional[float] = None, samples: int = SVF_SAMPLES,
                             seed: int = 0) -> float:
    """Beam + isotropic diffuse + ground-reflected irradiance on a cell (W m-2)."""
    albedo = scene.albedo if albedo is None else albedo
    if not 0.0 <= albedo <= 1.0:
        raise InputError("albedo must lie in [0, 1]")
    if svf is None:
        svf = sky_view_factor(scene, cell, samples, seed) if c.dhi > 0 else 0.0
    beam = 0.0
    if c.dni > 0 and cell_sunlit(scene, cell, sun):
        beam = c.dni * max(0.0, float(np.dot(cell.normal, sun.unit_dir)))
    reflected = c.ghi * albedo * ground_view_factor(cell.normal) if albedo > 0 else 0.0
    return beam + c.dhi * svf + reflected


@dataclass(frozen=True)
class ParMap:
    grid: FacadeGrid
    instant: datetime
    sky: SkyCondition
    values: np.ndarray          # (rows, cols) PAR in umol m-2 s-1


def par_map(scene: CityScene, grid: FacadeGrid, instant: datetime, sky: SkyCondition,
            albedo: float = 0.0, site: SitePosition = SINGAPORE,
            turbidity: float = DEFAULT_TURBIDITY, multipliers: SkyMultipliers = DEFAULT_MULTIPLIERS,
            samples: int = SVF_SAMPLES, seed: int = 0, workers: int = 1,
            svf: Optional[np.ndarray] = None) -> ParMap:
    """Instantaneous PAR on every cell under a skytype-adjusted clear sky."""
    sun = sun_position(site, instant)
    comps = skytype_adjust(clear_sky_components(sun, turbidity), sky,
                           max(0.0, float(sun.unit_dir[2])), multipliers)
    if svf is None:
        svf = sky_view_factors(scene, grid, samples, seed, workers)
    svf = np.asarray(svf).ravel()
    lit = sunlit_matrix(scene, grid.centroids, grid.normals, sun.unit_dir[None], [sun.elevation])[:, 0]
    cos_inc = np.maximum(0.0, grid.normals @ sun.unit_dir)
    gvf = (1.0 - grid.normals[:, 2]) / 2.0
    e = comps.dni * cos_inc * lit + comps.dhi * svf + (comps.ghi * albedo * gvf if albedo > 0 else 0.0)
    return ParMap(grid, instant, sky, par_from_irradiance(e).reshape(grid.rows, grid.cols))


# --------------------------------------------------------------------------- cumulative

@dataclass(frozen=True)
class Period:
    """A month (1-12) of the weather year, or the whole year when ``month`` is None."""
    month: Optional[int] = None

    @property
    def label(self) -> str:
        if self.month is None:
            return "year"
        return date(2000, self.month, 1).strftime("%b")

    def select(self, records: Sequence) -> list:
        if self.month is None:
            return list(records)
        if not 1 <= self.month <= 12:
            raise InputError(f"month {self.month} outside 1..12")
        return [r for r in records if r.timestamp.month == self.month]

    @classmethod
    def parse(cls, text) -> "Period":
        if text is None or str(text).strip().lower() in ("", "year", "annual", "all"):
            return cls(None)
        s = str(text).strip()
        if s.isdigit():
            return cls(int(s))
        for m in range(1, 13):
            d = date(2000, m, 1)
            if s.lower() in (d.strftime("%b").lower(), d.strftime("%B").lower()):
                return cls(m)
        raise InputError(f"unrecognised period {text!r}")


@dataclass(frozen=True)
class HourlySeries:
    """Per-hour sun direction and measured components, missing hours zeroed."""
    dirs: np.ndarray
    elev: np.ndarray
    dni: np.ndarray
    dhi: np.ndarray
    ghi: np.ndarray
    days: int
    missing: int


def hourly_series(records: Sequence, site: SitePosition) -> HourlySeries:
    if not records:
        raise InputError("no weather records in the requested period")
    mids = [r.midpoint for r in records]
    az, el = sun_positions(site, mids)
    missing = np.array([r.radiation_missing for r in records])
    dni = np.array([0.0 if m else r.dni for r, m in zip(records, missing)])
    dhi = np.array([0.0 if m else r.dhi for r, m in zip(records, missing)])
    sin_e = np.maximum(0.0, np.sin(np.radians(el)))
    ghi = np.array([0.0 if m else (r.ghi if r.ghi is not None else 0.0)
                    for r, m in zip(records, missing)])
    no_ghi = np.array([r.ghi is None for r in records]) & ~missing
    ghi = np.where(no_ghi, dni * sin_e + dhi, ghi)
    n_missing = int(missing.sum())
    if n_missing:
        log.warning("%d hour(s) with missing radiation contribute zero", n_missing)
    days = len({r.timestamp.date() for r in records})
    return HourlySeries(direction(az, el), el, dni, dhi, ghi, days, n_missing)


def _cumulative_wh(scene, points, normals, series: HourlySeries, albedo, svf):
    """Wh m-2 per point over the series (each hour weighted by 1 h)."""
    beam_hours = (series.dni > 0) & (series.elev > 0)
    beam = np.zeros(len(points))
    if beam_hours.any():
        dirs = series.dirs[beam_hours]
        lit = sunlit_matrix(scene, points, normals, dirs, series.elev[beam_hours])
        cos_inc = np.maximum(0.0, normals @ dirs.T)
        beam = (lit * cos_inc) @ series.dni[beam_hours]
    diffuse = svf * series.dhi.sum()
    reflected = 0.0
    if albedo > 0:
        reflected = albedo * (1.0 - normals[:, 2]) / 2.0 * series.ghi.sum()
    return beam + diffuse + reflected


def cumulative_radiation(scene: CityScene, cell: GridCell, epw, period: Period = Period(),
                         site: Optional[SitePosition] = None, albedo: Optional[float] = None,
                         samples: int = SVF_SAMPLES, seed: int = 0,
                         svf: Optional[float] = None) -> float:
    """Cumulative irradiation on one cell (kWh m-2) from hourly measured beam/diffuse."""
    records, site = _records_and_site(epw, period, site)
    albedo = scene.albedo if albedo is None else albedo
    series = hourly_series(records, site)
    if svf is None:
        svf = sky_view_factor(scene, cell, samples, seed)
    wh = _cumulative_wh(scene, cell.centroid[None], cell.normal[None], series, albedo,
                        np.array([svf]))
    return float(wh[0]) / 1000.0


def _records_and_site(epw, period, site):
    if isinstance(epw, EpwData):
        records = period.select(epw.records)
        if site is None:
            h = epw.header
            site = SitePosition(h.latitude, h.longitude, h.timezone)
    else:
        records = period.select(epw)
        site = site or SINGAPORE
    if not records:
        raise InputError(f"weather data does not cover period {period.label}")
    return records, site


@dataclass(frozen=True)
class DliMap:
    grid: FacadeGrid
    period: str
    values: np.ndarray          # (rows, cols) mol m-2 day-1
    days: int
    cumulative_kwh: np.ndarray

    @property
    def rounded(self) -> np.ndarray:
        return round_half_up(self.values)


def cumulative_map(scene: CityScene, grid: FacadeGrid, epw, period: Period = Period(),
                   site: Optional[SitePosition] = None, albedo: Optional[float] = None,
                   samples: int = SVF_SAMPLES, seed: int = 0, workers: int = 1,
                   svf: Optional[np.ndarray] = None) -> tuple[np.ndarray, int]:
    """(rows, cols) cumulative kWh m-2 plus the number of days covered."""
    records, site = _records_and_site(epw, period, site)
    albedo = scene.albedo if albedo is None else albedo
    series = hourly_series(records, site)
    if svf is None:
        svf = sky_view_factors(scene, grid, samples, seed, workers)
    svf = np.asarray(svf, float).ravel()
    idx = np.arange(len(grid.cells))
    chunks = np.array_split(idx, max(1, workers)) if workers > 1 else [idx]

    def run(ix):
        return _cumulative_wh(scene, grid.centroids[ix], grid.normals[ix], series, albedo, svf[ix])

    parts = _per_cell(run, chunks, workers)
    wh = np.concatenate(parts)
    return (wh / 1000.0).reshape(grid.rows, grid.cols), series.days


def dli_map(scene: CityScene, grid: FacadeGrid, epw, period: Period = Period(),
            site: Optional[SitePosition] = None, albedo: Optional[float] = None,
            samples: int = SVF_SAMPLES, seed: int = 0, workers: int = 1,
            svf: Optional[np.ndarray] = None) -> DliMap:
    """Average daily light integral per cell over a month or the year."""
    kwh, days = cumulative_map(scene, grid, epw, period, site, albedo, samples, seed, workers, svf)
    if days <= 0:
        raise InputError("period spans zero days")
    return DliMap(grid, period.label, kwh_per_day_to_dli(kwh / days), days, kwh)
