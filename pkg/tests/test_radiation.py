import logging
import math
from dataclasses import replace
from datetime import date, datetime, time, timedelta
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from facadefarm.citymodel import Footprint, GridCell, build_scene, extract_facade, grid_facade
from facadefarm.errors import InputError
from facadefarm.radiation import (
    DLI_PER_KWH_DAY, Period, cell_sunlit, cumulative_radiation, dli_map, ground_view_factor,
    instantaneous_irradiance, kwh_per_day_to_dli, par_from_irradiance, par_map, round_half_up,
    shadow_fraction, shadow_map, sky_view_factor, sky_view_factors,
)
from facadefarm.solarpos import SINGAPORE, SitePosition, SunVector, sun_position
from facadefarm.studyarea import study_area_scene
from facadefarm.weather import IrradianceComponents, SkyCondition, make_record, read_epw
from oracles import box_triangles, parallel_wall_svf, ray_hits_any_triangle

EPW = Path(__file__).parent / "data" / "Singapore-Changi_1990_2010_TMY.epw"
EQUATOR = SitePosition(0.0, 0.0, 0.0)


def box(x0, y0, x1, y1, h, name=""):
    return Footprint([(x0, y0), (x1, y0), (x1, y1), (x0, y1)], name=name, height=h)


def lone_tower(ground=0.0):
    """30 x 20 m footprint, 40 m tall; edge 0 faces south, 1 east, 2 north, 3 west."""
    return build_scene([box(0, 0, 30, 20, 40, "tower")], ground)


def up_cell(z=0.01):
    return GridCell(1, 1, np.array([500.0, 500.0, z]), np.array([0.0, 0.0, 1.0]), 1.0)


@pytest.fixture(scope="module")
def epw():
    return read_epw(EPW)


# --------------------------------------------------------------------------- conversions

def test_par_conversion_examples():
    assert par_from_irradiance(100) == pytest.approx(202)
    assert par_from_irradiance(0) == 0
    assert par_from_irradiance(500) == pytest.approx(1010)
    with pytest.raises(InputError):
        par_from_irradiance(-1)


@given(st.floats(0, 2000), st.floats(0, 10))
def test_par_linear(e, a):
    assert par_from_irradiance(a * e) == pytest.approx(a * par_from_irradiance(e), abs=1e-9)


def test_dli_conversion_and_rounding():
    assert kwh_per_day_to_dli(1) == pytest.approx(7.272)
    assert round_half_up(kwh_per_day_to_dli(1)) == 7
    assert kwh_per_day_to_dli(2) == pytest.approx(14.544)
    assert round_half_up(kwh_per_day_to_dli(2)) == 15
    assert round_half_up(np.array([2.5, 3.5, 0.49999])).tolist() == [3, 4, 0]


# --------------------------------------------------------------------------- direct sun

def test_cell_sunlit_cases():
    scene = lone_tower()
    south = grid_facade(extract_facade(scene.buildings[0], 0), 4, 4).cell(2, 2)
    assert not cell_sunlit(scene, south, SunVector.from_angles(180, -1))
    assert cell_sunlit(scene, south, SunVector.from_angles(180, 40))
    assert not cell_sunlit(scene, south, SunVector.from_angles(0, 40))     # behind the wall


def test_cell_behind_taller_neighbour():
    scene = build_scene([box(0, 0, 30, 20, 10, "low"), box(0, -30, 30, -20, 60, "tall")], None)
    cell = grid_facade(extract_facade(scene.building("low"), 0), 4, 4).cell(2, 2)
    sun = SunVector.from_angles(180, 40)
    assert not cell_sunlit(scene, cell, sun)
    tris = box_triangles(0, 0, 30, 20, 10) + box_triangles(0, -30, 30, -20, 60)
    assert ray_hits_any_triangle(tris, cell.centroid, sun.unit_dir)


def test_upward_cell_always_lit_on_equator():
    scene = build_scene([], 0.0)
    r = shadow_fraction(scene, up_cell(), date(2021, 3, 20), (time(7), time(19)), site=EQUATOR)
    assert r.fraction == 1.0
    mids = [datetime(2021, 3, 20, 7) + timedelta(minutes=10 * k + 5) for k in range(72)]
    assert r.daylight_samples == sum(sun_position(EQUATOR, t).elevation > 0 for t in mids)
    assert 60 < r.daylight_samples < 72     # sunset near 18:10 UTC on the prime meridian


def test_west_facade_morning():
    scene = lone_tower()
    cell = grid_facade(extract_facade(scene.buildings[0], 3), 4, 4).cell(2, 2)
    assert extract_facade(scene.buildings[0], 3).azimuth == pytest.approx(270)
    day = date(2021, 3, 20)
    assert shadow_fraction(scene, cell, day, (7, 12), site=EQUATOR).fraction == 0.0
    # 7am-1pm: lit only for the samples after solar noon (about 12:07 here)
    r = shadow_fraction(scene, cell, day, (7, 13), site=EQUATOR)
    after_noon = sum(sun_position(EQUATOR, datetime(2021, 3, 20, 7) + timedelta(minutes=10 * k + 5)).azimuth > 180
                     for k in range(36))
    assert r.fraction == pytest.approx(after_noon / 36)
    assert r.fraction < 0.2


def test_night_window_flagged():
    r = shadow_fraction(lone_tower(), up_cell(), date(2020, 3, 2), (time(0), time(5)), site=SINGAPORE)
    assert r.fraction == 0.0 and r.no_daylight


def test_window_validation():
    with pytest.raises(InputError):
        shadow_fraction(lone_tower(), up_cell(), date(2020, 3, 2), (13, 7))
    with pytest.raises(InputError):
        shadow_fraction(lone_tower(), up_cell(), date(2020, 3, 2), (7, 13), step=0)


def test_study_area_b_exposure_grows_with_height():
    scene = study_area_scene()
    grid = grid_facade(scene.facade("B"))
    sm = shadow_map(scene, grid, date(2020, 3, 17), (time(7), time(19)))
    assert np.all(sm.values[15] >= sm.values[1])


def test_window_partition_consistency():
    scene = study_area_scene()
    grid = grid_facade(scene.facade("A"))
    day = date(2020, 3, 17)
    am = shadow_map(scene, grid, day, (7, 13))
    pm = shadow_map(scene, grid, day, (13, 19))
    full = shadow_map(scene, grid, day, (7, 19))
    combined = (am.values * am.daylight_samples + pm.values * pm.daylight_samples) / \
        (am.daylight_samples + pm.daylight_samples)
    assert np.allclose(combined, full.values)


def test_adding_a_prism_never_adds_sun():
    rng = np.random.default_rng(3)
    base = [box(0, 0, 20, 20, 30, "t")]
    scene0 = build_scene(base, 0.0)
    grid = grid_facade(extract_facade(scene0.buildings[0], 0), 8, 8)
    for _ in range(5):
        x, y = rng.uniform(-40, 20), rng.uniform(-60, -10)
        scene1 = build_scene(base + [box(x, y, x + 15, y + 8, rng.uniform(10, 60), "n")], 0.0)
        a = shadow_map(scene0, grid, date(2020, 12, 1), (7, 19)).values
        b = shadow_map(scene1, grid, date(2020, 12, 1), (7, 19)).values
        assert np.all(b <= a)
        assert np.all(sky_view_factors(scene1, grid, 256) <= sky_view_factors(scene0, grid, 256))


# --------------------------------------------------------------------------- sky view

def test_svf_vertical_and_horizontal():
    scene = lone_tower()
    cell = grid_facade(extract_facade(scene.buildings[0], 0)).cell(8, 8)
    assert sky_view_factor(scene, cell) == pytest.approx(0.5, abs=0.02)
    assert sky_view_factor(build_scene([], 0.0), up_cell()) == pytest.approx(1.0, abs=0.01)


@pytest.mark.parametrize("row", [2, 8, 14])
def test_svf_parallel_wall(row):
    h = 30.0
    scene = build_scene([box(-1000, -20, 1000, 0, 45, "self"), box(-1000, h, 1000, h + 10, h, "wall")], 0.0)
    f = extract_facade(scene.building("self"), 2)          # north wall, facing the other slab
    g = grid_facade(f, 16, 16)
    cell = g.cell(row, 8)
    want = parallel_wall_svf(h, h, cell.centroid[2])
    assert sky_view_factor(scene, cell) == pytest.approx(want, abs=0.05)


def test_svf_deterministic_and_seeded():
    scene = study_area_scene()
    cell = grid_facade(scene.facade("C")).cell(3, 5)
    a = sky_view_factor(scene, cell, seed=7)
    assert a == sky_view_factor(scene, cell, seed=7)
    assert 0.0 <= a <= 1.0
    vals = {sky_view_factor(scene, cell, seed=s) for s in range(5)}
    assert len(vals) > 1


def test_svf_workers_match():
    scene = study_area_scene()
    grid = grid_facade(scene.facade("A"), 4, 4)
    assert np.array_equal(sky_view_factors(scene, grid, 256, 1, workers=1),
                          sky_view_factors(scene, grid, 256, 1, workers=4))


def test_svf_needs_samples():
    with pytest.raises(InputError):
        sky_view_factor(lone_tower(), up_cell(), samples=10)


def test_ground_view_factor():
    assert ground_view_factor([0, -1, 0]) == pytest.approx(0.5)
    assert ground_view_factor([0, 0, 1]) == pytest.approx(0.0)


# --------------------------------------------------------------------------- irradiance

def _south_cell(scene):
    return grid_facade(extract_facade(scene.building("tower"), 0)).cell(8, 8)


def _sun_at_cos(c):
    # south-facing normal (0,-1,0): cos incidence = cos(elev) for azimuth 180
    return SunVector.from_angles(180, math.degrees(math.acos(c)))


def test_irradiance_formula_cases():
    scene = lone_tower()
    cell = _south_cell(scene)
    sun = _sun_at_cos(0.7)
    comps = IrradianceComponents(800, 100, 0)
    assert instantaneous_irradiance(scene, cell, sun, comps, 0.0, svf=0.5) == pytest.approx(610)
    assert instantaneous_irradiance(scene, cell, sun, comps, 0.0) == pytest.approx(610, abs=2)
    night = IrradianceComponents(0, 0, 0)
    assert instantaneous_irradiance(scene, cell, SunVector.from_angles(0, -10), night) == 0


def test_irradiance_fully_shadowed():
    scene = build_scene([box(0, 0, 30, 20, 40, "tower"), box(-100, -12, 130, -10, 200, "screen")], 0.0)
    cell = _south_cell(scene)
    e = instantaneous_irradiance(scene, cell, _sun_at_cos(0.7), IrradianceComponents(800, 100, 0), svf=0.5)
    assert e == pytest.approx(50)


def test_irradiance_ground_reflection():
    scene = lone_tower()
    cell = _south_cell(scene)
    c = IrradianceComponents(0, 100, 400)
    base = instantaneous_irradiance(scene, cell, _sun_at_cos(0.7), c, 0.0, svf=0.5)
    refl = instantaneous_irradiance(scene, cell, _sun_at_cos(0.7), c, 0.3, svf=0.5)
    assert refl - base == pytest.approx(400 * 0.3 * 0.5)
    with pytest.raises(InputError):
        instantaneous_irradiance(scene, cell, _sun_at_cos(0.7), c, 1.5, svf=0.5)


def test_par_map_cloudy_is_diffuse_only():
    scene = study_area_scene()
    grid = grid_facade(scene.facade("A"))
    when = datetime(2020, 3, 2, 10)
    svf = sky_view_factors(scene, grid, 256)
    pm = par_map(scene, grid, when, SkyCondition.CLOUDY, svf=svf)
    ratio = pm.values / svf
    assert np.allclose(ratio, ratio[0, 0])


def test_par_map_ne_facade_morning_dominates():
    scene = study_area_scene()
    grid = grid_facade(scene.facade("A"))
    svf = sky_view_factors(scene, grid, 256)
    am = par_map(scene, grid, datetime(2020, 3, 2, 10), SkyCondition.SUNNY, svf=svf)
    pm = par_map(scene, grid, datetime(2020, 3, 2, 16), SkyCondition.SUNNY, svf=svf)
    assert am.values.mean() > pm.values.mean()


def test_par_map_albedo_adds_light():
    scene = study_area_scene()
    grid = grid_facade(scene.facade("W"))
    svf = sky_view_factors(scene, grid, 256)
    when = datetime(2020, 3, 2, 13)
    dark = par_map(scene, grid, when, SkyCondition.PARTLY_CLOUDY, albedo=0.0, svf=svf)
    bright = par_map(scene, grid, when, SkyCondition.PARTLY_CLOUDY, albedo=0.3, svf=svf)
    assert np.all(bright.values[:4] > dark.values[:4])


# --------------------------------------------------------------------------- cumulative

def _diffuse_day(day, dhi, hours=range(8, 18)):
    return [make_record(datetime.combine(day, time(h)), 0.0, dhi if h in hours else 0.0)
            for h in range(24)]


def test_cumulative_diffuse_hand_arithmetic():
    scene = lone_tower()
    cell = _south_cell(scene)
    recs = _diffuse_day(date(2020, 3, 2), 100.0)
    assert cumulative_radiation(scene, cell, recs, svf=0.5) == pytest.approx(0.5)
    assert cumulative_radiation(scene, cell, recs) == pytest.approx(0.5, abs=0.01)
    zero = _diffuse_day(date(2020, 3, 2), 0.0)
    assert cumulative_radiation(scene, cell, zero, svf=0.5) == 0.0


def test_cumulative_occluded_le_open(epw):
    open_scene = lone_tower()
    blocked = build_scene([box(0, 0, 30, 20, 40, "tower"), box(-10, -25, 40, -15, 60, "n")], 0.0)
    recs = epw.select(3)
    a = cumulative_radiation(open_scene, _south_cell(open_scene), recs, samples=256)
    b = cumulative_radiation(blocked, _south_cell(blocked), recs, samples=256)
    assert b <= a


def test_cumulative_months_add_to_year(epw):
    scene = study_area_scene()
    cell = grid_facade(scene.facade("B")).cell(5, 5)
    year = cumulative_radiation(scene, cell, epw, svf=0.4)
    months = sum(cumulative_radiation(scene, cell, epw, Period(m), svf=0.4) for m in range(1, 13))
    assert year == pytest.approx(months, rel=1e-9)


def test_missing_hours_warn_and_count_zero(caplog):
    scene = lone_tower()
    cell = _south_cell(scene)
    recs = _diffuse_day(date(2020, 3, 2), 100.0)
    recs[10] = replace(recs[10], dni=None, dhi=None, ghi=None)
    with caplog.at_level(logging.WARNING):
        e = cumulative_radiation(scene, cell, recs, svf=0.5)
    assert e == pytest.approx(0.45)
    assert "missing" in caplog.text


def _flat_epw_days(n_days, dhi):
    out = []
    for d in range(n_days):
        out += _diffuse_day(date(2020, 3, 1) + timedelta(days=d), dhi)
    return out


@pytest.mark.parametrize("dhi,dli,rounded", [(200.0, 7.272, 7), (400.0, 14.544, 15)])
def test_dli_map_conversion(dhi, dli, rounded):
    scene = lone_tower()
    grid = grid_facade(extract_facade(scene.buildings[0], 0), 4, 4)
    dm = dli_map(scene, grid, _flat_epw_days(3, dhi), svf=np.full((4, 4), 0.5))
    assert dm.days == 3
    assert np.allclose(dm.values, dli)
    assert np.all(dm.rounded == rounded)
    assert DLI_PER_KWH_DAY == pytest.approx(7.272)


def test_dli_map_deterministic_and_parallel(epw):
    scene = study_area_scene()
    grid = grid_facade(scene.facade("C"), 8, 8)
    a = dli_map(scene, grid, epw, Period(3), samples=256, seed=5)
    b = dli_map(scene, grid, epw, Period(3), samples=256, seed=5, workers=3)
    assert np.array_equal(a.values, b.values)
    assert a.days == 31 and a.period == "Mar"


def test_period_parse():
    assert Period.parse("Mar") == Period(3)
    assert Period.parse("march") == Period(3)
    assert Period.parse("12") == Period(12)
    assert Period.parse("year") == Period(None)
    assert Period(None).label == "year"
    with pytest.raises(InputError):
        Period.parse("Smarch")
    with pytest.raises(InputError):
        Period(13).select([])


def test_period_without_data():
    recs = _diffuse_day(date(2020, 3, 2), 100.0)
    with pytest.raises(InputError):
        cumulative_radiation(lone_tower(), up_cell(), recs, Period(4), svf=1.0)


@given(st.floats(5, 60), st.floats(-50, -5))
@settings(max_examples=10, deadline=None)
def test_neighbour_never_raises_dli(h, y):
    base = [box(0, 0, 30, 20, 40, "tower")]
    recs = _flat_epw_days(1, 150.0)
    recs = [make_record(r.timestamp, 500.0 if 9 <= r.timestamp.hour <= 16 else 0.0, r.dhi) for r in recs]
    s0 = build_scene(base, 0.0)
    s1 = build_scene(base + [box(-10, y - 6, 40, y, h, "n")], 0.0)
    g0 = grid_facade(extract_facade(s0.buildings[0], 0), 4, 4)
    g1 = grid_facade(extract_facade(s1.buildings[0], 0), 4, 4)
    a = dli_map(s0, g0, recs, samples=256).values
    b = dli_map(s1, g1, recs, samples=256).values
    assert np.all(b <= a + 1e-12)
