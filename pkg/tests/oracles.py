"""Independent reference implementations used only by the test-suite.

Nothing here imports from ``facadefarm``; the point is to check the package
against code paths that share no logic with it.
"""
import math
from datetime import datetime, timedelta

import numpy as np


def noaa_sun(lat, lon, tz, when):
    """NOAA solar-calculator spreadsheet (Meeus low-precision), no refraction.

    Returns ``(elevation_deg, azimuth_deg, declination_deg, eot_minutes)``
    for civil time ``when`` at a fixed UTC offset ``tz`` (hours).
    """
    day_frac = (when.hour + when.minute / 60 + when.second / 3600) / 24
    a = (14 - when.month) // 12
    y = when.year + 4800 - a
    m = when.month + 12 * a - 3
    jdn = when.day + (153 * m + 2) // 5 + 365 * y + y // 4 - y // 100 + y // 400 - 32045
    jd = jdn - 0.5 + day_frac - tz / 24
    jc = (jd - 2451545) / 36525

    l0 = (280.46646 + jc * (36000.76983 + jc * 0.0003032)) % 360
    m_anom = 357.52911 + jc * (35999.05029 - 0.0001537 * jc)
    ecc = 0.016708634 - jc * (0.000042037 + 0.0000001267 * jc)
    mr = math.radians(m_anom)
    ctr = (math.sin(mr) * (1.914602 - jc * (0.004817 + 0.000014 * jc))
           + math.sin(2 * mr) * (0.019993 - 0.000101 * jc)
           + math.sin(3 * mr) * 0.000289)
    true_long = l0 + ctr
    omega = math.radians(125.04 - 1934.136 * jc)
    app_long = true_long - 0.00569 - 0.00478 * math.sin(omega)
    obliq0 = 23 + (26 + (21.448 - jc * (46.815 + jc * (0.00059 - jc * 0.001813))) / 60) / 60
    obliq = obliq0 + 0.00256 * math.cos(omega)
    decl = math.asin(math.sin(math.radians(obliq)) * math.sin(math.radians(app_long)))

    yy = math.tan(math.radians(obliq / 2)) ** 2
    l0r = math.radians(l0)
    eot = 4 * math.degrees(
        yy * math.sin(2 * l0r) - 2 * ecc * math.sin(mr)
        + 4 * ecc * yy * math.sin(mr) * math.cos(2 * l0r)
        - 0.5 * yy * yy * math.sin(4 * l0r) - 1.25 * ecc * ecc * math.sin(2 * mr))

    tst = (day_frac * 1440 + eot + 4 * lon - 60 * tz) % 1440
    ha = tst / 4 + 180 if tst / 4 < 0 else tst / 4 - 180
    latr = math.radians(lat)
    har = math.radians(ha)
    cos_zen = math.sin(latr) * math.sin(decl) + math.cos(latr) * math.cos(decl) * math.cos(har)
    zen = math.acos(max(-1.0, min(1.0, cos_zen)))
    elev = 90 - math.degrees(zen)
    denom = math.cos(latr) * math.sin(zen)
    if abs(denom) < 1e-12:
        az = 180.0 if lat > math.degrees(decl) else 0.0
    else:
        c = (math.sin(latr) * math.cos(zen) - math.sin(decl)) / denom
        c = max(-1.0, min(1.0, c))
        if ha > 0:
            az = (math.degrees(math.acos(c)) + 180) % 360
        else:
            az = (540 - math.degrees(math.acos(c))) % 360
    return elev, az, math.degrees(decl), eot


def ray_hits_any_triangle(triangles, origin, direction, eps=1e-6):
    """Exhaustive ray test over every triangle via plane hit + same-side edge tests.

    Deliberately not Moller-Trumbore: intersects each triangle's plane, then
    checks the hit point against the three edges.
    """
    tri = np.asarray(triangles, float).reshape(-1, 3, 3)
    o = np.asarray(origin, float)
    d = np.asarray(direction, float)
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    n = np.cross(b - a, c - a)
    denom = n @ d
    ok = np.abs(denom) > 1e-14
    t = np.einsum("ij,ij->i", n, a - o) / np.where(ok, denom, 1.0)
    ok &= t > eps
    p = o + t[:, None] * d
    s1 = np.einsum("ij,ij->i", np.cross(b - a, p - a), n)
    s2 = np.einsum("ij,ij->i", np.cross(c - b, p - b), n)
    s3 = np.einsum("ij,ij->i", np.cross(a - c, p - c), n)
    inside = ((s1 >= 0) & (s2 >= 0) & (s3 >= 0)) | ((s1 <= 0) & (s2 <= 0) & (s3 <= 0))
    return bool(np.any(ok & inside))


def parallel_wall_svf(wall_height, distance, cell_height):
    """2-D (infinitely long) view factor from a vertical strip to the sky above a facing wall."""
    # a wall top below the cell's horizon hides nothing of the sky
    theta = max(0.0, math.atan2(wall_height - cell_height, distance))
    return (1 - math.sin(theta)) / 2


def rank_average(values):
    """Average ranks (1-based) by brute force over all pairs."""
    out = []
    for v in values:
        below = sum(1 for w in values if w < v)
        equal = sum(1 for w in values if w == v)
        out.append(below + (equal + 1) / 2)
    return out


def box_triangles(x0, y0, x1, y1, h):
    """12 triangles of an axis-aligned box standing on z = 0 (winding irrelevant)."""
    c = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
    out = []
    for i in range(4):
        (ax, ay), (bx, by) = c[i], c[(i + 1) % 4]
        out.append([(ax, ay, 0), (bx, by, 0), (bx, by, h)])
        out.append([(ax, ay, 0), (bx, by, h), (ax, ay, h)])
    for z in (0, h):
        out.append([(x0, y0, z), (x1, y0, z), (x1, y1, z)])
        out.append([(x0, y0, z), (x1, y1, z), (x0, y1, z)])
    return out


def sun_unit(elev, az):
    e, a = math.radians(elev), math.radians(az)
    return np.array([math.cos(e) * math.sin(a), math.cos(e) * math.cos(a), math.sin(e)])


def brute_shadow_fraction(triangles, point, normal, lat, lon, tz, day, t0_h, t1_h, step_min=1):
    """Sunlit share of above-horizon samples taken every ``step_min`` minutes.

    Samples sit at the middle of each step; every triangle is tested for
    every sample.  Returns ``(fraction, daylight_samples)``.
    """
    start = datetime(day.year, day.month, day.day) + timedelta(hours=t0_h)
    n = int(round((t1_h - t0_h) * 60 / step_min))
    lit = up = 0
    for k in range(n):
        when = start + timedelta(minutes=step_min * (k + 0.5))
        elev, az, _, _ = noaa_sun(lat, lon, tz, when)
        if elev <= 0:
            continue
        up += 1
        d = sun_unit(elev, az)
        if d @ np.asarray(normal, float) <= 0:
            continue
        if not ray_hits_any_triangle(triangles, point, d):
            lit += 1
    return (lit / up if up else 0.0), up
