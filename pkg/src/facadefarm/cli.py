"""Command-line interface.

    facadefarm build-model --footprints blocks.json --out-scene scene.json
    facadefarm sunpath --date 2020-03-02
    facadefarm shadowmap --facade W --date 2020-03-02 --window 07:00-13:00 --at 10:00
    facadefarm par --facade W --at 2020-03-02T13:00 --sky sunny
    facadefarm dli --epw singapore.epw --period Mar
    facadefarm suitability --epw singapore.epw --period Mar --threshold 9
    facadefarm validate --sensors logs.csv --simulated sim.csv

Exit status: 0 on success, 2 on bad input, 3 when a computation fails.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from collections import defaultdict
from datetime import date, datetime, time, timedelta
from pathlib import Path

import numpy as np

from . import __version__
from .agronomy import DEFAULT_THRESHOLD, suitability_map, summarize
from .citymodel import (build_scene, estimate_height_from_stairsteps, footprints_from_doc,
                        grid_facade, load_scene, save_scene)
from .errors import ComputationError, FacadeFarmError, InputError, ParseError
from .outputs import RunConfig, format_value, load_config, write_grid_csv, write_ppm
from .radiation import (Period, dli_map, instant_sunlit_map, par_map, shadow_map,
                        sky_view_factors)
from .solarpos import sun_path
from .studyarea import study_area_scene
from .validation import (compare, hourly_series_from_log, load_calibration, load_sensor_logs,
                         mae_rmse)
from .weather import load_sky_schedule, parse_sky, read_epw

log = logging.getLogger("facadefarm")

EARTH_RADIUS = 6371008.8


# --------------------------------------------------------------------------- helpers

def project_lonlat(buildings: list, origin=None) -> tuple:
    """Equirectangular projection of lon/lat vertices to local metres about their centroid."""
    pts = np.array([v for b in buildings for v in b["vertices"]], float)
    lon0, lat0 = (pts.mean(axis=0) if origin is None else origin)
    k = math.radians(1.0) * EARTH_RADIUS
    out = []
    for b in buildings:
        v = np.asarray(b["vertices"], float)
        xy = np.column_stack([(v[:, 0] - lon0) * k * math.cos(math.radians(lat0)),
                              (v[:, 1] - lat0) * k])
        out.append({**b, "vertices": xy.tolist()})
    return out, (float(lon0), float(lat0))


def load_stairsteps(path) -> dict:
    """CSV ``name, step_height, count[;count...]`` -> {name: height}."""
    heights = {}
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].strip().lower() in ("name", "") or row[0].startswith("#"):
                continue
            if len(row) < 3:
                raise ParseError("expected name,step_height,counts", lineno, path)
            try:
                step = float(row[1])
                counts = [int(c) for c in row[2].replace(";", " ").split()]
            except ValueError:
                raise ParseError("step height and counts must be numbers", lineno, path) from None
            name = row[0].strip()
            try:
                heights[name] = estimate_height_from_stairsteps(counts, step)
            except InputError as exc:
                raise InputError(f"{name}: {exc}") from exc
    return heights


def _parse_clock(text: str) -> time:
    try:
        return time.fromisoformat(text.strip())
    except ValueError:
        raise InputError(f"bad clock time {text!r} (expected HH:MM)") from None


def _parse_window(text: str) -> tuple:
    a, sep, b = text.partition("-")
    if not sep:
        raise InputError(f"bad window {text!r} (expected HH:MM-HH:MM)")
    t0, t1 = _parse_clock(a), _parse_clock(b)
    if (t1.hour, t1.minute) == (0, 0):
        t1 = 24.0
    elif t1 <= t0:
        raise InputError(f"window {text!r} ends before it starts")
    return t0, t1


def _parse_date(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise InputError(f"bad date {text!r} (expected YYYY-MM-DD)") from None


def _parse_instant(text: str) -> datetime:
    try:
        return datetime.fromisoformat(text)
    except ValueError:
        raise InputError(f"bad timestamp {text!r} (expected YYYY-MM-DDTHH:MM)") from None


def _stamp(t) -> str:
    if isinstance(t, (int, float)):
        return f"{int(t):02d}{int(round((t % 1) * 60)):02d}"
    return t.strftime("%H%M")


class Runner:
    """Resolved configuration plus lazily loaded scene and weather."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = Path(cfg.out)
        self._scene = None
        self._epw = None

    @property
    def scene(self):
        if self._scene is None:
            if self.cfg.scene is None:
                self._scene = study_area_scene()
            else:
                self.cfg.check_files("scene")
                self._scene = load_scene(self.cfg.scene)
        return self._scene

    @property
    def epw(self):
        if self._epw is None:
            self.cfg.check_files("epw")
            self._epw = read_epw(self.cfg.epw)
        return self._epw

    def facades(self, refs):
        refs = refs or sorted(self.scene.facade_labels)
        if not refs:
            raise InputError("scene has no labelled facades; pass --facade building:edge")
        return [self.scene.facade(r) for r in refs]

    def grid(self, facade):
        return grid_facade(facade, self.cfg.rows, self.cfg.cols)

    def header(self, **extra) -> str:
        return self.cfg.header(extra)


def _safe(label: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in label)


def _write_table(path: Path, header: str, columns: list, rows: list) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        w.writerows(rows)
    return path


# --------------------------------------------------------------------------- commands

def cmd_build_model(args, run: Runner) -> int:
    doc = _read_json(args.footprints)
    if args.geographic:
        items = doc.get("buildings", []) if isinstance(doc, dict) else doc
        projected, origin = project_lonlat(items)
        doc = {**doc, "buildings": projected} if isinstance(doc, dict) else projected
        print(f"projected about lon {origin[0]:.6f}, lat {origin[1]:.6f}")
    fps = footprints_from_doc(doc)
    heights = load_stairsteps(args.stairsteps) if args.stairsteps else {}
    unknown = set(heights) - {f.name for f in fps}
    if unknown:
        raise InputError(f"stairstep rows for unknown building(s): {', '.join(sorted(unknown))}")
    labels = doc.get("facades", {}) if isinstance(doc, dict) else {}
    albedo = doc.get("ground_albedo", run.cfg.albedo) if isinstance(doc, dict) else run.cfg.albedo
    scene = build_scene(fps, albedo, {k: (v[0], int(v[1])) for k, v in labels.items()}, heights)
    out = Path(args.out_scene) if args.out_scene else run.out / "scene.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    save_scene(scene, out)
    print(f"{'building':<20} {'levels':>6} {'height_m':>9} source")
    for b in scene.buildings:
        src = "stairsteps" if b.name in heights else ("explicit" if b.source.height is not None else "levels")
        lv = "-" if b.source.levels is None else str(b.source.levels)
        print(f"{b.name:<20} {lv:>6} {b.height:>9.2f} {src}")
    print(f"wrote {out}")
    return 0


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc


def cmd_sunpath(args, run: Runner) -> int:
    day = _parse_date(args.date)
    path = sun_path(run.cfg.site, day, args.step)
    rows = [(p.time.strftime("%Y-%m-%dT%H:%M"), format_value(p.sun.azimuth, 4),
             format_value(p.sun.elevation, 4)) for p in path]
    header = run.header(command="sunpath", date=args.date, step=args.step)
    if args.stdout:
        print(header)
        print("time,azimuth_deg,elevation_deg")
        for r in rows:
            print(",".join(r))
        return 0
    out = _write_table(run.out / f"sunpath_{day:%Y%m%d}.csv", header,
                       ["time", "azimuth_deg", "elevation_deg"], rows)
    print(f"wrote {out}")
    return 0


def cmd_shadowmap(args, run: Runner) -> int:
    day = _parse_date(args.date)
    windows = [_parse_window(w) for w in args.window or []]
    instants = [_parse_clock(t) for t in args.at or []]
    if not windows and not instants:
        windows = [(time(7), time(19))]
    for facade in run.facades(args.facade):
        grid = run.grid(facade)
        tag = _safe(facade.label)
        for w in windows:
            sm = shadow_map(run.scene, grid, day, w, args.step, run.cfg.site)
            name = f"shadow_{tag}_{day:%Y%m%d}_{_stamp(w[0])}-{_stamp(w[1])}"
            header = run.header(command="shadowmap", facade=facade.label, date=args.date,
                                window=[_stamp(w[0]), _stamp(w[1])], step=args.step)
            pct = sm.values * 100.0
            write_grid_csv(run.out / f"{name}.csv", pct, header, "sunlit_percent", 2)
            if args.ppm:
                write_ppm(run.out / f"{name}.ppm", pct, 0.0, 100.0)
            flag = " (no daylight)" if sm.daylight_samples == 0 else ""
            print(f"{facade.label} {_stamp(w[0])}-{_stamp(w[1])}: mean sunlit "
                  f"{pct.mean():.1f}% over {sm.daylight_samples} samples{flag}")
        for t in instants:
            when = datetime.combine(day, t)
            lit = instant_sunlit_map(run.scene, grid, when, run.cfg.site) * 100.0
            name = f"shadow_{tag}_{day:%Y%m%d}_{_stamp(t)}"
            header = run.header(command="shadowmap", facade=facade.label, date=args.date,
                                at=_stamp(t))
            write_grid_csv(run.out / f"{name}.csv", lit, header, "sunlit_percent", 2)
            if args.ppm:
                write_ppm(run.out / f"{name}.ppm", lit, 0.0, 100.0)
            print(f"{facade.label} {_stamp(t)}: {int((lit > 0).sum())} of {lit.size} cells sunlit")
    return 0


def _sky_for(args, run: Runner, when: datetime):
    if args.sky:
        return parse_sky(args.sky)
    if run.cfg.sky_schedule:
        run.cfg.check_files("sky_schedule")
        return load_sky_schedule(run.cfg.sky_schedule).at(when)
    raise InputError("give --sky or a sky schedule")


def cmd_par(args, run: Runner) -> int:
    when = _parse_instant(args.at)
    sky = _sky_for(args, run, when)
    for facade in run.facades(args.facade):
        grid = run.grid(facade)
        pm = par_map(run.scene, grid, when, sky, run.cfg.albedo, run.cfg.site,
                     samples=run.cfg.samples, seed=run.cfg.seed, workers=run.cfg.workers)
        name = f"par_{_safe(facade.label)}_{when:%Y%m%d%H%M}"
        header = run.header(command="par", facade=facade.label, at=args.at, sky=sky.value)
        write_grid_csv(run.out / f"{name}.csv", pm.values, header, "par_umol_m2_s", 3)
        if args.ppm:
            write_ppm(run.out / f"{name}.ppm", pm.values)
        print(f"{facade.label} {when:%Y-%m-%d %H:%M} {sky.value}: PAR "
              f"{pm.values.min():.0f}-{pm.values.max():.0f}")
    return 0


def _dli_maps(args, run: Runner):
    period = Period.parse(args.period)
    epw = run.epw
    maps = []
    for facade in run.facades(args.facade):
        grid = run.grid(facade)
        dm = dli_map(run.scene, grid, epw, period, site=None, albedo=run.cfg.albedo,
                     samples=run.cfg.samples, seed=run.cfg.seed, workers=run.cfg.workers)
        if not np.all(np.isfinite(dm.values)):
            raise ComputationError(f"non-finite DLI on facade {facade.label}")
        maps.append((facade, dm))
    return period, maps


def cmd_dli(args, run: Runner) -> int:
    period, maps = _dli_maps(args, run)
    threshold = args.threshold
    summary = []
    for facade, dm in maps:
        header = run.header(command="dli", facade=facade.label, period=period.label)
        name = f"dli_{_safe(facade.label)}_{period.label}"
        write_grid_csv(run.out / f"{name}.csv", dm.values, header, "dli_mol_m2_day", 4)
        if args.ppm:
            write_ppm(run.out / f"{name}.ppm", dm.values)
        s = summarize(facade.label, dm, threshold)
        summary.append((s.facade, s.period, s.minimum, s.maximum, s.levels))
    header = run.header(command="dli-summary", period=period.label, threshold=threshold)
    out = _write_table(run.out / f"dli_summary_{period.label}.csv", header,
                       ["facade", "period", "min_dli", "max_dli", f"levels_above_{threshold:g}"],
                       summary)
    print(f"{'facade':<8}{'period':<8}{'min-max DLI':<14}levels > {threshold:g}")
    for f, p, lo, hi, lv in summary:
        print(f"{f:<8}{p:<8}{f'{lo}-{hi}':<14}{lv}")
    print(f"wrote {out}")
    return 0


def cmd_suitability(args, run: Runner) -> int:
    period, maps = _dli_maps(args, run)
    report = []
    for facade, dm in maps:
        sm = suitability_map(dm, args.threshold)
        header = run.header(command="suitability", facade=facade.label, period=period.label,
                            threshold=args.threshold)
        name = f"suitable_{_safe(facade.label)}_{period.label}"
        write_grid_csv(run.out / f"{name}.csv", sm.mask.astype(int), header, "suitable", 0)
        crops = sorted({c for names in sm.crops.values() for c in names})
        report.append((facade.label, period.label, int(sm.mask.sum()), sm.levels_summary(),
                       ";".join(crops)))
    header = run.header(command="suitability-report", period=period.label,
                        threshold=args.threshold)
    out = _write_table(run.out / f"suitability_{period.label}.csv", header,
                       ["facade", "period", "cells", "levels_exceeding", "crops"], report)
    for f, p, n, lv, crops in report:
        print(f"{f} {p}: {n} cells above {args.threshold:g}; levels {lv}; crops {crops or '-'}")
    print(f"wrote {out}")
    return 0


def load_simulated(path) -> dict:
    """CSV ``location, timestamp, par`` -> {(location, hour start): par}."""
    out = {}
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or row[0].strip().lower() in ("location", "") or row[0].startswith("#"):
                continue
            if len(row) < 3:
                raise ParseError("expected location,timestamp,par", lineno, path)
            try:
                t = datetime.fromisoformat(row[1].strip())
                v = float(row[2])
            except ValueError:
                raise ParseError("bad timestamp or par value", lineno, path) from None
            out[(row[0].strip(), t.replace(minute=0, second=0, microsecond=0))] = v
    return out


def _simulate_hours(run: Runner, args, logs) -> dict:
    """Instantaneous PAR at each hour's mid-point for every located sensor."""
    out = {}
    svf_cache = {}
    for lg in logs.values():
        loc = lg.location
        hours = hourly_series_from_log(lg, args.start_hour, args.end_hour)
        facade = run.scene.facade(loc.facade)
        grid = run.grid(facade)
        if loc.facade not in svf_cache:
            svf_cache[loc.facade] = sky_view_factors(run.scene, grid, run.cfg.samples,
                                                     run.cfg.seed, run.cfg.workers)
        for t0 in hours:
            mid = t0 + timedelta(minutes=30)
            pm = par_map(run.scene, grid, mid, _sky_for(args, run, mid), run.cfg.albedo,
                         run.cfg.site, svf=svf_cache[loc.facade])
            out[(loc.key, t0)] = float(pm.values[loc.row - 1, loc.col - 1])
    return out


def cmd_validate(args, run: Runner) -> int:
    calib = load_calibration(args.calibration) if args.calibrate else None
    logs = load_sensor_logs(args.sensors, calib)
    missing_loc = [s for s, lg in logs.items() if lg.location is None]
    if missing_loc:
        raise InputError(f"sensor(s) without location columns: {', '.join(sorted(missing_loc))}")
    sim = load_simulated(args.simulated) if args.simulated else _simulate_hours(run, args, logs)
    pairs = defaultdict(list)
    for lg in logs.values():
        for t0, measured in sorted(hourly_series_from_log(lg, args.start_hour, args.end_hour).items()):
            key = (lg.location.key, t0)
            if key in sim:
                pairs[lg.location.key].append((sim[key], measured))
    if not pairs:
        raise InputError("no (location, hour) pairs shared by sensors and simulation")
    rows = []
    everything = []
    for loc in sorted(pairs):
        s, m = zip(*pairs[loc])
        everything += pairs[loc]
        rows.append(_metric_row(loc, s, m))
    s, m = zip(*everything)
    rows.append(_metric_row("all", s, m))
    header = run.header(command="validate", sensors=Path(args.sensors).name,
                        calibrate=bool(args.calibrate))
    out = _write_table(run.out / "validation.csv", header, ["location", "n", "rho", "mae", "rmse"], rows)
    for r in rows:
        print(f"{r[0]:<10} n={r[1]:<4} rho={r[2]:<8} MAE={r[3]:<9} RMSE={r[4]}")
    print(f"wrote {out}")
    return 0


def _metric_row(loc, sim, meas):
    if len(sim) < 3:
        return (loc, len(sim), "", "", "")
    try:
        m = compare(sim, meas)
        rho = format_value(m.rho, 4)
    except FacadeFarmError:
        mae, rmse = mae_rmse(sim, meas)
        return (loc, len(sim), "undefined", format_value(mae, 3), format_value(rmse, 3))
    return (loc, m.n, rho, format_value(m.mae, 3), format_value(m.rmse, 3))


# --------------------------------------------------------------------------- parser

def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("run configuration (flags override --config)")
    g.add_argument("--config", help="key = value configuration file")
    g.add_argument("--scene", help="scene or footprint JSON (default: bundled study area)")
    g.add_argument("--epw", help="EnergyPlus weather file")
    g.add_argument("--lat", dest="latitude", type=float)
    g.add_argument("--lon", dest="longitude", type=float)
    g.add_argument("--utc-offset", dest="utc_offset", type=float)
    g.add_argument("--albedo", type=float)
    g.add_argument("--sky-schedule", dest="sky_schedule")
    g.add_argument("--rows", type=int)
    g.add_argument("--cols", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--samples", type=int, help="sky-view rays per cell")
    g.add_argument("--workers", type=int)
    g.add_argument("--out", help="output directory")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    p = argparse.ArgumentParser(prog="facadefarm", description="Facade light simulation for vertical farming.")
    p.add_argument("--version", action="version", version=f"facadefarm {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("build-model", parents=[common], help="extrude footprints into a scene file")
    s.add_argument("--footprints", required=True)
    s.add_argument("--stairsteps", help="CSV name,step_height,counts overriding levels")
    s.add_argument("--geographic", action="store_true", help="vertices are lon/lat degrees")
    s.add_argument("--out-scene", help="scene file to write (default OUT/scene.json)")
    s.set_defaults(func=cmd_build_model)

    s = sub.add_parser("sunpath", parents=[common], help="sun azimuth/elevation through a day")
    s.add_argument("--date", required=True)
    s.add_argument("--step", type=int, default=60, help="minutes")
    s.add_argument("--stdout", action="store_true")
    s.set_defaults(func=cmd_sunpath)

    s = sub.add_parser("shadowmap", parents=[common], help="sunlit-time percentage maps")
    s.add_argument("--facade", action="append")
    s.add_argument("--date", required=True)
    s.add_argument("--window", action="append", help="HH:MM-HH:MM (repeatable)")
    s.add_argument("--at", action="append", help="HH:MM instant (repeatable)")
    s.add_argument("--step", type=float, default=10, help="minutes")
    s.add_argument("--ppm", action="store_true")
    s.set_defaults(func=cmd_shadowmap)

    s = sub.add_parser("par", parents=[common], help="instantaneous PAR map")
    s.add_argument("--facade", action="append")
    s.add_argument("--at", required=True, help="YYYY-MM-DDTHH:MM local time")
    s.add_argument("--sky", help="sunny, partly cloudy, cloudy or a forecast category")
    s.add_argument("--ppm", action="store_true")
    s.set_defaults(func=cmd_par)

    for name, func, helptext in (("dli", cmd_dli, "average DLI maps from an EPW"),
                                 ("suitability", cmd_suitability, "cells suitable for a DLI threshold")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("--facade", action="append")
        s.add_argument("--period", default="year", help="month name/number or 'year'")
        s.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD)
        if name == "dli":
            s.add_argument("--ppm", action="store_true")
        s.set_defaults(func=func)

    s = sub.add_parser("validate", parents=[common], help="compare sensor logs with simulation")
    s.add_argument("--sensors", required=True, help="CSV sensor_id,timestamp,par,facade,row,col[,label]")
    s.add_argument("--simulated", help="CSV location,timestamp,par (else simulated from the scene)")
    s.add_argument("--sky", help="skytype for simulated hours when no schedule is given")
    s.add_argument("--calibrate", action="store_true", help="sensor PAR is raw; apply calibration")
    s.add_argument("--calibration", help="calibration CSV (default: bundled table)")
    s.add_argument("--start-hour", type=int, default=7)
    s.add_argument("--end-hour", type=int, default=19)
    s.set_defaults(func=cmd_validate)
    return p


_CONFIG_KEYS = ("scene", "epw", "latitude", "longitude", "utc_offset", "albedo", "sky_schedule",
                "rows", "cols", "seed", "samples", "workers", "out")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = load_config(args.config, {k: getattr(args, k) for k in _CONFIG_KEYS})
        return args.func(args, Runner(cfg))
    except ComputationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FacadeFarmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
