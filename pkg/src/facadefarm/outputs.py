"""Run configuration and on-disk artifacts (grid CSVs and PPM heatmaps)."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .errors import InputError, ParseError
from .solarpos import SINGAPORE, SitePosition


@dataclass(frozen=True)
class RunConfig:
    scene: Optional[str] = None
    epw: Optional[str] = None
    latitude: float = SINGAPORE.latitude
    longitude: float = SINGAPORE.longitude
    utc_offset: float = SINGAPORE.utc_offset
    albedo: float = 0.0
    sky_schedule: Optional[str] = None
    rows: int = 16
    cols: int = 16
    seed: int = 0
    samples: int = 1024
    workers: int = 1
    out: str = "."

    @property
    def site(self) -> SitePosition:
        return SitePosition(self.latitude, self.longitude, self.utc_offset)

    def check_files(self, *names: str) -> None:
        for name in names:
            value = getattr(self, name)
            if value is None:
                raise InputError(f"no {name.replace('_', ' ')} given")
            if not Path(value).is_file():
                raise InputError(f"{name.replace('_', ' ')} file not found: {value}")

    def digest(self, extra: Optional[dict] = None) -> str:
        """sha256 over the canonical config (output directory excluded) plus ``extra``."""
        doc = {k: v for k, v in asdict(self).items() if k not in ("out", "workers")}
        doc["extra"] = extra or {}
        blob = json.dumps(doc, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()

    def header(self, extra: Optional[dict] = None) -> str:
        return f"# facadefarm {__version__} seed={self.seed} config={self.digest(extra)}"


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, text: str):
    kind = _FIELD_TYPES[key]
    if "int" in kind:
        return int(text)
    if "float" in kind:
        return float(text)
    return text


def parse_config(text: str, source: str = "<config>") -> dict:
    """``key = value`` lines; ``#`` starts a comment.  Keys use the RunConfig names."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(f"expected key = value, got {raw.strip()!r}", lineno, source)
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELD_TYPES:
            raise ParseError(f"unknown config key {key!r}", lineno, source)
        try:
            out[key] = _coerce(key, value)
        except ValueError:
            raise ParseError(f"bad value for {key}: {value!r}", lineno, source) from None
    return out


def load_config(path=None, overrides: Optional[dict] = None) -> RunConfig:
    """Config file values, then non-None ``overrides`` on top."""
    cfg = RunConfig()
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise InputError(f"config file not found: {path}")
        cfg = replace(cfg, **parse_config(p.read_text(), str(p)))
    if overrides:
        cfg = replace(cfg, **{k: v for k, v in overrides.items() if v is not None})
    cfg.site  # validates coordinates
    return cfg


def format_value(v: float, digits: int = 6) -> str:
    s = f"{float(v):.{digits}f}"
    return "0." + "0" * digits if s.startswith("-") and float(s) == 0 else s


def write_grid_csv(path, values, header: str, value_name: str = "value", digits: int = 6) -> Path:
    """One ``row,col,value`` line per cell, row 1 (bottom) first."""
    vals = np.asarray(values, float)
    lines = [header, f"row,col,{value_name}"]
    for r in range(vals.shape[0]):
        for c in range(vals.shape[1]):
            lines.append(f"{r + 1},{c + 1},{format_value(vals[r, c], digits)}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_grid_csv(path) -> np.ndarray:
    rows = []
    for line in Path(path).read_text().splitlines():
        if not line or line.startswith("#") or line.startswith("row,"):
            continue
        r, c, v = line.split(",")
        rows.append((int(r), int(c), float(v)))
    n_r = max(r for r, _, _ in rows)
    n_c = max(c for _, c, _ in rows)
    out = np.zeros((n_r, n_c))
    for r, c, v in rows:
        out[r - 1, c - 1] = v
    return out


def ramp_colors(values, lo: Optional[float] = None, hi: Optional[float] = None) -> np.ndarray:
    """Linear blue-to-red ramp; returns uint8 (..., 3)."""
    v = np.asarray(values, float)
    lo = float(v.min()) if lo is None else lo
    hi = float(v.max()) if hi is None else hi
    t = np.zeros_like(v) if hi <= lo else np.clip((v - lo) / (hi - lo), 0.0, 1.0)
    rgb = np.stack([t, np.zeros_like(t), 1.0 - t], axis=-1)
    return np.rint(rgb * 255).astype(np.uint8)


def write_ppm(path, values, lo: Optional[float] = None, hi: Optional[float] = None) -> Path:
    """Plain (P3) PPM, one pixel per cell, image top = highest row."""
    rgb = ramp_colors(values, lo, hi)[::-1]
    h, w = rgb.shape[:2]
    lines = ["P3", f"{w} {h}", "255"]
    lines += [" ".join(f"{p[0]} {p[1]} {p[2]}" for p in row) for row in rgb]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path
