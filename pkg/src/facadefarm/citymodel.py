"""LOD1 scene construction: heights, footprint extrusion, facades and facade grids.

Coordinates are local planar metres with x = East, y = North, z = Up.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import shapely
from shapely.geometry import LinearRing, Polygon

from .errors import GeometryError, InputError

LEVEL1_HEIGHT = 3.6
FLOOR_HEIGHT = 2.8
CELL_OFFSET = 0.01


def estimate_height_from_levels(levels: int, level1_h: float = LEVEL1_HEIGHT,
                                floor_h: float = FLOOR_HEIGHT) -> float:
    """Building height from storey count: first level plus typical floors."""
    if isinstance(levels, bool) or int(levels) != levels or levels < 1:
        raise InputError(f"levels must be a positive integer, got {levels!r}")
    return level1_h + (int(levels) - 1) * floor_h


def estimate_height_from_stairsteps(step_counts: Sequence[int], step_height: float) -> float:
    """Building height from per-flight stair step counts.

    Each entry of ``step_counts`` is the number of steps between two
    consecutive levels, so ``step_height * count`` is that floor-to-floor
    height and the building height is their sum.
    """
    counts = list(step_counts)
    if not counts:
        raise InputError("step_counts is empty")
    if any(c <= 0 for c in counts):
        raise InputError("every step count must be positive")
    if step_height <= 0:
        raise InputError("step_height must be positive")
    return step_height * sum(counts)


def floor_heights_from_stairsteps(step_counts: Sequence[int], step_height: float) -> list[float]:
    estimate_height_from_stairsteps(step_counts, step_height)
    return [step_height * c for c in step_counts]


def _signed_area(pts: np.ndarray) -> float:
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass(frozen=True)
class Footprint:
    vertices: np.ndarray
    levels: Optional[int] = None
    name: str = ""
    height: Optional[float] = None

    def __post_init__(self):
        pts = np.asarray(self.vertices, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise GeometryError(f"{self.name}: vertices must be a list of [x, y] pairs")
        if len(pts) > 1 and np.allclose(pts[0], pts[-1]):
            pts = pts[:-1]
        if len(pts) < 3:
            raise GeometryError(f"{self.name}: footprint needs at least 3 vertices")
        if not LinearRing(pts).is_simple:
            raise GeometryError(f"{self.name}: footprint polygon self-intersects")
        area = _signed_area(pts)
        if abs(area) < 1e-12:
            raise GeometryError(f"{self.name}: footprint has zero area")
        if area < 0:
            pts = pts[::-1].copy()
        pts.setflags(write=False)
        object.__setattr__(self, "vertices", pts)

    @property
    def n(self) -> int:
        return len(self.vertices)

    def centroid(self) -> np.ndarray:
        c = Polygon(self.vertices).centroid
        return np.array([c.x, c.y])

    def resolved_height(self) -> float:
        if self.height is not None:
            return float(self.height)
        if self.levels is None:
            raise InputError(f"{self.name}: building has neither levels nor height")
        return estimate_height_from_levels(self.levels)


@dataclass(frozen=True)
class BuildingPrism:
    triangles: np.ndarray          # (m, 3, 3)
    aabb: tuple                    # (lo[3], hi[3])
    height: float
    source: Footprint

    @property
    def name(self) -> str:
        return self.source.name

    def normals(self) -> np.ndarray:
        t = self.triangles
        n = np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0])
        return n / np.linalg.norm(n, axis=1, keepdims=True)


def _triangulate_cap(pts: np.ndarray) -> list[tuple[int, int, int]]:
    """Constrained triangulation of a simple polygon, returned as CCW index triples."""
    index = {(float(x), float(y)): i for i, (x, y) in enumerate(pts)}
    tris = []
    for g in shapely.constrained_delaunay_triangles(Polygon(pts)).geoms:
        coords = list(g.exterior.coords)[:3]
        try:
            idx = [index[(float(x), float(y))] for x, y in coords]
        except KeyError as exc:
            raise GeometryError("cap triangulation introduced a new vertex") from exc
        a, b, c = (pts[i] for i in idx)
        cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        if abs(cross) < 1e-12:
            continue
        if cross < 0:
            idx = [idx[0], idx[2], idx[1]]
        tris.append(tuple(idx))
    return tris


def extrude(footprint: Footprint, height: Optional[float] = None) -> BuildingPrism:
    """Extrude a footprint into a closed prism with outward-facing triangles."""
    h = footprint.resolved_height() if height is None else float(height)
    if not h > 0:
        raise GeometryError(f"{footprint.name}: height must be positive, got {h}")
    pts = footprint.vertices
    n = len(pts)
    bottom = np.column_stack([pts, np.zeros(n)])
    top = np.column_stack([pts, np.full(n, h)])

    tris = []
    for i in range(n):
        j = (i + 1) % n
        tris.append((bottom[i], bottom[j], top[j]))
        tris.append((bottom[i], top[j], top[i]))
    for a, b, c in _triangulate_cap(pts):
        tris.append((top[a], top[b], top[c]))
        tris.append((bottom[a], bottom[c], bottom[b]))

    arr = np.array(tris, dtype=float)
    arr.setflags(write=False)
    lo = arr.reshape(-1, 3).min(axis=0)
    hi = arr.reshape(-1, 3).max(axis=0)
    return BuildingPrism(triangles=arr, aabb=(lo, hi), height=h, source=footprint)


def compass_azimuth(vx: float, vy: float) -> float:
    """Degrees clockwise from North of a horizontal vector, in [0, 360)."""
    az = math.degrees(math.atan2(vx, vy)) % 360.0
    return 0.0 if az >= 360.0 else az


@dataclass(frozen=True)
class Facade:
    origin: np.ndarray
    u: np.ndarray
    v: np.ndarray
    width: float
    height: float
    normal: np.ndarray
    azimuth: float
    label: str = ""

    def point(self, x: float, z: float, offset: float = 0.0) -> np.ndarray:
        """World position of facade-local (x from left, z from bottom)."""
        return self.origin + x * self.u + z * self.v + offset * self.normal


def extract_facade(prism: BuildingPrism, edge_index: int, label: str = "") -> Facade:
    """Planar facade on the wall standing on footprint edge ``edge_index``."""
    pts = prism.source.vertices
    n = len(pts)
    if not 0 <= edge_index < n:
        raise InputError(f"edge index {edge_index} out of range for {n}-edge footprint")
    a, b = pts[edge_index], pts[(edge_index + 1) % n]
    d = b - a
    width = float(np.hypot(*d))
    u = np.array([d[0] / width, d[1] / width, 0.0])
    v = np.array([0.0, 0.0, 1.0])
    normal = np.cross(u, v)
    return Facade(origin=np.array([a[0], a[1], 0.0]), u=u, v=v, width=width,
                  height=prism.height, normal=normal,
                  azimuth=compass_azimuth(normal[0], normal[1]),
                  label=label or f"{prism.name}:{edge_index}")


@dataclass(frozen=True)
class GridCell:
    row: int
    col: int
    centroid: np.ndarray
    normal: np.ndarray
    area: float


@dataclass(frozen=True)
class FacadeGrid:
    facade: Facade
    rows: int
    cols: int
    cells: tuple

    def cell(self, row: int, col: int) -> GridCell:
        return self.cells[(row - 1) * self.cols + (col - 1)]

    @cached_property
    def centroids(self) -> np.ndarray:
        return np.array([c.centroid for c in self.cells])

    @cached_property
    def normals(self) -> np.ndarray:
        return np.array([c.normal for c in self.cells])


def grid_facade(facade: Facade, rows: int = 16, cols: int = 16,
                offset: float = CELL_OFFSET) -> FacadeGrid:
    """Split a facade into a rows x cols lattice; row 1 is the bottom, col 1 the left (outside view)."""
    if rows < 1 or cols < 1:
        raise InputError("rows and cols must be >= 1")
    cw = facade.width / cols
    ch = facade.height / rows
    cells = []
    for r in range(1, rows + 1):
        for c in range(1, cols + 1):
            centroid = facade.point((c - 0.5) * cw, (r - 0.5) * ch, offset)
            cells.append(GridCell(r, c, centroid, facade.normal, cw * ch))
    return FacadeGrid(facade, rows, cols, tuple(cells))


def map_sensor_to_cell(facade: Facade, x_from_left: float, z_height: float,
                       rows: int = 16, cols: int = 16) -> tuple[int, int]:
    """Grid cell (row, col) containing a sensor measured on site."""
    tol = 1e-9 * max(facade.width, facade.height, 1.0)
    if not (-tol <= x_from_left <= facade.width + tol and -tol <= z_height <= facade.height + tol):
        raise InputError(
            f"sensor position ({x_from_left}, {z_height}) is outside the "
            f"{facade.width:.3f} x {facade.height:.3f} m facade")
    row = min(max(math.ceil(z_height / facade.height * rows), 1), rows)
    col = min(max(math.ceil(x_from_left / facade.width * cols), 1), cols)
    return row, col


@dataclass(frozen=True)
class CityScene:
    buildings: tuple
    ground_albedo: Optional[float] = 0.0
    facade_labels: dict = field(default_factory=dict)   # label -> (building name, edge index)

    def __post_init__(self):
        object.__setattr__(self, "buildings", tuple(self.buildings))
        if self.ground_albedo is not None and not 0.0 <= self.ground_albedo <= 1.0:
            raise InputError("ground albedo must lie in [0, 1]")
        for b in self.buildings:
            if b.aabb[0][2] < 0:
                raise GeometryError(f"{b.name}: geometry below z = 0")

    @property
    def has_ground(self) -> bool:
        return self.ground_albedo is not None

    @property
    def albedo(self) -> float:
        return self.ground_albedo or 0.0

    def building(self, name: str) -> BuildingPrism:
        for b in self.buildings:
            if b.name == name:
                return b
        raise InputError(f"no building named {name!r}")

    def facade(self, ref: str) -> Facade:
        """Resolve a facade by label (``"W"``) or by ``"<building>:<edge>"``."""
        if ref in self.facade_labels:
            name, edge = self.facade_labels[ref]
            return extract_facade(self.building(name), int(edge), label=ref)
        name, sep, edge = ref.rpartition(":")
        if not sep or not edge.lstrip("-").isdigit():
            raise InputError(f"unknown facade {ref!r}")
        return extract_facade(self.building(name), int(edge), label=ref)

    @cached_property
    def index(self):
        from .raycast import SceneIndex
        return SceneIndex.from_scene(self)


def build_scene(footprints: Sequence[Footprint], ground_albedo: Optional[float] = 0.0,
                facade_labels: Optional[dict] = None,
                heights: Optional[dict] = None) -> CityScene:
    heights = heights or {}
    prisms = []
    for fp in footprints:
        try:
            prisms.append(extrude(fp, heights.get(fp.name)))
        except InputError as exc:
            if fp.name and fp.name not in str(exc):
                raise type(exc)(f"{fp.name}: {exc}") from exc
            raise
    return CityScene(tuple(prisms), ground_albedo, dict(facade_labels or {}))


def load_footprints(path) -> list[Footprint]:
    """Read the footprint JSON: a list of ``{name, levels, vertices[, height]}``."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc
    return footprints_from_doc(doc)


def footprints_from_doc(doc) -> list[Footprint]:
    if isinstance(doc, dict):
        doc = doc.get("buildings", [])
    out = []
    for i, item in enumerate(doc):
        name = str(item.get("name", f"building-{i}"))
        if "vertices" not in item:
            raise InputError(f"{name}: missing vertices")
        levels = item.get("levels")
        height = item.get("height")
        out.append(Footprint(np.asarray(item["vertices"], float),
                             None if levels is None else int(levels), name,
                             None if height is None else float(height)))
    return out


def scene_to_dict(scene: CityScene) -> dict:
    return {
        "ground_albedo": scene.ground_albedo,
        "facades": {k: list(v) for k, v in scene.facade_labels.items()},
        "buildings": [
            {
                "name": b.name,
                "levels": b.source.levels,
                "height": b.height,
                "vertices": b.source.vertices.tolist(),
                "triangles": b.triangles.tolist(),
            }
            for b in scene.buildings
        ],
    }


def scene_from_dict(doc: dict) -> CityScene:
    fps = [Footprint(np.asarray(b["vertices"], float), b.get("levels"), b["name"],
                     float(b["height"]))
           for b in doc["buildings"]]
    labels = {k: (v[0], int(v[1])) for k, v in doc.get("facades", {}).items()}
    return build_scene(fps, doc.get("ground_albedo", 0.0), labels)


def save_scene(scene: CityScene, path) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(scene), indent=1))


def load_scene(path) -> CityScene:
    """Load a saved scene, or build one on the fly from a footprint file."""
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid scene JSON ({exc})") from exc
    if isinstance(doc, dict) and doc.get("buildings") and all(
            "triangles" in b for b in doc["buildings"]):
        return scene_from_dict(doc)
    labels = doc.get("facades", {}) if isinstance(doc, dict) else {}
    albedo = doc.get("ground_albedo", 0.0) if isinstance(doc, dict) else 0.0
    return build_scene(load_footprints(path), albedo,
                       {k: (v[0], int(v[1])) for k, v in labels.items()})
