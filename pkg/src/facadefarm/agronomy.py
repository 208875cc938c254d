"""Crop light categories and per-cell farming suitability."""
from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyDatabaseError, InputError, ParseError
from .radiation import DliMap

DEFAULT_THRESHOLD = 9.0


class LightCategory(enum.IntEnum):
    VERY_LOW = 0     # < 5
    LOW = 1          # [5, 10)
    MODERATE = 2     # [10, 20)
    HIGH = 3         # >= 20

    @classmethod
    def parse(cls, text: str) -> "LightCategory":
        key = str(text).strip().upper().replace(" ", "_").replace("-", "_")
        key = {"VERYLOW": "VERY_LOW"}.get(key, key)
        try:
            return cls[key]
        except KeyError:
            raise InputError(f"unknown light category {text!r}") from None


CATEGORY_CUTS = (5.0, 10.0, 20.0)


def light_category(dli: float) -> LightCategory:
    if dli < 0:
        raise InputError("DLI must be non-negative")
    return LightCategory(int(np.searchsorted(CATEGORY_CUTS, dli, side="right")))


@dataclass(frozen=True)
class CropSpec:
    name: str
    species: str
    min_dli: float
    max_dli: float
    category: LightCategory
    note: str = ""

    def __post_init__(self):
        if not 0 <= self.min_dli < self.max_dli:
            raise InputError(f"{self.name}: need 0 <= min_dli < max_dli")


def load_crops(path=None) -> list[CropSpec]:
    """Read a crop CSV (name, species, min_dli, max_dli, category[, note])."""
    if path is None:
        src = resources.files("facadefarm") / "data" / "crops.csv"
        text = src.read_text()
        name = "crops.csv"
    else:
        with open(path, newline="") as fh:
            text = fh.read()
        name = str(path)
    crops = []
    for lineno, row in enumerate(csv.reader(text.splitlines()), start=1):
        if not row or row[0].startswith("#") or row[0].strip().lower() == "name":
            continue
        if len(row) < 5:
            raise ParseError("expected name,species,min_dli,max_dli,category", lineno, name)
        try:
            lo, hi = float(row[2]), float(row[3])
        except ValueError:
            raise ParseError("min_dli/max_dli must be numbers", lineno, name) from None
        crops.append(CropSpec(row[0].strip(), row[1].strip(), lo, hi,
                              LightCategory.parse(row[4]), row[5].strip() if len(row) > 5 else ""))
    return crops


DEFAULT_CROPS = tuple(load_crops())


def suitable_crops(dli: float, crops: Sequence[CropSpec] = DEFAULT_CROPS) -> list[CropSpec]:
    """Crops whose minimum DLI the location strictly exceeds.

    ``max_dli`` is advisory; crops above their upper bound are still listed.
    """
    if not crops:
        raise EmptyDatabaseError("crop database is empty")
    return [c for c in crops if dli > c.min_dli]


@dataclass(frozen=True)
class SuitabilityMap:
    grid: object
    threshold: float
    mask: np.ndarray                 # (rows, cols) bool
    crops: dict = field(default_factory=dict)   # (row, col) -> [crop names]
    rounded: bool = True

    def levels(self) -> list[int]:
        """1-based rows with at least one suitable cell."""
        return [r + 1 for r in range(self.mask.shape[0]) if self.mask[r].any()]

    def levels_summary(self) -> str:
        return format_levels(self.levels(), self.mask.shape[0])


def format_levels(levels: Sequence[int], rows: int) -> str:
    """Compact level list: ``all``, ``14 and above``, ``1, 2, 7 and above``, ``16``."""
    levels = sorted(set(levels))
    if not levels:
        return "none"
    if levels == list(range(1, rows + 1)):
        return "all"
    tail_start = rows
    while tail_start - 1 in levels:
        tail_start -= 1
    if rows in levels and tail_start < rows:
        head = [str(x) for x in levels if x < tail_start]
        return ", ".join(head + [f"{tail_start} and above"])
    return ", ".join(str(x) for x in levels)


def suitability_map(dli: DliMap, threshold: float = DEFAULT_THRESHOLD,
                    crops: Optional[Sequence[CropSpec]] = DEFAULT_CROPS,
                    use_rounded: bool = True) -> SuitabilityMap:
    """Cells whose DLI exceeds ``threshold`` (strict), with the crops each can host."""
    vals = dli.rounded if use_rounded else dli.values
    mask = np.asarray(vals) > threshold
    per_cell = {}
    if crops:
        for r in range(mask.shape[0]):
            for c in range(mask.shape[1]):
                if mask[r, c]:
                    per_cell[(r + 1, c + 1)] = [k.name for k in suitable_crops(float(vals[r, c]), crops)]
    return SuitabilityMap(dli.grid, threshold, mask, per_cell, use_rounded)


@dataclass(frozen=True)
class FacadeSummary:
    """One row of the monthly min/max/levels table."""
    facade: str
    period: str
    minimum: int
    maximum: int
    levels: str


def summarize(label: str, dli: DliMap, threshold: float = DEFAULT_THRESHOLD) -> FacadeSummary:
    r = dli.rounded
    s = suitability_map(dli, threshold, crops=None)
    return FacadeSummary(label, dli.period, int(r.min()), int(r.max()), s.levels_summary())
