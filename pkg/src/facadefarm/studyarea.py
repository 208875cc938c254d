"""Bundled study-area-like scene: a 16-level slab block with an L-shaped notch
at its south-east end, flanked by a residential block (NE), a second block
(SE) and a low multi-storey car park (NW).  The south-west side is an open
street.

Facade labels: ``A`` faces NE, ``B`` faces SE, ``C`` and ``W`` face SW.
"""
from importlib import resources

from .citymodel import CityScene, load_scene

FACADES = ("A", "B", "C", "W")


def study_area_path():
    return resources.files("facadefarm") / "data" / "study_area.json"


def study_area_scene() -> CityScene:
    with resources.as_file(study_area_path()) as p:
        return load_scene(p)
