"""Minimum-length UAV monitoring tours over 2.5D terrains.

The pipeline: build a triangulated terrain, compute a visibility region on
the flight plane for every point of interest, then plan a tour that sees all
of them, either with the disk-based constant-factor approximation or by
reducing to a generalized TSP and solving that exactly or heuristically.
"""

from .errors import PlannerError
from .terrain import (
    GridDem,
    Tin,
    ProfileBreakpoint,
    ingest_ascii_grid,
    random_grid,
    triangulate,
    height_at,
    height_at_many,
    ray_profile,
    tin_to_json,
    tin_from_json,
)

__version__ = "0.1.0"
