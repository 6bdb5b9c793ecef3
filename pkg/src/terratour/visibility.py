"""Visibility regions on the constant-altitude flight plane.

For a point of interest on the terrain, the sky directly above is always
visible; sideways visibility is cut off by the terrain horizon.  Along each
of ``d`` sampled azimuths we find the horizon elevation, convert it to the
usable view angle from the vertical, cap it by the camera half-angle, and
project onto the flight plane.  The resulting star-shaped polygon is the set
of flight positions from which the camera cone sees the point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PlannerError
from .terrain import Tin, height_at, profile_arrays

# membership of the closed region is decided with this relative slack so that
# boundary vertices always test as inside under floating point
MEMBERSHIP_EPS_REL = 1e-9


@dataclass(frozen=True)
class Poi:
    """Point of interest on the terrain surface."""

    id: int
    x: float
    y: float
    z: float


def poi_at(tin: Tin, poi_id: int, x: float, y: float) -> Poi:
    """Poi anchored to the terrain surface at (x, y)."""
    return Poi(id=poi_id, x=float(x), y=float(y), z=height_at(tin, x, y))


@dataclass(frozen=True)
class ViewParams:
    """Camera half-angle (radians), flight altitude, and azimuth sample count."""

    delta: float
    h: float
    d: int

    def __post_init__(self):
        if not 0.0 < self.delta < math.pi / 2:
            raise PlannerError("invalid-view-angle", "delta must be in (0, pi/2)")
        if not self.h > 0:
            raise PlannerError("invalid-altitude", "flight altitude must be positive")
        if self.d < 3:
            raise PlannerError("invalid-resolution", "need at least 3 azimuths")


@dataclass
class VisibilityRegion:
    """Star-shaped region on the flight plane from which one poi is visible.

    ``radial_extents[k]`` is the boundary distance from ``center`` along
    azimuth 2*pi*k/d (k = 0 along +x).  The boundary between samples is the
    linear interpolation of adjacent radii in angle.
    """

    poi_id: int
    center: tuple[float, float]
    h: float
    delta: float
    d: int
    radial_extents: np.ndarray
    poi: Poi | None = None

    def __post_init__(self):
        r = np.asarray(self.radial_extents, dtype=float)
        r.flags.writeable = False
        self.radial_extents = r

    def boundary_vertices(self) -> np.ndarray:
        """(d, 2) polygon vertices, one per sampled azimuth."""
        theta = 2.0 * math.pi * np.arange(self.d) / self.d
        return np.column_stack(
            [
                self.center[0] + self.radial_extents * np.cos(theta),
                self.center[1] + self.radial_extents * np.sin(theta),
            ]
        )


def horizon_elevation(tin: Tin, poi: Poi, azimuth: float) -> float:
    """Elevation angle of the global horizon point along one azimuth.

    The supremum of atan((z(t) - z0)/t) over the ray profile, evaluated at
    the profile breakpoints plus the t -> 0 limit (the slope of the poi's own
    triangle); the profile is piecewise linear, so the elevation along each
    piece is monotone and the breakpoint evaluation is exact.  Clamped at 0:
    terrain below the viewpoint never obstructs the flight plane above it.
    """
    ts, zs = profile_arrays(tin, (poi.x, poi.y), azimuth)
    if ts.size < 2:
        return 0.0
    z0 = zs[0]
    g = (zs[1] - z0) / (ts[1] - ts[0])  # first-segment slope, the t->0 limit
    rest = (zs[1:] - z0) / ts[1:]
    g = max(g, rest.max())
    return math.atan(g) if g > 0.0 else 0.0


def compute_region(tin: Tin, poi: Poi, params: ViewParams) -> VisibilityRegion:
    """Visibility region of one poi for the given camera and altitude."""
    if params.h <= tin.lmax:
        raise PlannerError(
            "altitude-too-low", f"flight altitude {params.h} not above lmax {tin.lmax}"
        )
    d = params.d
    extents = np.empty(d)
    for k in range(d):
        azimuth = 2.0 * math.pi * k / d
        eps = horizon_elevation(tin, poi, azimuth)
        usable = min(math.pi / 2 - eps, params.delta)
        extents[k] = (params.h - poi.z) * math.tan(usable)
    return VisibilityRegion(
        poi_id=poi.id,
        center=(poi.x, poi.y),
        h=params.h,
        delta=params.delta,
        d=d,
        radial_extents=extents,
        poi=poi,
    )


def points_in_region(region: VisibilityRegion, qs: np.ndarray) -> np.ndarray:
    """Vectorized membership test for an (n, 2) array of flight-plane points."""
    qs = np.asarray(qs, dtype=float)
    dx = qs[:, 0] - region.center[0]
    dy = qs[:, 1] - region.center[1]
    dist = np.hypot(dx, dy)
    theta = np.arctan2(dy, dx) % (2.0 * math.pi)
    pos = theta * (region.d / (2.0 * math.pi))
    k = np.minimum(pos.astype(np.int64), region.d - 1)
    frac = pos - k
    r = region.radial_extents
    r_theta = r[k] * (1.0 - frac) + r[(k + 1) % region.d] * frac
    return dist <= r_theta + MEMBERSHIP_EPS_REL * region.h


def point_in_region(region: VisibilityRegion, q) -> bool:
    """True iff q lies in the closed region (radius interpolated in angle)."""
    return bool(points_in_region(region, np.asarray([q], dtype=float))[0])


def inscribed_radius(region: VisibilityRegion) -> float:
    """Radius of the largest centered disk inside the boundary polygon.

    Uses the distance from the center to the nearest boundary edge segment
    (not just the smallest sampled radius), so disk-in-region containment is
    exact rather than approximate.
    """
    v = region.boundary_vertices()
    a = v
    b = np.roll(v, -1, axis=0)
    ab = b - a
    ap = np.asarray(region.center) - a
    denom = np.einsum("ij,ij->i", ab, ab)
    t = np.clip(np.einsum("ij,ij->i", ap, ab) / np.where(denom == 0, 1.0, denom), 0, 1)
    closest = a + t[:, None] * ab
    dists = np.hypot(
        closest[:, 0] - region.center[0], closest[:, 1] - region.center[1]
    )
    return float(dists.min())


def region_to_json(region: VisibilityRegion) -> dict:
    return {
        "poi_id": int(region.poi_id),
        "center": [float(region.center[0]), float(region.center[1])],
        "h": float(region.h),
        "delta": float(region.delta),
        "d": int(region.d),
        "radial_extents": [float(r) for r in region.radial_extents],
    }


def region_from_json(doc: dict) -> VisibilityRegion:
    extents = np.asarray(doc["radial_extents"], dtype=float)
    if len(extents) != int(doc["d"]):
        raise PlannerError("malformed-region", "radial_extents length must equal d")
    return VisibilityRegion(
        poi_id=int(doc["poi_id"]),
        center=(float(doc["center"][0]), float(doc["center"][1])),
        h=float(doc["h"]),
        delta=float(doc["delta"]),
        d=int(doc["d"]),
        radial_extents=extents,
    )
