"""Triangulated terrain surfaces built from regular elevation grids.

The terrain model is a 2.5D piecewise-linear surface: a rectangular grid of
spot heights triangulated into a TIN by splitting every cell along the fixed
lower-left to upper-right diagonal.  The fixed diagonal makes surfaces
reproducible from the same grid on any machine.  Heights are normalized so
the lowest surface point sits at elevation 0.

Grids are ingested from ESRI ASCII rasters or generated with a seeded PCG64
generator.  All types are immutable after construction and all operations
are pure functions, so concurrent readers need no locking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PlannerError

# Coordinates this close (relative to the grid spacing) are treated as one
# ray/edge crossing.
CROSSING_MERGE_REL = 1e-9

# Queries may fall this far outside the bounds (relative to extent) and still
# be clamped onto the boundary.
EDGE_TOL_REL = 1e-9

_HEADER_KEYS = {"ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"}


@dataclass
class GridDem:
    """Regular grid of spot elevations.

    ``heights[i, j]`` is the elevation at ``origin + (j*cellsize, i*cellsize)``;
    row 0 is the southernmost row.  ``meta`` records provenance such as the
    original minimum removed by normalization or the generator seed.
    """

    ncols: int
    nrows: int
    cellsize: float
    origin: tuple[float, float]
    heights: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.ncols < 2 or self.nrows < 2:
            raise PlannerError("invalid-dims", "need at least a 2x2 grid")
        if not self.cellsize > 0:
            raise PlannerError("invalid-dims", "cellsize must be positive")
        h = np.asarray(self.heights, dtype=float)
        if h.shape != (self.nrows, self.ncols):
            raise PlannerError(
                "count-mismatch",
                f"heights shape {h.shape} does not match {self.nrows}x{self.ncols}",
            )
        if not np.isfinite(h).all():
            raise PlannerError("non-finite", "grid contains non-finite heights")
        h.flags.writeable = False
        self.heights = h


@dataclass
class GridInfo:
    """Grid layout of a grid-derived TIN, kept for fast point location."""

    origin: tuple[float, float]
    cellsize: float
    nrows: int
    ncols: int


@dataclass
class Tin:
    """Triangulated terrain surface.

    ``vertices`` is (n, 3) float, ``triangles`` (m, 3) int indexing vertices.
    ``bounds`` is the tiled rectangle (xmin, ymin, xmax, ymax) and ``lmax``
    the highest vertex after normalization (the lowest vertex is at z = 0).
    """

    vertices: np.ndarray
    triangles: np.ndarray
    bounds: tuple[float, float, float, float]
    lmax: float
    grid: GridInfo | None = field(default=None, repr=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        t = np.asarray(self.triangles, dtype=np.int64)
        v.flags.writeable = False
        t.flags.writeable = False
        self.vertices = v
        self.triangles = t
        self._zgrid = None
        self._edges = None

    def _grid_z(self):
        if self._zgrid is None:
            g = self.grid
            self._zgrid = self.vertices[:, 2].reshape(g.nrows, g.ncols)
        return self._zgrid

    def _edge_array(self):
        # unique undirected edges, as (n_edges, 2, 2) endpoint xy pairs
        if self._edges is None:
            tri = self.triangles
            pairs = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
            pairs = np.sort(pairs, axis=1)
            pairs = np.unique(pairs, axis=0)
            self._edges = self.vertices[pairs][:, :, :2]
        return self._edges


def ingest_ascii_grid(text: str) -> GridDem:
    """Parse an ESRI ASCII grid into a normalized :class:`GridDem`.

    Header keys (``ncols``, ``nrows``, ``xllcorner``, ``yllcorner``,
    ``cellsize``, optional ``NODATA_value``) are case-insensitive and may
    appear in any order before the data block.  The first data row is the
    northernmost one.  Any NODATA cell is rejected outright; there is no
    infill policy.  Heights are shifted so their minimum is exactly 0 and the
    removed offset is recorded as ``meta['original_min']``.
    """
    header: dict[str, float] = {}
    body_tokens: list[str] = []
    for line in text.splitlines():
        tokens = line.split()
        if not tokens:
            continue
        key = tokens[0].lower()
        if not body_tokens and key in _HEADER_KEYS:
            if len(tokens) != 2:
                raise PlannerError("malformed-header", f"bad header line: {line!r}")
            try:
                header[key] = float(tokens[1])
            except ValueError:
                raise PlannerError("malformed-header", f"bad header value: {line!r}")
        else:
            body_tokens.extend(tokens)

    for key in ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize"):
        if key not in header:
            raise PlannerError("malformed-header", f"missing header key {key}")
    ncols = int(header["ncols"])
    nrows = int(header["nrows"])
    if ncols != header["ncols"] or nrows != header["nrows"]:
        raise PlannerError("malformed-header", "ncols/nrows must be integers")

    if len(body_tokens) != nrows * ncols:
        raise PlannerError(
            "count-mismatch",
            f"expected {nrows * ncols} values, found {len(body_tokens)}",
        )
    try:
        values = np.array([float(tok) for tok in body_tokens], dtype=float)
    except ValueError:
        raise PlannerError("malformed-body", "non-numeric value in data block")

    if "nodata_value" in header and np.any(values == header["nodata_value"]):
        raise PlannerError("nodata-present", "grid contains NODATA cells")
    if not np.isfinite(values).all():
        raise PlannerError("non-finite", "grid contains non-finite values")

    heights = values.reshape(nrows, ncols)[::-1]  # file rows run north to south
    original_min = float(heights.min())
    return GridDem(
        ncols=ncols,
        nrows=nrows,
        cellsize=header["cellsize"],
        origin=(header["xllcorner"], header["yllcorner"]),
        heights=heights - original_min,
        meta={"original_min": original_min},
    )


def random_grid(
    seed: int, nrows: int, ncols: int, cellsize: float, hmin: float, hmax: float
) -> GridDem:
    """Generate a grid with heights drawn i.i.d. uniform on [hmin, hmax].

    Uses numpy's PCG64 generator seeded with ``seed``; the same arguments
    always produce a bitwise-identical grid.
    """
    if hmin > hmax:
        raise PlannerError("invalid-bounds", f"hmin {hmin} exceeds hmax {hmax}")
    rng = np.random.Generator(np.random.PCG64(seed))
    heights = rng.uniform(hmin, hmax, size=(nrows, ncols))
    return GridDem(
        ncols=ncols,
        nrows=nrows,
        cellsize=cellsize,
        origin=(0.0, 0.0),
        heights=heights,
        meta={"seed": int(seed), "prng": "PCG64", "hmin": hmin, "hmax": hmax},
    )


def triangulate(dem: GridDem) -> Tin:
    """Split every grid cell along its lower-left/upper-right diagonal.

    Produces 2*(nrows-1)*(ncols-1) counterclockwise triangles tiling the grid
    rectangle.  Vertex heights are shifted so the minimum is exactly 0.
    """
    nrows, ncols = dem.nrows, dem.ncols
    c = dem.cellsize
    xll, yll = dem.origin

    jj, ii = np.meshgrid(np.arange(ncols), np.arange(nrows))
    z = dem.heights - dem.heights.min()
    vertices = np.column_stack(
        [(xll + jj * c).ravel(), (yll + ii * c).ravel(), z.ravel()]
    )

    tris = []
    for i in range(nrows - 1):
        for j in range(ncols - 1):
            ll = i * ncols + j
            lr = ll + 1
            ul = ll + ncols
            ur = ul + 1
            tris.append((ll, lr, ur))
            tris.append((ll, ur, ul))

    bounds = (xll, yll, xll + (ncols - 1) * c, yll + (nrows - 1) * c)
    return Tin(
        vertices=vertices,
        triangles=np.array(tris, dtype=np.int64),
        bounds=bounds,
        lmax=float(z.max()),
        grid=GridInfo(origin=(xll, yll), cellsize=c, nrows=nrows, ncols=ncols),
    )


def height_at_many(tin: Tin, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorized surface height at the given points (barycentric per triangle)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    xmin, ymin, xmax, ymax = tin.bounds
    tol = EDGE_TOL_REL * max(xmax - xmin, ymax - ymin)
    if (
        (xs < xmin - tol).any()
        or (xs > xmax + tol).any()
        or (ys < ymin - tol).any()
        or (ys > ymax + tol).any()
    ):
        raise PlannerError("out-of-bounds", "height query outside terrain bounds")

    if tin.grid is not None:
        return _height_grid(tin, xs, ys)
    return _height_generic(tin, xs, ys)


def height_at(tin: Tin, x: float, y: float) -> float:
    """Surface height at a single point inside the terrain bounds."""
    return float(height_at_many(tin, np.array([x]), np.array([y]))[0])


def _height_grid(tin, xs, ys):
    g = tin.grid
    z = tin._grid_z()
    fx = (xs - g.origin[0]) / g.cellsize
    fy = (ys - g.origin[1]) / g.cellsize
    # snap near-integer grid coordinates so node/edge queries are exact
    rx = np.rint(fx)
    ry = np.rint(fy)
    fx = np.where(np.abs(fx - rx) <= 1e-9, rx, fx)
    fy = np.where(np.abs(fy - ry) <= 1e-9, ry, fy)
    col = np.clip(np.floor(fx).astype(np.int64), 0, g.ncols - 2)
    row = np.clip(np.floor(fy).astype(np.int64), 0, g.nrows - 2)
    u = np.clip(fx - col, 0.0, 1.0)
    v = np.clip(fy - row, 0.0, 1.0)

    z00 = z[row, col]
    z10 = z[row, col + 1]
    z01 = z[row + 1, col]
    z11 = z[row + 1, col + 1]

    # cell diagonal runs from the lower-left corner to the upper-right one;
    # barycentric weight form is exact when a query sits on a grid node
    lower = u >= v
    out = np.where(
        lower,
        z00 * (1.0 - u) + z10 * (u - v) + z11 * v,
        z00 * (1.0 - v) + z01 * (v - u) + z11 * u,
    )
    return out


def _height_generic(tin, xs, ys):
    # brute-force point location; fine at the scale this library targets
    verts = tin.vertices
    tris = tin.triangles
    a = verts[tris[:, 0]]
    b = verts[tris[:, 1]]
    c = verts[tris[:, 2]]
    out = np.empty(xs.shape, dtype=float)
    out.fill(np.nan)
    scale = max(tin.bounds[2] - tin.bounds[0], tin.bounds[3] - tin.bounds[1])
    eps = 1e-12 * scale * scale
    for start in range(0, xs.size, 2048):
        sl = slice(start, min(start + 2048, xs.size))
        px = xs[sl][:, None]
        py = ys[sl][:, None]
        d1 = (b[:, 0] - a[:, 0]) * (py - a[:, 1]) - (b[:, 1] - a[:, 1]) * (px - a[:, 0])
        d2 = (c[:, 0] - b[:, 0]) * (py - b[:, 1]) - (c[:, 1] - b[:, 1]) * (px - b[:, 0])
        d3 = (a[:, 0] - c[:, 0]) * (py - c[:, 1]) - (a[:, 1] - c[:, 1]) * (px - c[:, 0])
        inside = (d1 >= -eps) & (d2 >= -eps) & (d3 >= -eps)
        idx = inside.argmax(axis=1)
        found = inside[np.arange(px.shape[0]), idx]
        ta, tb, tc = a[idx], b[idx], c[idx]
        det = (tb[:, 0] - ta[:, 0]) * (tc[:, 1] - ta[:, 1]) - (tc[:, 0] - ta[:, 0]) * (
            tb[:, 1] - ta[:, 1]
        )
        w1 = (
            (px[:, 0] - ta[:, 0]) * (tc[:, 1] - ta[:, 1])
            - (tc[:, 0] - ta[:, 0]) * (py[:, 0] - ta[:, 1])
        ) / det
        w2 = (
            (tb[:, 0] - ta[:, 0]) * (py[:, 0] - ta[:, 1])
            - (px[:, 0] - ta[:, 0]) * (tb[:, 1] - ta[:, 1])
        ) / det
        zs = ta[:, 2] + w1 * (tb[:, 2] - ta[:, 2]) + w2 * (tc[:, 2] - ta[:, 2])
        block = np.where(found, zs, np.nan)
        out[sl] = block
    if np.isnan(out).any():
        raise PlannerError("out-of-bounds", "point not covered by any triangle")
    return out


@dataclass(frozen=True)
class ProfileBreakpoint:
    """One knot of a piecewise-linear terrain profile along a ray.

    ``slope`` is the directional surface slope of the segment starting at
    ``t`` (0 for the final breakpoint, which starts no segment).
    """

    t: float
    z: float
    slope: float


def _exit_t(bounds, x0, y0, ct, st):
    xmin, ymin, xmax, ymax = bounds
    t = math.inf
    if ct > 0:
        t = min(t, (xmax - x0) / ct)
    elif ct < 0:
        t = min(t, (xmin - x0) / ct)
    if st > 0:
        t = min(t, (ymax - y0) / st)
    elif st < 0:
        t = min(t, (ymin - y0) / st)
    return max(t, 0.0)


def _crossing_ts_grid(tin, x0, y0, ct, st, t_exit):
    g = tin.grid
    xll, yll = g.origin
    c = g.cellsize
    cands = []
    if ct != 0.0:
        xs = xll + np.arange(g.ncols) * c
        cands.append((xs - x0) / ct)
    if st != 0.0:
        ys = yll + np.arange(g.nrows) * c
        cands.append((ys - y0) / st)
    if st != ct:
        # cell diagonals all lie on lines y - x = const
        ks = np.arange(-(g.ncols - 1), g.nrows)
        consts = (yll - xll) + ks * c
        cands.append((consts - (y0 - x0)) / (st - ct))
    return np.concatenate(cands) if cands else np.empty(0)


def _crossing_ts_generic(tin, x0, y0, ct, st, t_exit):
    edges = tin._edge_array()
    a = edges[:, 0]
    b = edges[:, 1]
    ex = b[:, 0] - a[:, 0]
    ey = b[:, 1] - a[:, 1]
    denom = ct * ey - st * ex
    ok = denom != 0.0
    ax = a[:, 0] - x0
    ay = a[:, 1] - y0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (ax * ey - ay * ex) / denom
        s = (ax * st - ay * ct) / denom
    ok &= (s >= 0.0) & (s <= 1.0)
    return t[ok]


def profile_arrays(tin: Tin, origin, azimuth: float):
    """Terrain profile along a ray as parallel (t, z) arrays.

    Breakpoints mark t = 0, every crossing of a triangle edge, and the exit
    from the bounds; the surface height is exactly linear between consecutive
    breakpoints.
    """
    x0, y0 = float(origin[0]), float(origin[1])
    ct = math.cos(azimuth)
    st = math.sin(azimuth)
    t_exit = _exit_t(tin.bounds, x0, y0, ct, st)

    if tin.grid is not None:
        merge_tol = CROSSING_MERGE_REL * tin.grid.cellsize
        cand = _crossing_ts_grid(tin, x0, y0, ct, st, t_exit)
    else:
        scale = max(tin.bounds[2] - tin.bounds[0], tin.bounds[3] - tin.bounds[1])
        merge_tol = CROSSING_MERGE_REL * scale
        cand = _crossing_ts_generic(tin, x0, y0, ct, st, t_exit)

    cand = cand[(cand > merge_tol) & (cand < t_exit - merge_tol)]
    cand = np.sort(cand)
    if cand.size:
        keep = np.empty(cand.size, dtype=bool)
        keep[0] = True
        np.greater(np.diff(cand), merge_tol, out=keep[1:])
        cand = cand[keep]
    if t_exit > merge_tol:
        ts = np.concatenate([[0.0], cand, [t_exit]])
    else:
        ts = np.array([0.0])

    zs = height_at_many(tin, x0 + ts * ct, y0 + ts * st)
    return ts, zs


def ray_profile(tin: Tin, origin, azimuth: float) -> list[ProfileBreakpoint]:
    """Piecewise-linear terrain profile along a ray from a point inside bounds."""
    ts, zs = profile_arrays(tin, origin, azimuth)
    slopes = np.zeros(ts.size)
    if ts.size > 1:
        slopes[:-1] = np.diff(zs) / np.diff(ts)
    return [
        ProfileBreakpoint(float(t), float(z), float(s))
        for t, z, s in zip(ts, zs, slopes)
    ]


def tin_to_json(tin: Tin) -> dict:
    """JSON-ready dict with vertices, triangles, bounds and lmax."""
    doc = {
        "vertices": [[float(a) for a in v] for v in tin.vertices],
        "triangles": [[int(a) for a in t] for t in tin.triangles],
        "bounds": [float(b) for b in tin.bounds],
        "lmax": float(tin.lmax),
    }
    if tin.grid is not None:
        g = tin.grid
        doc["grid"] = {
            "origin": [float(g.origin[0]), float(g.origin[1])],
            "cellsize": float(g.cellsize),
            "nrows": int(g.nrows),
            "ncols": int(g.ncols),
        }
    return doc


def tin_from_json(doc: dict) -> Tin:
    """Rebuild a Tin from :func:`tin_to_json` output, validating consistency."""
    vertices = np.asarray(doc["vertices"], dtype=float)
    triangles = np.asarray(doc["triangles"], dtype=np.int64)
    if vertices.ndim != 2 or vertices.shape[1] != 3:
        raise PlannerError("malformed-tin", "vertices must be [x, y, z] triples")
    if triangles.ndim != 2 or triangles.shape[1] != 3:
        raise PlannerError("malformed-tin", "triangles must be index triples")
    if triangles.min(initial=0) < 0 or triangles.max(initial=-1) >= len(vertices):
        raise PlannerError("malformed-tin", "triangle index out of range")
    bounds = tuple(float(b) for b in doc["bounds"])
    lmax = float(doc["lmax"])
    if abs(lmax - vertices[:, 2].max()) > 1e-9 * max(1.0, lmax):
        raise PlannerError("malformed-tin", "lmax does not match vertex heights")

    grid = None
    if "grid" in doc:
        g = doc["grid"]
        grid = GridInfo(
            origin=(float(g["origin"][0]), float(g["origin"][1])),
            cellsize=float(g["cellsize"]),
            nrows=int(g["nrows"]),
            ncols=int(g["ncols"]),
        )
        jj, ii = np.meshgrid(np.arange(grid.ncols), np.arange(grid.nrows))
        gx = grid.origin[0] + jj * grid.cellsize
        gy = grid.origin[1] + ii * grid.cellsize
        if len(vertices) != grid.nrows * grid.ncols or not (
            np.allclose(gx.ravel(), vertices[:, 0])
            and np.allclose(gy.ravel(), vertices[:, 1])
        ):
            grid = None  # vertex layout does not match the declared grid

    return Tin(
        vertices=vertices, triangles=triangles, bounds=bounds, lmax=lmax, grid=grid
    )
