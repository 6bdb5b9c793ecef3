"""Constant-factor tour approximation over per-poi disks.

Every visibility region fits inside an "outer" disk of radius h*tan(delta)
around its poi, and contains a centered "inner" disk whose common radius is
the occlusion floor across regions.  The tour: pick a greedy maximal
independent set of inner disks, run TSP over the chosen centers, and splice a
full circumnavigation of each chosen disk into the tour so every remaining
disk (hence every region) is touched.  Disjoint outer disks also certify a
lower bound on any feasible tour, which yields the approximation-ratio
certificate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import PlannerError
from .terrain import Tin
from .visibility import ViewParams, VisibilityRegion, Poi

# tour-length-per-disjoint-disk packing constant: any closed tour visiting
# m >= 3 disjoint radius-r disks is at least (m/2) * alpha * r long
DISJOINT_DISK_ALPHA = 0.4786

# chords per circumnavigation in emitted waypoint lists; reported lengths use
# the exact circumference, so the bound certificates carry no chord error
CIRCLE_CHORDS = 360


@dataclass(frozen=True)
class Disk:
    center: tuple[float, float]
    radius: float
    poi_id: int


@dataclass
class DiskFamily:
    """Equal-radius disks, one per poi."""

    disks: list[Disk]
    radius: float
    containment_fallback: bool = False


@dataclass
class TspTour:
    """Closed point tour: visiting order, exact closed length, solver mode."""

    order: list[int]
    length: float
    mode: str


@dataclass
class ApproxTour:
    """Tour produced by the disk approximation, with its bound certificate.

    ``length`` uses the exact circumference for circumnavigations while
    ``waypoints`` discretizes them into chords.  ``lower_bound`` is present
    when at least 3 outer disks are pairwise disjoint; ``ratio_constant``
    when the center TSP ran exactly.
    """

    waypoints: np.ndarray
    length: float
    mis_poi_ids: list[int]
    inner_radius: float
    lower_bound: float | None
    ratio_constant: float | None
    containment_fallback: bool
    tsp_mode: str


def outer_disks(pois: list[Poi], params: ViewParams) -> DiskFamily:
    """Disk of radius h*tan(delta) around each poi; contains its region."""
    r = params.h * math.tan(params.delta)
    return DiskFamily(
        disks=[Disk(center=(p.x, p.y), radius=r, poi_id=p.id) for p in pois],
        radius=r,
    )


def inner_disks(
    pois: list[Poi],
    regions: list[VisibilityRegion],
    lmax: float,
    params: ViewParams,
) -> DiskFamily:
    """Common-radius centered disks guaranteed to lie inside every region.

    The unobstructed radius is (h - lmax)*tan(delta).  Occlusion can shrink a
    region below that, so the common radius is capped by the smallest sampled
    boundary radius across regions: region membership interpolates radii
    between azimuths, which makes the minimum sampled radius the largest
    centered disk certain to fit.  ``containment_fallback`` records that the
    occlusion cap was the binding term.
    """
    if lmax >= params.h:
        raise PlannerError(
            "altitude-too-low", f"altitude {params.h} not above terrain top {lmax}"
        )
    if len(pois) != len(regions) or any(
        p.id != r.poi_id for p, r in zip(pois, regions)
    ):
        raise PlannerError("poi-region-mismatch", "pois and regions must align")
    clear_radius = (params.h - lmax) * math.tan(params.delta)
    floor = min(float(r.radial_extents.min()) for r in regions)
    fallback = floor < clear_radius
    rho = floor if fallback else clear_radius
    return DiskFamily(
        disks=[Disk(center=(p.x, p.y), radius=rho, poi_id=p.id) for p in pois],
        radius=rho,
        containment_fallback=fallback,
    )


def greedy_mis(family: DiskFamily) -> list[Disk]:
    """Greedy maximal independent set of equal-radius disks.

    Repeatedly keeps the remaining disk with lexicographically smallest
    center and drops everything intersecting it (closed: touching counts).
    The result is pairwise disjoint and every input disk intersects some
    chosen disk.
    """
    disks = family.disks
    if not disks:
        return []
    if any(d.radius != family.radius for d in disks):
        raise PlannerError("unequal-radii", "greedy selection needs equal radii")
    centers = np.array([d.center for d in disks])
    alive = np.ones(len(disks), dtype=bool)
    order = np.lexsort((centers[:, 1], centers[:, 0]))
    chosen = []
    for idx in order:
        if not alive[idx]:
            continue
        chosen.append(disks[idx])
        dist = np.hypot(
            centers[:, 0] - centers[idx, 0], centers[:, 1] - centers[idx, 1]
        )
        alive &= dist > 2.0 * family.radius
    return chosen


def _closed_length(points, order):
    p = points[order]
    return float(np.hypot(*(p - np.roll(p, -1, axis=0)).T).sum())


def _held_karp(dist):
    n = len(dist)
    full = 1 << n
    inf = math.inf
    dp = [[inf] * n for _ in range(full)]
    parent = [[-1] * n for _ in range(full)]
    dp[1][0] = 0.0
    for mask in range(1, full, 2):
        row = dp[mask]
        for j in range(1, n):
            bit = 1 << j
            if not mask & bit:
                continue
            pm = mask ^ bit
            prow = dp[pm]
            best = inf
            arg = -1
            dj = dist[j]
            for i in range(n):
                if pm & (1 << i) and prow[i] + dj[i] < best:
                    best = prow[i] + dj[i]
                    arg = i
            row[j] = best
            parent[mask][j] = arg
    if n == 1:
        return [0], 0.0
    mask = full - 1
    best = inf
    last = -1
    for j in range(1, n):
        cand = dp[mask][j] + dist[0][j]
        if cand < best:
            best = cand
            last = j
    order = []
    while last != -1:
        order.append(last)
        nxt = parent[mask][last]
        mask ^= 1 << last
        last = nxt
    order.reverse()
    return order, best


def _nearest_neighbor(dist, start):
    n = len(dist)
    seen = [False] * n
    order = [start]
    seen[start] = True
    for _ in range(n - 1):
        cur = order[-1]
        best = math.inf
        arg = -1
        for j in range(n):
            if not seen[j] and dist[cur][j] < best:
                best = dist[cur][j]
                arg = j
        order.append(arg)
        seen[arg] = True
    return order


def _two_opt(dist, order):
    n = len(order)
    improved = True
    while improved:
        improved = False
        for i in range(n - 1):
            a, b = order[i], order[i + 1]
            for j in range(i + 2, n):
                if i == 0 and j == n - 1:
                    continue
                c, d = order[j], order[(j + 1) % n]
                delta = dist[a][c] + dist[b][d] - dist[a][b] - dist[c][d]
                if delta < -1e-12:
                    order[i + 1 : j + 1] = reversed(order[i + 1 : j + 1])
                    b = order[i + 1]
                    improved = True
    return order


def tsp_tour(points, mode: str, seed: int = 0) -> TspTour:
    """Closed tour over 2D points: optimal subset DP or seeded NN + 2-opt.

    Exact mode is limited to 15 points; the heuristic is deterministic for a
    given seed and never beats the exact optimum.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(pts)
    if n == 0:
        raise PlannerError("empty-input", "no points to tour")
    if n == 1:
        return TspTour(order=[0], length=0.0, mode=mode)
    dist = np.hypot(
        pts[:, 0][:, None] - pts[:, 0], pts[:, 1][:, None] - pts[:, 1]
    ).tolist()
    if mode == "exact":
        if n > 15:
            raise PlannerError("too-many-points", f"exact mode capped at 15, got {n}")
        order, length = _held_karp(dist)
        return TspTour(order=order, length=length, mode="exact")
    if mode == "heuristic":
        rng = np.random.Generator(np.random.PCG64(seed))
        order = _nearest_neighbor(dist, int(rng.integers(n)))
        order = _two_opt(dist, order)
        return TspTour(order=order, length=_closed_length(pts, order), mode="heuristic")
    raise PlannerError("unknown-mode", f"mode must be exact or heuristic: {mode}")


def lower_bound(m_disjoint: int, params: ViewParams) -> float:
    """Minimum length of any tour visiting m >= 3 pairwise-disjoint outer disks."""
    if m_disjoint < 3:
        raise PlannerError(
            "precondition-m-ge-3", "bound needs at least 3 disjoint disks"
        )
    return (m_disjoint / 2.0) * DISJOINT_DISK_ALPHA * params.h * math.tan(params.delta)


def ratio_constant(h: float, lmax: float, eps_tsp: float) -> float:
    """Guaranteed tour-length ratio over the optimum, for the given altitude
    margin and TSP-step slack."""
    if lmax >= h:
        raise PlannerError("altitude-too-low", "ratio diverges as lmax approaches h")
    if eps_tsp < 0:
        raise PlannerError("invalid-eps", "TSP slack must be nonnegative")
    blow = 16.0 * h / (DISJOINT_DISK_ALPHA * (h - lmax))
    return (1.0 + eps_tsp) * (1.0 + blow) + math.pi * blow


def _circle_points(center, radius, start_angle):
    k = np.arange(CIRCLE_CHORDS + 1)
    ang = start_angle + 2.0 * math.pi * k / CIRCLE_CHORDS
    return np.column_stack(
        [center[0] + radius * np.cos(ang), center[1] + radius * np.sin(ang)]
    )


def tspn_tour(
    regions: list[VisibilityRegion],
    pois: list[Poi],
    tin: Tin,
    params: ViewParams,
    seed: int = 0,
) -> ApproxTour:
    """Tour visiting every visibility region via the disk approximation.

    TSP over the independent-set centers runs exactly up to 15 centers, else
    by the seeded heuristic.  Entering a chosen disk, the tour walks the full
    circumference from the entry point and then moves to the center; with a
    single chosen disk whose center lies in every disk, the tour collapses to
    that center alone.
    """
    inner = inner_disks(pois, regions, tin.lmax, params)
    outer = outer_disks(pois, params)
    mis = greedy_mis(inner)
    outer_mis_size = len(greedy_mis(outer))
    lb = lower_bound(outer_mis_size, params) if outer_mis_size >= 3 else None

    rho = inner.radius
    centers = np.array([d.center for d in mis])
    k = len(mis)

    if k <= 15:
        tour = tsp_tour(centers, "exact", seed)
        eps_tsp = 0.0
        ratio = ratio_constant(params.h, tin.lmax, eps_tsp)
    else:
        tour = tsp_tour(centers, "heuristic", seed)
        ratio = None  # local search carries no a-priori slack bound

    if k == 1:
        c = centers[0]
        all_centers = np.array([d.center for d in inner.disks])
        covers = np.hypot(all_centers[:, 0] - c[0], all_centers[:, 1] - c[1]) <= rho
        if covers.all():
            waypoints = centers.copy()
            length = 0.0
        else:
            waypoints = _circle_points(c, rho, 0.0)
            length = 2.0 * math.pi * rho
    else:
        ordered = centers[tour.order]
        pieces = [ordered[:1]]
        for i in range(k):
            cur = ordered[i]
            nxt = ordered[(i + 1) % k]
            u = (nxt - cur) / np.hypot(*(nxt - cur))
            entry = nxt - rho * u
            start_angle = math.atan2(entry[1] - nxt[1], entry[0] - nxt[0])
            pieces.append(_circle_points(nxt, rho, start_angle))
            if (i + 1) % k != 0:
                pieces.append(nxt[None, :])
        waypoints = np.concatenate(pieces)
        length = tour.length + k * 2.0 * math.pi * rho

    return ApproxTour(
        waypoints=waypoints,
        length=length,
        mis_poi_ids=[d.poi_id for d in mis],
        inner_radius=rho,
        lower_bound=lb,
        ratio_constant=ratio,
        containment_fallback=inner.containment_fallback,
        tsp_mode=tour.mode,
    )


def approx_tour_to_json(tour: ApproxTour) -> dict:
    return {
        "waypoints": [[float(x), float(y)] for x, y in tour.waypoints],
        "length": float(tour.length),
        "mis_poi_ids": [int(i) for i in tour.mis_poi_ids],
        "inner_radius": float(tour.inner_radius),
        "lower_bound": None if tour.lower_bound is None else float(tour.lower_bound),
        "ratio_constant": (
            None if tour.ratio_constant is None else float(tour.ratio_constant)
        ),
        "containment_fallback": bool(tour.containment_fallback),
        "tsp_mode": tour.tsp_mode,
    }
