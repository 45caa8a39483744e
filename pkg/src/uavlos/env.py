"""Manhattan-grid city model.

The city is built from two independent one dimensional Poisson point processes,
one per axis, each with density ``lam = 1 / (mu_b + mu_s)``.  Consecutive points
bound a cell; every cell splits into a street band on the low-coordinate side
and a building band on the high side, so streets run the full length of the
region in both directions and buildings occupy the rectangular blocks where two
building bands overlap.  Each block carries one building with a Rayleigh
distributed height.

Distances are meters, times are seconds throughout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

PARALLEL_X = "parallel_x"  # crossed side runs along the X axis (a front face)
PARALLEL_Y = "parallel_y"  # crossed side runs along the Y axis (a west/east wall)

GRID_FORMAT = "uavlos-grid-v1"


class DegenerateGridError(ValueError):
    """Raised when the requested region cannot hold a street grid."""


class DegenerateGeometryError(ValueError):
    """Raised when a link geometry has no meaningful crossing structure."""


class UserInBuildingError(ValueError):
    """Raised when a ground position sits inside a building footprint."""


@dataclass
class GridParams:
    """City statistics: mean building width, mean street width, height scale.

    ``region`` gives the side lengths of the modeled area, centered on the
    origin, so a 400 x 400 region spans [-200, 200] on both axes.
    """

    mu_b: float
    mu_s: float
    sigma: float
    region: tuple[float, float] = (400.0, 400.0)

    def __post_init__(self) -> None:
        if self.mu_b <= 0 or self.mu_s <= 0:
            raise ValueError("mean widths must be positive")
        if self.sigma <= 0:
            raise ValueError("height scale must be positive")
        if self.region[0] <= 0 or self.region[1] <= 0:
            raise DegenerateGridError("region too small to contain a cell")

    @property
    def lam(self) -> float:
        """Axis point density, one street/building pair per 1/lam meters."""
        return 1.0 / (self.mu_b + self.mu_s)

    @property
    def street_fraction(self) -> float:
        return self.mu_s / (self.mu_b + self.mu_s)

    @property
    def box(self) -> tuple[float, float, float, float]:
        """(x_lo, x_hi, y_lo, y_hi) of the modeled area."""
        hx, hy = self.region[0] / 2.0, self.region[1] / 2.0
        return (-hx, hx, -hy, hy)


@dataclass
class Uav:
    """A static aerial platform at (x, y, height) with a 3D link range."""

    x: float
    y: float
    height: float
    link_range: float = math.inf

    def __post_init__(self) -> None:
        if self.height <= 0:
            raise ValueError("height must be positive")
        if self.link_range <= 0:
            raise ValueError("link range must be positive")

    @property
    def ground_xy(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass
class UserMotion:
    """Ground user walking in the +X direction at constant speed."""

    x0: float
    y0: float
    speed: float
    duration: float

    def __post_init__(self) -> None:
        if self.speed < 0:
            raise ValueError("speed must be nonnegative")
        if self.duration < 0:
            raise ValueError("duration must be nonnegative")

    def position(self, t: float) -> tuple[float, float]:
        return (self.x0 + self.speed * t, self.y0)


@dataclass
class FirstBlockSide:
    """First building edge crossed by the projected ground-to-air link."""

    x: float
    y: float
    orientation: str  # PARALLEL_X or PARALLEL_Y

    @property
    def point(self) -> tuple[float, float]:
        return (self.x, self.y)


FACE = "face"  # first contact slides along a building front line (parallel X)
WALL = "wall"  # first contact pinned on a west wall (parallel Y)
OPEN = "open"  # no contact at all, the link sees no building edge


@dataclass
class Segment:
    """One piece of an epoch over which the first-contact side does not change.

    Wall segments track two candidate walls, because which one the link
    actually meets depends on the sweep direction at evaluation time:
    ``wall_x`` is the west corner ahead of the front-line crossing (met while
    the user is west of the platform), ``back_wall_x`` the east corner behind
    it (met once the user has passed under the platform's x).
    """

    t_start: float
    t_end: float
    kind: str
    wall_x: float | None = None
    back_wall_x: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in (FACE, WALL, OPEN):
            raise ValueError(f"unknown segment kind {self.kind!r}")
        if self.kind == WALL and self.wall_x is None and self.back_wall_x is None:
            raise ValueError("wall segment needs at least one wall candidate")
        if self.t_end < self.t_start:
            raise ValueError("segment runs backwards")

    @property
    def length(self) -> float:
        return self.t_end - self.t_start


@dataclass
class SegmentPlan:
    """Alternating first-contact segments covering one motion epoch [0, T].

    Face-enter times (the link sweeping onto a west corner) and face-exit
    times (sweeping past an east corner) are the interior segment boundaries.
    """

    duration: float
    segments: list[Segment]

    def __post_init__(self) -> None:
        if not self.segments:
            raise ValueError("a plan needs at least one segment")
        if abs(self.segments[0].t_start) > 1e-12:
            raise ValueError("plan must start at t = 0")
        if abs(self.segments[-1].t_end - self.duration) > 1e-9:
            raise ValueError("plan must end at t = duration")
        for a, b in zip(self.segments, self.segments[1:]):
            if abs(a.t_end - b.t_start) > 1e-9:
                raise ValueError("segments must tile the epoch")
            if a.kind == b.kind and not (
                a.kind == WALL
                and (a.wall_x, a.back_wall_x) != (b.wall_x, b.back_wall_x)
            ):
                # two wall segments may abut when a sliver of face between two
                # corners collapses to zero width; anything else must alternate
                raise ValueError("adjacent segments must alternate kind")

    @property
    def face_enter_times(self) -> list[float]:
        return [s.t_start for s in self.segments if s.kind == FACE and s.t_start > 0]

    @property
    def face_exit_times(self) -> list[float]:
        return [s.t_end for s in self.segments if s.kind == FACE and s.t_end < self.duration]

    @property
    def event_times(self) -> list[float]:
        return sorted(self.face_enter_times + self.face_exit_times)


def _band_arrays(points: np.ndarray, splits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Building band [lo, hi) per cell; empty arrays when fewer than 2 points."""
    if len(points) < 2:
        return np.empty(0), np.empty(0)
    return splits, points[1:]


@dataclass
class UrbanGrid:
    """One sampled city: axis points, per-cell band splits, block heights.

    ``x_splits[k]`` is the boundary between the street band and the building
    band inside the cell [x_points[k], x_points[k+1]); same for Y.  Block
    (k, j) is the rectangle x in [x_splits[k], x_points[k+1]) crossed with
    y in [y_splits[j], y_points[j+1]) and has height block_heights[k, j].
    """

    params: GridParams
    seed: int
    x_points: np.ndarray
    y_points: np.ndarray
    x_splits: np.ndarray
    y_splits: np.ndarray
    block_heights: np.ndarray

    def __post_init__(self) -> None:
        for pts, spl in ((self.x_points, self.x_splits), (self.y_points, self.y_splits)):
            if len(pts) >= 2:
                if np.any(np.diff(pts) <= 0):
                    raise ValueError("axis points must be strictly increasing")
                if np.any(spl < pts[:-1]) or np.any(spl > pts[1:]):
                    raise ValueError("band split outside its cell")
        nx = max(len(self.x_points) - 1, 0)
        ny = max(len(self.y_points) - 1, 0)
        if self.block_heights.shape != (nx, ny):
            raise ValueError("height matrix shape does not match cell counts")
        if nx and ny and np.any(self.block_heights < 0):
            raise ValueError("negative building height")

    # -- band queries ---------------------------------------------------------

    def _cell_of(self, points: np.ndarray, c: float) -> int:
        """Index of the cell containing c, or -1 outside the point range."""
        if len(points) < 2 or c < points[0] or c >= points[-1]:
            return -1
        return int(np.searchsorted(points, c, side="right") - 1)

    def band_at(self, axis: str, c: float) -> tuple[str, int, float, float]:
        """("street" | "building", cell index, band_lo, band_hi) at coordinate c.

        Outside the sampled point range everything counts as street, cell -1.
        """
        points = self.x_points if axis == "x" else self.y_points
        splits = self.x_splits if axis == "x" else self.y_splits
        k = self._cell_of(points, c)
        if k < 0:
            return ("street", -1, -math.inf, math.inf)
        if c < splits[k]:
            return ("street", k, float(points[k]), float(splits[k]))
        return ("building", k, float(splits[k]), float(points[k + 1]))

    def street_width_at_y(self, y: float) -> float:
        """Width of the street band containing y; errors if y is in a building band."""
        kind, k, lo, hi = self.band_at("y", y)
        if kind != "street":
            raise UserInBuildingError(f"y = {y} lies in a building band")
        if k < 0:
            raise DegenerateGeometryError("y outside the sampled street structure")
        return hi - lo

    def is_inside_building(self, x: float, y: float) -> bool:
        kx = self.band_at("x", x)
        ky = self.band_at("y", y)
        return kx[0] == "building" and ky[0] == "building"

    def building_columns(self) -> tuple[np.ndarray, np.ndarray]:
        """(west edges, east edges) of the vertical building bands."""
        return _band_arrays(self.x_points, self.x_splits)

    def building_rows(self) -> tuple[np.ndarray, np.ndarray]:
        return _band_arrays(self.y_points, self.y_splits)

    def blocks_overlapping(
        self, x_lo: float, x_hi: float, y_lo: float, y_hi: float
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Blocks whose footprints intersect the axis-aligned box.

        Returns (west, east, south, north, height) arrays, one entry per block.
        """
        cw, ce = self.building_columns()
        rs, rn = self.building_rows()
        ci = np.nonzero((ce > x_lo) & (cw < x_hi))[0]
        rj = np.nonzero((rn > y_lo) & (rs < y_hi))[0]
        if len(ci) == 0 or len(rj) == 0:
            e = np.empty(0)
            return e, e, e, e, e
        ii, jj = np.meshgrid(ci, rj, indexing="ij")
        ii, jj = ii.ravel(), jj.ravel()
        return cw[ii], ce[ii], rs[jj], rn[jj], self.block_heights[ii, jj]

    # -- serialization --------------------------------------------------------

    def to_json(self) -> str:
        payload = {
            "format": GRID_FORMAT,
            # SeedSequence-seeded grids (Monte Carlo trials) serialize as seed 0
            "seed": self.seed if isinstance(self.seed, (int, np.integer)) else 0,
            "params": {
                "mu_b": self.params.mu_b,
                "mu_s": self.params.mu_s,
                "sigma": self.params.sigma,
                "region": list(self.params.region),
            },
            "x_points": self.x_points.tolist(),
            "y_points": self.y_points.tolist(),
            "x_splits": self.x_splits.tolist(),
            "y_splits": self.y_splits.tolist(),
            "block_heights": self.block_heights.tolist(),
        }
        return json.dumps(payload, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "UrbanGrid":
        payload = json.loads(text)
        if payload.get("format") != GRID_FORMAT:
            raise ValueError(f"unknown grid format {payload.get('format')!r}")
        p = payload["params"]
        params = GridParams(p["mu_b"], p["mu_s"], p["sigma"], tuple(p["region"]))
        nx = max(len(payload["x_points"]) - 1, 0)
        ny = max(len(payload["y_points"]) - 1, 0)
        heights = np.asarray(payload["block_heights"], dtype=float).reshape(nx, ny)
        return cls(
            params=params,
            seed=int(payload["seed"]),
            x_points=np.asarray(payload["x_points"], dtype=float),
            y_points=np.asarray(payload["y_points"], dtype=float),
            x_splits=np.asarray(payload["x_splits"], dtype=float),
            y_splits=np.asarray(payload["y_splits"], dtype=float),
            block_heights=heights,
        )


# -- sampling -----------------------------------------------------------------


def _ppp(rng: np.random.Generator, lam: float, lo: float, hi: float) -> np.ndarray:
    """Homogeneous Poisson draws on [lo, hi), sorted."""
    n = rng.poisson(lam * (hi - lo))
    return np.sort(rng.uniform(lo, hi, n))


def sample_grid(params: GridParams, seed: int | np.random.SeedSequence) -> UrbanGrid:
    """Draw one city.  Identical (params, seed) gives a bit-identical grid.

    Draw order is fixed: X count and points, Y count and points, then the
    height matrix row-major over (x cell, y cell).
    """
    rng = np.random.default_rng(seed)
    x_lo, x_hi, y_lo, y_hi = params.box
    xp = _ppp(rng, params.lam, x_lo, x_hi)
    yp = _ppp(rng, params.lam, y_lo, y_hi)
    f = params.street_fraction
    xs = xp[:-1] + f * np.diff(xp) if len(xp) >= 2 else np.empty(0)
    ys = yp[:-1] + f * np.diff(yp) if len(yp) >= 2 else np.empty(0)
    heights = rng.rayleigh(params.sigma, size=(max(len(xp) - 1, 0), max(len(yp) - 1, 0)))
    return UrbanGrid(params, seed, xp, yp, xs, ys, heights)


def sample_grid_anchored(
    params: GridParams,
    seed: int | np.random.SeedSequence,
    y_anchor: float = 0.0,
    street_width: float | None = None,
) -> UrbanGrid:
    """Draw a city conditioned so a street band starts exactly at ``y_anchor``.

    A cell boundary is pinned at y_anchor (adding one point to a Poisson
    process leaves the law of the rest unchanged), so a user standing at
    y = y_anchor is guaranteed to stand on the low edge of a street.  When
    ``street_width`` is given, that street's width is pinned to it and the
    building band behind keeps its natural width law; otherwise the anchor
    cell is split like any other cell.

    Draw order: X count and points, anchor cell gap, Y points below, Y points
    above, then heights.
    """
    rng = np.random.default_rng(seed)
    x_lo, x_hi, y_lo, y_hi = params.box
    if not (y_lo <= y_anchor < y_hi):
        raise DegenerateGridError("anchor outside the region")
    xp = _ppp(rng, params.lam, x_lo, x_hi)
    f = params.street_fraction

    gap = rng.exponential(1.0 / params.lam)
    if street_width is None:
        w = f * gap
        cell_end = y_anchor + gap
    else:
        if street_width <= 0:
            raise ValueError("street width must be positive")
        w = street_width
        cell_end = y_anchor + w + (1.0 - f) * gap
    # clip the anchor cell at the region edge so the street stays well defined
    cell_end = min(cell_end, y_hi)
    if cell_end - y_anchor <= w:
        w = cell_end - y_anchor
    below = _ppp(rng, params.lam, y_lo, y_anchor)
    above = _ppp(rng, params.lam, cell_end, y_hi) if cell_end < y_hi else np.empty(0)
    yp = np.concatenate([below, [y_anchor, cell_end], above])

    xs = xp[:-1] + f * np.diff(xp) if len(xp) >= 2 else np.empty(0)
    ys = yp[:-1] + f * np.diff(yp) if len(yp) >= 2 else np.empty(0)
    # pin the anchor cell's split to the requested street width
    if len(yp) >= 2:
        k = int(np.searchsorted(yp, y_anchor, side="right") - 1)
        if 0 <= k < len(ys):
            ys[k] = min(y_anchor + w, yp[k + 1])
    heights = rng.rayleigh(params.sigma, size=(max(len(xp) - 1, 0), max(len(yp) - 1, 0)))
    return UrbanGrid(params, seed, xp, yp, xs, ys, heights)


# -- first contact geometry ---------------------------------------------------


def model_first_contact(
    g: tuple[float, float], u: Uav, street_width: float
) -> FirstBlockSide | None:
    """First contact implied by the street geometry alone.

    The user stands on the low edge of a street of the given width and the
    building line across the street is at y = y0 + width.  Returns the
    crossing of that line (a side parallel to the X axis), or None when the
    link projection never leaves the street band, which means no contact.
    """
    x0, y0 = g
    dy = u.y - y0
    if dy <= street_width:
        return None
    s = street_width / dy
    return FirstBlockSide(x0 + (u.x - x0) * s, y0 + street_width, PARALLEL_X)


def first_block_side(grid: UrbanGrid, g: tuple[float, float], u: Uav) -> FirstBlockSide | None:
    """First building-footprint edge crossed by the projected link, if any.

    Pure 2D sweep over the realized grid, heights play no role here.  Raises
    UserInBuildingError when g is inside a footprint, DegenerateGeometryError
    when the projection leaves the region before meeting any building edge.
    """
    x0, y0 = g
    if grid.is_inside_building(x0, y0):
        raise UserInBuildingError(f"ground position {g} is inside a building")
    x1, y1 = u.x, u.y
    w, e, s, n, _ = grid.blocks_overlapping(
        min(x0, x1), max(x0, x1), min(y0, y1), max(y0, y1)
    )
    dx, dy = x1 - x0, y1 - y0
    best_t = math.inf
    best: FirstBlockSide | None = None
    for bw, be, bs, bn in zip(w, e, s, n):
        hit = _segment_box_entry(x0, y0, dx, dy, bw, be, bs, bn)
        if hit is None:
            continue
        t, px, py, orient = hit
        if t < best_t:
            best_t = t
            best = FirstBlockSide(px, py, orient)
    if best is not None:
        return best
    x_lo, x_hi, y_lo, y_hi = grid.params.box
    inside = (
        x_lo <= min(x0, x1) and max(x0, x1) <= x_hi
        and y_lo <= min(y0, y1) and max(y0, y1) <= y_hi
    )
    if not inside:
        raise DegenerateGeometryError(
            "projection leaves the modeled region before any building edge"
        )
    return None


def _segment_box_entry(
    x0: float, y0: float, dx: float, dy: float,
    bw: float, be: float, bs: float, bn: float,
) -> tuple[float, float, float, str] | None:
    """Entry of the parametric segment into a box, as (t, x, y, orientation).

    Standard slab test.  Returns None when the segment misses the box or
    starts inside it (no entry edge is crossed then).
    """
    t_lo, t_hi = 0.0, 1.0
    orient = None
    for d, p, lo, hi, o in ((dx, x0, bw, be, PARALLEL_Y), (dy, y0, bs, bn, PARALLEL_X)):
        if d == 0.0:
            if p < lo or p >= hi:
                return None
            continue
        ta, tb = (lo - p) / d, (hi - p) / d
        if ta > tb:
            ta, tb = tb, ta
        if ta > t_lo:
            t_lo, orient = ta, o
        t_hi = min(t_hi, tb)
        if t_lo > t_hi:
            return None
    if orient is None or t_lo <= 0.0:
        return None  # started inside, or slab-degenerate
    return t_lo, x0 + t_lo * dx, y0 + t_lo * dy, orient


# -- corner event sweep -------------------------------------------------------


def corner_position(corner_x: float, u: Uav, y0: float, street_width: float) -> float:
    """User x at which the projected link sweeps onto a front-line corner.

    Similar triangles through the corner at (corner_x, y0 + street_width):
    the ray from the platform through the corner meets the user's line y = y0
    at the returned x.  The user reaches it before reaching corner_x itself.
    """
    dy = u.y - y0
    if dy <= street_width:
        raise DegenerateGeometryError("platform not beyond the street's far line")
    return u.x - (u.x - corner_x) * dy / (dy - street_width)


def corner_events(grid: UrbanGrid, motion: UserMotion, u: Uav) -> SegmentPlan:
    """Segment plan for a user walking one realized street past real corners.

    The far-side corner set comes from the vertical building bands: west
    corners at the cell splits, east corners at the cell's high boundary.
    Face segments cover the spans where the front-line crossing lies inside a
    building band, wall segments the spans where it lies over a street gap
    (first contact then pinned on the next west wall).
    """
    w = grid.street_width_at_y(motion.y0)
    west, east = grid.building_columns()
    return _plan_from_columns(west, east, motion, u, w)


def _plan_from_columns(
    west: np.ndarray, east: np.ndarray, motion: UserMotion, u: Uav, street_width: float
) -> SegmentPlan:
    """Assemble the alternating segment plan from sorted column corners."""
    T = motion.duration
    x0, y0 = motion.x0, motion.y0
    dy = u.y - y0
    if dy <= street_width:
        raise DegenerateGeometryError("platform not beyond the street's far line")

    def gap_segment(t0: float, t1: float, xc: float) -> Segment:
        """Wall segment for a front-line crossing sitting over the gap at xc."""
        k = int(np.searchsorted(west, xc, side="left"))
        ahead = float(west[k]) if k < len(west) else None
        j = int(np.searchsorted(east, xc, side="right")) - 1
        back = float(east[j]) if j >= 0 else None
        if ahead is None and back is None:
            return Segment(t0, t1, OPEN)
        return Segment(t0, t1, WALL, ahead, back)

    def piece(t0: float, t1: float, x_user: float) -> Segment:
        xc = _front_cross(x_user, y0, u, street_width)
        k = int(np.searchsorted(west, xc, side="right")) - 1
        if 0 <= k < len(west) and xc < east[k]:
            return Segment(t0, t1, FACE)
        return gap_segment(t0, t1, xc)

    if motion.speed == 0.0 or T == 0.0 or len(west) == 0:
        if len(west) == 0:
            return SegmentPlan(T, [Segment(0.0, T, OPEN)])
        return SegmentPlan(T, [piece(0.0, T, x0)])

    # user positions at which the front-line crossing meets each corner
    x_end = x0 + motion.speed * T
    times = []
    for c in np.concatenate([west, east]):
        pos = corner_position(c, u, y0, street_width)
        if x0 < pos < x_end:
            times.append((pos - x0) / motion.speed)
    times.sort()

    segments: list[Segment] = []
    bounds = [0.0] + times + [T]
    for t0, t1 in zip(bounds, bounds[1:]):
        if t1 <= t0:
            continue
        # classify by the front-line crossing at the piece midpoint
        x_mid = x0 + motion.speed * 0.5 * (t0 + t1)
        segments.append(piece(t0, t1, x_mid))
    return SegmentPlan(T, _dedupe(segments, T))


def _dedupe(segments: list[Segment], T: float) -> list[Segment]:
    """Drop zero-length pieces and merge accidental same-kind neighbours."""
    out: list[Segment] = []
    for s in segments:
        if out and out[-1].kind == s.kind and (
            s.kind != WALL
            or (out[-1].wall_x == s.wall_x and out[-1].back_wall_x == s.back_wall_x)
        ):
            out[-1] = Segment(out[-1].t_start, s.t_end, s.kind, s.wall_x, s.back_wall_x)
        else:
            out.append(s)
    if not out:
        out = [Segment(0.0, T, OPEN)]
    return out


def _front_cross(x_user: float, y0: float, u: Uav, street_width: float) -> float:
    """X where the projected link crosses the building front line y = y0 + w."""
    return x_user + (u.x - x_user) * street_width / (u.y - y0)
