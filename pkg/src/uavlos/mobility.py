"""Expected line-of-sight time of a moving user over one epoch.

The epoch [0, T] splits into segments on which the first-contact side of the
projected link does not change.  While the contact slides along a building
front line the contact fraction is constant, the clear probability is a pure
exponential in time and its integral is closed form.  While the contact is
pinned on a vertical wall the fraction drifts and the integral is taken with
the three point Simpson rule (a dense composite rule is kept alongside as the
error reference).  The epoch expectation weights the per-crossing-count plans
by a truncated Poisson law over the number of streets the user passes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import HeightModel, RayleighHeights, p_los_static, void_rate, wall_contact
from .env import (
    FACE,
    WALL,
    DegenerateGeometryError,
    Segment,
    SegmentPlan,
    Uav,
    UserMotion,
    _front_cross,
    _plan_from_columns,
    corner_position,
)

SERIES_SWITCH = 1e-8  # |rate * v * t| below this takes the series form
NUDGE = 1e-9  # relative node shift off a removable singular instant


def p_los_x_segment(t: float, base: float, rate: float, v: float) -> float:
    """Clear probability t seconds into a front-line sliding segment.

    ``base * exp(rate * v * t)``: the form for a user receding from the
    platform, where the void exponent grows linearly with the walked
    distance.  Approaching callers pass the sign through ``rate``.
    """
    return base * math.exp(rate * v * t)


def expected_los_x_segment(base: float, rate: float, v: float, t_len: float) -> float:
    """Integral of base * exp(rate * v * t) over [0, t_len].

    Closed form base * (exp(rate v T) - 1) / (rate v); switches to the series
    base * T * (1 + rate v T / 2) when |rate v T| < 1e-8, which covers the
    standing-still case exactly (base * T).
    """
    x = rate * v * t_len
    if abs(x) < SERIES_SWITCH:
        return base * t_len * (1.0 + 0.5 * x)
    return base * math.expm1(x) / (rate * v)


@dataclass
class EpochGeometry:
    """Everything the segment evaluators need about one user-platform pair."""

    motion: UserMotion
    u: Uav
    street_width: float
    lam: float
    model: HeightModel

    @property
    def dy(self) -> float:
        return self.u.y - self.motion.y0


@dataclass
class WallSweep:
    """A wall-pinned sweep starting at x_start, local time tau in [0, t_len].

    Which wall the link meets flips when the user passes under the platform's
    x: ahead of it the west corner ``wall_ahead``, behind it the east corner
    ``wall_back``.  A missing or unreachable wall means no contact, so the
    clear probability there is 1.
    """

    x_start: float
    y0: float
    v: float
    u: Uav
    lam: float
    model: HeightModel
    wall_ahead: float | None = None
    wall_back: float | None = None

    def p(self, tau: float) -> float:
        x_t = self.x_start + self.v * tau
        dx = self.u.x - x_t
        wall = self.wall_ahead if dx > 0 else self.wall_back if dx < 0 else None
        if wall is None:
            return 1.0
        c = wall_contact((x_t, self.y0), self.u, wall)
        if c is None:
            return 1.0
        return p_los_static((x_t, self.y0), self.u, None, self.lam, self.model, contact=c)

    def singular_time(self) -> float | None:
        """Instant the user passes under the platform's x, if any motion."""
        if self.v == 0.0:
            return None
        return (self.u.x - self.x_start) / self.v


def p_los_y_segment(t: float, sweep: WallSweep) -> float:
    """Clear probability t seconds into a wall-pinned segment."""
    return sweep.p(t)


def _nudged(node: float, t_len: float, t_sing: float | None) -> float:
    """Shift a quadrature node off the removable singular instant."""
    if t_sing is None:
        return node
    eps = NUDGE * t_len
    if abs(node - t_sing) < eps:
        return node + eps if node + eps <= t_len else node - eps
    return node


def expected_los_y_segment(sweep: WallSweep, t_len: float) -> float:
    """Three point Simpson estimate of the wall-segment clear time."""
    if t_len <= 0.0:
        return 0.0
    ts = sweep.singular_time()
    n0 = _nudged(0.0, t_len, ts)
    n1 = _nudged(0.5 * t_len, t_len, ts)
    n2 = _nudged(t_len, t_len, ts)
    return (t_len / 6.0) * (sweep.p(n0) + 4.0 * sweep.p(n1) + sweep.p(n2))


def expected_los_y_segment_reference(
    sweep: WallSweep, t_len: float, nodes: int = 129
) -> float:
    """Composite Simpson on >= 129 nodes, the error reference for the 3 point rule."""
    if t_len <= 0.0:
        return 0.0
    if nodes < 129:
        nodes = 129
    if nodes % 2 == 0:
        nodes += 1
    ts = sweep.singular_time()
    xs = np.linspace(0.0, t_len, nodes)
    ps = np.array([sweep.p(_nudged(float(x), t_len, ts)) for x in xs])
    h = t_len / (nodes - 1)
    return float(h / 3.0 * (ps[0] + ps[-1] + 4.0 * ps[1:-1:2].sum() + 2.0 * ps[2:-2:2].sum()))


def simpson_residual(sweep: WallSweep, t_len: float) -> float:
    """Absolute gap between the 3 point rule and the dense reference."""
    return abs(expected_los_y_segment(sweep, t_len) - expected_los_y_segment_reference(sweep, t_len))


def _face_expectation(geom: EpochGeometry, t_start: float, t_len: float) -> float:
    """Exact clear-time integral over one front-line sliding segment.

    The contact fraction is constant, so P(t) = P(start) scaled by the void
    exponent's linear drift: decaying while the user recedes from the
    platform in x, growing while approaching, with an exact split at the
    instant the user passes underneath.
    """
    m, u = geom.motion, geom.u
    x_start = m.x0 + m.speed * t_start
    base = p_los_static((x_start, m.y0), u, geom.street_width, geom.lam, geom.model)
    if t_len <= 0.0:
        return 0.0
    if m.speed == 0.0 or base == 0.0:
        return base * t_len
    s = geom.street_width / geom.dy if geom.dy > geom.street_width else None
    if s is None:
        return base * t_len  # no contact, base is 1
    rate = void_rate(s, geom.lam, geom.model, u.height)
    t_star = (u.x - x_start) / m.speed
    if t_star <= 0.0:
        return expected_los_x_segment(base, rate, m.speed, t_len)
    if t_star >= t_len:
        return expected_los_x_segment(base, -rate, m.speed, t_len)
    # approach up to the pass-under instant, then recede
    e1 = expected_los_x_segment(base, -rate, m.speed, t_star)
    base_mid = p_los_x_segment(t_star, base, -rate, m.speed)
    e2 = expected_los_x_segment(base_mid, rate, m.speed, t_len - t_star)
    return e1 + e2


def _wall_sweep(geom: EpochGeometry, seg: Segment) -> WallSweep:
    m = geom.motion
    return WallSweep(
        x_start=m.x0 + m.speed * seg.t_start,
        y0=m.y0,
        v=m.speed,
        u=geom.u,
        lam=geom.lam,
        model=geom.model,
        wall_ahead=seg.wall_x,
        wall_back=seg.back_wall_x,
    )


def expected_los_piecewise(
    plan: SegmentPlan, geom: EpochGeometry, detail: bool = False
):
    """Expected clear seconds over the whole epoch, segment by segment.

    Front-line segments integrate in closed form from a freshly evaluated
    start probability; wall segments take the 3 point Simpson rule; open
    segments contribute their full length.  With ``detail`` a list of
    (segment, contribution, simpson residual) comes back alongside the total.
    """
    total = 0.0
    rows = []
    for seg in plan.segments:
        if seg.kind == FACE:
            c = _face_expectation(geom, seg.t_start, seg.length)
            resid = 0.0
        elif seg.kind == WALL:
            sweep = _wall_sweep(geom, seg)
            c = expected_los_y_segment(sweep, seg.length)
            resid = simpson_residual(sweep, seg.length) if detail else 0.0
        else:
            c = seg.length
            resid = 0.0
        total += float(c)
        if detail:
            rows.append((seg, float(c), resid))
    if detail:
        return total, rows
    return total


# -- crossing-count marginalization -------------------------------------------


def poisson_truncation_count(lam: float, v: float, T: float, epsilon: float) -> int:
    """Smallest N with Poisson(lam v T) mass at least 1 - epsilon on {0..N}.

    Stable recurrence on the pmf terms, no factorials.
    """
    if not (0.0 < epsilon < 1.0):
        raise ValueError("epsilon must be in (0, 1)")
    mu = lam * v * T
    if mu < 0:
        raise ValueError("negative event rate")
    term = math.exp(-mu)
    cdf = term
    n = 0
    while cdf < 1.0 - epsilon:
        n += 1
        term *= mu / n
        cdf += term
        if n > 100_000:
            raise RuntimeError("truncation search did not converge")
    return n


def _poisson_weights(mu: float, n_max: int) -> list[float]:
    term = math.exp(-mu)
    out = [term]
    for n in range(1, n_max + 1):
        term *= mu / n
        out.append(term)
    return out


def canonical_plan(
    mu_b: float,
    mu_s: float,
    motion: UserMotion,
    u: Uav,
    street_width: float,
    crossings: int,
) -> SegmentPlan:
    """Representative segment plan for a given number of street crossings.

    The far side of the user's street is laid out as repeating periods of one
    mean street gap followed by one mean building face.  The layout is slid
    so the first face-enter event lands at T / (crossings + 1), the mean
    first arrival of a Poisson process conditioned on that many arrivals in
    the epoch; every corner passage inside the epoch then becomes an event.
    Zero crossings means the contact never leaves its face.
    """
    if crossings < 0:
        raise ValueError("crossing count must be nonnegative")
    T = motion.duration
    if crossings == 0 or motion.speed == 0.0 or T == 0.0:
        return SegmentPlan(T, [Segment(0.0, T, FACE)])
    dy = u.y - motion.y0
    if dy <= street_width:
        raise DegenerateGeometryError("platform not beyond the street's far line")
    t_first = T / (crossings + 1)
    enter_x = motion.x0 + motion.speed * t_first
    first_west = u.x - (u.x - enter_x) * (dy - street_width) / dy
    period = mu_b + mu_s

    xc0 = _front_cross(motion.x0, motion.y0, u, street_width)
    xc1 = _front_cross(motion.x0 + motion.speed * T, motion.y0, u, street_width)
    lo, hi = min(xc0, xc1), max(xc0, xc1)
    k_min = math.floor((lo - first_west) / period) - 1
    k_max = math.ceil((hi - first_west) / period) + 1
    west = first_west + period * np.arange(k_min, k_max + 1, dtype=float)
    east = west + mu_b
    return _plan_from_columns(west, east, motion, u, street_width)


def sampled_plan(
    mu_b: float,
    mu_s: float,
    motion: UserMotion,
    u: Uav,
    street_width: float,
    crossings: int,
    rng: np.random.Generator,
    max_attempts: int = 5000,
) -> SegmentPlan:
    """Far-side layout drawn from the street process, conditioned by rejection
    on exactly ``crossings`` face-enter events inside the epoch.
    """
    T = motion.duration
    if motion.speed == 0.0 or T == 0.0:
        return SegmentPlan(T, [Segment(0.0, T, FACE)])
    dy = u.y - motion.y0
    if dy <= street_width:
        raise DegenerateGeometryError("platform not beyond the street's far line")
    lam = 1.0 / (mu_b + mu_s)
    f = mu_s / (mu_b + mu_s)
    xc0 = _front_cross(motion.x0, motion.y0, u, street_width)
    xc1 = _front_cross(motion.x0 + motion.speed * T, motion.y0, u, street_width)
    lo = min(xc0, xc1) - 8.0 * (mu_b + mu_s)
    hi = max(xc0, xc1) + 8.0 * (mu_b + mu_s)
    x_end = motion.x0 + motion.speed * T
    for _ in range(max_attempts):
        n = rng.poisson(lam * (hi - lo))
        pts = np.sort(rng.uniform(lo, hi, n))
        if len(pts) < 2:
            continue
        west = pts[:-1] + f * np.diff(pts)
        east = pts[1:]
        enters = 0
        for c in west:
            pos = corner_position(float(c), u, motion.y0, street_width)
            if motion.x0 < pos < x_end:
                enters += 1
        if enters == crossings:
            return _plan_from_columns(west, east, motion, u, street_width)
    raise RuntimeError(
        f"could not draw a layout with {crossings} crossings in {max_attempts} attempts"
    )


@dataclass
class ExpectedLosResult:
    """Crossing-count marginalized expectation and its ingredients."""

    expected_time: float
    truncation_count: int
    per_count: list[float]
    weights: list[float]
    epsilon: float
    layout: str


def expected_los_total(
    params,
    motion: UserMotion,
    u: Uav,
    epsilon: float = 1e-3,
    street_width: float | None = None,
    model: HeightModel | None = None,
    layout: str = "canonical",
    n_layouts: int = 48,
    layout_seed: int = 0,
) -> ExpectedLosResult:
    """Expected clear seconds over [0, T], marginalized over crossing counts.

    ``params`` supplies mu_b, mu_s, sigma and the derived axis density; the
    user street width defaults to the mean street width.  ``layout`` picks
    how the per-count plans are built: "canonical" for the deterministic
    representative layout, "sampled" to average ``n_layouts`` conditioned
    draws per count.
    """
    if layout not in ("canonical", "sampled"):
        raise ValueError(f"unknown layout mode {layout!r}")
    w = params.mu_s if street_width is None else street_width
    m = RayleighHeights(params.sigma) if model is None else model
    lam = params.lam
    T = motion.duration
    geom = EpochGeometry(motion, u, w, lam, m)

    if T == 0.0:
        return ExpectedLosResult(0.0, 0, [], [], epsilon, layout)
    if u.y - motion.y0 <= w:
        # platform over the user's own street: the projection never leaves it
        return ExpectedLosResult(T, 0, [T], [1.0], epsilon, layout)

    n_max = poisson_truncation_count(lam, motion.speed, T, epsilon)
    mu = lam * motion.speed * T
    weights = _poisson_weights(mu, n_max)
    per_count: list[float] = []
    for count in range(n_max + 1):
        if layout == "canonical":
            plan = canonical_plan(params.mu_b, params.mu_s, motion, u, w, count)
            per_count.append(expected_los_piecewise(plan, geom))
        else:
            acc = 0.0
            for i in range(n_layouts):
                rng = np.random.default_rng(
                    np.random.SeedSequence([layout_seed, count, i])
                )
                try:
                    plan = sampled_plan(
                        params.mu_b, params.mu_s, motion, u, w, count, rng
                    )
                except RuntimeError:
                    # deep-tail counts are vanishingly rare under the street
                    # process; their weight is negligible, the canonical
                    # layout stands in
                    plan = canonical_plan(params.mu_b, params.mu_s, motion, u, w, count)
                acc += expected_los_piecewise(plan, geom)
            per_count.append(acc / n_layouts)
    wsum = sum(weights)
    expected = sum(wt * e for wt, e in zip(weights, per_count)) / wsum
    return ExpectedLosResult(expected, n_max, per_count, weights, epsilon, layout)
