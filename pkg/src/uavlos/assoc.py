"""User to platform association policies and their paired evaluation.

Two policies.  The mobility-aware one scores every user/platform pair by the
closed-form expected clear seconds over the epoch (truncated to the time the
walk stays inside the platform's range disk) and assigns greedily from the
best score down, one user per platform.  The benchmark ignores mobility: on
each realized city it gives every user, in id order, the nearest free
platform in 3D distance that is within range and actually clear at the start
of the walk.  Both are scored by realized clear seconds on shared city draws
so their difference is a paired statistic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .env import GridParams, Uav, UrbanGrid, UserMotion, sample_grid_anchored
from .mobility import expected_los_total
from .oracle import FLIP_TOL, TrialStats, coverage_time, is_los, los_time


@dataclass
class Assignment:
    """Platform index per user, None for an unassigned user; one user per platform."""

    pairs: list[int | None]

    def __post_init__(self) -> None:
        used = [k for k in self.pairs if k is not None]
        if len(used) != len(set(used)):
            raise ValueError("a platform is assigned to more than one user")

    def assigned(self) -> list[tuple[int, int]]:
        return [(j, k) for j, k in enumerate(self.pairs) if k is not None]


def _dist3d(m: UserMotion, u: Uav) -> float:
    return math.hypot(m.x0 - u.x, m.y0 - u.y, u.height)


def pair_score(
    params: GridParams,
    motion: UserMotion,
    u: Uav,
    epsilon: float = 1e-3,
    street_width: float | None = None,
) -> float:
    """Expected clear seconds for one pair, over the in-range part of the walk."""
    horizon = coverage_time(motion, u)
    if horizon <= 0.0:
        return 0.0
    clipped = replace(motion, duration=horizon)
    return expected_los_total(
        params, clipped, u, epsilon=epsilon, street_width=street_width
    ).expected_time


def assign_max_expected_los(
    users: list[UserMotion],
    uavs: list[Uav],
    params: GridParams,
    epsilon: float = 1e-3,
    street_width: float | None = None,
) -> Assignment:
    """Greedy assignment from the globally best expected clear time down.

    Ties take the lower user id, then the lower platform id.  A pair with a
    zero score is never assigned, so an all-blocked or out-of-range user
    stays unassigned.
    """
    scored = []
    for j, m in enumerate(users):
        for k, u in enumerate(uavs):
            s = pair_score(params, m, u, epsilon, street_width)
            if s > 0.0:
                scored.append((-s, j, k))
    scored.sort()
    pairs: list[int | None] = [None] * len(users)
    taken = set()
    for neg, j, k in scored:
        if pairs[j] is None and k not in taken:
            pairs[j] = k
            taken.add(k)
    return Assignment(pairs)


def assign_nearest_los(
    users: list[UserMotion], uavs: list[Uav], grid: UrbanGrid
) -> Assignment:
    """Static benchmark on one realized city, users served in id order.

    Each user takes the nearest free platform by 3D distance among those
    within range and clear on the realized city at the start of the walk;
    distance ties take the lower platform id.
    """
    pairs: list[int | None] = [None] * len(users)
    taken: set[int] = set()
    for j, m in enumerate(users):
        best: tuple[float, int] | None = None
        for k, u in enumerate(uavs):
            if k in taken:
                continue
            d = _dist3d(m, u)
            if d > u.link_range:
                continue
            if not is_los(grid, (m.x0, m.y0), u):
                continue
            if best is None or (d, k) < best:
                best = (d, k)
        if best is not None:
            pairs[j] = best[1]
            taken.add(best[1])
    return Assignment(pairs)


def realized_value(
    assignment: Assignment,
    grid: UrbanGrid,
    users: list[UserMotion],
    uavs: list[Uav],
    tol: float = FLIP_TOL,
) -> float:
    """Total realized clear seconds of an assignment on one city.

    Each served user contributes the clear time of its walk, truncated to the
    stretch the platform stays in range.
    """
    total = 0.0
    for j, k in assignment.assigned():
        u = uavs[k]
        horizon = coverage_time(users[j], u)
        if horizon <= 0.0:
            continue
        total += los_time(grid, replace(users[j], duration=horizon), u, tol)
    return total


def _shared_street(users: list[UserMotion]) -> float:
    ys = {m.y0 for m in users}
    if len(ys) != 1:
        raise ValueError(
            "evaluation draws cities anchored on the users' street, "
            "so all users must walk the same y"
        )
    return ys.pop()


def _trial_grid(
    params: GridParams, seed: int, trial: int, y_anchor: float, width: float
) -> UrbanGrid:
    ss = np.random.SeedSequence([seed, trial])
    return sample_grid_anchored(params, ss, y_anchor=y_anchor, street_width=width)


def evaluate_assignment(
    assignment: Assignment,
    params: GridParams,
    users: list[UserMotion],
    uavs: list[Uav],
    trials: int,
    seed: int,
    street_width: float | None = None,
    tol: float = FLIP_TOL,
) -> TrialStats:
    """Realized total clear seconds of a fixed assignment over fresh city draws."""
    y0 = _shared_street(users)
    w = params.mu_s if street_width is None else street_width
    vals = np.empty(trials)
    for i in range(trials):
        grid = _trial_grid(params, seed, i, y0, w)
        vals[i] = realized_value(assignment, grid, users, uavs, tol)
    return TrialStats(vals)


@dataclass
class PolicyComparison:
    """Paired totals of the mobility-aware policy and the static benchmark."""

    proposed: TrialStats
    benchmark: TrialStats

    @property
    def difference(self) -> TrialStats:
        """Per-trial proposed minus benchmark; its CI is the paired interval."""
        return TrialStats(self.proposed.values - self.benchmark.values)


def compare_policies(
    params: GridParams,
    users: list[UserMotion],
    uavs: list[Uav],
    trials: int,
    seed: int,
    epsilon: float = 1e-3,
    street_width: float | None = None,
    tol: float = FLIP_TOL,
) -> PolicyComparison:
    """Score both policies on identical city draws.

    The mobility-aware assignment is fixed up front (it uses no realized
    geometry); the benchmark re-assigns on every draw since it reads the
    realized start-of-walk blockage.
    """
    y0 = _shared_street(users)
    w = params.mu_s if street_width is None else street_width
    fixed = assign_max_expected_los(users, uavs, params, epsilon, street_width)
    va = np.empty(trials)
    vb = np.empty(trials)
    for i in range(trials):
        grid = _trial_grid(params, seed, i, y0, w)
        va[i] = realized_value(fixed, grid, users, uavs, tol)
        bench = assign_nearest_los(users, uavs, grid)
        vb[i] = realized_value(bench, grid, users, uavs, tol)
    return PolicyComparison(TrialStats(va), TrialStats(vb))
