"""Experiment runner: presets, JSON configs, seeded sweeps, CSV emission.

Four sweep families: platform height at a fixed 3D start distance, built-to-
street ratio at two street widths, walking speed, and the association policy
comparison.  Every run is reproducible: identical config and seed give a
byte-identical CSV (the runtime column is left blank unless --timing is on,
and the header carries a hash of the resolved config).  ``validate`` runs the
cross-module consistency suites and exits nonzero on any failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from dataclasses import dataclass, field, fields, replace

from .assoc import assign_max_expected_los, compare_policies, pair_score
from .env import GridParams, Uav, UserMotion, sample_grid, sample_grid_anchored
from .mobility import expected_los_total
from .oracle import coverage_time, monte_carlo_expected_los

# Table I presets: (mean building height, mean building width, mean street width)
PRESETS = {
    "suburban": (10.0, 37.0, 10.0),
    "urban": (19.0, 45.0, 13.0),
    "dense_urban": (25.0, 60.0, 20.0),
}

SWEEPS = ("uav_height", "building_ratio", "velocity", "association")

CSV_COLUMNS = (
    "sweep",
    "value",
    "variant",
    "analytic_s",
    "mc_mean_s",
    "mc_stderr_s",
    "trials",
    "runtime_ms",
)

DEFAULT_VALUES = {
    "uav_height": [60.0, 70.0, 80.0, 90.0, 100.0, 110.0, 120.0, 130.0, 140.0, 150.0],
    "building_ratio": [1.0, 1.5, 2.0, 3.0, 4.0, 6.0, 9.0],
    "velocity": [0.5, 1.0, 2.0, 4.0, 8.0, 12.0, 16.0, 20.0, 25.0, 30.0, 40.0],
    "association": [1.0, 2.0, 5.0, 10.0, 15.0, 20.0, 25.0],
}


class ConfigError(ValueError):
    """Bad experiment configuration; reported before any compute, exit code 2."""


@dataclass
class ExperimentConfig:
    """One experiment: a preset or custom grid, a sweep family, and run knobs."""

    sweep: str
    preset: str = "urban"
    values: list[float] = field(default_factory=list)
    trials: int = 10_000
    seed: int = 0
    epsilon: float = 1e-3
    sigma: float = 8.0
    region: tuple[float, float] = (400.0, 400.0)
    duration: float = 10.0
    speed: float = 15.0
    out: str | None = None
    # custom preset grid means
    mu_b: float | None = None
    mu_s: float | None = None
    # platform placement for the height/ratio/velocity sweeps
    uav_height: float = 100.0
    uav_dx: float = 120.0
    uav_dy: float = 90.0
    link_range: float = math.inf
    # height sweep: fixed 3D start distance, horizontal x offset adjusts per height
    initial_distance: float | None = None
    # ratio sweep: one curve per user street width
    street_widths: list[float] = field(default_factory=lambda: [10.0, 20.0])
    # association sweep: walkers on one street, a trailing and a leading
    # platform per walker at the given x offsets
    user_xs: list[float] = field(default_factory=lambda: [-170.0, -55.0])
    uav_behind_dx: float = -25.0
    uav_ahead_dx: float = 60.0

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "sweep" not in raw:
            raise ConfigError("config needs a 'sweep' key")
        raw = dict(raw)
        if raw.get("link_range") is None and "link_range" in raw:
            raw["link_range"] = math.inf
        if "region" in raw:
            raw["region"] = tuple(raw["region"])
        cfg = cls(**raw)
        cfg.check()
        return cfg

    def check(self) -> None:
        if self.sweep not in SWEEPS:
            raise ConfigError(f"sweep must be one of {SWEEPS}, got {self.sweep!r}")
        if self.preset not in PRESETS and self.preset != "custom":
            raise ConfigError(f"unknown preset {self.preset!r}")
        if self.preset == "custom" and (self.mu_b is None or self.mu_s is None):
            raise ConfigError("custom preset needs mu_b and mu_s")
        if not self.values:
            self.values = list(DEFAULT_VALUES[self.sweep])
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ConfigError("sweep values must be strictly increasing")
        if self.trials < 1:
            raise ConfigError("trials must be positive")
        if not (0.0 < self.epsilon < 1.0):
            raise ConfigError("epsilon must be in (0, 1)")
        if self.sigma <= 0 or self.duration < 0 or self.speed < 0:
            raise ConfigError("sigma must be positive, duration and speed nonnegative")
        if self.sweep == "uav_height":
            if self.initial_distance is None:
                raise ConfigError("uav_height sweep needs initial_distance")
            for h in self.values:
                if h * h + self.uav_dy**2 >= self.initial_distance**2:
                    raise ConfigError(
                        f"height {h} incompatible with initial_distance "
                        f"{self.initial_distance} at uav_dy {self.uav_dy}"
                    )
        if self.sweep == "building_ratio":
            if any(r <= 0 for r in self.values):
                raise ConfigError("building ratios must be positive")
            if any(w <= 0 for w in self.street_widths):
                raise ConfigError("street widths must be positive")
        if self.sweep == "association" and not self.user_xs:
            raise ConfigError("association sweep needs user_xs")

    def grid_params(self, mu_b: float | None = None, mu_s: float | None = None) -> GridParams:
        if mu_b is None or mu_s is None:
            if self.preset == "custom":
                mu_b, mu_s = self.mu_b, self.mu_s
            else:
                _, mu_b, mu_s = PRESETS[self.preset]
        return GridParams(mu_b, mu_s, self.sigma, self.region)

    def resolved(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = list(v)
            if v is math.inf:
                v = "inf"
            out[f.name] = v
        out.pop("out")
        return out


def config_hash(cfg: ExperimentConfig) -> str:
    blob = json.dumps(cfg.resolved(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class ResultRow:
    sweep: str
    value: float
    variant: str
    analytic_s: float | None
    mc_mean_s: float | None
    mc_stderr_s: float | None
    trials: int
    runtime_ms: float | None

    def csv_cells(self, timing: bool) -> list[str]:
        def num(x, spec=".10g"):
            return "" if x is None else format(x, spec)

        ms = num(self.runtime_ms, ".1f") if timing else ""
        return [
            self.sweep,
            num(self.value),
            self.variant,
            num(self.analytic_s),
            num(self.mc_mean_s),
            num(self.mc_stderr_s),
            str(self.trials),
            ms,
        ]


def _clipped_motion(cfg: ExperimentConfig, speed: float, u: Uav) -> UserMotion:
    m = UserMotion(0.0, 0.0, speed, cfg.duration)
    return replace(m, duration=coverage_time(m, u))


def _paired_point(
    cfg: ExperimentConfig, params: GridParams, u: Uav, speed: float, value: float,
    variant: str = "",
) -> ResultRow:
    t0 = time.perf_counter()
    motion = _clipped_motion(cfg, speed, u)
    if motion.duration <= 0.0:
        return ResultRow(cfg.sweep, value, variant, 0.0, 0.0, 0.0, cfg.trials, 0.0)
    ana = expected_los_total(params, motion, u, epsilon=cfg.epsilon).expected_time
    mc = monte_carlo_expected_los(params, motion, u, cfg.trials, cfg.seed)
    ms = (time.perf_counter() - t0) * 1000.0
    return ResultRow(cfg.sweep, value, variant, ana, mc.mean, mc.stderr, cfg.trials, ms)


def _run_uav_height(cfg: ExperimentConfig) -> list[ResultRow]:
    params = cfg.grid_params()
    rows = []
    for h in cfg.values:
        dx = math.sqrt(cfg.initial_distance**2 - h * h - cfg.uav_dy**2)
        u = Uav(dx, cfg.uav_dy, h, link_range=cfg.link_range)
        rows.append(_paired_point(cfg, params, u, cfg.speed, h))
    return rows


def _run_building_ratio(cfg: ExperimentConfig) -> list[ResultRow]:
    u = Uav(cfg.uav_dx, cfg.uav_dy, cfg.uav_height, link_range=cfg.link_range)
    rows = []
    for w in cfg.street_widths:
        for r in cfg.values:
            params = cfg.grid_params(mu_b=r * w, mu_s=w)
            rows.append(_paired_point(cfg, params, u, cfg.speed, r, f"w={w:g}"))
    return rows


def _run_velocity(cfg: ExperimentConfig) -> list[ResultRow]:
    params = cfg.grid_params()
    u = Uav(cfg.uav_dx, cfg.uav_dy, cfg.uav_height, link_range=cfg.link_range)
    return [_paired_point(cfg, params, u, v, v) for v in cfg.values]


def _association_layout(cfg: ExperimentConfig) -> list[Uav]:
    uavs = []
    for x0 in cfg.user_xs:
        uavs.append(Uav(x0 + cfg.uav_behind_dx, cfg.uav_dy, cfg.uav_height, cfg.link_range))
        uavs.append(Uav(x0 + cfg.uav_ahead_dx, cfg.uav_dy, cfg.uav_height, cfg.link_range))
    return uavs


def _run_association(cfg: ExperimentConfig) -> list[ResultRow]:
    params = cfg.grid_params()
    uavs = _association_layout(cfg)
    rows = []
    for v in cfg.values:
        t0 = time.perf_counter()
        users = [UserMotion(x0, 0.0, v, cfg.duration) for x0 in cfg.user_xs]
        fixed = assign_max_expected_los(users, uavs, params, cfg.epsilon)
        predicted = sum(
            pair_score(params, users[j], uavs[k], cfg.epsilon) for j, k in fixed.assigned()
        )
        cmp = compare_policies(params, users, uavs, cfg.trials, cfg.seed, cfg.epsilon)
        ms = (time.perf_counter() - t0) * 1000.0
        d = cmp.difference
        rows.append(ResultRow(cfg.sweep, v, "proposed", predicted,
                              cmp.proposed.mean, cmp.proposed.stderr, cfg.trials, ms))
        rows.append(ResultRow(cfg.sweep, v, "benchmark", None,
                              cmp.benchmark.mean, cmp.benchmark.stderr, cfg.trials, None))
        rows.append(ResultRow(cfg.sweep, v, "difference", None,
                              d.mean, d.stderr, cfg.trials, None))
    return rows


RUNNERS = {
    "uav_height": _run_uav_height,
    "building_ratio": _run_building_ratio,
    "velocity": _run_velocity,
    "association": _run_association,
}


def run_experiment(cfg: ExperimentConfig, out_path: str | None, timing: bool) -> None:
    """Execute the configured sweep and write the CSV (stdout if no path)."""
    rows = RUNNERS[cfg.sweep](cfg)
    lines = [f"# uavlos-results-v1 config={config_hash(cfg)} "
             f"preset={cfg.preset} sweep={cfg.sweep}"]
    lines.append(",".join(CSV_COLUMNS))
    lines.extend(",".join(r.csv_cells(timing)) for r in rows)
    text = "\n".join(lines) + "\n"
    if out_path is None:
        sys.stdout.write(text)
    else:
        with open(out_path, "w") as fh:
            fh.write(text)


# -- validation suites --------------------------------------------------------


def _check(name: str, ok: bool, detail: str) -> tuple[str, bool, str]:
    return (name, ok, detail)


def _suite_quadrature() -> list[tuple[str, bool, str]]:
    # closed-form segment expectation against adaptive quadrature
    import numpy as np
    from scipy.integrate import quad

    from .mobility import expected_los_x_segment, p_los_x_segment

    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(1000):
        base = float(rng.uniform(0.05, 1.0))
        rate = float(rng.uniform(-0.05, 0.05)) or 1e-4
        v = float(rng.uniform(0.1, 40.0))
        t_len = float(rng.uniform(0.01, 10.0))
        closed = expected_los_x_segment(base, rate, v, t_len)
        ref, _ = quad(p_los_x_segment, 0.0, t_len, args=(base, rate, v), epsabs=1e-13)
        worst = max(worst, abs(closed - ref) / abs(ref))
    return [_check("quadrature/segment-closed-form", worst <= 1e-9,
                   f"max_rel_err={worst:.3e} n=1000")]

def _suite_mc_agreement() -> list[tuple[str, bool, str]]:
    checks = []
    # street so wide the link never leaves it: both sides exactly T
    wide = GridParams(20.0, 1e6, 8.0)
    u = Uav(70.0, 45.0, 100.0)
    motion = UserMotion(0.0, 0.0, 15.0, 10.0)
    ana = expected_los_total(wide, motion, u).expected_time
    mc = monte_carlo_expected_los(wide, motion, u, trials=200, seed=7)
    exact = ana == motion.duration and mc.mean == motion.duration
    checks.append(_check("mc-agreement/no-building-limit", exact,
                         f"analytic={ana!r} mc={mc.mean!r}"))
    # moderate urban case within the acceptance gate at reduced trials
    params = GridParams(45.0, 13.0, 8.0)
    u = Uav(70.0, 45.0, 100.0)
    ana = expected_los_total(params, motion, u).expected_time
    mc = monte_carlo_expected_los(params, motion, u, trials=1500, seed=7)
    gap = abs(ana - mc.mean)
    ok = gap <= max(0.05 * mc.mean, 3.0 * mc.stderr)
    checks.append(_check("mc-agreement/urban-h100", ok,
                         f"analytic={ana:.4f} mc={mc.mean:.4f} stderr={mc.stderr:.4f}"))
    return checks


def _suite_assoc() -> list[tuple[str, bool, str]]:
    import numpy as np

    from .assoc import assign_nearest_los, realized_value
    from .env import Uav as UavT

    checks = []
    params = GridParams(45.0, 13.0, 8.0)
    # one user, one platform over the user's own street: no blockage is
    # possible, so both policies must assign it on every draw
    user = [UserMotion(0.0, 0.0, 15.0, 10.0)]
    uav = [UavT(10.0, 8.0, 100.0)]
    fixed = assign_max_expected_los(user, uav, params)
    same = fixed.pairs == [0]
    diffs = []
    for i in range(50):
        grid = sample_grid_anchored(params, np.random.SeedSequence([13, i]), 0.0, params.mu_s)
        bench = assign_nearest_los(user, uav, grid)
        same = same and bench.pairs == [0]
        diffs.append(realized_value(fixed, grid, user, uav)
                     - realized_value(bench, grid, user, uav))
    zero = all(d == 0.0 for d in diffs)
    checks.append(_check("assoc/1x1-identical", same and zero,
                         f"identical={same} max_abs_diff={max(map(abs, diffs)):g}"))
    # capacity and uniqueness on a crowded instance
    users = [UserMotion(x, 0.0, 15.0, 10.0) for x in (-60.0, -20.0, 20.0)]
    uavs = [UavT(x, 45.0, 100.0) for x in (-40.0, 30.0)]
    a = assign_max_expected_los(users, uavs, params)
    used = [k for k in a.pairs if k is not None]
    checks.append(_check("assoc/capacity", len(used) == len(set(used)) and len(used) <= 2,
                         f"pairs={a.pairs}"))
    # nearest policy against an exhaustive search on one realized city
    grid = sample_grid_anchored(params, 99, 0.0, params.mu_s)
    bench = assign_nearest_los(users, uavs, grid)
    from .oracle import is_los

    taken: set[int] = set()
    expect: list[int | None] = []
    for m in users:
        cands = []
        for k, u2 in enumerate(uavs):
            if k in taken:
                continue
            d = math.hypot(m.x0 - u2.x, m.y0 - u2.y, u2.height)
            if d <= u2.link_range and is_los(grid, (m.x0, m.y0), u2):
                cands.append((d, k))
        pick = min(cands)[1] if cands else None
        expect.append(pick)
        if pick is not None:
            taken.add(pick)
    checks.append(_check("assoc/nearest-brute-force", bench.pairs == expect,
                         f"policy={bench.pairs} brute={expect}"))
    return checks


SUITES = {
    "quadrature": _suite_quadrature,
    "mc-agreement": _suite_mc_agreement,
    "assoc": _suite_assoc,
}


def run_validate(suite: str) -> int:
    names = list(SUITES) if suite == "all" else [suite]
    failed = 0
    for name in names:
        for check, ok, detail in SUITES[name]():
            print(f"{'PASS' if ok else 'FAIL'} {check} {detail}")
            failed += 0 if ok else 1
    return 1 if failed else 0


# -- entry point --------------------------------------------------------------


def _load_config(path: str | None, args: argparse.Namespace) -> ExperimentConfig:
    if path is None:
        raise ConfigError("run needs --config <path>")
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    cfg = ExperimentConfig.from_dict(raw)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.trials is not None:
        if args.trials < 1:
            raise ConfigError("trials must be positive")
        cfg.trials = args.trials
    return cfg


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config, args)
    out = args.out or cfg.out
    if out is not None:
        try:
            with open(out, "w"):
                pass
        except OSError as e:
            raise ConfigError(f"cannot write output: {e}") from e
    run_experiment(cfg, out, args.timing)
    return 0


def _cmd_grid_dump(args: argparse.Namespace) -> int:
    if args.preset not in PRESETS:
        raise ConfigError(f"unknown preset {args.preset!r}")
    _, mu_b, mu_s = PRESETS[args.preset]
    params = GridParams(mu_b, mu_s, args.sigma)
    if args.anchor_y is None:
        grid = sample_grid(params, args.seed)
    else:
        grid = sample_grid_anchored(params, args.seed, args.anchor_y, args.street_width)
    text = grid.to_json()
    if args.out is None:
        sys.stdout.write(text + "\n")
    else:
        try:
            with open(args.out, "w") as fh:
                fh.write(text + "\n")
        except OSError as e:
            raise ConfigError(f"cannot write output: {e}") from e
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="uavlos")
    sub = p.add_subparsers(dest="cmd", required=True)

    run = sub.add_parser("run", help="execute a configured sweep, emit CSV")
    run.add_argument("--config", help="JSON experiment config")
    run.add_argument("--out", help="CSV output path (default stdout)")
    run.add_argument("--seed", type=int, help="override config seed")
    run.add_argument("--trials", type=int, help="override config trials")
    run.add_argument("--timing", action="store_true",
                     help="fill the runtime_ms column (off keeps output byte-identical)")
    run.set_defaults(fn=_cmd_run)

    val = sub.add_parser("validate", help="run cross-module consistency suites")
    val.add_argument("suite", nargs="?", default="all",
                     choices=sorted(SUITES) + ["all"])
    val.set_defaults(fn=lambda a: run_validate(a.suite))

    grid = sub.add_parser("grid", help="grid utilities")
    gsub = grid.add_subparsers(dest="grid_cmd", required=True)
    dump = gsub.add_parser("dump", help="sample a city and print it as JSON")
    dump.add_argument("--preset", default="urban")
    dump.add_argument("--seed", type=int, default=0)
    dump.add_argument("--sigma", type=float, default=8.0)
    dump.add_argument("--anchor-y", type=float, default=None,
                      help="pin a street edge at this y")
    dump.add_argument("--street-width", type=float, default=None,
                      help="pin the anchored street's width")
    dump.add_argument("--out")
    dump.set_defaults(fn=_cmd_grid_dump)

    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
