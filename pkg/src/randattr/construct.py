"""Attractor constructions: strong (from Omega-limit sets) and weak (from a time schedule).

Strong attractors are the union of Omega-limit sets of an exhausting family
(balls of radius k, or fitted compact boxes C_{1/k}). Weak attractors come
from a schedule of exhausting sets B_n and inter-times u_n found by Monte
Carlo on an ensemble, then the deepest nested pullback image past the
random nesting index j0.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from statsmodels.stats.proportion import proportion_confint

from .cloud import (Box, Neighborhood, PointCloud, _dedupe, distance_to, fit_compact, hausdorff, prune,
                    sample_box, sample_region, semidist, union)
from .cocycle import SystemSpec, _lipschitz_resolution, forward_images, pullback_stack
from .driver import DriverPath, shift
from .errors import DivergenceError, ScheduleInfeasible, WeakConstructionUnstable
from .omega import OmegaConfig, omega_limit, omega_limit_batch


def wilson_interval(successes, trials: int, confidence: float = 0.95):
    lo, hi = proportion_confint(successes, trials, alpha=1.0 - confidence, method="wilson")
    return lo, hi


def _origin(sys: SystemSpec, x0) -> np.ndarray:
    return np.zeros(sys.dimension) if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float))


def exhausting_set(sys: SystemSpec, x0, radius: float, density: int) -> PointCloud:
    """Sample of the closed ball about ``x0``, restricted to the state box if any."""
    ball = Neighborhood.ball(x0, radius)
    if sys.state_box is None:
        return ball.sample(density)
    box = sys.state_box
    lo = np.maximum(box.lower, x0 - radius)
    hi = np.minimum(box.upper, x0 + radius)
    if sys.dimension == 1:
        return sample_box(Box(lo, hi), density)
    cloud = ball.sample(density)
    return PointCloud(_dedupe(np.clip(cloud.points, box.lower, box.upper)), cloud.resolution)


# --- strong constructions -----------------------------------------------------

@dataclass
class StrongBuild:
    attractor: PointCloud
    increments: list[float]
    saturated: bool
    parts: list[PointCloud] = field(default_factory=list, repr=False)


def _accumulate(parts: Sequence[PointCloud], prune_eps: float, saturation_tol: float) -> StrongBuild:
    acc = None
    incs = []
    for part in parts:
        nxt = part if acc is None else prune(union([acc, part]), prune_eps)
        if acc is not None:
            incs.append(hausdorff(nxt, acc))
        acc = nxt
    res = max(p.resolution for p in parts)
    saturated = not incs or incs[-1] <= saturation_tol
    return StrongBuild(acc.with_resolution(max(res, acc.resolution)), incs, saturated, list(parts))


def build_strong_B(sys: SystemSpec, omega: DriverPath, k_max: int, cfg: OmegaConfig,
                   x0=None, saturation_tol: float | None = None) -> StrongBuild:
    """Union over k <= k_max of Omega-limits of the balls of radius k about x0.

    ``increments[k-2]`` is the Hausdorff step from the union up to k-1 to the
    union up to k; ``saturated`` is False when the last step exceeds
    ``saturation_tol`` (default ``prune_eps + 1e-9``).
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    x0 = _origin(sys, x0)
    tol = cfg.prune_eps + 1e-9 if saturation_tol is None else saturation_tol
    parts = [omega_limit(sys, exhausting_set(sys, x0, k, cfg.sample_density), omega, cfg)
             for k in range(1, k_max + 1)]
    return _accumulate(parts, cfg.prune_eps, tol)


def strong_B_batch(sys: SystemSpec, drivers: Sequence[DriverPath], k_max: int, cfg: OmegaConfig,
                   x0=None, saturation_tol: float | None = None) -> list[StrongBuild | None]:
    """build_strong_B for every driver, sharing sweeps; None where a seed diverged."""
    x0 = _origin(sys, x0)
    tol = cfg.prune_eps + 1e-9 if saturation_tol is None else saturation_tol
    per_k = [omega_limit_batch(sys, exhausting_set(sys, x0, k, cfg.sample_density), drivers, cfg)
             for k in range(1, k_max + 1)]
    out = []
    for s in range(len(drivers)):
        parts = [per_k[k][s] for k in range(k_max)]
        out.append(None if any(p is None for p in parts) else _accumulate(parts, cfg.prune_eps, tol))
    return out


def fit_c_sets(sys: SystemSpec, drivers: Sequence[DriverPath], B, coverages: Sequence[float],
               t: int, density: int = 101) -> list[Box]:
    """Boxes C holding each pullback image phi(t, theta_{-t} w) B at the given coverages."""
    X = sample_region(B, density)
    imgs, escaped = pullback_stack(sys, X, drivers, [t])
    clouds = [PointCloud(imgs[s, 0]) for s in range(len(drivers)) if not escaped[s, 0]]
    if not clouds:
        raise ValueError("every seed diverged while fitting compact sets")
    return [fit_compact(clouds, q) for q in coverages]


def build_strong_C(sys: SystemSpec, omega: DriverPath, c_sets: Sequence[Box], cfg: OmegaConfig,
                   saturation_tol: float | None = None) -> StrongBuild:
    """Union of Omega-limits of the compact sets C_{1/k}, in the order given."""
    if not c_sets:
        raise ValueError("need at least one compact set")
    tol = cfg.prune_eps + 1e-9 if saturation_tol is None else saturation_tol
    parts = [omega_limit(sys, C, omega, cfg) for C in c_sets]
    return _accumulate(parts, cfg.prune_eps, tol)


def strong_C_batch(sys: SystemSpec, drivers: Sequence[DriverPath], c_sets: Sequence[Box],
                   cfg: OmegaConfig, saturation_tol: float | None = None) -> list[StrongBuild | None]:
    tol = cfg.prune_eps + 1e-9 if saturation_tol is None else saturation_tol
    per_c = [omega_limit_batch(sys, C, drivers, cfg) for C in c_sets]
    out = []
    for s in range(len(drivers)):
        parts = [per_c[k][s] for k in range(len(c_sets))]
        out.append(None if any(p is None for p in parts) else _accumulate(parts, cfg.prune_eps, tol))
    return out


# --- schedules ----------------------------------------------------------------

@dataclass
class Schedule:
    """Exhausting sets B_n, inter-times u_n and cumulative times t_n (n = 1..len)."""

    regions: list[Neighborhood]
    u: list[int]
    t: list[int]
    prob_floor: list[list[float]]
    delta_seq: list[float]
    c_sets: list[Box]
    kind: str = "B"
    gammas: list[float] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if any(u <= n for n, u in enumerate(self.u, start=1)):
            raise ValueError("schedule needs u_n > n")
        if any(b <= a for a, b in zip(self.t, self.t[1:])):
            raise ValueError("cumulative times must increase strictly")

    def __len__(self) -> int:
        return len(self.u)

    @property
    def B_radii(self) -> list[float]:
        return [r.radius for r in self.regions]

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "regions": [r.to_json() for r in self.regions],
            "B_radii": self.B_radii,
            "u": list(self.u),
            "t": list(self.t),
            "prob_floor": self.prob_floor,
            "delta_seq": self.delta_seq,
            "c_sets": [c.to_json() for c in self.c_sets],
            "gammas": self.gammas,
            "metadata": self.metadata,
        }

    @classmethod
    def from_json(cls, data: dict) -> "Schedule":
        return cls([Neighborhood.from_json(r) for r in data["regions"]], list(data["u"]), list(data["t"]),
                   data["prob_floor"], data["delta_seq"], [Box.from_json(c) for c in data["c_sets"]],
                   data.get("kind", "B"), data.get("gammas", []), data.get("metadata", {}))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def schedule_levels(n: int, relaxed: bool = False) -> tuple[list[float], float]:
    """Target probabilities at level n: one per m = 1..n, and the nesting level.

    The relaxed variant doubles every failure budget.
    """
    shift_ = 1 if relaxed else 0
    contain = [max(0.0, 1.0 - 2.0 ** (-m + shift_)) for m in range(1, n + 1)]
    nest = max(0.0, 1.0 - 2.0 ** (-n + 1 + shift_)) if n >= 2 else 0.0
    return contain, nest


def ball_radii(c_sets: Sequence[Box], x0, n_max: int) -> list[float]:
    """Smallest strictly increasing radii with C_{2^-k}^1 inside the k-th ball."""
    radii: list[float] = []
    for k in range(1, n_max + 1):
        need = c_sets[k - 1].farthest_distance(x0) + 1.0
        r = max(need, float(k))
        if radii and r <= radii[-1]:
            r = radii[-1] + 1.0
        radii.append(r)
    return radii


def _sample(region: Neighborhood, sys: SystemSpec, density: int) -> PointCloud:
    X = region.sample(density)
    if sys.state_box is not None:
        X = PointCloud(_dedupe(np.clip(X.points, sys.state_box.lower, sys.state_box.upper)), X.resolution)
    return X


@dataclass
class LevelTable:
    """Per-candidate u outcome at one level: both containment tests and the combined verdict."""

    n: int
    u: list[int]
    contain_ok: list[bool]
    nest_ok: list[bool]
    feasible: list[bool]
    estimates: dict = field(default_factory=dict)


def level_table(sys: SystemSpec, drivers: Sequence[DriverPath], n: int, region: Neighborhood,
                previous: Neighborhood | None, c_sets: Sequence[Box], t_prev: int,
                u_grid: Sequence[int], relaxed: bool = False, confidence: float = 0.95,
                density: int = 41) -> LevelTable:
    """Evaluate the level-n schedule bounds for each candidate inter-time u > n.

    Containment: P{phi(t_prev + u, w) B_n inside C_{2^-m}^{1/n}} for m = 1..n.
    Nesting: P{phi(u - n, w) B_n inside B_{n-1}} for every grid u' >= u.
    A probability passes when its Wilson lower bound reaches the target.
    """
    cands = sorted(u for u in u_grid if u > n)
    if not cands:
        return LevelTable(n, [], [], [], [])
    contain_lv, nest_lv = schedule_levels(n, relaxed)
    X = _sample(region, sys, density)
    times = sorted({t_prev + u for u in cands} | {u - n for u in cands})
    imgs, _ = forward_images(sys, X, drivers, times)
    pos = {t: i for i, t in enumerate(times)}
    S = len(drivers)
    delta = 1.0 / n

    def frac_ok(mask, level):
        k = int(mask.sum())
        lo, _ = wilson_interval(k, S, confidence)
        return bool(level <= 0 or lo >= level), k / S

    contain_ok, nest_raw, est = [], [], {}
    for u in cands:
        img = imgs[:, pos[t_prev + u]]
        ok = True
        fr = []
        for m in range(1, n + 1):
            inside = np.all(distance_to(c_sets[m - 1], img.reshape(-1, img.shape[-1])).reshape(S, -1) <= delta,
                            axis=1)
            good, f = frac_ok(inside, contain_lv[m - 1])
            fr.append(f)
            ok &= good
        contain_ok.append(ok)
        if previous is None:
            nest_raw.append(True)
            est[u] = {"contain": fr}
        else:
            inside = np.all(previous.contains_points(imgs[:, pos[u - n]]), axis=1)
            good, f = frac_ok(inside, nest_lv)
            nest_raw.append(good)
            est[u] = {"contain": fr, "nest": f}
    # nesting must hold for every grid time at or beyond u
    nest_ok = list(np.logical_and.accumulate(nest_raw[::-1])[::-1])
    feasible = [bool(a and b) for a, b in zip(contain_ok, nest_ok)]
    return LevelTable(n, cands, contain_ok, [bool(v) for v in nest_ok], feasible, est)


def find_schedule(sys: SystemSpec, drivers: Sequence[DriverPath], c_sets: Sequence[Box], n_max: int,
                  u_grid: Sequence[int], radii: Sequence[float] | None = None, x0=None,
                  confidence: float = 0.95, relaxed: bool = False, density: int = 41) -> Schedule:
    """Smallest feasible u_n on the grid, level by level, with balls B_n about x0.

    ``c_sets[m-1]`` is the compact set C_{2^-m}. Raises ScheduleInfeasible
    carrying the first level with no feasible u.
    """
    if len(c_sets) < n_max:
        raise ValueError("need a compact set C_{2^-m} for every m <= n_max")
    x0 = _origin(sys, x0)
    if radii is None:
        radii = ball_radii(c_sets, x0, n_max)
    radii = [float(r) for r in radii[:n_max]]
    if len(radii) < n_max or any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("need n_max strictly increasing radii")
    for k, r in enumerate(radii, start=1):
        if c_sets[k - 1].farthest_distance(x0) + 1.0 > r + 1e-12:
            raise ValueError(f"ball {k} of radius {r} does not contain C_(2^-{k})^1")
    regions = [Neighborhood.ball(x0, r) for r in radii]
    return _search(sys, drivers, regions, c_sets, n_max, u_grid, confidence, relaxed, density, "B")


def _search(sys, drivers, regions, c_sets, n_max, u_grid, confidence, relaxed, density, kind,
            gammas=None) -> Schedule:
    u_list, t_list = [], []
    t_prev = 0
    for n in range(1, n_max + 1):
        table = level_table(sys, drivers, n, regions[n - 1], regions[n - 2] if n > 1 else None,
                            c_sets, t_prev, u_grid, relaxed, confidence, density)
        hit = next((u for u, ok in zip(table.u, table.feasible) if ok), None)
        if hit is None:
            raise ScheduleInfeasible(n)
        u_list.append(hit)
        t_prev += hit
        t_list.append(t_prev)
    floors = [schedule_levels(n, relaxed)[0] for n in range(1, n_max + 1)]
    meta = {"seeds": len(drivers), "confidence": confidence, "relaxed": relaxed,
            "u_grid": [int(min(u_grid)), int(max(u_grid))], "density": density}
    return Schedule(list(regions), u_list, t_list, floors, [1.0 / n for n in range(1, n_max + 1)],
                    list(c_sets[:n_max]), kind, list(gammas or []), meta)


def find_schedule_C(sys: SystemSpec, drivers: Sequence[DriverPath], c_sets: Sequence[Box], n_max: int,
                    u_grid: Sequence[int], gamma_max: float = 1.0, gamma_min: float = 1e-3,
                    gamma_tol: float = 1e-2, confidence: float = 0.95, density: int = 41) -> Schedule:
    """Schedule over B_n = C_{2^-n}^{gamma_n} with the doubled failure budgets.

    gamma_n is the largest radius in [gamma_min, gamma_max] (to ``gamma_tol``)
    for which some grid u is feasible at level n; found by bisection.
    """
    if len(c_sets) < n_max:
        raise ValueError("need a compact set C_{2^-m} for every m <= n_max")
    regions: list[Neighborhood] = []
    gammas: list[float] = []
    t_prev = 0
    for n in range(1, n_max + 1):
        prev = regions[-1] if regions else None

        def probe(g):
            tab = level_table(sys, drivers, n, Neighborhood(c_sets[n - 1], g), prev, c_sets, t_prev,
                              u_grid, True, confidence, density)
            return next((u for u, ok in zip(tab.u, tab.feasible) if ok), None)

        g, u = gamma_max, probe(gamma_max)
        if u is None:
            g, u = gamma_min, probe(gamma_min)
            if u is None:
                raise ScheduleInfeasible(n, f"no feasible radius gamma_{n} >= {gamma_min}")
            hi = gamma_max
            while hi - g > gamma_tol:
                mid = 0.5 * (g + hi)
                u_mid = probe(mid)
                if u_mid is not None:
                    g, u = mid, u_mid
                else:
                    hi = mid
        regions.append(Neighborhood(c_sets[n - 1], g))
        gammas.append(g)
        t_prev += u
    sched = _search(sys, drivers, regions, c_sets, n_max, u_grid, confidence, True, density, "C", gammas)
    sched.metadata.update({"gamma_max": gamma_max, "gamma_min": gamma_min, "gamma_tol": gamma_tol})
    return sched


def feasibility_table(sys: SystemSpec, drivers: Sequence[DriverPath], sched: Schedule,
                      u_grid: Sequence[int], relaxed: bool, confidence: float = 0.95,
                      density: int = 41) -> list[LevelTable]:
    """Level tables for the sets and cumulative times of an existing schedule."""
    tables = []
    for n in range(1, len(sched) + 1):
        t_prev = sched.t[n - 2] if n > 1 else 0
        tables.append(level_table(sys, drivers, n, sched.regions[n - 1],
                                  sched.regions[n - 2] if n > 1 else None, sched.c_sets, t_prev,
                                  u_grid, relaxed, confidence, density))
    return tables


# --- weak constructions -------------------------------------------------------

@dataclass
class WeakBuild:
    attractor: PointCloud
    j0: int
    nesting_events: list[bool]
    nesting_defects: list[float]


def _j0(events: Sequence[bool], n_window: int) -> int | None:
    """Smallest j with every nesting event k in [max(j, 2), n_window]; ``events[k-1]`` is event k."""
    failed = [k for k in range(2, n_window + 1) if not events[k - 1]]
    if not failed:
        return 1
    return failed[-1] + 1 if failed[-1] < n_window else None


def weak_batch(sys: SystemSpec, drivers: Sequence[DriverPath], sched: Schedule, n_window: int,
               prune_eps: float = 0.0, density: int = 41, chunk: int = 64) -> list:
    """build_weak for many drivers in shared sweeps.

    Entries are WeakBuild, or the WeakConstructionUnstable / DivergenceError
    instance for that seed (returned, not raised).
    """
    if not 1 <= n_window <= len(sched):
        raise ValueError("n_window must lie in 1..len(schedule)")
    samples = [_sample(sched.regions[k], sys, density) for k in range(n_window)]
    out: list = []
    for i in range(0, len(drivers), chunk):
        part = list(drivers[i:i + chunk])
        D, bad = [], np.zeros(len(part), dtype=bool)
        for k in range(n_window):
            imgs, esc = pullback_stack(sys, samples[k], part, [sched.t[k]])
            D.append(imgs[:, 0])
            bad |= esc[:, 0]
        events = [np.ones(len(part), dtype=bool)]
        for k in range(2, n_window + 1):
            back = [shift(w, -sched.t[k - 1]) for w in part]
            img, esc = forward_images(sys, samples[k - 1], back, [sched.u[k - 1]])
            inside = np.all(sched.regions[k - 2].contains_points(img[:, 0]), axis=1)
            events.append(inside & ~esc)
        for s_, w in enumerate(part):
            if bad[s_]:
                out.append(DivergenceError(0, f"pullback diverged for seed {w.seed}"))
                continue
            ev = [bool(e[s_]) for e in events]
            j0 = _j0(ev, n_window)
            if j0 is None:
                out.append(WeakConstructionUnstable(n_window))
                continue
            clouds = [PointCloud(D[k][s_], _lipschitz_resolution(samples[k].points, D[k][s_],
                                                                  samples[k].resolution))
                      for k in range(n_window)]
            defects = [semidist(clouds[k - 1], clouds[k - 2]) for k in range(max(j0, 2), n_window + 1)]
            out.append(WeakBuild(prune(clouds[-1], prune_eps), j0, ev, defects))
    return out


def build_weak(sys: SystemSpec, omega: DriverPath, sched: Schedule, n_window: int,
               prune_eps: float = 0.0, density: int = 41) -> WeakBuild:
    """Weak attractor estimate: the deepest image phi(t_k, theta_{-t_k} w) B_k, k = n_window.

    j0 is the smallest j with every nesting event
    phi(u_k, theta_{-t_k} w) B_k inside B_{k-1} for k in [max(j, 2), n_window].
    Raises WeakConstructionUnstable when the event at k = n_window fails.
    """
    res = weak_batch(sys, [omega], sched, n_window, prune_eps, density)[0]
    if isinstance(res, Exception):
        raise res
    return res


def build_weak_C(sys: SystemSpec, omega: DriverPath, sched: Schedule, n_window: int,
                 prune_eps: float = 0.0, density: int = 41) -> WeakBuild:
    """build_weak over the compact-neighbourhood sets C_{2^-n}^{gamma_n}."""
    if sched.kind != "C":
        raise ValueError("build_weak_C needs a schedule from find_schedule_C")
    return build_weak(sys, omega, sched, n_window, prune_eps, density)


@dataclass
class EnsembleResult:
    seeds: list[int]
    records: list[dict]
    clouds: list[PointCloud | None]
    summary: dict


def weak_ensemble(sys: SystemSpec, drivers: Sequence[DriverPath], sched: Schedule, n_window: int,
                  prune_eps: float = 0.0, density: int = 41) -> EnsembleResult:
    """Weak construction on every driver; unstable or divergent seeds are recorded, not raised."""
    records, clouds = [], []
    for w, res in zip(drivers, weak_batch(sys, drivers, sched, n_window, prune_eps, density)):
        rec = {"seed": w.seed, "j0": None, "unstable": False, "diverged": False, "max_defect": None}
        if isinstance(res, WeakConstructionUnstable):
            rec["unstable"] = True
        elif isinstance(res, DivergenceError):
            rec["diverged"] = True
        else:
            rec["j0"] = res.j0
            rec["max_defect"] = max(res.nesting_defects, default=0.0)
        records.append(rec)
        clouds.append(res if isinstance(res, Exception) else res.attractor)
    clouds = [None if isinstance(c, Exception) else c for c in clouds]
    return EnsembleResult([w.seed for w in drivers], records, clouds,
                          ensemble_summary(records, n_window, sched.kind))


def ensemble_summary(records: Sequence[dict], n_window: int, kind: str = "B") -> dict:
    """Statistics recomputable from per-seed records."""
    n = len(records)
    unstable = sum(r["unstable"] for r in records)
    freq = unstable / n
    # nesting failure budget; the relaxed levels double it
    lift = 2 if kind == "C" else 1
    budget = sum(2.0 ** (-k + lift) for k in range(2, n_window + 1))
    j0s = [r["j0"] for r in records if r["j0"] is not None]
    return {
        "seeds": n,
        "unstable": unstable,
        "diverged": sum(r["diverged"] for r in records),
        "unstable_frequency": freq,
        "unstable_stderr": math.sqrt(freq * (1 - freq) / n),
        "unstable_budget": budget,
        "j0_at_most_3": sum(j <= 3 for j in j0s) / n,
        "j0_histogram": _histogram(j0s),
    }


def _histogram(values) -> dict:
    out: dict = {}
    for v in values:
        out[str(v)] = out.get(str(v), 0) + 1
    return dict(sorted(out.items(), key=lambda kv: int(kv[0])))
