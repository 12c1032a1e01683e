"""Ensemble checks of attraction criteria and of the attraction mode.

Verdicts follow one rule: ``pass`` when the Wilson lower bound of the
success fraction reaches ``1 - eps``, ``fail`` when the upper bound stays
below it, ``inconclusive`` otherwise. A pass is a pass at the stated horizon.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .cloud import Box, Neighborhood, PointCloud, distance_to, sample_region, semidist
from .cocycle import SystemSpec, forward_images, pullback_stack
from .construct import wilson_interval
from .driver import DriverPath, shift
from .omega import OmegaConfig, omega_limit_batch

CRITERIA = ("strongB", "strongC", "weakB", "weakC")


def _verdict(lo: float, hi: float, eps: float) -> str:
    if lo >= 1.0 - eps:
        return "pass"
    if hi < 1.0 - eps:
        return "fail"
    return "inconclusive"


def target_distance(C, pts: np.ndarray) -> np.ndarray:
    """Distance of points (..., d) to C; a Neighborhood counts its own radius as slack."""
    flat = pts.reshape(-1, pts.shape[-1])
    with np.errstate(over="ignore", invalid="ignore"):  # escaped paths carry inf/nan
        if isinstance(C, Neighborhood):
            d = np.maximum(distance_to(C.anchor, flat) - C.radius, 0.0)
        else:
            d = distance_to(C, flat)
    return d.reshape(pts.shape[:-1])


def _describe(C) -> dict:
    if isinstance(C, (Box, Neighborhood)):
        return C.to_json()
    return {"points": np.asarray(C.points).tolist()}


@dataclass
class CriterionReport:
    criterion: str
    eps: float
    delta: float
    C_set: dict
    outcomes: list[bool]
    estimate: float
    interval: tuple[float, float]
    verdict: str
    horizon: dict
    curve: list[dict] = field(default_factory=list)

    def __post_init__(self):
        if self.criterion not in CRITERIA:
            raise ValueError(f"unknown criterion {self.criterion!r}")
        if not 0.0 <= self.estimate <= 1.0:
            raise ValueError("estimate must lie in [0, 1]")

    @property
    def seeds(self) -> int:
        return len(self.outcomes)

    def to_json(self) -> dict:
        d = asdict(self)
        d["interval"] = list(self.interval)
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


def _grid(start: int, stop: int, stride: int) -> list[int]:
    g = list(range(start, stop + 1, stride))
    if g[-1] != stop:
        g.append(stop)
    return g


def strong_outcomes(sys: SystemSpec, B, C, delta: float, drivers: Sequence[DriverPath], s_max: int,
                    t_max: int, stride: int = 1, density: int = 101):
    """Per-seed eventually-always outcomes and entry times (None when the seed fails)."""
    if not 0 <= s_max < t_max:
        raise ValueError("need 0 <= s_max < t_max")
    times = np.asarray(sorted(set(_grid(0, t_max, stride)) | {s_max}))
    X = sample_region(B, density)
    imgs, escaped = pullback_stack(sys, X, drivers, times)
    with np.errstate(invalid="ignore"):
        inside = np.all(target_distance(C, imgs) <= delta, axis=2) & ~escaped
    tail_ok = np.logical_and.accumulate(inside[:, ::-1], axis=1)[:, ::-1]
    starts = times <= s_max
    ok = tail_ok[:, starts]
    outcomes = ok.any(axis=1)
    entry = [int(times[starts][row].min()) if row.any() else None for row in ok]
    return outcomes, entry


def strong_report(outcomes, entry, C, eps: float, delta: float, s_max: int, t_max: int, stride: int,
                  confidence: float = 0.95, criterion: str = "strongB") -> CriterionReport:
    outcomes = np.asarray(outcomes, dtype=bool)
    k, n = int(outcomes.sum()), len(outcomes)
    lo, hi = wilson_interval(k, n, confidence)
    return CriterionReport(criterion, eps, delta, _describe(C), [bool(o) for o in outcomes], k / n,
                           (float(lo), float(hi)), _verdict(lo, hi, eps),
                           {"s_max": s_max, "t_max": t_max, "stride": stride, "entry_time": list(entry)})


def check_strong_criterion(sys: SystemSpec, B, C, eps: float, delta: float,
                           drivers: Sequence[DriverPath], s_max: int, t_max: int, stride: int = 1,
                           density: int = 101, confidence: float = 0.95,
                           criterion: str = "strongB") -> CriterionReport:
    """Eventually-always containment of pullback images of B in C^delta.

    A seed succeeds when some grid s <= s_max has
    phi(t, theta_{-t} w) B inside C^delta for every grid t in [s, t_max].
    The grid is 0, stride, 2 stride, ... with s_max and t_max added.
    Escaping seeds count as failures.
    """
    if delta < 0 or not 0 < eps < 1:
        raise ValueError("need delta >= 0 and 0 < eps < 1")
    outcomes, entry = strong_outcomes(sys, B, C, delta, drivers, s_max, t_max, stride, density)
    return strong_report(outcomes, entry, C, eps, delta, s_max, t_max, stride, confidence, criterion)


def weak_curve(sys: SystemSpec, B, C, delta: float, drivers: Sequence[DriverPath],
               t_grid: Sequence[int], images: str = "forward", density: int = 101) -> np.ndarray:
    """Per-seed containment of the image of B in C^delta at each grid time, (S, T)."""
    X = sample_region(B, density)
    if images == "forward":
        imgs, escaped = forward_images(sys, X, drivers, t_grid)
        escaped = np.repeat(escaped[:, None], len(t_grid), axis=1)
    elif images == "pullback":
        imgs, escaped = pullback_stack(sys, X, drivers, t_grid)
    else:
        raise ValueError("images must be 'forward' or 'pullback'")
    with np.errstate(invalid="ignore"):
        return np.all(target_distance(C, imgs) <= delta, axis=2) & ~escaped


def weak_report(inside, t_grid: Sequence[int], C, eps: float, delta: float, images: str = "forward",
                confidence: float = 0.95, criterion: str = "weakB") -> CriterionReport:
    inside = np.asarray(inside, dtype=bool)
    S = inside.shape[0]
    counts = inside.sum(axis=0)
    bounds = [wilson_interval(int(k), S, confidence) for k in counts]
    good = np.array([lo >= 1.0 - eps for lo, _ in bounds])
    tail_good = np.logical_and.accumulate(good[::-1])[::-1]
    t0 = next((int(t) for t, ok in zip(t_grid, tail_good) if ok), None)
    lo, hi = bounds[-1]
    verdict = "pass" if t0 is not None else ("fail" if hi < 1.0 - eps else "inconclusive")
    curve = [{"t": int(t), "p": int(k) / S, "lower": float(b[0]), "upper": float(b[1])}
             for t, k, b in zip(t_grid, counts, bounds)]
    return CriterionReport(criterion, eps, delta, _describe(C), [bool(v) for v in inside[:, -1]],
                           int(counts[-1]) / S, (float(lo), float(hi)), verdict,
                           {"t_grid": [int(t) for t in t_grid], "t0": t0, "images": images}, curve)


def _check_grid(t_grid) -> list[int]:
    t_grid = [int(t) for t in t_grid]
    if not t_grid or any(b <= a for a, b in zip(t_grid, t_grid[1:])) or t_grid[0] < 0:
        raise ValueError("t_grid must be non-empty, non-negative and increasing")
    return t_grid


def check_weak_criterion(sys: SystemSpec, B, C, eps: float, delta: float,
                         drivers: Sequence[DriverPath], t_grid: Sequence[int], images: str = "forward",
                         density: int = 101, confidence: float = 0.95,
                         criterion: str = "weakB") -> CriterionReport:
    """Pointwise-in-time containment probability p(t) on a grid.

    Passes when some t0 has the Wilson lower bound of p(t) at least 1 - eps
    for every grid t >= t0. Fails when the upper bound at the last grid time
    is below 1 - eps. The reported estimate is p at the last grid time.
    ``images="pullback"`` uses pullback images, which are equal in law to
    forward images and make the strong-implies-weak relation seed-wise.
    """
    t_grid = _check_grid(t_grid)
    if delta < 0 or not 0 < eps < 1:
        raise ValueError("need delta >= 0 and 0 < eps < 1")
    inside = weak_curve(sys, B, C, delta, drivers, t_grid, images, density)
    return weak_report(inside, t_grid, C, eps, delta, images, confidence, criterion)


# --- attraction modes ---------------------------------------------------------

AttractorProvider = Callable[[DriverPath], "PointCloud | None"]


@dataclass
class ModeReport:
    t_grid: list[int]
    tail: list[int]
    pullback_dist: list[list[float]]
    forward_dist: list[list[float]]
    exceedance: list[float]
    forward_exceedance: list[float]
    tail_sup: list[float]
    forward_tail_sup: list[float]
    pullback_as: bool
    weak_in_prob: bool
    forward_as: bool
    alpha: float
    delta: float
    skipped: int

    def __post_init__(self):
        if self.pullback_as and not self.weak_in_prob:
            raise AssertionError("pullback_as must imply weak_in_prob")

    def to_json(self) -> dict:
        return asdict(self)


def _semidist_rows(imgs: np.ndarray, targets: Sequence[PointCloud]) -> np.ndarray:
    return np.array([semidist(PointCloud(img), A) for img, A in zip(imgs, targets)])


def mode_distances(sys: SystemSpec, attractor: AttractorProvider, B, drivers: Sequence[DriverPath],
                   t_grid: Sequence[int], density: int = 101):
    """Rows of e_t and f_t for seeds with every needed attractor estimate; also the skip count.

    Escaped images get distance inf.
    """
    t_grid = _check_grid(t_grid)
    X = sample_region(B, density)
    pb, pb_esc = pullback_stack(sys, X, drivers, t_grid)
    fw, fw_esc = forward_images(sys, X, drivers, t_grid)
    e_rows, f_rows, skipped = [], [], 0
    for s, w in enumerate(drivers):
        A0 = attractor(w)
        At = [attractor(shift(w, t)) for t in t_grid]
        if A0 is None or any(a is None for a in At):
            skipped += 1
            continue
        e_rows.append(np.where(pb_esc[s], np.inf, _semidist_rows(pb[s], [A0] * len(t_grid))))
        f_rows.append(np.full(len(t_grid), np.inf) if fw_esc[s] else _semidist_rows(fw[s], At))
    shape = (0, len(t_grid))
    E = np.array(e_rows) if e_rows else np.empty(shape)
    F = np.array(f_rows) if f_rows else np.empty(shape)
    return E, F, skipped


def mode_report(E, F, t_grid: Sequence[int], delta: float, alpha: float = 0.05,
                tail_fraction: float = 0.5, skipped: int = 0) -> ModeReport:
    E, F = np.asarray(E, dtype=float), np.asarray(F, dtype=float)
    if len(E) == 0:
        raise ValueError("no seed has an attractor estimate")
    t_grid = [int(t) for t in t_grid]
    k0 = min(len(t_grid) - 1, int(len(t_grid) * (1.0 - tail_fraction)))
    tail = slice(k0, None)
    e_sup, f_sup = E[:, tail].max(axis=1), F[:, tail].max(axis=1)
    level = 1.0 - alpha
    exceed = (E > delta).mean(axis=0)
    f_exceed = (F > delta).mean(axis=0)
    return ModeReport(
        t_grid, t_grid[k0:], E.tolist(), F.tolist(), exceed.tolist(), f_exceed.tolist(),
        e_sup.tolist(), f_sup.tolist(),
        pullback_as=bool(np.mean(e_sup <= delta) >= level),
        weak_in_prob=bool(np.all(1.0 - exceed[tail] >= level)),
        forward_as=bool(np.mean(f_sup <= delta) >= level),
        alpha=alpha, delta=delta, skipped=skipped)


def classify_attraction(sys: SystemSpec, attractor: AttractorProvider, B, drivers: Sequence[DriverPath],
                        t_grid: Sequence[int], delta: float, alpha: float = 0.05,
                        density: int = 101, tail_fraction: float = 0.5) -> ModeReport:
    """Pullback distances e_t, forward distances f_t, and the three mode flags.

    ``attractor(w)`` returns A(w) or None; a seed whose A(w) or any
    A(theta_t w) is missing is skipped. The tail is the last
    ``tail_fraction`` of the grid.
    """
    E, F, skipped = mode_distances(sys, attractor, B, drivers, t_grid, density)
    return mode_report(E, F, t_grid, delta, alpha, tail_fraction, skipped)


def forward_pullback_ks(report: ModeReport, alpha: float = 0.01) -> list[dict]:
    """Two-sample KS of f_t against e_t across seeds at each grid time."""
    E, F = np.asarray(report.pullback_dist), np.asarray(report.forward_dist)
    out = []
    for j, t in enumerate(report.t_grid):
        a, b = E[:, j], F[:, j]
        if np.array_equal(np.sort(a), np.sort(b)):
            stat, p = 0.0, 1.0
        else:
            res = stats.ks_2samp(a, b)
            stat, p = float(res.statistic), float(res.pvalue)
        out.append({"t": t, "statistic": stat, "pvalue": p, "agree": p >= alpha})
    return out


# --- weak equals strong -------------------------------------------------------

@dataclass
class EquivalenceReport:
    fractions: list[float]
    distances: list[list[float]]
    verdict: str
    alpha: float
    tol: float
    skipped: int

    def to_json(self) -> dict:
        return asdict(self)


def equivalence_distances(sys: SystemSpec, attractor: AttractorProvider, sets: Sequence,
                          drivers: Sequence[DriverPath], cfg: OmegaConfig, tol: float = 1e-6):
    """Per-B lists of semidist(Omega_B, A) and containment flags; also the skip count.

    A divergent Omega-limit gives distance inf and counts as not contained.
    """
    A = [attractor(w) for w in drivers]
    keep = [i for i, a in enumerate(A) if a is not None]
    distances, flags = [], []
    for B in sets:
        omegas = omega_limit_batch(sys, B, [drivers[i] for i in keep], cfg) if keep else []
        dist, ok = [], []
        for i, om in zip(keep, omegas):
            if om is None:
                dist.append(float("inf"))
                ok.append(False)
                continue
            d = semidist(om, A[i])
            dist.append(d)
            ok.append(bool(d <= om.resolution + A[i].resolution + tol))
        distances.append(dist)
        flags.append(ok)
    return distances, flags, len(drivers) - len(keep)


def equivalence_report(distances, flags, tol: float, alpha: float = 0.05, skipped: int = 0) -> EquivalenceReport:
    if not flags or not flags[0]:
        raise ValueError("no seed has an attractor estimate")
    fractions = [float(np.mean(f)) for f in flags]
    verdict = "strong" if all(f >= 1.0 - alpha for f in fractions) else "not-strong"
    return EquivalenceReport(fractions, [list(d) for d in distances], verdict, alpha, tol, skipped)


def check_weak_equals_strong(sys: SystemSpec, attractor: AttractorProvider, sets: Sequence,
                             drivers: Sequence[DriverPath], cfg: OmegaConfig, tol: float = 1e-6,
                             alpha: float = 0.05) -> EquivalenceReport:
    """Fraction of seeds with Omega_B(w) inside A(w) up to resolution + tol, per B.

    Verdict "strong" when every fraction is at least 1 - alpha. Seeds with
    no attractor estimate are skipped.
    """
    distances, flags, skipped = equivalence_distances(sys, attractor, sets, drivers, cfg, tol)
    return equivalence_report(distances, flags, tol, alpha, skipped)
