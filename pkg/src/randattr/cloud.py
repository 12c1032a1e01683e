"""Finite point clouds standing in for compact sets.

Distances are Euclidean. Nearest-neighbour queries go through brute force
for small reference sets and a uniform grid index above ``GRID_THRESHOLD``
points; both paths use the same distance formula, so they agree exactly.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np
from scipy.stats import qmc

GRID_THRESHOLD = 4096
_CHUNK = 1 << 22


def _as_points(points) -> np.ndarray:
    arr = np.array(points, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"points must be a 2-D array, got shape {arr.shape}")
    return arr


@dataclass(frozen=True, eq=False)
class PointCloud:
    """Non-empty finite point set with a covering radius.

    A 1-D ``points`` argument is read as that many scalar points.
    """

    points: np.ndarray
    resolution: float = 0.0
    label: str | None = None

    def __post_init__(self):
        arr = _as_points(self.points)
        if arr.shape[0] == 0:
            raise ValueError("point cloud must be non-empty")
        if not np.all(np.isfinite(arr)):
            raise ValueError("point cloud contains non-finite coordinates")
        if not self.resolution >= 0:
            raise ValueError("resolution must be >= 0")
        arr.setflags(write=False)
        object.__setattr__(self, "points", arr)
        object.__setattr__(self, "resolution", float(self.resolution))

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def __repr__(self) -> str:
        return f"PointCloud(n={len(self)}, d={self.dimension}, resolution={self.resolution:g})"

    def with_resolution(self, resolution: float) -> "PointCloud":
        return PointCloud(self.points, resolution, self.label)

    def to_json(self) -> dict:
        return {"resolution": self.resolution, "points": self.points.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "PointCloud":
        pts = np.asarray(data["points"], dtype=float)
        return cls(pts.reshape(len(pts), -1), data.get("resolution", 0.0))

    def to_csv(self, path) -> None:
        header = ",".join(f"x{i}" for i in range(self.dimension))
        np.savetxt(path, self.points, delimiter=",", header=header, comments="", fmt="%.17g")

    @classmethod
    def from_csv(cls, path, resolution: float = 0.0) -> "PointCloud":
        arr = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(arr, resolution)


@dataclass(frozen=True, eq=False)
class Box:
    """Axis-aligned box ``[lower, upper]``."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.array(self.lower, dtype=float))
        hi = np.atleast_1d(np.array(self.upper, dtype=float))
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("box bounds must be equal-length vectors")
        if np.any(lo > hi):
            raise ValueError("box needs lower <= upper componentwise")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dimension(self) -> int:
        return self.lower.size

    def __eq__(self, other):
        return (isinstance(other, Box) and np.array_equal(self.lower, other.lower)
                and np.array_equal(self.upper, other.upper))

    def __repr__(self) -> str:
        return f"Box({self.lower.tolist()}, {self.upper.tolist()})"

    def distance(self, x) -> np.ndarray:
        """Distance from each row of ``x`` to the box (0 inside)."""
        x = _as_points(x)
        gap = np.maximum(np.maximum(self.lower - x, x - self.upper), 0.0)
        return np.sqrt(np.sum(gap * gap, axis=1))

    def contains_box(self, other: "Box") -> bool:
        return bool(np.all(self.lower <= other.lower) and np.all(other.upper <= self.upper))

    def corners(self) -> np.ndarray:
        return np.array(list(itertools.product(*zip(self.lower, self.upper))), dtype=float)

    def farthest_distance(self, x0) -> float:
        """Largest distance from ``x0`` to a point of the box."""
        x0 = np.asarray(x0, dtype=float)
        far = np.maximum(np.abs(self.lower - x0), np.abs(self.upper - x0))
        return float(np.sqrt(np.sum(far * far)))

    def to_json(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}

    @classmethod
    def from_json(cls, data: dict) -> "Box":
        return cls(data["lower"], data["upper"])


Anchor = Union[PointCloud, Box]


# --- nearest neighbours -------------------------------------------------------

def _brute_nearest(queries: np.ndarray, points: np.ndarray) -> np.ndarray:
    out = np.empty(len(queries))
    step = max(1, _CHUNK // max(1, points.size))
    for i in range(0, len(queries), step):
        q = queries[i:i + step]
        diff = q[:, None, :] - points[None, :, :]
        out[i:i + step] = np.sqrt(np.min(np.sum(diff * diff, axis=2), axis=1))
    return out


class GridIndex:
    """Uniform-grid nearest-neighbour index over a fixed point set."""

    def __init__(self, points, cell: float | None = None):
        self.points = _as_points(points)
        n, d = self.points.shape
        self.lo = self.points.min(axis=0)
        self.hi = self.points.max(axis=0)
        if cell is None:
            extent = np.maximum(self.hi - self.lo, 0.0)
            live = extent[extent > 0]
            if live.size:
                vol = float(np.prod(live))
                cell = (vol / n) ** (1.0 / live.size) * 2.0
            else:
                cell = 1.0
        self.cell = float(cell) if cell > 0 else 1.0
        keys = np.floor((self.points - self.lo) / self.cell).astype(np.int64)
        self.shape = keys.max(axis=0) + 1
        self.cells: dict[tuple, np.ndarray] = {}
        order = np.lexsort(keys.T[::-1])
        sk = keys[order]
        bounds = np.flatnonzero(np.any(np.diff(sk, axis=0) != 0, axis=1)) + 1
        for idx in np.split(order, bounds):
            self.cells[tuple(keys[idx[0]])] = idx
        self._shells: dict[int, np.ndarray] = {}

    def _shell(self, r: int) -> np.ndarray:
        if r not in self._shells:
            d = self.points.shape[1]
            rng = np.arange(-r, r + 1)
            grid = np.array(np.meshgrid(*([rng] * d), indexing="ij")).reshape(d, -1).T
            self._shells[r] = grid[np.max(np.abs(grid), axis=1) == r]
        return self._shells[r]

    def query(self, queries) -> np.ndarray:
        """Distance from each query row to its nearest indexed point."""
        queries = _as_points(queries)
        out = np.empty(len(queries))
        d = self.points.shape[1]
        for i, q in enumerate(queries):
            c = np.floor((q - self.lo) / self.cell).astype(np.int64)
            # cells nearer than the grid's own extent hold nothing
            outside = np.maximum(np.maximum(-c, c - (self.shape - 1)), 0)
            r = int(outside.max())
            best = math.inf
            while True:
                if (2 * r + 1) ** d > 4 * len(self.cells) + 27:
                    # ring scan would touch more cells than exist
                    best = min(best, float(_brute_nearest(q[None, :], self.points)[0]))
                    break
                for off in self._shell(r):
                    idx = self.cells.get(tuple(c + off))
                    if idx is not None:
                        diff = self.points[idx] - q
                        best = min(best, float(np.sqrt(np.min(np.sum(diff * diff, axis=1)))))
                # anything in ring r+1 or beyond is at least r cells away
                if best <= r * self.cell:
                    break
                r += 1
            out[i] = best
        return out


def nearest_distances(queries, points) -> np.ndarray:
    queries = _as_points(queries)
    points = _as_points(points)
    if len(points) < GRID_THRESHOLD:
        return _brute_nearest(queries, points)
    return GridIndex(points).query(queries)


def _check_dims(a: int, b: int) -> None:
    if a != b:
        raise ValueError(f"dimension mismatch: {a} vs {b}")


def semidist(B: PointCloud, A: PointCloud) -> float:
    """sup over points of B of the distance to A."""
    _check_dims(B.dimension, A.dimension)
    return float(np.max(nearest_distances(B.points, A.points)))


def hausdorff(A: PointCloud, B: PointCloud) -> float:
    return max(semidist(A, B), semidist(B, A))


def distance_to(A: Anchor, x) -> np.ndarray:
    """Distance from each row of ``x`` to the anchor set."""
    x = _as_points(x)
    if isinstance(A, Box):
        _check_dims(A.dimension, x.shape[1])
        return A.distance(x)
    _check_dims(A.dimension, x.shape[1])
    return nearest_distances(x, A.points)


def neighborhood_contains(A: Anchor, delta: float, x) -> bool:
    """Whether ``x`` lies in the closed delta-neighbourhood of A."""
    if delta < 0:
        raise ValueError("delta must be >= 0")
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return bool(distance_to(A, x)[0] <= delta)


def cover_contains(A: Anchor, delta: float, B: PointCloud) -> bool:
    """Whether every point of B lies within delta of A."""
    if delta < 0:
        raise ValueError("delta must be >= 0")
    return bool(np.max(distance_to(A, B.points)) <= delta)


# --- set operations -----------------------------------------------------------

def union(clouds: Iterable[PointCloud]) -> PointCloud:
    clouds = list(clouds)
    if not clouds:
        raise ValueError("union of no clouds")
    for c in clouds[1:]:
        _check_dims(clouds[0].dimension, c.dimension)
    pts = np.concatenate([c.points for c in clouds])
    return PointCloud(pts, max(c.resolution for c in clouds), clouds[0].label)


def _dedupe(points: np.ndarray) -> np.ndarray:
    _, first = np.unique(points, axis=0, return_index=True)
    return points[np.sort(first)]


def prune(A: PointCloud, eps: float) -> PointCloud:
    """Greedy eps-net in input order.

    Every dropped point lies within ``eps`` of a kept one; the resolution grows
    by the largest such distance, so pruning an already-pruned cloud is a no-op.
    """
    if eps < 0:
        raise ValueError("eps must be >= 0")
    pts = A.points
    if eps == 0:
        return PointCloud(_dedupe(pts), A.resolution, A.label)
    n, d = pts.shape
    scale = float(np.max(np.abs(pts))) if n else 0.0
    kept: list[int] = []
    if scale / eps < 2.0**52:
        cells: dict[tuple, list[int]] = {}
        keys = np.floor(pts / eps).astype(np.int64)
        offsets = list(itertools.product((-1, 0, 1), repeat=d))
        for i in range(n):
            k = keys[i]
            hit = False
            for off in offsets:
                bucket = cells.get(tuple(k + off))
                if bucket is None:
                    continue
                diff = pts[bucket] - pts[i]
                if np.min(np.sum(diff * diff, axis=1)) <= eps * eps:
                    hit = True
                    break
            if not hit:
                kept.append(i)
                cells.setdefault(tuple(k), []).append(i)
    else:
        for i in range(n):
            if kept:
                diff = pts[kept] - pts[i]
                if np.min(np.sum(diff * diff, axis=1)) <= eps * eps:
                    continue
            kept.append(i)
    out = pts[kept]
    grow = 0.0
    if len(kept) < n:
        grow = float(np.max(nearest_distances(pts, out)))
    return PointCloud(out, A.resolution + grow, A.label)


def fit_compact(samples: Sequence[PointCloud], coverage: float) -> Box:
    """Per-axis central quantile box holding a ``coverage`` fraction per axis."""
    if not 0 < coverage < 1:
        raise ValueError("coverage must lie in (0, 1)")
    if not samples:
        raise ValueError("fit_compact needs at least one sample")
    pts = np.concatenate([s.points for s in samples])
    tail = (1.0 - coverage) / 2.0
    lo = np.quantile(pts, tail, axis=0)
    hi = np.quantile(pts, 1.0 - tail, axis=0)
    return Box(lo, np.maximum(hi, lo))


# --- deterministic sampling ---------------------------------------------------

def _fill_distance(pts: np.ndarray, box: Box, member=None, probes: int = 4096) -> float:
    """Upper bound on the distance from any point of the region to ``pts``.

    The region is ``box``, or its part accepted by ``member(x, slack)``.
    A regular probe grid of spacing h is within h*sqrt(d)/2 of every point.
    """
    d = box.dimension
    m = max(2, int(round(probes ** (1.0 / d))))
    axes = [np.linspace(lo, hi, m) for lo, hi in zip(box.lower, box.upper)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    slack = float(np.sqrt(np.sum(((box.upper - box.lower) / (m - 1)) ** 2))) / 2.0
    if member is not None:
        grid = grid[member(grid, slack)]
    if len(grid) == 0:
        return slack
    return float(np.max(nearest_distances(grid, pts))) + slack


def sample_box(box: Box, n: int) -> PointCloud:
    """Deterministic low-discrepancy sample of a box, corners included.

    In one dimension this is the evenly spaced grid with both endpoints.
    """
    d = box.dimension
    width = box.upper - box.lower
    if d == 1:
        pts = np.linspace(box.lower[0], box.upper[0], max(n, 1))[:, None]
        res = float(width[0]) / (2 * (len(pts) - 1)) if len(pts) > 1 else float(width[0])
        return PointCloud(pts, res)
    corners = box.corners()
    m = max(n - len(corners), 0)
    inner = qmc.Halton(d, scramble=False).random(m + 1)[1:] if m else np.empty((0, d))
    pts = _dedupe(np.concatenate([corners, box.lower + inner * width]))
    return PointCloud(pts, _fill_distance(pts, box))


@dataclass(frozen=True, eq=False)
class Neighborhood:
    """Closed neighbourhood ``anchor^radius``; a ball when the anchor is one point."""

    anchor: Anchor
    radius: float

    @classmethod
    def ball(cls, center, radius: float) -> "Neighborhood":
        c = np.atleast_1d(np.asarray(center, dtype=float))
        return cls(PointCloud(c[None, :]), float(radius))

    @property
    def dimension(self) -> int:
        return self.anchor.dimension

    def contains(self, cloud: PointCloud) -> bool:
        return cover_contains(self.anchor, self.radius, cloud)

    def contains_points(self, pts: np.ndarray) -> np.ndarray:
        """Row-wise membership for an array of shape (..., N, d)."""
        flat = pts.reshape(-1, pts.shape[-1])
        ok = distance_to(self.anchor, flat) <= self.radius
        return ok.reshape(pts.shape[:-1])

    def bounding_box(self) -> Box:
        if isinstance(self.anchor, Box):
            lo, hi = self.anchor.lower, self.anchor.upper
        else:
            lo, hi = self.anchor.points.min(axis=0), self.anchor.points.max(axis=0)
        return Box(lo - self.radius, hi + self.radius)

    def sample(self, n: int) -> PointCloud:
        """Deterministic sample: box-grid points that fall inside, boundary kept."""
        bb = self.bounding_box()
        if self.dimension == 1:
            return sample_box(bb, n)
        # oversample the bounding box, keep members, add sphere/box-boundary points
        raw = sample_box(bb, 4 * n).points
        inside = raw[distance_to(self.anchor, raw) <= self.radius]
        boundary = self._boundary(max(8, int(math.sqrt(n)) * 4))
        pts = _dedupe(np.concatenate([inside, boundary]))

        def member(x, slack):
            return distance_to(self.anchor, x) <= self.radius + slack
        return PointCloud(pts, _fill_distance(pts, bb, member))

    def _boundary(self, m: int) -> np.ndarray:
        d = self.dimension
        dirs = qmc.Halton(d, scramble=False).random(m + 1)[1:] * 2.0 - 1.0
        dirs = np.concatenate([dirs, np.eye(d), -np.eye(d)])
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        if isinstance(self.anchor, Box):
            centre = (self.anchor.lower + self.anchor.upper) / 2.0
            half = (self.anchor.upper - self.anchor.lower) / 2.0
            base = centre + np.sign(dirs) * half
        else:
            base = np.repeat(self.anchor.points[:1], len(dirs), axis=0)
        # shrink by a few ulps so rounding never lands outside the closed set
        return base + self.radius * (1.0 - 1e-12) * dirs

    def to_json(self) -> dict:
        if isinstance(self.anchor, Box):
            return {"box": self.anchor.to_json(), "radius": self.radius}
        return {"center": self.anchor.points[0].tolist(), "radius": self.radius}

    @classmethod
    def from_json(cls, data: dict) -> "Neighborhood":
        if "box" in data:
            return cls(Box.from_json(data["box"]), float(data["radius"]))
        return cls.ball(data["center"], data["radius"])


def sample_region(region, n: int) -> PointCloud:
    """Sample a Box, a Neighborhood, or pass a PointCloud through."""
    if isinstance(region, PointCloud):
        return region
    if isinstance(region, Box):
        return sample_box(region, n)
    if isinstance(region, Neighborhood):
        return region.sample(n)
    raise TypeError(f"cannot sample {type(region).__name__}")


def write_cloud_json(cloud: PointCloud, path) -> None:
    Path(path).write_text(json.dumps(cloud.to_json(), sort_keys=True))
