"""Discrete-time random dynamical systems over :mod:`randattr.driver` paths.

A system advances a state array of shape ``(S, N, d)`` by one step given
increments of shape ``(S, 1, k)``: ``S`` noise paths, ``N`` points per path.
Single-path calls use ``S = 1``. Every step is elementwise arithmetic, so a
path evolved alone and the same path evolved inside a batch give identical
floats, and ``phi(s + t, w)`` equals ``phi(t, theta_s w) o phi(s, w)`` exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .cloud import Box, PointCloud
from .driver import DriverPath, NoiseSpec, increment_block, make_driver, shift
from .errors import ConfigError, DivergenceError

ESCAPE_LIMIT = 1e100
_BLOCK = 2048

StepFn = Callable[[np.ndarray, np.ndarray, tuple], np.ndarray]


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """phi(1, w) as a step map plus state-space metadata."""

    name: str
    dimension: int
    step: StepFn
    parameters: tuple = ()
    noise: NoiseSpec = field(default_factory=NoiseSpec.uniform)
    state_box: Box | None = None
    metric: str = "euclidean"
    description: str = ""

    def __post_init__(self):
        if self.dimension < 1:
            raise ConfigError("dimension must be positive")
        if self.state_box is not None and self.state_box.dimension != self.dimension:
            raise ConfigError("state_box dimension does not match the system")
        if self.metric != "euclidean":
            raise ConfigError("only the euclidean metric is supported")

    def driver(self, seed: int) -> DriverPath:
        return make_driver(seed, self.noise)


@dataclass(frozen=True)
class Trajectory:
    states: np.ndarray
    times: np.ndarray
    mode: str = "forward"

    def __post_init__(self):
        if len(self.states) != len(self.times):
            raise ValueError("states and times must have equal length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if self.mode not in ("forward", "pullback"):
            raise ValueError("mode must be 'forward' or 'pullback'")


# --- step engine --------------------------------------------------------------

def _apply(sys: SystemSpec, states: np.ndarray, inc: np.ndarray) -> np.ndarray:
    out = sys.step(states, inc, sys.parameters)
    if sys.state_box is not None:
        np.clip(out, sys.state_box.lower, sys.state_box.upper, out=out)
    return out


def _escaped(states: np.ndarray) -> np.ndarray:
    """Per-path escape flag for a (S, M, d) array; NaN counts as escaped."""
    flat = np.abs(states.reshape(states.shape[0], -1))
    with np.errstate(invalid="ignore"):
        return ~(flat.max(axis=1) <= ESCAPE_LIMIT)


def sweep(sys: SystemSpec, drivers: Sequence[DriverPath], start: int, points: np.ndarray,
          activate: np.ndarray | None = None, record: Sequence[int] | None = None,
          strict: bool = True):
    """Advance a batch of point sets from relative index ``start`` to ``start + T``.

    ``points`` has shape (S, G, N, d): ``G`` groups per path. Group ``g`` is
    reset to its initial points when the step counter equals ``activate[g]``
    (default 0), so groups can start at different times while consuming the
    same increments. Returns the final states and, if ``record`` is given,
    snapshots after that many steps, as (states, snapshots, escaped) where
    ``escaped`` is (S, G) and flags groups that left the representable range
    after activation. With ``strict`` an escape raises :class:`DivergenceError`.
    """
    init = np.array(points, dtype=np.float64)
    S, G, N, d = init.shape
    if len(drivers) != S:
        raise ValueError("one driver per leading batch row")
    activate = np.zeros(G, dtype=np.int64) if activate is None else np.asarray(activate, dtype=np.int64)
    record = sorted(set(int(r) for r in record)) if record is not None else []
    horizon = max([0, int(activate.max(initial=0))] + record)
    if record and record[0] < 0:
        raise ValueError("record times must be >= 0")
    state = init.copy().reshape(S, G * N, d)
    escaped = np.zeros((S, G), dtype=bool)
    live = activate <= 0
    resets = {int(a): activate == a for a in np.unique(activate) if a > 0}
    check = sys.state_box is None
    snaps = {}
    rec = set(record)
    if 0 in rec:
        snaps[0] = state.reshape(S, G, N, d).copy()
    j = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while j < horizon:
            count = min(_BLOCK, horizon - j)
            incs = increment_block(drivers, start + j, count)
            for c in range(count):
                state = _apply(sys, state, incs[:, c, None, :])
                j += 1
                if check:
                    bad = _escaped(state.reshape(S * G, N, d)).reshape(S, G) & live[None, :]
                    if bad.any():
                        if strict:
                            raise DivergenceError(j)
                        escaped |= bad
                mask = resets.get(j)
                if mask is not None:
                    view = state.reshape(S, G, N, d)
                    view[:, mask] = init[:, mask]
                    live = live | mask
                if j in rec:
                    snaps[j] = state.reshape(S, G, N, d).copy()
    state = state.reshape(S, G, N, d)
    return state, snaps, escaped


def evolve_batch(sys: SystemSpec, t: int, x: np.ndarray, drivers: Sequence[DriverPath],
                 strict: bool = True):
    """phi(t, w) applied to the points ``x`` (N, d) for every driver: (S, N, d)."""
    if t < 0:
        raise ValueError("t must be >= 0")
    pts = _check_state(sys, x)
    init = np.broadcast_to(pts, (len(drivers), 1) + pts.shape)
    state, _, escaped = sweep(sys, drivers, 0, init, record=[t] if t else [0], strict=strict)
    out = state[:, 0]
    if not strict:
        out[escaped[:, 0]] = np.nan
    return out


def _check_state(sys: SystemSpec, x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if sys.dimension == 1 and arr.ndim <= 1:
        pts = arr.reshape(-1, 1)
    elif arr.ndim == 1:
        pts = arr[None, :]
    else:
        pts = arr
    if pts.ndim != 2 or pts.shape[1] != sys.dimension:
        raise ValueError(f"state shape {arr.shape} does not fit system dimension {sys.dimension}")
    return pts


def evolve(sys: SystemSpec, t: int, x, omega: DriverPath) -> np.ndarray:
    """phi(t, omega) x; the result has the shape of ``x``.

    ``x`` is one state (d,) or a stack (N, d); for scalar systems any 1-D
    array is a stack of scalar states.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    shape = np.shape(x)
    pts = _check_state(sys, x)
    if t == 0:
        return pts.copy().reshape(shape)
    state, _, _ = sweep(sys, [omega], 0, pts[None, None], record=[t])
    return state[0, 0].reshape(shape)


def forward_images(sys: SystemSpec, X: PointCloud, drivers: Sequence[DriverPath],
                   times: Sequence[int], strict: bool = False):
    """phi(t, w) X for each driver and each t in ``times``.

    Returns (images, escaped) with images (S, len(times), N, d) and escaped (S,).
    """
    times = [int(t) for t in times]
    init = np.broadcast_to(X.points, (len(drivers), 1) + X.points.shape)
    _, snaps, escaped = sweep(sys, drivers, 0, init, record=times, strict=strict)
    imgs = np.stack([snaps[t][:, 0] for t in times], axis=1)
    return imgs, escaped[:, 0]


def pullback_stack(sys: SystemSpec, X: PointCloud, drivers: Sequence[DriverPath],
                   times: Sequence[int], strict: bool = False):
    """phi(t, theta_{-t} w) X for each driver and each t, in one sweep.

    All windows end at index 0; the window for ``t`` starts at ``-t``.
    Returns (images, escaped) with shapes (S, len(times), N, d) and (S, len(times)).
    """
    times = np.asarray([int(t) for t in times], dtype=np.int64)
    if times.size == 0 or times.min() < 0:
        raise ValueError("times must be non-empty and >= 0")
    T = int(times.max())
    init = np.broadcast_to(X.points, (len(drivers), len(times)) + X.points.shape)
    state, _, escaped = sweep(sys, drivers, -T, init, activate=T - times, record=[T], strict=strict)
    return state, escaped


def _lipschitz_resolution(before: np.ndarray, after: np.ndarray, res: float) -> float:
    if res == 0 or len(before) < 2:
        return res
    ratio = 0.0
    for i in range(len(before)):
        db = np.sqrt(np.sum((before - before[i]) ** 2, axis=1))
        db[i] = np.inf
        j = int(np.argmin(db))
        da = math.sqrt(float(np.sum((after[j] - after[i]) ** 2)))
        if db[j] > 0:
            ratio = max(ratio, da / db[j])
    return res * ratio


def pullback(sys: SystemSpec, t: int, X: PointCloud, omega: DriverPath) -> PointCloud:
    """phi(t, theta_{-t} omega) X.

    The image resolution is the source resolution times the largest
    nearest-neighbour stretch factor observed on the cloud.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return X
    back = shift(omega, -t)
    pts = evolve(sys, t, X.points, back)
    return PointCloud(pts, _lipschitz_resolution(X.points, pts, X.resolution), X.label)


def cocycle_residual(sys: SystemSpec, trials: int, sampler: Callable[[int], DriverPath] | None = None,
                     horizon: int = 50, seed: int = 0) -> float:
    """Largest |phi(s+t, w)x - phi(t, theta_s w) phi(s, w) x| over random trials."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    sampler = sampler or sys.driver
    box = sys.state_box or Box(-np.ones(sys.dimension), np.ones(sys.dimension))
    worst = 0.0
    for i in range(trials):
        s, t = (int(v) for v in rng.integers(0, horizon + 1, size=2))
        x = rng.uniform(box.lower, box.upper)
        w = sampler(int(rng.integers(0, 2**62)))
        lhs = evolve(sys, s + t, x, w)
        rhs = evolve(sys, t, evolve(sys, s, x, w), shift(w, s))
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return worst


def sphere_directions(d: int, m: int = 64) -> np.ndarray:
    """Deterministic unit vectors: +-e_i plus evenly spread extras."""
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        ang = 2 * np.pi * np.arange(m) / m
        return np.stack([np.cos(ang), np.sin(ang)], axis=1)
    from scipy.stats import qmc
    extra = qmc.Halton(d, scramble=False).random(m + 1)[1:] * 2 - 1
    dirs = np.concatenate([np.eye(d), -np.eye(d), extra])
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


def continuity_probe(sys: SystemSpec, t: int, x, omega: DriverPath, radii: Sequence[float],
                     directions: int = 64) -> list[tuple[float, float]]:
    """sup over the sphere of radius r about x of |phi(t,w)y - phi(t,w)x|, per r."""
    radii = [float(r) for r in radii]
    if any(b >= a for a, b in zip(radii, radii[1:])) or min(radii) <= 0:
        raise ValueError("radii must be positive and strictly decreasing")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    dirs = sphere_directions(sys.dimension, directions)
    centre = evolve(sys, t, x, omega)
    rows = []
    for r in radii:
        imgs = evolve(sys, t, x + r * dirs, omega)
        rows.append((r, float(np.max(np.sqrt(np.sum((imgs - centre) ** 2, axis=1))))))
    return rows


# --- built-in systems ---------------------------------------------------------

def _coef(inc, p, const_slot, comp_slot):
    comp = p[comp_slot]
    if comp < 0:
        return p[const_slot]
    c = int(comp)
    return inc[..., c:c + 1]


def _affine_step(x, inc, p):
    return _coef(inc, p, 0, 2) * x + _coef(inc, p, 1, 3)


def _logistic_step(x, inc, p):
    a = _coef(inc, p, 0, 1)
    return a * x * (1.0 - x)


def _double_well_step(x, inc, p):
    h, sigma = p[0], p[1]
    return x + h * (x - x * x * x) + sigma * math.sqrt(h) * inc


def _contraction_step(x, inc, p):
    return p[0] * x


def _rotation_step(x, inc, p):
    c, s = p[0], p[1]
    out = np.empty_like(x)
    out[..., 0] = c * x[..., 0] - s * x[..., 1]
    out[..., 1] = s * x[..., 0] + c * x[..., 1]
    return out


def _identity_step(x, inc, p):
    return x.copy()


def _split_specs(*specs):
    """Map constant-or-NoiseSpec coefficients onto driver components."""
    noisy = [s for s in specs if isinstance(s, NoiseSpec)]
    if not noisy:
        return NoiseSpec.uniform(), [-1.0] * len(specs)
    base = noisy[0]
    core = NoiseSpec(base.distribution, base.params, 1)
    for s in noisy[1:]:
        if NoiseSpec(s.distribution, s.params, 1) != core:
            raise ConfigError("random coefficients must share one distribution")
    comps, k = [], 0
    for s in specs:
        if isinstance(s, NoiseSpec):
            comps.append(float(k))
            k += 1
        else:
            comps.append(-1.0)
    return NoiseSpec(base.distribution, base.params, k), comps


def _const(spec) -> float:
    return float("nan") if isinstance(spec, NoiseSpec) else float(spec)


def make_affine(a_spec, b_spec) -> SystemSpec:
    """x' = a x + b with each coefficient constant or drawn from the driver."""
    noise, (ca, cb) = _split_specs(a_spec, b_spec)
    return SystemSpec("affine", 1, _affine_step, (_const(a_spec), _const(b_spec), ca, cb), noise,
                      description="x' = a x + b, scalar, random or constant coefficients")


def make_logistic(a_spec) -> SystemSpec:
    if not isinstance(a_spec, NoiseSpec) and not 0 <= float(a_spec) <= 4:
        raise ConfigError("logistic parameter must lie in [0, 4]")
    if isinstance(a_spec, NoiseSpec) and a_spec.distribution == "gaussian":
        raise ConfigError("logistic parameter needs bounded noise in [0, 4]")
    if isinstance(a_spec, NoiseSpec):
        p = a_spec.params
        lo, hi = ((p["a"], p["b"]) if a_spec.distribution == "uniform"
                  else (min(p["values"]), max(p["values"])))
        if lo < 0 or hi > 4:
            raise ConfigError("logistic parameter noise must stay inside [0, 4]")
    noise, (ca,) = _split_specs(a_spec)
    return SystemSpec("logistic", 1, _logistic_step, (_const(a_spec), ca), noise,
                      state_box=Box([0.0], [1.0]),
                      description="x' = a x (1 - x) on [0, 1]")


def make_double_well(step_size: float = 0.01, noise_scale: float = 0.1, dimension: int = 1,
                     box: float | None = 5.0) -> SystemSpec:
    """Euler scheme for dx = (x - x^3) dt + sigma dW, componentwise."""
    if step_size <= 0 or noise_scale < 0:
        raise ConfigError("double well needs step_size > 0 and noise_scale >= 0")
    state_box = None if box is None else Box(-box * np.ones(dimension), box * np.ones(dimension))
    return SystemSpec("double_well", dimension, _double_well_step, (float(step_size), float(noise_scale)),
                      NoiseSpec.gaussian(0.0, 1.0, dimension), state_box,
                      description="Euler step of dx = (x - x^3) dt + sigma dW, clamped")


def make_contraction(rate: float = 0.5, dimension: int = 1) -> SystemSpec:
    if not 0 < rate < 1:
        raise ConfigError("contraction rate must lie in (0, 1)")
    return SystemSpec("contraction", dimension, _contraction_step, (float(rate),),
                      description="x' = rate * x, deterministic")


def make_rotation(angle: float = 2 * math.pi * (math.sqrt(5) - 1) / 2) -> SystemSpec:
    """Planar rotation by a fixed angle; norm preserving, so nothing is attracted."""
    return SystemSpec("rotation", 2, _rotation_step, (math.cos(angle), math.sin(angle)),
                      description="planar rotation, norm preserving")


def make_identity(dimension: int = 1) -> SystemSpec:
    return SystemSpec("identity", dimension, _identity_step, description="x' = x")


def affine_series(sys: SystemSpec, omega: DriverPath, depth: int) -> float:
    """Closed-form pullback limit of the affine system, truncated at ``depth`` terms.

    sum_{k>=1} b(theta_{-k} w) prod_{j=1}^{k-1} a(theta_{-j} w)
    """
    if sys.name != "affine":
        raise ValueError("affine_series needs the affine system")
    inc = increment_block([omega], -depth, depth)[0][::-1]  # row j-1 holds index -j
    p = sys.parameters
    a = inc[:, int(p[2])] if p[2] >= 0 else np.full(depth, p[0])
    b = inc[:, int(p[3])] if p[3] >= 0 else np.full(depth, p[1])
    total, prod = 0.0, 1.0
    for k in range(depth):
        total += b[k] * prod
        prod *= a[k]
    return total


ZOO = {
    "affine": make_affine,
    "logistic": make_logistic,
    "double_well": make_double_well,
    "contraction": make_contraction,
    "rotation": make_rotation,
    "identity": make_identity,
}


def _coef_from_json(value):
    if isinstance(value, dict):
        return NoiseSpec.from_dict(value)
    return float(value)


def system_from_config(data: dict) -> SystemSpec:
    """Build a zoo system from ``{"system": name, "params": {...}}``."""
    if isinstance(data, str):
        data = {"system": data}
    name = data.get("system")
    params = dict(data.get("params", {}))
    if name not in ZOO:
        raise ConfigError(f"unknown system {name!r}; known: {sorted(ZOO)}")
    try:
        if name == "affine":
            return make_affine(_coef_from_json(params.get("a", 0.5)), _coef_from_json(params.get("b", 1.0)))
        if name == "logistic":
            return make_logistic(_coef_from_json(params.get("a", 3.8)))
        if name == "double_well":
            return make_double_well(float(params.get("step_size", 0.01)), float(params.get("noise_scale", 0.1)),
                                    int(params.get("dimension", 1)), params.get("box", 5.0))
        if name == "contraction":
            return make_contraction(float(params.get("rate", 0.5)), int(params.get("dimension", 1)))
        if name == "rotation":
            return make_rotation(float(params["angle"])) if "angle" in params else make_rotation()
        return make_identity(int(params.get("dimension", 1)))
    except (TypeError, ValueError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"bad parameters for system {name!r}: {exc}") from None
