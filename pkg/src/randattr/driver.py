"""Two-sided stationary noise paths with an exact index shift.

A :class:`DriverPath` is a seed, an integer offset and a :class:`NoiseSpec`.
Increment ``n`` of a path is a pure function of ``(seed, offset + n, component)``
computed by a stateless counter-based hash, so shifting a path is just integer
addition on the offset and the shifted stream equals the original stream read
at translated indices, bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import special, stats

from .errors import ConfigError, RangeError

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))

DISTRIBUTIONS = ("uniform", "gaussian", "discrete")


def _mix(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; a bijection on uint64, arrays wrap silently
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def _seed_key(seeds) -> np.ndarray:
    s = np.asarray(seeds, dtype=np.int64).reshape(-1).view(np.uint64)
    return _mix(s + _GOLDEN)


def _uniforms(keys: np.ndarray, index: np.ndarray, k: int) -> np.ndarray:
    """Uniforms in (0, 1), shape ``index.shape + (k,)``.

    ``keys`` must broadcast against ``index``.
    """
    idx = np.ascontiguousarray(index, dtype=np.int64).view(np.uint64)
    base = _mix(keys ^ _mix(idx))[..., None]
    comp = (np.arange(1, k + 1, dtype=np.uint64) * _GOLDEN)
    h = _mix(base + comp)
    return ((h >> _S11).astype(np.float64) + 0.5) * 2.0**-53


@dataclass(frozen=True)
class NoiseSpec:
    """Distribution of one increment component.

    ``params`` holds ``a, b`` (uniform), ``mu, sigma`` (gaussian) or
    ``values, probabilities`` (discrete).
    """

    distribution: str
    params: dict = field(default_factory=dict)
    increments_per_step: int = 1

    def __post_init__(self):
        d = self.distribution
        p = self.params
        if d not in DISTRIBUTIONS:
            raise ConfigError(f"unknown distribution {d!r}")
        if not isinstance(self.increments_per_step, (int, np.integer)) or self.increments_per_step < 1:
            raise ConfigError("increments_per_step must be a positive integer")
        try:
            if d == "uniform":
                a, b = float(p["a"]), float(p["b"])
                if not a < b:
                    raise ConfigError(f"uniform needs a < b, got a={a}, b={b}")
            elif d == "gaussian":
                float(p["mu"])
                if not float(p["sigma"]) > 0:
                    raise ConfigError("gaussian needs sigma > 0")
            else:
                values = np.asarray(p["values"], dtype=float)
                probs = np.asarray(p["probabilities"], dtype=float)
                if values.ndim != 1 or values.shape != probs.shape or values.size == 0:
                    raise ConfigError("discrete values and probabilities must be equal-length lists")
                if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
                    raise ConfigError("discrete probabilities must be non-negative and sum to 1")
        except KeyError as exc:
            raise ConfigError(f"{d} noise is missing parameter {exc.args[0]!r}") from None

    @classmethod
    def uniform(cls, a=0.0, b=1.0, k=1):
        return cls("uniform", {"a": a, "b": b}, k)

    @classmethod
    def gaussian(cls, mu=0.0, sigma=1.0, k=1):
        return cls("gaussian", {"mu": mu, "sigma": sigma}, k)

    @classmethod
    def discrete(cls, values, probabilities, k=1):
        return cls("discrete", {"values": list(values), "probabilities": list(probabilities)}, k)

    @classmethod
    def from_dict(cls, data: dict) -> "NoiseSpec":
        if not isinstance(data, dict) or "distribution" not in data:
            raise ConfigError("noise spec must be an object with a 'distribution' field")
        return cls(data["distribution"], dict(data.get("params", {})),
                   int(data.get("increments_per_step", 1)))

    def to_dict(self) -> dict:
        return {"distribution": self.distribution, "params": dict(self.params),
                "increments_per_step": int(self.increments_per_step)}

    def transform(self, u: np.ndarray) -> np.ndarray:
        """Inverse CDF applied to uniforms ``u``."""
        p = self.params
        if self.distribution == "uniform":
            a, b = float(p["a"]), float(p["b"])
            return a + (b - a) * u
        if self.distribution == "gaussian":
            return float(p["mu"]) + float(p["sigma"]) * special.ndtri(u)
        values = np.asarray(p["values"], dtype=float)
        cum = np.cumsum(np.asarray(p["probabilities"], dtype=float))
        idx = np.searchsorted(cum, u, side="right")
        return values[np.minimum(idx, values.size - 1)]


@dataclass(frozen=True)
class DriverPath:
    """One noise realization, read at ``offset + n`` for relative index ``n``."""

    seed: int
    offset: int
    spec: NoiseSpec

    def __post_init__(self):
        if not INT64_MIN <= self.seed <= INT64_MAX:
            raise RangeError(f"seed {self.seed} outside the signed 64-bit range")
        if not INT64_MIN <= self.offset <= INT64_MAX:
            raise RangeError(f"offset {self.offset} outside the signed 64-bit range")

    def shift(self, t: int) -> "DriverPath":
        return shift(self, t)

    def increment(self, n: int) -> np.ndarray:
        return increment(self, n)


def make_driver(seed: int, spec: NoiseSpec) -> DriverPath:
    if not isinstance(spec, NoiseSpec):
        raise ConfigError("spec must be a NoiseSpec")
    return DriverPath(int(seed), 0, spec)


def shift(omega: DriverPath, t: int) -> DriverPath:
    """The shifted path theta_t(omega)."""
    t = int(t)
    if t == 0:
        return omega
    new = omega.offset + t
    if not INT64_MIN <= new <= INT64_MAX:
        raise RangeError(f"shift by {t} overflows offset {omega.offset}")
    return replace(omega, offset=new)


def _check_window(offset: int, start: int, count: int) -> None:
    lo = offset + start
    hi = lo + max(count, 1) - 1
    if lo < INT64_MIN or hi > INT64_MAX:
        raise RangeError(f"absolute indices [{lo}, {hi}] leave the signed 64-bit range")


def increments(omega: DriverPath, start: int, count: int) -> np.ndarray:
    """Increments at relative indices ``start .. start + count - 1``, shape (count, k)."""
    return increment_block([omega], start, count)[0]


def increment(omega: DriverPath, n: int) -> np.ndarray:
    return increments(omega, n, 1)[0]


def increment_block(drivers: Sequence[DriverPath], start: int, count: int) -> np.ndarray:
    """Increments for several paths sharing one NoiseSpec, shape (S, count, k)."""
    if not drivers:
        raise ValueError("need at least one driver")
    spec = drivers[0].spec
    if any(w.spec != spec for w in drivers[1:]):
        raise ConfigError("drivers in one block must share a NoiseSpec")
    for w in drivers:
        _check_window(w.offset, start, count)
    offsets = np.array([w.offset for w in drivers], dtype=np.int64)
    keys = _seed_key([w.seed for w in drivers])[:, None]
    index = offsets[:, None] + (start + np.arange(count, dtype=np.int64))[None, :]
    return spec.transform(_uniforms(keys, index, spec.increments_per_step))


@dataclass
class StationarityReport:
    statistic: float
    critical_value: float
    pvalue: float
    passed: bool
    seeds: int
    window: int


def ks_critical_value(n: int, m: int, alpha: float = 0.01) -> float:
    """Asymptotic two-sample Kolmogorov-Smirnov critical value."""
    c = math.sqrt(-0.5 * math.log(alpha / 2.0))
    return c * math.sqrt((n + m) / (n * m))


def stationarity_check(spec: NoiseSpec, seeds: int, window: int, seed_base: int = 0,
                       alpha: float = 0.01) -> StationarityReport:
    """Compare increment(w, 0) with increment(shift(w, window), 0) across seeds.

    Every component is tested; the largest KS statistic is reported.
    """
    if seeds < 100:
        raise ValueError("stationarity_check needs at least 100 seeds")
    drivers = [make_driver(seed_base + i, spec) for i in range(seeds)]
    x0 = increment_block(drivers, 0, 1)[:, 0, :]
    x1 = increment_block([shift(w, window) for w in drivers], 0, 1)[:, 0, :]
    stat, pval = 0.0, 1.0
    for c in range(spec.increments_per_step):
        if np.array_equal(x0[:, c], x1[:, c]):
            continue
        res = stats.ks_2samp(x0[:, c], x1[:, c])
        if res.statistic > stat:
            stat, pval = float(res.statistic), float(res.pvalue)
    crit = ks_critical_value(seeds, seeds, alpha)
    return StationarityReport(stat, crit, pval, stat < crit, seeds, int(window))
