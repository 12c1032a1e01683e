"""Omega-limit sets of deterministic seed sets, estimated from pullback tails."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .cloud import PointCloud, hausdorff, prune, sample_region, semidist
from .cocycle import SystemSpec, evolve, pullback_stack
from .driver import DriverPath, shift
from .errors import DivergenceError


@dataclass(frozen=True)
class OmegaConfig:
    """Tail window ``t_min, t_min + stride, ..., <= t_max`` and cloud handling."""

    t_min: int
    t_max: int
    stride: int = 1
    sample_density: int = 101
    prune_eps: float = 0.0

    def __post_init__(self):
        if not 0 <= self.t_min < self.t_max:
            raise ValueError("OmegaConfig needs 0 <= t_min < t_max")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.prune_eps < 0:
            raise ValueError("prune_eps must be >= 0")
        if self.sample_density < 1:
            raise ValueError("sample_density must be >= 1")

    @property
    def times(self) -> list[int]:
        return list(range(self.t_min, self.t_max + 1, self.stride))

    def deeper(self, factor: int = 2) -> "OmegaConfig":
        return OmegaConfig(self.t_min * factor, self.t_max * factor, self.stride,
                           self.sample_density, self.prune_eps)

    def to_json(self) -> dict:
        return asdict(self)


def tail_slices(sys: SystemSpec, B, omega: DriverPath, cfg: OmegaConfig) -> np.ndarray:
    """Pullback images of the sampled seed set at every tail time, (T, N, d)."""
    X = sample_region(B, cfg.sample_density)
    imgs, escaped = pullback_stack(sys, X, [omega], cfg.times)
    if escaped.any():
        first = int(np.asarray(cfg.times)[escaped[0]].min())
        raise DivergenceError(first, f"pullback from time {first} diverged")
    return imgs[0]


def omega_from_slices(slices: np.ndarray, prune_eps: float, label: str | None = None) -> PointCloud:
    """Tail union of slices, thinned; resolution is ``prune_eps`` plus the last-slice drift.

    The drift is the Hausdorff distance between the two deepest slices,
    which bounds how far the tail union still moves per stride.
    """
    d = slices.shape[-1]
    drift = 0.0
    if len(slices) > 1:
        drift = hausdorff(PointCloud(slices[-1]), PointCloud(slices[-2]))
    cloud = prune(PointCloud(slices.reshape(-1, d), 0.0, label), prune_eps)
    return cloud.with_resolution(prune_eps + drift)


def omega_limit(sys: SystemSpec, B, omega: DriverPath, cfg: OmegaConfig) -> PointCloud:
    """Estimate Omega_B(omega) from the tail union of pullback images of B.

    ``B`` is a PointCloud, or a Box / Neighborhood sampled at
    ``cfg.sample_density``.
    """
    return omega_from_slices(tail_slices(sys, B, omega, cfg), cfg.prune_eps)


def omega_limit_batch(sys: SystemSpec, B, drivers: Sequence[DriverPath], cfg: OmegaConfig,
                      chunk: int = 64) -> list[PointCloud | None]:
    """omega_limit for many drivers in shared sweeps; None where a seed diverged."""
    X = sample_region(B, cfg.sample_density)
    out: list[PointCloud | None] = []
    for i in range(0, len(drivers), chunk):
        part = list(drivers[i:i + chunk])
        imgs, escaped = pullback_stack(sys, X, part, cfg.times)
        for s in range(len(part)):
            out.append(None if escaped[s].any() else omega_from_slices(imgs[s], cfg.prune_eps))
    return out


class Refinement(NamedTuple):
    hausdorff: float
    nested: float  # semidist(deeper, shallower)


def omega_refinement_check(sys: SystemSpec, B, omega: DriverPath, cfg: OmegaConfig,
                           deeper: OmegaConfig) -> Refinement:
    if not (deeper.t_min > cfg.t_min and deeper.t_max > cfg.t_max):
        raise ValueError("deeper window must start and end later")
    a = omega_limit(sys, B, omega, cfg)
    b = omega_limit(sys, B, omega, deeper)
    return Refinement(hausdorff(b, a), semidist(b, a))


class InvarianceDefects(NamedTuple):
    forward: float
    strict: float
    resolution: float

    def within(self, tol: float) -> bool:
        bound = 2 * self.resolution + tol
        return self.forward <= bound and self.strict <= bound


def invariance_check(sys: SystemSpec, estimate: PointCloud, omega: DriverPath, t: int,
                     recompute: Callable[[DriverPath], PointCloud]) -> InvarianceDefects:
    """Compare phi(t, omega) A(omega) with A(theta_t omega).

    ``recompute`` rebuilds the estimate on another fibre; it is called once,
    on ``shift(omega, t)``. Returns both semi-distances and the larger of
    the two resolutions.
    """
    image = PointCloud(evolve(sys, t, estimate.points, omega))
    shifted = recompute(shift(omega, t))
    return InvarianceDefects(semidist(image, shifted), semidist(shifted, image),
                             max(estimate.resolution, shifted.resolution))


def omega_monotonicity(sys: SystemSpec, B, B_super, omega: DriverPath, cfg: OmegaConfig) -> float:
    """semidist(Omega_B, Omega_B') for B inside B'."""
    small = sample_region(B, cfg.sample_density)
    big = sample_region(B_super, cfg.sample_density)
    if semidist(small, big) > big.resolution + 1e-12:
        raise ValueError("B is not contained in B' up to the sampling resolution of B'")
    return semidist(omega_limit(sys, small, omega, cfg), omega_limit(sys, big, omega, cfg))
