"""Shrinking target sets and their invariant measure.

Three kinds: metric balls around a point (|.| on the interval, sup of
circle metrics on the torus), the horizontal strip around the invariant
line {y = 0} of the torus map, and the strip around the diagonal of a
lattice.  Membership is closed (<=); boundaries carry zero measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["TargetSet", "Ball", "TorusStrip", "DiagonalStrip",
           "MeasureEstimate", "contains", "measure"]


@dataclass(frozen=True)
class MeasureEstimate:
    mean: float
    std_error: float
    n_samples: int

    def __post_init__(self):
        if not 0.0 <= self.mean <= 1.0:
            raise ValueError("mean must lie in [0, 1]")


def _circle_dist(u: np.ndarray, v) -> np.ndarray:
    d = np.abs(u - v) % 1.0
    return np.minimum(d, 1.0 - d)


class TargetSet:
    """Base: membership tests plus an exact Lebesgue measure when known."""

    kind: str

    def contains_points(self, pts: np.ndarray) -> np.ndarray:
        """Vectorized membership for an (n_points, dim) array."""
        raise NotImplementedError

    def contains(self, s) -> bool:
        coords = np.atleast_1d(np.asarray(getattr(s, "coords", s), dtype=float))
        return bool(self.contains_points(coords[None, :])[0])

    def exact_measure(self) -> float | None:
        """Closed-form Lebesgue measure, or None if only MC is available."""
        return None


@dataclass(frozen=True)
class Ball(TargetSet):
    """Sup-metric ball; circle metric per coordinate on the torus, plain
    absolute distance on the interval (periodic=False)."""

    center: tuple
    rho: float
    periodic: bool = False
    kind: str = "ball"

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if self.rho <= 0:
            raise ValueError("rho must be positive")

    def contains_points(self, pts):
        c = np.asarray(self.center)
        if self.periodic:
            d = _circle_dist(pts, c)
        else:
            d = np.abs(pts - c)
        return d.max(axis=-1) <= self.rho

    def exact_measure(self):
        if self.periodic:
            return float(np.prod([min(2 * self.rho, 1.0)] * len(self.center)))
        vol = 1.0
        for c in self.center:
            vol *= min(c + self.rho, 1.0) - max(c - self.rho, 0.0)
        return vol


@dataclass(frozen=True)
class TorusStrip(TargetSet):
    """{(x, y): circle distance of y to 0 <= rho} -- a neighbourhood of the
    invariant line of the torus map."""

    rho: float
    kind: str = "torus_strip"

    def __post_init__(self):
        if not 0 < self.rho <= 0.5:
            raise ValueError("rho must lie in (0, 1/2]")

    def contains_points(self, pts):
        return _circle_dist(pts[..., 1], 0.0) <= self.rho

    def exact_measure(self):
        return min(2 * self.rho, 1.0)


@dataclass(frozen=True)
class DiagonalStrip(TargetSet):
    """{x: max_{i,j} |x_i - x_j| <= nu} around the diagonal of the lattice."""

    nu: float
    kind: str = "diagonal_strip"

    def __post_init__(self):
        if not 0 < self.nu < 1:
            raise ValueError("nu must lie in (0, 1)")

    def contains_points(self, pts):
        return pts.max(axis=-1) - pts.min(axis=-1) <= self.nu

    def exact_measure(self):
        # closed form known for a pair of sites: area of {|x1 - x2| <= nu}
        return None

    def exact_measure_for_dim(self, n: int) -> float | None:
        if n == 1:
            return 1.0
        if n == 2:
            return 2 * self.nu - self.nu**2
        return None


def contains(target: TargetSet, s) -> bool:
    return target.contains(s)


def measure(target: TargetSet, map_system, n_samples: int, seed) -> MeasureEstimate:
    """mu(U) under the system's stationary law.

    Returns the closed form (std_error 0) when the system preserves Lebesgue
    measure and the target has one; otherwise Monte Carlo hit frequency over
    ``n_samples`` stationary draws.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    from .dynamics import LinearInterval  # local import avoids a cycle

    spec = getattr(map_system, "spec", None)
    uncoupled_linear = (spec is not None and spec.gamma == 0.0
                        and isinstance(spec.base_map, LinearInterval))
    lebesgue = getattr(map_system, "backend", "").startswith("exact-digit") \
        or uncoupled_linear
    if lebesgue:
        if isinstance(target, DiagonalStrip):
            exact = target.exact_measure_for_dim(map_system.dimension)
        else:
            exact = target.exact_measure()
        if exact is not None:
            return MeasureEstimate(mean=exact, std_error=0.0, n_samples=n_samples)

    master_seed, trial_index = seed
    pts = map_system.stationary_samples(master_seed, trial_index, n_samples)
    hits = int(np.count_nonzero(target.contains_points(pts)))
    mean = hits / n_samples
    return MeasureEstimate(mean=mean,
                           std_error=math.sqrt(mean * (1.0 - mean) / n_samples),
                           n_samples=n_samples)
