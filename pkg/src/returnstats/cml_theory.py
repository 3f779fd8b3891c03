"""Analytic return-time predictions for the coupled lattice on the diagonal.

For n coupled copies of an expanding interval map T with coupling gamma,
the tail probabilities of returns to the diagonal strip are

    alpha_hat_{k+1} = int h((x)^n) / |DT^k(x)|^{n-1} dx
                      / ( (1-gamma)^{k(n-1)} * int h((x)^n) dx )

with h the invariant density evaluated along the diagonal.  When |DT| is
constant this collapses to ((1-gamma)|DT|)^{-k(n-1)} independently of h.
The integrals are evaluated by composite 16-node Gauss-Legendre quadrature
on the branch intervals of T^k (the integrand is smooth inside each branch
and jumps across them), with adaptive bisection until refinement changes
fall below the requested tolerance.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .dynamics import IntervalMap

__all__ = ["DiagonalDensity", "CmlPrediction", "alpha_hat_integral",
           "cml_prediction", "ExpansionWarning"]

_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(16)
_MAX_BRANCHES = 1 << 21
_MAX_DEPTH = 40


class ExpansionWarning(UserWarning):
    """(1-gamma)|DT| <= 1 somewhere: transverse expansion is lost and the
    formula is outside its guaranteed validity range."""


@dataclass(frozen=True)
class DiagonalDensity:
    """Invariant density restricted to the diagonal: x -> h((x)^n)."""

    h_diag: Callable[[np.ndarray], np.ndarray]

    @classmethod
    def lebesgue(cls) -> "DiagonalDensity":
        return cls(lambda x: np.ones_like(np.asarray(x, dtype=float)))

    @classmethod
    def from_product(cls, h_base: Callable, n: int) -> "DiagonalDensity":
        """gamma = 0 product measure: h((x)^n) = h_base(x)**n."""
        return cls(lambda x: np.asarray(h_base(x), dtype=float) ** n)


def _gauss(f, a, b):
    x = 0.5 * (b - a) * _NODES + 0.5 * (a + b)
    return 0.5 * (b - a) * float(_WEIGHTS @ f(x))


def _adaptive(f, a, b, tol, depth=0):
    whole = _gauss(f, a, b)
    mid = 0.5 * (a + b)
    refined = _gauss(f, a, mid) + _gauss(f, mid, b)
    err = abs(refined - whole)
    if err <= tol or depth >= _MAX_DEPTH:
        return refined, err
    left, el = _adaptive(f, a, mid, tol / 2, depth + 1)
    right, er = _adaptive(f, mid, b, tol / 2, depth + 1)
    return left + right, el + er


def _integrate_on_partition(f, breakpoints: np.ndarray, tol: float):
    """Adaptive composite quadrature on each partition cell; returns the
    value and the summed refinement-error estimate."""
    total = 0.0
    err = 0.0
    cells = breakpoints.size - 1
    for i in range(cells):
        a, b = float(breakpoints[i]), float(breakpoints[i + 1])
        if b <= a:
            continue
        v, e = _adaptive(f, a, b, tol * (b - a))
        total += v
        err += e
    return total, err


def _derivative_power(base_map: IntervalMap, x: np.ndarray, k: int) -> np.ndarray:
    """|DT^k(x)| by the chain rule, vectorized over quadrature nodes."""
    x = np.asarray(x, dtype=float)
    d = np.ones_like(x)
    for _ in range(k):
        d *= np.abs(base_map.derivative(x))
        x = base_map.apply(x)
    return d


def _check_expansion(base_map: IntervalMap, gamma: float) -> None:
    grid = (np.arange(4096) + 0.5) / 4096
    min_d = float(np.min(np.abs(base_map.derivative(grid))))
    if (1.0 - gamma) * min_d <= 1.0:
        warnings.warn(
            f"(1-gamma)*min|DT| = {(1.0 - gamma) * min_d:.6g} <= 1: transverse "
            "expansion lost; the prediction is outside its validity range",
            ExpansionWarning, stacklevel=3)


def alpha_hat_integral(base_map: IntervalMap, h: DiagonalDensity, n: int,
                       gamma: float, k: int, tol: float = 1e-10) -> float:
    """alpha_hat_{k+1} for the n-site lattice with coupling gamma."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    if k < 0:
        raise ValueError("k must be non-negative")
    if k == 0:
        return 1.0
    _check_expansion(base_map, gamma)

    pts = base_map.branch_points_of_power(k)
    if pts.size - 1 > _MAX_BRANCHES:
        raise ValueError(f"T^{k} has {pts.size - 1} branches, above the "
                         f"partition budget {_MAX_BRANCHES}")
    num_f = lambda x: h.h_diag(x) / _derivative_power(base_map, x, k) ** (n - 1)
    num, num_err = _integrate_on_partition(num_f, pts, tol)
    den, den_err = _integrate_on_partition(h.h_diag, np.asarray(base_map.breakpoints), tol)
    if den <= 0:
        raise ValueError("diagonal density integrates to a non-positive value")
    return num / ((1.0 - gamma) ** (k * (n - 1)) * den)


@dataclass(frozen=True)
class CmlPrediction:
    """Assembled prediction; index i of ``alpha_hat`` holds alpha_hat_{i+1},
    of ``alphas`` holds alpha_{i+1}, of ``lambdas`` holds lambda_{i+1}."""

    alpha_hat: np.ndarray
    alphas: np.ndarray
    lambdas: np.ndarray
    extremal_index: float
    quadrature_error: float

    def __post_init__(self):
        ah = np.asarray(self.alpha_hat, dtype=float)
        object.__setattr__(self, "alpha_hat", ah)
        object.__setattr__(self, "alphas", np.asarray(self.alphas, dtype=float))
        object.__setattr__(self, "lambdas", np.asarray(self.lambdas, dtype=float))
        if abs(ah[0] - 1.0) > 1e-12:
            raise ValueError("alpha_hat_1 must equal 1")
        if np.any(np.diff(ah) > 1e-12):
            raise ValueError("alpha_hat must be non-increasing")

    def to_json(self) -> str:
        return json.dumps({
            "alpha_hat": self.alpha_hat.tolist(),
            "alphas": self.alphas.tolist(),
            "lambdas": self.lambdas.tolist(),
            "extremal_index": self.extremal_index,
            "quadrature_error": self.quadrature_error,
        })

    @classmethod
    def from_json(cls, text: str) -> "CmlPrediction":
        d = json.loads(text)
        return cls(np.asarray(d["alpha_hat"]), np.asarray(d["alphas"]),
                   np.asarray(d["lambdas"]), float(d["extremal_index"]),
                   float(d["quadrature_error"]))

    def to_csv(self) -> str:
        lines = ["k,alpha_hat,alpha,lambda"]
        for i in range(self.alpha_hat.size):
            a = repr(float(self.alphas[i])) if i < self.alphas.size else ""
            l = repr(float(self.lambdas[i])) if i < self.lambdas.size else ""
            lines.append(f"{i + 1},{self.alpha_hat[i]!r},{a},{l}")
        return "\n".join(lines) + "\n"


def cml_prediction(base_map: IntervalMap, h: DiagonalDensity, n: int,
                   gamma: float, k_max: int, tol: float = 1e-10) -> CmlPrediction:
    """alpha_hat_{1..k_max+1}, alpha_{1..k_max}, lambda_{1..k_max-1} and the
    extremal index alpha_1 = 1 - alpha_hat_2."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    alpha_hat = np.array([alpha_hat_integral(base_map, h, n, gamma, k, tol)
                          for k in range(k_max + 1)])
    alphas = alpha_hat[:-1] - alpha_hat[1:]
    alpha1 = float(alphas[0])
    if alpha1 <= 0:
        raise ValueError("extremal index alpha_1 = 1 - alpha_hat_2 is not positive")
    lambdas = (alphas[:-1] - alphas[1:]) / alpha1
    # crude but honest error budget: k_max+1 integrals each within ~tol
    quad_err = tol * (k_max + 1)

    lam_sum = float(lambdas.sum())
    # finite truncation leaves exactly alpha_{k_max}/alpha_1 outside the sum
    tail = float(alphas[-1] / alpha1)
    if abs(1.0 - lam_sum - tail) > 10 * max(quad_err, 1e-12):
        warnings.warn(f"lambda normalization check off by "
                      f"{abs(1.0 - lam_sum - tail):.3e}", stacklevel=2)
    return CmlPrediction(alpha_hat=alpha_hat, alphas=alphas, lambdas=lambdas,
                         extremal_index=alpha1, quadrature_error=quad_err)
