"""Discrete estimators of the weighted Hoelder norms.

A field ``w`` carries weight exponent ``gamma`` when ``rho^(-gamma) w`` is
bounded, where ``rho`` is the regularized distance to the singular set:
equal to the true distance near each point, smoothly capped at a constant
farther out.  The norm splits into

* a sup part ``max rho^(-gamma) |w|`` over the nodes (exact, and the
  quantity every convergence decision is based on), and
* a sampled scale-invariant Hoelder seminorm of ``rho^(-gamma) w``
  (a pair-sampling diagnostic, never convergence-critical).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import ExponentOrdering, NodeOnSingularSet

__all__ = [
    "WeightFunction",
    "GridField",
    "WeightedNormReport",
    "weighted_sup",
    "weighted_holder",
    "norm_report",
    "power_norm_check",
    "PowerCheckReport",
]


class WeightFunction:
    """Regularized distance to a finite set of singular points.

    ``rho(x) = d(x)`` for ``d <= sigma`` (d = distance to the nearest
    singular point), a cubic Hermite transition on ``[sigma, 2 sigma]``,
    and the constant ``cap * sigma`` beyond; continuously differentiable,
    positive away from the points, and bounded below by ``sigma`` outside
    the union of the ``B_sigma``.
    """

    def __init__(self, points, sigma: float, cap: float = 1.5):
        self.points = np.atleast_2d(np.asarray(points, dtype=float))
        if sigma <= 0:
            raise ValueError("smoothing radius sigma must be positive")
        if not 1.0 < cap <= 2.0:
            raise ValueError("cap must lie in (1, 2]")
        self.sigma = float(sigma)
        self.cap = float(cap)

    def distance(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        diffs = x[..., None, :] - self.points
        return np.sqrt((diffs * diffs).sum(-1)).min(-1)

    def __call__(self, x) -> np.ndarray:
        d = self.distance(x)
        s, c = self.sigma, self.cap
        t = np.clip((d - s) / s, 0.0, 1.0)
        # Hermite data: value s, slope s at t=0  ->  value c*s, slope 0 at t=1
        h = (2 * t**3 - 3 * t**2 + 1) * 1.0 + (t**3 - 2 * t**2 + t) * 1.0 \
            + (-2 * t**3 + 3 * t**2) * c
        blended = s * h
        return np.where(d <= s, d, np.where(d >= 2 * s, c * s, blended))


@dataclass(frozen=True)
class GridField:
    """Scalar samples on a set of nodes, with an optional weight-exponent tag."""

    points: np.ndarray   # (M, d)
    values: np.ndarray   # (M,)
    gamma: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "points", np.atleast_2d(np.asarray(self.points, float)))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if self.values.shape != (self.points.shape[0],):
            raise ValueError("values must be one scalar per node")


def _rho_at_nodes(field: GridField, weight: WeightFunction) -> np.ndarray:
    rho = weight(field.points)
    if np.any(rho <= 0.0):
        raise NodeOnSingularSet("a node sits on the singular set (rho = 0)")
    return rho


def weighted_sup(field: GridField, gamma: float, weight: WeightFunction) -> float:
    """``max rho^(-gamma) |w|`` over the nodes."""
    rho = _rho_at_nodes(field, weight)
    return float(np.max(rho ** (-gamma) * np.abs(field.values)))


def weighted_holder(field: GridField, gamma: float, weight: WeightFunction,
                    alpha: float = 0.5, pair_budget: int = 10000,
                    seed: int = 0) -> float:
    """Sampled scale-invariant Hoelder seminorm of ``rho^(-gamma) w``.

    Pairs are drawn at dyadic separation scales (nearest-neighbour queries
    stratified over octaves); for each pair the quotient

        (rho(z) + rho(z~))^alpha |wbar(z) - wbar(z~)| / |z - z~|^alpha

    with ``wbar = rho^(-gamma) w`` is evaluated, restricted to pairs whose
    separation is below half the pair's distance scale so that the two
    nodes see comparable weights.  Deterministic for a fixed seed.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    rho = _rho_at_nodes(field, weight)
    wbar = rho ** (-gamma) * field.values
    pts = field.points
    n = pts.shape[0]
    if n < 2:
        return 0.0
    rng = np.random.default_rng(seed)
    tree = cKDTree(pts)
    span = float(np.linalg.norm(pts.max(0) - pts.min(0)))
    if span == 0.0:
        return 0.0
    n_scales = 10
    per_scale = max(pair_budget // n_scales, 1)
    best = 0.0
    for k in range(1, n_scales + 1):
        sep = span / 2.0**k
        idx = rng.integers(0, n, size=per_scale)
        for i in idx:
            neigh = tree.query_ball_point(pts[i], 2.0 * sep)
            cands = [j for j in neigh if j != i]
            if not cands:
                continue
            j = cands[int(rng.integers(0, len(cands)))]
            dz = float(np.linalg.norm(pts[i] - pts[j]))
            if dz == 0.0:
                continue
            scale = rho[i] + rho[j]
            if dz > 0.5 * scale:
                continue
            q = scale**alpha * abs(wbar[i] - wbar[j]) / dz**alpha
            best = max(best, float(q))
    return best


@dataclass(frozen=True)
class WeightedNormReport:
    sup_part: float
    holder_part: float
    gamma: float
    alpha: float

    @property
    def total(self) -> float:
        return self.sup_part + self.holder_part

    def as_dict(self) -> dict:
        return {"sup_part": self.sup_part, "holder_part": self.holder_part,
                "gamma": self.gamma, "alpha": self.alpha}


def norm_report(field: GridField, gamma: float, weight: WeightFunction,
                alpha: float = 0.5, pair_budget: int = 10000,
                seed: int = 0) -> WeightedNormReport:
    return WeightedNormReport(
        sup_part=weighted_sup(field, gamma, weight),
        holder_part=weighted_holder(field, gamma, weight, alpha, pair_budget, seed),
        gamma=gamma,
        alpha=alpha,
    )


@dataclass(frozen=True)
class PowerCheckReport:
    ok: bool
    applicable: bool
    eta: float
    threshold: float
    sup_w: float
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs


def power_norm_check(field: GridField, gamma: float, p: float, eta: float,
                     weight: WeightFunction) -> PowerCheckReport:
    """Smallness transfer for the p-th power of a small field.

    Requires ``gamma > -2/(p-1)`` (so ``p*gamma >= gamma - 2``).  Then with
    ``C = max rho^(2 + (p-1)gamma)`` over the nodes, whenever
    ``s = sup rho^(-gamma)|w| <= theta = (eta/C)^(1/(p-1))`` it holds that
    ``sup rho^(2-gamma)|w^p| <= eta * s``; the report carries both sides.
    """
    if p <= 1.0:
        raise ValueError("need p > 1")
    if not gamma > -2.0 / (p - 1.0):
        raise ExponentOrdering(
            f"need gamma > -2/(p-1) = {-2.0 / (p - 1.0):.6g} strictly, got {gamma}")
    rho = _rho_at_nodes(field, weight)
    C = float(np.max(rho ** (2.0 + (p - 1.0) * gamma)))
    theta = (eta / C) ** (1.0 / (p - 1.0))
    s = weighted_sup(field, gamma, weight)
    lhs = float(np.max(rho ** (-(gamma - 2.0)) * np.abs(field.values) ** p))
    applicable = s <= theta
    ok = (not applicable) or lhs <= eta * s * (1.0 + 1e-12) or lhs == 0.0
    return PowerCheckReport(ok=bool(ok), applicable=bool(applicable), eta=eta,
                            threshold=theta, sup_w=s, lhs=lhs, rhs=eta * s)
