"""Glued approximate solutions with prescribed point singularities.

The approximate solution superimposes cut-off, translated and dilated
copies of the singular radial solution,

    ubar(x) = sum_i chi_R(x - x_i) u_{eps_i}(x - x_i),

with ``chi_R(x) = chi(x/R)``, ``chi = 1`` on ``|x| <= 1`` and ``0`` on
``|x| >= 2``.  Its defect under the equation,

    f(x) = Delta ubar + ubar^p
         = sum_i [ u Delta(chi_R) + 2 u' chi_R' + (chi_R^p - chi_R) u^p ],

is supported on the union of annuli ``R <= |x - x_i| <= 2R`` and decays
like ``eps^(N - 2p/(p-1))`` in the weighted sup norm as the dilation
parameters shrink.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import SpecInvalid
from .radial import RadialProfile

__all__ = [
    "BallDomain",
    "BoxDomain",
    "SingularSpec",
    "Cutoff",
    "approx_solution",
    "residual",
    "scaling_study",
]


@dataclass(frozen=True)
class BallDomain:
    center: tuple
    radius: float

    def contains_ball(self, x: np.ndarray, r: float) -> bool:
        return np.linalg.norm(np.asarray(x) - np.asarray(self.center)) + r < self.radius


@dataclass(frozen=True)
class BoxDomain:
    lo: tuple
    hi: tuple

    def contains_ball(self, x: np.ndarray, r: float) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x - r > np.asarray(self.lo))
                    and np.all(x + r < np.asarray(self.hi)))


@dataclass(frozen=True)
class SingularSpec:
    """Singular points, dilation parameters, cutoff radius, and domain.

    Invariants checked by ``validate``: the cutoff supports ``B_2R(x_i)``
    are pairwise disjoint and interior to the domain, every
    ``eps_i < R``, and the epsilons are mutually comparable:
    ``cone_a * max(eps) <= eps_i <= max(eps)``.
    """

    points: np.ndarray          # (K, d)
    epsilons: np.ndarray        # (K,)
    R: float
    domain: BallDomain | BoxDomain
    cone_a: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "points", np.atleast_2d(np.asarray(self.points, float)))
        object.__setattr__(self, "epsilons", np.atleast_1d(np.asarray(self.epsilons, float)))
        self.validate()

    def validate(self) -> None:
        K = self.points.shape[0]
        if K < 1:
            raise SpecInvalid("need at least one singular point")
        if self.epsilons.shape != (K,):
            raise SpecInvalid("need one dilation parameter per singular point")
        if not 0.0 < self.cone_a < 1.0:
            raise SpecInvalid(f"cone constant must lie in (0,1), got {self.cone_a}")
        if np.any(self.epsilons <= 0.0):
            raise SpecInvalid("dilation parameters must be positive")
        if K > 1:
            d = self.points[:, None, :] - self.points[None, :, :]
            dist = np.sqrt((d * d).sum(-1))
            np.fill_diagonal(dist, np.inf)
            r0 = 0.5 * float(dist.min())
            if not self.R < r0:
                raise SpecInvalid(
                    f"cutoff radius R = {self.R} must be below half the minimum "
                    f"pairwise distance {r0}")
        for x in self.points:
            if not self.domain.contains_ball(x, 2.0 * self.R):
                raise SpecInvalid(f"support ball B_2R around {x} leaves the domain")
        emax = float(self.epsilons.max())
        if np.any(self.epsilons < self.cone_a * emax - 1e-15):
            raise SpecInvalid("epsilons violate the cone condition a*max(eps) <= eps_i")
        if not np.all(self.epsilons < self.R):
            raise SpecInvalid("every eps_i must be below the cutoff radius R")

    @property
    def K(self) -> int:
        return self.points.shape[0]

    def with_epsilon(self, eps: float) -> "SingularSpec":
        return replace(self, epsilons=np.full(self.K, float(eps)))

    def min_distance(self, x: np.ndarray) -> np.ndarray:
        """Distance from points ``x`` (..., d) to the nearest singular point."""
        x = np.asarray(x, dtype=float)
        diffs = x[..., None, :] - self.points
        return np.sqrt((diffs * diffs).sum(-1)).min(-1)


class Cutoff:
    """Quintic-smoothstep radial cutoff: 1 on [0, R], 0 beyond 2R, C^2.

    ``chi(d) = S((2R - d)/R)`` with ``S(t) = 6t^5 - 15t^4 + 10t^3`` clamped
    to [0, 1]; first and second radial derivatives are closed forms.
    """

    def __init__(self, R: float):
        if R <= 0:
            raise SpecInvalid("cutoff radius must be positive")
        self.R = float(R)

    def _t(self, d):
        return np.clip((2.0 * self.R - np.asarray(d, float)) / self.R, 0.0, 1.0)

    def value(self, d):
        t = self._t(d)
        return t * t * t * (10.0 + t * (-15.0 + 6.0 * t))

    def dvalue(self, d):
        d = np.asarray(d, float)
        t = self._t(d)
        core = 30.0 * t * t * (1.0 - t) ** 2
        return np.where((d > self.R) & (d < 2.0 * self.R), -core / self.R, 0.0)

    def d2value(self, d):
        d = np.asarray(d, float)
        t = self._t(d)
        core = 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t)
        return np.where((d > self.R) & (d < 2.0 * self.R), core / self.R**2, 0.0)

    def laplacian(self, d, N: int):
        """Laplacian of the radial cutoff: chi'' + (N-1)/d chi'."""
        d = np.asarray(d, float)
        safe = np.where(d > 0, d, 1.0)
        return self.d2value(d) + (N - 1.0) / safe * self.dvalue(d)


@dataclass(frozen=True)
class GluedEvaluator:
    """Evaluates ``ubar`` (and companions) anywhere in the domain."""

    spec: SingularSpec
    profile: RadialProfile
    cutoff: Cutoff

    def __call__(self, x):
        return self.value(x)

    def _dists(self, x):
        x = np.asarray(x, dtype=float)
        diffs = x[..., None, :] - self.spec.points
        return np.sqrt((diffs * diffs).sum(-1))  # (..., K)

    def value(self, x):
        d = self._dists(x)
        out = 0.0
        for i, eps in enumerate(self.spec.epsilons):
            di = d[..., i]
            inside = di < 2.0 * self.cutoff.R
            term = np.zeros_like(di)
            if np.any(inside):
                dsafe = np.where(inside, di, 1.0)
                term = np.where(
                    inside,
                    self.cutoff.value(dsafe) * self.profile.u_of_r(eps, dsafe),
                    0.0,
                )
            out = out + term
        return out

    def radial_term(self, i: int, d):
        """The i-th summand as a function of the distance to ``x_i``."""
        d = np.asarray(d, dtype=float)
        return self.cutoff.value(d) * self.profile.u_of_r(self.spec.epsilons[i], d)


@dataclass(frozen=True)
class ResidualEvaluator:
    """Evaluates ``f = Delta ubar + ubar^p`` from closed-form cutoff derivatives."""

    spec: SingularSpec
    profile: RadialProfile
    cutoff: Cutoff

    def __call__(self, x):
        return self.value(x)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        diffs = x[..., None, :] - self.spec.points
        d = np.sqrt((diffs * diffs).sum(-1))
        out = 0.0
        for i, eps in enumerate(self.spec.epsilons):
            out = out + self.radial_term(i, d[..., i])
        return out

    def radial_term(self, i: int, d):
        d = np.asarray(d, dtype=float)
        R = self.cutoff.R
        active = (d > R) & (d < 2.0 * R)
        out = np.zeros_like(d)
        if not np.any(active):
            return out
        da = np.where(active, d, 1.5 * R)
        eps = self.spec.epsilons[i]
        N = self.profile.constants.N
        u = self.profile.u_of_r(eps, da)
        du = self.profile.du_dr(eps, da)
        chi = self.cutoff.value(da)
        p = self.profile.constants.p
        term = (u * self.cutoff.laplacian(da, N)
                + 2.0 * du * self.cutoff.dvalue(da)
                + (chi**p - chi) * u**p)
        return np.where(active, term, 0.0)


def approx_solution(spec: SingularSpec, profile: RadialProfile) -> GluedEvaluator:
    """Evaluator for the glued approximate solution ``ubar``."""
    spec.validate()
    return GluedEvaluator(spec=spec, profile=profile, cutoff=Cutoff(spec.R))


def residual(spec: SingularSpec, profile: RadialProfile) -> ResidualEvaluator:
    """Evaluator for the defect ``f = Delta ubar + ubar^p`` (closed form)."""
    spec.validate()
    return ResidualEvaluator(spec=spec, profile=profile, cutoff=Cutoff(spec.R))


def residual_weighted_norm(spec: SingularSpec, profile: RadialProfile,
                           gamma: float, n_samples: int = 2000) -> float:
    """Weighted sup norm ``sup rho^(2-gamma) |f|`` of the defect.

    The defect is radial around each point and supported on the annuli
    ``[R, 2R]``, where the distance to the singular set is the distance to
    the local point, so the sup reduces to one-dimensional scans.
    """
    ev = residual(spec, profile)
    d = np.linspace(spec.R, 2.0 * spec.R, n_samples)
    best = 0.0
    for i in range(spec.K):
        vals = np.abs(ev.radial_term(i, d)) * d ** (2.0 - gamma)
        best = max(best, float(vals.max()))
    return best


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    stderr: float
    eps_list: tuple
    norms: tuple


def scaling_study(spec: SingularSpec, profile: RadialProfile,
                  eps_list, gamma: float) -> ScalingFit:
    """Log-log slope of the weighted defect norm against epsilon.

    For isolated points the predicted slope is ``N - 2p/(p-1)``.  The fit
    uses the sup part of the weighted norm only; at least three epsilons
    below ``R`` are required.
    """
    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 3:
        raise SpecInvalid("need at least 3 epsilon values")
    if not all(e < spec.R for e in eps_list):
        raise SpecInvalid("every epsilon must be below the cutoff radius")
    norms = [residual_weighted_norm(spec.with_epsilon(e), profile, gamma)
             for e in eps_list]
    x = np.log(eps_list)
    y = np.log(norms)
    A = np.vstack([np.ones_like(x), x]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    n = x.size
    sigma2 = float(res[0]) / max(n - 2, 1) if res.size else 0.0
    cov = sigma2 * np.linalg.inv(A.T @ A)
    return ScalingFit(slope=float(coef[1]),
                      stderr=float(math.sqrt(max(cov[1, 1], 0.0))),
                      eps_list=tuple(eps_list), norms=tuple(norms))
