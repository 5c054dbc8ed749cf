"""Singular radial solutions via the phase-plane heteroclinic orbit.

Writing ``u(x) = r^(-a) v(-log r)`` with ``a = 2/(p-1)`` turns the radial
equation ``Delta u + u^p = 0`` into the autonomous orbit equation

    v'' - b v' - c0 v + v^p = 0,   b = N - 2 - 4/(p-1),   c0 = v_inf^(p-1),

whose saddle at the origin and stable point at ``(v_inf, 0)`` are joined by
a single heteroclinic orbit.  (The drift ``b`` is negative throughout the
subcritical range, so the energy ``H = v'^2/2 - c0 v^2/2 + v^(p+1)/(p+1)``
satisfies ``dH/dt = b v'^2 <= 0`` and the orbit stays inside the
homoclinic loop ``H = 0`` of the drift-free system; that gives the strict
bound ``sup v^(p-1) < (p+1)/2 * c0``.)

The orbit is computed by launching on the unstable eigenvector
``(1, mu_plus)`` of the saddle a distance ``delta`` out, integrating with a
high-order adaptive Runge-Kutta scheme, and translating time so that
``t = 0`` is the first crossing of ``v = v_inf / 2``.  All members of the
dilation family are then ``u_eps(r) = r^(-a) v1(-log(r/eps))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from . import findiff
from .errors import NoConvergence, ToleranceUnreachable
from .params import DerivedConstants

__all__ = ["RadialProfile", "compute_profile", "normalize_profile"]


@dataclass(frozen=True)
class RadialProfile:
    """Tabulated heteroclinic orbit ``(v, v')`` on a uniform ``t``-grid.

    ``t = -log r`` for the unit dilation parameter; ``t_data_min`` marks
    where the tabulation switches from computed orbit to the exact
    far-field asymptote ``far_coefficient * exp(mu_plus * t)``.
    ``shift`` records the total time translation applied relative to the
    canonical origin (first crossing of ``v_inf/2``).
    """

    t: np.ndarray
    v: np.ndarray
    v_prime: np.ndarray
    constants: DerivedConstants
    far_coefficient: float
    shift: float
    t_data_min: float
    tol: float
    _v_interp: CubicSpline
    _vp_interp: CubicSpline

    # -- orbit evaluation ---------------------------------------------------

    def v_of_t(self, t):
        """Orbit value at arbitrary ``t``, asymptote-extended on both sides."""
        t = np.asarray(t, dtype=float)
        lo, hi = self.t[0], self.t[-1]
        out = np.empty_like(t)
        below = t < lo
        above = t > hi
        mid = ~(below | above)
        out[mid] = self._v_interp(t[mid])
        out[below] = self.far_coefficient * np.exp(self.constants.mu_plus * t[below])
        out[above] = self.constants.v_inf
        return out

    def vp_of_t(self, t):
        t = np.asarray(t, dtype=float)
        lo, hi = self.t[0], self.t[-1]
        out = np.empty_like(t)
        below = t < lo
        above = t > hi
        mid = ~(below | above)
        out[mid] = self._vp_interp(t[mid])
        mu = self.constants.mu_plus
        out[below] = mu * self.far_coefficient * np.exp(mu * t[below])
        out[above] = 0.0
        return out

    # -- the dilation family u_eps ------------------------------------------

    def u_of_r(self, epsilon: float, r):
        """``u_eps(r) = r^(-a) v1(log(eps) - log(r))`` for ``r > 0``."""
        r = np.asarray(r, dtype=float)
        t = math.log(epsilon) - np.log(r)
        return r ** (-self.constants.a) * self.v_of_t(t)

    def du_dr(self, epsilon: float, r):
        """Radial derivative, ``u' = -r^(-a-1) (a v + v')``."""
        r = np.asarray(r, dtype=float)
        t = math.log(epsilon) - np.log(r)
        a = self.constants.a
        return -(r ** (-a - 1.0)) * (a * self.v_of_t(t) + self.vp_of_t(t))

    def potential(self, r):
        """``V_p(r) = r^2 p u_1(r)^(p-1) = p v1(-log r)^(p-1)``.

        Tends to ``A_p`` as ``r -> 0`` and decays like
        ``r^((2-N)(p-1)+2)`` as ``r -> infinity``.
        """
        r = np.asarray(r, dtype=float)
        return self.constants.p * self.v_of_t(-np.log(r)) ** (self.constants.p - 1.0)

    # -- diagnostics ----------------------------------------------------------

    @property
    def sup_v(self) -> float:
        return float(np.max(self.v))

    @property
    def sup_bound(self) -> float:
        """Strict upper bound ``((p+1)/2 * v_inf^(p-1))^(1/(p-1))`` for ``sup v``."""
        c = self.constants
        return ((c.p + 1.0) / 2.0 * c.v_inf_pm1) ** (1.0 / (c.p - 1.0))

    @property
    def sup_margin(self) -> float:
        """Relative margin ``1 - sup v^(p-1) / ((p+1)/2 v_inf^(p-1))``."""
        c = self.constants
        return 1.0 - self.sup_v ** (c.p - 1.0) / ((c.p + 1.0) / 2.0 * c.v_inf_pm1)

    def hamiltonian(self) -> np.ndarray:
        """Drift-free energy along the tabulated orbit (nonincreasing)."""
        c = self.constants
        return (0.5 * self.v_prime**2 - 0.5 * c.v_inf_pm1 * self.v**2
                + self.v ** (c.p + 1.0) / (c.p + 1.0))

    def ode_residual(self) -> np.ndarray:
        """Pointwise system residual of the tabulated pair ``(v, v')``.

        ``max(|Dv - v'|, |Dv' - (b v' + c0 v - v^p)|)`` with 6th-order
        finite differences; meaningful on nodes with centered stencils.
        """
        c = self.constants
        r1 = findiff.derivative(self.t, self.v, 1, stencil=7) - self.v_prime
        rhs = c.drift * self.v_prime + c.v_inf_pm1 * self.v - self.v**c.p
        r2 = findiff.derivative(self.t, self.v_prime, 1, stencil=7) - rhs
        return np.maximum(np.abs(r1), np.abs(r2))

    def tail_slope(self) -> tuple[float, float]:
        """Log-linear fit of the computed far tail; returns (slope, stderr).

        Restricted to genuinely computed samples (no asymptote fills) with
        ``v`` between 1e-6 and 1e-3 of ``v_inf``.
        """
        c = self.constants
        mask = (self.t >= self.t_data_min) & (self.v > 1e-6 * c.v_inf) \
            & (self.v < 1e-3 * c.v_inf) & (self.t < 0)
        if np.count_nonzero(mask) < 8:
            mask = (self.t >= self.t_data_min) & (self.v < 1e-2 * c.v_inf) & (self.t < 0)
        tt, vv = self.t[mask], np.log(self.v[mask])
        A = np.vstack([np.ones_like(tt), tt]).T
        coef, res, *_ = np.linalg.lstsq(A, vv, rcond=None)
        n = tt.size
        sigma2 = float(res[0]) / max(n - 2, 1) if res.size else 0.0
        cov = sigma2 * np.linalg.inv(A.T @ A)
        return float(coef[1]), float(math.sqrt(max(cov[1, 1], 0.0)))


def _orbit_rhs(c0: float, b: float, p: float):
    def rhs(t, y):
        v, w = y
        return (w, b * w + c0 * v - v**p)
    return rhs


def compute_profile(
    constants: DerivedConstants,
    tol: float = 1e-8,
    t_span: tuple[float, float] | None = None,
    delta: float = 1e-8,
    grid_h: float = 0.01,
) -> RadialProfile:
    """Integrate the heteroclinic orbit and tabulate it on a uniform grid.

    Launches at ``delta * (1, mu_plus)`` on the unstable manifold of the
    saddle, integrates until the phase-plane distance to ``(v_inf, 0)``
    drops below ``tol`` (or the requested ``t_max`` is reached, which
    raises ``ToleranceUnreachable``), and translates time so the first
    crossing of ``v_inf/2`` sits at ``t = 0``.  Grid nodes earlier than
    the launch are filled with the exact far-field asymptote.
    """
    if not (1e-13 < tol < 1e-4):
        raise ValueError(f"tol must lie in (1e-13, 1e-4), got {tol}")
    c = constants
    b, c0, p, mu = c.drift, c.v_inf_pm1, c.p, c.mu_plus
    if t_span is not None:
        t_min, t_max = t_span
        if not (t_min < 0.0 < t_max):
            raise ValueError(f"need t_min < 0 < t_max, got {t_span}")
    else:
        t_min = -max(20.0, 30.0 / mu)
        t_max = None

    # slowest contraction rate at the stable point, for the time budget
    disc = b * b - 4.0 * (p - 1.0) * c0
    q0 = -0.5 * (b + math.sqrt(disc)) if disc > 0 else -0.5 * b

    v_half = 0.5 * c.v_inf
    tau_cross_est = math.log(v_half / delta) / mu
    tau_after = (t_max if t_max is not None
                 else math.log(2.0 * c.v_inf / tol) / q0 + 30.0)
    tau_guard = 2.0 * tau_cross_est + 20.0 + max(tau_after, 0.0)

    vbound = ((p + 1.0) / 2.0 * c0) ** (1.0 / (p - 1.0))

    def ev_converged(t, y):
        return math.hypot(y[0] - c.v_inf, y[1]) - tol
    ev_converged.terminal = True
    ev_converged.direction = -1

    def ev_blowup(t, y):
        return y[0] - 2.0 * vbound
    ev_blowup.terminal = True

    def ev_negative(t, y):
        return y[0]
    ev_negative.terminal = True
    ev_negative.direction = -1

    def ev_cross(t, y):
        return y[0] - v_half
    ev_cross.terminal = False
    ev_cross.direction = 1

    sol = solve_ivp(
        _orbit_rhs(c0, b, p),
        (0.0, tau_guard),
        [delta, delta * mu],
        method="DOP853",
        rtol=tol,
        atol=1e-14 * max(1.0, c.v_inf),
        max_step=5.0 * grid_h,  # keeps dense-output error at the grid scale
        dense_output=True,
        events=[ev_converged, ev_blowup, ev_negative, ev_cross],
    )
    if sol.t_events[1].size or sol.t_events[2].size:
        raise NoConvergence("orbit left the admissible strip 0 < v < 2*sup-bound")
    if not sol.t_events[3].size:
        raise NoConvergence("orbit never reached v_inf/2; saddle launch failed")
    tau_cross = float(sol.t_events[3][0])

    if sol.t_events[0].size:
        tau_conv = float(sol.t_events[0][0])
    else:
        raise ToleranceUnreachable(
            f"phase-plane distance did not reach tol={tol} within the time budget"
        )
    t_conv = tau_conv - tau_cross
    if t_max is not None and t_conv > t_max:
        raise ToleranceUnreachable(
            f"requested t_max={t_max} reached before tolerance {tol} "
            f"(needs t_max >= {t_conv:.2f})"
        )
    t_end = t_conv

    n = max(int(round((t_end - t_min) / grid_h)), 16)
    t_grid = np.linspace(t_min, t_end, n + 1)

    t_launch = -tau_cross  # canonical time of the launch point
    computed = t_grid >= t_launch
    vv = np.empty_like(t_grid)
    ww = np.empty_like(t_grid)
    if np.any(computed):
        y = sol.sol(t_grid[computed] + tau_cross)
        vv[computed], ww[computed] = y[0], y[1]

    # far-field coefficient: regression of log v - mu*t on the tail window,
    # with regressors for the first nonlinear corrections exp(k (p-1) mu t)
    tail = computed & (vv > 100.0 * delta) & (vv < 1e-3 * c.v_inf) & (t_grid < 0)
    if np.count_nonzero(tail) >= 8:
        tt = t_grid[tail]
        y_reg = np.log(vv[tail]) - mu * tt
        z = np.exp((p - 1.0) * mu * tt)
        A = np.vstack([np.ones_like(tt), z, z * z]).T
        coef, *_ = np.linalg.lstsq(A, y_reg, rcond=None)
        far = float(math.exp(coef[0]))
    else:
        far = delta * math.exp(mu * tau_cross)

    asym = ~computed
    vv[asym] = far * np.exp(mu * t_grid[asym])
    ww[asym] = mu * vv[asym]

    return RadialProfile(
        t=t_grid,
        v=vv,
        v_prime=ww,
        constants=c,
        far_coefficient=far,
        shift=0.0,
        t_data_min=max(t_launch, t_min),
        tol=tol,
        _v_interp=CubicSpline(t_grid, vv, extrapolate=False),
        _vp_interp=CubicSpline(t_grid, ww, extrapolate=False),
    )


def normalize_profile(profile: RadialProfile, alpha: float) -> RadialProfile:
    """Translate the orbit so that ``sup_{t <= 0} v1 <= alpha``.

    Uses the smallest translation ``s >= 0``: the returned orbit is
    ``v1(t - s)``, i.e. the tabulation grid moves up by ``s`` and the
    far-field coefficient shrinks by ``exp(-mu_plus * s)``.  Always
    achievable because ``v1 -> 0`` exponentially backward in time.
    """
    if alpha <= 0.0:
        raise ValueError("alpha must be positive")
    mask = profile.t <= 0.0
    current = float(np.max(profile.v[mask])) if np.any(mask) else 0.0
    if current <= alpha:
        return profile
    # the running max up to t = 0 is the increasing head of the orbit, so
    # the crossing of alpha on the rising branch gives the exact translation
    i_peak = int(np.argmax(profile.v))
    rising_t = profile.t[: i_peak + 1]
    if alpha <= profile.v[0]:
        # need the asymptote region: v = far * exp(mu t)
        t_alpha = math.log(alpha / profile.far_coefficient) / profile.constants.mu_plus
    else:
        f = lambda t: float(profile._v_interp(t)) - alpha
        t_alpha = brentq(f, rising_t[0], rising_t[-1], xtol=1e-13)
    s = -t_alpha
    if s <= 0.0:
        return profile
    mu = profile.constants.mu_plus
    t_new = profile.t + s
    return replace(
        profile,
        t=t_new,
        far_coefficient=profile.far_coefficient * math.exp(-mu * s),
        shift=profile.shift + s,
        t_data_min=profile.t_data_min + s,
        _v_interp=CubicSpline(t_new, profile.v, extrapolate=False),
        _vp_interp=CubicSpline(t_new, profile.v_prime, extrapolate=False),
    )
