"""Eigencomponent ODE channels of the linearized operator.

Separating the linearization ``Delta + p u_1^(p-1)`` on the punctured
space into spherical modes (eigenvalue ``lam``) and, for cylindrical
geometry, a transverse Fourier parameter ``E = |eta|^2 >= 0`` gives the
two-parameter family of radial operators

    L_{lam,E} w = w'' + (N-1)/r w' + ((V(r) - lam)/r^2 - E) w,

with ``V(r) = r^2 p u_1(r)^(p-1)`` (full mode) or the constant ``A_p``
(frozen mode; its decaying solutions are modified Bessel functions).

The central computation is the leading Frobenius coefficient ``a0`` of
the decaying solution: ``w ~ a0 r^(gamma^-) + b0 r^(gamma^+)`` near the
singular point.  Positivity of ``a0`` across the ``(p, E)`` strip is the
numerical content of the injectivity property that makes the weighted
right inverse possible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import kve

from . import findiff
from .errors import (
    FitUnreliable,
    GridTooCoarse,
    NormalizationFailure,
    RootsTooClose,
    TailNotDecayed,
)
from .params import (
    DerivedConstants,
    IndicialRoots,
    ProblemParams,
    derive_constants,
    indicial_roots,
    sphere_eigenvalue,
)
from .radial import RadialProfile, compute_profile

__all__ = [
    "OdeChannel",
    "apply_channel",
    "decaying_solution",
    "FrobeniusFit",
    "frobenius_coefficients",
    "A0Map",
    "a0_map",
    "hardy_check",
    "HardyResult",
    "frozen_bessel_solution",
]


@dataclass(frozen=True)
class OdeChannel:
    """One member of the operator family: spherical eigenvalue, transverse
    Fourier parameter, and whether the potential is the full ``V(r)`` or
    frozen at its limit ``A_p``."""

    lam: float
    E: float
    mode: str = "full"  # "full" | "frozen"

    def __post_init__(self):
        if self.E < 0.0:
            raise ValueError("E must be >= 0")
        if self.mode not in ("full", "frozen"):
            raise ValueError("mode must be 'full' or 'frozen'")

    def potential(self, profile: RadialProfile, r):
        if self.mode == "frozen":
            return np.full_like(np.asarray(r, dtype=float), profile.constants.A_p)
        return profile.potential(r)


def apply_channel(channel: OdeChannel, profile: RadialProfile, r, w) -> np.ndarray:
    """Residual ``L_{lam,E} w`` on a log grid by 4th-order finite differences.

    ``r`` must be strictly increasing with at least 5 nodes; derivatives
    are taken in ``s = log r`` where the operator reads
    ``e^(-2s) (w_ss + (N-2) w_s + (V - lam) w) - E w``.
    """
    r = np.asarray(r, dtype=float)
    w = np.asarray(w, dtype=float)
    if r.size < 5:
        raise GridTooCoarse("need at least 5 grid nodes")
    if np.any(np.diff(r) <= 0.0):
        raise GridTooCoarse("grid must be strictly increasing")
    N = profile.constants.N
    s = np.log(r)
    ws = findiff.derivative(s, w, 1, stencil=5)
    wss = findiff.derivative(s, w, 2, stencil=5)
    V = channel.potential(profile, r)
    return (wss + (N - 2.0) * ws + (V - channel.lam) * w) / r**2 - channel.E * w


def _channel_rhs(channel: OdeChannel, profile: RadialProfile):
    N = profile.constants.N

    def rhs(s, y):
        w, ws = y
        r = math.exp(s)
        V = float(channel.potential(profile, r))
        return (ws,
                -(N - 2.0) * ws - (V - channel.lam) * w + channel.E * r * r * w)

    return rhs


def decaying_solution(channel: OdeChannel, profile: RadialProfile,
                      r_min: float = 0.01, r_max: float | None = None,
                      rtol: float = 1e-10, grid_h: float = 0.01):
    """The solution decaying at infinity, normalized to ``w(1) = 1``.

    Integrates inward from ``r_max`` in the log variable, seeding with the
    asymptotic form ``exp(-r sqrt(E)) r^(-(N-1)/2)`` for ``E > 0`` or the
    decaying power ``r^(tilde gamma^-)`` for ``E = 0``.  Inward integration
    is stable because the decaying-at-infinity branch dominates going in;
    the state is rescaled segment-by-segment so the astronomical dynamic
    range never overflows.  Returns ``(r_grid, w)`` on a uniform log grid
    containing ``r = 1`` exactly.
    """
    c = profile.constants
    N = c.N
    if r_max is None:
        r_max = max(50.0, 30.0 / math.sqrt(channel.E)) if channel.E > 0 else 50.0
    if not (0.0 < r_min < 1.0 < r_max):
        raise ValueError("need r_min < 1 < r_max")
    sqE = math.sqrt(channel.E)

    # uniform log grid containing s = 0
    n_lo = int(math.ceil(-math.log(r_min) / grid_h))
    n_hi = int(math.ceil(math.log(r_max) / grid_h))
    s_nodes = np.arange(-n_lo, n_hi + 1) * grid_h
    s_lo, s_hi = float(s_nodes[0]), float(s_nodes[-1])

    if channel.E > 0.0:
        r_seed = math.exp(s_hi)
        dlog = -sqE * r_seed - (N - 1.0) / 2.0
    else:
        roots = indicial_roots(c, channel.lam)
        dlog = roots.tilde_gamma_minus
    y = np.array([1.0, dlog])

    rhs = _channel_rhs(channel, profile)
    logw = np.empty(s_nodes.size)
    sign = np.empty(s_nodes.size)
    log_scale = 0.0
    s_cur = s_hi
    next_node = s_nodes.size - 1
    logw[next_node] = math.log(abs(y[0])) if y[0] != 0 else -math.inf
    sign[next_node] = math.copysign(1.0, y[0])
    next_node -= 1
    while s_cur > s_lo + 1e-14:
        rate = sqE * math.exp(s_cur) + 20.0
        seg = min(5.0, 60.0 / rate)
        s_next = max(s_lo, s_cur - seg)
        sol = solve_ivp(rhs, (s_cur, s_next), y, method="DOP853",
                        rtol=rtol, atol=1e-250, dense_output=True)
        if not sol.success:
            raise NormalizationFailure(f"inward integration failed: {sol.message}")
        while next_node >= 0 and s_nodes[next_node] >= s_next - 1e-14:
            val = float(sol.sol(s_nodes[next_node])[0])
            logw[next_node] = (math.log(abs(val)) + log_scale) if val != 0 else -math.inf
            sign[next_node] = math.copysign(1.0, val) if val != 0 else 0.0
            next_node -= 1
        y = sol.y[:, -1].copy()
        mag = max(abs(y[0]), abs(y[1]))
        if mag > 0.0:
            y /= mag
            log_scale += math.log(mag)
        s_cur = s_next

    i_one = int(np.argmin(np.abs(s_nodes)))  # s = 0 is a grid node
    if not np.isfinite(logw[i_one]) or sign[i_one] == 0.0:
        raise NormalizationFailure("decaying solution vanishes at r = 1")
    with np.errstate(under="ignore"):
        w = sign * sign[i_one] * np.exp(logw - logw[i_one])
    return np.exp(s_nodes), w


@dataclass(frozen=True)
class FrobeniusFit:
    """Leading coefficients of ``w ~ a0 r^(gamma^-) + b0 r^(gamma^+)``.

    ``fit_residual`` is the max misfit on the window relative to the
    window sup of ``w``.  ``b0`` is only meaningful when the window is not
    deep enough for the ``gamma^+`` column to vanish numerically; ``a0``
    is the robust output.
    """

    a0: float
    b0: float
    window: tuple[float, float]
    fit_residual: float


def frobenius_coefficients(r, w, roots: IndicialRoots,
                           r_hi: float = 0.1, fit_tol: float = 1e-6,
                           min_points: int = 12) -> FrobeniusFit:
    """Windowed least-squares extraction of the leading Frobenius pair.

    Both indicial roots must be real and separated by at least 0.1 (fit
    conditioning).  Candidate windows of fixed logarithmic width slide
    from ``r_hi`` toward the smallest tabulated radii; the first window
    whose two-term fit reproduces the data to ``fit_tol`` of the window
    sup is accepted.  Corrections to the two-term form vanish like a
    positive power of the window center, so sliding deep enough always
    succeeds when the data reach deep enough radii.  (Root pairs differing
    by an integer can carry logarithmic companion terms; these sit at
    depth ``r^(gamma^+) log r``, invisible next to ``r^(gamma^-)`` in deep
    windows, so integer gaps are not rejected.)
    """
    if not roots.is_real:
        raise RootsTooClose("indicial roots are complex; no two-power fit")
    gm, gp = roots.gamma_minus.real, roots.gamma_plus.real
    if gp - gm < 0.1:
        raise RootsTooClose(f"indicial root gap {gp - gm:.3g} below 0.1")
    r = np.asarray(r, dtype=float)
    w = np.asarray(w, dtype=float)
    width = 0.7  # window width in natural log
    step = 0.35
    hi = min(r_hi, r[-1])
    best = None
    s_hi = math.log(hi)
    s_min = math.log(r[0])
    while s_hi - width >= s_min - 1e-12:
        mask = (r >= math.exp(s_hi - width)) & (r <= math.exp(s_hi))
        if np.count_nonzero(mask) >= min_points:
            rr, ww = r[mask], w[mask]
            sup = float(np.abs(ww).max())
            if sup > 0.0:
                f1 = rr**gm
                f2 = rr**gp
                s1, s2 = float(np.abs(f1).max()), float(np.abs(f2).max())
                A = np.column_stack([f1 / s1, f2 / s2])
                coef, *_ = np.linalg.lstsq(A, ww, rcond=None)
                resid = float(np.abs(A @ coef - ww).max()) / sup
                fit = FrobeniusFit(
                    a0=float(coef[0] / s1), b0=float(coef[1] / s2),
                    window=(float(rr[0]), float(rr[-1])), fit_residual=resid)
                if resid < fit_tol:
                    return fit
                if best is None or resid < best.fit_residual:
                    best = fit
        s_hi -= step
    achieved = best.fit_residual if best is not None else math.inf
    raise FitUnreliable(
        f"no window reached fit residual {fit_tol:g} (best {achieved:.3g}); "
        "extend the data to smaller radii")


@dataclass(frozen=True)
class A0Map:
    """Grid of leading coefficients over the ``(p, E)`` strip."""

    N: int
    lam: float
    p_values: tuple
    E_values: tuple
    a0: np.ndarray            # (n_p, n_E), nan on invalid cells
    b0: np.ndarray
    fit_residual: np.ndarray
    status: np.ndarray        # strings: "ok" or the error type name

    @property
    def all_positive(self) -> bool:
        valid = self.status == "ok"
        return bool(valid.any()) and bool(np.all(self.a0[valid] > 0.0))


def _auto_depth(constants: DerivedConstants, roots: IndicialRoots) -> float:
    """Inner radius for Frobenius windows, from the potential's decay rate.

    ``V - A_p`` vanishes like ``r^q0`` with ``q0`` the slowest contraction
    rate at the stable point; the window must sit deep enough that this
    correction drops below the fit tolerance.  Capped so ``r^(gamma^-)``
    stays representable after normalization at ``r = 1``.
    """
    c = constants
    disc = c.drift**2 - 4.0 * (c.p - 1.0) * c.v_inf_pm1
    q0 = -0.5 * (c.drift + math.sqrt(disc)) if disc > 0 else -0.5 * c.drift
    depth = math.log(1e5) / q0 + 12.0
    cap = 600.0 / max(abs(roots.gamma_minus.real), 1.0)
    return math.exp(-min(depth, cap))


def a0_map(N: int, p_values, E_values, lam: float | None = None,
           profile_tol: float = 1e-8, r_min: float | None = None,
           fit_tol: float = 1e-6, rtol: float = 1e-10) -> A0Map:
    """Leading-coefficient map over a ``(p, E)`` grid at fixed dimension.

    Each cell composes the inward-shot decaying solution with the
    windowed Frobenius fit; failures mark the cell invalid instead of
    aborting the map.  ``r_min = None`` picks the window depth per ``p``
    from the potential's decay rate (slowly contracting cases need very
    deep, and cheap, log-variable integration).
    """
    if lam is None:
        lam = sphere_eigenvalue(1, N)
    p_values = [float(p) for p in p_values]
    E_values = [float(E) for E in E_values]
    shape = (len(p_values), len(E_values))
    a0 = np.full(shape, np.nan)
    b0 = np.full(shape, np.nan)
    res = np.full(shape, np.nan)
    status = np.full(shape, "ok", dtype=object)
    for i, p in enumerate(p_values):
        try:
            constants = derive_constants(ProblemParams(N, p))
            profile = compute_profile(constants, tol=profile_tol)
            roots = indicial_roots(constants, lam)
        except Exception as exc:  # invalid p for this N, or profile failure
            status[i, :] = type(exc).__name__
            continue
        depth = r_min if r_min is not None else _auto_depth(constants, roots)
        for j, E in enumerate(E_values):
            try:
                channel = OdeChannel(lam=lam, E=E, mode="full")
                r, w = decaying_solution(channel, profile, r_min=depth, rtol=rtol)
                fit = frobenius_coefficients(r, w, roots, fit_tol=fit_tol)
                a0[i, j] = fit.a0
                b0[i, j] = fit.b0
                res[i, j] = fit.fit_residual
            except Exception as exc:
                status[i, j] = type(exc).__name__
    return A0Map(N=N, lam=float(lam), p_values=tuple(p_values),
                 E_values=tuple(E_values), a0=a0, b0=b0,
                 fit_residual=res, status=np.asarray(status))


@dataclass(frozen=True)
class HardyResult:
    lhs: float
    rhs: float
    ok: bool


def hardy_check(r, w, N: int, slack: float = 1e-6) -> HardyResult:
    """Weighted integral inequality for functions decaying at both ends:

        int r^(N-3) w^2 dr  <=  4/(N-2)^2 int r^(N-1) (w')^2 dr,

    evaluated by the trapezoid rule in the log variable.  Raises if the
    integrand has not decayed at either end of the grid.
    """
    r = np.asarray(r, dtype=float)
    w = np.asarray(w, dtype=float)
    s = np.log(r)
    weight = np.exp((N - 2.0) * s)
    f_lhs = weight * w**2
    interior_max = float(f_lhs.max())
    if interior_max > 0.0:
        edge = max(f_lhs[0], f_lhs[-1], f_lhs[1], f_lhs[-2])
        if edge > 1e-9 * interior_max:
            raise TailNotDecayed(
                "integrand r^(N-2) w^2 has not decayed at the grid ends")
    lhs = float(np.trapezoid(f_lhs, s))
    ws = findiff.derivative(s, w, 1, stencil=5)
    rhs = 4.0 / (N - 2.0) ** 2 * float(np.trapezoid(weight * ws**2, s))
    return HardyResult(lhs=lhs, rhs=rhs, ok=lhs <= rhs * (1.0 + slack))


def frozen_bessel_solution(constants: DerivedConstants, lam: float, E: float, r):
    """Closed form for the frozen channel's decaying solution, ``w(1) = 1``:

        w(r) = r^((2-N)/2) K_kappa(r sqrt(E)) / K_kappa(sqrt(E)),
        kappa = sqrt(((N-2)/2)^2 + lam - A_p),

    evaluated through the exponentially scaled Bessel routine so that it
    stays finite over the whole dynamic range.
    """
    if E <= 0.0:
        raise ValueError("closed form needs E > 0")
    N = constants.N
    kappa2 = ((N - 2.0) / 2.0) ** 2 + lam - constants.A_p
    if kappa2 <= 0.0:
        raise ValueError("order must be real: ((N-2)/2)^2 + lam - A_p > 0")
    kappa = math.sqrt(kappa2)
    r = np.asarray(r, dtype=float)
    x = np.sqrt(E) * r
    x1 = math.sqrt(E)
    # log w = ((2-N)/2) log r + log K(x) - log K(x1);  kve = kv * e^x
    logw = ((2.0 - N) / 2.0) * np.log(r) + np.log(kve(kappa, x)) - x \
        - (math.log(kve(kappa, x1)) - x1)
    with np.errstate(under="ignore"):
        return np.exp(logw)
