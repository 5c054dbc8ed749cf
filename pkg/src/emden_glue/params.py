"""Problem parameters and every closed-form constant of the construction.

For the equation ``Delta u + u^p = 0`` in dimension ``N`` the admissible
exponents are ``N/(N-2) < p < (N+2)/(N-2)``.  All constants downstream of
``(N, p)`` are elementary closed forms:

* ``a = 2/(p-1)``                    -- blow-up rate, ``u ~ r^(-a)``
* ``v_inf^(p-1) = a*(N - 2p/(p-1))`` -- amplitude of the exact singular
  solution ``v_inf * r^(-a)``
* ``A_p = p*v_inf^(p-1)``            -- zeroth-order coefficient of the
  linearization at the singularity
* ``mu_plus = N - 2p/(p-1)``         -- far-field decay exponent
  (``u ~ r^(2-N)`` carries the factor ``eps^mu_plus``)
* indicial roots ``gamma^+/-`` at ``r = 0`` and ``tilde gamma^+/-`` at
  ``r = infinity`` for each spherical eigenvalue.

Everything here is pure arithmetic, immutable, and deterministic.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from .errors import (
    DimensionTooSmall,
    SubthresholdExponent,
    SupercriticalExponent,
    WeightOutOfRange,
)

__all__ = [
    "ProblemParams",
    "DerivedConstants",
    "IndicialRoots",
    "WeightSelection",
    "validate",
    "derive_constants",
    "sphere_eigenvalue",
    "indicial_roots",
    "critical_exponent",
    "select_weights",
    "general_ball_exponent",
]


@dataclass(frozen=True)
class ProblemParams:
    """Dimension and exponent; validates the subcritical window on construction."""

    N: int
    p: float

    def __post_init__(self):
        validate_raw(self.N, self.p)

    @property
    def p_lower(self) -> float:
        return self.N / (self.N - 2)

    @property
    def p_upper(self) -> float:
        return (self.N + 2) / (self.N - 2)


def validate_raw(N: int, p: float) -> None:
    """Check ``N >= 3`` and ``N/(N-2) < p < (N+2)/(N-2)``; raise a typed error naming the bound."""
    if int(N) != N or N < 3:
        raise DimensionTooSmall(f"dimension N must be an integer >= 3, got {N}")
    lo = N / (N - 2)
    hi = (N + 2) / (N - 2)
    if not p > lo:
        raise SubthresholdExponent(
            f"exponent p = {p} must exceed N/(N-2) = {lo:.6g} (strict) for N = {N}"
        )
    if not p < hi:
        raise SupercriticalExponent(
            f"exponent p = {p} must be below (N+2)/(N-2) = {hi:.6g} (strict) for N = {N}"
        )


def validate(params: ProblemParams) -> None:
    """Re-run the ``ProblemParams`` invariant checks."""
    validate_raw(params.N, params.p)


@dataclass(frozen=True)
class DerivedConstants:
    """Closed-form constants derived from ``(N, p)``.

    ``critical_flag`` is True iff the radial indicial roots ``gamma_0^+/-``
    are complex, i.e. ``A_p > ((N-2)/2)^2``; the approach of the radial
    orbit to its limit is then a damped oscillation.
    """

    N: int
    p: float
    a: float
    v_inf: float
    A_p: float
    mu_plus: float
    critical_flag: bool

    @property
    def v_inf_pm1(self) -> float:
        """``v_inf**(p-1)``, the linear coefficient of the orbit equation."""
        return self.a * self.mu_plus

    @property
    def drift(self) -> float:
        """Drift coefficient ``N - 2 - 4/(p-1)`` of the orbit equation (negative)."""
        return self.N - 2 - 2.0 * self.a


def derive_constants(params: ProblemParams) -> DerivedConstants:
    validate(params)
    N, p = params.N, params.p
    a = 2.0 / (p - 1.0)
    mu_plus = N - 2.0 * p / (p - 1.0)
    v_pm1 = a * mu_plus
    v_inf = v_pm1 ** (1.0 / (p - 1.0))
    A_p = p * v_pm1
    critical = A_p > ((N - 2.0) / 2.0) ** 2
    return DerivedConstants(
        N=N, p=p, a=a, v_inf=v_inf, A_p=A_p, mu_plus=mu_plus, critical_flag=critical
    )


def sphere_eigenvalue(l: int, N: int) -> float:
    """Eigenvalue ``l*(l+N-2)`` of the Laplacian on the unit (N-1)-sphere."""
    if int(l) != l or l < 0:
        raise ValueError(f"spherical mode index must be an integer >= 0, got {l}")
    return float(l * (l + N - 2))


@dataclass(frozen=True)
class IndicialRoots:
    """Indicial roots at the singularity and at infinity for one spherical mode.

    ``gamma_minus/gamma_plus`` are the roots of
    ``gamma*(gamma+N-2) + A_p - lam = 0`` (complex when the discriminant is
    negative); the tilde roots drop ``A_p`` and are always real.
    """

    lam: float
    gamma_minus: complex
    gamma_plus: complex
    tilde_gamma_minus: float
    tilde_gamma_plus: float

    @property
    def is_real(self) -> bool:
        return self.gamma_minus.imag == 0.0 and self.gamma_plus.imag == 0.0

    @property
    def gap(self) -> float:
        return abs(self.gamma_plus - self.gamma_minus)


def indicial_roots(constants: DerivedConstants, lam: float) -> IndicialRoots:
    N = constants.N
    half = (N - 2.0) / 2.0
    disc = half * half + lam - constants.A_p
    root = cmath.sqrt(disc)  # principal branch: imaginary part >= 0 for disc < 0
    gm = -half - root
    gp = -half + root
    if disc >= 0.0:
        gm, gp = complex(gm.real), complex(gp.real)
    tilde_root = math.sqrt(half * half + lam)
    return IndicialRoots(
        lam=float(lam),
        gamma_minus=gm,
        gamma_plus=gp,
        tilde_gamma_minus=-half - tilde_root,
        tilde_gamma_plus=-half + tilde_root,
    )


def _A_of_p(N: int, p: float) -> float:
    s = 2.0 * p / (p - 1.0)
    return s * (N - s)


def critical_exponent(N: int, tol: float = 1e-12) -> float:
    """Exponent ``p*`` where the radial indicial roots turn complex.

    Located by bisection on the discriminant ``((N-2)/2)^2 - A_p``, which is
    strictly decreasing in ``p`` on the admissible open interval and changes
    sign exactly once.
    """
    if N < 3:
        raise DimensionTooSmall(f"dimension N must be >= 3, got {N}")
    half_sq = ((N - 2.0) / 2.0) ** 2
    lo = N / (N - 2.0)
    hi = (N + 2.0) / (N - 2.0)
    # nudge off the endpoints where the discriminant formula is still fine
    a, b = lo + 1e-14, hi - 1e-14
    fa = half_sq - _A_of_p(N, a)
    fb = half_sq - _A_of_p(N, b)
    if not (fa > 0.0 > fb):
        raise ValueError("discriminant does not change sign on the admissible interval")
    while b - a > tol:
        mid = 0.5 * (a + b)
        if half_sq - _A_of_p(N, mid) > 0.0:
            a = mid
        else:
            b = mid
    return 0.5 * (a + b)


@dataclass(frozen=True)
class WeightSelection:
    """Dual pair of growth exponents plus the auxiliary L2 weight.

    Invariants: ``-2/(p-1) < nu < Re(gamma_0^-) <= (2-N)/2`` and
    ``nu + mu = 2 - N``;  ``-2/(p-1) + (N-2)/2 < -delta_nu < nu + (N-2)/2 < 0``.
    """

    nu: float
    mu: float
    delta_nu: float


def select_weights(constants: DerivedConstants, nu: float | None = None) -> WeightSelection:
    """Pick the weight pair ``(nu, mu)`` and the L2 exponent ``delta_nu``.

    Default ``nu`` is the midpoint of the admissible interval
    ``(-2/(p-1), Re(gamma_0^-))``; an explicit ``nu`` must lie strictly
    inside it.  ``mu = 2 - N - nu`` and ``delta_nu`` defaults to the
    midpoint of its own admissible interval.
    """
    N = constants.N
    lo = -constants.a
    hi = indicial_roots(constants, 0.0).gamma_minus.real
    if nu is None:
        nu = 0.5 * (lo + hi)
    else:
        if not (lo < nu < hi):
            raise WeightOutOfRange(
                f"nu = {nu} must lie strictly inside ({lo:.6g}, {hi:.6g})"
            )
    mu = 2.0 - N - nu
    half = (N - 2.0) / 2.0
    # -delta_nu lies strictly between -a + half and nu + half (both negative)
    neg_delta = 0.5 * ((lo + half) + (nu + half))
    return WeightSelection(nu=float(nu), mu=float(mu), delta_nu=float(-neg_delta))


def general_ball_exponent(params: ProblemParams, gamma: float) -> float:
    """Residual decay exponent ``(p-3)/(p-1) - gamma`` for the non-isolated
    gluing regime; for isolated points the rate is ``mu_plus`` instead."""
    return (params.p - 3.0) / (params.p - 1.0) - gamma
