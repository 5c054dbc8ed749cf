import math

import numpy as np
import pytest
from scipy.linalg import solve_banded

from emden_glue import channels, findiff, params, radial
from emden_glue.channels import OdeChannel
from emden_glue.errors import (
    FitUnreliable,
    GridTooCoarse,
    RootsTooClose,
    TailNotDecayed,
)

CASES = [(5, 2.0), (3, 4.0), (4, 2.5)]


@pytest.fixture(scope="module")
def profiles():
    out = {}
    for N, p in CASES:
        c = params.derive_constants(params.ProblemParams(N, p))
        out[(N, p)] = radial.compute_profile(c, tol=1e-8)
    return out


def aligned_window(prof, t_lo=-3.0, t_hi=3.0):
    """Radial nodes aligned with the profile grid (no interpolation error)."""
    mask = (prof.t >= t_lo) & (prof.t <= t_hi)
    t = prof.t[mask][::-1]
    return np.exp(-t), prof.v[mask][::-1], prof.v_prime[mask][::-1]


def relative_channel_residual(ch, prof, r, w):
    res = channels.apply_channel(ch, prof, r, w)
    s = np.log(r)
    ws = findiff.derivative(s, w, 1, 5)
    wss = findiff.derivative(s, w, 2, 5)
    V = ch.potential(prof, r)
    N = prof.constants.N
    scale = (np.abs(wss) + (N - 2.0) * np.abs(ws)
             + np.abs((V - ch.lam) * w)) / r**2 + np.abs(ch.E * w) + 1e-300
    return float((np.abs(res) / scale)[3:-3].max())


@pytest.mark.parametrize("N,p", CASES)
def test_kernel_identity_radial_derivative(profiles, N, p):
    prof = profiles[(N, p)]
    a = prof.constants.a
    r, v, vp = aligned_window(prof)
    w = -(r ** (-a - 1.0)) * (a * v + vp)  # du_1/dr
    ch = OdeChannel(lam=float(N - 1), E=0.0, mode="full")
    assert relative_channel_residual(ch, prof, r, w) <= 1e-4


@pytest.mark.parametrize("N,p", CASES)
def test_kernel_identity_dilation_mode(profiles, N, p):
    prof = profiles[(N, p)]
    a = prof.constants.a
    r, v, vp = aligned_window(prof)
    w = -(r ** (-a)) * vp  # d/d eps of u_eps at eps = 1
    ch = OdeChannel(lam=0.0, E=0.0, mode="full")
    assert relative_channel_residual(ch, prof, r, w) <= 1e-4


def test_frozen_exact_power_is_annihilated(profiles):
    prof = profiles[(5, 2.0)]
    c = prof.constants
    lam = params.sphere_eigenvalue(2, 5)  # 10; real roots, gamma^+ = 1.37...
    roots = params.indicial_roots(c, lam)
    gp = roots.gamma_plus.real
    r = np.geomspace(0.05, 5.0, 500)
    w = r**gp
    ch = OdeChannel(lam=lam, E=0.0, mode="frozen")
    assert relative_channel_residual(ch, prof, r, w) <= 1e-8


def test_apply_channel_grid_preconditions(profiles):
    prof = profiles[(5, 2.0)]
    ch = OdeChannel(lam=4.0, E=0.0)
    with pytest.raises(GridTooCoarse):
        channels.apply_channel(ch, prof, np.array([1.0, 2.0, 3.0]), np.zeros(3))
    with pytest.raises(GridTooCoarse):
        channels.apply_channel(ch, prof, np.array([1.0, 2.0, 2.0, 3.0, 4.0]),
                               np.zeros(5))


@pytest.mark.parametrize("E", [0.5, 1.0, 2.0])
def test_frozen_decaying_solution_matches_bessel(profiles, E):
    prof = profiles[(5, 2.0)]
    ch = OdeChannel(lam=4.0, E=E, mode="frozen")
    r, w = channels.decaying_solution(ch, prof, r_min=0.01)
    ref = channels.frozen_bessel_solution(prof.constants, 4.0, E, r)
    win = (r >= 0.1) & (r <= 10.0)
    assert np.max(np.abs(w[win] / ref[win] - 1.0)) <= 1e-6


def test_decaying_solution_proportional_to_radial_derivative(profiles):
    prof = profiles[(5, 2.0)]
    ch = OdeChannel(lam=4.0, E=0.0, mode="full")
    r, w = channels.decaying_solution(ch, prof, r_min=0.01)
    win = (r >= 0.1) & (r <= 10.0)
    u1p = prof.du_dr(1.0, r[win])
    ratio = w[win] * float(prof.du_dr(1.0, 1.0)) / u1p
    assert np.max(np.abs(ratio - 1.0)) <= 1e-4


@pytest.mark.parametrize("E", [0.0, 1.0])
def test_seed_insensitivity_under_doubled_r_max(profiles, E):
    prof = profiles[(5, 2.0)]
    ch = OdeChannel(lam=4.0, E=E, mode="full")
    r1, w1 = channels.decaying_solution(ch, prof, r_min=0.01, r_max=50.0)
    r2, w2 = channels.decaying_solution(ch, prof, r_min=0.01, r_max=100.0)
    # compare deep inside, where the inward-decaying contamination has died
    hi = 1.0 if E == 0.0 else 10.0
    win1 = r1 <= hi
    n = np.count_nonzero(win1)
    assert np.allclose(r1[win1], r2[:n])
    denom = np.abs(w1[win1]) + np.abs(w2[:n])
    assert np.max(np.abs(w1[win1] - w2[:n]) / denom) <= 1e-8


def test_frobenius_pure_plus_power(profiles):
    prof = profiles[(5, 2.0)]
    roots = params.indicial_roots(prof.constants, 4.0)
    r = np.geomspace(1e-4, 0.1, 400)
    w = r ** roots.gamma_plus.real
    fit = channels.frobenius_coefficients(r, w, roots)
    assert abs(fit.a0) <= 1e-8
    assert fit.b0 == pytest.approx(1.0, abs=1e-8)
    assert fit.fit_residual <= 1e-10


def test_frobenius_recovers_synthesized_pair(profiles):
    prof = profiles[(5, 2.0)]
    roots = params.indicial_roots(prof.constants, 4.0)
    r = np.geomspace(1e-4, 0.1, 400)
    w = 3.0 * r ** roots.gamma_minus.real + 5.0 * r ** roots.gamma_plus.real
    fit = channels.frobenius_coefficients(r, w, roots)
    assert fit.a0 == pytest.approx(3.0, rel=1e-6)
    assert fit.b0 == pytest.approx(5.0, rel=1e-6)


def test_frobenius_rejects_complex_and_close_roots(profiles):
    prof = profiles[(5, 2.0)]
    c = prof.constants
    r = np.geomspace(1e-4, 0.1, 200)
    w = np.ones_like(r)
    complex_roots = params.indicial_roots(c, 0.0)  # p > p*: complex
    with pytest.raises(RootsTooClose):
        channels.frobenius_coefficients(r, w, complex_roots)
    # discriminant barely positive: gap below 0.1
    lam_close = c.A_p - ((c.N - 2.0) / 2.0) ** 2 + 1e-4
    close_roots = params.indicial_roots(c, lam_close)
    assert close_roots.is_real and close_roots.gap < 0.1
    with pytest.raises(RootsTooClose):
        channels.frobenius_coefficients(r, w, close_roots)


def test_frobenius_unreliable_for_shallow_data(profiles):
    prof = profiles[(3, 4.0)]  # slowest contraction: corrections ~ r^(1/6)
    roots = params.indicial_roots(prof.constants, 2.0)
    ch = OdeChannel(lam=2.0, E=0.0, mode="full")
    r, w = channels.decaying_solution(ch, prof, r_min=0.005)
    with pytest.raises(FitUnreliable):
        channels.frobenius_coefficients(r, w, roots)


def test_a0_positive_and_matches_closed_form(profiles):
    prof = profiles[(5, 2.0)]
    c = prof.constants
    roots = params.indicial_roots(c, 4.0)
    ch = OdeChannel(lam=4.0, E=0.0, mode="full")
    r, w = channels.decaying_solution(ch, prof, r_min=1e-12)
    fit = channels.frobenius_coefficients(r, w, roots)
    # the decaying solution at E = 0 is u_1'/u_1'(1), whose leading
    # coefficient is a*v_inf / (a*v1(0) + v1'(0))
    v0, vp0 = float(prof.v_of_t(0.0)), float(prof.vp_of_t(0.0))
    oracle = c.a * c.v_inf / (c.a * v0 + vp0)
    assert fit.a0 > 0.0
    assert fit.a0 == pytest.approx(oracle, rel=1e-3)


def test_a0_map_small_grid(profiles):
    m = channels.a0_map(5, [1.9, 2.1], [0.0, 1.0, 100.0])
    assert (m.status == "ok").all()
    assert m.all_positive
    assert np.nanmax(m.fit_residual) <= 1e-6


def test_a0_map_marks_invalid_exponent():
    m = channels.a0_map(5, [1.5, 2.0], [0.0])  # 1.5 < N/(N-2)
    assert m.status[0, 0] == "SubthresholdExponent"
    assert m.status[1, 0] == "ok"
    assert np.isnan(m.a0[0, 0]) and m.a0[1, 0] > 0


def test_large_E_cell_positive(profiles):
    prof = profiles[(5, 2.0)]
    roots = params.indicial_roots(prof.constants, 4.0)
    ch = OdeChannel(lam=4.0, E=100.0, mode="full")
    r, w = channels.decaying_solution(ch, prof, r_min=1e-12)
    fit = channels.frobenius_coefficients(r, w, roots)
    assert fit.a0 > 0.0


def test_bvp_route_agrees_with_inward_shooting(profiles):
    """Two-point boundary solves on [1, R] converge to the decaying solution."""
    prof = profiles[(5, 2.0)]
    N = 5
    ch = OdeChannel(lam=4.0, E=1.0, mode="full")
    r_dec, w_dec = channels.decaying_solution(ch, prof, r_min=0.5)

    def bvp_value_at(r_probe, R):
        h = 0.005
        n = int(round(math.log(R) / h))
        s = np.arange(n + 1) * h
        r = np.exp(s)
        V = ch.potential(prof, r)
        # w_ss + (N-2) w_s + (V - lam - E r^2) w = 0, w(0)=1, w(ln R)=0
        main = -2.0 / h**2 + (V - ch.lam - ch.E * r**2)
        upper = np.full(n + 1, 1.0 / h**2 + (N - 2.0) / (2 * h))
        lower = np.full(n + 1, 1.0 / h**2 - (N - 2.0) / (2 * h))
        ab = np.zeros((3, n - 1))
        ab[0, 1:] = upper[1:n - 1]
        ab[1, :] = main[1:n]
        ab[2, :-1] = lower[2:n]
        rhs = np.zeros(n - 1)
        rhs[0] = -(1.0 / h**2 - (N - 2.0) / (2 * h)) * 1.0
        sol = solve_banded((1, 1), ab, rhs)
        w_full = np.concatenate([[1.0], sol, [0.0]])
        return float(np.interp(math.log(r_probe), s, w_full))

    i3 = int(np.argmin(np.abs(r_dec - 3.0)))
    target = w_dec[i3]
    devs = [abs(bvp_value_at(r_dec[i3], R) - target) for R in (6.0, 12.0, 24.0)]
    assert devs[2] < devs[0]
    assert devs[2] <= 5e-4 * abs(target) + 1e-12


def test_forced_pure_plus_seed_grows(profiles):
    """Channels with lam > sup V: the a0 = 0 solution cannot decay."""
    prof = profiles[(5, 2.0)]
    lam = params.sphere_eigenvalue(2, 5)  # 10 > sup V_p ~ 6
    assert lam > prof.constants.p * prof.sup_v ** (prof.constants.p - 1.0)
    roots = params.indicial_roots(prof.constants, lam)
    gp = roots.gamma_plus.real
    from scipy.integrate import solve_ivp

    def rhs(s, y):
        r = math.exp(s)
        V = float(prof.potential(r))
        return (y[1], -(5 - 2.0) * y[1] - (V - lam) * y[0])

    s0, s1 = math.log(1e-3), math.log(50.0)
    sol = solve_ivp(rhs, (s0, s1), [math.exp(s0 * gp), gp * math.exp(s0 * gp)],
                    method="DOP853", rtol=1e-10, atol=1e-240, dense_output=True)
    w5 = abs(sol.sol(math.log(5.0))[0])
    w50 = abs(sol.sol(s1)[0])
    assert w50 > 10.0 * w5  # grows toward infinity instead of decaying


# -- Hardy inequality ---------------------------------------------------------

def test_hardy_closed_form_case():
    # w = r e^{-r}, N = 5: lhs = Gamma(5)/2^5 = 0.75,
    # int r^4 (w')^2 = (24 - 2*120 + 720/2)/2^5 ... = 2.625, rhs = 4/9 * 2.625
    r = np.geomspace(1e-4, 40.0, 4000)
    res = channels.hardy_check(r, r * np.exp(-r), N=5)
    assert res.lhs == pytest.approx(0.75, rel=1e-6)
    assert res.rhs == pytest.approx(4.0 / 9.0 * 2.625, rel=1e-6)
    assert res.ok


def test_hardy_zero_function():
    r = np.geomspace(1e-3, 10.0, 200)
    res = channels.hardy_check(r, np.zeros_like(r), N=5)
    assert res.lhs == 0.0 and res.rhs == 0.0 and res.ok


def test_hardy_random_bumps():
    rng = np.random.default_rng(2024)
    r = np.geomspace(1e-6, 1e6, 8000)
    s = np.log(r)
    for _ in range(50):
        n_bumps = int(rng.integers(1, 4))
        w = np.zeros_like(s)
        for _ in range(n_bumps):
            center = rng.uniform(-3.0, 3.0)
            width = rng.uniform(0.3, 0.8)
            amp = rng.uniform(-2.0, 2.0)
            w += amp * np.exp(-((s - center) / width) ** 2)
        res = channels.hardy_check(r, w, N=int(rng.integers(3, 9)))
        assert res.ok


def test_hardy_rejects_fat_tail():
    r = np.geomspace(1e-3, 1e3, 2000)
    w = r ** (-1.0)  # r^(N-2) w^2 does not decay at infinity for N = 5
    with pytest.raises(TailNotDecayed):
        channels.hardy_check(r, w, N=5)
