import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad
from scipy.special import roots_legendre

from weakasym import oracles
from weakasym.errors import AccuracyError, DomainError, SingularConfigurationError, TaxonomyError
from weakasym.harmonics import sphere_area
from weakasym.singular import (
    F_pm,
    cauchy_log_subtraction,
    cauchy_subtracted_rule,
    delta_reduce_Dm,
    endpoint_weighted_pole,
    radial_pole_integral,
    smoothness_certificate,
    weighted_pole_moment,
)
from weakasym.tmatrix import (
    DeltaConnectedKernel,
    GaussianKernel,
    SinglePoleKernel,
    TKernel,
    ZeroKernel,
    model_NBody_kernel,
)


def B(u):
    return np.exp(0.3 * u) * np.cos(u) + 0.2j * u**2


def pv_cauchy(f, a, b, x0):
    o = dict(weight="cauchy", wvar=x0, epsabs=1e-14, limit=500)
    return quad(lambda u: np.real(f(u)), a, b, **o)[0] + 1j * quad(lambda u: np.imag(f(u)), a, b, **o)[0]


# --------------------------------------------------------------------------
# moving pole on [-1, 1]


def test_log_subtraction_reference_values():
    assert abs(cauchy_log_subtraction(lambda u: 1 + 0 * u, 0.0, +1).value + 1j * np.pi) < 1e-10
    assert cauchy_log_subtraction(lambda u: u, 0.0, +1).value == pytest.approx(2.0, abs=1e-12)


@given(st.floats(-0.995, 0.995), st.sampled_from([1, -1]))
@settings(max_examples=25, deadline=None)
def test_log_subtraction_matches_pv_plus_delta(zeta, side):
    r = cauchy_log_subtraction(B, zeta, side)
    ref = pv_cauchy(B, -1, 1, zeta) - side * 1j * np.pi * B(zeta)
    assert abs(r.value - ref) < 1e-10


@pytest.mark.parametrize("zeta", [1.4, -3.0, 0.3 + 0.1j, -0.7 - 0.2j])
def test_log_subtraction_off_interval(zeta):
    ref = oracles._cquad(lambda u: B(u) / (u - zeta), -1, 1)
    for side in (1, -1):
        assert abs(cauchy_log_subtraction(B, zeta, side).value - ref) < 1e-10


@given(st.floats(-0.99, 0.99))
@settings(max_examples=20, deadline=None)
def test_plemelj_jump(zeta):
    plus = cauchy_log_subtraction(B, zeta, +1).value
    minus = cauchy_log_subtraction(B, zeta, -1).value
    # 1/(x + i0) - 1/(x - i0) = -2 pi i delta(x)
    jump = -2j * np.pi * B(zeta)
    assert abs(plus - minus - jump) < 1e-8 * abs(jump)


def test_endpoint_pole_is_rejected():
    with pytest.raises(SingularConfigurationError):
        cauchy_log_subtraction(B, 1.0, +1)


@pytest.mark.parametrize("zeta", [-0.999, -0.4, 0.0, 0.8, 1.05, 2.5, -7.0])
@pytest.mark.parametrize("side", [1, -1])
def test_batched_rule_matches_scalar(zeta, side):
    u, w = roots_legendre(60)
    batched = cauchy_subtracted_rule(B(u), np.asarray(B(np.clip(zeta, -1, 1))), zeta, side, u, w)
    assert abs(batched - cauchy_log_subtraction(B, zeta, side).value) < 1e-11


# --------------------------------------------------------------------------
# endpoint-weighted pole


def Bv(v):
    return np.cos(2 * v) + 1j * v


def test_endpoint_weighted_reference_value():
    r = endpoint_weighted_pole(lambda v: np.ones_like(v), -1.0)
    assert abs(r.value - np.pi * (1.5 - np.sqrt(2))) < 1e-8


@given(st.floats(0.01, 0.99), st.sampled_from([1, -1]))
@settings(max_examples=20, deadline=None)
def test_endpoint_weighted_inside(z, side):
    r = endpoint_weighted_pole(Bv, z, side)
    f = lambda v: np.sqrt(v * (1 - v)) * Bv(v)
    ref = pv_cauchy(f, 0, 1, z) - side * 1j * np.pi * f(z)
    assert abs(r.value - ref) < 1e-10


@pytest.mark.parametrize("z", [0.0, 1.0, -0.3, 1.7, 0.5 + 0.2j, 0.1 - 0.05j])
def test_endpoint_weighted_off_interval_and_ends(z):
    # at the ends the singularity is integrable, so a plain quadrature applies
    ref = oracles._cquad(lambda v: np.sqrt(v * (1 - v)) * Bv(v) / (v - z), 0, 1)
    assert abs(endpoint_weighted_pole(Bv, z).value - ref) < 1e-9


def test_weighted_moment_decay():
    for z in (50.0, -80.0):
        assert weighted_pole_moment(z) == pytest.approx(-np.pi / (8 * z), rel=2e-2)
    assert weighted_pole_moment(0.25, -1) == pytest.approx(np.pi * (0.25 + 1j * np.sqrt(3) / 4))


def test_ieps_sweep():
    # 20-point sweep in the style of the acceptance gate
    rng = np.random.default_rng(11)
    for zeta in rng.uniform(-0.9, 0.9, 10):
        side = 1 if zeta > 0 else -1
        ref = oracles.cauchy_ieps(B, zeta, side)
        assert abs(cauchy_log_subtraction(B, zeta, side).value - ref) < 1e-4
    for z in rng.uniform(0.1, 0.9, 10):
        ref = oracles.endpoint_ieps(Bv, z)
        assert abs(endpoint_weighted_pole(Bv, z).value - ref) < 1e-4


# --------------------------------------------------------------------------
# delta reduction


def tc(kk):
    return np.exp(-0.4 * np.sum(kk * kk, 1)) * (1 + 0.3 * kk[:, 0])


def G6(x):
    return np.exp(0.3 * x[:, 0] - 0.2 * x[:, 5] + 0.1 * x[:, 2])


def test_delta_reduction_matches_mollified_delta():
    p = np.array([0.2, -0.3, 0.4])
    R = 1.1
    exact = delta_reduce_Dm(tc, G6, p, R, 6).value
    sig = [0.04, 0.02]
    vals = [oracles.mollified_delta_shell(tc, G6, p, R, s) for s in sig]
    # O(sigma^2) error: Richardson in sigma^2
    ref = (4 * vals[1] - vals[0]) / 3
    assert abs(exact - ref) < 1e-5 * abs(exact)


def test_delta_reduction_threshold_and_errors():
    r = delta_reduce_Dm(tc, G6, np.array([1.0, 0, 0]), 0.9, 6)
    assert r.value == 0 and "below-threshold" in r.flags
    with pytest.raises(DomainError):
        delta_reduce_Dm(tc, G6, np.zeros(6), 1.0, 6)


def test_delta_reduction_constant_integrand():
    # t^c = G = 1: kappa / |P'|^4 times the area of S^2
    p = np.array([0.6, 0, 0])
    one = lambda x: np.ones(len(x))
    val = delta_reduce_Dm(one, one, p, 1.0, 6).value
    assert val == pytest.approx(0.8 * 4 * np.pi, rel=1e-13)


# --------------------------------------------------------------------------
# F_pm dispatch


P6 = np.array([0.0, 0.0, 0.9, np.sqrt(1 - 0.81), 0.0, 0.0])


def test_fpm_zero_and_gaussian():
    one = lambda x: np.ones(len(x))
    assert F_pm(ZeroKernel(6), P6, 1.0, one).value == 0
    T = GaussianKernel(6, 2.0, 0.5)
    r = F_pm(T, P6, 1.2, one)
    assert r.value == pytest.approx(2.0 * np.exp(-0.5 * (1.44 + 1)) * sphere_area(6), rel=1e-12)
    # G(-x) for the minus sign
    plus = F_pm(T, P6, 1.2, G6, +1).value
    minus = F_pm(T, P6, 1.2, lambda x: G6(-x), -1).value
    assert plus == pytest.approx(minus, rel=1e-13)


def test_fpm_delta_connected_dispatch():
    T = DeltaConnectedKernel(lambda kk, k, E: tc(kk))
    r = F_pm(T, P6, 1.1, G6)
    assert r.value == pytest.approx(delta_reduce_Dm(tc, G6, P6[:3], 1.1, 6).value, rel=1e-14)


class HiddenPole(TKernel):
    d = 6
    tags = frozenset({"smooth"})

    def evaluate(self, Pp, P, z):
        return 1.0 / (np.sum(Pp[:, :3] ** 2, 1) - 0.3 + 1e-4j)


def test_fpm_refuses_undeclared_singularities():
    with pytest.raises(TaxonomyError):
        F_pm(HiddenPole(), P6, 1.0, G6)


class Unknown(TKernel):
    d = 6
    tags = frozenset({"three-body-force"})


def test_fpm_refuses_unknown_kernels():
    with pytest.raises(TaxonomyError):
        F_pm(Unknown(), P6, 1.0, G6)
    with pytest.raises(DomainError):
        F_pm(GaussianKernel(6, 1.0, 1.0), P6, 0.0, G6)


@pytest.mark.parametrize("R", [0.9, 1.3])
def test_fpm_single_pole_matches_ieps(R):
    T = SinglePoleKernel(1.0, 1.0, 0.5, 1.0, 0.3)
    r = F_pm(T, P6, R, G6)
    eps = [2e-3, 1e-3, 5e-4]
    ref = oracles.richardson(eps, [oracles.single_pole_fpm_ieps(T, P6, R, G6, eps=e) for e in eps])
    assert abs(r.value - ref) < 1e-4 * abs(ref)


TA = dict(norm=1.0, beta=1.0, lam=0.5, c=0.3, a=0.5)
TB = dict(norm=1.0, beta=1.2, lam=0.5, c=0.2, a=0.4)


def composed():
    return model_NBody_kernel({"kind": "composed", "ta": TA, "tb": TB})


def test_composed_fpm_matches_ieps():
    T = composed()
    R = 1.0
    r = F_pm(T, P6, R, G6)
    assert r.error_estimate < 1e-5 * abs(r.value)
    eps = [2e-3, 1e-3, 5e-4]
    ref = oracles.richardson(eps, [oracles.composed_fpm_ieps(T, P6, R, G6, eps=e) for e in eps])
    assert abs(r.value - ref) < 1e-4 * abs(ref)


def test_smoothness_certificate_discriminates():
    smooth = smoothness_certificate(np.cos, 0.3, 0.1)
    assert 0.9 < smooth["ratio"] < 1.1
    rough = smoothness_certificate(lambda x: np.sqrt(abs(x)), 0.0, 0.0, npts=1)
    assert rough["ratio"] == pytest.approx(8.0, rel=1e-12)


# --------------------------------------------------------------------------
# radial pole integrals


def Fg(R):
    return np.exp(-4 * (np.asarray(R) - 1.0) ** 2)


def test_radial_zero():
    assert radial_pole_integral(lambda R: 0 * np.asarray(R), 1.0, 50.0, 6).value == 0


def test_radial_exact_against_quadpack_pv():
    X, d, P = 50.0, 6, 1.0
    from weakasym.oscillatory import branch_phase

    pref = 1j * (2 * np.pi) ** -0.5 * branch_phase(d, 1) / X ** ((d - 1) / 2)
    g = lambda R: R ** ((d - 1) / 2) * np.exp(1j * R * X) * Fg(R) / (R + P)
    ref = pref * (pv_cauchy(g, 0, 16, P) + 1j * np.pi * g(P))
    assert abs(radial_pole_integral(Fg, P, X, d).value - ref) < 1e-10 * abs(ref)


def test_radial_asymptotic_convergence():
    devs = []
    for X in (25.0, 50.0, 100.0):
        e = radial_pole_integral(Fg, 1.0, X, 6).value
        a = radial_pole_integral(Fg, 1.0, X, 6, mode="asymptotic").value
        devs.append(abs(e - a) / abs(a))
    assert devs[-1] < 0.02
    assert devs[0] > devs[1] > devs[2]


def test_radial_incoming_is_exponentially_small():
    # analytic below the axis and flat at R = 0: the only left-over is the e^{-a|X|} pole
    a = 0.05
    F = lambda R: np.exp(-1 / np.asarray(R) ** 2 - (np.asarray(R) - 1) ** 2 / 9) / ((np.asarray(R) - 1) ** 2 + a * a)
    xs = np.array([20.0, 40.0, 60.0, 80.0, 100.0])
    ratio = [
        abs(radial_pole_integral(F, 1.0, x, 6, -1, rmax=25).value)
        / abs(radial_pole_integral(F, 1.0, x, 6, +1, rmax=25).value)
        for x in xs
    ]
    slope, icpt = np.polyfit(xs, np.log(ratio), 1)
    assert slope == pytest.approx(-a, rel=0.1)
    assert np.max(np.abs(np.log(ratio) - (slope * xs + icpt))) < 0.05
    assert radial_pole_integral(F, 1.0, 20.0, 6, -1, mode="asymptotic").value == 0


def test_radial_errors():
    with pytest.raises(DomainError):
        radial_pole_integral(Fg, 0.0, 10.0, 6)
    with pytest.raises(AccuracyError):
        radial_pole_integral(lambda R: 1 / (1 + np.asarray(R)), 1.0, 10.0, 6)
    with pytest.raises(DomainError):
        radial_pole_integral(Fg, 1.0, 10.0, 6, mode="guess")
