import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weakasym.errors import AccuracyError, AmbiguousBoundaryError, DomainError
from weakasym.tmatrix import (
    ComposedKernel,
    DeltaConnectedKernel,
    GaussianKernel,
    PoleSmoothT,
    SinglePoleKernel,
    gaussian_model,
    local_model,
    ls_solve_twobody,
    model_NBody_kernel,
    twobody_s_kernel,
    variable_phase_shift,
    yamaguchi_form_factor,
    yamaguchi_model,
    yamaguchi_t,
    yamaguchi_tau,
)

GAUSS = gaussian_model(-1.0, 1.0)


def test_zero_potential_gives_zero_t():
    r = ls_solve_twobody(gaussian_model(0.0, 1.0), 0.5)
    assert np.all(r.t == 0)
    assert r.S == 1 and r.delta == 0


def test_born_limit():
    v0 = 1e-5
    m = gaussian_model(v0, 1.0)
    r = ls_solve_twobody(m, 0.5)
    born = m.partial_wave(0, [r.k0], [r.k0])[0, 0]
    assert r.t_on_shell == pytest.approx(born, rel=1e-4)


@pytest.mark.parametrize(
    "E,ref",
    [(0.1, 0.19616105831680), (0.5, 0.30930713252943), (1.0, 0.31557902858504)],
)
def test_gaussian_s_wave_against_variable_phase(E, ref):
    r = ls_solve_twobody(GAUSS, E)
    vp = variable_phase_shift(GAUSS.potential, np.sqrt(E))
    assert r.delta == pytest.approx(vp, abs=1e-9)
    # frozen regression values from the two independent routes
    assert r.delta == pytest.approx(ref, abs=1e-9)
    assert r.unitarity_residual < 1e-10


@pytest.mark.parametrize("ell,ref", [(1, 0.0222929347193), (2, 0.00104586700929)])
def test_gaussian_higher_waves(ell, ref):
    r = ls_solve_twobody(GAUSS, 0.5, ell=ell)
    assert r.delta == pytest.approx(variable_phase_shift(GAUSS.potential, np.sqrt(0.5), ell), abs=1e-9)
    assert r.delta == pytest.approx(ref, abs=1e-10)


@pytest.mark.parametrize("ell", [0, 1])
def test_generic_local_path_matches_closed_form(ell):
    loc = local_model(GAUSS.potential)
    assert ls_solve_twobody(loc, 0.5, ell).delta == pytest.approx(ls_solve_twobody(GAUSS, 0.5, ell).delta, abs=1e-10)


@given(st.floats(0.05, 3.0), st.floats(0.05, 3.0), st.integers(0, 3))
@settings(max_examples=30, deadline=None)
def test_partial_waves_symmetric_and_consistent(k1, k2, ell):
    v12 = GAUSS.partial_wave(ell, [k1], [k2])[0, 0]
    assert GAUSS.partial_wave(ell, [k2], [k1])[0, 0] == pytest.approx(v12, rel=1e-12, abs=1e-15)
    loc = local_model(GAUSS.potential)
    assert loc.partial_wave(ell, [k1], [k2])[0, 0] == pytest.approx(v12, rel=1e-8, abs=1e-12)


def test_t_matrix_symmetric_on_mesh():
    t = ls_solve_twobody(GAUSS, 0.5).t
    assert np.max(np.abs(t - t.T)) < 1e-12 * np.max(np.abs(t))


YAM = yamaguchi_model(1.0, kappa=0.3)


@pytest.mark.parametrize("E", [0.05, 0.5, 2.0])
def test_generic_ls_reproduces_yamaguchi(E):
    r = ls_solve_twobody(YAM, E)
    exact = yamaguchi_t(r.k0, r.k0, E, YAM, side=+1)
    assert abs(r.t_on_shell - exact) < 1e-8 * abs(exact)
    assert abs(abs(r.S) - 1) < 1e-12
    half = yamaguchi_t(r.mesh, r.k0, E, YAM, side=+1)
    assert np.max(np.abs(r.half_shell() - half)) < 1e-8 * np.max(np.abs(half))


def test_yamaguchi_coupling_and_kappa_roundtrip():
    assert YAM.params["lam"] == pytest.approx(-2.1517748306, rel=1e-10)
    again = yamaguchi_model(1.0, lam=YAM.params["lam"])
    assert again.bound_kappa == pytest.approx(0.3, rel=1e-12)
    # weak attraction has no bound state
    assert yamaguchi_model(1.0, lam=-0.5 * 4 / np.pi).bound_kappa is None


def test_yamaguchi_bound_pole_residue():
    kappa = YAM.bound_kappa
    k1, k2 = 0.4, 1.3
    phi = yamaguchi_form_factor(np.array([k1, k2]), YAM)
    # residue as a contour integral around the pole, trapezoid rule
    th = 2 * np.pi * np.arange(64) / 64
    dz = 0.01 * np.exp(1j * th)
    res = np.mean([h * yamaguchi_t(k1, k2, -(kappa**2) + h, YAM) for h in dz])
    assert abs(res - phi[0] * phi[1]) < 1e-8 * abs(phi[0] * phi[1])


def test_yamaguchi_needs_side_on_cut():
    with pytest.raises(AmbiguousBoundaryError):
        yamaguchi_tau(0.5, 1.0, -1.0)
    up = yamaguchi_tau(0.5, 1.0, -1.0, side=+1)
    assert yamaguchi_tau(0.5 + 1e-12j, 1.0, -1.0) == pytest.approx(up, rel=1e-9)
    assert yamaguchi_tau(0.5, 1.0, -1.0, side=-1) == pytest.approx(np.conj(up), rel=1e-12)


def test_model_errors():
    with pytest.raises(DomainError):
        ls_solve_twobody(GAUSS, -0.1)
    with pytest.raises(DomainError):
        yamaguchi_model(1.0)
    with pytest.raises(DomainError):
        yamaguchi_model(1.0, lam=-1.0, kappa=0.3)
    with pytest.raises(DomainError):
        gaussian_model(-1.0, 0.0)
    with pytest.raises(AccuracyError):
        ls_solve_twobody(gaussian_model(-3.0, 1.0), 0.5, n=6)


def test_s_kernel_partial_waves_match_ls():
    k = np.sqrt(0.5)
    sk = twobody_s_kernel(k, GAUSS, lmax=3)
    for ell in range(3):
        assert sk.partial_wave_S(ell) == pytest.approx(ls_solve_twobody(GAUSS, 0.5, ell).S, abs=1e-12)
    sy = twobody_s_kernel(k, YAM, lmax=2)
    assert abs(abs(sy.partial_wave_S(0)) - 1) < 1e-12
    assert sy.partial_wave_S(1) == pytest.approx(1.0)


# --------------------------------------------------------------------------
# N-body kernels

TA = PoleSmoothT(1.0, 1.0, 0.5, 0.3, 0.5)
TB = PoleSmoothT(1.0, 1.2, 0.5, 0.2, 0.4)


def composed():
    return model_NBody_kernel({"kind": "composed", "ta": TA.__dict__, "tb": TB.__dict__})


def test_composed_from_masses_has_rotation_coefficients():
    T = composed()
    assert T.c**2 + T.s**2 == pytest.approx(1.0, abs=1e-14)
    assert T.c == pytest.approx(-0.5, abs=1e-14)
    assert isinstance(T, ComposedKernel)


def test_composed_denominator_identities():
    T = composed()
    rng = np.random.default_rng(7)
    Pp = rng.normal(size=(10_000, 6))
    P = rng.normal(size=6)
    z = P @ P + 0.3j
    D1, D2, ka, kb = T.denominators(Pp, P, z)
    ka2 = np.sum(ka * ka, 1)
    # kinematic identity p'^2 + k_a^2 = p_b^2 + k_b^2 makes D1 + D2 z-independent
    assert np.max(np.abs(D1 + D2 - (ka2 + TA.lam**2))) < 1e-11 * np.max(ka2)
    A1, A2 = T.split_numerators(Pp, P, z)
    full = T.evaluate(Pp, P, z)
    assert np.max(np.abs(A1 / D1 + A2 / D2 - full) / np.abs(full)) < 1e-10


def test_pole_smooth_t_residue():
    E0 = -TA.lam**2
    k1, k2 = 0.7, 0.2
    eta = 1e-7
    assert eta * TA(k1, k2, E0 + eta) == pytest.approx(TA.phi(k1) * TA.phi(k2), rel=1e-6)


def test_single_pole_kernel_residue():
    T = SinglePoleKernel(1.0, 1.0, 0.5, 1.0, 0.3)
    Pp = np.array([[0.3, 0.1, 0.2, 0.5, -0.4, 0.1]])
    P = np.array([0.1, 0, 0, 0, 0.4, 0])
    p2 = np.sum(Pp[0, :3] ** 2)
    z0 = p2 - T.lam**2
    eta = 1e-8
    res = eta * T.evaluate(Pp, P, z0 + eta)[0]
    assert res == pytest.approx(T.phi(np.sum(Pp[0, 3:] ** 2)) * T.smooth(Pp, P)[0], rel=1e-6)


def test_kernel_tags_and_errors():
    assert "smooth" in GaussianKernel(6, 1.0, 0.5).tags
    dk = DeltaConnectedKernel(lambda kp, k, E: np.ones(len(kp)))
    assert dk.tags == frozenset({"delta-connected((12)(3))"})
    with pytest.raises(DomainError):
        dk.evaluate(np.zeros((1, 6)), np.zeros(6), 1.0)
    with pytest.raises(DomainError):
        model_NBody_kernel({"kind": "three-body-force"})
    assert model_NBody_kernel({"kind": "zero"}).evaluate(np.zeros((3, 6)), np.zeros(6), 1.0).tolist() == [0, 0, 0]
