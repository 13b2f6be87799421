import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp
from scipy.special import jv

from weakasym.errors import DomainError, MatchingError, PropagationError
from weakasym.harmonics import canonical_tree
from weakasym.hyperradial import (
    FunctionPotential,
    PairwisePotential,
    channel_basis,
    free_waves,
    gaussian_hypercentral,
    gaussian_pair,
    lemma2_deviation,
    match_extract_S,
    potential_matrix,
    s_from_tkernel,
    smatrix,
    solve_coupled,
    weak_asymptotics_check,
)
from weakasym.oscillatory import SphericalWaveFactors
from weakasym.tmatrix import (
    OnShellTwoBodyKernel,
    ZeroKernel,
    born_gaussian_kernel,
    gaussian_model,
    ls_solve_twobody,
    twobody_s_kernel,
    variable_phase_shift,
)

B6 = channel_basis(6, 2)


def test_channel_basis_structure():
    b = channel_basis(6, 6)
    assert len(b) == 714
    blocks = b.sector_blocks()
    assert sorted(np.concatenate(blocks).tolist()) == list(range(714))
    # total parity is the product of the three reflections
    parity = np.array([(-1) ** bin(int(c)).count("1") for c in b.sectors])
    assert np.all(parity == (-1) ** b.K)
    with pytest.raises(DomainError):
        channel_basis(2, 1)


def test_potential_matrix_zero_and_hypercentral():
    assert np.all(potential_matrix(FunctionPotential(lambda X: np.zeros(len(X))), B6, 1.3) == 0)
    # generic quadrature path: orthonormality of the harmonics
    V = FunctionPotential(lambda X: np.exp(-np.sum(X * X, axis=1)))
    M = potential_matrix(V, B6, 0.7)
    assert np.max(np.abs(M - np.exp(-0.49) * np.eye(len(B6)))) < 1e-12
    with pytest.raises(DomainError):
        potential_matrix(V, B6, 0.0)


def test_pairwise_fast_path_matches_quadrature():
    W = PairwisePotential((1.0, 2.0, 3.0), gaussian_pair(-0.3, 1.0))
    q = canonical_tree(6).quadrature(14)
    fast = W.matrix(B6, 2.0)
    slow = potential_matrix(W, B6, 2.0, quadrature=q)
    assert np.max(np.abs(fast - slow)) < 1e-8
    assert np.max(np.abs(fast - fast.T)) == 0


@given(st.integers(3, 9), st.integers(0, 6), st.floats(8.0, 60.0))
@settings(max_examples=40, deadline=None)
def test_free_waves_sum_to_plane_wave_component(d, K, rho):
    wm, wp = free_waves([K], d, 1.3, [rho])
    z = 1.3 * rho
    expect = 1j**K * z ** (1 - d / 2) * jv(K + d / 2 - 1, z) * rho ** ((d - 1) / 2)
    assert wm[0, 0] + wp[0, 0] == pytest.approx(expect, rel=1e-10, abs=1e-14)


@pytest.mark.parametrize("d", [3, 6])
def test_free_waves_reduce_to_spherical_waves(d):
    P, K, rho = 0.9, 2, 4.0e4
    wm, wp = free_waves([K], d, P, [rho])
    f = SphericalWaveFactors(d, P)
    scale = rho ** ((d - 1) / 2)
    assert wm[0, 0] / scale == pytest.approx((-1) ** K * f.N * f.Q_minus(rho), rel=3e-4)
    assert wp[0, 0] / scale == pytest.approx(-f.N * f.Q_plus(rho), rel=3e-4)


def test_free_propagation_gives_identity_and_bessel_components():
    sol = solve_coupled(B6, None, 1.0, rho_max=15.0, store=True)
    S = match_extract_S(sol)
    assert np.max(np.abs(S.values - np.eye(len(B6)))) < 1e-8
    psi = sol.partial_components(S)
    i = 300
    z = sol.rho_grid[i]
    expect = 1j**B6.K * z ** (1 - 3) * jv(B6.K + 2, z)
    assert np.max(np.abs(np.diag(psi[i]) - expect)) < 1e-8
    assert np.max(np.abs(psi[i] - np.diag(np.diag(psi[i])))) < 1e-12


def _oracle_phase(V, k, rmax=20.0):
    """Independent single-channel integration of u'' = (V - k^2) u with an adaptive RK."""
    sol = solve_ivp(
        lambda r, y: [y[1], (V(r) - k * k) * y[0]], (1e-8, rmax), [1e-8, 1.0], method="DOP853", rtol=1e-13, atol=1e-20
    )
    u, du = sol.y[0, -1], sol.y[1, -1]
    return (np.arctan2(k * u, du) - k * rmax + np.pi / 2) % np.pi - np.pi / 2


@pytest.mark.parametrize("E", [0.1, 0.5, 1.0])
def test_d3_single_channel_three_way(E):
    V = gaussian_hypercentral(-1.0, 1.0)
    S = smatrix(channel_basis(3, 0), V, E)
    delta = np.angle(S.values[0, 0]) / 2
    k = np.sqrt(E)
    assert delta == pytest.approx(_oracle_phase(lambda r: -np.exp(-r * r), k), abs=1e-8)
    assert delta == pytest.approx(ls_solve_twobody(gaussian_model(-1.0, 1.0), E).delta, abs=1e-4)
    assert delta == pytest.approx(variable_phase_shift(lambda r: -np.exp(-r * r), k), abs=1e-4)


def test_d6_hypercentral_matches_variable_phase():
    b = channel_basis(6, 6)
    S = smatrix(b, gaussian_hypercentral(-1.0, 1.0), 1.0)
    assert np.max(np.abs(S.values - np.diag(np.diag(S.values)))) < 1e-10
    assert S.unitarity_defect < 1e-6
    phases = np.angle(np.diag(S.values)) / 2
    for K in range(0, 7, 2):
        vp = variable_phase_shift(lambda r: -np.exp(-r * r), 1.0, K + 1.5)
        assert np.max(np.abs(phases[b.K == K] - vp)) < 1e-5


def test_d6_pairwise_unitary_symmetric_parity():
    W = PairwisePotential((1.0, 1.0, 1.0), gaussian_pair(-0.3, 1.0))
    S = smatrix(B6, W, 1.0, rho_max=30.0, tail_tol=1e-3)
    assert S.unitarity_defect < 1e-6
    assert S.symmetry_defect < 1e-6
    odd = (B6.K[:, None] - B6.K[None, :]) % 2 == 1
    assert np.max(np.abs(S.values[odd])) < 1e-10
    # the attraction produces real scattering
    assert np.max(np.abs(S.values - np.eye(len(B6)))) > 1e-3


def test_solver_errors():
    V = gaussian_hypercentral(-1.0, 1.0)
    b = channel_basis(3, 1)
    with pytest.raises(DomainError):
        solve_coupled(b, V, 0.0)
    with pytest.raises(PropagationError):
        solve_coupled(b, V, 1.0, rho_max=2.0)
    # every condition number is >= 1, so this threshold must trip
    with pytest.raises(MatchingError):
        match_extract_S(solve_coupled(b, V, 1.0), cond_max=0.5)


def test_s_from_zero_kernel_is_identity():
    b = channel_basis(3, 2)
    S = s_from_tkernel(ZeroKernel(3), b, 0.8)
    assert np.all(S.values == np.eye(len(b)))


def test_s_from_two_body_kernel_matches_partial_waves():
    k = np.sqrt(0.5)
    sk = twobody_s_kernel(k, gaussian_model(-1.0, 1.0), lmax=4)
    b = channel_basis(3, 3, level=10)
    S = s_from_tkernel(OnShellTwoBodyKernel.from_s_kernel(sk), b, k)
    expect = np.array([sk.partial_wave_S(int(K)) for K in b.K])
    assert np.max(np.abs(S.values - np.diag(expect))) < 1e-6


@pytest.mark.slow
def test_born_limit_of_solver():
    q = canonical_tree(6).quadrature(4)
    devs = []
    for v0 in (2e-3, 8e-3):
        A = s_from_tkernel(born_gaussian_kernel(6, v0, 1.0), B6, 1.0, quadrature=q).values
        B = smatrix(B6, gaussian_hypercentral(v0, 1.0), 1.0).values
        eye = np.eye(len(B6))
        devs.append(np.max(np.abs(A - B)) / np.max(np.abs(B - eye)))
    assert max(devs) < 1e-3
    # deviation is second order: it grows with the coupling
    assert devs[1] > 2.5 * devs[0]


def test_weak_check_free_case_is_lemma2():
    G = lambda x: np.exp(0.3 * x[:, 0] - 0.2 * x[:, 5] + 0.1 * x[:, 2])
    P = np.array([0.6, 0, 0, 0.8, 0, 0])
    xs = np.array([30.0, 30 + 4 * np.pi])
    r = weak_asymptotics_check(ZeroKernel(6), P, G, xgrid=xs, window=(60.0, 1))
    assert np.allclose(r.deviation, lemma2_deviation(P, G, xs), rtol=1e-6)
    assert r.S_of_G == pytest.approx(G(P[None] / np.linalg.norm(P))[0])
    with pytest.raises(DomainError):
        weak_asymptotics_check(ZeroKernel(6), np.zeros(6), G)
