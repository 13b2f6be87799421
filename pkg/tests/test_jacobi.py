import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from weakasym.errors import DegeneratePointError, DomainError, SingularConfigurationError
from weakasym.jacobi import (
    MassSet,
    build_jacobi,
    chain_rotation,
    from_hyperspherical,
    kinetic_form,
    momentum_exchange_point,
    p_gauge_sign,
    three_body_coefficients,
    to_hyperspherical,
)
from weakasym.partitions import PartitionChain, enumerate_chains


def systems(masses):
    ms = MassSet(tuple(masses))
    return [build_jacobi(ms, ch) for ch in enumerate_chains(ms.n)]


def test_two_body_unit_masses():
    (j,) = systems([1.0, 1.0])
    np.testing.assert_allclose(j.coeffs, [[1.0, -1.0]])


def test_three_body_equal_mass_coefficients():
    j = build_jacobi(MassSet((1.0, 1.0, 1.0)), PartitionChain.parse(3, "(12)(3)"))
    # vector 0: cluster (12) against particle 3, vector 1: r1 - r2
    np.testing.assert_allclose(j.coeffs[1], [1.0, -1.0, 0.0])
    np.testing.assert_allclose(j.coeffs[0], np.sqrt(4 / 3) * np.array([0.5, 0.5, -1.0]))


def test_translation_invariance():
    j = systems([1.0, 2.0, 3.5, 0.7])[5]
    rng = np.random.default_rng(3)
    r = rng.normal(size=(4, 3))
    np.testing.assert_allclose(j.apply(r + np.array([1.0, -2.0, 0.5])), j.apply(r), atol=1e-13)
    np.testing.assert_allclose(j.coeffs.sum(axis=1), 0.0, atol=1e-14)


def test_equal_mass_rotation_coefficients():
    js = systems([1.0, 1.0, 1.0])
    c, s = three_body_coefficients(js[0], js[2])
    assert c == pytest.approx(-0.5, abs=1e-14)
    assert abs(s) == pytest.approx(np.sqrt(3) / 2, abs=1e-14)
    np.testing.assert_allclose(chain_rotation(js[1], js[1]), np.eye(6), atol=1e-15)


def test_p_gauge_makes_rotation_form():
    js = systems([1.0, 1.3, 0.4])
    rng = np.random.default_rng(0)
    r = rng.normal(size=(3, 3))
    for a in js:
        for b in js:
            c, s = three_body_coefficients(a, b)
            xa, xb = a.apply(r), b.apply(r)
            pa, ka = xa[:3], xa[3:]
            pb, kb = p_gauge_sign(a, b) * xb[:3], xb[3:]
            np.testing.assert_allclose(kb, c * ka + s * pa, atol=1e-13)
            np.testing.assert_allclose(pb, -s * ka + c * pa, atol=1e-13)


def test_mass_mismatch_rejected():
    a = systems([1.0, 1.0, 1.0])[0]
    b = systems([1.0, 2.0, 1.0])[0]
    with pytest.raises(DomainError):
        chain_rotation(a, b)
    with pytest.raises(DomainError):
        build_jacobi(MassSet((1.0, 1.0)), PartitionChain.parse(3, "(12)(3)"))


def test_momentum_exchange_round_trip():
    rng = np.random.default_rng(1)
    c, s = 0.3, -np.sqrt(1 - 0.09)
    ka, pa = rng.normal(size=3), rng.normal(size=3)
    pb = -s * ka + c * pa
    np.testing.assert_allclose(momentum_exchange_point(pb, pa, c, s), ka, atol=1e-14)
    np.testing.assert_allclose(momentum_exchange_point(pb, np.zeros(3), c, s), -pb / s)
    with pytest.raises(SingularConfigurationError):
        momentum_exchange_point(pb, pa, 1.0, 0.0)


def test_hyperspherical_round_trip_and_split():
    rng = np.random.default_rng(2)
    x = rng.normal(size=9)
    np.testing.assert_allclose(from_hyperspherical(to_hyperspherical(x)), x, atol=1e-13)
    st_ = to_hyperspherical(np.array([1.0, 0, 0, 1.0, 0, 0]))
    assert st_.rho == pytest.approx(np.sqrt(2))
    assert st_.hyperangle() == pytest.approx(np.pi / 4)
    e1 = to_hyperspherical(np.eye(6)[0])
    assert e1.rho == 1.0 and np.array_equal(e1.direction, np.eye(6)[0])
    with pytest.raises(DegeneratePointError):
        to_hyperspherical(np.zeros(6))


masses = st.lists(st.floats(0.1, 10.0), min_size=3, max_size=5)


@settings(max_examples=25, deadline=None)
@given(masses, st.integers(0, 10_000))
def test_kinetic_form_is_chain_independent(ms, seed):
    js = systems(ms)
    r = np.random.default_rng(seed).normal(size=(len(ms), 3))
    vals = np.array([kinetic_form(j, r) for j in js])
    m = np.array(ms)
    direct = sum(2 * m[i] * m[k] * np.sum((r[i] - r[k]) ** 2) for i in range(len(m)) for k in range(i)) / m.sum()
    np.testing.assert_allclose(vals, direct, rtol=1e-12)
    R = chain_rotation(js[0], js[-1])
    np.testing.assert_allclose(R.T @ R, np.eye(R.shape[0]), atol=1e-12)
    np.testing.assert_allclose(js[-1].apply(r), R @ js[0].apply(r), atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.1, 10.0), min_size=3, max_size=3))
def test_three_body_coefficients_on_unit_circle(ms):
    js = systems(ms)
    for a in js:
        for b in js:
            c, s = three_body_coefficients(a, b)
            assert c * c + s * s == pytest.approx(1.0, abs=1e-12)
