"""Singular angular and radial integrals.

Side conventions: ``side = +1`` means a denominator ``x + i0`` and
``side = -1`` means ``x - i0``, so ``1/(x + side*i0) = P(1/x) - side*i pi delta(x)``.
Logarithms produced by integrating such a denominator by parts carry the
same side.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from functools import lru_cache

import numpy as np
from numpy.polynomial import Chebyshev
from scipy.integrate import quad
from scipy.special import roots_jacobi, roots_legendre

from .errors import AccuracyError, DomainError, SingularConfigurationError, TaxonomyError
from .harmonics import canonical_tree
from .oscillatory import SphericalWaveFactors, branch_phase
from .tmatrix import (
    ComposedKernel,
    DeltaConnectedKernel,
    SMOOTH,
    GaussianKernel,
    SinglePoleKernel,
    TKernel,
    ZeroKernel,
)

LOG_SUBTRACTION = "log-subtraction"
ENDPOINT_WEIGHTED = "endpoint-weighted"
PV_RESIDUE = "pv-plus-residue"
DELTA_REDUCTION = "delta-reduction"
PRODUCT_RULE = "product-rule"


@dataclass(frozen=True)
class SingularIntegralResult:
    value: complex
    error_estimate: float
    regularization: str
    smoothness_certificate: dict | None = None
    flags: tuple = field(default_factory=tuple)

    def __complex__(self):
        return complex(self.value)


def _side_log(x, side):
    """``ln(x + side*i0)`` for real ``x``; principal log for complex ``x``."""
    x = complex(x)
    if x.imag != 0:
        return np.log(x)
    if x.real == 0:
        raise SingularConfigurationError("logarithm at its branch point")
    if x.real > 0:
        return complex(np.log(x.real))
    return complex(np.log(-x.real), side * np.pi)


# --------------------------------------------------------------------------
# moving pole on [-1, 1]


def cauchy_log_subtraction(B, zeta, side: int = +1, dB=None, cheb_degree: int = 64) -> SingularIntegralResult:
    """``int_{-1}^{1} B(u) / (u - zeta + side*i0) du`` by parts.

    Evaluates ``ln(1-zeta) B(1) - ln(-1-zeta) B(-1) - int ln(u-zeta) B'(u) du``
    with every log on the denominator's side.  The remaining integral has
    only an integrable log singularity, split at ``zeta`` and done with
    log-weighted adaptive quadrature.  ``dB`` defaults to the derivative of a
    Chebyshev interpolant of ``B``.
    """
    zeta = complex(zeta)
    if zeta.imag == 0 and abs(abs(zeta.real) - 1) < 1e-15:
        raise SingularConfigurationError("pole at an endpoint of [-1, 1]")
    err = 0.0
    if dB is None:
        cheb = Chebyshev.interpolate(lambda u: np.real(B(u)), cheb_degree)
        cheb_i = Chebyshev.interpolate(lambda u: np.imag(B(u) + 0j), cheb_degree)
        dBr, dBi = cheb.deriv(), cheb_i.deriv()

        def dB(u):
            return dBr(u) + 1j * dBi(u)

        err += float(abs(cheb.coef[-1]) + abs(cheb_i.coef[-1]))
    b1, bm1 = complex(B(1.0)), complex(B(-1.0))
    value = _side_log(1 - zeta, side) * b1 - _side_log(-1 - zeta, side) * bm1

    def integ(f, a, b, **kw):
        re = quad(lambda u: np.real(f(u)), a, b, limit=200, **kw)
        im = quad(lambda u: np.imag(f(u) + 0j), a, b, limit=200, **kw)
        return complex(re[0], im[0]), re[1] + im[1]

    if zeta.imag == 0 and -1 < zeta.real < 1:
        z = zeta.real
        left, e1 = integ(dB, -1, z, weight="alg-logb", wvar=(0, 0))
        right, e2 = integ(dB, z, 1, weight="alg-loga", wvar=(0, 0))
        # arg(u - zeta) = side*pi on u < zeta
        phase = 1j * side * np.pi * (complex(B(z)) - bm1)
        value -= left + right + phase
        err += e1 + e2
    else:
        if zeta.imag == 0:
            # arg(u - zeta) is constant on the interval: 0 or side*pi
            rest, e = integ(lambda u: np.log(np.abs(u - zeta.real)) * dB(u), -1, 1)
            if zeta.real > 1:
                rest += 1j * side * np.pi * (b1 - bm1)
        else:
            rest, e = integ(lambda u: np.log(u - zeta) * dB(u), -1, 1)
        value -= rest
        err += e
    return SingularIntegralResult(complex(value), float(err), LOG_SUBTRACTION)


def cauchy_subtracted_rule(values, at_pole, zeta, side, nodes, weights):
    """Batched ``int_{-1}^{1} B(u)/(u - zeta + side*i0) du`` by pole subtraction.

    ``values[..., j] = B(nodes[j])`` and ``at_pole = B(clip(zeta))``.  The
    clipped subtraction keeps the remainder bounded when ``zeta`` sits just
    outside the interval, but its accuracy then degrades once the distance
    to the endpoint is below the node spacing; callers grade their outer
    rule so such poles carry negligible weight.
    """
    zeta = np.asarray(zeta, dtype=float)
    inside = np.abs(zeta) < 1
    moment = np.log(np.abs((1 - zeta) / (1 + zeta))) - side * 1j * np.pi * inside
    rem = np.sum(weights * (values - at_pole[..., None]) / (nodes - zeta[..., None]), axis=-1)
    return rem + at_pole * moment


# --------------------------------------------------------------------------
# endpoint-weighted pole on [0, 1]


def weighted_pole_moment(z, side: int = -1) -> complex:
    """``int_0^1 sqrt(v(1-v)) / (v - z + side*i0) dv`` in closed form."""
    z = complex(z)
    if z.imag == 0 and 0 <= z.real <= 1:
        x = z.real
        return complex(np.pi * (0.5 - x), -side * np.pi * np.sqrt(x * (1 - x)))
    w = z - 0.5
    return complex(np.pi * (0.5 - z + w * np.sqrt(1 - 1 / (4 * w * w))))


def _jacobi_half_rule(n):
    t, w = roots_jacobi(n, 0.5, 0.5)
    return (1 + t) / 2, w / 4


def endpoint_weighted_pole(B, z, side: int = -1, n: int = 64) -> SingularIntegralResult:
    """``int_0^1 sqrt(v) sqrt(1-v) B(v) / (v - z + side*i0) dv`` (default ``-i0``).

    Subtracts ``B`` at the real part of ``z`` clipped to ``[0, 1]``, uses the
    closed-form moment for the subtracted pole and Gauss-Jacobi(1/2, 1/2)
    for the remainder; the error estimate compares ``n`` and ``2n`` nodes.
    """
    z = complex(z)
    zc = float(np.clip(z.real, 0.0, 1.0))
    bz = complex(B(np.array([zc]))[0])
    mom = weighted_pole_moment(z, side)

    def rule(m):
        v, w = _jacobi_half_rule(m)
        return np.sum(w * (np.asarray(B(v)) - bz) / (v - z)) + bz * mom

    a, b = rule(n), rule(2 * n)
    return SingularIntegralResult(complex(b), float(abs(b - a)), ENDPOINT_WEIGHTED)


def endpoint_pole_rule(values, at_pole, z, side, nodes, weights):
    """Batched form of :func:`endpoint_weighted_pole` for a common ``z``."""
    mom = weighted_pole_moment(z, side)
    return np.sum(weights * (values - at_pole[..., None]) / (nodes - z), axis=-1) + at_pole * mom


# --------------------------------------------------------------------------
# delta reduction


def delta_reduce_Dm(tc, G, p_ext, Pp_mag: float, d: int, level: int = 8) -> SingularIntegralResult:
    """Angular integral of ``t^c(k') delta(p' - p) G(P'^)`` over the shell ``|P'|``.

    Returns ``kappa^{d_m - 2} / |P'|^{d-2} int dk^ t^c(kappa k^) G((p, kappa k^)/|P'|)``
    with ``kappa^2 = P'^2 - p^2`` and ``d_m = d - dim(p)``; layout is
    external coordinates first.  ``tc`` and ``G`` act on ``(n, .)`` arrays.
    Below threshold the value is 0 with flag ``"below-threshold"``.
    """
    p_ext = np.asarray(p_ext, dtype=float)
    dm = d - p_ext.size
    if dm < 1:
        raise DomainError("no internal coordinates left")
    kappa2 = Pp_mag**2 - p_ext @ p_ext
    if kappa2 <= 0:
        return SingularIntegralResult(0j, 0.0, DELTA_REDUCTION, flags=("below-threshold",))
    kappa = np.sqrt(kappa2)

    def rule(lv):
        q = canonical_tree(dm).quadrature(lv)
        kk = kappa * q.nodes
        pts = np.concatenate([np.broadcast_to(p_ext, (len(kk), p_ext.size)), kk], axis=1) / Pp_mag
        return np.sum(q.weights * np.asarray(tc(kk)) * np.asarray(G(pts)))

    pref = kappa ** (dm - 2) / Pp_mag ** (d - 2)
    a, b = rule(level), rule(level + 2)
    return SingularIntegralResult(complex(pref * b), float(abs(pref * (b - a))), DELTA_REDUCTION)


# --------------------------------------------------------------------------
# F^+- dispatcher


def _graded(a, b, n):
    """Gauss-Legendre on ``[a, b]`` through a map flat to third order at both ends."""
    t, w = roots_legendre(n)
    t = (t + 1) / 2
    g = t**4 * (35 - 84 * t + 70 * t**2 - 20 * t**3)
    dg = 140 * t**3 * (1 - t) ** 3
    return a + (b - a) * g, (b - a) * dg * w / 2


def _perp_pair(e):
    q, _ = np.linalg.qr(np.column_stack([e, np.eye(3)]))
    return q[:, 1], q[:, 2]


@dataclass(frozen=True)
class FpmOptions:
    level: int = 8
    n_u: int = 48
    n_phi: int = 16
    n_v: int = 24
    n_v_pole: int = 48
    s2_level: int = 6
    estimate_error: bool = True


def _fpm_smooth(T, P, R, G, sign, level):
    def rule(lv):
        q = canonical_tree(T.d).quadrature(lv)
        return np.sum(q.weights * T.evaluate(R * q.nodes, P, P @ P + 0j) * G(sign * q.nodes))

    a, b = rule(level), rule(level + 2)
    scale = abs(b) + 1e-300
    if abs(a - b) > 1e-6 * max(scale, 1e-12):
        raise TaxonomyError("smooth-tagged kernel does not converge under refinement", achieved=abs(a - b))
    return SingularIntegralResult(complex(b), float(abs(a - b)), PRODUCT_RULE)


def _s2(level):
    q = canonical_tree(3).quadrature(level)
    return q.nodes, q.weights


def _fpm_single_pole(T: SinglePoleKernel, P, R, G, sign, opt: FpmOptions):
    # P'^ = (sqrt(v) p^, sqrt(1-v) k^), dP'^ = 1/2 sqrt(v(1-v)) dv dp^ dk^
    P2 = P @ P
    zv = (P2 + T.lam**2) / R**2
    s2x, s2w = _s2(opt.s2_level)
    ph, kh = np.repeat(s2x, len(s2w), 0), np.tile(s2x, (len(s2w), 1))
    wout = np.repeat(s2w, len(s2w)) * np.tile(s2w, len(s2w))

    def numer(v):
        v = np.atleast_1d(v)
        sv, cv = np.sqrt(v)[None, :, None], np.sqrt(1 - v)[None, :, None]
        pts = np.concatenate([sv * ph[:, None, :], cv * kh[:, None, :]], axis=2)
        flat = pts.reshape(-1, 6)
        Pp = R * flat
        val = T.phi(R * R * np.sum(flat[:, 3:] ** 2, 1)) * T.smooth(Pp, P) * G(sign * flat)
        return val.reshape(len(ph), len(v))

    def rule(n):
        v, w = _jacobi_half_rule(n)
        vals = numer(v)
        at = numer(np.array([np.clip(zv, 0, 1)]))[:, 0]
        inner = endpoint_pole_rule(vals, at, zv, -1, v, w)
        return 0.5 * (-1 / R**2) * np.sum(wout * inner)

    a, b = rule(opt.n_v_pole), rule(2 * opt.n_v_pole)
    return SingularIntegralResult(complex(b), float(abs(a - b)), ENDPOINT_WEIGHTED)


def _composed_parts(T: ComposedKernel, P, R, G, sign, opt: FpmOptions):
    p_b, k_b = P[:3], P[3:]
    pbm, kbm = np.linalg.norm(p_b), np.linalg.norm(k_b)
    if pbm == 0:
        raise SingularConfigurationError("p_b = 0: polar axis undefined")
    c, s = T.c, T.s
    z = P @ P
    e3 = p_b / pbm
    e1, e2 = _perp_pair(e3)
    s2x, s2w = _s2(opt.s2_level)

    # part A: exchange pole in u = cos(angle(p'_a, p_b))
    roots = set()
    for sp in (1, -1):
        for sk in (1, -1):
            m = sp * c * pbm + sk * abs(s) * kbm
            if m > 0 and m < R:
                roots.add((m / R) ** 2)
    cuts = [0.0] + sorted(roots) + [1.0]
    vs, vw = [], []
    for a_, b_ in zip(cuts, cuts[1:]):
        if b_ - a_ > 1e-14:
            x, w = _graded(a_, b_, opt.n_v)
            vs.append(x)
            vw.append(w)
    v, wv = np.concatenate(vs), np.concatenate(vw)
    u, wu = roots_legendre(opt.n_u)
    phi = 2 * np.pi * (np.arange(opt.n_phi) + 0.5) / opt.n_phi
    wphi = 2 * np.pi / opt.n_phi
    pm = R * np.sqrt(v)
    a1 = 2 * c * pm * pbm / s**2
    a0 = pm**2 / s**2 + c**2 * pbm**2 / s**2 - kbm**2
    zeta = a0 / a1
    side = np.sign(a1)

    nk = len(s2w)
    cphi, sphi = np.cos(phi), np.sin(phi)
    partA = 0j
    for i in range(len(v)):
        # u nodes plus the clipped pole, shape (nu+1,)
        uu = np.append(u, np.clip(zeta[i], -1, 1))
        st = np.sqrt(np.clip(1 - uu * uu, 0, None))
        dirs = uu[None, :, None] * e3 + st[None, :, None] * (cphi[:, None, None] * e1 + sphi[:, None, None] * e2)
        pa = pm[i] * dirs  # (nphi, nu+1, 3)
        ka = R * np.sqrt(1 - v[i]) * s2x  # (nk, 3)
        shape = (opt.n_phi, nk, len(uu), 3)
        Pp = np.concatenate(
            [np.broadcast_to(pa[:, None], shape), np.broadcast_to(ka[None, :, None], shape)], axis=-1
        ).reshape(-1, 6)
        A1, _ = T.split_numerators(Pp, P, z)
        vals = (A1 * G(sign * Pp / R)).reshape(opt.n_phi, nk, len(uu))
        inner = cauchy_subtracted_rule(vals[..., :-1], vals[..., -1], zeta[i], side[i], u, wu)
        partA += 0.5 * wv[i] * np.sqrt(v[i] * (1 - v[i])) * wphi * np.sum(s2w * inner) * (-1 / a1[i])

    # part B: form-factor pole in v = sin^2(alpha)
    zv = (z + T.ta.lam**2) / R**2
    ph, kh = np.repeat(s2x, len(s2w), 0), np.tile(s2x, (len(s2w), 1))
    wout = np.repeat(s2w, len(s2w)) * np.tile(s2w, len(s2w))

    def A2_at(vv):
        sv, cv = np.sqrt(vv)[None, :, None], np.sqrt(1 - vv)[None, :, None]
        pts = np.concatenate([sv * ph[:, None, :], cv * kh[:, None, :]], axis=2).reshape(-1, 6)
        _, A2 = T.split_numerators(R * pts, P, z)
        return (A2 * G(sign * pts)).reshape(len(ph), len(vv))

    def partB(n):
        vj, wj = _jacobi_half_rule(n)
        inner_b = endpoint_pole_rule(A2_at(vj), A2_at(np.array([np.clip(zv, 0, 1)]))[:, 0], zv, -1, vj, wj)
        return 0.5 * (-1 / R**2) * np.sum(wout * inner_b)

    b_lo = partB(opt.n_v_pole)
    return partA, b_lo, (partB(2 * opt.n_v_pole) if opt.estimate_error else b_lo)


def _fpm_composed(T, P, R, G, sign, opt: FpmOptions):
    a, b_lo, b_hi = _composed_parts(T, P, R, G, sign, opt)
    if not opt.estimate_error:
        return SingularIntegralResult(complex(a + b_lo), float("nan"), LOG_SUBTRACTION)
    fine = replace(opt, n_u=opt.n_u + opt.n_u // 2, n_phi=opt.n_phi + 8, n_v=opt.n_v + opt.n_v // 2)
    a2, _, _ = _composed_parts(T, P, R, G, sign, fine)
    return SingularIntegralResult(complex(a2 + b_hi), float(abs(a2 - a) + abs(b_hi - b_lo)), LOG_SUBTRACTION)


def F_pm(T: TKernel, P, Pp_mag: float, G, sign: int = +1, options: FpmOptions | None = None) -> SingularIntegralResult:
    """``F^+-(|P'|, P; G) = int dP'^ T(|P'| P'^, P, P^2 + i0) G(+-P'^)``.

    Dispatch by kernel type: smooth kernels use the canonical product rule,
    delta-connected ones :func:`delta_reduce_Dm`, form-factor poles the
    endpoint-weighted rule in ``v = sin^2 alpha``, and the composed N=3
    kernel additionally the log-subtracted rule for the exchange pole in
    ``u = cos theta``.
    """
    P = np.asarray(P, dtype=float)
    opt = options or FpmOptions()
    sign = 1 if sign > 0 else -1
    if Pp_mag <= 0:
        raise DomainError("|P'| must be positive")
    if isinstance(T, ZeroKernel):
        return SingularIntegralResult(0j, 0.0, PRODUCT_RULE)
    if isinstance(T, GaussianKernel) or set(T.tags) == {SMOOTH}:
        return _fpm_smooth(T, P, Pp_mag, G, sign, opt.level)
    if isinstance(T, DeltaConnectedKernel):
        p = P[:3]
        k = P[3:]
        return delta_reduce_Dm(
            lambda kk: T.tc(kk, k, k @ k), lambda x: G(sign * x), p, Pp_mag, T.d, level=opt.level
        )
    if isinstance(T, SinglePoleKernel):
        return _fpm_single_pole(T, P, Pp_mag, G, sign, opt)
    if isinstance(T, ComposedKernel):
        return _fpm_composed(T, P, Pp_mag, G, sign, opt)
    raise TaxonomyError(f"no integration route for kernel {type(T).__name__} with tags {sorted(T.tags)}")


def smoothness_certificate(f, center: float, half_width: float, steps=(0.02, 0.005), npts: int = 5) -> dict:
    """Max finite-difference second derivative of ``f`` over a window, at each step size.

    The window ``center +- half_width`` is sampled at ``npts`` points and
    the second difference uses each step ``h``.  ``ratio`` compares the
    finest to the coarsest bound; it stays ``O(1)`` for a smooth function
    and grows like ``h^{-1/2}`` or worse across a singularity.
    """
    xs = np.linspace(center - half_width, center + half_width, npts)
    bounds = []
    for h in steps:
        d2 = [abs((f(x + h) - 2 * f(x) + f(x - h)) / h**2) for x in xs]
        bounds.append(float(max(d2)))
    return {
        "center": center,
        "half_width": half_width,
        "steps": list(steps),
        "max_second_derivative": bounds,
        "ratio": bounds[-1] / max(bounds[0], 1e-300),
    }


# --------------------------------------------------------------------------
# radial pole integrals


@lru_cache(maxsize=64)
def _legendre(n: int):
    return roots_legendre(n)


def radial_pole_integral(
    F,
    P: float,
    xmag: float,
    d: int,
    sign: int = +1,
    mode: str = "exact",
    rmax: float | None = None,
    tol: float = 1e-12,
    rtol: float = 1e-10,
    max_nodes: int = 200_000,
) -> SingularIntegralResult:
    """``int_0^inf R^{d-1} Q^s(R,|X|) N_d(R) F(R) / (R^2 - P^2 - i0) dR``, ``s = sign``.

    ``sign = +1`` is the outgoing integral ``I^+``; ``sign = -1`` uses the
    incoming wave ``Q^-`` and has no residue contribution asymptotically.
    The exact mode subtracts the pole on ``[0, 2P]``, truncates at ``rmax``
    (checked against ``tol``) and doubles both rules until they agree to
    ``rtol``.  ``mode = "asymptotic"`` returns the residue term
    ``i pi P^{d-2} Q^+(P,|X|) N_d(P) F(P)`` (zero for ``sign = -1``).
    """
    if P <= 0:
        raise DomainError("|P| must be positive")
    sign = 1 if sign > 0 else -1
    if mode == "asymptotic":
        if sign < 0:
            return SingularIntegralResult(0j, 0.0, PV_RESIDUE)
        w = SphericalWaveFactors(d, P)
        val = 1j * np.pi * P ** (d - 2) * w.Q_plus(xmag) * w.N * complex(F(np.array([P]))[0])
        return SingularIntegralResult(complex(val), 0.0, PV_RESIDUE)
    if mode != "exact":
        raise DomainError(f"unknown mode {mode!r}")
    rmax = rmax or 4 * P + 12.0

    def h(R):
        R = np.asarray(R, dtype=float)
        # R^{d-1} N_d(R) Q^s(R, X) without the R-independent factors
        return R ** ((d - 1) / 2) * np.exp(sign * 1j * R * xmag) * np.asarray(F(R))

    pref = 1j * (2 * np.pi) ** -0.5 * branch_phase(d, sign) / xmag ** ((d - 1) / 2)
    tail_mag = abs(h(np.array([rmax]))[0]) / (rmax * rmax)
    scale = abs(h(np.array([P]))[0]) / P + 1e-300
    if tail_mag > tol * scale:
        raise AccuracyError(f"integrand not negligible at rmax={rmax:g}", achieved=tail_mag / scale)

    def g(R):
        return h(R) / (R + P)

    def near(n):
        t, w = _legendre(n)
        R = P * (t + 1)
        wR = P * w
        gp = g(np.array([P]))[0]
        return np.sum(wR * (g(R) - gp) / (R - P)) + gp * 1j * np.pi

    def far(n):
        t, w = _legendre(n)
        R = 2 * P + (rmax - 2 * P) * (t + 1) / 2
        wR = (rmax - 2 * P) / 2 * w
        return np.sum(wR * h(R) / (R * R - P * P))

    gP = g(np.array([P]))[0]
    # an even count keeps Gauss nodes off the pole at R = P
    n1 = 2 * (int(xmag * P / 2) + 32)
    n2 = int(xmag * (rmax - 2 * P) / 2) + 64
    v1 = near(n1) + far(n2)
    while True:
        n1, n2 = 2 * n1, 2 * n2
        v2 = near(n1) + far(n2)
        err = abs(v2 - v1)
        # I^- is a cancellation of O(pi g(P)) pieces, so measure against those too
        if err <= rtol * max(abs(v2), np.pi * abs(gP)) + 1e-300:
            break
        if n1 > max_nodes:
            raise AccuracyError("radial pole integral did not converge", achieved=err / max(abs(v2), 1e-300))
        v1 = v2
    return SingularIntegralResult(complex(pref * v2), float(abs(pref) * err), PV_RESIDUE)


def richardson_eps(eps, values, order: int = 2) -> complex:
    """Extrapolate ``values(eps)`` to ``eps -> 0`` with a degree-``order`` polynomial fit."""
    eps = np.asarray(eps, dtype=float)
    vals = np.asarray(values, dtype=complex)
    A = np.vander(eps, order + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(A, vals, rcond=None)
    return complex(coef[0])
