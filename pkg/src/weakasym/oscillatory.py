"""Sphere averages of plane waves and their large-|X| asymptotics.

Conventions: ``Phi_0(X, P) = (2 pi)^{-d/2} exp(i <P, X>)`` and

    J(X, P) = int dX^ Phi_0(X, P) G(X^).

For large ``|P||X|``

    J ~ N_d(|P|) [Q^-(|P|, |X|) G(-P^) - Q^+(|P|, |X|) G(P^)],
    Q^+- = exp(+-i|P||X| -+ i pi (d-3)/4) / |X|^{(d-1)/2},
    N_d  = i (2 pi)^{-1/2} |P|^{-(d-1)/2}.

Functions on the sphere are callables taking an ``(n, d)`` array of unit
vectors and returning ``n`` (real or complex) values.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import gamma

import numpy as np
from scipy.special import eval_gegenbauer, gammaln, jv, roots_jacobi

from .errors import AccuracyError, DomainError
from .harmonics import canonical_tree

_R = np.sqrt(0.5)
# exp(-i pi m / 4) for m = 0..7
_EIGHTH = np.array([1, _R - 1j * _R, -1j, -_R - 1j * _R, -1, -_R + 1j * _R, 1j, _R + 1j * _R])


def branch_phase(d: int, sign: int = +1) -> complex:
    """``exp(-+ i pi (d-3)/4)`` for ``sign = +-1``, from an exact table."""
    m = ((d - 3) * (1 if sign > 0 else -1)) % 8
    return complex(_EIGHTH[m])


@dataclass(frozen=True)
class SphericalWaveFactors:
    """Outgoing and incoming d-dimensional spherical waves at momentum ``pmag``."""

    d: int
    pmag: float

    def __post_init__(self):
        if self.pmag <= 0:
            raise DomainError("|P| must be positive for spherical-wave asymptotics")

    @property
    def N(self) -> complex:
        return 1j * (2 * np.pi) ** -0.5 * self.pmag ** (-(self.d - 1) / 2)

    def Q(self, xmag, sign: int):
        x = np.asarray(xmag, dtype=float)
        return np.exp(sign * 1j * self.pmag * x) * branch_phase(self.d, sign) / x ** ((self.d - 1) / 2)

    def Q_plus(self, xmag):
        return self.Q(xmag, +1)

    def Q_minus(self, xmag):
        return self.Q(xmag, -1)


@dataclass(frozen=True)
class OscillatoryResult:
    value: complex
    error: float
    nodes: int

    def __complex__(self):
        return complex(self.value)


def _perp_basis(e):
    d = e.size
    q, _ = np.linalg.qr(np.column_stack([e, np.eye(d)]))
    if np.dot(q[:, 0], e) < 0:
        q = -q
    return q[:, 1:d]


def _gegenbauer_moments(z, lam, kmax):
    """``int (1-u^2)^{lam-1/2} C_k^lam(u) exp(izu) du`` for ``k = 0..kmax``, in closed form."""
    k = np.arange(kmax + 1)
    logc = np.log(np.pi) + (1 - lam) * np.log(2) + gammaln(k + 2 * lam) - gammaln(k + 1) - gammaln(lam)
    return np.exp(logc) * 1j**k * jv(k + lam, z) / z**lam


def _polar_average(z, e, G, n_u, perp):
    """Filon-Gegenbauer rule: expand the u-profile, integrate the exponential exactly.

    The profile ``int dw G(u e + sqrt(1-u^2) w)`` is smooth and
    non-oscillatory, so ``n_u`` does not have to grow with ``z``.
    """
    d = e.size
    lam = (d - 2) / 2
    u, wu = roots_jacobi(n_u, lam - 0.5, lam - 0.5)
    omega, wo = perp
    s = np.sqrt(1.0 - u * u)
    pts = u[:, None, None] * e[None, None, :] + s[:, None, None] * omega[None, :, :]
    g = np.asarray(G(pts.reshape(-1, d))).reshape(len(u), len(wo))
    inner = g @ wo
    k = np.arange(n_u)
    C = eval_gegenbauer(k[:, None], lam, u[None, :])
    hk = np.exp(np.log(np.pi) + (1 - 2 * lam) * np.log(2) + gammaln(k + 2 * lam) - gammaln(k + 1)
                - 2 * gammaln(lam)) / (k + lam)
    coef = (C @ (wu * inner)) / hk
    # drop coefficients at the roundoff level of the projection; they would be amplified by the moments
    noise = 4 * n_u * np.finfo(float).eps * (np.abs(C) @ (wu * np.abs(inner))) / hk
    coef[np.abs(coef) <= noise] = 0
    return np.sum(coef * _gegenbauer_moments(z, lam, n_u - 1)), len(u) * len(wo)


def _perp_rule(d, e, level):
    x, w = canonical_tree(d - 1).root.rule(2 * level)
    x = x[:, np.argsort(canonical_tree(d - 1).perm)]
    return x @ _perp_basis(e).T, w


def J_exact(
    X,
    P,
    G,
    rtol: float = 1e-10,
    atol: float = 1e-14,
    perp_level: int = 6,
    max_u: int = 20000,
) -> OscillatoryResult:
    """Sphere average ``int dX^ Phi_0(X, P) G(X^)`` by a polar-adapted rule.

    The outer variable is ``u = <P^, X^>`` and the canonical rule covers
    the orthogonal ``S^{d-2}``.  The ``u``-profile of ``G`` is expanded in
    Gegenbauer polynomials whose products with ``exp(i|P||X|u)`` have
    Bessel-function moments, so the oscillation is integrated exactly and
    no cancellation grows with ``|P||X|``.  The error estimate compares two
    refinement levels in both directions.
    """
    X = np.asarray(X, dtype=float)
    P = np.asarray(P, dtype=float)
    d = X.size
    if P.size != d or d < 3:
        raise DomainError("X and P must be vectors of the same dimension d >= 3")
    pref = (2 * np.pi) ** (-d / 2)
    xm, pm = np.linalg.norm(X), np.linalg.norm(P)
    if xm == 0 or pm == 0:
        x, w = build_full_rule(d, perp_level)
        val = pref * np.sum(w * np.asarray(G(x)))
        return OscillatoryResult(complex(val), 0.0, len(w))
    e = P / pm
    z = pm * xm
    # phase <P, X> = |P||X| <P^, X^>, so the outer variable is aligned with P^
    perp_a = _perp_rule(d, e, perp_level)
    perp_b = _perp_rule(d, e, perp_level + 2)
    n_u = 32
    while True:
        v1, _ = _polar_average(z, e, G, n_u, perp_a)
        n2 = n_u + 16
        v2, cnt = _polar_average(z, e, G, n2, perp_a)
        v3, _ = _polar_average(z, e, G, n_u, perp_b)
        err = max(abs(v2 - v1), abs(v3 - v1))
        if err <= atol / pref + rtol * abs(v2):
            return OscillatoryResult(complex(pref * v2), float(pref * err), cnt)
        if n2 > max_u:
            raise AccuracyError(f"J_exact did not converge at |P||X|={z:g}", achieved=float(pref * err))
        n_u = 2 * n_u


def build_full_rule(d, level):
    q = canonical_tree(d).quadrature(level)
    return q.nodes, q.weights


def J_asymptotic(xmag: float, P, G) -> complex:
    """Leading stationary-phase form ``N_d [Q^- G(-P^) - Q^+ G(P^)]``."""
    P = np.asarray(P, dtype=float)
    pm = np.linalg.norm(P)
    if pm == 0:
        raise DomainError("stationary phase needs |P| > 0")
    w = SphericalWaveFactors(P.size, pm)
    e = P / pm
    g = np.asarray(G(np.stack([-e, e])))
    return complex(w.N * (w.Q_minus(xmag) * g[0] - w.Q_plus(xmag) * g[1]))


def plane_wave_component(X, P, K: int, yP: complex) -> complex:
    """``J`` for ``G = Y_K`` via the plane-wave expansion; ``yP = Y_K(P^)``."""
    X, P = np.asarray(X, dtype=float), np.asarray(P, dtype=float)
    d = X.size
    z = np.linalg.norm(X) * np.linalg.norm(P)
    if z == 0:
        return complex((2 * np.pi) ** (-d / 2) * (np.sqrt(2 * np.pi ** (d / 2) / gamma(d / 2)) if K == 0 else 0.0))
    return complex(1j**K * z ** (1 - d / 2) * jv(K + d / 2 - 1, z) * yP)


def pole_integral_asymptotic(x, p: float, f, sign: int = +1) -> complex:
    """Large-``|x|`` form of ``int dq exp(i<x,q>) f(q) / (q^2 - p^2 -+ i0)``.

    ``f`` takes an ``(n, d)`` array of momenta.  Result:
    ``pi (2 pi)^{(d-1)/2} p^{(d-3)/2} f(+-p x^) exp(+-i(p|x| - pi(d-3)/4)) / |x|^{(d-1)/2}``.
    """
    x = np.asarray(x, dtype=float)
    d = x.size
    xm = np.linalg.norm(x)
    if xm == 0 or p <= 0:
        raise DomainError("need |x| > 0 and p > 0")
    sgn = 1 if sign > 0 else -1
    fv = complex(np.asarray(f((sgn * p * x / xm)[None, :]))[0])
    wave = np.exp(sgn * 1j * p * xm) * branch_phase(d, sgn) / xm ** ((d - 1) / 2)
    return complex(np.pi * (2 * np.pi) ** ((d - 1) / 2) * p ** ((d - 3) / 2) * fv * wave)
