"""Brute-force reference evaluations used by tests and the acceptance runner.

Nothing here shares code with the regularized routines in
:mod:`weakasym.singular`: singular denominators are shifted by ``i eps``
and integrated with plain adaptive or panel quadrature, then extrapolated
to ``eps -> 0``.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import quad
from scipy.special import roots_hermite, roots_legendre

from .harmonics import canonical_tree

EPS_LADDER = (1e-3, 5e-4, 2.5e-4, 1.25e-4)


def richardson(eps, values, order: int = 2) -> complex:
    """Polynomial extrapolation of ``values(eps)`` to ``eps = 0``."""
    A = np.vander(np.asarray(eps, dtype=float), order + 1, increasing=True)
    coef, *_ = np.linalg.lstsq(A, np.asarray(values, dtype=complex), rcond=None)
    return complex(coef[0])


def _cquad(f, a, b, points=None):
    opts = dict(limit=2000, epsabs=1e-14, epsrel=1e-13, points=points)
    re = quad(lambda x: np.real(f(x)), a, b, **opts)[0]
    im = quad(lambda x: np.imag(f(x)), a, b, **opts)[0]
    return complex(re, im)


def cauchy_ieps(B, zeta, side, eps=EPS_LADDER) -> complex:
    """``int_{-1}^1 B(u) / (u - zeta + side i eps) du`` extrapolated in ``eps``."""
    pts = [zeta] if -1 < zeta < 1 else None
    vals = [_cquad(lambda u: B(u) / (u - zeta + side * 1j * e), -1, 1, pts) for e in eps]
    return richardson(eps, vals)


def endpoint_ieps(B, z, side=-1, eps=EPS_LADDER) -> complex:
    """``int_0^1 sqrt(v(1-v)) B(v) / (v - z + side i eps) dv`` extrapolated in ``eps``."""
    pts = [z] if 0 < z < 1 else None
    vals = [
        _cquad(lambda v: np.sqrt(v * (1 - v)) * B(v) / (v - z + side * 1j * e), 0, 1, pts) for e in eps
    ]
    return richardson(eps, vals)


def graded_panels(a, b, x0, h, m=8):
    """Gauss panels on ``[a, b]`` whose widths double away from ``x0``, starting at ``h``."""
    x0 = min(max(x0, a), b)
    cuts = {a, b, x0}
    k = 0
    while x0 - h * 2**k > a or x0 + h * 2**k < b:
        w = h * 2**k
        if x0 - w > a:
            cuts.add(x0 - w)
        if x0 + w < b:
            cuts.add(x0 + w)
        k += 1
    cuts = sorted(cuts)
    t, wt = roots_legendre(m)
    xs = [lo + (hi - lo) * (t + 1) / 2 for lo, hi in zip(cuts, cuts[1:])]
    ws = [(hi - lo) / 2 * wt for lo, hi in zip(cuts, cuts[1:])]
    return np.concatenate(xs), np.concatenate(ws)


def _alpha_rule(points, eps, m=8):
    pts = sorted(points)
    edges = [0.0] + [0.5 * (a + b) for a, b in zip(pts, pts[1:])] + [np.pi / 2]
    parts = [graded_panels(lo, hi, x0, eps, m) for lo, hi, x0 in zip(edges, edges[1:], pts)]
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def composed_fpm_ieps(T, P, R, G, sign=+1, eps: float = 1e-3, n_phi=12, s2_level=6, m=8) -> complex:
    """``F^+-`` of a composed three-body kernel at ``z = P^2 + i eps`` by graded panels.

    Coordinates ``P'^ = (sin(alpha) p^, cos(alpha) k^)`` with ``p^`` polar
    about ``p_b``; panels are graded in ``alpha`` at the form-factor pole
    and the exchange thresholds, and in ``u = cos`` at the exchange pole.
    """
    pb, kb = P[:3], P[3:]
    pbm, kbm = np.linalg.norm(pb), np.linalg.norm(kb)
    e3 = pb / pbm
    q, _ = np.linalg.qr(np.column_stack([e3, np.eye(3)]))
    e1, e2 = q[:, 1], q[:, 2]
    sph = canonical_tree(3).quadrature(s2_level)
    c, s = T.c, T.s
    z = P @ P + 1j * eps
    pts = [np.arcsin(np.sqrt(min((P @ P + T.ta.lam**2) / R**2, 1.0)))]
    for sp in (1, -1):
        for sk in (1, -1):
            mm = sp * c * pbm + sk * abs(s) * kbm
            if 0 < mm < R:
                pts.append(np.arcsin(mm / R))
    al, wal = _alpha_rule(pts, eps / R**2, m)
    phi = 2 * np.pi * (np.arange(n_phi) + 0.5) / n_phi
    total = 0j
    for a_, w_ in zip(al, wal):
        pm = R * np.sin(a_)
        a1 = 2 * c * pm * pbm / s**2
        a0 = pm**2 / s**2 + c**2 * pbm**2 / s**2 - kbm**2
        u, wu = graded_panels(-1, 1, a0 / a1, eps / abs(a1), m)
        st = np.sqrt(1 - u * u)
        dirs = u[None, :, None] * e3 + st[None, :, None] * (
            np.cos(phi)[:, None, None] * e1 + np.sin(phi)[:, None, None] * e2
        )
        shape = (n_phi, len(sph.weights), len(u), 3)
        Pp = np.concatenate(
            [
                np.broadcast_to((pm * dirs)[:, None], shape),
                np.broadcast_to((R * np.cos(a_) * sph.nodes)[None, :, None], shape),
            ],
            axis=-1,
        ).reshape(-1, 6)
        vals = (T.evaluate(Pp, P, z) * G(sign * Pp / R)).reshape(shape[:-1])
        meas = w_ * np.sin(a_) ** 2 * np.cos(a_) ** 2 * 2 * np.pi / n_phi
        total += meas * np.einsum("k,u,pku->", sph.weights, wu, vals)
    return complex(total)


def single_pole_fpm_ieps(T, P, R, G, sign=+1, eps: float = 1e-3, s2_level=6, m=8) -> complex:
    """``F^+-`` of a single-pole kernel at ``z = P^2 + i eps``, graded in ``alpha``."""
    sph = canonical_tree(3).quadrature(s2_level)
    x, w = sph.nodes, sph.weights
    ph, kh = np.repeat(x, len(w), 0), np.tile(x, (len(w), 1))
    wout = np.repeat(w, len(w)) * np.tile(w, len(w))
    z = P @ P + 1j * eps
    a0 = np.arcsin(np.sqrt(min((P @ P + T.lam**2) / R**2, 1.0)))
    al, wal = _alpha_rule([a0], eps / R**2, m)
    total = 0j
    for a_, w_ in zip(al, wal):
        pts = np.concatenate([np.sin(a_) * ph, np.cos(a_) * kh], axis=1)
        vals = T.evaluate(R * pts, P, z) * G(sign * pts)
        total += w_ * np.sin(a_) ** 2 * np.cos(a_) ** 2 * np.sum(wout * vals)
    return complex(total)


def mollified_delta_shell(tc, G, p, R, sigma, n_herm=12, s2_level=8) -> complex:
    """``int dP'^ t^c(k') G(P'^) delta_sigma(p' - p)`` on the shell ``|P'| = R`` in d = 6.

    ``delta_sigma`` is a normalized 3D Gaussian; the ``p'`` integral uses a
    Gauss-Hermite product rule around ``p``.  The error is ``O(sigma^2)``.
    """
    h, wh = roots_hermite(n_herm)
    g = np.array(np.meshgrid(h, h, h, indexing="ij")).reshape(3, -1).T
    wg = np.prod(np.array(np.meshgrid(wh, wh, wh, indexing="ij")).reshape(3, -1), axis=0) / np.pi**1.5
    sph = canonical_tree(3).quadrature(s2_level)
    total = 0j
    for off, wgt in zip(g, wg):
        pp = p + np.sqrt(2) * sigma * off
        k2 = R * R - pp @ pp
        if k2 <= 0:
            continue
        kap = np.sqrt(k2)
        kk = kap * sph.nodes
        pts = np.concatenate([np.broadcast_to(pp, kk.shape), kk], axis=1) / R
        # d^3 p' = R^3 cos(alpha) dOmega-measure, with cos(alpha) = kappa / R
        inner = np.sum(sph.weights * tc(kk) * G(pts))
        total += wgt * kap / R**4 * inner
    return complex(total)
