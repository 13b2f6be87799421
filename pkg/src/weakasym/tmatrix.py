"""Two-body t-matrices and model T-kernels.

Units: hbar = 2 mu = 1, so the free two-body Hamiltonian is ``k^2`` and
energies equal squared momenta.

Partial waves are normalized by

    <k'|V|k> = sum_l (2l+1)/(4 pi) V_l(k', k) P_l(k^'.k^),
    V_l(k', k) = (2/pi) int r^2 j_l(k'r) j_l(kr) V(r) dr,

and the partial-wave Lippmann-Schwinger equation reads

    t_l(k', k; z) = V_l(k', k) - int q^2 dq V_l(k', q) t_l(q, k; z) / (q^2 - z).

On shell ``S_l = 1 - i pi k t_l(k, k; k^2 + i0) = exp(2 i delta_l)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.special import eval_legendre, ive, jv, roots_legendre, spherical_jn, yv

from .errors import AccuracyError, AmbiguousBoundaryError, DomainError
from .jacobi import momentum_exchange_point

# --------------------------------------------------------------------------
# two-body models


@dataclass(frozen=True)
class TwoBodyModel:
    """A two-body interaction.

    ``kind`` is ``"separable"`` (rank-1 Yamaguchi, s-wave:
    ``V_0(k', k) = lam g(k') g(k)``, ``g = 1/(k^2 + beta^2)``) or
    ``"gaussian"`` (closed-form partial waves, 3D Fourier transform
    ``fourier(q) = (2 pi)^{-3} int e^{-iqx} V(x) dx``) or ``"local"``
    (any central ``V(r)``, partial waves by radial quadrature).
    """

    kind: str
    params: dict = field(default_factory=dict)
    potential: Callable | None = field(default=None, compare=False)
    fourier: Callable | None = field(default=None, compare=False)
    radial_rule: tuple | None = field(default=None, compare=False, repr=False)

    def partial_wave(self, ell: int, kp, k) -> np.ndarray:
        """``V_l(k', k)`` on the outer product of ``kp`` and ``k``."""
        kp = np.asarray(kp, dtype=float)[:, None]
        k = np.asarray(k, dtype=float)[None, :]
        if self.kind == "separable":
            if ell != 0:
                return np.zeros((kp.shape[0], k.shape[1]))
            return self.params["lam"] * _yamaguchi_g(kp, self.params["beta"]) * _yamaguchi_g(k, self.params["beta"])
        if self.kind == "gaussian":
            v0, b = self.params["v0"], self.params["b"]
            x = kp * k * b * b / 2
            return v0 * b * b / (2 * np.sqrt(kp * k)) * ive(ell + 0.5, x) * np.exp(-((kp - k) ** 2) * b * b / 4)
        if self.kind == "local":
            r, w = self.radial_rule
            qmax = self.params["qmax"]
            bp = spherical_jn(ell, np.multiply.outer(kp[:, 0], r)) * (kp <= qmax)
            b = spherical_jn(ell, np.multiply.outer(k[0], r)) * (k.T <= qmax)
            return (bp * w) @ b.T
        raise DomainError(f"unknown model kind {self.kind!r}")

    @property
    def bound_kappa(self) -> float | None:
        return self.params.get("kappa")


def _yamaguchi_g(k, beta):
    return 1.0 / (k * k + beta * beta)


def gaussian_model(v0: float, b: float) -> TwoBodyModel:
    """``V(r) = v0 exp(-r^2 / b^2)`` with closed-form partial waves."""
    if b <= 0:
        raise DomainError("range must be positive")

    def pot(r):
        return v0 * np.exp(-np.asarray(r) ** 2 / b**2)

    def ft(q):
        return v0 * np.pi**1.5 * b**3 / (2 * np.pi) ** 3 * np.exp(-np.asarray(q) ** 2 * b * b / 4)

    return TwoBodyModel("gaussian", {"v0": v0, "b": b}, pot, ft)


def local_model(potential: Callable, rmax: float = 8.0, nr: int = 4000) -> TwoBodyModel:
    """Generic local central potential, partial waves by a radial Gauss-Legendre rule.

    ``potential`` must be negligible beyond ``rmax``.  The rule resolves
    momenta up to ``qmax = nr / (2 rmax)``; partial waves beyond that are
    set to zero, which presumes a smooth potential.
    """
    r, w = roots_legendre(nr)
    r = rmax * (r + 1) / 2
    w = w * rmax / 2 * r * r * np.asarray(potential(r), dtype=float) * 2 / np.pi
    return TwoBodyModel("local", {"rmax": rmax, "nr": nr, "qmax": nr / (2 * rmax)}, potential, None, (r, w))


def yamaguchi_model(beta: float, lam: float | None = None, kappa: float | None = None) -> TwoBodyModel:
    """Yamaguchi model; give either the coupling ``lam`` or a bound-state ``kappa`` (``E_b = -kappa^2``)."""
    if beta <= 0:
        raise DomainError("beta must be positive")
    if (lam is None) == (kappa is None):
        raise DomainError("give exactly one of lam, kappa")
    if kappa is not None:
        if kappa <= 0:
            raise DomainError("kappa must be positive")
        lam = -4 * beta * (beta + kappa) ** 2 / np.pi
    params = {"beta": beta, "lam": lam}
    crit = -4 * beta**3 / np.pi
    if lam < crit:
        # root of 1/lam + pi / (4 beta (beta + kappa)^2) = 0
        params["kappa"] = float(np.sqrt(-np.pi * lam / (4 * beta)) - beta)
    return TwoBodyModel("separable", params)


def _gamma_of(z, side):
    """``sqrt(-z)`` on the physical sheet; ``side`` chooses ``z +- i0`` on the cut."""
    z = complex(z)
    if z.imag == 0 and z.real > 0:
        if side is None:
            raise AmbiguousBoundaryError("z on the cut needs an explicit +-i0 side")
        return -1j * np.sqrt(z.real) if side > 0 else 1j * np.sqrt(z.real)
    g = np.sqrt(-z)
    return g if g.real >= 0 else -g


def yamaguchi_tau(z, beta: float, lam: float, side: int | None = None) -> complex:
    g = _gamma_of(z, side)
    return 1.0 / (1.0 / lam + np.pi / (4 * beta * (beta + g) ** 2))


def yamaguchi_t(kp, k, z, model: TwoBodyModel, side: int | None = None):
    """Closed-form s-wave ``t_0(k', k; z) = g(k') tau(z) g(k)``."""
    if model.kind != "separable":
        raise DomainError("yamaguchi_t needs a separable model")
    b, lam = model.params["beta"], model.params["lam"]
    return _yamaguchi_g(np.asarray(kp), b) * yamaguchi_tau(z, b, lam, side) * _yamaguchi_g(np.asarray(k), b)


def yamaguchi_form_factor(k, model: TwoBodyModel):
    """Residue factor ``phi(k)`` with ``t_0 ~ phi(k') phi(k) / (z + kappa^2)``."""
    kappa = model.bound_kappa
    if kappa is None:
        raise DomainError("model has no bound state")
    b = model.params["beta"]
    dtau_inv = np.pi / (4 * b * (b + kappa) ** 3 * kappa)
    return _yamaguchi_g(np.asarray(k), b) / np.sqrt(dtau_inv)


# --------------------------------------------------------------------------
# Lippmann-Schwinger solver


@dataclass(frozen=True)
class LSResult:
    k0: float
    ell: int
    mesh: np.ndarray
    weights: np.ndarray
    t: np.ndarray
    t_on_shell: complex
    S: complex
    delta: float
    unitarity_residual: float
    convergence: float

    def half_shell(self) -> np.ndarray:
        """``t_l(q_i, k0)`` on the mesh (index 0 is ``k0``)."""
        return self.t[:, 0]


def tangent_mesh(n: int, scale: float):
    x, w = roots_legendre(n)
    theta = np.pi / 4 * (x + 1)
    q = scale * np.tan(theta)
    wq = scale * np.pi / 4 * w / np.cos(theta) ** 2
    return q, wq


def _ls_matrix(model, k0, ell, n, scale):
    q, w = tangent_mesh(n, scale)
    kk = np.concatenate([[k0], q])
    V = model.partial_wave(ell, kk, kk)
    D = np.empty(n + 1, dtype=complex)
    D[1:] = w * q * q / (q * q - k0 * k0)
    D[0] = -k0 * k0 * np.sum(w / (q * q - k0 * k0)) + 1j * np.pi * k0 / 2
    A = np.eye(n + 1) + V * D[None, :]
    return kk, w, np.linalg.solve(A, V.astype(complex))


def phase_from_S(S: complex) -> float:
    return float(np.angle(S) / 2)


def ls_solve_twobody(
    model: TwoBodyModel,
    E: float,
    ell: int = 0,
    n: int = 96,
    scale: float | None = None,
    tol: float = 1e-8,
) -> LSResult:
    """Solve the partial-wave LS equation at ``z = E + i0`` by pole subtraction."""
    if E <= 0:
        raise DomainError("scattering energy must be positive")
    k0 = float(np.sqrt(E))
    scale = scale or max(1.0, k0)
    kk, w, t = _ls_matrix(model, k0, ell, n, scale)
    S = 1 - 1j * np.pi * k0 * t[0, 0]
    _, _, t2 = _ls_matrix(model, k0, ell, n + n // 2, scale)
    S2 = 1 - 1j * np.pi * k0 * t2[0, 0]
    conv = abs(S2 - S)
    resid = abs(abs(S) - 1)
    if resid > tol or conv > tol:
        raise AccuracyError(
            f"LS mesh too coarse: unitarity {resid:.2e}, refinement change {conv:.2e}", achieved=max(resid, conv)
        )
    return LSResult(k0, ell, kk, w, t, complex(t[0, 0]), complex(S), phase_from_S(S), resid, conv)


# --------------------------------------------------------------------------
# coordinate-space oracle


def riccati(ell: float, x):
    """Riccati-Bessel pair ``(x j_l(x), x y_l(x))``, real order allowed."""
    x = np.asarray(x, dtype=float)
    f = np.sqrt(np.pi * x / 2)
    return f * jv(ell + 0.5, x), f * yv(ell + 0.5, x)


def variable_phase_shift(potential: Callable, k: float, ell: float = 0, rmax: float = 15.0, r0: float = 1e-6) -> float:
    """Phase shift from ``delta' = -(1/k) V(r) [jh cos(delta) - nh sin(delta)]^2``."""

    def rhs(r, y):
        jh, nh = riccati(ell, k * r)
        return [-potential(r) / k * (jh * np.cos(y[0]) - nh * np.sin(y[0])) ** 2]

    sol = solve_ivp(rhs, (r0, rmax), [0.0], method="DOP853", rtol=1e-12, atol=1e-14, max_step=0.05)
    if not sol.success:
        raise AccuracyError(f"variable-phase integration failed: {sol.message}")
    return float(sol.y[0, -1])


# --------------------------------------------------------------------------
# two-body S kernel on the sphere


@dataclass(frozen=True)
class SKernel:
    """``S(k^', k^) = identity * delta(k^', k^) + smooth(k^'.k^)``."""

    k: float
    identity: float
    t_partial: tuple

    def smooth(self, cos_angle):
        """``-i pi k t(k k^', k k^)`` from the partial-wave t values."""
        x = np.asarray(cos_angle, dtype=float)
        tt = sum((2 * l + 1) / (4 * np.pi) * t * eval_legendre(l, x) for l, t in enumerate(self.t_partial))
        return -1j * np.pi * self.k * tt

    def partial_wave_S(self, ell: int, n: int = 64) -> complex:
        """Eigenvalue on degree-``ell`` harmonics (Funk-Hecke projection)."""
        x, w = roots_legendre(n)
        return complex(self.identity + 2 * np.pi * np.sum(w * self.smooth(x) * eval_legendre(ell, x)))


def twobody_s_kernel(k: float, model: TwoBodyModel, lmax: int = 4, n: int = 96) -> SKernel:
    if k <= 0:
        raise DomainError("|k| must be positive")
    if model.kind == "separable":
        ts = [complex(yamaguchi_t(k, k, k * k, model, side=+1))] + [0j] * lmax
    else:
        ts = [ls_solve_twobody(model, k * k, ell, n=n).t_on_shell for ell in range(lmax + 1)]
    return SKernel(k, 1.0, tuple(ts))


# --------------------------------------------------------------------------
# N-body kernel models

SMOOTH, POLE_LEFT, POLE_RIGHT, DOUBLE_POLE = "smooth", "pole-left", "pole-right", "double-pole"
# the T_a R_0 T_b free-propagator denominator, a moving pole in the angles
EXCHANGE_POLE = "exchange-pole"


def delta_connected(label: str) -> str:
    return f"delta-connected({label})"


@dataclass(frozen=True)
class PoleSmoothT:
    """Subsystem t-matrix ``phi(k') phi(k) / (E + lam^2) + c exp(-a (k'^2 + k^2))``.

    ``phi(k) = norm / (k^2 + beta^2)``.  3D, isotropic.
    """

    norm: float
    beta: float
    lam: float
    c: float
    a: float

    def phi(self, k2):
        return self.norm / (k2 + self.beta**2)

    def smooth(self, kp2, k2):
        return self.c * np.exp(-self.a * (kp2 + k2))

    def __call__(self, kp2, k2, E):
        return self.phi(kp2) * self.phi(k2) / (E + self.lam**2) + self.smooth(kp2, k2)


class TKernel:
    """Base class: ``evaluate(Pp, P, z)`` on ``(n, d)`` arrays and a tag set."""

    tags: frozenset = frozenset()
    d: int

    def evaluate(self, Pp, P, z):
        raise NotImplementedError


@dataclass(frozen=True)
class ZeroKernel(TKernel):
    d: int
    tags: frozenset = frozenset({SMOOTH})

    def evaluate(self, Pp, P, z):
        return np.zeros(np.atleast_2d(Pp).shape[0], dtype=complex)


@dataclass(frozen=True)
class GaussianKernel(TKernel):
    """``T(P', P) = c exp(-a (P'^2 + P^2) + b P'.P)``.

    With ``b = 2a`` this is the Born kernel of a Gaussian potential.
    """

    d: int
    c: float
    a: float
    b: float = 0.0
    tags: frozenset = frozenset({SMOOTH})

    def evaluate(self, Pp, P, z):
        Pp = np.atleast_2d(Pp)
        e = -self.a * (np.sum(Pp * Pp, axis=1) + np.dot(P, P)) + self.b * (Pp @ np.asarray(P))
        return self.c * np.exp(e) + 0j


def born_gaussian_kernel(d: int, v0: float, b: float) -> GaussianKernel:
    """Born approximation ``<P'|V|P>`` of ``V(X) = v0 exp(-|X|^2 / b^2)`` in ``d`` dimensions."""
    if b <= 0:
        raise DomainError("range b must be positive")
    return GaussianKernel(d, v0 * (b * b / (4 * np.pi)) ** (d / 2), b * b / 4, b * b / 2)


@dataclass(frozen=True)
class OnShellTwoBodyKernel(TKernel):
    """Two-body ``t(k k^', k k^)`` from on-shell partial waves, d = 3.

    Only the angle between the arguments is used, so the kernel is meant
    for the energy shell ``|P'| = |P| = k``.
    """

    k: float
    t_partial: tuple
    d: int = 3
    tags: frozenset = frozenset({SMOOTH})

    def evaluate(self, Pp, P, z):
        Pp = np.atleast_2d(Pp)
        P = np.asarray(P, dtype=float)
        x = (Pp @ P) / (np.linalg.norm(Pp, axis=1) * np.linalg.norm(P))
        x = np.clip(x, -1.0, 1.0)
        return sum((2 * l + 1) / (4 * np.pi) * t * eval_legendre(l, x) for l, t in enumerate(self.t_partial)) + 0j

    @classmethod
    def from_s_kernel(cls, sk: "SKernel") -> "OnShellTwoBodyKernel":
        return cls(sk.k, tuple(sk.t_partial))


@dataclass(frozen=True)
class SinglePoleKernel(TKernel):
    """``phi(k') / (z + lam^2 - p'^2) * c exp(-a (P'^2 + P^2))`` in layout ``(p, k)``, d = 6."""

    phi_norm: float
    beta: float
    lam: float
    c: float
    a: float
    d: int = 6
    tags: frozenset = frozenset({POLE_LEFT})

    def phi(self, k2):
        return self.phi_norm / (k2 + self.beta**2)

    def smooth(self, Pp, P):
        return self.c * np.exp(-self.a * (np.sum(Pp * Pp, axis=1) + np.dot(P, P)))

    def evaluate(self, Pp, P, z):
        Pp = np.atleast_2d(Pp)
        p2 = np.sum(Pp[:, :3] ** 2, axis=1)
        k2 = np.sum(Pp[:, 3:] ** 2, axis=1)
        return self.phi(k2) / (z + self.lam**2 - p2) * self.smooth(Pp, P)


@dataclass(frozen=True)
class DeltaConnectedKernel(TKernel):
    """``t^c(k', k; z - p^2) delta(p' - p)`` for a two-cluster partition, d = 6.

    ``tc(kp, k, E)`` takes ``(n, 3)`` and ``(3,)`` arrays.
    """

    tc: Callable
    d: int = 6
    label: str = "(12)(3)"

    @property
    def tags(self):
        return frozenset({delta_connected(self.label)})

    def evaluate(self, Pp, P, z):
        raise DomainError("delta-connected kernels are distributions; integrate with delta_reduce_Dm")


@dataclass(frozen=True)
class ComposedKernel(TKernel):
    """Three-body kernel of ``T_a R_0 T_b`` (a != b), layout ``(p, k)`` in each chain.

    ``P'`` is given in chain ``a``, ``P`` in chain ``b``; ``(c, s)`` are the
    chain coefficients of ``b`` relative to ``a`` in rotation form.
    """

    ta: PoleSmoothT
    tb: PoleSmoothT
    c: float
    s: float
    d: int = 6
    tags: frozenset = frozenset({EXCHANGE_POLE, POLE_LEFT, POLE_RIGHT, DOUBLE_POLE})

    def exchange(self, pa, pb):
        """``(k_a(p_b, p'_a), k_b(p'_a, p_b))`` for ``(n, 3)`` arrays."""
        ka = momentum_exchange_point(pb, pa, self.c, self.s)
        kb = pa / self.s - (self.c / self.s) * pb
        return ka, kb

    def denominators(self, Pp, P, z):
        """``D1 = k_b^2 + p_b^2 - z`` and ``D2 = z + lam_a^2 - p'^2``."""
        Pp = np.atleast_2d(Pp)
        pa = Pp[:, :3]
        pb = np.broadcast_to(P[:3], pa.shape)
        ka, kb = self.exchange(pa, pb)
        D1 = np.sum(kb * kb, axis=1) + np.dot(P[:3], P[:3]) - z
        D2 = z + self.ta.lam**2 - np.sum(pa * pa, axis=1)
        return D1, D2, ka, kb

    def evaluate(self, Pp, P, z):
        Pp = np.atleast_2d(Pp)
        D1, _, ka, kb = self.denominators(Pp, P, z)
        ka2, kb2 = np.sum(ka * ka, axis=1), np.sum(kb * kb, axis=1)
        kpa2 = np.sum(Pp[:, 3:] ** 2, axis=1)
        pa2 = np.sum(Pp[:, :3] ** 2, axis=1)
        kbb2 = np.dot(P[3:], P[3:])
        pb2 = np.dot(P[:3], P[:3])
        t_a = self.ta(kpa2, ka2, z - pa2)
        t_b = self.tb(kb2, kbb2, z - pb2)
        return t_a * t_b / (abs(self.s) ** 3 * D1)

    def split_numerators(self, Pp, P, z):
        """Smooth numerators ``(A1, A2)`` with ``T = A1 / D1 + A2 / D2``.

        Uses ``1/(D1 D2) = (1/D1 + 1/D2) / (k_a^2 + lam_a^2)``; the sum
        ``D1 + D2`` never vanishes.
        """
        Pp = np.atleast_2d(Pp)
        _, _, ka, kb = self.denominators(Pp, P, z)
        ka2, kb2 = np.sum(ka * ka, axis=1), np.sum(kb * kb, axis=1)
        kpa2 = np.sum(Pp[:, 3:] ** 2, axis=1)
        pb2 = np.dot(P[:3], P[:3])
        kbb2 = np.dot(P[3:], P[3:])
        t_b = self.tb(kb2, kbb2, z - pb2) / abs(self.s) ** 3
        x = self.ta.phi(kpa2) * self.ta.phi(ka2)
        gap = ka2 + self.ta.lam**2
        A1 = t_b * (x / gap + self.ta.smooth(kpa2, ka2))
        A2 = t_b * x / gap
        return A1, A2


def model_NBody_kernel(spec: dict) -> TKernel:
    """Build a kernel from a JSON-like spec (``{"kind": ..., ...}``)."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "zero":
        return ZeroKernel(int(spec.get("d", 6)))
    if kind == "gaussian":
        return GaussianKernel(
            int(spec.get("d", 6)), float(spec.get("c", 1.0)), float(spec.get("a", 0.5)), float(spec.get("b", 0.0))
        )
    if kind == "single-pole":
        return SinglePoleKernel(**{k: float(v) for k, v in spec.items()})
    if kind == "composed":
        ta = PoleSmoothT(**spec["ta"])
        tb = PoleSmoothT(**spec.get("tb", spec["ta"]))
        if "c" in spec:
            c, s = float(spec["c"]), float(spec["s"])
        else:
            from .jacobi import MassSet, build_jacobi, three_body_coefficients
            from .partitions import enumerate_chains

            ms = MassSet(tuple(spec.get("masses", (1.0, 1.0, 1.0))))
            chains = enumerate_chains(3)
            ia, ib = spec.get("chains", (2, 0))
            c, s = three_body_coefficients(build_jacobi(ms, chains[ia]), build_jacobi(ms, chains[ib]))
        return ComposedKernel(ta, tb, c, s)
    raise DomainError(f"unknown kernel spec {kind!r}")
