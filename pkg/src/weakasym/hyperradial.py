"""Coupled hyperradial equations, S-matrix extraction and the weak-asymptotics check.

Partial components are propagated as ``u(rho) = rho^{(d-1)/2} Psi(rho)``,

    u'' = [ L / rho^2 + V(rho) - P^2 ] u,    L = l (l + 1),  l = K + (d-3)/2,

with the renormalized Numerov recursion on the ratios ``F_{n+1} F_n^{-1}``
(``F = (1 - h^2 W / 12) u``), which stays stable when many channels are
closed near the origin.  At ``rho_max`` the solution matrix is matched to
the exact free waves

    w^{-/+}_K(rho) = i^K / 2 (P rho)^{1-d/2} H^{(2)/(1)}_{K+d/2-1}(P rho) rho^{(d-1)/2},

so that ``u = W^- + W^+ S``.  As ``rho -> oo``, ``w^-_K rho^{-(d-1)/2} ->
(-1)^K N_d Q^-`` and ``w^+_K rho^{-(d-1)/2} -> -N_d Q^+``: the matched
components have incoming part ``N_d (-1)^K delta`` and outgoing part
``-N_d S Q^+``.  With ``V = 0`` the combination ``w^- + w^+`` is the plane
wave component ``i^K (P rho)^{1-d/2} J_nu(P rho)``, hence ``S = 1``.

Pair potentials and hypercentral potentials commute with reflecting one
Cartesian component of every Jacobi vector, and canonical harmonics are
eigenfunctions of those reflections, so the channel set splits into
independent sectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.special import eval_jacobi, hankel1, hankel2

from .errors import AccuracyError, DomainError, MatchingError, PropagationError
from .harmonics import HarmonicIndex, SphereQuadrature, canonical_tree
from .jacobi import MassSet, build_jacobi, chain_rotation
from .oscillatory import J_asymptotic, J_exact, SphericalWaveFactors
from .partitions import enumerate_chains
from .singular import FpmOptions, F_pm, radial_pole_integral
from .tmatrix import SMOOTH, TKernel

# --------------------------------------------------------------------------
# channel basis


def _reflection_signs(tree, indices, d, rng) -> np.ndarray:
    """Eigenvalue of each harmonic under ``x_{3j+c} -> -x_{3j+c}``, one column per ``c``."""
    x = rng.normal(size=(12, d))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    y = tree.evaluate(indices, x)
    out = np.empty((len(indices), 3), dtype=int)
    for c in range(3):
        xr = x.copy()
        xr[:, c::3] *= -1
        yr = tree.evaluate(indices, xr)
        ratio = np.sum(yr * y, axis=0) / np.sum(y * y, axis=0)
        if np.max(np.abs(np.abs(ratio) - 1)) > 1e-8:
            raise DomainError("harmonic is not a reflection eigenfunction")
        out[:, c] = np.rint(ratio).astype(int)
    return out


@dataclass
class ChannelBasis:
    """Harmonics with ``K <= kmax`` plus a sphere rule exact to degree ``2 kmax`` or more."""

    d: int
    kmax: int
    indices: list
    quadrature: SphereQuadrature
    sectors: np.ndarray = field(repr=False)

    def __post_init__(self):
        if len(set(self.indices)) != len(self.indices):
            raise DomainError("duplicate channel indices")
        if self.quadrature.degree < 2 * self.kmax:
            raise DomainError("quadrature must be exact to degree 2*kmax")

    def __len__(self):
        return len(self.indices)

    @property
    def K(self) -> np.ndarray:
        return np.array([ix.K for ix in self.indices])

    @property
    def ell(self) -> np.ndarray:
        """Effective angular momentum ``K + (d-3)/2`` of the reduced radial equation."""
        return self.K + (self.d - 3) / 2

    @property
    def tree(self):
        return canonical_tree(self.d)

    @cached_property
    def values(self) -> np.ndarray:
        """``Y[q, j]`` at the quadrature nodes."""
        return self.tree.evaluate(self.indices, self.quadrature.nodes)

    def evaluate(self, points) -> np.ndarray:
        return self.tree.evaluate(self.indices, points)

    def sector_blocks(self) -> list[np.ndarray]:
        """Channel index arrays of the reflection sectors, in a fixed order."""
        keys = sorted(set(self.sectors.tolist()))
        return [np.flatnonzero(self.sectors == k) for k in keys]


def channel_basis(d: int, kmax: int, level: int | None = None) -> ChannelBasis:
    """Canonical channel basis; ``level`` defaults to ``kmax`` (exact for products of two channels)."""
    if d < 3:
        raise DomainError("hyperradial solver needs d >= 3")
    if kmax < 0:
        raise DomainError("kmax must be nonnegative")
    tree = canonical_tree(d)
    indices = tree.basis(kmax)
    quad = tree.quadrature(max(level if level is not None else kmax, 1))
    if d % 3 == 0:
        signs = _reflection_signs(tree, indices, d, np.random.default_rng(20240611))
        sectors = ((signs < 0).astype(int) * np.array([1, 2, 4])).sum(axis=1)
    else:
        sectors = np.zeros(len(indices), dtype=int)
    return ChannelBasis(d, kmax, indices, quad, sectors)


# --------------------------------------------------------------------------
# potentials


class HypercentralPotential:
    """``V(X) = v(|X|)``; diagonal in every harmonic basis."""

    reflection_symmetric = True

    def __init__(self, v: Callable):
        self.v = v

    def __call__(self, X):
        X = np.atleast_2d(X)
        return np.asarray(self.v(np.linalg.norm(X, axis=1)), dtype=float)

    def matrix(self, basis: ChannelBasis, rho: float, block=None) -> np.ndarray:
        n = len(basis) if block is None else len(basis.sector_blocks()[block])
        return float(self.v(np.array([rho]))[0]) * np.eye(n)


def gaussian_hypercentral(v0: float, b: float) -> HypercentralPotential:
    return HypercentralPotential(lambda r: v0 * np.exp(-((np.asarray(r) / b) ** 2)))


class FunctionPotential:
    """An arbitrary configuration-space function; matrices by sphere quadrature."""

    reflection_symmetric = False

    def __init__(self, f: Callable):
        self.f = f

    def __call__(self, X):
        return np.asarray(self.f(np.atleast_2d(X)), dtype=float)


class PairwisePotential:
    """Sum of central pair potentials ``sum_{i<j} v_ij(|r_i - r_j|)`` for N = 2 or 3.

    ``pair`` is one vectorized callable used for every pair, or a dict keyed
    by ``(i, j)`` with 1-based particle labels.  The matrix on the sphere is
    assembled as ``sum_p U_p D_p(rho) U_p^T``: ``U_p`` rotates the reference
    harmonics into the Jacobi set whose first pair is ``p`` (it preserves
    ``K``) and ``D_p`` is the pair potential in that set, which only acts on
    the hyperangle of the pair vector.  ``n_t`` Gauss-Jacobi nodes resolve
    that hyperangle integral.
    """

    reflection_symmetric = True

    def __init__(self, masses: Sequence[float], pair, n_t: int = 256):
        self.masses = MassSet(tuple(masses))
        if self.masses.n not in (2, 3):
            raise DomainError("pairwise potentials are implemented for N = 2 and 3")
        n = self.masses.n
        keys = [(i, j) for i in range(1, n + 1) for j in range(i + 1, n + 1)]
        self.pair = {k: (pair[k] if isinstance(pair, dict) else pair) for k in keys}
        self.n_t = n_t
        self._cache: dict = {}
        chains = enumerate_chains(n)
        self._ref = build_jacobi(self.masses, chains[0])
        self._systems = {}
        for ch in chains:
            sys_ = build_jacobi(self.masses, ch)
            row, w1, w2 = next(p for p in sys_.pairs if p[0] == n - 2)
            key = tuple(sorted(w1 + w2))
            self._systems.setdefault(key, sys_)

    def _mu2(self, key):
        mi, mj = (self.masses.masses[i - 1] for i in key)
        return np.sqrt(2 * mi * mj / (mi + mj))

    def __call__(self, X):
        X = np.atleast_2d(X)
        total = np.zeros(len(X))
        for key, sys_ in self._systems.items():
            R = chain_rotation(self._ref, sys_)
            k = (X @ R.T)[:, -3:]
            total += self.pair[key](np.linalg.norm(k, axis=1) / self._mu2(key))
        return total

    def _prepare(self, basis: ChannelBasis):
        key = id(basis)
        if key in self._cache:
            return self._cache[key]
        d = basis.d
        if d != 3 * (self.masses.n - 1):
            raise DomainError("basis dimension does not match the particle number")
        blocks = basis.sector_blocks()
        if d == 3:
            self._cache[key] = ("hyper", blocks)
            return self._cache[key]
        root = basis.tree.root
        t, w = root.hyperangle_rule(4 * (self.n_t - 1))
        r1 = np.sqrt((1 + t) / 2)
        r2 = np.sqrt((1 - t) / 2)
        labels = [ix.label for ix in basis.indices]
        Fr = np.empty((len(labels), len(t)))
        for i, (K, n, a, b) in enumerate(labels):
            k1, k2 = a[0], b[0]
            pa, pb = root._params(k1, k2)
            Fr[i] = root.radial_norm(n, k1, k2) * r1**k1 * r2**k2 * eval_jacobi(n, pa, pb, t)
        sub = {lab: i for i, lab in enumerate(sorted({(lab[2], lab[3]) for lab in labels}, key=repr))}
        sub_id = np.array([sub[(lab[2], lab[3])] for lab in labels])
        quad = basis.quadrature
        Y = basis.values
        WY = quad.weights[:, None] * Y
        per_pair = []
        for pkey, sys_ in self._systems.items():
            R = chain_rotation(self._ref, sys_)
            U = basis.evaluate(quad.nodes @ R).T @ WY
            # rotations keep K; drop quadrature noise outside the K blocks
            U[basis.K[:, None] != basis.K[None, :]] = 0.0
            ublocks = []
            for blk in blocks:
                off = np.delete(U[blk], blk, axis=1)
                if off.size and np.max(np.abs(off)) > 1e-9:
                    raise AccuracyError("pair rotation mixes reflection sectors", achieved=float(np.max(np.abs(off))))
                ublocks.append(U[np.ix_(blk, blk)])
            per_pair.append((pkey, ublocks))
        data = dict(t=t, w=w, r1=r1, F=Fr, sub_id=sub_id, pairs=per_pair, blocks=blocks)
        self._cache[key] = ("pair", data)
        return self._cache[key]

    def matrix(self, basis: ChannelBasis, rho: float, block: int | None = None) -> np.ndarray:
        """Block ``block`` of the sector decomposition, or the full matrix when ``None``."""
        kind, data = self._prepare(basis)
        if kind == "hyper":
            (pkey,) = self.pair
            v = float(self.pair[pkey](np.array([rho / self._mu2(pkey)]))[0])
            n = len(basis) if block is None else len(data[block])
            return v * np.eye(n)
        if block is None:
            out = np.zeros((len(basis), len(basis)))
            for ib, blk in enumerate(data["blocks"]):
                out[np.ix_(blk, blk)] = self.matrix(basis, rho, ib)
            return out
        blk = data["blocks"][block]
        F = data["F"][blk]
        mask = data["sub_id"][blk][:, None] == data["sub_id"][blk][None, :]
        out = np.zeros((len(blk), len(blk)))
        for pkey, ublocks in data["pairs"]:
            g = data["w"] * self.pair[pkey](rho * data["r1"] / self._mu2(pkey))
            D = np.where(mask, (F * g) @ F.T, 0.0)
            U = ublocks[block]
            out += U @ D @ U.T
        return 0.5 * (out + out.T)


def gaussian_pair(v0: float, b: float) -> Callable:
    return lambda r: v0 * np.exp(-((np.asarray(r) / b) ** 2))


def potential_matrix(V, basis: ChannelBasis, rho: float, tol: float = 1e-10, quadrature=None) -> np.ndarray:
    """``V_{[K][K']}(rho) = int dX^ Y_K V(rho X^) Y_K'``.

    Potentials with a ``matrix`` method use it; anything else is integrated
    with ``quadrature`` (default: the basis rule).  Passing a finer
    ``quadrature`` to a structured potential forces the generic path, which
    is how the fast paths are checked.
    """
    if rho <= 0:
        raise DomainError("rho must be positive")
    if hasattr(V, "matrix") and quadrature is None:
        return V.matrix(basis, rho)
    quad = quadrature if quadrature is not None else basis.quadrature
    if quad.degree < 2 * basis.kmax:
        raise AccuracyError("quadrature cannot integrate products of two channels", achieved=quad.degree)
    Y = basis.values if quad is basis.quadrature else basis.evaluate(quad.nodes)
    v = np.asarray(V(rho * quad.nodes), dtype=float)
    M = (Y * (quad.weights * v)[:, None]).T @ Y
    asym = np.max(np.abs(M - M.T)) if M.size else 0.0
    if asym > tol * max(1.0, np.max(np.abs(M))):
        raise AccuracyError("potential matrix is not symmetric", achieved=float(asym))
    return 0.5 * (M + M.T)


# --------------------------------------------------------------------------
# propagation


@dataclass
class RadialSolution:
    """Propagated solution data per sector block.

    ``ratio[b]`` is ``u(rho_N) u(rho_{N-1})^{-1}`` for block ``b``; with
    ``store=True`` the Numerov ratios of every step are kept and
    :meth:`partial_components` can rebuild ``Psi_{[K][N]}`` on ``rho_grid``
    once the S-matrix is known.
    """

    basis: ChannelBasis
    energy: float
    rho_grid: np.ndarray
    blocks: list
    ratio: list
    tail: float
    steps: list | None = field(default=None, repr=False)

    @property
    def rho_max(self) -> float:
        return float(self.rho_grid[-1])

    def partial_components(self, smat: "SMatrixBlock") -> np.ndarray:
        """``Psi[i, K, N]`` on ``rho_grid`` normalized as in the matched solution."""
        if self.steps is None:
            raise DomainError("solve with store=True to keep the propagation history")
        d, P = self.basis.d, np.sqrt(self.energy)
        n = len(self.basis)
        out = np.zeros((len(self.rho_grid), n, n), dtype=complex)
        rN = self.rho_grid[-1]
        for ib, blk in enumerate(self.blocks):
            Rs, Ts = self.steps[ib]
            wm, wp = free_waves(self.basis.K[blk], d, P, np.array([rN]))
            S = smat.values[np.ix_(blk, blk)]
            uN = np.diag(wm[0]) + np.diag(wp[0]) @ S
            I = np.eye(len(blk))
            Fn = (I - Ts[-1]) @ uN
            us = [uN]
            for j in range(len(Rs) - 1, -1, -1):
                Fn = np.linalg.solve(Rs[j], Fn)
                us.append(np.linalg.solve(I - Ts[j], Fn))
            us = np.array(us[::-1])
            out[:, blk[:, None], blk[None, :]] = us
        return out * self.rho_grid[:, None, None] ** (-(d - 1) / 2)


def _block_matrix(V, basis, rho, ib, blk):
    if V is None:
        return np.zeros((len(blk), len(blk)))
    if getattr(V, "reflection_symmetric", False) and hasattr(V, "matrix"):
        return V.matrix(basis, rho, ib)
    full = potential_matrix(V, basis, rho)
    return full[np.ix_(blk, blk)]


def _solve_diagonal(basis, V, P2, grid, h, tail_tol, store):
    """All channels decouple: the same recursion on vectors."""
    ell = basis.ell
    L = ell * (ell + 1)
    v = np.zeros(len(grid)) if V is None else np.asarray(V.v(grid), dtype=float)
    T = (h * h / 12.0) * (L[None, :] / grid[:, None] ** 2 + v[:, None] - P2)
    c = (v[0] - P2) / (2 * (2 * ell + 3))
    u0 = grid[0] ** (ell + 1) * (1 + c * grid[0] ** 2)
    u1 = grid[1] ** (ell + 1) * (1 + c * grid[1] ** 2)
    A = 1.0 - T
    if np.any(np.abs(A) < 1e-12):
        raise PropagationError("Numerov step singular; change h")
    U = 12.0 / A - 10.0
    R = A[1] * u1 / (A[0] * u0)
    Rs = [R] if store else None
    for n in range(1, len(grid) - 1):
        R = U[n] - 1.0 / R
        if store:
            Rs.append(R)
    if not np.all(np.isfinite(R)):
        raise PropagationError("ratio propagation overflowed; reduce h")
    tail = abs(float(v[-1]))
    if tail > tail_tol:
        raise PropagationError(f"potential tail {tail:.3g} at rho_max exceeds {tail_tol:.3g}; increase rho_max")
    ratio = R * A[-2] / A[-1]
    blocks = basis.sector_blocks()
    ratios = [np.diag(ratio[b]) for b in blocks]
    history = None
    if store:
        Rs = np.array(Rs)
        history = [([np.diag(r[b]) for r in Rs], [np.diag(t[b]) for t in T]) for b in blocks]
    return RadialSolution(basis, P2, grid, blocks, ratios, tail, history)


def solve_coupled(
    basis: ChannelBasis,
    V,
    energy: float,
    rho_max: float = 20.0,
    h: float = 0.01,
    rho_min: float = 1e-3,
    tail_tol: float = 1e-4,
    store: bool = False,
    cond_max: float = 1e12,
) -> RadialSolution:
    """Propagate regular solutions of the coupled hyperradial equations to ``rho_max``.

    The grid is ``rho_min + n h``.  Each channel starts from the two-term
    Frobenius series ``rho^{l+1} (1 + c rho^2)`` with
    ``c = (V_ll(rho_min) - P^2) / (2 (2l + 3))``.  Potentials that are not
    reflection symmetric are propagated as a single block.
    """
    if energy <= 0:
        raise DomainError("energy P^2 must be positive")
    if not (0 < rho_min < rho_max) or h <= 0:
        raise DomainError("need 0 < rho_min < rho_max and h > 0")
    nsteps = int(np.ceil((rho_max - rho_min) / h))
    grid = rho_min + h * np.arange(nsteps + 1)
    P2 = float(energy)
    if V is None or isinstance(V, HypercentralPotential):
        return _solve_diagonal(basis, V, P2, grid, h, tail_tol, store)
    blocks = basis.sector_blocks() if getattr(V, "reflection_symmetric", False) else [np.arange(len(basis))]
    ratios, history = [], [] if store else None
    ell_all = basis.ell
    tail = 0.0
    for ib, blk in enumerate(blocks):
        ell = ell_all[blk]
        L = ell * (ell + 1)
        m = len(blk)
        I = np.eye(m)

        def Tmat(rho, Vm):
            W = Vm + np.diag(L / rho**2 - P2)
            return (h * h / 12.0) * W

        V0 = _block_matrix(V, basis, grid[0], ib, blk)
        V1 = _block_matrix(V, basis, grid[1], ib, blk)
        c = (np.diag(V0) - P2) / (2 * (2 * ell + 3))
        T_prev, T_cur = Tmat(grid[0], V0), Tmat(grid[1], V1)
        u0 = np.diag(grid[0] ** (ell + 1) * (1 + c * grid[0] ** 2))
        u1 = np.diag(grid[1] ** (ell + 1) * (1 + c * grid[1] ** 2))
        Rn = ((I - T_cur) @ u1) @ np.linalg.inv((I - T_prev) @ u0)
        Rs, Ts = ([Rn], [T_prev, T_cur]) if store else (None, None)
        Vn = V1
        for n in range(1, nsteps):
            A = I - T_cur
            Ainv = np.linalg.inv(A)
            # 1-norm condition estimate; an SVD per step would dominate the cost
            cond = np.abs(A).sum(0).max() * np.abs(Ainv).sum(0).max()
            if not np.isfinite(cond) or cond > cond_max:
                raise PropagationError(f"Numerov step singular at rho={grid[n]:.4g}; reduce h")
            Rn = 12.0 * Ainv - 10.0 * I - np.linalg.inv(Rn)
            if not np.all(np.isfinite(Rn)):
                raise PropagationError(f"ratio propagation overflowed at rho={grid[n]:.4g}; reduce h")
            T_prev = T_cur
            Vn = _block_matrix(V, basis, grid[n + 1], ib, blk)
            T_cur = Tmat(grid[n + 1], Vn)
            if store:
                Rs.append(Rn)
                Ts.append(T_cur)
        tail = max(tail, float(np.max(np.abs(Vn))) if m else 0.0)
        # u_N u_{N-1}^{-1} from F_N F_{N-1}^{-1}
        ratios.append(np.linalg.solve(I - T_cur, Rn @ (I - T_prev)))
        if store:
            history.append((Rs, Ts))
    if tail > tail_tol:
        raise PropagationError(f"potential tail {tail:.3g} at rho_max exceeds {tail_tol:.3g}; increase rho_max")
    return RadialSolution(basis, P2, grid, blocks, ratios, tail, history)


# --------------------------------------------------------------------------
# matching


def free_waves(K, d: int, P: float, rho) -> tuple[np.ndarray, np.ndarray]:
    """Incoming and outgoing reduced free waves ``w^-_K, w^+_K`` at radii ``rho``."""
    K = np.asarray(K)
    rho = np.asarray(rho, dtype=float)[:, None]
    nu = K[None, :] + d / 2 - 1
    z = P * rho
    pref = (1j ** K)[None, :] * 0.5 * z ** (1 - d / 2) * rho ** ((d - 1) / 2)
    return pref * hankel2(nu, z), pref * hankel1(nu, z)


@dataclass
class SMatrixBlock:
    values: np.ndarray
    unitarity_defect: float
    symmetry_defect: float
    kmax: int
    rho_max: float | None
    indices: list = field(repr=False, default_factory=list)
    condition: float = 1.0
    meta: dict = field(default_factory=dict)

    def eigenphases(self) -> np.ndarray:
        """Half the arguments of the eigenvalues, sorted."""
        return np.sort(np.angle(np.linalg.eigvals(self.values)) / 2)

    @classmethod
    def from_values(cls, S, kmax, rho_max=None, indices=(), condition=1.0, meta=None):
        n = len(S)
        unit = float(np.max(np.abs(S @ S.conj().T - np.eye(n)))) if n else 0.0
        sym = float(np.max(np.abs(S - S.T))) if n else 0.0
        return cls(S, unit, sym, kmax, rho_max, list(indices), condition, dict(meta or {}))


def match_extract_S(
    sol: RadialSolution, basis: ChannelBasis | None = None, energy: float | None = None, cond_max: float = 1e10
) -> SMatrixBlock:
    """Match the propagated solution at the last two grid points to ``W^- + W^+ S``."""
    basis = basis or sol.basis
    energy = sol.energy if energy is None else energy
    if basis is not sol.basis or energy != sol.energy:
        raise DomainError("solution was propagated for a different basis or energy")
    P = np.sqrt(energy)
    n = len(basis)
    S = np.zeros((n, n), dtype=complex)
    worst = 1.0
    r2 = sol.rho_grid[-2:]
    for blk, r in zip(sol.blocks, sol.ratio):
        wm, wp = free_waves(basis.K[blk], basis.d, P, r2)
        A = r * wp[0][None, :] - np.diag(wp[1])
        B = np.diag(wm[1]) - r * wm[0][None, :]
        cond = np.linalg.cond(A)
        worst = max(worst, cond)
        if not np.isfinite(cond) or cond > cond_max:
            raise MatchingError(f"matching system ill-conditioned (cond={cond:.3g})", condition=cond)
        S[np.ix_(blk, blk)] = np.linalg.solve(A, B)
    meta = dict(d=basis.d, energy=float(energy), tail=sol.tail, h=float(sol.rho_grid[1] - sol.rho_grid[0]))
    return SMatrixBlock.from_values(S, basis.kmax, sol.rho_max, basis.indices, worst, meta)


def smatrix(basis, V, energy, **kw) -> SMatrixBlock:
    """``solve_coupled`` followed by ``match_extract_S``."""
    return match_extract_S(solve_coupled(basis, V, energy, **kw))


# --------------------------------------------------------------------------
# S from a T kernel


def s_from_tkernel(
    T: TKernel, basis: ChannelBasis, pmag: float, quadrature: SphereQuadrature | None = None, options=None
) -> SMatrixBlock:
    """``S_{[K][N]} = delta - i pi |P|^{d-2} int dP^ Y_N(P^) F^+(|P|, P; Y_K)``.

    Smooth kernels are integrated with the product rule directly (the same
    rule the smooth branch of ``F_pm`` uses); other kernels call ``F_pm`` for
    every outer node and channel, which is slow but follows the dispatch and
    its refusals.
    """
    if pmag <= 0:
        raise DomainError("|P| must be positive")
    quad = quadrature or basis.quadrature
    Y = basis.values if quad is basis.quadrature else basis.evaluate(quad.nodes)
    x, w = quad.nodes, quad.weights
    d = basis.d
    n = len(basis)
    if T.tags <= {SMOOTH}:
        WY = w[:, None] * Y
        cols = np.empty((n, len(w)), dtype=complex)
        for q in range(len(w)):
            tq = T.evaluate(pmag * x, pmag * x[q], pmag * pmag)
            cols[:, q] = WY.T @ tq
        A = cols @ WY
    else:
        A = np.zeros((n, n), dtype=complex)
        tree = basis.tree
        for q in range(len(w)):
            for k, ix in enumerate(basis.indices):
                f = F_pm(T, pmag * x[q], pmag, lambda u, ix=ix: tree.evaluate([ix], u)[:, 0], +1, options).value
                A[k] += w[q] * f * Y[q]
    S = np.eye(n) - 1j * np.pi * pmag ** (d - 2) * A
    return SMatrixBlock.from_values(S, basis.kmax, None, basis.indices, meta=dict(d=d, pmag=float(pmag)))


# --------------------------------------------------------------------------
# weak asymptotics


def _cheb_fit(f, a, b, deg=48, tol=1e-10):
    """Chebyshev interpolant of a complex function on ``[a, b]``, checked at midpoints."""
    while True:
        k = np.arange(deg + 1)
        t = np.cos(np.pi * (k + 0.5) / (deg + 1))
        vals = np.array([f(a + (b - a) * (tt + 1) / 2) for tt in t])
        cr = C.chebfit(t, vals.real, deg)
        ci = C.chebfit(t, vals.imag, deg)
        tm = np.cos(np.pi * (k[:-1] + 1.0) / (deg + 1))
        check = np.array([f(a + (b - a) * (tt + 1) / 2) for tt in tm[::4]])
        approx = C.chebval(tm[::4], cr) + 1j * C.chebval(tm[::4], ci)
        scale = max(np.max(np.abs(vals)), 1e-300)
        if np.max(np.abs(check - approx)) <= tol * scale or deg >= 192:
            return lambda R: C.chebval(2 * (np.asarray(R) - a) / (b - a) - 1, cr) + 1j * C.chebval(
                2 * (np.asarray(R) - a) / (b - a) - 1, ci
            )
        deg *= 2


@dataclass
class WeakAsymptoticsReport:
    xgrid: np.ndarray
    direct: np.ndarray
    asymptotic: np.ndarray
    deviation: np.ndarray
    slope: float
    incoming: complex
    incoming_expected: complex
    incoming_error: float
    S_of_G: complex

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.deviation) < 0))


def default_xgrid(pmag: float, xmax: float = 120.0, xmin: float = 30.0, periods: int = 2) -> np.ndarray:
    """Radii spaced by whole periods ``2 pi m / |P|`` ending at ``xmax``.

    Sampling at a fixed phase of ``exp(i |P| |X|)`` turns the oscillating
    subleading corrections into a smooth envelope.
    """
    step = 2 * np.pi * periods / pmag
    k = int(np.floor((xmax - xmin) / step))
    return xmax - step * np.arange(k, -1, -1)


def weak_asymptotics_check(
    T: TKernel,
    P,
    G: Callable,
    xgrid=None,
    direction=None,
    fpm_level: int = 6,
    rmax: float | None = None,
    window=(400.0, 2),
) -> WeakAsymptoticsReport:
    """Compare the integral representation of ``Psi(|X|, P; G)`` with its weak asymptotics.

    Direct: ``J_exact`` for the free term and ``-(I^- - I^+)`` with
    ``F^+-(R) = F_pm(T, P, R, G, +-)`` interpolated in ``R`` and integrated
    by ``radial_pole_integral`` in exact mode.  Asymptotic:
    ``N_d [Q^- G(-P^) - Q^+ S(P^; G)]`` with ``S = G(P^) - i pi P^{d-2} F^+(P)``.
    The incoming coefficient is ``x^{d-1} conj(Q^-) Psi`` averaged over
    ``window = (x0, periods)`` at 16 samples per period, divided by ``N_d``.

    ``direction`` fixes the unit vector ``X^`` used for ``|X|``; by default
    it is irrelevant because ``Psi(|X|, P; G)`` is already an angular average.
    """
    P = np.asarray(P, dtype=float)
    d = P.size
    pm = float(np.linalg.norm(P))
    if pm <= 0:
        raise DomainError("|P| must be positive")
    if not (T.tags <= {SMOOTH}):
        raise DomainError("weak_asymptotics_check needs a smooth kernel")
    xgrid = default_xgrid(pm) if xgrid is None else np.asarray(xgrid, dtype=float)
    e = np.zeros(d)
    e[0] = 1.0
    if direction is not None:
        e = np.asarray(direction, dtype=float) / np.linalg.norm(direction)
    wv = SphericalWaveFactors(d, pm)
    opts = FpmOptions(level=fpm_level, estimate_error=False)

    def fpm(R, s):
        return F_pm(T, P, float(R), G, s, opts).value if R > 0 else 0j

    if rmax is None:
        # first radius beyond 2|P| where both F^+- are negligible against F^+(|P|)
        ref = abs(fpm(pm, +1)) + abs(fpm(pm, -1)) + 1e-300
        rmax = 2 * pm + 1
        while rmax < 4 * pm + 12:
            tail = (abs(fpm(rmax, +1)) + abs(fpm(rmax, -1))) * rmax ** ((d - 1) / 2)
            if tail < 1e-14 * ref:
                break
            rmax += 1.0

    Fp = _cheb_fit(lambda R: fpm(R, +1), 0.0, rmax)
    Fm = _cheb_fit(lambda R: fpm(R, -1), 0.0, rmax)
    Fp_on = fpm(pm, +1)
    S_G = complex(G(P[None, :] / pm)[0]) - 1j * np.pi * pm ** (d - 2) * Fp_on
    G_in = complex(G(-P[None, :] / pm)[0])

    def direct(x):
        free = J_exact(x * e, P, G).value
        ip = radial_pole_integral(Fp, pm, x, d, +1, rmax=rmax).value
        im = radial_pole_integral(Fm, pm, x, d, -1, rmax=rmax).value
        return free - (im - ip)

    def asym(x):
        return wv.N * (wv.Q_minus(x) * G_in - wv.Q_plus(x) * S_G)

    dvals = np.array([direct(x) for x in xgrid])
    avals = np.array([asym(x) for x in xgrid])
    dev = np.abs(dvals - avals) / np.abs(avals)
    slope = float(np.polyfit(np.log(xgrid), np.log(dev), 1)[0]) if len(xgrid) > 1 else float("nan")
    x0, periods = window
    xs = x0 + np.arange(16 * periods) * (np.pi / pm) / 16 * 2
    proj = np.mean([x ** (d - 1) * np.conj(wv.Q_minus(x)) * direct(x) for x in xs])
    incoming = complex(proj / wv.N)
    err = abs(incoming - G_in) / abs(G_in)
    return WeakAsymptoticsReport(xgrid, dvals, avals, dev, slope, incoming, G_in, float(err), S_G)


def lemma2_deviation(P, G, xgrid) -> np.ndarray:
    """Relative deviation of ``J_exact`` from ``J_asymptotic`` on ``xgrid`` (free case)."""
    P = np.asarray(P, dtype=float)
    e = np.zeros(P.size)
    e[0] = 1.0
    out = []
    for x in xgrid:
        a = J_asymptotic(x, P, G)
        out.append(abs(J_exact(x * e, P, G).value - a) / abs(a))
    return np.array(out)


__all__ = [
    "ChannelBasis",
    "FunctionPotential",
    "HarmonicIndex",
    "HypercentralPotential",
    "PairwisePotential",
    "RadialSolution",
    "SMatrixBlock",
    "WeakAsymptoticsReport",
    "channel_basis",
    "default_xgrid",
    "free_waves",
    "gaussian_hypercentral",
    "gaussian_pair",
    "match_extract_S",
    "potential_matrix",
    "s_from_tkernel",
    "smatrix",
    "solve_coupled",
    "weak_asymptotics_check",
]
