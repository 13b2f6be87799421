"""Mass-weighted Jacobi coordinates and hyperspherical variables.

Normalization: each Jacobi vector carries the factor ``sqrt(2 mu)`` with
``mu`` the reduced mass of the two merged clusters,

    x = sqrt(2 M1 M2 / (M1 + M2)) (R_1 - R_2),

so the relative kinetic energy is ``-Laplacian(X)`` with no mass factors.
Many texts use ``sqrt(mu)`` instead; results here differ from those by
``sqrt(2)`` per vector.

Layout of a point ``X`` in ``R^d``, ``d = 3(N-1)``: vector-major,
``X[3j:3j+3]`` is the vector created by the merge ``a_{j+2} -> a_{j+1}``.
Vector 0 joins the last two clusters (the most external one); vector
``N-2`` joins the first pair.  For a partition ``a_l`` on the chain the
external vectors ``y_{a_l}`` are ``0..l-2`` and the internal ``x_{a_l}``
are ``l-1..N-2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneratePointError, DomainError, SingularConfigurationError
from .partitions import PartitionChain


@dataclass(frozen=True)
class MassSet:
    masses: tuple[float, ...]

    def __post_init__(self):
        m = tuple(float(x) for x in self.masses)
        if len(m) < 2:
            raise DomainError("need at least two masses")
        if any(not np.isfinite(x) or x <= 0 for x in m):
            raise DomainError("masses must be positive and finite")
        object.__setattr__(self, "masses", m)

    @property
    def n(self) -> int:
        return len(self.masses)

    def cluster_mass(self, block) -> float:
        return sum(self.masses[i - 1] for i in block)


@dataclass(frozen=True)
class JacobiSystem:
    """Jacobi map for one chain.

    ``coeffs`` is the ``(N-1) x N`` matrix acting identically on each
    Cartesian component: vector ``j`` is ``sum_i coeffs[j, i] r_i``.
    """

    masses: MassSet
    chain: PartitionChain
    coeffs: np.ndarray = field(repr=False)
    pairs: tuple = field(repr=False)

    @property
    def n(self) -> int:
        return self.masses.n

    @property
    def d(self) -> int:
        return 3 * (self.n - 1)

    @property
    def matrix(self) -> np.ndarray:
        """Full ``d x 3N`` map from stacked particle positions to ``X``."""
        return np.kron(self.coeffs, np.eye(3))

    def apply(self, r) -> np.ndarray:
        """Map particle positions ``r`` of shape ``(..., N, 3)`` to ``X`` of shape ``(..., d)``."""
        r = np.asarray(r, dtype=float)
        x = np.einsum("ji,...ic->...jc", self.coeffs, r)
        return x.reshape(r.shape[:-2] + (self.d,))

    def groups(self, l: int) -> tuple[slice, slice]:
        """Coordinate slices ``(internal x_{a_l}, external y_{a_l})``."""
        if not (2 <= l <= self.n - 1):
            raise DomainError(f"l must be in 2..{self.n - 1}")
        return slice(3 * (l - 1), self.d), slice(0, 3 * (l - 1))


def build_jacobi(masses: MassSet, chain: PartitionChain) -> JacobiSystem:
    if not isinstance(masses, MassSet):
        masses = MassSet(tuple(masses))
    if chain.n != masses.n:
        raise DomainError(f"chain over N={chain.n} but {masses.n} masses")
    n = masses.n
    coeffs = np.zeros((n - 1, n))
    pairs = []
    for l, w1, w2 in chain.merge_steps():
        m1, m2 = masses.cluster_mass(w1), masses.cluster_mass(w2)
        scale = np.sqrt(2.0 * m1 * m2 / (m1 + m2))
        row = l - 2
        for i in w1:
            coeffs[row, i - 1] += scale * masses.masses[i - 1] / m1
        for i in w2:
            coeffs[row, i - 1] -= scale * masses.masses[i - 1] / m2
        pairs.append((row, w1, w2))
    return JacobiSystem(masses, chain, coeffs, tuple(sorted(pairs)))


def kinetic_form(system: JacobiSystem, r) -> np.ndarray:
    """``|X|^2``; equals ``(2/M) sum_{i<j} m_i m_j |r_i - r_j|^2`` for every chain."""
    x = system.apply(r)
    return np.sum(x * x, axis=-1)


def chain_rotation_small(src: JacobiSystem, dst: JacobiSystem) -> np.ndarray:
    """``(N-1) x (N-1)`` orthogonal matrix mixing Jacobi vectors, ``X_dst = R X_src``."""
    if src.masses != dst.masses:
        raise DomainError("chain rotation needs identical masses")
    minv = np.diag(1.0 / np.asarray(src.masses.masses))
    # rows of each coefficient matrix are orthogonal in the inverse-mass metric with norm^2 = 2
    return dst.coeffs @ minv @ src.coeffs.T / 2.0


def chain_rotation(src: JacobiSystem, dst: JacobiSystem) -> np.ndarray:
    """``d x d`` orthogonal map with ``dst.apply(r) = R @ src.apply(r)``."""
    return np.kron(chain_rotation_small(src, dst), np.eye(3))


def three_body_coefficients(src: JacobiSystem, dst: JacobiSystem) -> tuple[float, float]:
    """``(c, s)`` with ``k_dst = c k_src + s p_src``, ``p_dst = -s k_src + c p_src``.

    ``k`` is the internal (pair) vector and ``p`` the external one.  When the
    canonical orderings make the map a reflection, ``p_dst`` is read with the
    opposite sign (a pure gauge choice, see :func:`p_gauge_sign`) so that the
    map has the rotation form above.
    """
    if src.n != 3:
        raise DomainError("rotation coefficients are defined for N=3")
    r = chain_rotation_small(src, dst)
    # vector order is (p, k)
    c, s = r[1, 1], r[1, 0]
    return float(c), float(s)


def p_gauge_sign(src: JacobiSystem, dst: JacobiSystem) -> float:
    """``-1`` when :func:`three_body_coefficients` reads ``p_dst`` flipped, else ``+1``."""
    return float(np.sign(np.linalg.det(chain_rotation_small(src, dst))))


def momentum_exchange_point(p_b, p_a, c: float, s: float) -> np.ndarray:
    """``k_a(p_b, p_a) = -p_b / s + (c / s) p_a``."""
    if s == 0:
        raise SingularConfigurationError("s_ba = 0: momentum exchange point undefined")
    return -np.asarray(p_b, dtype=float) / s + (c / s) * np.asarray(p_a, dtype=float)


@dataclass(frozen=True)
class HypersphericalState:
    rho: float
    direction: np.ndarray

    def __post_init__(self):
        if self.rho < 0:
            raise DomainError("rho must be nonnegative")
        u = np.asarray(self.direction, dtype=float)
        if abs(np.linalg.norm(u) - 1.0) > 1e-12:
            raise DomainError("direction must be a unit vector")
        object.__setattr__(self, "direction", u)

    @property
    def d(self) -> int:
        return self.direction.size

    def hyperangle(self, split: int | None = None) -> float:
        """``alpha`` with ``|k| = rho cos(alpha)``, ``|p| = rho sin(alpha)``.

        ``k`` is the trailing ``split`` coordinates (internal vectors),
        ``p`` the leading rest.  Default split is the last Jacobi vector.
        """
        split = 3 if split is None else split
        k = np.linalg.norm(self.direction[self.d - split:])
        p = np.linalg.norm(self.direction[: self.d - split])
        return float(np.arctan2(p, k))

    def polyspherical_angles(self):
        """Angles of the canonical coordinate tree (see :mod:`weakasym.harmonics`)."""
        from .harmonics import canonical_tree

        return canonical_tree(self.d).angles(self.direction)


def to_hyperspherical(x) -> HypersphericalState:
    x = np.asarray(x, dtype=float)
    rho = float(np.linalg.norm(x))
    if rho == 0.0:
        raise DegeneratePointError("X = 0 has no direction")
    u = x / rho
    u /= np.linalg.norm(u)
    return HypersphericalState(rho, u)


def from_hyperspherical(state: HypersphericalState) -> np.ndarray:
    return state.rho * state.direction


def from_hyperangle(rho: float, alpha: float, khat, phat) -> np.ndarray:
    """Inverse of the ``(k, p)`` split in layout ``(p, k)``."""
    return np.concatenate([rho * np.sin(alpha) * np.asarray(phat), rho * np.cos(alpha) * np.asarray(khat)])
