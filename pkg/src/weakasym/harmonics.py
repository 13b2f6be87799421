"""Hyperspherical harmonics on a binary coordinate tree, and sphere quadrature.

The unit sphere in R^d is parametrized by a binary tree.  A leaf is a
0-sphere (one coordinate, points +-1) or a circle (two coordinates, angle
phi).  An inner node joins two subtrees of dimensions d1, d2 through a
hyperangle alpha in [0, pi/2]: the first subtree gets radius cos(alpha),
the second sin(alpha), and the measure picks up
cos^{d1-1}(alpha) sin^{d2-1}(alpha) dalpha.

Harmonics on a node are

    Y = c * cos^{K1}(a) sin^{K2}(a) P_n^{(K2 + d2/2 - 1, K1 + d1/2 - 1)}(cos 2a) Y1 Y2

with total degree K = K1 + K2 + 2n.  All functions are real and
orthonormal on the sphere.

For d = 3(N-1) the canonical tree follows the Jacobi layout of
:mod:`weakasym.jacobi`: each 3-vector is an S^2 subtree, and the top node
pairs the internal vectors (cos side) with the external vector 0 (sin
side), so its hyperangle obeys |k| = |X| cos(alpha), |p| = |X| sin(alpha).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import gamma, pi

import numpy as np
from scipy.special import eval_jacobi, gammaln, roots_jacobi

from .errors import DomainError

MIN_QUAD_D, MAX_QUAD_D = 3, 9


def sphere_area(d: int) -> float:
    """Area of S^{d-1} in R^d."""
    return 2.0 * pi ** (d / 2) / gamma(d / 2)


@dataclass(frozen=True)
class HarmonicIndex:
    """Degree ``K`` plus the nested tree label (see module docstring)."""

    K: int
    label: tuple

    @property
    def subindices(self) -> list[int]:
        """Flat integer list: the label read depth-first down the tree."""
        out = []

        def walk(lab):
            for item in lab:
                if isinstance(item, tuple):
                    walk(item)
                else:
                    out.append(int(item))

        walk(self.label)
        return out

    def __str__(self):
        return f"K={self.K}:{self.label}"


def harmonic_count(d: int, K: int) -> int:
    """Dimension of degree-K harmonics on S^{d-1}."""
    if K < 0:
        return 0
    if d == 1:
        return 1 if K <= 1 else 0
    if d == 2:
        return 1 if K == 0 else 2
    from math import comb

    return comb(K + d - 1, d - 1) - comb(K + d - 3, d - 1) if K >= 2 else comb(K + d - 1, d - 1)


def _safe_unit(x, r):
    out = np.zeros_like(x)
    ok = r > 0
    out[ok] = x[ok] / r[ok, None]
    out[~ok, 0] = 1.0
    return out


class Leaf1:
    """The 0-sphere {+1, -1} on one coordinate."""

    dim = 1

    def __init__(self, coord: int):
        self.coords = (coord,)

    def labels(self, kmax):
        return [(k,) for k in range(min(kmax, 1) + 1)]

    def evaluate(self, labels, u):
        s = np.where(u[:, 0] >= 0, 1.0, -1.0)
        cols = [np.full(len(u), 1 / np.sqrt(2)) if lab[0] == 0 else s / np.sqrt(2) for lab in labels]
        return np.stack(cols, axis=1) if cols else np.zeros((len(u), 0))

    def rule(self, degree):
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])

    def angles(self, u):
        return [("sign", float(np.sign(u[0]) or 1.0))]


class Leaf2:
    """The circle on two coordinates, harmonics cos(K phi), sin(K phi)."""

    dim = 2

    def __init__(self, c0: int, c1: int):
        self.coords = (c0, c1)

    def labels(self, kmax):
        out = [(0, 1)]
        for k in range(1, kmax + 1):
            out += [(k, 1), (k, -1)]
        return out

    def evaluate(self, labels, u):
        phi = np.arctan2(u[:, 1], u[:, 0])
        cols = []
        for k, c in labels:
            if k == 0:
                cols.append(np.full(len(u), 1 / np.sqrt(2 * pi)))
            elif c > 0:
                cols.append(np.cos(k * phi) / np.sqrt(pi))
            else:
                cols.append(np.sin(k * phi) / np.sqrt(pi))
        return np.stack(cols, axis=1) if cols else np.zeros((len(u), 0))

    def rule(self, degree):
        m = degree + 1
        phi = 2 * pi * (np.arange(m) + 0.5) / m
        return np.stack([np.cos(phi), np.sin(phi)], axis=1), np.full(m, 2 * pi / m)

    def angles(self, u):
        return [("phi", float(np.arctan2(u[1], u[0])))]


def _jacobi_norm_sq(n, a, b):
    """``int_{-1}^1 (1-t)^a (1+t)^b P_n^{(a,b)}(t)^2 dt``."""
    if n == 0:
        return float(np.exp((a + b + 1) * np.log(2) + gammaln(a + 1) + gammaln(b + 1) - gammaln(a + b + 2)))
    return float(
        np.exp(
            (a + b + 1) * np.log(2)
            + gammaln(n + a + 1)
            + gammaln(n + b + 1)
            - gammaln(n + a + b + 1)
            - gammaln(n + 1)
        )
        / (2 * n + a + b + 1)
    )


class Node:
    """Join of two subtrees through one hyperangle (first subtree on the cos side)."""

    def __init__(self, first, second):
        self.first, self.second = first, second
        self.dim = first.dim + second.dim
        self.coords = tuple(first.coords) + tuple(second.coords)
        if first.dim == 1 and second.dim == 1:
            raise DomainError("use a circle leaf for two coordinates")

    def _params(self, k1, k2):
        d1, d2 = self.first.dim, self.second.dim
        return k2 + d2 / 2 - 1, k1 + d1 / 2 - 1

    def radial_norm(self, n, k1, k2):
        """Normalization constant ``c`` of the hyperangle factor."""
        a, b = self._params(k1, k2)
        d1, d2 = self.first.dim, self.second.dim
        integral = 2.0 ** (-(d1 + d2) / 2 - k1 - k2) * _jacobi_norm_sq(n, a, b)
        return 1.0 / np.sqrt(integral)

    def labels(self, kmax):
        l1 = self.first.labels(kmax)
        l2 = self.second.labels(kmax)
        out = []
        for a in l1:
            for b in l2:
                k1, k2 = a[0], b[0]
                for n in range((kmax - k1 - k2) // 2 + 1):
                    out.append((k1 + k2 + 2 * n, n, a, b))
        return out

    def evaluate(self, labels, u):
        u1 = u[:, : self.first.dim]
        u2 = u[:, self.first.dim:]
        r1 = np.linalg.norm(u1, axis=1)
        r2 = np.linalg.norm(u2, axis=1)
        sub1 = sorted({lab[2] for lab in labels})
        sub2 = sorted({lab[3] for lab in labels})
        y1 = self.first.evaluate(sub1, _safe_unit(u1, r1)) if sub1 else None
        y2 = self.second.evaluate(sub2, _safe_unit(u2, r2)) if sub2 else None
        i1 = {lab: i for i, lab in enumerate(sub1)}
        i2 = {lab: i for i, lab in enumerate(sub2)}
        t = r1 * r1 - r2 * r2
        cache = {}
        cols = []
        for K, n, a, b in labels:
            k1, k2 = a[0], b[0]
            key = (n, k1, k2)
            if key not in cache:
                pa, pb = self._params(k1, k2)
                cache[key] = self.radial_norm(n, k1, k2) * r1**k1 * r2**k2 * eval_jacobi(n, pa, pb, t)
            cols.append(cache[key] * y1[:, i1[a]] * y2[:, i2[b]])
        return np.stack(cols, axis=1) if cols else np.zeros((len(u), 0))

    def hyperangle_rule(self, degree):
        """Gauss-Jacobi nodes in ``t = cos 2 alpha`` with the measure weights."""
        d1, d2 = self.first.dim, self.second.dim
        nt = degree // 4 + 1
        t, w = roots_jacobi(nt, (d2 - 2) / 2, (d1 - 2) / 2)
        return t, w * 2.0 ** (-(d1 + d2) / 2)

    def rule(self, degree):
        x1, w1 = self.first.rule(degree)
        x2, w2 = self.second.rule(degree)
        t, wt = self.hyperangle_rule(degree)
        c = np.sqrt((1 + t) / 2)
        s = np.sqrt((1 - t) / 2)
        n1, n2, nt = len(w1), len(w2), len(t)
        pts = np.empty((nt, n1, n2, self.dim))
        pts[..., : self.first.dim] = c[:, None, None, None] * x1[None, :, None, :]
        pts[..., self.first.dim:] = s[:, None, None, None] * x2[None, None, :, :]
        wts = wt[:, None, None] * w1[None, :, None] * w2[None, None, :]
        return pts.reshape(-1, self.dim), wts.reshape(-1)

    def angles(self, u):
        u1, u2 = u[: self.first.dim], u[self.first.dim:]
        r1, r2 = np.linalg.norm(u1), np.linalg.norm(u2)
        out = [("alpha", float(np.arctan2(r2, r1)))]
        out += self.first.angles(u1 / r1 if r1 > 0 else np.eye(len(u1))[0])
        out += self.second.angles(u2 / r2 if r2 > 0 else np.eye(len(u2))[0])
        return out


class Tree:
    """A coordinate tree acting on full d-vectors (handles coordinate order)."""

    def __init__(self, root):
        self.root = root
        self.d = root.dim
        self.perm = np.array(root.coords)
        if sorted(self.perm.tolist()) != list(range(self.d)):
            raise DomainError("tree coordinates must cover 0..d-1 once")
        self.inv = np.argsort(self.perm)

    def labels(self, kmax):
        labs = self.root.labels(kmax)
        labs = [lab for lab in labs if lab[0] <= kmax]
        return sorted(labs, key=lambda lab: (lab[0], repr(lab)))

    def basis(self, kmax) -> list[HarmonicIndex]:
        return [HarmonicIndex(lab[0], lab) for lab in self.labels(kmax)]

    def evaluate(self, indices, points) -> np.ndarray:
        """Matrix ``Y[i, j] = Y_j(points[i])`` for unit ``points`` of shape ``(n, d)``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[1] != self.d:
            raise DomainError(f"points must have dimension {self.d}")
        labels = [ix.label if isinstance(ix, HarmonicIndex) else ix for ix in indices]
        return self.root.evaluate(labels, pts[:, self.perm])

    def quadrature(self, level: int) -> "SphereQuadrature":
        x, w = self.root.rule(2 * level)
        return SphereQuadrature(self.d, level, x[:, self.inv], w)

    def angles(self, u):
        u = np.asarray(u, dtype=float)
        return self.root.angles(u[self.perm])


def _leaf_for(dim, offset):
    if dim == 1:
        return Leaf1(offset)
    if dim == 2:
        return Leaf2(offset, offset + 1)
    if dim == 3:
        return Node(Leaf2(offset, offset + 1), Leaf1(offset + 2))
    raise DomainError(dim)


def _jacobi_root(q):
    root = _leaf_for(3, 3 * (q - 1))
    for j in range(q - 2, -1, -1):
        root = Node(root, _leaf_for(3, 3 * j))
    return root


@lru_cache(maxsize=None)
def canonical_tree(d: int) -> Tree:
    """The canonical tree in ``d`` dimensions (Jacobi layout when ``3 | d``)."""
    if d < 1:
        raise DomainError("dimension must be positive")
    if d <= 3:
        return Tree(_leaf_for(d, 0))
    q, r = divmod(d, 3)
    if r == 0:
        return Tree(_jacobi_root(q))
    return Tree(Node(_jacobi_root(q), _leaf_for(r, 3 * q)))


@dataclass(frozen=True)
class SphereQuadrature:
    """Product rule on S^{d-1}, exact for polynomials of degree <= ``2*level``."""

    d: int
    level: int
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def degree(self) -> int:
        return 2 * self.level

    def __len__(self):
        return len(self.weights)

    def integrate(self, values):
        """Integrate samples ``values[i, ...]`` taken at ``nodes[i]``."""
        return np.tensordot(self.weights, values, axes=(0, 0))

    def rotated(self, rot) -> "SphereQuadrature":
        """Same rule with nodes mapped by an orthogonal matrix."""
        return SphereQuadrature(self.d, self.level, self.nodes @ np.asarray(rot).T, self.weights)


def build_quadrature(d: int, level: int) -> SphereQuadrature:
    if not (MIN_QUAD_D <= d <= MAX_QUAD_D):
        raise DomainError(f"quadrature supports d in {MIN_QUAD_D}..{MAX_QUAD_D}")
    if level < 1:
        raise DomainError("level must be >= 1")
    return canonical_tree(d).quadrature(level)


def basis(d: int, kmax: int) -> list[HarmonicIndex]:
    """All canonical harmonics with ``K <= kmax``."""
    if kmax < 0:
        raise DomainError("kmax must be nonnegative")
    return canonical_tree(d).basis(kmax)


def evaluate_harmonic(idx: HarmonicIndex, xhat) -> np.ndarray:
    """Value of ``Y_idx`` at unit vector(s) ``xhat``; scalar for a single point."""
    x = np.asarray(xhat, dtype=float)
    single = x.ndim == 1
    tree = canonical_tree(x.shape[-1])
    if idx.label not in set(tree.root.labels(idx.K)):
        raise DomainError(f"{idx} is not an admissible index in d={x.shape[-1]}")
    vals = tree.evaluate([idx], np.atleast_2d(x))[:, 0]
    return vals[0] if single else vals


def project(f, indices, quad: SphereQuadrature) -> np.ndarray:
    """Coefficients ``<Y_j, f>`` for ``f`` evaluated on an ``(n, d)`` array of nodes."""
    tree = canonical_tree(quad.d)
    y = tree.evaluate(indices, quad.nodes)
    fv = np.asarray(f(quad.nodes))
    return (quad.weights[:, None] * y).T @ fv


def gram_matrix(indices, quad: SphereQuadrature) -> np.ndarray:
    y = canonical_tree(quad.d).evaluate(indices, quad.nodes)
    return (quad.weights[:, None] * y).T @ y


def laplace_beltrami_fd(f, xhat, h=1e-3):
    """Finite-difference Laplace-Beltrami of ``f`` at a unit point.

    Uses the degree-0 homogeneous extension, whose flat Laplacian at
    ``|x| = 1`` equals the spherical one.
    """
    x0 = np.asarray(xhat, dtype=float)

    def g(x):
        return f(x / np.linalg.norm(x))

    f0 = g(x0)
    acc = 0.0
    for i in range(x0.size):
        e = np.zeros_like(x0)
        e[i] = h
        acc += g(x0 + e) - 2 * f0 + g(x0 - e)
    return acc / h**2
