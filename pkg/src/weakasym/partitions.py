"""Cluster partitions of {1..N}, the refinement order and partition chains.

A partition ``a_k`` splits the particles into ``k`` clusters.  We write
``refines(a, b)`` for ``a ⊂ b``: every cluster of ``a`` lies inside a
cluster of ``b`` (``a`` is finer, so it has at least as many blocks).

A chain ``(a_{N-1}, ..., a_2)`` is a maximal sequence in which each
partition is obtained from the previous one by merging two clusters.  The
trivial endpoints (all singletons, one cluster) are implied and never
stored as links.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from math import factorial
from typing import Iterator

from .errors import DomainError

MAX_PARTITION_N = 8
MAX_CHAIN_N = 7


@dataclass(frozen=True, order=True)
class Partition:
    """Canonical set partition of ``{1..n}``.

    Blocks are sorted tuples, ordered by their smallest element, so two
    partitions compare equal iff they are the same set partition.
    """

    blocks: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        canon = tuple(sorted((tuple(sorted(b)) for b in self.blocks), key=lambda b: b[0] if b else 0))
        if any(len(b) == 0 for b in canon):
            raise DomainError("partition blocks must be nonempty")
        flat = [i for b in canon for i in b]
        if sorted(flat) != list(range(1, len(flat) + 1)):
            raise DomainError(f"blocks {self.blocks} do not partition 1..{len(flat)}")
        object.__setattr__(self, "blocks", canon)

    @classmethod
    def from_blocks(cls, *blocks) -> "Partition":
        return cls(tuple(tuple(b) for b in blocks))

    @property
    def n(self) -> int:
        return sum(len(b) for b in self.blocks)

    @property
    def k(self) -> int:
        return len(self.blocks)

    def block_of(self, i: int) -> tuple[int, ...]:
        for b in self.blocks:
            if i in b:
                return b
        raise DomainError(f"particle {i} not in partition")

    def merge(self, i: int, j: int) -> "Partition":
        """Partition obtained by joining blocks ``i`` and ``j`` (block indices)."""
        if i == j:
            raise DomainError("cannot merge a block with itself")
        rest = [b for m, b in enumerate(self.blocks) if m not in (i, j)]
        return Partition(tuple(rest) + (self.blocks[i] + self.blocks[j],))

    def __str__(self) -> str:
        return "".join("(" + "".join(map(str, b)) + ")" for b in self.blocks)

    @classmethod
    def parse(cls, text: str) -> "Partition":
        """Parse ``"(12)(3)"`` or ``"12|3"`` notation (single-digit labels)."""
        text = text.strip()
        if "|" in text:
            parts = text.split("|")
        else:
            parts = [p for p in text.replace(")", "").split("(") if p]
        try:
            blocks = tuple(tuple(int(c) for c in p.replace(",", "").strip()) for p in parts)
        except ValueError as exc:
            raise DomainError(f"cannot parse partition {text!r}") from exc
        return cls(blocks)


@dataclass(frozen=True)
class PartitionChain:
    """Chain ``(a_{N-1}, ..., a_2)``; empty for ``N = 2``."""

    n: int
    links: tuple[Partition, ...]

    def __post_init__(self):
        if self.n < 2:
            raise DomainError("chains need N >= 2")
        if len(self.links) != self.n - 2:
            raise DomainError(f"chain for N={self.n} needs {self.n - 2} links")
        full = self.full()
        for finer, coarser in zip(full, full[1:]):
            if finer.n != self.n:
                raise DomainError("chain link over wrong particle count")
            if coarser.k != finer.k - 1 or not refines(finer, coarser):
                raise DomainError(f"{finer} -> {coarser} is not a single merge")

    def full(self) -> tuple[Partition, ...]:
        """Chain with the trivial endpoints: ``(a_N, a_{N-1}, ..., a_2, a_1)``."""
        return (singletons(self.n),) + self.links + (trivial(self.n),)

    def merge_steps(self):
        """For l = N..2 yield ``(l, omega_{l-1}, omega_l)``.

        ``omega_{l-1}, omega_l`` are the two clusters of ``a_l`` merged on the way
        to ``a_{l-1}``, ordered by smallest particle label.
        """
        full = self.full()
        for finer, coarser in zip(full, full[1:]):
            merged = [b for b in finer.blocks if b not in coarser.blocks]
            first, second = sorted(merged, key=lambda b: b[0])
            yield finer.k, first, second

    def __str__(self) -> str:
        return " > ".join(str(p) for p in self.links) if self.links else "(empty)"

    @classmethod
    def parse(cls, n: int, text: str) -> "PartitionChain":
        """Parse links separated by ``>`` or ``;``, e.g. ``"(12)(3)(4) > (12)(34)"``."""
        text = text.strip()
        if not text or text == "(empty)":
            return cls(n, ())
        sep = ">" if ">" in text else ";"
        return cls(n, tuple(Partition.parse(p) for p in text.split(sep)))


def singletons(n: int) -> Partition:
    return Partition(tuple((i,) for i in range(1, n + 1)))


def trivial(n: int) -> Partition:
    return Partition((tuple(range(1, n + 1)),))


def _restricted_growth(n: int) -> Iterator[list[int]]:
    a = [0] * n

    def rec(i, m):
        if i == n:
            yield a
            return
        for v in range(m + 2):
            a[i] = v
            yield from rec(i + 1, max(m, v))

    if n == 0:
        return
    a[0] = 0
    yield from rec(1, 0)


def enumerate_partitions(n: int, k: int) -> list[Partition]:
    """All partitions of ``{1..n}`` into exactly ``k`` blocks."""
    if not (1 <= n <= MAX_PARTITION_N) or not (1 <= k <= n):
        raise DomainError(f"need 1 <= k <= N <= {MAX_PARTITION_N}, got N={n}, k={k}")
    out = []
    for rgs in _restricted_growth(n):
        if max(rgs) + 1 != k:
            continue
        blocks = [[] for _ in range(k)]
        for i, b in enumerate(rgs, start=1):
            blocks[b].append(i)
        out.append(Partition(tuple(tuple(b) for b in blocks)))
    return sorted(out)


def refines(a: Partition, b: Partition) -> bool:
    """True iff ``a ⊂ b``: each block of ``a`` sits inside a block of ``b``."""
    if a.n != b.n:
        raise DomainError(f"partitions over different N ({a.n} vs {b.n})")
    return all(any(set(x) <= set(y) for y in b.blocks) for x in a.blocks)


def chain_count(n: int) -> int:
    """Closed form ``2^{1-N} N! (N-1)!``."""
    return factorial(n) * factorial(n - 1) // 2 ** (n - 1)


def enumerate_chains(n: int) -> list[PartitionChain]:
    """All chains ``(a_{N-1}, ..., a_2)`` by successive pair merges."""
    if not (2 <= n <= MAX_CHAIN_N):
        raise DomainError(f"chain enumeration supports 2 <= N <= {MAX_CHAIN_N}, got {n}")
    paths = [()]
    current = [singletons(n)]
    for _ in range(n - 2):
        new_paths, new_current = [], []
        for path, part in zip(paths, current):
            for i in range(part.k):
                for j in range(i + 1, part.k):
                    nxt = part.merge(i, j)
                    new_paths.append(path + (nxt,))
                    new_current.append(nxt)
        paths, current = new_paths, new_current
    return [PartitionChain(n, p) for p in paths]


@dataclass(frozen=True, order=True)
class Term:
    """Label of one operator in a formal sum: ``T_a`` or ``T^c_a``."""

    partition: Partition
    connected: bool

    def __str__(self) -> str:
        return ("Tc" if self.connected else "T") + f"[{self.partition}]"


FormalSum = Counter


def _finer_nontrivial(a: Partition) -> list[Partition]:
    """Partitions ``a_i ⊂ a`` with ``a.k < i <= N-1``."""
    n = a.n
    out = []
    for i in range(a.k + 1, n):
        out.extend(p for p in enumerate_partitions(n, i) if refines(p, a))
    return out


def connected_part_expansion(a: Partition) -> FormalSum:
    """``T_a`` written as a sum of connected parts of ``a`` and all its refinements."""
    n = a.n
    if not (1 <= a.k <= n - 1):
        raise DomainError("connected_part_expansion needs 1 <= l <= N-1")
    out = FormalSum({Term(a, True): 1})
    for p in _finer_nontrivial(a):
        out[Term(p, True)] += 1
    return out


def connected_part(a: Partition, _cache=None) -> FormalSum:
    """``T^c_a`` as an integer combination of plain ``T`` operators.

    Unrolls ``T^c_a = T_a - sum_{a_i ⊂ a, i > l} T^c_{a_i}`` down to ``a_{N-1}``,
    where ``T^c = T``.
    """
    cache = {} if _cache is None else _cache
    if a in cache:
        return cache[a]
    out = FormalSum({Term(a, False): 1})
    if a.k < a.n - 1:
        for p in _finer_nontrivial(a):
            for term, c in connected_part(p, cache).items():
                out[term] -= c
    out = FormalSum({t: c for t, c in out.items() if c != 0})
    cache[a] = out
    return out


def substitute(expansion: FormalSum) -> FormalSum:
    """Replace each connected label by its plain-``T`` combination and collect."""
    cache: dict = {}
    out = FormalSum()
    for term, c in expansion.items():
        if term.connected:
            for t2, c2 in connected_part(term.partition, cache).items():
                out[t2] += c * c2
        else:
            out[term] += c
    return FormalSum({t: c for t, c in out.items() if c != 0})
