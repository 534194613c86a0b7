"""Rooted recursive trees stored as parent sequences.

A tree on n+1 vertices is encoded by its parent array: vertex 0 is the
root (parent -1) and parent[i] < i for every i >= 1, so the labels form
a recursive (increasing) labeling.  Children adjacency is kept in CSR
form so trees with 10^6 vertices stay cheap.
"""

from __future__ import annotations

import itertools
from typing import Iterator

import numpy as np

from . import _kernels

ENUMERATION_CAP = 9  # n! parent sequences; 9! = 362880 is the practical limit


class Tree:
    """Immutable rooted tree given by a recursive parent sequence.

    Children adjacency and leaf flags are materialized lazily; hot Monte
    Carlo loops that only scan the parent array never pay for them.
    """

    __slots__ = ("parent", "_csr", "_is_leaf", "_adjacency")

    def __init__(self, parent: np.ndarray, _trusted: bool = False):
        parent = np.ascontiguousarray(parent, dtype=np.int64)
        if not _trusted:
            if parent.ndim != 1 or parent.shape[0] < 1:
                raise ValueError("parent must be a 1-d array with at least the root")
            if parent[0] != -1:
                raise ValueError("vertex 0 is the root and must have parent -1")
            n1 = parent.shape[0]
            if n1 > 1:
                idx = np.arange(1, n1)
                bad = (parent[1:] < 0) | (parent[1:] >= idx)
                if bad.any():
                    i = int(idx[bad][0])
                    raise ValueError(f"parent[{i}]={int(parent[i])} violates parent[i] < i")
            parent.setflags(write=False)
        self.parent = parent
        self._csr = None
        self._is_leaf = None
        self._adjacency = None

    @classmethod
    def from_valid_parents(cls, parent: np.ndarray) -> "Tree":
        """Skip validation for arrays produced by the generators."""
        return cls(parent, _trusted=True)

    def _children_csr(self):
        if self._csr is None:
            self._csr = _kernels.children_csr(self.parent)
        return self._csr

    @property
    def child_offsets(self) -> np.ndarray:
        return self._children_csr()[0]

    @property
    def child_targets(self) -> np.ndarray:
        return self._children_csr()[1]

    @property
    def is_leaf(self) -> np.ndarray:
        if self._is_leaf is None:
            self._is_leaf = np.diff(self._children_csr()[0]) == 0
        return self._is_leaf

    def adjacency(self) -> tuple[np.ndarray, np.ndarray]:
        """Undirected adjacency in CSR form, built lazily and cached."""
        if self._adjacency is None:
            self._adjacency = _kernels.adjacency_csr(self.parent)
        return self._adjacency

    @property
    def n_vertices(self) -> int:
        return self.parent.shape[0]

    @property
    def n(self) -> int:
        """Number of non-root vertices (vertices are labeled 0..n)."""
        return self.parent.shape[0] - 1

    def children(self, v: int) -> np.ndarray:
        offsets, targets = self._children_csr()
        return targets[offsets[v] : offsets[v + 1]]

    def degree(self, v: int) -> int:
        offsets = self._children_csr()[0]
        d = int(offsets[v + 1] - offsets[v])
        return d + (1 if v != 0 else 0)

    def neighbors(self, v: int) -> np.ndarray:
        kids = self.children(v)
        if v == 0:
            return kids
        return np.concatenate(([self.parent[v]], kids))

    def __repr__(self) -> str:  # pragma: no cover
        return f"Tree(n={self.n})"

    def __eq__(self, other) -> bool:
        return isinstance(other, Tree) and np.array_equal(self.parent, other.parent)

    def __hash__(self):
        return hash(self.parent.tobytes())


def undirected_csr(tree: Tree) -> tuple[np.ndarray, np.ndarray]:
    """Undirected adjacency of the tree in CSR form (offsets, targets)."""
    return tree.adjacency()


def enumerate_parent_sequences(n: int) -> Iterator[Tree]:
    """Yield all n! recursive trees on n+1 vertices, one per parent sequence.

    Under uniform attachment each of these sequences has probability 1/n!,
    which makes the enumeration an exact small-n oracle.  Capped at
    n <= ENUMERATION_CAP.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n > ENUMERATION_CAP:
        raise ValueError(f"enumeration capped at n <= {ENUMERATION_CAP} (n! sequences)")
    for tail in itertools.product(*(range(i) for i in range(1, n + 1))):
        yield Tree(np.array((-1,) + tail, dtype=np.int64))


def write_tree_file(path, tree: Tree, model: str = "unknown", beta=None, seed=None) -> None:
    """Write `i parent[i]` lines (i >= 1) with a metadata header."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# model={model} n={tree.n} beta={beta} seed={seed}\n")
        for i in range(1, tree.n_vertices):
            fh.write(f"{i} {int(tree.parent[i])}\n")


def read_tree_file(path) -> Tree:
    """Read a tree written by write_tree_file."""
    pairs = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            i_s, p_s = line.split()
            i, p = int(i_s), int(p_s)
            if i == 0:
                continue  # tolerate an explicit `0 -1` root line
            pairs[i] = p
    n = max(pairs) if pairs else 0
    if sorted(pairs) != list(range(1, n + 1)):
        raise ValueError("tree file must list every vertex 1..n exactly once")
    parent = np.full(n + 1, -1, dtype=np.int64)
    for i, p in pairs.items():
        parent[i] = p
    return Tree(parent)
