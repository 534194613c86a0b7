"""Noisy bit broadcast down a rooted tree.

The root draws a uniform bit in {-1,+1}; every other vertex copies its
parent's bit, independently flipped with probability q.  The equivalent
mark/flip decomposition (valid for q <= 1/2) marks each non-root vertex
with probability 2q and gives marked vertices a fair +-1 flip; unmarked
vertices copy their parent.  Marked vertices and the root then shatter
the tree into maximal bit-homogeneous subtrees.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _kernels
from .rng import RngStream
from .tree import Tree


class Visibility(Enum):
    ALL_VERTICES = "all"
    LEAVES_ONLY = "leaves"


class VisibilityError(Exception):
    """Raised when a consumer reads a bit the observation model hides."""


class BitAssignment:
    """Per-vertex bits plus the observation mask.

    Under LEAVES_ONLY visibility only leaf bits are readable; the mask is
    stored explicitly so a relabeled view keeps exposing the original
    leaf set.  root_bit is the ground truth the harness scores against,
    not part of the observation.
    """

    __slots__ = ("_bits", "root_bit", "visibility", "visible_mask")

    def __init__(self, bits: np.ndarray, visibility: Visibility, visible_mask: np.ndarray):
        self._bits = bits
        self.root_bit = int(bits[0])
        self.visibility = visibility
        self.visible_mask = visible_mask

    @classmethod
    def for_tree(cls, tree: Tree, bits: np.ndarray, visibility: Visibility) -> "BitAssignment":
        if visibility is Visibility.ALL_VERTICES:
            mask = np.ones(tree.n_vertices, dtype=bool)
        else:
            mask = tree.is_leaf.copy()
        return cls(bits, visibility, mask)

    @property
    def n_vertices(self) -> int:
        return self._bits.shape[0]

    def bit(self, v: int) -> int:
        if not self.visible_mask[v]:
            raise VisibilityError(f"bit of vertex {v} is not observable")
        return int(self._bits[v])

    def visible_vertices(self) -> np.ndarray:
        return np.flatnonzero(self.visible_mask)

    def visible_values(self) -> np.ndarray:
        return self._bits[self.visible_mask]

    def visible_sum(self) -> int:
        return int(self._bits[self.visible_mask].sum())

    def masked_to_leaves(self, tree: Tree) -> "BitAssignment":
        """Leaf-bit view of the same realization."""
        return BitAssignment(self._bits, Visibility.LEAVES_ONLY, tree.is_leaf.copy())

    def permuted(self, new_label: np.ndarray) -> "BitAssignment":
        """Same assignment expressed in relabeled coordinates."""
        bits = np.empty_like(self._bits)
        bits[new_label] = self._bits
        mask = np.empty_like(self.visible_mask)
        mask[new_label] = self.visible_mask
        out = BitAssignment(bits, self.visibility, mask)
        # relabeling moves the root; keep scoring against the true root bit
        out.root_bit = self.root_bit
        return out


@dataclass(frozen=True)
class Decomposition:
    """Realized marks m_i and flips xi_i of the mark/flip decomposition."""

    marked: np.ndarray  # bool, index 0 always False (root acts as a subtree root)
    flip: np.ndarray    # int8 in {-1,+1}, drawn for every vertex, used when marked
    q: float


@dataclass(frozen=True)
class SubtreeCounts:
    """Sizes of the maximal homogeneous subtrees hanging at each vertex."""

    count: np.ndarray       # N[v]
    leaf_count: np.ndarray  # leaves of the whole tree inside that subtree


def _check_q(q: float, upper: float = 1.0) -> float:
    q = float(q)
    if not (0.0 <= q <= upper):
        raise ValueError(f"q={q} outside [0, {upper}]")
    return q


def _root_bit(gen: np.random.Generator) -> int:
    return 1 if gen.random() < 0.5 else -1


def _assign_bits_impl(tree: Tree, q: float, gen: np.random.Generator) -> BitAssignment:
    root = _root_bit(gen)
    flips = gen.random(tree.n_vertices) < q
    flips[0] = False
    agree = _kernels.agreement_scan(tree.parent, flips)
    bits = (root * agree).astype(np.int8)
    return BitAssignment.for_tree(tree, bits, Visibility.ALL_VERTICES)


def assign_bits(tree: Tree, q: float, rng: RngStream) -> BitAssignment:
    """Direct broadcast: each non-root bit equals its parent's bit with
    probability 1-q, independently."""
    q = _check_q(q)
    return _assign_bits_impl(tree, q, rng.generator())


def assign_bits_decomposed(
    tree: Tree, q: float, rng: RngStream
) -> tuple[BitAssignment, Decomposition]:
    """Broadcast through the mark/flip decomposition (q <= 1/2 only).

    Marked w.p. 2q and flipping w.p. 1/2 reproduces the direct edge-flip
    law exactly: P(flip) = 2q * 1/2 = q, independently per vertex.
    """
    q = _check_q(q, upper=0.5)
    gen = rng.generator()
    root = _root_bit(gen)
    n1 = tree.n_vertices
    marked = gen.random(n1) < 2.0 * q
    marked[0] = False
    xi = np.where(gen.random(n1) < 0.5, 1, -1).astype(np.int8)
    xi[0] = 1
    eff_flip = marked & (xi == -1)
    agree = _kernels.agreement_scan(tree.parent, eff_flip)
    bits = (root * agree).astype(np.int8)
    assignment = BitAssignment.for_tree(tree, bits, Visibility.ALL_VERTICES)
    return assignment, Decomposition(marked=marked, flip=xi, q=q)


def subtree_counts(tree: Tree, dec: Decomposition) -> SubtreeCounts:
    """N[v] and its leaf count for every vertex.

    N[v] counts v plus everything reachable downward without entering a
    marked vertex; v's own mark is irrelevant to its own subtree.
    """
    if dec.marked.shape[0] != tree.n_vertices:
        raise ValueError("decomposition does not match the tree")
    count, leaf_count = _kernels.homogeneous_counts_scan(
        tree.parent, dec.marked, tree.is_leaf
    )
    return SubtreeCounts(count=count, leaf_count=leaf_count)


def delta_statistic(tree: Tree, assignment: BitAssignment) -> int:
    """(# vertices sharing the root's bit) - (# vertices with the other bit).

    Only defined for full-bit visibility; the sign is the majority vote
    relative to the root's bit class.
    """
    if assignment.visibility is not Visibility.ALL_VERTICES:
        raise VisibilityError("delta statistic needs all vertex bits")
    return int(assignment.root_bit) * int(assignment._bits.sum())


def delta_from_decomposition(
    tree: Tree,
    assignment: BitAssignment,
    dec: Decomposition,
    counts: SubtreeCounts | None = None,
) -> int:
    """Delta recomputed from the decomposition:
    N_0 + sum_i N_i * (B_{p_i} B_0) * xi_i * m_i.  Must equal
    delta_statistic on every realization."""
    if counts is None:
        counts = subtree_counts(tree, dec)
    n1 = tree.n_vertices
    if n1 == 1:
        return 1
    idx = np.arange(1, n1)
    m = dec.marked[1:].astype(np.int64)
    parent_bits = assignment._bits[tree.parent[idx]].astype(np.int64)
    xi = dec.flip[1:].astype(np.int64)
    total = counts.count[0] + int(
        (counts.count[1:] * parent_bits * assignment.root_bit * xi * m).sum()
    )
    return int(total)
