"""Structural tree queries: subtree sizes, depths, centroids, nearest leaves.

phi(v) is the largest component size left after deleting v.  Every tree
has one or two vertices minimizing phi (its centroids); when there are
two they are adjacent and both satisfy phi <= (n+1)/2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .generate import PaParams, _pa_parents, _urrt_parents
from .rng import RngStream
from .tree import Tree, undirected_csr


@dataclass(frozen=True)
class StructuralSummary:
    size_down: np.ndarray  # |subtree below v| in the label-0 rooting
    depth: np.ndarray      # edge distance to vertex 0
    phi: np.ndarray        # max over neighbors u of the component at u after deleting v


def structural_summary(tree: Tree) -> StructuralSummary:
    """Sizes, depths and phi in linear time.

    The component of a neighbor u of v has size size_down[u] when u is a
    child of v, and n+1 - size_down[v] when u is v's parent (re-rooting
    identity), so phi needs no per-root recomputation.
    """
    size = _kernels.subtree_size_scan(tree.parent)
    depth = _kernels.depth_scan(tree.parent)
    mcs = _kernels.max_child_size_scan(tree.parent, size)
    n1 = tree.n_vertices
    up = n1 - size
    up[0] = 0
    phi = np.maximum(mcs, up)
    return StructuralSummary(size_down=size, depth=depth, phi=phi)


def centroids(tree: Tree, summary: StructuralSummary | None = None) -> np.ndarray:
    """All vertices minimizing phi; one or two, adjacent when two."""
    if summary is None:
        summary = structural_summary(tree)
    phi = summary.phi
    cands = np.flatnonzero(phi == phi.min())
    if cands.shape[0] > 2:  # impossible for a tree; guards against bugs
        raise AssertionError("more than two centroids found")
    return cands


def nearest_leaf(tree: Tree, v: int, eligible: np.ndarray | None = None) -> int:
    """Closest leaf to v (v itself if it is a leaf); ties break to the
    smallest label.  `eligible` overrides the default leaf set, which is
    how observers restrict the search to vertices whose bit they can read.
    """
    if eligible is None:
        eligible = tree.is_leaf
    offsets, targets = undirected_csr(tree)
    found = _kernels.bfs_nearest_eligible(offsets, targets, v, np.ascontiguousarray(eligible))
    if found < 0:
        raise ValueError("no eligible vertex reachable")
    return int(found)


@dataclass(frozen=True)
class CentroidDepthStats:
    """Monte Carlo summary of the centroid closest to the root."""

    model: str
    n: int
    trials: int
    mean_depth: float
    ci_halfwidth: float          # 95% normal half-width of mean_depth
    p_root: float                # fraction of trials where that centroid is the root
    p_root_ci: float
    p_two_centroids: float
    p_two_ci: float


def _centroid_trial_arrays(parent_cols: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Batched centroid depth / multiplicity over many small trees.

    parent_cols has shape (trials, n+1) with column 0 equal to -1; all
    per-vertex scans run column-by-column across the whole batch.
    """
    trials, n1 = parent_cols.shape
    rows = np.arange(trials)
    size = np.ones((trials, n1), dtype=np.int64)
    depth = np.zeros((trials, n1), dtype=np.int64)
    mcs = np.zeros((trials, n1), dtype=np.int64)
    for i in range(n1 - 1, 0, -1):
        p = parent_cols[:, i]
        size[rows, p] += size[:, i]
    for i in range(1, n1):
        p = parent_cols[:, i]
        depth[:, i] = depth[rows, p] + 1
        np.maximum.at(mcs, (rows, p), size[:, i])
    up = n1 - size
    up[:, 0] = 0
    phi = np.maximum(mcs, up)
    mn = phi.min(axis=1)
    is_cent = phi == mn[:, None]
    n_cent = is_cent.sum(axis=1)
    delta = np.where(is_cent, depth, np.iinfo(np.int64).max).min(axis=1)
    return delta, n_cent


def centroid_depth_stats(
    model: str,
    n: int,
    trials: int,
    rng: RngStream,
    beta: float | None = None,
    batch: int = 50_000,
) -> CentroidDepthStats:
    """Monte Carlo estimate of E[depth of the centroid closest to the root].

    Also reports the root-is-centroid and two-centroid frequencies from the
    same trials.  URRT batches column-wise for small n; otherwise trees are
    generated one at a time.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if model == "pa":
        if beta is None:
            raise ValueError("pa model requires beta")
        beta = PaParams(beta).beta
    elif model != "urrt":
        raise ValueError(f"unknown model {model!r}")

    depth_sum = 0.0
    depth_sq_sum = 0.0
    root_hits = 0
    two_hits = 0
    if model == "urrt" and n <= 64:
        done = 0
        chunk_idx = 0
        while done < trials:
            m = min(batch, trials - done)
            gen = rng.child(chunk_idx).generator()
            cols = np.full((m, n + 1), -1, dtype=np.int64)
            if n > 0:
                cols[:, 1:] = gen.integers(0, np.arange(1, n + 1), size=(m, n))
            delta, n_cent = _centroid_trial_arrays(cols)
            depth_sum += float(delta.sum())
            depth_sq_sum += float((delta.astype(np.float64) ** 2).sum())
            root_hits += int((delta == 0).sum())
            two_hits += int((n_cent == 2).sum())
            done += m
            chunk_idx += 1
    else:
        for t in range(trials):
            gen = rng.child(t).generator()
            if model == "urrt":
                parent = _urrt_parents(n, gen)
            else:
                parent = _pa_parents(n, beta, gen)
            size = _kernels.subtree_size_scan(parent)
            depth = _kernels.depth_scan(parent)
            mcs = _kernels.max_child_size_scan(parent, size)
            up = parent.shape[0] - size
            up[0] = 0
            phi = np.maximum(mcs, up)
            mn = phi.min()
            cents = np.flatnonzero(phi == mn)
            d = int(depth[cents].min())
            depth_sum += d
            depth_sq_sum += float(d) ** 2
            root_hits += 1 if d == 0 else 0
            two_hits += 1 if cents.shape[0] == 2 else 0

    mean = depth_sum / trials
    var = max(depth_sq_sum / trials - mean * mean, 0.0)
    ci = 1.96 * np.sqrt(var / trials)
    p_root = root_hits / trials
    p_two = two_hits / trials
    return CentroidDepthStats(
        model=model,
        n=n,
        trials=trials,
        mean_depth=mean,
        ci_halfwidth=float(ci),
        p_root=p_root,
        p_root_ci=1.96 * float(np.sqrt(p_root * (1 - p_root) / trials)),
        p_two_centroids=p_two,
        p_two_ci=1.96 * float(np.sqrt(p_two * (1 - p_two) / trials)),
    )
