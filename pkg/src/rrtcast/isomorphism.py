"""Rooted-tree isomorphism codes, automorphism counts and the root posterior.

Canonical codes are exact interned identifiers (AHU scheme: a vertex's
code is the sorted multiset of its children's codes), never hashes, so
code equality is rooted-tree isomorphism with no collision risk.  A
two-pass re-rooting computes, in near-linear time, the code of the tree
rooted at every vertex; equal whole-tree codes identify automorphism
orbits.

For a uniform-attachment tree observed as an unlabeled shape, the chance
that vertex u is the root is proportional to

    lambda(u) = 1 / (Aut(u,T) * prod_v |T_v^u| * AutBar(T_v^u))

where T_v^u is the subtree at v when the tree is rooted at u, and
AutBar multiplies the factorials of the multiplicities of isomorphic
children subtrees.  Leaf factors are 1, so the product runs over all
vertices.  The numerator of the matching counting identity is (n+1)!:
(n+1)! / prod_v (|T_v^u| * AutBar(T_v^u)) counts the parent sequences
whose rooted shape is (T, u).
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels
from .tree import Tree, undirected_csr

# Interning table shared across trees within a process; equal structures
# always receive equal integer codes.
_CODE_TABLE: dict[tuple, int] = {(): 0}
LEAF_CODE = 0


def _intern(key: tuple) -> int:
    code = _CODE_TABLE.get(key)
    if code is None:
        code = len(_CODE_TABLE)
        _CODE_TABLE[key] = code
    return code


def _orient(tree: Tree, root: int) -> tuple[np.ndarray, np.ndarray]:
    """Parent array and parents-first order for the tree rooted at `root`."""
    if root == 0:
        return tree.parent, np.arange(tree.n_vertices, dtype=np.int64)
    offsets, targets = undirected_csr(tree)
    n1 = tree.n_vertices
    par = np.full(n1, -2, dtype=np.int64)
    order = np.empty(n1, dtype=np.int64)
    par[root] = -1
    order[0] = root
    cnt = 1
    head = 0
    while head < cnt:
        v = order[head]
        head += 1
        for t in range(offsets[v], offsets[v + 1]):
            u = int(targets[t])
            if par[u] == -2:
                par[u] = v
                order[cnt] = u
                cnt += 1
    return par, order


def canonical_codes_rooted(tree: Tree, root: int = 0) -> np.ndarray:
    """Code of the subtree hanging below each vertex in the `root` rooting.

    codes[v] == codes[w] iff the two subtrees are isomorphic as rooted
    unlabeled trees (exact).
    """
    par, order = _orient(tree, root)
    n1 = tree.n_vertices
    kid_codes: list[list[int]] = [[] for _ in range(n1)]
    codes = np.empty(n1, dtype=np.int64)
    for idx in range(n1 - 1, -1, -1):
        v = int(order[idx])
        codes[v] = _intern(tuple(sorted(kid_codes[v])))
        p = par[v]
        if p >= 0:
            kid_codes[p].append(int(codes[v]))
    return codes


@dataclass
class AllRootCodes:
    """Edge-local codes from the two-pass re-rooting.

    down[v]: code of the subtree below v (label-0 rooting).
    up[v]:   code of the branch at v's parent pointing away from v,
             rooted at the parent (-1 for the root).
    root_code[v]: code of the whole tree rooted at v.
    neighbor_codes[v]: sorted tuple of the codes of all branches around v,
             i.e. down[c] for children plus up[v]; this is the key that
             root_code[v] interns.
    """

    down: np.ndarray
    up: np.ndarray
    root_code: np.ndarray
    neighbor_codes: list[tuple]

    def orbit_sizes(self) -> np.ndarray:
        _, inverse, counts = np.unique(self.root_code, return_inverse=True, return_counts=True)
        return counts[inverse]

    def multiplicity(self, v: int, code: int) -> int:
        key = self.neighbor_codes[v]
        return bisect_right(key, code) - bisect_left(key, code)

    def code_toward(self, tree: Tree, v: int, u: int) -> int:
        """Code of the branch at neighbor u pointing away from v."""
        if tree.parent[u] == v:
            return int(self.down[u])
        if tree.parent[v] == u:
            return int(self.up[v])
        raise ValueError(f"{u} is not adjacent to {v}")


def all_root_codes(tree: Tree) -> AllRootCodes:
    down = canonical_codes_rooted(tree, 0)
    n1 = tree.n_vertices
    up = np.full(n1, -1, dtype=np.int64)
    root_code = np.empty(n1, dtype=np.int64)
    neighbor_codes: list[tuple] = [()] * n1
    for v in range(n1):  # ascending labels: parents before children
        kids = tree.children(v)
        lst = [int(down[c]) for c in kids]
        if v != 0:
            lst.append(int(up[v]))
        lst.sort()
        key = tuple(lst)
        neighbor_codes[v] = key
        root_code[v] = _intern(key)
        for c in kids:
            j = bisect_left(lst, int(down[c]))
            up[c] = _intern(tuple(lst[:j] + lst[j + 1 :]))
    return AllRootCodes(down=down, up=up, root_code=root_code, neighbor_codes=neighbor_codes)


def aut_vertex(tree: Tree, v: int, codes: AllRootCodes | None = None) -> int:
    """Orbit size of v under the automorphism group of the unrooted tree."""
    if codes is None:
        codes = all_root_codes(tree)
    target = codes.root_code[v]
    return int((codes.root_code == target).sum())


def _euler_intervals(tree: Tree) -> tuple[np.ndarray, np.ndarray]:
    n1 = tree.n_vertices
    tin = np.empty(n1, dtype=np.int64)
    tout = np.empty(n1, dtype=np.int64)
    it = [iter(tree.children(0))]
    stack = [0]
    timer = 0
    tin[0] = timer
    timer += 1
    while stack:
        try:
            c = int(next(it[-1]))
        except StopIteration:
            v = stack.pop()
            it.pop()
            tout[v] = timer
            timer += 1
            continue
        tin[c] = timer
        timer += 1
        stack.append(c)
        it.append(iter(tree.children(c)))
    return tin, tout


def _neighbor_toward(tree: Tree, tin: np.ndarray, tout: np.ndarray, v: int, target: int) -> int:
    """Neighbor of v on the path from v to `target` (v != target)."""
    if tin[v] <= tin[target] <= tout[v]:
        for c in tree.children(v):
            if tin[c] <= tin[target] <= tout[c]:
                return int(c)
        raise AssertionError("descendant without covering child")
    return int(tree.parent[v])


def aut_bar(tree: Tree, root: int, v: int, codes: AllRootCodes | None = None) -> int:
    """Product of factorials of multiplicities of isomorphism classes among
    v's children subtrees when the tree is rooted at `root`.  1 for leaves.
    """
    if codes is None:
        codes = all_root_codes(tree)
    key = list(codes.neighbor_codes[v])
    if v != root:
        tin, tout = _euler_intervals(tree)
        t = _neighbor_toward(tree, tin, tout, v, root)
        key.remove(codes.code_toward(tree, v, t))
    return _factorial_of_runs(key)


def _factorial_of_runs(sorted_codes: list[int]) -> int:
    out = 1
    run = 0
    prev = None
    for c in sorted_codes:
        if c == prev:
            run += 1
        else:
            out *= math.factorial(run)
            prev = c
            run = 1
    out *= math.factorial(run)
    return out


def _log_factorial_of_runs_minus(key: tuple, drop: int) -> float:
    """log of the run-factorial product after removing one instance of `drop`
    (drop = -1 removes nothing)."""
    total = 0.0
    run = 0
    prev = None
    dropped = drop == -1
    for c in key:
        if c == prev:
            run += 1
        else:
            if run:
                total += math.lgamma(run + 1)
            prev = c
            run = 1
        if not dropped and c == drop:
            run -= 1
            dropped = True
    if run:
        total += math.lgamma(run + 1)
    return total


def labeling_count(tree: Tree, root: int = 0) -> int:
    """Number of parent sequences whose rooted shape is (tree, root).

    Exact integer arithmetic: (n+1)! divided by the product over vertices
    of subtree size times AutBar.  The division is always exact; a
    remainder indicates a bug, not rounding.
    """
    par, order = _orient(tree, root)
    n1 = tree.n_vertices
    codes = canonical_codes_rooted(tree, root)
    size = np.ones(n1, dtype=np.int64)
    kid_codes: list[list[int]] = [[] for _ in range(n1)]
    denom = 1
    for idx in range(n1 - 1, -1, -1):
        v = int(order[idx])
        p = par[v]
        if p >= 0:
            size[p] += size[v]
            kid_codes[p].append(int(codes[v]))
    for v in range(n1):
        denom *= int(size[v]) * _factorial_of_runs(sorted(kid_codes[v]))
    num = math.factorial(n1)
    q, r = divmod(num, denom)
    if r:
        raise AssertionError("labeling count is not an integer; code/size bug")
    return q


@dataclass(frozen=True)
class RootPosterior:
    """log lambda(u) up to a shared constant, and the normalized posterior."""

    log_lambda: np.ndarray
    posterior: np.ndarray


def root_likelihoods(tree: Tree, codes: AllRootCodes | None = None) -> RootPosterior:
    """Root posterior over all vertices in near-linear time.

    Uses the re-rooting identity: moving the root across an edge (v -> c)
    only changes the size and AutBar factors at v and c, and those cancel
    down to
        L(c) = L(v) + log s(v|c) - log s(c|v) + log m1 - log m2
    with s the two edge-side sizes, m1 the multiplicity of c's parent-side
    branch code among c's branches and m2 the multiplicity of c's own code
    among v's branches.
    """
    if codes is None:
        codes = all_root_codes(tree)
    n1 = tree.n_vertices
    size = _kernels.subtree_size_scan(tree.parent)
    log_l = np.empty(n1, dtype=np.float64)

    base = 0.0
    for v in range(n1):
        drop = int(codes.up[v]) if v != 0 else -1
        base += math.log(int(size[v])) + _log_factorial_of_runs_minus(
            codes.neighbor_codes[v], drop
        )
    log_l[0] = base
    for v in range(n1):  # parents before children
        lv = log_l[v]
        for c in tree.children(v):
            c = int(c)
            s_down = int(size[c])
            m1 = codes.multiplicity(c, int(codes.up[c]))
            m2 = codes.multiplicity(v, int(codes.down[c]))
            log_l[c] = (
                lv + math.log(n1 - s_down) - math.log(s_down) + math.log(m1) - math.log(m2)
            )

    orbit = codes.orbit_sizes().astype(np.float64)
    log_lambda = -np.log(orbit) - log_l
    shifted = log_lambda - log_lambda.max()
    w = np.exp(shifted)
    return RootPosterior(log_lambda=log_lambda, posterior=w / w.sum())


def root_likelihoods_exact(tree: Tree) -> tuple[list[Fraction], list[Fraction]]:
    """Exact rational (lambda, posterior) by direct per-root evaluation.

    Quadratic in the tree size; intended for small trees and as an
    independent cross-check of the re-rooting path.
    """
    n1 = tree.n_vertices
    denoms = []
    whole_codes = []
    for u in range(n1):
        par, order = _orient(tree, u)
        codes = canonical_codes_rooted(tree, u)
        size = np.ones(n1, dtype=np.int64)
        kid_codes: list[list[int]] = [[] for _ in range(n1)]
        for idx in range(n1 - 1, -1, -1):
            v = int(order[idx])
            p = par[v]
            if p >= 0:
                size[p] += size[v]
                kid_codes[p].append(int(codes[v]))
        denom = 1
        for v in range(n1):
            denom *= int(size[v]) * _factorial_of_runs(sorted(kid_codes[v]))
        denoms.append(denom)
        whole_codes.append(int(codes[u]))
    orbit = [whole_codes.count(c) for c in whole_codes]
    lambdas = [Fraction(1, o * d) for o, d in zip(orbit, denoms)]
    total = sum(lambdas)
    posterior = [lam / total for lam in lambdas]
    return lambdas, posterior
