"""Compiled per-vertex scans.

All randomness is drawn outside the kernels (numpy Generators) so results
are bit-reproducible; kernels are pure array transforms.  parent arrays
follow the recursive-labeling convention: parent[0] = -1, parent[i] < i.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def children_csr(par):
    # counting sort; children end up in ascending (insertion) order
    n1 = par.shape[0]
    counts = np.zeros(n1, dtype=np.int64)
    for i in range(1, n1):
        counts[par[i]] += 1
    offsets = np.zeros(n1 + 1, dtype=np.int64)
    for v in range(n1):
        offsets[v + 1] = offsets[v] + counts[v]
    cursor = offsets[:n1].copy()
    m = n1 - 1 if n1 > 1 else 0
    targets = np.empty(m, dtype=np.int64)
    for i in range(1, n1):
        p = par[i]
        targets[cursor[p]] = i
        cursor[p] += 1
    return offsets, targets


@njit(cache=True, nogil=True)
def adjacency_csr(par):
    # undirected adjacency; each vertex lists its parent first, then children
    n1 = par.shape[0]
    deg = np.zeros(n1, dtype=np.int64)
    for i in range(1, n1):
        deg[i] += 1
        deg[par[i]] += 1
    offsets = np.zeros(n1 + 1, dtype=np.int64)
    for v in range(n1):
        offsets[v + 1] = offsets[v] + deg[v]
    cursor = offsets[:n1].copy()
    m = 2 * (n1 - 1) if n1 > 1 else 0
    targets = np.empty(m, dtype=np.int64)
    for i in range(1, n1):
        p = par[i]
        targets[cursor[i]] = p
        cursor[i] += 1
        targets[cursor[p]] = i
        cursor[p] += 1
    return offsets, targets


@njit(cache=True, nogil=True)
def uniform_parents(n, u):
    # parent[i] = floor(u_i * i); floor bias per draw is below 2^-52
    par = np.full(n + 1, -1, dtype=np.int64)
    for i in range(1, n + 1):
        j = int(u[i] * i)
        if j > i - 1:
            j = i - 1
        par[i] = j
    return par


@njit(cache=True, nogil=True)
def pa_parents(n, beta, u_branch, u_pick):
    # Linear preferential attachment in O(1) per step: with probability
    # (i-1)/((beta+1)i - 1) copy the parent endpoint of a uniform existing
    # edge (weight proportional to outdegree), otherwise attach uniformly
    # (the beta part of the weight).
    par = np.full(n + 1, -1, dtype=np.int64)
    for i in range(1, n + 1):
        tot = (1.0 + beta) * i - 1.0
        if u_branch[i] * tot < i - 1.0:
            e = 1 + int(u_pick[i] * (i - 1))
            if e > i - 1:
                e = i - 1
            par[i] = par[e]
        else:
            j = int(u_pick[i] * i)
            if j > i - 1:
                j = i - 1
            par[i] = j
    return par


@njit(cache=True, nogil=True)
def agreement_scan(par, flip):
    # agree[i] = product of edge signs on the root path = B_i * B_0
    n1 = par.shape[0]
    agree = np.empty(n1, dtype=np.int8)
    agree[0] = 1
    for i in range(1, n1):
        a = agree[par[i]]
        if flip[i]:
            a = -a
        agree[i] = a
    return agree


@njit(cache=True, nogil=True)
def depth_scan(par):
    n1 = par.shape[0]
    depth = np.zeros(n1, dtype=np.int64)
    for i in range(1, n1):
        depth[i] = depth[par[i]] + 1
    return depth


@njit(cache=True, nogil=True)
def subtree_size_scan(par):
    n1 = par.shape[0]
    size = np.ones(n1, dtype=np.int64)
    for i in range(n1 - 1, 0, -1):
        size[par[i]] += size[i]
    return size


@njit(cache=True, nogil=True)
def max_child_size_scan(par, size):
    n1 = par.shape[0]
    mcs = np.zeros(n1, dtype=np.int64)
    for i in range(1, n1):
        p = par[i]
        if size[i] > mcs[p]:
            mcs[p] = size[i]
    return mcs


@njit(cache=True, nogil=True)
def leaf_mask_scan(par):
    n1 = par.shape[0]
    has_child = np.zeros(n1, dtype=np.bool_)
    for i in range(1, n1):
        has_child[par[i]] = True
    return ~has_child


@njit(cache=True, nogil=True)
def homogeneous_counts_scan(par, marked, leaf):
    # N[v]: vertices reachable downward from v without entering a marked
    # vertex (v itself always counted); Nleaf[v]: tree leaves among them.
    n1 = par.shape[0]
    count = np.ones(n1, dtype=np.int64)
    leaf_count = np.zeros(n1, dtype=np.int64)
    for v in range(n1):
        if leaf[v]:
            leaf_count[v] = 1
    for i in range(n1 - 1, 0, -1):
        if not marked[i]:
            p = par[i]
            count[p] += count[i]
            leaf_count[p] += leaf_count[i]
    return count, leaf_count


@njit(cache=True, nogil=True)
def bfs_shuffle(offsets, targets, rho, start):
    # Relabel by BFS from `start`, visiting neighbors in increasing rho.
    # With uniform start and i.i.d. uniform rho the output law depends only
    # on the unrooted shape, so downstream consumers cannot read off the
    # original root or insertion order.
    n1 = rho.shape[0]
    new_label = np.full(n1, -1, dtype=np.int64)
    new_parent = np.full(n1, -1, dtype=np.int64)
    queue = np.empty(n1, dtype=np.int64)
    queue[0] = start
    new_label[start] = 0
    cnt = 1
    head = 0
    buf_v = np.empty(n1, dtype=np.int64)
    buf_p = np.empty(n1, dtype=np.float64)
    while head < cnt:
        v = queue[head]
        head += 1
        lo, hi = offsets[v], offsets[v + 1]
        m = 0
        for t in range(lo, hi):
            u = targets[t]
            if new_label[u] < 0:
                buf_v[m] = u
                buf_p[m] = rho[u]
                m += 1
        for a in range(1, m):  # insertion sort; tree degrees are small
            ku = buf_v[a]
            kp = buf_p[a]
            b = a - 1
            while b >= 0 and buf_p[b] > kp:
                buf_v[b + 1] = buf_v[b]
                buf_p[b + 1] = buf_p[b]
                b -= 1
            buf_v[b + 1] = ku
            buf_p[b + 1] = kp
        for a in range(m):
            u = buf_v[a]
            new_label[u] = cnt
            new_parent[cnt] = new_label[v]
            queue[cnt] = u
            cnt += 1
    return new_label, new_parent


@njit(cache=True, nogil=True)
def shuffle_from_parents(par, rho, start):
    # adjacency_csr + bfs_shuffle fused (one kernel call per trial)
    offsets, targets = adjacency_csr(par)
    return bfs_shuffle(offsets, targets, rho, start)


@njit(cache=True, nogil=True)
def bfs_nearest_eligible(offsets, targets, start, eligible):
    # Closest eligible vertex from `start`; ties at the minimal distance
    # break to the smallest label.  Returns -1 if nothing is eligible.
    if eligible[start]:
        return start
    n1 = eligible.shape[0]
    seen = np.zeros(n1, dtype=np.uint8)
    queue = np.empty(n1, dtype=np.int64)
    queue[0] = start
    seen[start] = 1
    head = 0
    cnt = 1
    level_end = 1
    best = -1
    while head < cnt:
        v = queue[head]
        head += 1
        for t in range(offsets[v], offsets[v + 1]):
            u = targets[t]
            if not seen[u]:
                seen[u] = 1
                if eligible[u] and (best < 0 or u < best):
                    best = u
                queue[cnt] = u
                cnt += 1
        if head == level_end:
            if best >= 0:
                return best
            level_end = cnt
    return best
