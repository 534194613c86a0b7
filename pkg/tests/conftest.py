import numpy as np
import pytest

from rrtcast import RngStream, Tree
from rrtcast.broadcast import _assign_bits_impl
from rrtcast.harness import shuffled_view
from rrtcast import _kernels


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile (or load from cache) every numba kernel on tiny inputs so
    individual tests never pay compilation time."""
    par = np.array([-1, 0, 0, 1, 2], dtype=np.int64)
    tree = Tree(par)
    gen = RngStream(0).generator()
    bits = _assign_bits_impl(tree, 0.3, gen)
    shuffled_view(tree, bits, gen)
    _kernels.pa_parents(4, 1.0, gen.random(5), gen.random(5))
    _kernels.subtree_size_scan(par)
    _kernels.depth_scan(par)
    _kernels.max_child_size_scan(par, _kernels.subtree_size_scan(par))
    _kernels.leaf_mask_scan(par)
    marked = np.zeros(5, dtype=bool)
    _kernels.homogeneous_counts_scan(par, marked, _kernels.leaf_mask_scan(par))
    offsets, targets = tree.adjacency()
    _kernels.bfs_nearest_eligible(offsets, targets, 0, tree.is_leaf)
    _kernels.uniform_parents(4, gen.random(5))


@pytest.fixture
def path3():
    return Tree(np.array([-1, 0, 1], dtype=np.int64))


@pytest.fixture
def path4():
    return Tree(np.array([-1, 0, 1, 2], dtype=np.int64))


@pytest.fixture
def star5():
    """Root 0 with four leaf children."""
    return Tree(np.array([-1, 0, 0, 0, 0], dtype=np.int64))
