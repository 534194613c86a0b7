"""Random recursive tree generators.

Uniform attachment: vertex i picks its parent uniformly from {0..i-1}.
Linear preferential attachment: vertex i picks parent j with probability
proportional to outdegree(j) + beta; the normalizer at step i is
(beta+1)*i - 1 in closed form (root starts with weight beta, every
attachment adds total weight 1+beta).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .rng import RngStream
from .tree import Tree


@dataclass(frozen=True)
class PaParams:
    """Preferential attachment weight offset; attachment weight is outdegree + beta."""

    beta: float

    def __post_init__(self):
        if not (self.beta > 0):
            raise ValueError(f"beta must be positive, got {self.beta}")


def _urrt_parents(n: int, gen: np.random.Generator) -> np.ndarray:
    if n == 0:
        return np.full(1, -1, dtype=np.int64)
    return _kernels.uniform_parents(n, gen.random(n + 1))


def generate_urrt(n: int, rng: RngStream) -> Tree:
    """Uniform random recursive tree on n+1 vertices."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return Tree.from_valid_parents(_urrt_parents(n, rng.generator()))


def _pa_parents(n: int, beta: float, gen: np.random.Generator) -> np.ndarray:
    if n == 0:
        return np.full(1, -1, dtype=np.int64)
    u_branch = gen.random(n + 1)
    u_pick = gen.random(n + 1)
    return _kernels.pa_parents(n, float(beta), u_branch, u_pick)


def generate_pa(n: int, params: PaParams, rng: RngStream) -> Tree:
    """Linear preferential attachment tree on n+1 vertices.

    Sampling is O(1) per step: the weight of vertex j splits into
    outdegree(j) (pick the parent endpoint of a uniform edge) and beta
    (pick a uniform vertex), so no weight structure needs updating.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    if not isinstance(params, PaParams):
        params = PaParams(float(params))
    return Tree.from_valid_parents(_pa_parents(n, params.beta, rng.generator()))


def pa_attachment_probabilities(tree: Tree, beta: float) -> np.ndarray:
    """Exact attachment distribution for the next vertex joining `tree`."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    n1 = tree.n_vertices
    outdeg = np.diff(tree.child_offsets).astype(np.float64)
    weights = outdeg + beta
    total = (beta + 1) * n1 - 1
    return weights / total
