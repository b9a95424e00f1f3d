"""Sampling and exact enumeration for the broadcast process on complete trees.

The process assigns the root a uniform spin in {-1, +1} (unless fixed) and
each child copies its parent's spin with probability (1 + epsilon)/2,
independently per edge. Besides forward sampling this module provides the
exact conditional resampler of internal spins given the leaves (an upward
likelihood filter followed by a downward sample) and brute-force
enumeration oracles for trees small enough to sum over.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import seeds
from .numerics import expit
from .tree import CapacityError, SpinVector, TreeShape, parent_indices

# enumeration routines refuse more free spins than this (2**24 configs)
_MAX_FREE_SPINS = 24


@dataclass(frozen=True)
class BroadcastParams:
    """Copy bias epsilon in (0, 1), tree shape, and a master seed."""

    epsilon: float
    shape: TreeShape
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")


@dataclass(frozen=True)
class LabeledTree:
    """A full spin assignment, one entry per node in breadth-first order."""

    spins: SpinVector
    params: BroadcastParams

    @property
    def root_spin(self) -> int:
        return int(self.spins.to_array()[0])

    def leaves(self) -> SpinVector:
        shape = self.params.shape
        arr = self.spins.to_array()[shape.leaf_start:]
        return SpinVector(arr, start=shape.leaf_start)


def sample_many(params: BroadcastParams, n: int, rng: np.random.Generator,
                root_spins: np.ndarray | int | None = None) -> np.ndarray:
    """n independent trees as an (n, node_count) int8 array.

    root_spins may be a scalar (+-1), an (n,) array, or None for uniform
    roots. Levels are filled top-down with one vectorized draw per level.
    """
    shape = params.shape
    spins = np.empty((n, shape.node_count), dtype=np.int8)
    if root_spins is None:
        spins[:, 0] = rng.integers(0, 2, size=n, dtype=np.int8) * 2 - 1
    else:
        spins[:, 0] = root_spins
    p_copy = (1.0 + params.epsilon) / 2.0
    for level in range(1, shape.depth + 1):
        start = shape.level_start(level)
        size = shape.level_size(level)
        parents = spins[:, shape.level_start(level - 1):start]
        inherited = np.repeat(parents, shape.arity, axis=1)
        copy = rng.random((n, size)) < p_copy
        spins[:, start:start + size] = np.where(copy, inherited, -inherited)
    return spins


def sample_tree(params: BroadcastParams, root_spin: int | None = None,
                rng: np.random.Generator | None = None) -> LabeledTree:
    """One tree; deterministic given (params.seed, root_spin) when rng is None."""
    if rng is None:
        rng = seeds.stream(params.seed, "broadcast.sample_tree")
    spins = sample_many(params, 1, rng, root_spins=root_spin)[0]
    return LabeledTree(SpinVector(spins), params)


def _conditional_internal_batch(params: BroadcastParams, leaves: np.ndarray,
                                root_spins: np.ndarray,
                                rng: np.random.Generator) -> np.ndarray:
    """Exact conditional draw of internal spins given roots and leaves.

    leaves is (n, leaf_count) int8, root_spins is (n,). Upward pass: per
    node, the log likelihood of its subtree's leaves under each spin.
    Downward pass: sample each node given its parent and its subtree
    likelihoods. Returns (n, node_count) int8 whose root and leaf columns
    equal the inputs exactly.
    """
    shape = params.shape
    n = leaves.shape[0]
    lc = math.log((1.0 + params.epsilon) / 2.0)  # copy
    lf = math.log((1.0 - params.epsilon) / 2.0)  # flip

    neg_inf = -np.inf
    up_plus: list[np.ndarray | None] = [None] * (shape.depth + 1)
    up_minus: list[np.ndarray | None] = [None] * (shape.depth + 1)
    up_plus[shape.depth] = np.where(leaves == 1, 0.0, neg_inf)
    up_minus[shape.depth] = np.where(leaves == -1, 0.0, neg_inf)
    for level in range(shape.depth - 1, 0, -1):
        cp = up_plus[level + 1]
        cm = up_minus[level + 1]
        msg_plus = np.logaddexp(lc + cp, lf + cm)
        msg_minus = np.logaddexp(lf + cp, lc + cm)
        up_plus[level] = msg_plus.reshape(n, -1, shape.arity).sum(axis=2)
        up_minus[level] = msg_minus.reshape(n, -1, shape.arity).sum(axis=2)

    spins = np.empty((n, shape.node_count), dtype=np.int8)
    spins[:, 0] = root_spins
    for level in range(1, shape.depth + 1):
        start = shape.level_start(level)
        size = shape.level_size(level)
        parents = np.repeat(spins[:, shape.level_start(level - 1):start], shape.arity, axis=1)
        if level == shape.depth:
            # leaf likelihoods are 0/-inf indicators, so the conditional is
            # the observed leaf with probability 1; write it directly
            spins[:, start:start + size] = leaves
            continue
        w_plus = np.where(parents == 1, lc, lf) + up_plus[level]
        w_minus = np.where(parents == 1, lf, lc) + up_minus[level]
        p_plus = expit(w_plus - w_minus)
        draw = rng.random((n, size)) < p_plus
        spins[:, start:start + size] = np.where(draw, 1, -1).astype(np.int8)
    return spins


def sample_internal_given_leaves(params: BroadcastParams, leaves: SpinVector,
                                 root_spin: int,
                                 rng: np.random.Generator | None = None) -> LabeledTree:
    """One labeling with the given root and leaves, internal spins drawn
    from the process conditioned on both."""
    shape = params.shape
    if len(leaves) != shape.leaf_count:
        raise ValueError(f"expected {shape.leaf_count} leaves, got {len(leaves)}")
    if rng is None:
        rng = seeds.stream(params.seed, "broadcast.conditional")
    leaf_arr = leaves.to_array()[None, :]
    roots = np.asarray([root_spin], dtype=np.int8)
    spins = _conditional_internal_batch(params, leaf_arr, roots, rng)[0]
    return LabeledTree(SpinVector(spins), params)


def spin_configs(num_free: int) -> np.ndarray:
    """All {-1,+1} assignments of num_free spins, one row per configuration.

    Column j of row i holds +1 exactly when bit j of i is set.
    """
    if num_free > _MAX_FREE_SPINS:
        raise CapacityError(f"{num_free} free spins exceed the enumeration limit")
    idx = np.arange(1 << num_free, dtype=np.uint32)
    bits = (idx[:, None] >> np.arange(num_free, dtype=np.uint32)[None, :]) & 1
    return (bits.astype(np.int8) << 1) - 1


def config_weights(shape: TreeShape, epsilon: float, spins: np.ndarray) -> np.ndarray:
    """Product of (1 + eps * s_parent * s_child)/2 over all edges, per row."""
    parents = parent_indices(shape)
    w = np.ones(spins.shape[0], dtype=np.float64)
    for node in range(1, shape.node_count):
        w *= (1.0 + epsilon * spins[:, parents[node]].astype(np.float64)
              * spins[:, node].astype(np.float64)) / 2.0
    return w


@dataclass(frozen=True)
class ConditionalTable:
    """Exact conditional law of the internal non-root spins."""

    internal_nodes: np.ndarray   # node ids, ascending
    configs: np.ndarray          # (n_configs, len(internal_nodes)) int8
    probs: np.ndarray            # (n_configs,), sums to 1


def enumerate_conditional(params: BroadcastParams, leaves: SpinVector,
                          root_spin: int) -> ConditionalTable:
    """Brute-force law of internal spins given root and leaves (tiny trees)."""
    shape = params.shape
    if shape.node_count > 25:
        raise CapacityError(f"{shape.node_count} nodes exceed the enumeration limit")
    if len(leaves) != shape.leaf_count:
        raise ValueError(f"expected {shape.leaf_count} leaves, got {len(leaves)}")
    internal = np.arange(1, shape.leaf_start, dtype=np.int64)
    m = internal.size
    configs = spin_configs(m)
    full = np.empty((configs.shape[0], shape.node_count), dtype=np.int8)
    full[:, 0] = root_spin
    full[:, 1:shape.leaf_start] = configs
    full[:, shape.leaf_start:] = leaves.to_array()
    w = config_weights(shape, params.epsilon, full)
    total = w.sum()
    if total <= 0.0:
        raise ValueError("conditioning event has zero probability")
    return ConditionalTable(internal, configs, w / total)


def enumerate_leaf_law(epsilon: float, shape: TreeShape, root_spin: int) -> np.ndarray:
    """Exact law of the leaf spins given the root, over all 2**leaf_count
    configurations.

    Entry i is the probability of the leaf configuration whose leaf j is
    +1 exactly when bit j of i is set.
    """
    m = shape.leaf_start - 1          # internal non-root spins
    L = shape.leaf_count
    if m + L > _MAX_FREE_SPINS:
        raise CapacityError(f"{m + L} free spins exceed the enumeration limit")
    configs = spin_configs(m + L)
    full = np.empty((configs.shape[0], shape.node_count), dtype=np.int8)
    full[:, 0] = root_spin
    full[:, 1:shape.leaf_start] = configs[:, :m]
    full[:, shape.leaf_start:] = configs[:, m:]
    w = config_weights(shape, epsilon, full)
    # configuration index = leaf_index * 2**m + internal_index, so grouping
    # by leaf configuration is a reshape
    law = w.reshape(1 << L, 1 << m).sum(axis=1)
    return law


def sample_model_N_many(params: BroadcastParams, psi: float, n: int,
                        rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """n draws of (root spin, leaves passed through a symmetric channel).

    Each leaf is flipped independently with probability (1 - psi)/2;
    psi = 1 leaves the spins untouched.
    """
    if not 0.0 < psi <= 1.0:
        raise ValueError(f"psi must lie in (0, 1], got {psi}")
    shape = params.shape
    spins = sample_many(params, n, rng)
    leaves = spins[:, shape.leaf_start:]
    flip = rng.random(leaves.shape) < (1.0 - psi) / 2.0
    noisy = np.where(flip, -leaves, leaves)
    return spins[:, 0].copy(), noisy


def sample_model_N(params: BroadcastParams, psi: float,
                   rng: np.random.Generator | None = None) -> tuple[int, SpinVector]:
    """One noisy-leaf draw; see sample_model_N_many."""
    if rng is None:
        rng = seeds.stream(params.seed, "broadcast.model_N")
    roots, noisy = sample_model_N_many(params, psi, 1, rng)
    return int(roots[0]), SpinVector(noisy[0], start=params.shape.leaf_start)
