import numpy as np
import pytest

from treecast import seeds
from treecast.broadcast import (
    BroadcastParams,
    enumerate_conditional,
    enumerate_leaf_law,
    sample_internal_given_leaves,
    sample_many,
    sample_model_N_many,
    sample_tree,
)
from treecast.tree import SpinVector, TreeShape, parent_indices


def test_params_validate_epsilon():
    shape = TreeShape(2, 2)
    BroadcastParams(1.0 - 1e-15, shape)
    for bad in (0.0, -0.1, 1.0, 1.5):
        with pytest.raises(ValueError):
            BroadcastParams(bad, shape)


def test_near_one_epsilon_copies_exactly():
    # at 1 - 1e-15 every edge copies; a plus root forces an all-plus tree
    shape = TreeShape(2, 3)
    params = BroadcastParams(1.0 - 1e-15, shape)
    rng = seeds.stream(0, "test.copy")
    spins = sample_many(params, 100, rng, root_spins=1)
    assert np.all(spins == 1)


def test_edge_agreement_rate():
    """Each edge agrees with probability (1 + eps)/2."""
    shape = TreeShape(2, 2)
    rng = seeds.stream(1, "test.agreement")
    parents = parent_indices(shape)
    for eps, want in ((0.0 + 1e-12, 0.5), (0.3, 0.65)):
        spins = sample_many(BroadcastParams(eps, shape), 170000, rng)
        agree = spins[:, 1:] == spins[:, parents[1:]]
        rate = agree.mean()  # about 1e6 edges
        assert abs(rate - want) < 0.005, (eps, rate)


def test_sample_tree_and_fixed_root():
    shape = TreeShape(3, 2)
    params = BroadcastParams(0.4, shape)
    tree = sample_tree(params, root_spin=-1, rng=seeds.stream(2, "test.tree"))
    assert tree.root_spin == -1
    assert len(tree.leaves()) == 9
    assert tree.leaves().start == shape.leaf_start


def test_conditional_table_uniform_at_zero_bias():
    # epsilon -> 0: internal spins are uniform regardless of the leaves
    shape = TreeShape(2, 2)
    leaves = SpinVector.from_string("++-+", start=shape.leaf_start)
    table = enumerate_conditional(BroadcastParams(1e-12, shape), leaves, root_spin=1)
    assert np.allclose(table.probs, 0.25, atol=1e-9)


def test_conditional_table_all_plus():
    # b=2 t=2, eps=0.5, plus root, all-plus leaves: the all-plus internal
    # configuration has weight 0.75^6 of Z = 784/4096, so 729/784
    shape = TreeShape(2, 2)
    leaves = SpinVector(np.ones(4, dtype=np.int8), start=shape.leaf_start)
    table = enumerate_conditional(BroadcastParams(0.5, shape), leaves, root_spin=1)
    assert table.probs.sum() == pytest.approx(1.0, abs=1e-12)
    both_plus = [p for cfg, p in zip(table.configs, table.probs) if all(cfg == 1)]
    assert both_plus[0] == pytest.approx(729 / 784, abs=1e-12)


def test_conditional_sampler_matches_enumeration():
    shape = TreeShape(2, 2)
    params = BroadcastParams(0.4, shape)
    leaves = SpinVector(np.ones(4, dtype=np.int8), start=shape.leaf_start)
    table = enumerate_conditional(params, leaves, root_spin=1)
    rng = seeds.stream(3, "test.conditional")
    counts = {tuple(cfg): 0 for cfg in table.configs}
    n = 100000
    for _ in range(n):
        tree = sample_internal_given_leaves(params, leaves, 1, rng)
        spins = tree.spins.to_array()
        assert spins[0] == 1 and np.array_equal(spins[3:], leaves.to_array())
        counts[tuple(spins[1:3])] += 1
    l1 = sum(abs(counts[tuple(cfg)] / n - p)
             for cfg, p in zip(table.configs, table.probs))
    assert l1 < 0.02


def test_leaf_law_sums_and_symmetry():
    shape = TreeShape(2, 2)
    plus = enumerate_leaf_law(0.3, shape, root_spin=1)
    minus = enumerate_leaf_law(0.3, shape, root_spin=-1)
    assert plus.sum() == pytest.approx(1.0, abs=1e-12)
    # global flip maps one law onto the other: index i <-> complement
    assert np.allclose(plus, minus[::-1], atol=1e-14)


def test_model_N_channel_rate():
    # psi=0.5, eps=0.6, b=2, t=1: P(observed leaf = root) =
    # (1+eps)/2 * (1+psi)/2 + (1-eps)/2 * (1-psi)/2 = 0.65
    shape = TreeShape(2, 1)
    params = BroadcastParams(0.6, shape)
    rng = seeds.stream(4, "test.modelN")
    roots, observed = sample_model_N_many(params, 0.5, 500000, rng)
    rate = (observed == roots[:, None]).mean()  # 1e6 leaf observations
    assert abs(rate - 0.65) < 0.005, rate
