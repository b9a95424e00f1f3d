import itertools
import math

import numpy as np
import pytest

from treecast import seeds
from treecast.adversary import SpreadCK, attack_spread_signpush
from treecast.broadcast import BroadcastParams, sample_tree
from treecast.inference import LeafChannel, bp_root, posterior_oracle, tv_from_biases
from treecast.robust import (
    RobustParams,
    default_block_height,
    noisy_leaves,
    noisy_posterior_AN,
    posterior_ratio_bound_check,
    spread_alg,
    spread_block_beliefs,
)
from treecast.tree import SpinVector, TreeShape


def leaves_of(text, shape):
    return SpinVector.from_string(text, start=shape.leaf_start)


class TestRobustParams:
    def test_psi_formula(self):
        rp = RobustParams(c=1, delta=0.2, epsilon=0.6, shape=TreeShape(3, 4), k=2)
        assert rp.psi == pytest.approx(min(0.2 / 8, math.log1p(0.05) / 4), abs=1e-15)
        # both budget inequalities hold by construction
        assert 4 * rp.psi * rp.c <= math.log1p(rp.delta / 4) + 1e-15
        assert 2 * rp.psi * rp.c <= rp.delta / 4 + 1e-15

    def test_default_block_height(self):
        assert default_block_height(1) == 3
        assert default_block_height(3) == 4
        rp = RobustParams(c=1, delta=0.5, epsilon=0.5, shape=TreeShape(2, 5))
        assert rp.block_height == 3

    def test_rejects_bad_inputs(self):
        shape = TreeShape(2, 3)
        with pytest.raises(ValueError):
            RobustParams(c=0, delta=0.5, epsilon=0.5, shape=shape)
        with pytest.raises(ValueError):
            RobustParams(c=1, delta=-1.0, epsilon=0.5, shape=shape)
        with pytest.raises(ValueError):
            RobustParams(c=1, delta=0.5, epsilon=1.0, shape=shape)


def test_noisy_leaves_rate():
    rng = seeds.stream(21, "test.noise_rate")
    arr = np.ones(200000, dtype=np.int8)
    out = noisy_leaves(arr, 0.4, rng)
    # flip probability (1 - 0.4)/2 = 0.3
    rate = (out != arr).mean()
    assert abs(rate - 0.3) < 0.005


def test_psi_one_is_plain_bp():
    shape = TreeShape(2, 3)
    leaves = leaves_of("+-++--+-", shape)
    out = noisy_posterior_AN(leaves, 0.45, 1.0, shape, seed=3)
    assert out.logratio == bp_root(leaves, 0.45, shape).logratio


def test_sign_equivariance_under_shared_noise():
    shape = TreeShape(2, 2)
    leaves = leaves_of("++-+", shape)
    a = noisy_posterior_AN(leaves, 0.5, 0.3, shape,
                           rng=seeds.stream(22, "test.an_sign"))
    b = noisy_posterior_AN(leaves.negated(), 0.5, 0.3, shape,
                           rng=seeds.stream(22, "test.an_sign"))
    assert a.bias == pytest.approx(-b.bias, abs=1e-14)


def test_output_bias_in_range():
    shape = TreeShape(3, 2)
    rng = seeds.stream(23, "test.an_range")
    for i in range(50):
        arr = rng.choice(np.array([-1, 1], dtype=np.int8), size=9)
        out = noisy_posterior_AN(SpinVector(arr, start=shape.leaf_start),
                                 0.7, 0.05, shape, seed=i)
        assert -1.0 <= out.bias <= 1.0


def test_noise_average_matches_mask_sum_oracle():
    """1e5 noise draws agree with the exact sum over all noise masks."""
    shape = TreeShape(2, 2)
    eps, psi = 0.5, 0.2
    leaves = leaves_of("+++-", shape)
    arr = leaves.to_array()
    channel = LeafChannel(psi)
    flip_p = (1.0 - psi) / 2.0
    exact = 0.0
    for bits in itertools.product((0, 1), repeat=4):
        nu = np.asarray(bits)
        weight = np.prod(np.where(nu == 1, flip_p, 1.0 - flip_p))
        flipped = SpinVector(np.where(nu == 1, -arr, arr), start=shape.leaf_start)
        exact += weight * posterior_oracle(flipped, eps, shape, channel).bias
    got = noisy_posterior_AN(leaves, eps, psi, shape,
                             rng=seeds.stream(24, "test.an_avg"),
                             noise_draws=100000).bias
    assert abs(got - exact) < 0.01, (got, exact)


class TestRatioBound:
    shape = TreeShape(2, 2)

    def test_empty_flip_set(self):
        leaves = leaves_of("+-++", self.shape)
        ratio, ok = posterior_ratio_bound_check(leaves, (), 0.4, 0.01, self.shape)
        assert ratio == pytest.approx(1.0, abs=1e-14)
        assert ok

    def test_small_psi_limit(self):
        # psi -> 0 erases the flip's influence, so the ratio tends to 1
        leaves = leaves_of("++++", self.shape)
        ratio, ok = posterior_ratio_bound_check(leaves, (2,), 0.4, 1e-6, self.shape)
        assert ratio == pytest.approx(1.0, abs=1e-4)
        assert ok

    def test_200_random_single_flip_pairs(self):
        # c=1, psi=0.01, eps=0.4: every exact ratio in [0.98, e^0.04]
        rng = seeds.stream(25, "test.ratio_pairs")
        lo, hi = 0.98, math.exp(0.04)
        for _ in range(200):
            arr = rng.choice(np.array([-1, 1], dtype=np.int8), size=4)
            flip = int(rng.integers(0, 4))
            ratio, ok = posterior_ratio_bound_check(
                SpinVector(arr, start=self.shape.leaf_start), (flip,),
                0.4, 0.01, self.shape)
            assert ok and lo <= ratio <= hi, ratio

    def test_flip_count_over_budget(self):
        leaves = leaves_of("++++", self.shape)
        with pytest.raises(ValueError):
            posterior_ratio_bound_check(leaves, (0, 1), 0.4, 0.01, self.shape, c=1)


def test_spread_full_depth_is_plain_noise_injection():
    shape = TreeShape(2, 2)
    rp = RobustParams(c=1, delta=0.2, epsilon=0.5, shape=shape, k=2)
    leaves = leaves_of("+--+", shape)
    a = spread_alg(leaves, rp, seed=5)
    b = noisy_posterior_AN(leaves, 0.5, rp.psi, shape,
                           rng=seeds.stream(5, "robust.spread.block", 0))
    assert a.logratio == b.logratio


def test_spread_block_independence():
    # reseeding changes block beliefs only through their own streams:
    # block i's belief depends on (seed, i), not on the other blocks
    shape = TreeShape(2, 3)
    rp = RobustParams(c=1, delta=0.5, epsilon=0.5, shape=shape, k=1)
    leaves = leaves_of("+-++--+-", shape)
    first = spread_block_beliefs(leaves, rp, seed=0)
    arr = leaves.to_array().copy()
    arr[:2] = -arr[:2]  # perturb only block 0's leaves
    second = spread_block_beliefs(
        SpinVector(arr, start=shape.leaf_start), rp, seed=0)
    assert first[0].bias != second[0].bias
    for a, b in zip(first[1:], second[1:]):
        assert a.logratio == b.logratio


def test_spread_rejects_blocks_taller_than_tree():
    rp = RobustParams(c=1, delta=0.5, epsilon=0.5, shape=TreeShape(2, 2), k=3)
    with pytest.raises(ValueError):
        spread_alg(leaves_of("++++", TreeShape(2, 2)), rp)


def test_spread_beats_plain_bp_under_heavy_spread_attack():
    """b=3 t=4, k=2, c=3: the attacker flips a third of every block; the
    noise-injected two-stage posterior stays near the truth while plain
    belief propagation is dragged away. Means are CI-separated."""
    shape = TreeShape(3, 4)
    eps, delta, c = 0.6, 0.2, 3
    params = BroadcastParams(eps, shape)
    rp = RobustParams(c=c, delta=delta, epsilon=eps, shape=shape, k=2)
    n = 600
    tv_spread = np.empty(n)
    tv_plain = np.empty(n)
    for i in range(n):
        rng = np.random.default_rng(seeds.stream(11, "c3", i))
        tree = sample_tree(params, rng=rng)
        clean = tree.leaves()
        truth = bp_root(clean, eps, shape)
        atk = attack_spread_signpush(clean, SpreadCK(c, 2), -tree.root_spin, shape)
        tv_plain[i] = tv_from_biases(truth, bp_root(atk.leaves, eps, shape))
        tv_spread[i] = tv_from_biases(truth, spread_alg(atk.leaves, rp, seed=i))
    half_width = lambda a: 1.96 * a.std(ddof=1) / np.sqrt(n)
    assert tv_spread.mean() + half_width(tv_spread) < (
        tv_plain.mean() - half_width(tv_plain)), (tv_spread.mean(), tv_plain.mean())
