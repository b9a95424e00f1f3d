import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from treecast import seeds
from treecast.adversary import (
    Attack,
    CFlip,
    FractionRho,
    SemirandomRho,
    SpreadCK,
    attack_bruteforce,
    attack_greedy,
    attack_signpush,
    attack_spread_signpush,
    sample_mask,
    validate_attack,
)
from treecast.broadcast import BroadcastParams, sample_tree
from treecast.inference import bp_root
from treecast.tree import CapacityError, CorruptionMask, SpinVector, TreeShape


def leaves_of(text, shape):
    return SpinVector.from_string(text, start=shape.leaf_start)


def test_mask_density_zero_and_count():
    assert sample_mask(0.0, 64, seed=0).popcount == 0
    rng = seeds.stream(7, "test.mask")
    mask = sample_mask(0.25, 1000000, rng=rng)
    # Bernoulli(0.25) over 1e6 sites: 4 sigma is about 1732
    assert abs(mask.popcount - 250000) < 4 * np.sqrt(187500)
    with pytest.raises(ValueError):
        sample_mask(1.0, 10)


class TestValidate:
    shape = TreeShape(2, 2)

    def test_cflip_budget(self):
        leaves = leaves_of("++++", self.shape)
        ok = Attack((0, 1), leaves_of("--++", self.shape))
        assert validate_attack(ok, CFlip(2)) is None
        over = Attack((0, 1, 2), leaves_of("---+", self.shape))
        v = validate_attack(over, CFlip(2))
        assert v is not None and v.kind == "budget-exceeded"

    def test_semirandom_needs_permitted_sites(self):
        mask = CorruptionMask(np.array([True, False, True, False]), 0.5)
        bad = Attack((1,), leaves_of("+-++", self.shape))
        v = validate_attack(bad, SemirandomRho(0.5), mask=mask)
        assert v is not None and v.kind == "unpermitted-flip" and v.location == 1
        good = Attack((0, 2), leaves_of("-+-+", self.shape))
        assert validate_attack(good, SemirandomRho(0.5), mask=mask) is None

    def test_spread_per_block_cap(self):
        # b=2 t=2, k=1 blocks are leaf pairs; two flips in one block break c=1
        bad = Attack((0, 1), leaves_of("--++", self.shape))
        v = validate_attack(bad, SpreadCK(1, 1), shape=self.shape)
        assert v is not None and v.kind == "block-budget-exceeded"
        ok = Attack((0, 2), leaves_of("-+-+", self.shape))
        assert validate_attack(ok, SpreadCK(1, 1), shape=self.shape) is None

    def test_fraction_budget(self):
        attack = Attack((0, 1, 2), leaves_of("---+", self.shape))
        assert validate_attack(attack, FractionRho(0.75)) is None
        v = validate_attack(attack, FractionRho(0.5))
        assert v is not None and v.kind == "budget-exceeded"

    def test_duplicate_and_out_of_range(self):
        dup = Attack((1, 1), leaves_of("++++", self.shape))
        assert validate_attack(dup, CFlip(3)).kind == "duplicate-flip"
        out = Attack((7,), leaves_of("++++", self.shape))
        assert validate_attack(out, CFlip(3)).kind == "index-out-of-range"


def test_signpush_flips_only_permitted_disagreements():
    shape = TreeShape(2, 2)
    leaves = leaves_of("+-+-", shape)
    mask = CorruptionMask(np.array([True, True, False, False]), 0.5)
    atk = attack_signpush(leaves, mask, target_sign=-1)
    assert atk.flipped == (0,)
    assert atk.leaves.to_string() == "--+-"
    # pushing toward +1 flips the permitted minus leaf instead
    atk = attack_signpush(leaves, mask, target_sign=1)
    assert atk.flipped == (1,)


def test_bruteforce_depth_one_hand_case():
    # t=1 b=3 eps=0.5 leaves +++, only leaf 0 permitted. Flipping it moves
    # the root bias from (3 plus leaves) to (2 plus, 1 minus), the larger
    # damage, so the maximizer flips it.
    shape = TreeShape(3, 1)
    leaves = leaves_of("+++", shape)
    mask = CorruptionMask(np.array([True, False, False]), 0.1)
    atk = attack_bruteforce(leaves, mask, 0.5, shape)
    assert atk.flipped == (0,)
    assert atk.leaves.to_string() == "-++"


def test_bruteforce_capacity_guard():
    shape = TreeShape(2, 5)
    leaves = SpinVector(np.ones(32, dtype=np.int8), start=shape.leaf_start)
    mask = CorruptionMask(np.ones(32, dtype=bool), 0.9)
    with pytest.raises(CapacityError):
        attack_bruteforce(leaves, mask, 0.5, shape)


def _random_instance(rng, shape, eps, rho):
    params = BroadcastParams(eps, shape)
    tree = sample_tree(params, rng=rng)
    mask = sample_mask(rho, shape.leaf_count, rng=rng)
    return tree.leaves(), mask


def test_bruteforce_dominates_greedy():
    """The exact maximizer is never worse, over random small instances."""
    shape = TreeShape(2, 3)
    eps = 0.4
    rng = seeds.stream(8, "test.brute_vs_greedy")
    for _ in range(40):
        leaves, mask = _random_instance(rng, shape, eps, 0.4)
        if mask.popcount > 12:
            continue
        clean = bp_root(leaves, eps, shape).bias
        g = attack_greedy(leaves, mask, eps, shape)
        b = attack_bruteforce(leaves, mask, eps, shape)
        dg = abs(bp_root(g.leaves, eps, shape).bias - clean)
        db = abs(bp_root(b.leaves, eps, shape).bias - clean)
        assert db >= dg - 1e-12
        assert dg >= 0.0


def test_greedy_to_bruteforce_ratio_regression():
    # b=3 t=4, eps=0.45, rho=eps/4, 100 instances with 1..12 permitted
    # leaves. Statistics frozen from a fixed-seed reference run: greedy
    # finds the exact optimum in 3/4 of the instances.
    shape = TreeShape(3, 4)
    eps = 0.45
    rho = eps / 4.0
    ratios = []
    i = 0
    while len(ratios) < 100:
        rng = np.random.default_rng(seeds.stream(7, "greedy_vs_brute", i))
        i += 1
        tree = sample_tree(BroadcastParams(eps, shape), rng=rng)
        mask = sample_mask(rho, shape.leaf_count, rng=rng)
        if not 1 <= mask.popcount <= 12:
            continue
        leaves = tree.leaves()
        clean = bp_root(leaves, eps, shape).bias
        g = attack_greedy(leaves, mask, eps, shape)
        b = attack_bruteforce(leaves, mask, eps, shape)
        dg = abs(bp_root(g.leaves, eps, shape).bias - clean)
        db = abs(bp_root(b.leaves, eps, shape).bias - clean)
        ratios.append(dg / db if db > 1e-15 else 1.0)
    ratios = np.asarray(ratios)
    assert float(np.median(ratios)) == pytest.approx(1.0, abs=1e-12)
    assert float(np.mean(ratios > 1 - 1e-9)) == pytest.approx(0.75, abs=1e-12)
    assert float(ratios.min()) == pytest.approx(0.2635936289337674, abs=1e-9)


def test_spread_signpush_hand_case():
    # b=2 t=2, all-minus leaves, target +1, c=1 per height-1 block:
    # lowest disagreeing leaf of each pair flips, so offsets 0 and 2
    shape = TreeShape(2, 2)
    atk = attack_spread_signpush(leaves_of("----", shape), SpreadCK(1, 1), 1, shape)
    assert atk.flipped == (0, 2)
    assert atk.leaves.to_string() == "+-+-"
    assert validate_attack(atk, SpreadCK(1, 1), shape=shape) is None


def test_attacks_respect_their_budgets():
    shape = TreeShape(2, 3)
    eps = 0.45
    rng = seeds.stream(9, "test.budgets")
    for _ in range(25):
        leaves, mask = _random_instance(rng, shape, eps, 0.3)
        sp = attack_signpush(leaves, mask, -1)
        assert validate_attack(sp, SemirandomRho(0.3), mask=mask) is None
        if 0 < mask.popcount <= 10:
            bf = attack_bruteforce(leaves, mask, eps, shape)
            gd = attack_greedy(leaves, mask, eps, shape)
            for atk in (bf, gd):
                assert validate_attack(atk, SemirandomRho(0.3), mask=mask) is None
        spread = attack_spread_signpush(leaves, SpreadCK(2, 2), 1, shape)
        assert validate_attack(spread, SpreadCK(2, 2), shape=shape) is None


@given(st.integers(0, 2 ** 8 - 1), st.integers(0, 2 ** 8 - 1))
@settings(max_examples=40, deadline=None)
def test_objective_sign_equivariance(leaf_bits, mask_bits):
    """Negating leaves and target together yields the mirrored attack."""
    shape = TreeShape(2, 3)
    arr = np.array([1 if (leaf_bits >> j) & 1 else -1 for j in range(8)],
                   dtype=np.int8)
    flags = np.array([(mask_bits >> j) & 1 == 1 for j in range(8)])
    if not 0 < flags.sum() <= 10:
        return
    leaves = SpinVector(arr, start=shape.leaf_start)
    mask = CorruptionMask(flags, 0.5)
    a = attack_bruteforce(leaves, mask, 0.45, shape, objective="push", target=-1)
    b = attack_bruteforce(leaves.negated(), mask, 0.45, shape,
                          objective="push", target=1)
    assert a.flipped == b.flipped
    assert a.leaves.to_array().tolist() == (-b.leaves.to_array()).tolist()
