import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from treecast import seeds
from treecast.broadcast import BroadcastParams, sample_many
from treecast.inference import (
    Belief,
    LeafChannel,
    bp_all_levels,
    bp_combine,
    bp_root,
    leaf_logratios,
    posterior_oracle,
    tv_from_biases,
)
from treecast.tree import SpinVector, TreeShape


def leaves_of(text, shape):
    return SpinVector.from_string(text, start=shape.leaf_start)


class TestBelief:
    def test_round_trip(self):
        b = Belief.from_bias(0.3)
        assert Belief.from_logratio(b.logratio).bias == pytest.approx(0.3, abs=1e-15)

    def test_saturated(self):
        assert Belief.from_bias(1.0).logratio == -np.inf
        assert Belief.from_bias(-1.0).logratio == np.inf

    def test_range_check(self):
        with pytest.raises(ValueError):
            Belief.from_bias(1.2)


def test_leaf_channel_validates():
    LeafChannel(1.0)
    with pytest.raises(ValueError):
        LeafChannel(0.0)
    with pytest.raises(ValueError):
        LeafChannel(1.1)


class TestBpCombine:
    def test_zero_children_stay_zero(self):
        out = bp_combine([Belief.from_bias(0.0)] * 3, 0.5)
        assert out.bias == 0.0

    def test_single_child_scales_by_epsilon(self):
        for eps in (0.2, 0.5, 0.9):
            for x in (-0.8, 0.0, 0.3, 1.0):
                out = bp_combine([Belief.from_bias(x)], eps)
                assert out.bias == pytest.approx(eps * x, abs=1e-12)

    def test_two_saturated_children(self):
        # d=2, eps=0.5, both children certain +1:
        # bias = 2*0.5 / (1 + 0.25) = 0.8
        out = bp_combine([Belief.from_bias(1.0), Belief.from_bias(1.0)], 0.5)
        assert out.bias == pytest.approx(0.8, abs=1e-12)

    def test_sign_antisymmetry(self):
        kids = [Belief.from_bias(x) for x in (0.7, -0.2, 0.5)]
        flipped = [Belief.from_bias(-x) for x in (0.7, -0.2, 0.5)]
        assert bp_combine(kids, 0.4).bias == pytest.approx(
            -bp_combine(flipped, 0.4).bias, abs=1e-14)

    @given(st.floats(-0.99, 0.99), st.floats(-0.99, 0.99),
           st.floats(0.05, 0.95))
    def test_monotone_in_each_child(self, x, y, eps):
        """Raising one child's bias never lowers the parent's."""
        lo = bp_combine([Belief.from_bias(min(x, y)), Belief.from_bias(0.1)], eps)
        hi = bp_combine([Belief.from_bias(max(x, y)), Belief.from_bias(0.1)], eps)
        assert hi.bias >= lo.bias - 1e-12


def test_leaf_logratios_pinning():
    L = leaf_logratios(np.array([1, -1], dtype=np.int8), 1.0)
    assert L[0] == -np.inf and L[1] == np.inf
    L = leaf_logratios(np.array([1, -1], dtype=np.int8), 0.5)
    assert L[0] == pytest.approx(np.log(0.5 / 1.5), abs=1e-15)
    assert L[1] == -L[0]


def test_bp_root_depth_one():
    # b=3, t=1, eps=0.3, leaves ++-: each observed child contributes a
    # factor, net one plus-leaf worth: bias = 0.3
    shape = TreeShape(3, 1)
    out = bp_root(leaves_of("++-", shape), 0.3, shape)
    assert out.bias == pytest.approx(0.3, abs=1e-12)


def test_bp_root_sign_symmetry():
    shape = TreeShape(2, 3)
    rng = seeds.stream(5, "test.bp_sign")
    for _ in range(20):
        arr = rng.choice(np.array([-1, 1], dtype=np.int8), size=8)
        v = SpinVector(arr, start=shape.leaf_start)
        a = bp_root(v, 0.45, shape).bias
        b = bp_root(v.negated(), 0.45, shape).bias
        assert a == pytest.approx(-b, abs=1e-14)


def test_bp_root_rejects_wrong_length():
    shape = TreeShape(2, 2)
    with pytest.raises(ValueError):
        bp_root(SpinVector.from_string("++"), 0.5, shape)


def test_bp_all_levels_structure():
    shape = TreeShape(2, 3)
    leaves = leaves_of("+-++--+-", shape)
    levels = bp_all_levels(leaves, 0.35, shape)
    assert [len(h) for h in levels.logratios] == [8, 4, 2, 1]
    # height 0 is the leaf initialization itself
    assert np.array_equal(levels.logratios[0],
                          leaf_logratios(leaves.to_array(), 1.0))
    # the root entry is bit-identical to the direct sweep
    assert levels.root.logratio == bp_root(leaves, 0.35, shape).logratio


def test_bp_all_levels_iterated_closed_form():
    # all-plus leaves: every node at height h has the same belief, got by
    # iterating x -> combine of b copies starting from certainty
    shape = TreeShape(2, 3)
    eps = 0.5
    levels = bp_all_levels(leaves_of("++++++++", shape), eps, shape)
    x = Belief.from_bias(1.0)
    for h in range(1, 4):
        x = bp_combine([x, x], eps)
        biases = levels.biases(h)
        assert np.allclose(biases, x.bias, atol=1e-12)


def test_posterior_oracle_zero_epsilon():
    shape = TreeShape(2, 2)
    out = posterior_oracle(leaves_of("++-+", shape), 1e-12, shape)
    assert out.bias == pytest.approx(0.0, abs=1e-9)


def test_posterior_oracle_pinned_value():
    # b=2 t=2 eps=0.5 leaves (+,+,+,-); enumeration gives exactly 2/5
    shape = TreeShape(2, 2)
    out = posterior_oracle(leaves_of("+++-", shape), 0.5, shape)
    assert out.bias == pytest.approx(0.4, abs=1e-12)


def test_bp_matches_oracle_everywhere():
    """200 random instances, max |bp - oracle| <= 1e-12."""
    rng = seeds.stream(6, "test.bp_oracle")
    worst = 0.0
    for i in range(200):
        b = int(rng.integers(2, 4))
        t = int(rng.integers(1, 3 if b == 3 else 4))
        shape = TreeShape(b, t)
        eps = float(rng.uniform(0.05, 0.95))
        psi = 1.0 if i % 2 == 0 else float(rng.uniform(0.1, 1.0))
        arr = rng.choice(np.array([-1, 1], dtype=np.int8), size=shape.leaf_count)
        leaves = SpinVector(arr, start=shape.leaf_start)
        channel = LeafChannel(psi)
        got = bp_root(leaves, eps, shape, channel).bias
        want = posterior_oracle(leaves, eps, shape, channel).bias
        worst = max(worst, abs(got - want))
    assert worst <= 1e-12, worst


def test_oracle_agrees_with_conditional_frequencies():
    # sanity against the forward process: P(root=+ | leaves) via Bayes on
    # enumerated leaf laws equals the oracle bias
    from treecast.broadcast import enumerate_leaf_law

    shape = TreeShape(2, 2)
    eps = 0.6
    plus = enumerate_leaf_law(eps, shape, root_spin=1)
    minus = enumerate_leaf_law(eps, shape, root_spin=-1)
    for idx in range(16):
        bits = [(idx >> j) & 1 for j in range(4)]
        arr = np.array([1 if b else -1 for b in bits], dtype=np.int8)
        leaves = SpinVector(arr, start=shape.leaf_start)
        want = (plus[idx] - minus[idx]) / (plus[idx] + minus[idx])
        got = posterior_oracle(leaves, eps, shape).bias
        assert got == pytest.approx(want, abs=1e-12)


def test_tv_from_biases():
    assert tv_from_biases(Belief.from_bias(0.8), Belief.from_bias(0.8)) == 0.0
    assert tv_from_biases(Belief.from_bias(1.0), Belief.from_bias(-1.0)) == 1.0
    assert tv_from_biases(Belief.from_bias(0.5), Belief.from_bias(0.1)) == (
        pytest.approx(0.2, abs=1e-15))


def test_tv_near_saturation_uses_logratios():
    a = Belief.from_logratio(-40.0)
    b = Belief.from_logratio(-41.0)
    tv = tv_from_biases(a, b)
    # bias subtraction would give 0 at float precision; the true gap is
    # |e^-40 - e^-41| ~ 2.7e-18
    assert 0 < tv < 1e-17
