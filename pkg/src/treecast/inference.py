"""Exact root-posterior computation by belief propagation.

The combine rule for a node with children carrying biases X_1..X_d is

    BP(X_1,...,X_d) = (prod(1+eps*X_i) - prod(1-eps*X_i))
                      / (prod(1+eps*X_i) + prod(1-eps*X_i)),

computed here in log-ratio form: with L_i = log((1-X_i)/(1+X_i)) the
output's log ratio is the sum of log((1-eps*X_i)/(1+eps*X_i)) terms, each
evaluated from L_i directly (numerics.child_logterms) so saturated inputs
(|X| = 1, L = -+inf) stay exact. On trees this recursion is the exact
posterior, which the enumeration oracle below verifies independently.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import numerics
from .broadcast import config_weights, spin_configs
from .tree import CapacityError, SpinVector, TreeShape

# beliefs this close to +-1 are treated as saturated by tv_from_biases
_SATURATION_EDGE = 1.0 - 1e-9


@dataclass(frozen=True)
class Belief:
    """Posterior over one spin: bias B with P(+1) = (1+B)/2, plus the log
    ratio L = log((1-B)/(1+B)) carried alongside for precision.

    Construct through from_bias or from_logratio so the two stay
    consistent; near saturation the log ratio is the meaningful field.
    """

    bias: float
    logratio: float

    @classmethod
    def from_bias(cls, bias: float) -> "Belief":
        if not -1.0 <= bias <= 1.0:
            raise ValueError(f"bias must lie in [-1, 1], got {bias}")
        return cls(float(bias), numerics.logratio_from_bias(bias))

    @classmethod
    def from_logratio(cls, logratio: float) -> "Belief":
        return cls(numerics.bias_from_logratio(logratio), float(logratio))


@dataclass(frozen=True)
class LeafChannel:
    """Fidelity of the leaf observations: a leaf's true spin is seen
    through a symmetric channel that preserves it with probability
    (1 + psi)/2. psi = 1 is a perfectly observed leaf."""

    psi: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.psi <= 1.0:
            raise ValueError(f"psi must lie in (0, 1], got {self.psi}")


def bp_combine(children: Sequence[Belief], epsilon: float) -> Belief:
    """Combine child beliefs into their parent's belief."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    L = np.asarray([c.logratio for c in children], dtype=np.float64)
    return Belief.from_logratio(float(numerics.child_logterms(L, epsilon).sum()))


def leaf_logratios(leaves: np.ndarray, psi: float) -> np.ndarray:
    """Initial log ratios psi*sigma per leaf: log((1-psi*s)/(1+psi*s))."""
    base = numerics.logratio_from_bias(psi)  # -inf at psi = 1
    return np.where(np.asarray(leaves) == 1, base, -base)


def bp_root(leaves: SpinVector, epsilon: float, shape: TreeShape,
            channel: LeafChannel | None = None) -> Belief:
    """Exact root posterior given the leaf spins.

    Leaf beliefs start at psi * sigma_i and are combined level by level;
    with psi = 1 (the default channel) leaves are taken as observed truth.
    """
    if channel is None:
        channel = LeafChannel()
    if len(leaves) != shape.leaf_count:
        raise ValueError(f"expected {shape.leaf_count} leaves, got {len(leaves)}")
    L0 = leaf_logratios(leaves.to_array(), channel.psi)
    root_L = numerics.sweep_to_root(L0, shape.arity, shape.depth, epsilon)
    return Belief.from_logratio(float(root_L))


@dataclass(frozen=True)
class LevelBeliefs:
    """Beliefs for every node, grouped by height above the leaves.

    logratios[h] holds the log ratio of each height-h node in offset
    order; height 0 is the leaves, height depth is the root.
    """

    logratios: tuple[np.ndarray, ...]

    def belief(self, height: int, offset: int = 0) -> Belief:
        return Belief.from_logratio(float(self.logratios[height][offset]))

    def biases(self, height: int) -> np.ndarray:
        return numerics.bias_from_logratio(self.logratios[height])

    @property
    def root(self) -> Belief:
        return self.belief(len(self.logratios) - 1, 0)


def bp_all_levels(leaves: SpinVector, epsilon: float, shape: TreeShape,
                  channel: LeafChannel | None = None) -> LevelBeliefs:
    """As bp_root but retaining each intermediate level's beliefs."""
    if channel is None:
        channel = LeafChannel()
    if len(leaves) != shape.leaf_count:
        raise ValueError(f"expected {shape.leaf_count} leaves, got {len(leaves)}")
    L = leaf_logratios(leaves.to_array(), channel.psi)
    per_height = [L]
    for _ in range(shape.depth):
        terms = numerics.child_logterms(L, epsilon)
        L = terms.reshape(-1, shape.arity).sum(axis=1)
        per_height.append(L)
    return LevelBeliefs(tuple(per_height))


def posterior_oracle(leaves: SpinVector, epsilon: float, shape: TreeShape,
                     channel: LeafChannel | None = None) -> Belief:
    """Root posterior by direct summation over every hidden configuration.

    Independent of the message-passing code path: enumerates all internal
    spins (and, when psi < 1, the latent true leaf spins behind the noisy
    observations), multiplies edge and channel factors, and applies Bayes'
    rule. Ground truth for bp_root on trees small enough to enumerate.
    """
    if channel is None:
        channel = LeafChannel()
    if shape.node_count > 25:
        raise CapacityError(f"{shape.node_count} nodes exceed the enumeration limit")
    if len(leaves) != shape.leaf_count:
        raise ValueError(f"expected {shape.leaf_count} leaves, got {len(leaves)}")
    observed = leaves.to_array().astype(np.float64)
    m = shape.leaf_start - 1
    latent_leaves = channel.psi < 1.0
    free = m + (shape.leaf_count if latent_leaves else 0)
    configs = spin_configs(free)
    full = np.empty((configs.shape[0], shape.node_count), dtype=np.int8)
    full[:, 1:shape.leaf_start] = configs[:, :m]
    if latent_leaves:
        full[:, shape.leaf_start:] = configs[:, m:]
        channel_w = np.prod(
            (1.0 + channel.psi * configs[:, m:].astype(np.float64) * observed[None, :]) / 2.0,
            axis=1)
    else:
        full[:, shape.leaf_start:] = leaves.to_array()
        channel_w = np.ones(configs.shape[0])

    totals = {}
    for root_spin in (1, -1):
        full[:, 0] = root_spin
        totals[root_spin] = float((config_weights(shape, epsilon, full) * channel_w).sum())
    denom = totals[1] + totals[-1]
    if denom <= 0.0:
        raise ValueError("all configurations have zero probability")
    return Belief.from_bias((totals[1] - totals[-1]) / denom)


def tv_from_biases(x: Belief, z: Belief) -> float:
    """Total variation distance |x.bias - z.bias| / 2 between two spin laws.

    Away from saturation this is the literal half difference of the two
    bias fields. When either belief sits within 1e-9 of +-1, the same
    quantity is evaluated from the log ratios instead, where bias
    subtraction would round to zero; the two branches agree to ~1e-15 at
    the switchover.
    """
    if abs(x.bias) < _SATURATION_EDGE and abs(z.bias) < _SATURATION_EDGE:
        return abs(x.bias - z.bias) / 2.0
    return float(numerics.tv_from_logratios(x.logratio, z.logratio))
