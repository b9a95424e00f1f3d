"""Marking/flipping couplings between opposite-root leaf distributions.

Convention used throughout this module: the underlying broadcast process
has parent-child agreement probability 1/2 + epsilon, i.e. copy bias
2*epsilon in BroadcastParams terms. The per-node flip rate

    xi = 4*epsilon / (1 + 2*epsilon)

is exactly the value that makes an unmarked node's output marginal match
that process: P(output -1) = (1/2 - eps) + (1/2 + eps)*xi = 1/2 + eps,
which is the minus-root agreement probability. xi < 1 forces eps < 1/2.

The construction takes leaves x drawn from the plus-root process,
resamples the internal spins conditionally, then walks down from a
flipped root: marked nodes freeze to the conditioned labeling, unmarked
minus nodes pass through, and unmarked plus nodes flip with probability
xi (staying unmarked) or freeze their subtree. The leaf restriction of
the result is distributed close to the minus-root process while differing
from x in few coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import seeds
from .broadcast import BroadcastParams, _conditional_internal_batch, sample_many
from .tree import CorruptionMask, SpinVector, TreeShape


@dataclass(frozen=True)
class CouplingParams:
    """Corruption-rate parameter epsilon < 1/2, tree shape, master seed."""

    epsilon: float
    shape: TreeShape
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.epsilon < 0.5:
            raise ValueError(
                f"epsilon must lie in (0, 1/2) so the flip rate stays below 1, "
                f"got {self.epsilon}")

    @property
    def xi(self) -> float:
        """Per-node flip rate 4*eps/(1+2*eps), recomputed on access."""
        return 4.0 * self.epsilon / (1.0 + 2.0 * self.epsilon)

    @property
    def edge_bias(self) -> float:
        """Copy bias of the broadcast process being coupled."""
        return 2.0 * self.epsilon


@dataclass(frozen=True)
class CouplingOutcome:
    """One coupled draw: inputs, outputs, and full bookkeeping."""

    x: SpinVector              # input leaves (plus-root draw)
    pi: SpinVector             # output leaves (the coupled minus-root draw)
    flips: tuple[int, ...]     # leaf offsets where pi differs from x
    y: SpinVector              # conditioned labeling, all nodes
    y_prime: SpinVector        # flipped labeling, all nodes
    marks: np.ndarray          # per-node mark flags


@dataclass(frozen=True)
class FractionOutcome:
    """fraction_adversary result: output leaves plus which branch ran."""

    leaves: SpinVector
    coupled: bool              # False when the flip budget was exceeded
    flip_count: int
    diagnostics: dict[str, float]


class _CoupleBatch:
    __slots__ = ("x", "y", "y_prime", "marked", "flips")

    def __init__(self, x, y, y_prime, marked, flips):
        self.x = x
        self.y = y
        self.y_prime = y_prime
        self.marked = marked
        self.flips = flips

    @property
    def pi(self) -> np.ndarray:
        return self.y_prime[:, -self.x.shape[1]:]


def couple_batch(params: CouplingParams, x: np.ndarray, rng: np.random.Generator,
                 leaf_coins: np.ndarray | None = None) -> _CoupleBatch:
    """Vectorized coupling over a batch of input leaf rows.

    x is (n, leaf_count) int8 from the plus-root process at copy bias
    2*epsilon. leaf_coins, when given, replaces the leaf level's flip
    coins with externally supplied booleans (one per leaf); internal
    levels always draw from rng. Two per-trial guards raise
    AssertionError if the construction ever breaks its own rules.
    """
    shape = params.shape
    n, L = x.shape
    bparams = BroadcastParams(params.edge_bias, shape)
    roots = np.ones(n, dtype=np.int8)
    y = _conditional_internal_batch(bparams, x, roots, rng)

    y_prime = y.copy()
    y_prime[:, 0] = -1
    marked = np.zeros((n, shape.node_count), dtype=bool)
    xi = params.xi
    survived = np.ones((n, 1), dtype=bool)  # the root flip leaves it unmarked
    for level in range(1, shape.depth + 1):
        start = shape.level_start(level)
        size = shape.level_size(level)
        y_lvl = y[:, start:start + size]
        open_lvl = np.repeat(survived, shape.arity, axis=1)
        if level == shape.depth and leaf_coins is not None:
            coins = leaf_coins
        else:
            coins = rng.random((n, size)) < xi
        flip_here = open_lvl & (y_lvl == 1) & coins
        y_prime[:, start:start + size] = np.where(flip_here, -1, y_lvl)
        marked[:, start:start + size] = ~open_lvl
        survived = flip_here

    pi = y_prime[:, shape.leaf_start:]
    flips = pi != x

    if not np.array_equal(y[:, shape.leaf_start:], x):
        raise AssertionError("conditioned labeling disagrees with the input leaves")
    chain_clear = np.ones((n, 1), dtype=bool)
    for level in range(1, shape.depth + 1):
        start = shape.level_start(level)
        size = shape.level_size(level)
        chain_clear = (np.repeat(chain_clear, shape.arity, axis=1)
                       & ~marked[:, start:start + size])
    if (flips & ~chain_clear).any():
        raise AssertionError("a leaf was flipped below a marked ancestor")

    return _CoupleBatch(x, y, y_prime, marked, flips)


def couple_once(params: CouplingParams, x: SpinVector,
                rng: np.random.Generator | None = None) -> CouplingOutcome:
    """One coupled draw for input leaves x from the plus-root process."""
    shape = params.shape
    if len(x) != shape.leaf_count:
        raise ValueError(f"expected {shape.leaf_count} leaves, got {len(x)}")
    if rng is None:
        rng = seeds.stream(params.seed, "coupling.couple_once")
    batch = couple_batch(params, x.to_array()[None, :], rng)
    flips = tuple(int(i) for i in np.flatnonzero(batch.flips[0]))
    return CouplingOutcome(
        x=x,
        pi=SpinVector(batch.pi[0], start=shape.leaf_start),
        flips=flips,
        y=SpinVector(batch.y[0]),
        y_prime=SpinVector(batch.y_prime[0]),
        marks=batch.marked[0],
    )


def _diagnostics(params: CouplingParams, rho: float) -> dict[str, float]:
    shape = params.shape
    leaves = shape.leaf_count
    return {
        "expected_flip_bound": params.xi ** shape.depth * leaves,
        "budget": rho * leaves,
        "large_deviation_threshold": (4.0 * math.e * params.epsilon) ** shape.depth * leaves,
    }


def fraction_adversary_batch(params: CouplingParams, rho: float, x: np.ndarray,
                             rng: np.random.Generator
                             ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized budgeted coupling: rows whose flip count fits within
    rho * leaf_count return the coupled leaves, the rest return x
    unchanged. Returns (leaves, coupled, flip_counts)."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    batch = couple_batch(params, x, rng)
    flip_counts = batch.flips.sum(axis=1)
    coupled = flip_counts <= rho * params.shape.leaf_count
    out = np.where(coupled[:, None], batch.pi, x)
    return out, coupled, flip_counts


def fraction_adversary(params: CouplingParams, rho: float, x: SpinVector,
                       rng: np.random.Generator | None = None) -> FractionOutcome:
    """Budgeted coupling: the coupled leaves when the flip count fits the
    rho budget, the input unchanged otherwise."""
    shape = params.shape
    if rng is None:
        rng = seeds.stream(params.seed, "coupling.fraction")
    out, coupled, counts = fraction_adversary_batch(
        params, rho, x.to_array()[None, :], rng)
    return FractionOutcome(
        leaves=SpinVector(out[0], start=shape.leaf_start),
        coupled=bool(coupled[0]),
        flip_count=int(counts[0]),
        diagnostics=_diagnostics(params, rho),
    )


def semirandom_coupling_adversary(params: CouplingParams, mask: CorruptionMask,
                                  x: SpinVector,
                                  rng: np.random.Generator | None = None
                                  ) -> CouplingOutcome:
    """Coupling whose leaf-level coins are the mask's permission bits.

    Requires the mask density to equal xi (computed the same way), so a
    permitted bit is in law exactly the xi-coin; every flip then lands on
    a permitted site by construction.
    """
    if mask.density != params.xi:
        raise ValueError(
            f"mask density {mask.density!r} must equal the flip rate {params.xi!r}")
    shape = params.shape
    if len(x) != shape.leaf_count or len(mask) != shape.leaf_count:
        raise ValueError(f"expected {shape.leaf_count} leaves")
    if rng is None:
        rng = seeds.stream(params.seed, "coupling.semirandom")
    batch = couple_batch(params, x.to_array()[None, :], rng,
                         leaf_coins=mask.flags[None, :])
    flips = tuple(int(i) for i in np.flatnonzero(batch.flips[0]))
    return CouplingOutcome(
        x=x,
        pi=SpinVector(batch.pi[0], start=shape.leaf_start),
        flips=flips,
        y=SpinVector(batch.y[0]),
        y_prime=SpinVector(batch.y_prime[0]),
        marks=batch.marked[0],
    )


def sample_input_leaves(params: CouplingParams, n: int,
                        rng: np.random.Generator) -> np.ndarray:
    """n rows of leaves from the plus-root process this module couples
    (copy bias 2*epsilon), as (n, leaf_count) int8."""
    bparams = BroadcastParams(params.edge_bias, params.shape)
    spins = sample_many(bparams, n, rng, root_spins=1)
    return spins[:, params.shape.leaf_start:]
