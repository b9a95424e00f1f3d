"""Noise-injected inference that bounds the influence of adversarial flips.

The idea: deliberately pass the observed leaves through a symmetric
channel that flips each with probability (1 - psi)/2, then run belief
propagation under the matching channel model. With psi tied to the flip
budget c by

    psi = min(delta / (8 c), log(1 + delta/4) / (4 c)),

any c leaf flips can move the resulting posterior only by a
multiplicatively bounded factor (posterior_ratio_bound_check verifies the
exact bound instance by instance). The two-stage variant applies this on
every height-k block and combines the block posteriors with plain belief
propagation above, which tolerates a budget of c flips per block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import numerics, seeds
from .inference import Belief, LeafChannel, bp_root, posterior_oracle
from .tree import CapacityError, SpinVector, TreeShape, height_k_blocks


def default_block_height(c: int) -> int:
    return math.ceil(math.log2(c + 1)) + 2


@dataclass(frozen=True)
class RobustParams:
    """Budget c, accuracy target delta, process epsilon, shape, and the
    optional block height k (defaulted from c when omitted)."""

    c: int
    delta: float
    epsilon: float
    shape: TreeShape
    k: int | None = None

    def __post_init__(self) -> None:
        if self.c < 1:
            raise ValueError(f"flip budget c must be >= 1, got {self.c}")
        if not 0.0 < self.delta:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        psi = self.psi
        # both sides of the min imply these; a failure here is a formula bug
        if 4.0 * psi * self.c > math.log1p(self.delta / 4.0):
            raise AssertionError("psi violates 4*psi*c <= log(1 + delta/4)")
        if 2.0 * psi * self.c > self.delta / 4.0:
            raise AssertionError("psi violates 2*psi*c <= delta/4")

    @property
    def psi(self) -> float:
        """Injection fidelity, recomputed from (c, delta) on access."""
        return min(self.delta / (8.0 * self.c),
                   math.log1p(self.delta / 4.0) / (4.0 * self.c))

    @property
    def block_height(self) -> int:
        return self.k if self.k is not None else default_block_height(self.c)


def noisy_leaves(leaves: np.ndarray, psi: float, rng: np.random.Generator) -> np.ndarray:
    """Flip each entry independently with probability (1 - psi)/2."""
    flip = rng.random(leaves.shape) < (1.0 - psi) / 2.0
    return np.where(flip, -leaves, leaves).astype(np.int8)


def noisy_posterior_AN(leaves: SpinVector, epsilon: float, psi: float,
                       shape: TreeShape, seed: int = 0,
                       rng: np.random.Generator | None = None,
                       noise_draws: int = 1) -> Belief:
    """Root posterior after noise injection.

    Samples a fresh noise mask, XORs it into the leaves, and runs belief
    propagation with the psi leaf channel. noise_draws > 1 averages the
    resulting biases over that many independent masks (variance
    reduction; the default single draw is the plain algorithm).
    """
    if not 0.0 < psi <= 1.0:
        raise ValueError(f"psi must lie in (0, 1], got {psi}")
    if rng is None:
        rng = seeds.stream(seed, "robust.noise")
    arr = leaves.to_array()
    channel = LeafChannel(psi)
    if noise_draws == 1:
        noisy = SpinVector(noisy_leaves(arr, psi, rng), start=leaves.start)
        return bp_root(noisy, epsilon, shape, channel)
    biases = [
        bp_root(SpinVector(noisy_leaves(arr, psi, rng), start=leaves.start),
                epsilon, shape, channel).bias
        for _ in range(noise_draws)
    ]
    return Belief.from_bias(float(np.mean(biases)))


def posterior_ratio_bound_check(leaves: SpinVector, flips, epsilon: float,
                                psi: float, shape: TreeShape,
                                c: int | None = None) -> tuple[float, bool]:
    """Exact plus-posterior ratio across a flip set, against its bound.

    Computes P(root=+1 | flipped leaves) / P(root=+1 | leaves) under the
    psi-channel model by enumeration and reports whether it lies in
    [1 - 2*psi*c, exp(4*psi*c)], with c defaulting to len(flips).
    """
    if shape.leaf_count > 16:
        raise CapacityError(
            f"{shape.leaf_count} leaves exceed the exact-ratio enumeration limit")
    flips = tuple(int(i) for i in flips)
    c_eff = len(flips) if c is None else c
    if len(flips) > c_eff:
        raise ValueError(f"{len(flips)} flips exceed the stated budget c = {c_eff}")
    channel = LeafChannel(psi)
    arr = leaves.to_array()
    flipped = arr.copy()
    flipped[list(flips)] = -flipped[list(flips)]
    p_before = (1.0 + posterior_oracle(leaves, epsilon, shape, channel).bias) / 2.0
    p_after = (1.0 + posterior_oracle(
        SpinVector(flipped, start=leaves.start), epsilon, shape, channel).bias) / 2.0
    ratio = p_after / p_before
    lo = 1.0 - 2.0 * psi * c_eff
    hi = math.exp(4.0 * psi * c_eff)
    return ratio, lo <= ratio <= hi


def spread_block_beliefs(corrupted_leaves: SpinVector, params: RobustParams,
                         seed: int = 0) -> list[Belief]:
    """Noise-injected posterior of each height-k block, in block order.

    Each block draws its noise from a stream keyed by (seed, block
    index), so one block's output is unaffected by any other block's.
    """
    shape = params.shape
    k = params.block_height
    if shape.depth < k:
        raise ValueError(f"block height {k} exceeds tree depth {shape.depth}")
    block_shape = TreeShape(shape.arity, k)
    arr = corrupted_leaves.to_array()
    out = []
    for i, (start, stop) in enumerate(height_k_blocks(shape, k)):
        rng = seeds.stream(seed, "robust.spread.block", i)
        block = SpinVector(arr[start:stop])
        out.append(noisy_posterior_AN(block, params.epsilon, params.psi,
                                      block_shape, rng=rng))
    return out


def spread_alg(corrupted_leaves: SpinVector, params: RobustParams,
               seed: int = 0) -> Belief:
    """Two-stage robust root posterior.

    Stage one runs the noise-injected posterior on every height-k block;
    stage two treats those block beliefs as leaf beliefs and combines
    them to the root with plain belief propagation at the process
    epsilon. With k equal to the full depth this is a single block, i.e.
    plain noise injection on the whole tree.
    """
    shape = params.shape
    beliefs = spread_block_beliefs(corrupted_leaves, params, seed)
    L = np.asarray([b.logratio for b in beliefs], dtype=np.float64)
    root_L = numerics.sweep_to_root(L, shape.arity, shape.depth - params.block_height,
                                    params.epsilon)
    return Belief.from_logratio(float(root_L))
