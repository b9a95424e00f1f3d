"""Pool (population-dynamics) sampler for root beliefs on wide trees.

Exact per-trial simulation needs b^t leaves, which is hopeless at
b = 64, t = 6. Instead we iterate the distributional recursion for the
root log ratio: keep a pool of samples of the height-h value, build
height h+1 by drawing b children per slot, resampling each child from
the pool (negated for a minus-spin child, since the minus-spin law is
the mirror of the plus-spin law) and combining through the usual BP
child terms.

For attacked runs each slot carries the pair (clean L, attacked L)
driven by the same leaves and mask, so damage stays a paired quantity.
A sign-push attack toward -1 breaks the mirror symmetry, so two pools
run side by side: pool A holds (spin +1, push target -1) and pool B
(spin +1, push target +1); a minus-spin child with target tau draws
from the opposite-target pool and negates.

Height-1 values are exact: with n+ ~ Bin(b, (1+eps)/2) plus leaves, the
clean log ratio is (2 n+ - b) * log((1-eps)/(1+eps)), and the push
flips a Bin(n_opposed, rho) of the opposed leaves.

The price of the pool bootstrap is mild dependence between slots, so
confidence intervals computed from the final sample treat correlated
draws as independent and are optimistic. Pool size >= 10^4 keeps the
resampling bias small against the effects measured here.
"""

from __future__ import annotations

import math

import numpy as np

from .. import seeds
from ..numerics import child_logterms

MIN_POOL = 10000


def _combine(children: np.ndarray, epsilon: float) -> np.ndarray:
    return child_logterms(children, epsilon).sum(axis=1)


def pool_clean(b: int, t: int, epsilon: float, trials: int, seed: int,
               tag: str, pool_size: int | None = None) -> np.ndarray:
    """Root log ratios under root spin +1, clean leaves."""
    if pool_size is None:
        pool_size = max(trials, MIN_POOL)
    rng = seeds.stream(seed, tag)
    lp = math.log((1.0 - epsilon) / (1.0 + epsilon))
    p_plus = (1.0 + epsilon) / 2.0

    def level_one(size):
        n_plus = rng.binomial(b, p_plus, size=size)
        return (2.0 * n_plus - b) * lp

    if t == 1:
        return level_one(trials)
    pool = level_one(pool_size)
    for height in range(2, t + 1):
        size = trials if height == t else pool_size
        signs = rng.random((size, b)) < p_plus
        idx = rng.integers(0, pool.shape[0], size=(size, b))
        children = np.where(signs, pool[idx], -pool[idx])
        pool = _combine(children, epsilon)
    return pool


def pool_signpush_pairs(b: int, t: int, epsilon: float, rho: float,
                        trials: int, seed: int, tag: str,
                        pool_size: int | None = None
                        ) -> tuple[np.ndarray, np.ndarray]:
    """(clean, attacked) root log-ratio pairs under root +1, with every
    rho-permitted leaf opposing the push target -1 flipped to -1."""
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    if pool_size is None:
        pool_size = max(trials, MIN_POOL)
    rng = seeds.stream(seed, tag)
    lp = math.log((1.0 - epsilon) / (1.0 + epsilon))
    p_plus = (1.0 + epsilon) / 2.0

    def level_one_pair(size, target):
        n_plus = rng.binomial(b, p_plus, size=size)
        clean = (2.0 * n_plus - b) * lp
        if target == -1:
            flips = rng.binomial(n_plus, rho)
            attacked = (2.0 * (n_plus - flips) - b) * lp
        else:
            flips = rng.binomial(b - n_plus, rho)
            attacked = (2.0 * (n_plus + flips) - b) * lp
        return clean, attacked

    if t == 1:
        return level_one_pair(trials, -1)

    ax, az = level_one_pair(pool_size, -1)
    bx, bz = level_one_pair(pool_size, +1)
    for height in range(2, t + 1):
        top = height == t
        size = trials if top else pool_size
        # pool A: spin +1, target -1; minus children mirror pool B
        signs = rng.random((size, b)) < p_plus
        idx = rng.integers(0, pool_size, size=(size, b))
        cx = np.where(signs, ax[idx], -bx[idx])
        cz = np.where(signs, az[idx], -bz[idx])
        new_ax, new_az = _combine(cx, epsilon), _combine(cz, epsilon)
        if top:
            return new_ax, new_az
        signs = rng.random((size, b)) < p_plus
        idx = rng.integers(0, pool_size, size=(size, b))
        cx = np.where(signs, bx[idx], -ax[idx])
        cz = np.where(signs, bz[idx], -az[idx])
        ax, az = new_ax, new_az
        bx, bz = _combine(cx, epsilon), _combine(cz, epsilon)
    return ax, az
