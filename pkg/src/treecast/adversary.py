"""Leaf-corruption models and attack strategies.

Budgets come in four variants: a random set of permitted leaves with
density rho, a global rho-fraction cap, a flat c-flip cap, and a per-block
cap of c flips inside every height-k subtree. Strategies range from exact
subset enumeration (small masks) to a linear-time sign push.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numerics, seeds
from .tree import CapacityError, CorruptionMask, SpinVector, TreeShape, height_k_blocks

_BRUTEFORCE_MAX_BITS = 22


@dataclass(frozen=True)
class SemirandomRho:
    """Flip only leaves a Bernoulli(rho) mask permitted."""
    rho: float

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")


@dataclass(frozen=True)
class FractionRho:
    """Flip any leaves, at most rho * leaf_count of them."""
    rho: float

    def __post_init__(self):
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")


@dataclass(frozen=True)
class CFlip:
    """Flip at most c leaves total."""
    c: int

    def __post_init__(self):
        if self.c < 0:
            raise ValueError(f"c must be >= 0, got {self.c}")


@dataclass(frozen=True)
class SpreadCK:
    """Flip at most c leaves within every height-k block."""
    c: int
    k: int

    def __post_init__(self):
        if self.c < 0:
            raise ValueError(f"c must be >= 0, got {self.c}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")


AdversaryBudget = SemirandomRho | FractionRho | CFlip | SpreadCK


@dataclass(frozen=True)
class Attack:
    """Chosen flip set and the leaves after applying it."""

    flipped: tuple[int, ...]
    leaves: SpinVector


@dataclass(frozen=True)
class Violation:
    """First budget constraint an attack breaks."""

    kind: str
    detail: str
    location: int | None = None


def sample_mask(rho: float, leaf_count: int, seed: int = 0,
                rng: np.random.Generator | None = None) -> CorruptionMask:
    """Independent Bernoulli(rho) flip permissions, one per leaf."""
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    if rng is None:
        rng = seeds.stream(seed, "adversary.mask")
    return CorruptionMask(rng.random(leaf_count) < rho, rho)


def validate_attack(attack: Attack, budget: AdversaryBudget,
                    mask: CorruptionMask | None = None,
                    shape: TreeShape | None = None) -> Violation | None:
    """None if the attack respects the budget, else the first violation."""
    n = len(attack.leaves)
    flips = attack.flipped
    for i in flips:
        if not 0 <= i < n:
            return Violation("index-out-of-range", f"leaf {i} outside [0, {n})", i)
    if len(set(flips)) != len(flips):
        return Violation("duplicate-flip", "flip set lists a leaf twice")
    if isinstance(budget, SemirandomRho):
        if mask is None:
            raise ValueError("a permission mask is required for this budget")
        for i in flips:
            if not mask.flags[i]:
                return Violation("unpermitted-flip", f"leaf {i} is not a permitted site", i)
        return None
    if isinstance(budget, FractionRho):
        if len(flips) > budget.rho * n:
            return Violation(
                "budget-exceeded",
                f"{len(flips)} flips exceed rho*leaves = {budget.rho * n:g}")
        return None
    if isinstance(budget, CFlip):
        if len(flips) > budget.c:
            return Violation("budget-exceeded", f"{len(flips)} flips exceed c = {budget.c}")
        return None
    if isinstance(budget, SpreadCK):
        if shape is None:
            raise ValueError("the tree shape is required for a per-block budget")
        flip_arr = np.asarray(flips, dtype=np.int64)
        for start, stop in height_k_blocks(shape, budget.k):
            count = int(((flip_arr >= start) & (flip_arr < stop)).sum())
            if count > budget.c:
                return Violation(
                    "block-budget-exceeded",
                    f"{count} flips in block [{start}, {stop}) exceed c = {budget.c}",
                    start)
        return None
    raise TypeError(f"unknown budget {budget!r}")


class _PathUpdater:
    """Per-node log ratios under a mutable leaf assignment.

    Toggling a leaf renegates its log ratio and re-sums every ancestor
    from its children in index order. Full re-summation (rather than a
    delta update) keeps the values drift-free over millions of toggles
    and bit-identical to a fresh sweep.
    """

    def __init__(self, leaves: np.ndarray, epsilon: float, shape: TreeShape):
        self.shape = shape
        self.epsilon = epsilon
        self.L = np.empty(shape.node_count, dtype=np.float64)
        base = numerics.logratio_from_bias(1.0)  # -inf, an observed leaf
        self.L[shape.leaf_start:] = np.where(leaves == 1, base, -base)
        for level in range(shape.depth - 1, -1, -1):
            start = shape.level_start(level)
            child_start = shape.level_start(level + 1)
            terms = numerics.child_logterms(
                self.L[child_start:child_start + shape.level_size(level + 1)], epsilon)
            self.L[start:start + shape.level_size(level)] = (
                terms.reshape(-1, shape.arity).sum(axis=1))

    def toggle(self, leaf_offset: int) -> None:
        shape = self.shape
        node = shape.leaf_start + leaf_offset
        self.L[node] = -self.L[node]
        level = shape.depth
        offset = leaf_offset
        while level > 0:
            level -= 1
            offset //= shape.arity
            child_start = shape.level_start(level + 1) + offset * shape.arity
            kids = self.L[child_start:child_start + shape.arity]
            self.L[shape.level_start(level) + offset] = float(
                numerics.child_logterms(kids, self.epsilon).sum())

    def root_bias(self) -> float:
        return numerics.bias_from_logratio(self.L[0])


def _objective_fn(objective: str, clean_bias: float, target: int | None):
    if objective == "damage":
        return lambda z: abs(z - clean_bias)
    if objective == "push":
        if target not in (-1, 1):
            raise ValueError("the push objective needs a target sign of -1 or +1")
        return lambda z: -target * z
    raise ValueError(f"unknown objective {objective!r}")


def _apply_flips(leaves: np.ndarray, flips, start: int) -> SpinVector:
    out = leaves.copy()
    idx = list(flips)
    out[idx] = -out[idx]
    return SpinVector(out, start=start)


def attack_bruteforce(leaves: SpinVector, mask: CorruptionMask, epsilon: float,
                      shape: TreeShape, objective: str = "damage",
                      target: int | None = None) -> Attack:
    """Exact objective maximizer over all subsets of the permitted leaves.

    Subsets are visited in Gray-code order (one toggle per step, each an
    O(depth * arity) path refresh). Ties are broken toward the
    lexicographically smallest sorted flip set.
    """
    arr = leaves.to_array()
    permitted = np.flatnonzero(mask.flags)
    if permitted.size > _BRUTEFORCE_MAX_BITS:
        raise CapacityError(
            f"{permitted.size} permitted leaves exceed the {_BRUTEFORCE_MAX_BITS}-bit "
            "enumeration limit")
    updater = _PathUpdater(arr, epsilon, shape)
    obj = _objective_fn(objective, updater.root_bias(), target)

    best_value = obj(updater.root_bias())
    best_set: tuple[int, ...] = ()
    chosen = np.zeros(permitted.size, dtype=bool)
    for step in range(1, 1 << permitted.size):
        bit = (step & -step).bit_length() - 1
        chosen[bit] = not chosen[bit]
        updater.toggle(int(permitted[bit]))
        value = obj(updater.root_bias())
        if value > best_value:
            best_value = value
            best_set = tuple(int(i) for i in permitted[chosen])
        elif value == best_value:
            candidate = tuple(int(i) for i in permitted[chosen])
            if candidate < best_set:
                best_set = candidate
    return Attack(best_set, _apply_flips(arr, best_set, leaves.start))


def attack_greedy(leaves: SpinVector, mask: CorruptionMask, epsilon: float,
                  shape: TreeShape, objective: str = "damage",
                  target: int | None = None, max_rounds: int | None = None) -> Attack:
    """Coordinate ascent over single-leaf toggles.

    Each round toggles the permitted leaf giving the largest strict
    objective increase (lowest index on ties) until no toggle improves or
    max_rounds is hit. Terminates because the objective strictly
    increases over a finite state space.
    """
    arr = leaves.to_array()
    permitted = [int(i) for i in np.flatnonzero(mask.flags)]
    updater = _PathUpdater(arr, epsilon, shape)
    obj = _objective_fn(objective, updater.root_bias(), target)

    current = obj(updater.root_bias())
    toggled = set()
    rounds = 0
    while max_rounds is None or rounds < max_rounds:
        rounds += 1
        best_value = current
        best_leaf = None
        for i in permitted:
            updater.toggle(i)
            value = obj(updater.root_bias())
            updater.toggle(i)
            if value > best_value:
                best_value = value
                best_leaf = i
        if best_leaf is None:
            break
        updater.toggle(best_leaf)
        current = best_value
        toggled.symmetric_difference_update([best_leaf])
    flips = tuple(sorted(toggled))
    return Attack(flips, _apply_flips(arr, flips, leaves.start))


def attack_signpush(leaves: SpinVector, mask: CorruptionMask, target_sign: int) -> Attack:
    """Flip every permitted leaf that disagrees with the target sign."""
    if target_sign not in (-1, 1):
        raise ValueError("target sign must be -1 or +1")
    arr = leaves.to_array()
    flips = np.flatnonzero(mask.flags & (arr != target_sign))
    out = arr.copy()
    out[flips] = target_sign
    return Attack(tuple(int(i) for i in flips), SpinVector(out, start=leaves.start))


def attack_spread_signpush(leaves: SpinVector, budget: SpreadCK, target_sign: int,
                           shape: TreeShape) -> Attack:
    """Within each height-k block, flip up to c disagreeing leaves,
    lowest indices first."""
    if target_sign not in (-1, 1):
        raise ValueError("target sign must be -1 or +1")
    arr = leaves.to_array()
    out = arr.copy()
    flips: list[int] = []
    for start, stop in height_k_blocks(shape, budget.k):
        disagree = start + np.flatnonzero(arr[start:stop] != target_sign)
        take = disagree[:budget.c]
        out[take] = target_sign
        flips.extend(int(i) for i in take)
    return Attack(tuple(flips), SpinVector(out, start=leaves.start))
