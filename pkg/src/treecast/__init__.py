"""Broadcast processes on complete trees: simulation, exact root
inference, leaf adversaries, coupling constructions, and a seeded Monte
Carlo harness."""

__version__ = "0.1.0"

from .tree import (
    CapacityError,
    CorruptionMask,
    SpinVector,
    TreeShape,
)
from .broadcast import BroadcastParams, LabeledTree, sample_tree
from .inference import Belief, LeafChannel, bp_all_levels, bp_combine, bp_root, posterior_oracle, tv_from_biases
from .adversary import (
    Attack,
    CFlip,
    FractionRho,
    SemirandomRho,
    SpreadCK,
    Violation,
    attack_bruteforce,
    attack_greedy,
    attack_signpush,
    attack_spread_signpush,
    sample_mask,
    validate_attack,
)
from .coupling import (
    CouplingOutcome,
    CouplingParams,
    FractionOutcome,
    couple_once,
    fraction_adversary,
    semirandom_coupling_adversary,
)
from .robust import RobustParams, noisy_posterior_AN, posterior_ratio_bound_check, spread_alg

__all__ = [
    "Attack",
    "Belief",
    "BroadcastParams",
    "CapacityError",
    "CFlip",
    "CorruptionMask",
    "CouplingOutcome",
    "CouplingParams",
    "FractionOutcome",
    "FractionRho",
    "LabeledTree",
    "LeafChannel",
    "RobustParams",
    "SemirandomRho",
    "SpinVector",
    "SpreadCK",
    "TreeShape",
    "Violation",
    "attack_bruteforce",
    "attack_greedy",
    "attack_signpush",
    "attack_spread_signpush",
    "bp_all_levels",
    "bp_combine",
    "bp_root",
    "couple_once",
    "fraction_adversary",
    "noisy_posterior_AN",
    "posterior_oracle",
    "posterior_ratio_bound_check",
    "sample_mask",
    "sample_tree",
    "semirandom_coupling_adversary",
    "spread_alg",
    "tv_from_biases",
    "validate_attack",
]
