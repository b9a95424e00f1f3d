"""Command-line front end.

Subcommands: simulate, infer, attack, couple, experiment, verify.
Exit codes: 0 success, 1 runtime failure, 2 configuration error (the
message names the offending key or flag). TREECAST_WORKERS supplies the
default worker count for experiment runs. Leaf spins on the command
line are written as '+'/'-' strings.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__, seeds
from .adversary import (SemirandomRho, SpreadCK, attack_bruteforce,
                        attack_greedy, attack_signpush,
                        attack_spread_signpush, sample_mask, validate_attack)
from .broadcast import BroadcastParams, sample_many
from .coupling import CouplingParams, couple_once, fraction_adversary
from .harness import config as config_mod
from .harness.config import ConfigError
from .harness.experiments import (exp_bp_exactness, exp_inequality_grid,
                                  run_experiment)
from .harness.io import write_csv, write_sidecar
from .inference import LeafChannel, bp_root
from .tree import SpinVector, TreeShape


def _spins_arg(text: str) -> SpinVector:
    try:
        return SpinVector.from_string(text)
    except ValueError as exc:
        raise ConfigError(f"--leaves: {exc}")


def _shape_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--b", type=int, required=True, help="branching factor")
    parser.add_argument("--t", type=int, required=True, help="depth")
    parser.add_argument("--epsilon", type=float, required=True,
                        help="copy bias in (0,1)")


def _check_ranges(args, eps_hi: float = 1.0) -> None:
    if args.b < 2:
        raise ConfigError(f"--b: must be >= 2, got {args.b}")
    if args.t < 1:
        raise ConfigError(f"--t: must be >= 1, got {args.t}")
    if not 0.0 < args.epsilon < eps_hi:
        raise ConfigError(
            f"--epsilon: must lie in (0, {eps_hi}), got {args.epsilon}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treecast",
        description="broadcast processes on trees: simulation, exact root "
                    "inference, adversarial corruption, couplings")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw labeled trees, print leaf rows")
    _shape_args(p)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--root", choices=["+", "-", "random"], default="random")

    p = sub.add_parser("infer", help="exact root posterior from leaves")
    _shape_args(p)
    p.add_argument("--leaves", required=True, help="spin string like ++-")
    p.add_argument("--psi", type=float, default=1.0,
                   help="leaf channel strength in (0,1]")

    p = sub.add_parser("attack", help="corrupt leaves under a budget")
    _shape_args(p)
    p.add_argument("--leaves", required=True)
    p.add_argument("--strategy",
                   choices=["signpush", "greedy", "bruteforce", "spread"],
                   default="signpush")
    p.add_argument("--rho", type=float, default=None,
                   help="per-leaf permission rate (mask budgets)")
    p.add_argument("--c", type=int, default=None, help="flip-count budget")
    p.add_argument("--k", type=int, default=None,
                   help="block height for the spread budget")
    p.add_argument("--target", choices=["+", "-"], default="-")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("couple", help="run the two-root coupling once")
    _shape_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rho", type=float, default=None,
                   help="fraction budget; omit for the unconstrained coupling")

    p = sub.add_parser("experiment", help="run a configured experiment")
    p.add_argument("--config", required=True, help="flat key=value file")
    p.add_argument("overrides", nargs="*", metavar="key=value",
                   help="config overrides, applied last")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("verify", help="oracle equivalence, inequality grids "
                                      "and coupling marginals; nonzero on "
                                      "any violation")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--instances", type=int, default=200)

    return parser


def _cmd_simulate(args) -> int:
    _check_ranges(args)
    params = BroadcastParams(args.epsilon, TreeShape(args.b, args.t))
    rng = seeds.stream(args.seed, "cli.simulate")
    roots = None if args.root == "random" else (1 if args.root == "+" else -1)
    spins = sample_many(params, args.trials, rng, root_spins=roots)
    start = params.shape.leaf_start
    for row in spins:
        root = "+" if row[0] == 1 else "-"
        leaves = "".join("+" if s == 1 else "-" for s in row[start:])
        print(f"{root} {leaves}")
    return 0


def _cmd_infer(args) -> int:
    _check_ranges(args)
    shape = TreeShape(args.b, args.t)
    leaves = _spins_arg(args.leaves)
    if len(leaves) != shape.leaf_count:
        raise ConfigError(
            f"--leaves: expected {shape.leaf_count} spins, got {len(leaves)}")
    belief = bp_root(SpinVector(leaves.to_array(), start=shape.leaf_start),
                     args.epsilon, shape, LeafChannel(args.psi))
    # + 0.0 turns -0.0 into 0.0 before printing
    print(f"{belief.bias + 0.0:.12g}")
    return 0


def _cmd_attack(args) -> int:
    _check_ranges(args)
    shape = TreeShape(args.b, args.t)
    leaves = _spins_arg(args.leaves)
    if len(leaves) != shape.leaf_count:
        raise ConfigError(
            f"--leaves: expected {shape.leaf_count} spins, got {len(leaves)}")
    sv = SpinVector(leaves.to_array(), start=shape.leaf_start)
    target = 1 if args.target == "+" else -1

    if args.strategy == "spread":
        if args.c is None or args.k is None:
            raise ConfigError("--c and --k: required for the spread strategy")
        budget = SpreadCK(args.c, args.k)
        attack = attack_spread_signpush(sv, budget, target, shape)
        mask = None
    else:
        if args.rho is None:
            raise ConfigError(f"--rho: required for {args.strategy}")
        mask = sample_mask(args.rho, shape.leaf_count, seed=args.seed)
        budget = SemirandomRho(args.rho)
        if args.strategy == "signpush":
            attack = attack_signpush(sv, mask, target)
        elif args.strategy == "greedy":
            attack = attack_greedy(sv, mask, args.epsilon, shape)
        else:
            attack = attack_bruteforce(sv, mask, args.epsilon, shape)

    violation = validate_attack(attack, budget, mask=mask, shape=shape)
    if violation is not None:
        print(f"budget violation: {violation.kind} at {violation.location}",
              file=sys.stderr)
        return 1
    clean = bp_root(sv, args.epsilon, shape).bias
    dirty = bp_root(attack.leaves, args.epsilon, shape).bias
    print(f"flips {list(attack.flipped)}")
    print(f"attacked {attack.leaves.to_string()}")
    print(f"root_bias {clean + 0.0:.12g} -> {dirty + 0.0:.12g}")
    return 0


def _cmd_couple(args) -> int:
    _check_ranges(args, eps_hi=0.5)
    cp = CouplingParams(args.epsilon, TreeShape(args.b, args.t),
                        seed=args.seed)
    rng = seeds.stream(args.seed, "cli.couple")
    from .coupling import sample_input_leaves
    x = SpinVector(sample_input_leaves(cp, 1, rng)[0],
                   start=cp.shape.leaf_start)
    if args.rho is None:
        outcome = couple_once(cp, x, rng)
        print(f"x  {outcome.x.to_string()}")
        print(f"pi {outcome.pi.to_string()}")
        print(f"flips {list(outcome.flips)}")
        print(f"marked {int(outcome.marks.sum())}")
    else:
        outcome = fraction_adversary(cp, args.rho, x, rng)
        print(f"x  {x.to_string()}")
        print(f"out {outcome.leaves.to_string()}")
        print(f"coupled {outcome.coupled} flip_count {outcome.flip_count}")
        for key, value in sorted(outcome.diagnostics.items()):
            print(f"{key} {value + 0.0:.12g}")
    return 0


def _cmd_experiment(args) -> int:
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    if args.workers is not None:
        overrides.append(f"run.workers={args.workers}")
    if args.out is not None:
        overrides.append(f"run.out={args.out}")
    cfg = config_mod.load_config(args.config, overrides)
    rows, report = run_experiment(cfg)
    os.makedirs(cfg.out_dir, exist_ok=True)
    base = os.path.join(cfg.out_dir, cfg.name)
    write_csv(base + ".csv", rows)
    write_sidecar(base + ".json", cfg.raw, __version__, report)
    print(f"wrote {base}.csv ({len(rows)} rows)")
    for key, value in report.items():
        print(f"{key}: {json.dumps(value, sort_keys=True)}")
    return 0


def _cmd_verify(args) -> int:
    """Self-checks cheap enough to run on every build."""
    failures = []

    cfg = config_mod.ExperimentConfig(
        name="bp_exactness", seed=args.seed,
        params={"instances": str(args.instances)})
    _, report = exp_bp_exactness(cfg)
    print(f"oracle max error {report['max_abs_error']:.3e} "
          f"over {report['instances']} instances")
    if not report["pass"]:
        failures.append("bp_exactness")

    cfg = config_mod.ExperimentConfig(name="inequality_grid", seed=args.seed,
                                      params={"termder_trials": "2000"})
    _, report = exp_inequality_grid(cfg)
    print(f"inequality grid violations {report['violations_total']}")
    if report["violations_total"] != 0:
        failures.append("inequality_grid")

    # coupling marginal: the unmarked-node law must match the minus
    # process; checked via the per-level mean of the output leaves
    eps = 0.25
    cp = CouplingParams(eps, TreeShape(2, 2))
    rng = seeds.stream(args.seed, "verify.coupling")
    from .coupling import fraction_adversary_batch, sample_input_leaves
    x = sample_input_leaves(cp, 20000, rng)
    out, _, _ = fraction_adversary_batch(cp, 1.0, x, rng)
    got = float((out == 1).mean())
    # leaves sit two minus-biased edges below the forced minus root
    expect = (1.0 - cp.edge_bias ** 2) / 2.0
    err = abs(got - expect)
    print(f"coupling leaf-plus rate {got:.4f} expected {expect:.4f}")
    if err > 0.02:
        failures.append("coupling_marginal")

    if failures:
        print("FAIL " + " ".join(failures), file=sys.stderr)
        return 1
    print("ok")
    return 0


def run(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad flags already; keep its behavior
        return int(exc.code or 0)
    handlers = {
        "simulate": _cmd_simulate,
        "infer": _cmd_infer,
        "attack": _cmd_attack,
        "couple": _cmd_couple,
        "experiment": _cmd_experiment,
        "verify": _cmd_verify,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
