"""Command-line harness.

Subcommands: solve, export, abstract, train, gap, sweep-sizes, sweep-gaps.
Options come from (lowest to highest precedence) built-in defaults, a
`key = value` config file passed with --config, and command-line flags.
The ZSMG_OUT environment variable prefixes the output directory. The exit
code is 0 only when every invariant check in the run passed.
"""

from __future__ import annotations

import argparse
import sys

from zsmg.experiments import (
    evaluate_policy_file,
    export_abstraction,
    load_config,
    output_dir,
    resolve_game,
    run_gap_experiment,
    run_state_size_sweep,
    solve_and_export,
    train_and_export,
)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--game", help="'soccer' or a .tzmg file path")
    parser.add_argument("--gamma", type=float)
    parser.add_argument("--criterion",
                        choices=["minimax_q", "model", "boltzmann", "multinomial"])
    parser.add_argument("--epsilons", help="comma-separated ascending grid")
    parser.add_argument("--k", type=float)
    parser.add_argument("--delta-floor", dest="delta_floor", type=float)
    parser.add_argument("--iters", type=int)
    parser.add_argument("--beta", type=float)
    parser.add_argument("--lr", help="'decay' or 'const:<rate>'")
    parser.add_argument("--checkpoint-every", dest="checkpoint_every", type=int)
    parser.add_argument("--seeds", help="comma-separated seeds")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--gap-mode", dest="gap_mode", choices=["exact", "learned"])
    parser.add_argument("--gap-learn-iters", dest="gap_learn_iters", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument("--tol", type=float)
    parser.add_argument("--paper-scale", dest="paper_scale", action="store_const",
                        const="true", help="10^6 iterations, full 0.0..2.0 grid")


def _config_from(args: argparse.Namespace):
    overrides = {
        key: getattr(args, key, None)
        for key in (
            "game", "gamma", "criterion", "epsilons", "k", "delta_floor", "iters",
            "beta", "lr", "checkpoint_every", "seeds", "out", "gap_mode",
            "gap_learn_iters", "workers", "tol", "paper_scale",
        )
    }
    return load_config(args.config, overrides)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="zsmg",
        description="Zero-sum Markov game solving, learning, abstraction, and "
        "duality-gap experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="exactly solve the game; store V*/Q*/policy")
    _add_common(p)

    p = sub.add_parser("export", help="write the game in tzmg v1 format")
    _add_common(p)
    p.add_argument("--to", help="output file (default <out>/game.tzmg)")

    p = sub.add_parser("abstract", help="build one abstraction, write phi v1")
    _add_common(p)
    p.add_argument("--epsilon", type=float, required=True)

    p = sub.add_parser("train", help="minimax Q-learning on the ground or an "
                                     "abstract game; store the final tables")
    _add_common(p)
    p.add_argument("--epsilon", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("gap", help="duality gap of a stored policy")
    _add_common(p)
    p.add_argument("--policy", required=True)
    p.add_argument("--epsilon", type=float, default=0.0)

    p = sub.add_parser("sweep-sizes", help="epsilon -> abstract state count CSV")
    _add_common(p)

    p = sub.add_parser("sweep-gaps", help="learn per epsilon, evaluate lifted "
                                          "checkpoints in the ground game")
    _add_common(p)

    args = parser.parse_args(argv)
    config = _config_from(args)

    if args.command == "solve":
        outputs, violations = solve_and_export(config)
        print(f"solution: {outputs['solution']}")
        print(f"equilibrium gap: {outputs['gap']:.3e}")
        print(f"values at initial states: {outputs['values_at_initial']}")
    elif args.command == "export":
        from zsmg.game import validate_game
        from zsmg.serialization import read_tzmg, write_tzmg

        game, _ = resolve_game(config)
        target = args.to or f"{output_dir(config)}/game.tzmg"
        write_tzmg(game, target)
        violations = []
        if validate_game(read_tzmg(target)):
            violations.append("exported game fails validation after reload")
        print(f"game written to {target}")
    elif args.command == "abstract":
        outputs, violations = export_abstraction(config, args.epsilon)
        print(f"{outputs['num_blocks']} abstract states -> {outputs['phi']}")
    elif args.command == "train":
        seed = args.seed if args.seed is not None else config.seeds[0]
        outputs, violations = train_and_export(config, args.epsilon, seed)
        print(f"policy written to {outputs['policy']} "
              f"({outputs['visited']} states visited)")
    elif args.command == "gap":
        outputs, violations = evaluate_policy_file(config, args.policy, args.epsilon)
        print(f"{outputs['mode']} duality gap: {outputs['gap']:.6f} "
              f"-> {outputs['csv']}")
    elif args.command == "sweep-sizes":
        outputs, violations = run_state_size_sweep(config)
        print(f"wrote {outputs['csv']} and {outputs['plot']}")
    elif args.command == "sweep-gaps":
        outputs, violations = run_gap_experiment(config)
        print(f"wrote {outputs['csv']} and {outputs['plot']}")
    else:  # pragma: no cover
        parser.error(f"unknown command {args.command}")
        return 2

    for violation in violations:
        print(f"INVARIANT VIOLATION: {violation}", file=sys.stderr)
    return 1 if violations else 0


if __name__ == "__main__":
    sys.exit(main())
