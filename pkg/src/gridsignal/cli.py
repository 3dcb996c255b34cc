"""Command-line entry point.

Subcommands::

    gridsignal train          train a learned scheme (idql | s2rl | s2r2l)
    gridsignal test           evaluate any scheme on the testing demand
    gridsignal baseline       evaluate the uniform-random stage baseline
    gridsignal sweep-weight   train+test across reward self-weights
    gridsignal sweep-maxgreen re-test fixed checkpoints across green caps

Options layer in increasing precedence: built-in defaults, then --config
(YAML file of RunConfig keys), then --profile (desk | paper), then explicit
flags.
"""

from __future__ import annotations

import argparse
import sys

from dataclasses import replace

from .exp_harness import (
    MAX_PRESSURE,
    RANDOM_BASELINE,
    ConfigError,
    RunConfig,
    apply_profile,
    load_config_file,
    run_testing,
    run_training,
    sweep_max_green,
    sweep_reward_weight,
)
from .marl_agents import MARL_SCHEMES

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridsignal",
        description="Grid traffic-signal control: training, evaluation, sweeps.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, schemes: tuple[str, ...]) -> None:
        p.add_argument("--config", help="YAML file of run-config keys")
        p.add_argument("--profile", choices=("desk", "paper"), help="parameter bundle")
        p.add_argument("--seed", type=int, help="single seed (shorthand for --seeds)")
        p.add_argument("--seeds", help="comma-separated seeds, e.g. 1,2,3")
        p.add_argument("--out", help="output directory")
        if schemes:
            p.add_argument("--scheme", choices=schemes)
        p.add_argument(
            "--literal-reward-sign",
            action="store_true",
            default=None,
            help="use the raw waiting-time delta as the reward (default negates it)",
        )

    train = sub.add_parser("train", help="train a learned scheme")
    common(train, MARL_SCHEMES)

    test = sub.add_parser("test", help="evaluate a scheme on the testing demand")
    common(test, MARL_SCHEMES + (MAX_PRESSURE,))
    test.add_argument(
        "--checkpoints", help="training output dir (or flat agents dir) to load"
    )

    baseline = sub.add_parser("baseline", help="evaluate the random-stage baseline")
    common(baseline, ())

    sweep_w = sub.add_parser("sweep-weight", help="sweep the reward self-weight")
    common(sweep_w, ())

    sweep_g = sub.add_parser("sweep-maxgreen", help="sweep the maximum green cap")
    common(sweep_g, ())
    sweep_g.add_argument(
        "--checkpoints",
        required=True,
        help="training output dir (or flat agents dir) to re-test",
    )
    return parser


def _assemble_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig()
    if args.config:
        config = load_config_file(args.config, base=config)
    if args.profile:
        config = apply_profile(config, args.profile)
    overrides: dict = {}
    if getattr(args, "scheme", None):
        overrides["scheme"] = args.scheme
    if args.seeds is not None:
        overrides["seeds"] = tuple(int(s) for s in args.seeds.split(","))
    elif args.seed is not None:
        overrides["seeds"] = (args.seed,)
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.literal_reward_sign is not None:
        overrides["literal_reward_sign"] = args.literal_reward_sign
    return replace(config, **overrides) if overrides else config


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _assemble_config(args)
        if args.command == "train":
            result = run_training(config)
            print(f"trained {config.scheme} over seeds {config.seeds}")
            print(f"mean training delay {result.mean_delay():.2f} s/veh")
            print(f"outputs in {result.out_dir}")
        elif args.command == "test":
            result = run_testing(config, checkpoint_root=args.checkpoints)
            print(f"tested {config.scheme} over seeds {config.seeds}")
            print(f"mean test delay {result.mean_delay():.2f} s/veh")
            print(f"outputs in {result.out_dir}")
        elif args.command == "baseline":
            result = run_testing(replace(config, scheme=RANDOM_BASELINE))
            print(f"tested {RANDOM_BASELINE} over seeds {config.seeds}")
            print(f"mean test delay {result.mean_delay():.2f} s/veh")
            print(f"outputs in {result.out_dir}")
        elif args.command == "sweep-weight":
            rows = sweep_reward_weight(config)
            for row in rows:
                flag = " (neighbor-only)" if row["neighbor_only_degenerate"] else ""
                print(
                    f"n={row['self_weight_n']:g}: "
                    f"{row['mean_delay_s_per_veh']:.2f} s/veh{flag}"
                )
            print(f"outputs in {config.out_dir}")
        elif args.command == "sweep-maxgreen":
            rows = sweep_max_green(config, args.checkpoints)
            for row in rows:
                print(
                    f"{row['scheme']} @ max green {row['max_green_s']} s: "
                    f"{row['mean_delay_s_per_veh']:.2f} s/veh"
                )
            print(f"outputs in {config.out_dir}")
        else:  # pragma: no cover - argparse enforces the choices
            raise AssertionError(args.command)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
