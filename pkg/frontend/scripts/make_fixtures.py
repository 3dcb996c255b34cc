"""Generate test fixtures for the plotting frontend from real runs.

Run from the repository root (the gridsignal package must be installed):

    python3 frontend/scripts/make_fixtures.py

Writes frontend/tests/fixtures/: full-horizon testing runs for four control
schemes, short multi-episode training runs for the three learned schemes,
and a two-candidate reward-weight sweep.
"""

from __future__ import annotations

import shutil
import time
from dataclasses import replace
from pathlib import Path

from gridsignal.deep_q import DqnLearnerConfig
from gridsignal.exp_harness import (
    MAX_PRESSURE,
    RANDOM_BASELINE,
    RunConfig,
    run_testing,
    run_training,
    sweep_reward_weight,
)

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

TINY_DQN = DqnLearnerConfig(
    batch_size=8,
    n_step=2,
    target_sync_every=4,
    memory_capacity=256,
    hidden_dims=(8,),
    input_dropout=0.0,
)


def main() -> None:
    if FIXTURES.exists():
        shutil.rmtree(FIXTURES)
    FIXTURES.mkdir(parents=True)

    t0 = time.time()
    # Full-horizon testing runs: the four-segment schedule spans 20 000 s,
    # so segment boundaries land at 5000/10000/15000 s in the charts.
    full = RunConfig(
        schedule="testing",
        episodes=1,
        episode_length_s=20000,
        warmup_s=300,
        seeds=(7,),
    )
    for scheme in (MAX_PRESSURE, RANDOM_BASELINE, "idql", "s2r2l"):
        out = FIXTURES / "testing" / scheme
        run_testing(replace(full, scheme=scheme, out_dir=str(out)))
        print(f"testing/{scheme}: {time.time() - t0:.1f} s")

    # Short training runs: enough episodes for a per-episode curve.
    tiny = RunConfig(
        schedule="training",
        episodes=4,
        episode_length_s=340,
        warmup_s=300,
        learn_every=1,
        seeds=(5,),
        dqn=TINY_DQN,
    )
    for scheme in ("idql", "s2rl", "s2r2l"):
        out = FIXTURES / "training" / scheme
        run_training(replace(tiny, scheme=scheme, out_dir=str(out)))
        print(f"training/{scheme}: {time.time() - t0:.1f} s")

    # Reward-weight sweep with two candidates (one degenerate).
    sweep_cfg = replace(
        tiny,
        scheme="s2r2l",
        episodes=2,
        out_dir=str(FIXTURES / "sweep"),
    )
    sweep_reward_weight(sweep_cfg, candidates=(0.0, 2.0))
    print(f"sweep: {time.time() - t0:.1f} s")

    # Trim what the frontend never reads (checkpoints, signal logs) so the
    # fixture tree stays small.
    for victim in FIXTURES.rglob("agents"):
        if victim.is_dir():
            shutil.rmtree(victim)
    for victim in FIXTURES.rglob("signals.jsonl"):
        victim.unlink()
    for victim in FIXTURES.rglob("*_training.csv"):
        victim.unlink()
    print(f"done: {time.time() - t0:.1f} s")


if __name__ == "__main__":
    main()
