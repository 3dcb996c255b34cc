"""gridsignal: decentralized deep-RL traffic signal control on a one-way grid.

Builds a 4x4 (or larger) one-way Manhattan grid, simulates it with a
collision-free car-following model at 1 s ticks, and trains/evaluates three
decentralized DQN controller schemes against a Max Pressure baseline.
"""

__version__ = "0.1.0"

from gridsignal.grid_scenario import (  # noqa: F401
    DemandSchedule,
    OdTable,
    RoadNetwork,
    Scenario,
    Trip,
    build_grid,
    build_od_table,
    load_scenario,
    route_trip,
    save_scenario,
    spawn_trips,
)
from gridsignal.microsim import (  # noqa: F401
    DetectorReading,
    FuelCoeffs,
    GridSim,
    KraussParams,
    MetricsRecord,
    SimConfig,
    Vehicle,
    fuel_rate,
    krauss_safe_speed,
)
from gridsignal.signal_exec import (  # noqa: F401
    SignalControllerState,
    SignalEventLog,
    apply_decision,
    elapsed_ratio,
    one_hot_stage,
)
from gridsignal.deep_q import (  # noqa: F401
    DqnLearner,
    DqnLearnerConfig,
    Experience,
    ReplayMemory,
    double_dqn_target,
)
from gridsignal.neuralnet import (  # noqa: F401
    MlpParams,
    load_checkpoint,
    mlp_init,
    save_checkpoint,
)
from gridsignal.max_pressure import (  # noqa: F401
    Movement,
    MovementState,
    lqf_select,
    max_pressure_requests,
    movement_weight,
    select_stage,
    stage_pressure,
)
from gridsignal.marl_agents import (  # noqa: F401
    AgentFleet,
    assemble_observation,
    assemble_shared_state,
    local_reward,
    shared_reward,
)
from gridsignal.exp_harness import (  # noqa: F401
    RunConfig,
    apply_profile,
    load_config_file,
    run_testing,
    run_training,
    sweep_max_green,
    sweep_reward_weight,
)
