"""Python interface to the opme C++ core.

Everything here is re-exported from the compiled ``_core`` extension; tensors
come back as NumPy arrays.
"""

from ._core import (
    AggregatedMDP,
    CapacityError,
    Classes,
    ConfigError,
    Config,
    Episode,
    Model,
    OptimismMode,
    ParseError,
    PlanResult,
    Policy,
    RealizabilityError,
    RunResult,
    Scenario,
    TransitionMode,
    ValidationError,
    __version__,
    check_realizability,
    evaluate_policy,
    ill_posedness,
    load_config,
    make_scenario,
    mixture_value,
    occupancy,
    parse_config,
    regret_curve,
    rollout,
    run_experiment,
    run_opme,
    scenario_names,
    transfer_term,
    true_aggregated_model,
    validate_config,
    value_iteration,
)

__all__ = [name for name in dir() if not name.startswith("_")] + ["__version__"]
