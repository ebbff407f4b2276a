"""Energy transport through dissipative qubit chains with tunable dephasing."""

from .errors import (
    ConfigError,
    DimensionCap,
    NotConverged,
    SingularSchedule,
    StepSizeUnderflow,
)
from .integrator import IntegratorConfig, efficiency, integrate, resolve_max_step
from .liouvillian import BlockOperators, BlockRHS, apply_rhs, build_block_operators
from .model import (
    ChainModel,
    DephasingSchedule,
    Trajectory,
    accumulated_dephasing,
    dephasing_rate,
    energy_shift,
    hermitize,
    initial_block_state,
    pole_time,
)
from .oracle import (
    full_hamiltonian,
    full_rhs,
    integrate_full,
    run_validation,
    validate_reduction,
)
from .sweep import (
    ExperimentConfig,
    Scenario,
    SweepResult,
    SweepRow,
    markovian,
    no_dephasing,
    non_markovian,
    preset_fig2,
    preset_fig3,
    preset_fig4,
    run_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "BlockOperators",
    "BlockRHS",
    "ChainModel",
    "ConfigError",
    "DephasingSchedule",
    "DimensionCap",
    "ExperimentConfig",
    "IntegratorConfig",
    "NotConverged",
    "Scenario",
    "SingularSchedule",
    "StepSizeUnderflow",
    "SweepResult",
    "SweepRow",
    "Trajectory",
    "accumulated_dephasing",
    "apply_rhs",
    "build_block_operators",
    "dephasing_rate",
    "efficiency",
    "energy_shift",
    "full_hamiltonian",
    "full_rhs",
    "hermitize",
    "initial_block_state",
    "integrate",
    "integrate_full",
    "markovian",
    "no_dephasing",
    "non_markovian",
    "pole_time",
    "preset_fig2",
    "preset_fig3",
    "preset_fig4",
    "resolve_max_step",
    "run_sweep",
    "run_validation",
    "validate_reduction",
]
