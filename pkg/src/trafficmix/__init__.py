"""Kinetic models of heterogeneous traffic flow on discrete speed lattices.

The package simulates one- and two-population vehicle mixtures (e.g. cars and
trucks with different lengths and top speeds), relaxes the interaction
dynamics to equilibrium with a mass-conserving formulation, evaluates
closed-form free-phase equilibria, and produces fundamental-diagram datasets
and figures.
"""

__version__ = "0.1.0"

from .config import (
    ConfigError,
    ModelParams,
    NumericsParams,
    PopulationSpec,
    SpeedLattice,
    admissible,
    load_config,
    occupancy,
    table1_params,
)
from .tables import (
    GameTables,
    TransitionProbabilities,
    build_cross_tables,
    build_game_tables,
    build_self_tables,
    check_stochastic,
    transition_probabilities,
)
from .kinetics import (
    MixtureState,
    Moments,
    moments,
    rhs_single,
    rhs_single_naive,
    rhs_two_population,
)
from .integrator import (
    NumericalFailureError,
    RelaxationResult,
    relax_to_equilibrium,
    stability_timestep,
    step,
)
from .oracle import (
    FreePhaseEquilibrium,
    critical_space,
    free_phase_equilibrium,
    max_flux,
    single_pop_equilibrium_two_speeds,
)
from .diagrams import (
    DiagramPoint,
    SweepSpec,
    macroscopic_flux,
    random_mixtures,
    run_sweep,
    scatter_statistics,
    table2_mixtures,
)

__all__ = [
    "ConfigError",
    "DiagramPoint",
    "FreePhaseEquilibrium",
    "GameTables",
    "MixtureState",
    "ModelParams",
    "Moments",
    "NumericalFailureError",
    "NumericsParams",
    "PopulationSpec",
    "RelaxationResult",
    "SpeedLattice",
    "SweepSpec",
    "TransitionProbabilities",
    "admissible",
    "build_cross_tables",
    "build_game_tables",
    "build_self_tables",
    "check_stochastic",
    "critical_space",
    "free_phase_equilibrium",
    "load_config",
    "macroscopic_flux",
    "max_flux",
    "moments",
    "occupancy",
    "random_mixtures",
    "relax_to_equilibrium",
    "rhs_single",
    "rhs_single_naive",
    "rhs_two_population",
    "run_sweep",
    "scatter_statistics",
    "single_pop_equilibrium_two_speeds",
    "stability_timestep",
    "step",
    "table1_params",
    "table2_mixtures",
    "transition_probabilities",
]
