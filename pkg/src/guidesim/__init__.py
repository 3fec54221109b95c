"""Agent-based vehicle route guidance simulator.

Travelers learn link costs from spatially propagating information items
whose influence is shaped by a pluggable kernel; the experiments layer
compares, sweeps, and optimizes kernels against average travel time.
"""

from .behavior import (
    Agent,
    EquilibriumFeedback,
    MinPerceivedCost,
    Mode,
    SelectionContext,
    SelectionModel,
    choose_route,
    gate_precedes_reaction,
    selection_probability,
)
from .engine import (
    EmissionConfig,
    Metrics,
    ScenarioConfig,
    Simulation,
    TimeSeries,
    compute_metrics,
    count_direction_flips,
    run,
    write_metrics_csv,
    write_timeseries_csv,
)
from .errors import (
    GuidesimError,
    MatchIntegralError,
    NetworkFormatError,
    ScenarioError,
    UnreachableError,
    ValidationError,
)
from .experiments import (
    EquivalenceReport,
    OptimizationResult,
    equivalence_trial,
    match_integral,
    optimize,
    sweep,
)
from .kernels import (
    Domain2D,
    GlobalGap,
    KernelSpec,
    LocalGap,
    NaturalGlobal,
    NaturalLocal,
    NaturalSpaceTime,
    PhaseOrder,
    Principle1,
    PrincipleReport,
    Zero,
    build_kernel,
    check_principles,
    evaluate,
    phase_distance,
    phase_lead,
    total_influence,
)
from .learning import (
    InfoItem,
    LearningConfig,
    PerceivedCosts,
    apply_update,
    compute_weight,
    default_max_age,
    initial_costs,
    step_learning,
)
from .network import (
    DemandEntry,
    Link,
    Network,
    Node,
    graph_distance,
    link_travel_time,
    load_network,
    shortest_path,
)
from .scenario import load_scenario, parse_scenario

__version__ = "0.1.0"
