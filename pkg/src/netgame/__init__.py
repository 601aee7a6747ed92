"""netgame: equilibria, sensitivities, and subsidy design for network games
with endogenous link formation."""

from .model import (
    ACTION_SUM,
    LINK_SUM,
    GameParameters,
    Instance,
    Intervention,
    StrategyProfile,
    WelfareSpec,
    agent_utility,
    instance_from_json,
    instance_to_json,
    load_instance,
    planner_payment,
    save_instance,
    welfare,
)
from .equilibrium import (
    EquilibriumReport,
    NonConvergentError,
    best_response_actions,
    best_response_links,
    equilibrium_welfare,
    solve_equilibrium,
    verify_proposition1,
)
from .sensitivity import (
    OracleUnavailableError,
    SensitivityReport,
    SingularSystemError,
    SpilloverMatrix,
    build_spillover_matrix,
    d_actions_d_beta,
    d_actions_d_sigma,
    d_welfare,
    feedback_spectral_radius,
    finite_difference_oracle,
)
from .planner import (
    DegenerateMultiplierError,
    KKTReport,
    NoFeasibleInterventionError,
    OptimizationResult,
    check_theorem1_structure,
    grid_search_oracle,
    kkt_check,
    optimize_intervention,
    restricted_optimize,
)
from .benchmark import (
    BenchmarkEquilibrium,
    check_theorem2,
    optimize_benchmark,
    solve_benchmark,
)
from .general import (
    IllPosedBRError,
    PowerFamilySpec,
    check_theorem3,
    classify_cost,
    classify_spillover,
    general_best_response,
    optimize_general,
    solve_general_equilibrium,
)
from .experiments import (
    ExperimentConfig,
    generate_example1_instance,
    run_example1,
    run_theorem_campaign,
)

__all__ = [name for name in dir() if not name.startswith("_")]
