"""Biobjective optimal insecticide control for a dengue transmission model."""

from .errors import ConfigurationError, DegenerateFrontError, NumericalFailure
from .model import (
    STATE_NAMES,
    ModelConfig,
    ModelParameters,
    StateTrajectory,
    StateVector,
    TimeGrid,
    integrate_rk4,
    load_model_config,
    rhs,
)
from .nlp import Constraint, ScalarProblem, SolveOptions, SolveResult, minimize
from .objectives import (
    Evaluator,
    ObjectivePoint,
    WeightedCostSpec,
    f1_infected_cost,
    f2_insecticide_cost,
    finite_difference_gradient,
    objective_gradient,
    weighted_cost_J,
)
from .pareto import (
    Knee,
    dominates,
    filter_front,
    hypervolume_2d,
    hypervolume_monte_carlo,
    knee_point,
    nondominated_filter,
    normalize_objectives,
)
from .scalarize import (
    METHODS,
    AnchorData,
    ParetoArchive,
    ScalarizationSpec,
    approximate_pareto,
    chebyshev_problem,
    compute_anchors,
    eps_constraint_problem,
    goal_attainment_problem,
    normal_constraint_problem,
    solve_scalarized,
)

__version__ = "0.1.0"
