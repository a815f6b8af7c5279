"""Cache-friendly, position-aware recommendations for long viewing sessions."""
from .model import (QualityBaseline, RecommendationPolicy, Scenario, ScenarioError,
                    Violation, baseline_policy, compute_q_max, hit_rate_from_cost,
                    position_entropy, quality, quality_slack, validate_scenario)
from .session import (SessionChain, SimulationReport, build_chain, cost_per_content,
                      expected_cycle_cost, expected_cycle_length, session_cost,
                      simulate_sessions)
from .lp import LpProblem, LpSolution, LpStatus, check_feasibility, solve_lp, write_mps
from .optimal import (FlowSolution, SolveResult, SolverError, build_flow_lp, recover_policy,
                      solve_cars, solve_optimal)
from .greedy import greedy_full, greedy_per_content, solve_greedy, solve_myopic_lp
from .hybrid import ShrinkPlan, StopReason, p_shrink, plan_shrink, solve_hybrid
from .scenarios import (gen_synthetic, hierarchical_costs, load_matrix, load_scenario,
                        save_matrix, save_scenario)

__version__ = "0.1.0"
