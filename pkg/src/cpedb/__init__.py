"""Combinatorial pure exploration with dueling bandits over bipartite matchings.

Borda-winner identification (CLUCB-Borda-PAC / -Exact) and Condorcet-winner
identification (CAR-Cond / -Verify / -Parallel), plus the brute-force
oracles, samplers and minimax solvers they rest on.
"""
from .errors import (BudgetExceeded, CpedbError, IncomparablePair, InfeasibleConstraints,
                     InfeasibleMinSide, InstanceTooLarge, NonUniqueWinner, NotMixed,
                     VerificationError)
from .graph import (BipartiteGraph, ConstraintPair, Matching, enumerate_maximum_matchings,
                    min_cost_maximum_matching, mwmc, width)
from .preference import (PreferenceMatrix, borda_score, compute_gaps, edge_rewards,
                         find_borda_winner, find_condorcet_winner, matching_preference)
from .sampler import SamplerConfig, sample_matching, sample_matchings
from .env import DuelEnvironment, DuelStats, confidence_radius
from .borda import clucb_borda_exact, clucb_borda_pac
from .oracle import (OracleConfig, OracleResult, PolytopePoint, approx_project,
                     exact_game_value, inner_min, minimax_oracle)
from .condorcet import (CarCond, CarParallel, CarVerify, car_cond, car_parallel, car_verify,
                        parallel_schedule, second_best_response)
from .experiment import ExperimentConfig, emit_report, load_config, run_experiment

__version__ = "0.1.0"
