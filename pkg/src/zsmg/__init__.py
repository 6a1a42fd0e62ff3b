"""Tabular two-player zero-sum Markov game toolkit.

Exact equilibrium solving (Shapley value iteration), minimax Q-learning,
approximate state aggregation under four similarity criteria, and
duality-gap evaluation of lifted policies, with a reproducible Markov
Soccer experiment harness.
"""

from zsmg.abstraction import (
    Abstraction,
    AbstractGame,
    aggregate_boltzmann,
    aggregate_minimax_q,
    aggregate_model,
    aggregate_multinomial,
    build_abstract_game,
    lift_policy,
)
from zsmg.evaluation import (
    GapReport,
    best_response,
    duality_gap,
    duality_gap_learned,
    theorem_bound,
)
from zsmg.game import (
    ExplicitGame,
    PolicyProfile,
    ShapleySolution,
    evaluate_policy,
    shapley_solve,
    validate_game,
)
from zsmg.learner import LearnerConfig, LearnerState, TrainResult, minimax_q_step, train
from zsmg.matrixgame import MatrixGameSolution, matrix_game_value, solve_matrix_game
from zsmg.soccer import SoccerState, build_soccer_game, enumerate_states

__all__ = [
    "AbstractGame",
    "Abstraction",
    "ExplicitGame",
    "GapReport",
    "LearnerConfig",
    "LearnerState",
    "MatrixGameSolution",
    "PolicyProfile",
    "ShapleySolution",
    "SoccerState",
    "TrainResult",
    "aggregate_boltzmann",
    "aggregate_minimax_q",
    "aggregate_model",
    "aggregate_multinomial",
    "best_response",
    "build_abstract_game",
    "build_soccer_game",
    "duality_gap",
    "duality_gap_learned",
    "enumerate_states",
    "evaluate_policy",
    "lift_policy",
    "matrix_game_value",
    "minimax_q_step",
    "shapley_solve",
    "solve_matrix_game",
    "theorem_bound",
    "train",
    "validate_game",
]
