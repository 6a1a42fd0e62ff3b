"""Tabular minimax Q-learning for explicit zero-sum Markov games.

One iteration: both players mix their current per-state policies with a
uniform exploration component, sample a joint action and a successor,
TD-update the visited state's Q entry toward reward + gamma * V(successor)
(V of the terminal absorber is 0), re-solve that state's matrix game by
linear programming, and refresh V as the bilinear value of the new policies.
A terminal transition resets the walk to a fresh draw from the initial
distribution.

Training is strictly sequential over one mutable learner state; distinct
runs (seeds, games) parallelize freely.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from zsmg.game import ExplicitGame, PolicyProfile
from zsmg.matrixgame import solve_matrix_game


def decaying_power_schedule(total_iters: int) -> Callable[[int], float]:
    """The reference learning-rate schedule 10^(-2 t / T)."""
    span = max(total_iters, 1)

    def alpha(t: int) -> float:
        return 10.0 ** (-2.0 * t / span)

    return alpha


def constant_schedule(rate: float) -> Callable[[int], float]:
    if not 0.0 < rate <= 1.0:
        raise ValueError("constant learning rate must be in (0, 1]")
    return lambda t: rate


@dataclass
class LearnerConfig:
    """Hyperparameters of one training run.

    lr_schedule maps the iteration index to a step size in (0, 1]; it
    defaults to the decaying power schedule over total_iters.
    checkpoint_every defaults to total_iters // 50.
    """

    total_iters: int
    gamma: float
    beta: float = 0.2
    lr_schedule: Callable[[int], float] | None = None
    checkpoint_every: int | None = None
    rng_seed: int = 0

    def __post_init__(self):
        if self.total_iters < 0:
            raise ValueError("total_iters must be non-negative")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must lie in [0, 1]")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if self.lr_schedule is None:
            self.lr_schedule = decaying_power_schedule(self.total_iters)
        if self.checkpoint_every is None:
            self.checkpoint_every = max(1, self.total_iters // 50)
        if self.checkpoint_every < 1:
            raise ValueError("checkpoint_every must be >= 1")


@dataclass
class LearnerState:
    """Mutable tables of a run: Q, V, the current policies, and position."""

    q: np.ndarray
    v: np.ndarray
    profile: PolicyProfile
    iter: int
    current_state: int
    visit_counts: np.ndarray

    @classmethod
    def fresh(cls, game: ExplicitGame, start_state: int) -> "LearnerState":
        return cls(
            q=np.zeros((game.num_states, game.actions_p1, game.actions_p2)),
            v=np.zeros(game.num_states),
            profile=PolicyProfile.uniform(
                game.num_states, game.actions_p1, game.actions_p2
            ),
            iter=0,
            current_state=start_state,
            visit_counts=np.zeros(game.num_states, dtype=np.int64),
        )


@dataclass(frozen=True)
class TrainResult:
    """checkpoints is the list of (iteration, policy profile snapshot)."""

    checkpoints: list[tuple[int, PolicyProfile]]
    final_state: LearnerState = field(repr=False)


def _sample(cdf_row: np.ndarray, u: float) -> int:
    # min() guards the ~1-ulp case where the final cumsum lands below 1.
    return min(int(np.searchsorted(cdf_row, u, side="right")), len(cdf_row) - 1)


def minimax_q_step(
    game: ExplicitGame,
    state: LearnerState,
    config: LearnerConfig,
    rng: np.random.Generator,
    initial_cdf: np.ndarray,
) -> LearnerState:
    """One learning iteration, updating the state in place.

    Consumes exactly three RNG draws (action 1, action 2, successor) plus a
    fourth on terminal reset, which keeps runs bit-reproducible per seed.
    """
    s = state.current_state
    beta = config.beta
    mixed1 = (1.0 - beta) * state.profile.pi1[s] + beta / game.actions_p1
    mixed2 = (1.0 - beta) * state.profile.pi2[s] + beta / game.actions_p2
    a1 = _sample(np.cumsum(mixed1), rng.random())
    a2 = _sample(np.cumsum(mixed2), rng.random())

    succ_idx, succ_prob = game.successors(s, a1, a2)
    u = rng.random()
    acc = game.terminal_mass[s, a1, a2]
    nxt = -1
    if u >= acc:
        for i, p in zip(succ_idx, succ_prob):
            acc += p
            if u < acc:
                nxt = int(i)
                break
        else:
            nxt = int(succ_idx[-1])  # guard against rounding at u ~ 1

    alpha = config.lr_schedule(state.iter)
    v_next = 0.0 if nxt < 0 else state.v[nxt]
    target = game.rewards[s, a1, a2] + config.gamma * v_next
    state.q[s, a1, a2] = (1.0 - alpha) * state.q[s, a1, a2] + alpha * target

    sol = solve_matrix_game(state.q[s])
    state.profile.pi1[s] = sol.row_strategy
    state.profile.pi2[s] = sol.col_strategy
    state.v[s] = state.profile.pi1[s] @ state.q[s] @ state.profile.pi2[s]

    state.visit_counts[s] += 1
    state.iter += 1
    state.current_state = nxt if nxt >= 0 else _sample(initial_cdf, rng.random())
    return state


def train(
    game: ExplicitGame,
    config: LearnerConfig,
    initial_distribution: np.ndarray | None = None,
) -> TrainResult:
    """Run minimax Q-learning for total_iters steps.

    Emits a policy snapshot at iteration 0, then every checkpoint_every
    iterations, plus the final profile. Fully deterministic given
    config.rng_seed.
    """
    if initial_distribution is None:
        initial_distribution = np.full(game.num_states, 1.0 / game.num_states)
    initial_distribution = np.asarray(initial_distribution, dtype=float)
    if initial_distribution.shape != (game.num_states,):
        raise ValueError("initial distribution has wrong length")
    initial_cdf = np.cumsum(initial_distribution)
    rng = np.random.default_rng(config.rng_seed)
    state = LearnerState.fresh(game, _sample(initial_cdf, rng.random()))

    checkpoints = [(0, state.profile.copy())]
    for t in range(config.total_iters):
        minimax_q_step(game, state, config, rng, initial_cdf)
        if (t + 1) % config.checkpoint_every == 0 and t + 1 < config.total_iters:
            checkpoints.append((t + 1, state.profile.copy()))
    if config.total_iters > 0:
        checkpoints.append((config.total_iters, state.profile.copy()))
    return TrainResult(checkpoints=checkpoints, final_state=state)
