"""The 4x5 Markov Soccer game as an explicit zero-sum Markov game.

Two players occupy distinct cells of a 4-row, 5-column grid; one of them
carries the ball. Each turn both pick a move (Up, Left, Down, Right, Stand)
and the two moves are executed in a uniformly random order. Moving into the
cell currently occupied by the opponent is blocked and hands the ball to the
stationary player; moving off the grid is blocked too, except that the ball
carrier stepping off through its own goal edge (the right edge for player 1,
the left edge for player 2, middle two rows by default) ends the game with
+1 for the scorer and -1 for the opponent.

Because the order of execution matters mid-turn (a bumped carrier keeps the
ball; a bumping carrier loses it), transitions are averaged over both
orders. There are 20*19*2 = 760 non-terminal states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from zsmg.game import ExplicitGame

ROWS = 4
COLS = 5

ACTION_NAMES = ("Up", "Left", "Down", "Right", "Stand")
_MOVES = ((-1, 0), (0, -1), (1, 0), (0, 1), (0, 0))
UP, LEFT, DOWN, RIGHT, STAND = range(5)

DEFAULT_P1_START = (2, 1)
DEFAULT_P2_START = (1, 3)
DEFAULT_GOAL_ROWS = (1, 2)


@dataclass(frozen=True)
class SoccerState:
    """Positions of both players (row, col) and the ball owner (1 or 2)."""

    pos1: tuple[int, int]
    pos2: tuple[int, int]
    ball_owner: int

    def label(self) -> str:
        return f"({self.pos1[0]},{self.pos1[1]},{self.pos2[0]},{self.pos2[1]},{self.ball_owner})"


def enumerate_states() -> list[SoccerState]:
    """All 760 non-terminal states, lexicographic in (pos1, pos2, ball)."""
    states = []
    cells = [(r, c) for r in range(ROWS) for c in range(COLS)]
    for pos1 in cells:
        for pos2 in cells:
            if pos1 == pos2:
                continue
            for ball in (1, 2):
                states.append(SoccerState(pos1, pos2, ball))
    return states


def _resolve_order(
    state: SoccerState,
    a1: int,
    a2: int,
    first: int,
    goal_rows: tuple[int, ...],
):
    """Execute the two moves with `first` moving first.

    Returns (next_state, 0.0) or (None, reward) when a goal ends the game.
    """
    pos = {1: state.pos1, 2: state.pos2}
    actions = {1: a1, 2: a2}
    ball = state.ball_owner
    for mover in (first, 3 - first):
        other = 3 - mover
        dr, dc = _MOVES[actions[mover]]
        r, c = pos[mover]
        target = (r + dr, c + dc)
        if ball == mover:
            # Scoring: the carrier steps off through its own goal edge.
            if mover == 1 and c == COLS - 1 and actions[mover] == RIGHT and r in goal_rows:
                return None, 1.0
            if mover == 2 and c == 0 and actions[mover] == LEFT and r in goal_rows:
                return None, -1.0
        if not (0 <= target[0] < ROWS and 0 <= target[1] < COLS):
            continue  # blocked at the edge (incl. wrong-goal and non-carrier)
        if target == pos[other]:
            ball = other  # bump: possession to the stationary player
            continue
        pos[mover] = target
    return SoccerState(pos[1], pos[2], ball), 0.0


def step_distribution(
    state: SoccerState,
    a1: int,
    a2: int,
    goal_rows: tuple[int, ...] = DEFAULT_GOAL_ROWS,
) -> dict[SoccerState | None, tuple[float, float]]:
    """Outcome distribution of one joint move, averaged over both orders.

    Maps each outcome to (probability, reward); the key None is the terminal
    outcome (reward +-1), non-terminal outcomes carry reward 0.
    """
    outcomes: dict[SoccerState | None, tuple[float, float]] = {}
    for first in (1, 2):
        nxt, reward = _resolve_order(state, a1, a2, first, goal_rows)
        prob, _ = outcomes.get(nxt, (0.0, 0.0))
        outcomes[nxt] = (prob + 0.5, reward)
    return outcomes


def build_soccer_game(
    gamma: float,
    p1_start: tuple[int, int] = DEFAULT_P1_START,
    p2_start: tuple[int, int] = DEFAULT_P2_START,
    goal_rows: tuple[int, ...] = DEFAULT_GOAL_ROWS,
) -> tuple[ExplicitGame, np.ndarray]:
    """Assemble the full 760-state game and its initial-state distribution.

    The initial distribution puts probability 1/2 on each ball-possession
    variant of the fixed starting positions. Rewards stored on the game are
    per-profile expectations, so rows where only one execution order scores
    carry +-0.5.
    """
    if not 0.0 <= gamma < 1.0:
        raise ValueError(f"gamma must be in [0, 1), got {gamma}")
    if p1_start == p2_start:
        raise ValueError("players must start on distinct squares")
    states = enumerate_states()
    index = {s: i for i, s in enumerate(states)}
    num_actions = len(ACTION_NAMES)
    rewards = np.zeros((len(states), num_actions, num_actions))
    kernel: dict[tuple[int, int, int], list[tuple[int, float]]] = {}
    for s, state in enumerate(states):
        for a1 in range(num_actions):
            for a2 in range(num_actions):
                succ = []
                expected_reward = 0.0
                for outcome, (prob, reward) in step_distribution(
                    state, a1, a2, goal_rows
                ).items():
                    expected_reward += prob * reward
                    if outcome is not None:
                        succ.append((index[outcome], prob))
                rewards[s, a1, a2] = expected_reward
                kernel[(s, a1, a2)] = succ
    game = ExplicitGame.from_kernel(
        rewards,
        kernel,
        gamma,
        reward_range=(-1.0, 1.0),
        state_labels=[s.label() for s in states],
    )
    initial = np.zeros(len(states))
    initial[index[SoccerState(p1_start, p2_start, 1)]] = 0.5
    initial[index[SoccerState(p1_start, p2_start, 2)]] = 0.5
    return game, initial


def mirror_state_index() -> np.ndarray:
    """Index permutation for the left-right mirror with players swapped.

    Mirroring column c -> COLS-1-c and exchanging the two players (including
    ball possession) maps the game onto itself with payoffs negated; V* of a
    state equals -V* of its image.
    """
    states = enumerate_states()
    index = {s: i for i, s in enumerate(states)}
    perm = np.empty(len(states), dtype=int)
    for i, s in enumerate(states):
        m1 = (s.pos2[0], COLS - 1 - s.pos2[1])
        m2 = (s.pos1[0], COLS - 1 - s.pos1[1])
        perm[i] = index[SoccerState(m1, m2, 3 - s.ball_owner)]
    return perm


def mirror_action_index() -> np.ndarray:
    """Action permutation matching mirror_state_index (Left <-> Right)."""
    perm = np.arange(len(ACTION_NAMES))
    perm[LEFT], perm[RIGHT] = RIGHT, LEFT
    return perm
