"""Shared fixtures and game builders for the test suite."""

from __future__ import annotations

import numpy as np
import pytest

from zsmg.game import ExplicitGame


def make_random_game(
    rng: np.random.Generator,
    num_states: int = 5,
    actions_p1: int = 2,
    actions_p2: int = 2,
    gamma: float = 0.9,
    terminal_prob: float = 0.1,
) -> ExplicitGame:
    """Random dense game with rewards in [-1, 1] and optional terminal mass."""
    rewards = rng.uniform(-1.0, 1.0, size=(num_states, actions_p1, actions_p2))
    raw = rng.uniform(0.0, 1.0, size=(num_states, actions_p1, actions_p2, num_states))
    cont = 1.0 - terminal_prob * rng.uniform(0.0, 1.0, size=(num_states, actions_p1, actions_p2))
    probs = raw / raw.sum(axis=3, keepdims=True) * cont[..., None]
    return ExplicitGame.from_dense(rewards, probs, gamma, reward_range=(-1.0, 1.0))


@pytest.fixture(scope="session")
def soccer_game():
    from zsmg.soccer import build_soccer_game

    game, initial = build_soccer_game(0.9)
    return game, initial


@pytest.fixture(scope="session")
def soccer_solution(soccer_game):
    from zsmg.game import shapley_solve

    game, _ = soccer_game
    solution = shapley_solve(game, tol=1e-9)
    assert solution.converged
    return solution
