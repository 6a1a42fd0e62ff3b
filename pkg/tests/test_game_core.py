"""Tests for the explicit game model, policy evaluation and Shapley solving."""

import numpy as np
import pytest

from zsmg.game import (
    ExplicitGame,
    PolicyProfile,
    evaluate_policy,
    shapley_solve,
    validate_game,
)

from conftest import make_random_game
from oracles import policy_value_linear_solve


def single_state_game(reward=1.0, gamma=0.9, self_loop=1.0):
    rewards = np.full((1, 1, 1), reward)
    probs = np.full((1, 1, 1, 1), self_loop)
    return ExplicitGame.from_dense(rewards, probs, gamma)


def matching_pennies_game(gamma=0.9):
    rewards = np.array([[[1.0, -1.0], [-1.0, 1.0]]])
    probs = np.ones((1, 2, 2, 1))
    return ExplicitGame.from_dense(rewards, probs, gamma, reward_range=(-1.0, 1.0))


class TestValidateGame:
    def test_well_formed_game_is_clean(self, soccer_game):
        game, _ = soccer_game
        assert validate_game(game) == []

    def test_bad_row_sum_is_named(self):
        rewards = np.zeros((2, 1, 1))
        probs = np.zeros((2, 1, 1, 2))
        probs[0, 0, 0, 1] = 1.0
        probs[1, 0, 0] = [0.45, 0.45]  # sums to 0.9 with no terminal mass
        game = ExplicitGame.from_dense(rewards, probs, 0.9)
        object.__setattr__(game, "terminal_mass", np.zeros((2, 1, 1)))
        report = validate_game(game)
        assert any("(1, 0, 0)" in v for v in report)

    def test_gamma_out_of_range(self):
        game = single_state_game()
        object.__setattr__(game, "gamma", 1.0)
        report = validate_game(game)
        assert any("discount out of range" in v for v in report)

    def test_reward_outside_declared_range(self):
        rewards = np.full((1, 1, 1), 2.0)
        probs = np.ones((1, 1, 1, 1))
        game = ExplicitGame.from_dense(rewards, probs, 0.9, reward_range=(-1.0, 1.0))
        assert any("declared range" in v for v in validate_game(game))


class TestEvaluatePolicy:
    def test_zero_rewards_give_zero_values(self):
        rng = np.random.default_rng(0)
        game = make_random_game(rng, num_states=4)
        game = ExplicitGame.from_dense(
            np.zeros_like(game.rewards),
            game.transitions.toarray().reshape(4, 2, 2, 4),
            game.gamma,
        )
        profile = PolicyProfile.uniform(4, 2, 2)
        v, q = evaluate_policy(game, profile, tol=1e-10)
        np.testing.assert_allclose(v, 0.0, atol=1e-12)
        np.testing.assert_allclose(q, 0.0, atol=1e-12)

    def test_geometric_series_self_loop(self):
        game = single_state_game(reward=1.0, gamma=0.9)
        v, q = evaluate_policy(game, PolicyProfile.uniform(1, 1, 1), tol=1e-12)
        assert v[0] == pytest.approx(10.0, abs=1e-9)
        assert q[0, 0, 0] == pytest.approx(10.0, abs=1e-9)

    def test_matches_dense_linear_solve(self):
        rng = np.random.default_rng(5)
        for _ in range(5):
            game = make_random_game(rng, num_states=5, actions_p1=2, actions_p2=3)
            profile = PolicyProfile.uniform(5, 2, 3)
            v, _ = evaluate_policy(game, profile, tol=1e-10)
            expected = policy_value_linear_solve(game, profile)
            np.testing.assert_allclose(v, expected, atol=1e-8)

    def test_bellman_residual_below_tol(self):
        rng = np.random.default_rng(6)
        game = make_random_game(rng, num_states=6)
        profile = PolicyProfile.uniform(6, 2, 2)
        tol = 1e-9
        v, q = evaluate_policy(game, profile, tol=tol)
        backed_up = np.einsum("sa,sab,sb->s", profile.pi1, q, profile.pi2)
        assert np.max(np.abs(backed_up - v)) < tol

    def test_dimension_mismatch_raises(self):
        game = single_state_game()
        with pytest.raises(ValueError):
            evaluate_policy(game, PolicyProfile.uniform(2, 1, 1))
        with pytest.raises(ValueError):
            evaluate_policy(game, PolicyProfile.uniform(1, 1, 1), tol=-1.0)


class TestShapleySolve:
    def test_degenerate_opponent_reduces_to_mdp(self):
        # Player 2 has one action: solve as a plain MDP by value iteration.
        rng = np.random.default_rng(7)
        rewards = rng.uniform(-1, 1, (4, 3, 1))
        raw = rng.uniform(0, 1, (4, 3, 1, 4))
        probs = raw / raw.sum(axis=3, keepdims=True) * 0.9
        game = ExplicitGame.from_dense(rewards, probs, 0.8)
        sol = shapley_solve(game, tol=1e-10)

        v = np.zeros(4)
        for _ in range(3000):
            q = rewards[:, :, 0] + 0.8 * np.einsum("sat,t->sa", probs[:, :, 0], v)
            v = q.max(axis=1)
        np.testing.assert_allclose(sol.values, v, atol=1e-8)

    def test_matching_pennies(self):
        game = matching_pennies_game()
        sol = shapley_solve(game, tol=1e-10)
        assert sol.converged
        assert sol.values[0] == pytest.approx(0.0, abs=1e-9)
        np.testing.assert_allclose(sol.profile.pi1[0], [0.5, 0.5], atol=1e-9)
        np.testing.assert_allclose(sol.profile.pi2[0], [0.5, 0.5], atol=1e-9)

    def test_random_games_have_tiny_equilibrium_gap(self):
        from zsmg.evaluation import duality_gap

        rng = np.random.default_rng(8)
        tol = 1e-9
        for _ in range(8):
            game = make_random_game(rng, num_states=6, actions_p1=3, actions_p2=3)
            sol = shapley_solve(game, tol=tol)
            assert sol.converged
            report = duality_gap(game, sol.profile, tol=tol)
            assert report.gap <= 10 * tol / (1 - game.gamma)

    def test_contraction_of_residuals(self):
        rng = np.random.default_rng(9)
        game = make_random_game(rng, num_states=6, gamma=0.9)
        sol = shapley_solve(game, tol=1e-9)
        res = sol.residuals
        for before, after in zip(res[1:-1], res[2:]):
            if before > 1e-13:  # below that, floating noise dominates
                assert after <= game.gamma * before * (1 + 1e-9) + 1e-15

    def test_swapping_players_negates_values(self):
        rng = np.random.default_rng(10)
        game = make_random_game(rng, num_states=5, actions_p1=3, actions_p2=2)
        tol = 1e-9
        sol = shapley_solve(game, tol=tol)
        swapped = shapley_solve(game.swap_players(), tol=tol)
        np.testing.assert_allclose(swapped.values, -sol.values, atol=2 * tol)

    def test_max_iters_reports_failure_with_last_iterate(self):
        game = single_state_game(reward=1.0, gamma=0.99)
        sol = shapley_solve(game, tol=1e-12, max_iters=3)
        assert not sol.converged
        assert len(sol.residuals) == 3
        assert sol.values.shape == (1,)
        assert sol.residuals[-1] == pytest.approx(0.99**2, abs=1e-12)


class TestExplicitGameModel:
    def test_value_bounds(self):
        game = single_state_game(reward=1.0, gamma=0.9)
        lo, hi = game.value_bounds
        assert hi == pytest.approx(10.0)

    def test_successors_roundtrip(self):
        rng = np.random.default_rng(11)
        game = make_random_game(rng, num_states=4)
        idx, probs = game.successors(2, 1, 0)
        dense = game.transitions.toarray().reshape(4, 2, 2, 4)
        np.testing.assert_allclose(dense[2, 1, 0, idx], probs)
        assert probs.sum() + game.terminal_mass[2, 1, 0] == pytest.approx(1.0)

    def test_from_kernel_terminal_mass(self):
        rewards = np.zeros((2, 1, 1))
        kernel = {(0, 0, 0): [(1, 0.25)], (1, 0, 0): []}
        game = ExplicitGame.from_kernel(rewards, kernel, 0.9)
        assert game.terminal_mass[0, 0, 0] == pytest.approx(0.75)
        assert game.terminal_mass[1, 0, 0] == pytest.approx(1.0)
        assert validate_game(game) == []
