"""Tests for the zero-sum matrix game solver."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from zsmg.matrixgame import matrix_game_value, solve_matrix_game

from oracles import grid_search_maximin, grid_search_minimax


def support_check(payoff, sol, tol=1e-9):
    """MatrixGameSolution invariants: distributions, strong duality, and
    support optimality of both strategies."""
    payoff = np.asarray(payoff, dtype=float)
    assert sol.row_strategy.min() >= -1e-13
    assert sol.col_strategy.min() >= -1e-13
    assert abs(sol.row_strategy.sum() - 1.0) <= 1e-10
    assert abs(sol.col_strategy.sum() - 1.0) <= 1e-10
    guaranteed = sol.row_strategy @ payoff  # payoff vs every pure column
    conceded = payoff @ sol.col_strategy  # payoff of every pure row
    assert guaranteed.min() >= sol.value - tol
    assert conceded.max() <= sol.value + tol
    # Strong duality: both players certify the same value.
    assert abs(guaranteed.min() - conceded.max()) <= tol


def test_rock_paper_scissors_exact():
    payoff = np.array([[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]])
    sol = solve_matrix_game(payoff)
    assert abs(sol.value) <= 1e-12
    np.testing.assert_allclose(sol.row_strategy, np.full(3, 1 / 3), atol=1e-12)
    np.testing.assert_allclose(sol.col_strategy, np.full(3, 1 / 3), atol=1e-12)


def test_constant_matrix_uniform_tiebreak():
    sol = solve_matrix_game(np.full((4, 3), 0.7))
    assert sol.value == pytest.approx(0.7, abs=1e-12)
    np.testing.assert_allclose(sol.row_strategy, np.full(4, 0.25), atol=0)
    np.testing.assert_allclose(sol.col_strategy, np.full(3, 1 / 3), atol=0)


def test_2x2_closed_form():
    # Row equalizes 3p + (1-p) = 2(1-p)  =>  p = 1/4, value 1.5.
    sol = solve_matrix_game([[3.0, 0.0], [1.0, 2.0]])
    assert sol.value == pytest.approx(1.5, abs=1e-12)
    np.testing.assert_allclose(sol.row_strategy, [0.25, 0.75], atol=1e-12)
    np.testing.assert_allclose(sol.col_strategy, [0.5, 0.5], atol=1e-12)
    support_check([[3.0, 0.0], [1.0, 2.0]], sol)


def test_single_row_and_single_column():
    sol = solve_matrix_game([[2.0, -1.0, 0.5]])
    assert sol.value == -1.0
    np.testing.assert_array_equal(sol.col_strategy, [0.0, 1.0, 0.0])
    sol = solve_matrix_game([[2.0], [-1.0], [3.0]])
    assert sol.value == 3.0
    np.testing.assert_array_equal(sol.row_strategy, [0.0, 0.0, 1.0])
    sol = solve_matrix_game([[4.0]])
    assert sol.value == 4.0


def test_pure_saddle_point():
    payoff = np.array([[1.0, 2.0, 0.5], [0.0, -1.0, -2.0]])
    sol = solve_matrix_game(payoff)
    assert sol.value == 0.5
    support_check(payoff, sol)


def test_non_finite_entries_rejected():
    with pytest.raises(ValueError):
        solve_matrix_game([[np.nan, 1.0], [0.0, 2.0]])
    with pytest.raises(ValueError):
        solve_matrix_game([[np.inf, 1.0], [0.0, 2.0]])
    with pytest.raises(ValueError):
        solve_matrix_game(np.zeros((0, 3)))


def test_deterministic_repeat():
    rng = np.random.default_rng(7)
    payoff = rng.uniform(-1, 1, (5, 5))
    a = solve_matrix_game(payoff)
    b = solve_matrix_game(payoff)
    assert a.value == b.value
    assert np.array_equal(a.row_strategy, b.row_strategy)
    assert np.array_equal(a.col_strategy, b.col_strategy)


def test_random_matrices_duality_and_grid():
    rng = np.random.default_rng(42)
    for _ in range(120):
        m = int(rng.integers(2, 7))
        n = int(rng.integers(2, 7))
        payoff = rng.uniform(-1.0, 1.0, (m, n))
        sol = solve_matrix_game(payoff)
        support_check(payoff, sol)
        lower = grid_search_maximin(payoff)
        upper = grid_search_minimax(payoff)
        # Grid points are feasible strategies, hence sound one-sided bounds.
        assert lower <= sol.value + 1e-9
        assert upper >= sol.value - 1e-9
        assert abs(sol.value - lower) <= 1e-3
        assert abs(sol.value - upper) <= 1e-3


@settings(max_examples=60, deadline=None)
@given(
    st.integers(2, 5),
    st.integers(2, 5),
    st.integers(0, 10_000),
    st.floats(0.1, 5.0),
    st.floats(-2.0, 2.0),
)
def test_shift_scale_equivariance(m, n, seed, alpha, beta):
    rng = np.random.default_rng(seed)
    payoff = rng.uniform(-1.0, 1.0, (m, n))
    base = solve_matrix_game(payoff)
    shifted = solve_matrix_game(alpha * payoff + beta)
    assert shifted.value == pytest.approx(alpha * base.value + beta, abs=1e-9)
    # Strategy sets can be non-unique; check optimality via support conditions.
    support_check(alpha * payoff + beta, shifted)
    guaranteed = base.row_strategy @ (alpha * payoff + beta)
    assert guaranteed.min() >= shifted.value - 1e-9


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.integers(2, 6), st.integers(0, 10_000))
def test_transposition_antisymmetry(m, n, seed):
    rng = np.random.default_rng(seed)
    payoff = rng.uniform(-1.0, 1.0, (m, n))
    assert matrix_game_value(-payoff.T) == pytest.approx(
        -matrix_game_value(payoff), abs=1e-9
    )
