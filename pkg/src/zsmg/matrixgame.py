"""Exact maximin/minimax solving of finite zero-sum matrix games.

The row player maximizes, the column player minimizes. Solving goes through
the classical reciprocal-form linear program after shifting (and rescaling)
the payoffs to be positive, using a dense tableau simplex with Bland's
anti-cycling rule. Matrices here are tiny (5x5 in the soccer game), so the
implementation favours determinism and robustness over asymptotic speed:
the same matrix always produces bit-identical strategies, on any platform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_PIVOT_TOL = 1e-11
_MAX_PIVOTS = 10_000


@dataclass(frozen=True)
class MatrixGameSolution:
    """Value and optimal mixed strategies of a zero-sum matrix game.

    The value is unique; the strategies are one deterministic choice among
    the (possibly many) optimal vertices.
    """

    value: float
    row_strategy: np.ndarray
    col_strategy: np.ndarray


def solve_matrix_game(payoff) -> MatrixGameSolution:
    """Solve max_p min_q p^T M q for an m x n payoff matrix M.

    Returns the game value together with optimal mixed strategies for both
    players. Degenerate shapes (single row/column), constant matrices and
    pure saddle points are short-circuited; everything else goes through the
    simplex on the reciprocal-form LP.

    Raises ValueError on non-finite entries or empty matrices.
    """
    m_arr = np.asarray(payoff, dtype=float)
    if m_arr.ndim != 2 or m_arr.shape[0] < 1 or m_arr.shape[1] < 1:
        raise ValueError(f"payoff matrix must be 2-d and non-empty, got shape {m_arr.shape}")
    if not np.all(np.isfinite(m_arr)):
        raise ValueError("payoff matrix contains non-finite entries")
    m, n = m_arr.shape

    if n == 1:
        i = int(np.argmax(m_arr[:, 0]))
        row = np.zeros(m)
        row[i] = 1.0
        return MatrixGameSolution(float(m_arr[i, 0]), row, np.ones(1))
    if m == 1:
        j = int(np.argmin(m_arr[0, :]))
        col = np.zeros(n)
        col[j] = 1.0
        return MatrixGameSolution(float(m_arr[0, j]), np.ones(1), col)

    # Constant matrix: any strategy is optimal, tie-break to uniform.
    lo = float(m_arr.min())
    hi = float(m_arr.max())
    if lo == hi:
        return MatrixGameSolution(lo, np.full(m, 1.0 / m), np.full(n, 1.0 / n))

    # Pure saddle point (exact): maximin == minimax over pure strategies.
    row_mins = m_arr.min(axis=1)
    col_maxs = m_arr.max(axis=0)
    v_low = row_mins.max()
    v_high = col_maxs.min()
    if v_low == v_high:
        i = int(np.argmax(row_mins))
        j = int(np.argmin(col_maxs))
        row = np.zeros(m)
        row[i] = 1.0
        col = np.zeros(n)
        col[j] = 1.0
        return MatrixGameSolution(float(v_low), row, col)

    # Shift/scale so entries lie in [1, 2]; the game value must then be
    # positive, which the reciprocal form requires. Strategies are invariant
    # under this affine map, the value is mapped back at the end.
    span = hi - lo
    scaled = (m_arr - lo) / span + 1.0
    inv_value, col_raw, row_raw = _reciprocal_simplex(scaled)
    value_scaled = 1.0 / inv_value

    row = np.clip(row_raw, 0.0, None)
    col = np.clip(col_raw, 0.0, None)
    row /= row.sum()
    col /= col.sum()
    value = (value_scaled - 1.0) * span + lo
    return MatrixGameSolution(float(value), row, col)


def matrix_game_value(payoff) -> float:
    """Value-only variant of solve_matrix_game (same arithmetic path)."""
    return solve_matrix_game(payoff).value


def stage_values(q: np.ndarray) -> np.ndarray:
    """Per-state game values for a batch of matrices q of shape (S, m, n).

    States whose matrix has an exact pure saddle point are resolved
    vectorized; the rest fall back to the simplex. This is the hot path of
    Shapley value iteration.
    """
    row_mins = q.min(axis=2)
    col_maxs = q.max(axis=1)
    v_low = row_mins.max(axis=1)
    v_high = col_maxs.min(axis=1)
    values = v_low.copy()
    mixed = np.nonzero(v_low != v_high)[0]
    for s in mixed:
        values[s] = solve_matrix_game(q[s]).value
    return values


def _reciprocal_simplex(a: np.ndarray):
    """Solve max 1'y s.t. A y <= 1, y >= 0 for A with entries in [1, 2].

    This is the column player's reciprocal LP; the slack basis is feasible so
    a single phase suffices. Returns (objective, y_normalised_strategy_raw,
    dual_raw) where the dual values under the slack columns are the row
    player's reciprocal variables. Bland's rule picks the lowest improving
    index and breaks ratio ties by the lowest basis variable, which both
    prevents cycling and makes the chosen optimal vertex deterministic.
    """
    m, n = a.shape
    tab = np.empty((m, n + m + 1))
    tab[:, :n] = a
    tab[:, n : n + m] = np.eye(m)
    tab[:, -1] = 1.0
    # Reduced-cost row for maximisation of sum(y).
    cost = np.zeros(n + m)
    cost[:n] = 1.0
    basis = np.arange(n, n + m)

    for _ in range(_MAX_PIVOTS):
        improving = np.nonzero(cost > _PIVOT_TOL)[0]
        if improving.size == 0:
            break
        enter = int(improving[0])
        col = tab[:, enter]
        eligible = np.nonzero(col > _PIVOT_TOL)[0]
        if eligible.size == 0:
            raise ArithmeticError("reciprocal LP unbounded; payoff shift failed")
        ratios = tab[eligible, -1] / col[eligible]
        best = ratios.min()
        ties = eligible[ratios == best]
        leave = int(ties[np.argmin(basis[ties])])
        pivot = tab[leave, enter]
        tab[leave, :] /= pivot
        factor = tab[:, enter].copy()
        factor[leave] = 0.0
        tab -= np.outer(factor, tab[leave, :])
        cost -= cost[enter] * tab[leave, :-1]
        basis[leave] = enter
    else:
        raise ArithmeticError("simplex failed to terminate")

    y = np.zeros(n + m)
    y[basis] = tab[:, -1]
    col_raw = y[:n]
    dual_raw = -cost[n:]
    objective = col_raw.sum()
    return objective, col_raw, dual_raw
