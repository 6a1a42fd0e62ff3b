"""Best responses, duality gaps, and the closed-form gap bounds.

The duality gap of a policy profile is the largest one-sided improvement
available to either player over all states: max_s of (player 1's best
response value against pi2) minus (player 2's best response value against
pi1), both measured in player 1's payoff. It is zero exactly at Nash
equilibria.

Exact mode computes best responses model-based by value iteration on the
induced MDP; learned mode estimates them with tabular Q-learning and is
clearly tagged as an approximation.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import exp

import numpy as np

from zsmg.game import ExplicitGame, PolicyProfile

CRITERIA = ("minimax_q", "model", "boltzmann", "multinomial")


@dataclass(frozen=True)
class GapReport:
    """Duality-gap evaluation of one policy profile against a ground game.

    gap is clamped to 0 when within the solver tolerance of 0 (raw_gap keeps
    the unclamped max). bound carries the theorem bound for the abstraction
    in force, when any; bound_formula names the criterion it came from.
    mode is "exact" or "learned".
    """

    gap: float
    raw_gap: float
    argmax_state: int
    v_br1: np.ndarray
    v_br2: np.ndarray
    bound: float | None = None
    bound_formula: str | None = None
    mode: str = "exact"


def best_response(
    game: ExplicitGame,
    opponent_policy: np.ndarray,
    responder: int,
    tol: float = 1e-9,
    max_iters: int = 100_000,
) -> tuple[np.ndarray, np.ndarray]:
    """Optimal deterministic response against a fixed opponent policy.

    Marginalizes the opponent into an MDP and runs value iteration to a
    sup-norm residual below tol. Values are always player 1's payoff, so
    responder 2 minimizes. Returns (values, greedy action per state).
    """
    if responder not in (1, 2):
        raise ValueError(f"responder must be 1 or 2, got {responder}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    opponent_policy = np.asarray(opponent_policy, dtype=float)
    expected_actions = game.actions_p2 if responder == 1 else game.actions_p1
    if opponent_policy.shape != (game.num_states, expected_actions):
        raise ValueError(
            f"opponent policy shape {opponent_policy.shape} does not match "
            f"({game.num_states}, {expected_actions})"
        )
    gamma = game.gamma
    stop = tol if gamma == 0 else tol * min(1.0, (1.0 - gamma) / (2.0 * gamma))
    v = np.zeros(game.num_states)
    converged = False
    for _ in range(max_iters):
        q = game.q_from_values(v)
        if responder == 1:
            q_resp = np.einsum("sab,sb->sa", q, opponent_policy)
            v_new = q_resp.max(axis=1)
        else:
            q_resp = np.einsum("sab,sa->sb", q, opponent_policy)
            v_new = q_resp.min(axis=1)
        delta = float(np.max(np.abs(v_new - v))) if v.size else 0.0
        v = v_new
        if delta < stop:
            converged = True
            break
    if not converged:
        raise RuntimeError(
            f"best-response iteration did not reach tolerance {tol} in "
            f"{max_iters} iterations"
        )
    q = game.q_from_values(v)
    if responder == 1:
        q_resp = np.einsum("sab,sb->sa", q, opponent_policy)
        greedy = q_resp.argmax(axis=1)
        values = q_resp.max(axis=1)
    else:
        q_resp = np.einsum("sab,sa->sb", q, opponent_policy)
        greedy = q_resp.argmin(axis=1)
        values = q_resp.min(axis=1)
    return values, greedy


def duality_gap(
    game: ExplicitGame,
    profile: PolicyProfile,
    tol: float = 1e-9,
    states: str = "all",
    initial_distribution: np.ndarray | None = None,
    bound: float | None = None,
    bound_formula: str | None = None,
) -> GapReport:
    """Exact duality gap of a profile: max_s (V^{BR1,pi2} - V^{pi1,BR2}).

    states="initial" restricts the max to the support of
    initial_distribution (for learning-curve style evaluation); the default
    maximizes over every non-terminal state.
    """
    profile.validate_for(game)
    v_br1, _ = best_response(game, profile.pi2, responder=1, tol=tol)
    v_br2, _ = best_response(game, profile.pi1, responder=2, tol=tol)
    diff = v_br1 - v_br2
    if states == "initial":
        if initial_distribution is None:
            raise ValueError('states="initial" requires initial_distribution')
        support = np.nonzero(np.asarray(initial_distribution) > 0)[0]
        argmax = int(support[np.argmax(diff[support])])
    elif states == "all":
        argmax = int(np.argmax(diff))
    else:
        raise ValueError(f'states must be "all" or "initial", got {states!r}')
    raw = float(diff[argmax])
    clamp = 10 * tol / (1.0 - game.gamma)
    gap = 0.0 if raw <= clamp else raw
    return GapReport(
        gap=gap,
        raw_gap=raw,
        argmax_state=argmax,
        v_br1=v_br1,
        v_br2=v_br2,
        bound=bound,
        bound_formula=bound_formula,
        mode="exact",
    )


def learned_best_response(
    game: ExplicitGame,
    opponent_policy: np.ndarray,
    responder: int,
    iters: int = 100_000,
    rng_seed: int = 0,
    exploration: float = 0.1,
    initial_distribution: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Model-free best-response estimate via tabular Q-learning.

    The opponent plays its fixed policy; the responder explores
    epsilon-greedily with the same decaying learning rate used for training
    runs. Returns (estimated values, greedy actions); values are player 1's
    payoff for either responder.
    """
    opponent_policy = np.asarray(opponent_policy, dtype=float)
    rng = np.random.default_rng(rng_seed)
    n_states = game.num_states
    n_resp = game.actions_p1 if responder == 1 else game.actions_p2
    sign = 1.0 if responder == 1 else -1.0
    q = np.zeros((n_states, n_resp))
    if initial_distribution is None:
        initial_distribution = np.full(n_states, 1.0 / n_states)
    init_cdf = np.cumsum(initial_distribution)
    opp_cdf = np.cumsum(opponent_policy, axis=1)

    def draw_initial() -> int:
        return min(
            int(np.searchsorted(init_cdf, rng.random(), side="right")), n_states - 1
        )

    state = draw_initial()
    for t in range(iters):
        alpha = 10.0 ** (-2.0 * t / max(iters, 1))
        if rng.random() < exploration:
            a_resp = int(rng.integers(n_resp))
        else:
            a_resp = int(np.argmax(q[state]))
        a_opp = min(
            int(np.searchsorted(opp_cdf[state], rng.random(), side="right")),
            opp_cdf.shape[1] - 1,
        )
        a1, a2 = (a_resp, a_opp) if responder == 1 else (a_opp, a_resp)
        reward = sign * game.rewards[state, a1, a2]
        idx, probs = game.successors(state, a1, a2)
        u = rng.random()
        cum = game.terminal_mass[state, a1, a2]
        nxt = -1
        if u >= cum:
            for i, p in zip(idx, probs):
                cum += p
                if u < cum:
                    nxt = int(i)
                    break
            else:
                nxt = int(idx[-1]) if len(idx) else -1
        target = reward + (game.gamma * q[nxt].max() if nxt >= 0 else 0.0)
        q[state, a_resp] += alpha * (target - q[state, a_resp])
        state = nxt if nxt >= 0 else draw_initial()
    return sign * q.max(axis=1), q.argmax(axis=1)


def duality_gap_learned(
    game: ExplicitGame,
    profile: PolicyProfile,
    iters: int = 100_000,
    rng_seed: int = 0,
    states: str = "all",
    initial_distribution: np.ndarray | None = None,
    bound: float | None = None,
    bound_formula: str | None = None,
) -> GapReport:
    """Duality-gap estimate with Q-learning best responses; noisy, never a
    substitute for the exact mode."""
    profile.validate_for(game)
    v_br1, _ = learned_best_response(
        game, profile.pi2, 1, iters, rng_seed, initial_distribution=initial_distribution
    )
    v_br2, _ = learned_best_response(
        game, profile.pi1, 2, iters, rng_seed + 1, initial_distribution=initial_distribution
    )
    diff = v_br1 - v_br2
    if states == "initial":
        if initial_distribution is None:
            raise ValueError('states="initial" requires initial_distribution')
        support = np.nonzero(np.asarray(initial_distribution) > 0)[0]
        argmax = int(support[np.argmax(diff[support])])
    else:
        argmax = int(np.argmax(diff))
    raw = float(diff[argmax])
    return GapReport(
        gap=max(raw, 0.0),
        raw_gap=raw,
        argmax_state=argmax,
        v_br1=v_br1,
        v_br2=v_br2,
        bound=bound,
        bound_formula=bound_formula,
        mode="learned",
    )


def theorem_bound(
    criterion: str,
    epsilon: float,
    gamma: float,
    sizes: tuple[int, int, int] | None = None,
    k: float = 0.0,
    delta: float | None = None,
) -> float:
    """Closed-form duality-gap bound for a lifted abstract equilibrium.

    sizes is (|S|, |A1|, |A2|); the model criterion uses |S|, the Boltzmann
    and multinomial criteria use |A1|*|A2|. delta is the multinomial
    criterion's positive floor on |sum_b Q*(s, b)|.
    """
    if criterion not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}")
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must be in [0, 1)")
    horizon = 1.0 - gamma
    if criterion == "minimax_q":
        return 12.0 * epsilon / horizon**3
    if criterion == "model":
        if sizes is None:
            raise ValueError("model bound needs sizes=(|S|, |A1|, |A2|)")
        num_states = sizes[0]
        return 4.0 * (1.0 + gamma * (num_states - 1)) * epsilon / horizon**3
    if sizes is None:
        raise ValueError(f"{criterion} bound needs sizes=(|S|, |A1|, |A2|)")
    num_profiles = sizes[1] * sizes[2]
    if criterion == "boltzmann":
        return (
            12.0
            * exp(2.0 / horizon)
            * (num_profiles + k * exp(1.0 / horizon) / num_profiles)
            * epsilon
            / horizon**3
        )
    # multinomial
    if delta is None or delta <= 0:
        raise ValueError("multinomial bound requires a positive delta")
    return 12.0 * (num_profiles + k / delta) * epsilon / horizon**4
