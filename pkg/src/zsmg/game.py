"""Explicit tabular two-player zero-sum Markov games.

A game is a finite set of non-terminal states, per-player action counts, a
transition kernel over successor states plus a terminal-absorption mass,
player 1's expected immediate reward per action profile (player 2 receives
its negation), and a discount factor in [0, 1). Terminal absorption carries
value 0, which keeps the Bellman operator closed over the stored tables.

All structures are numpy-backed and immutable after construction; solvers
are single-threaded, and distinct games can be solved in parallel freely.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from zsmg.matrixgame import solve_matrix_game, stage_values

_PROB_ATOL = 1e-12


@dataclass(frozen=True)
class ExplicitGame:
    """Dense-reward, sparse-transition zero-sum Markov game.

    rewards has shape (S, A1, A2); transitions is CSR of shape (S*A1*A2, S)
    with flat row index (s*A1 + a1)*A2 + a2; terminal_mass has shape
    (S, A1, A2) and together with each transition row sums to 1.
    """

    num_states: int
    actions_p1: int
    actions_p2: int
    rewards: np.ndarray = field(repr=False)
    transitions: sp.csr_matrix = field(repr=False)
    terminal_mass: np.ndarray = field(repr=False)
    gamma: float
    reward_range: tuple[float, float]
    state_labels: tuple[str, ...] | None = field(default=None, repr=False)

    @classmethod
    def from_kernel(
        cls,
        rewards: np.ndarray,
        kernel: dict[tuple[int, int, int], list[tuple[int, float]]],
        gamma: float,
        reward_range: tuple[float, float] | None = None,
        state_labels=None,
    ) -> "ExplicitGame":
        """Build a game from a sparse successor map.

        kernel maps (s, a1, a2) to a list of (successor, probability) pairs;
        missing mass is terminal absorption. Absent keys mean "always
        terminal".
        """
        rewards = np.asarray(rewards, dtype=float)
        num_states, a1, a2 = rewards.shape
        rows, cols, data = [], [], []
        terminal = np.ones((num_states, a1, a2))
        for (s, i, j), succ in kernel.items():
            base = (s * a1 + i) * a2 + j
            mass = 0.0
            for nxt, p in succ:
                rows.append(base)
                cols.append(nxt)
                data.append(float(p))
                mass += float(p)
            terminal[s, i, j] = 1.0 - mass
        transitions = sp.csr_matrix(
            (data, (rows, cols)), shape=(num_states * a1 * a2, num_states)
        )
        transitions.sum_duplicates()
        transitions.sort_indices()
        if reward_range is None:
            reward_range = (float(rewards.min()), float(rewards.max()))
        return cls(
            num_states=num_states,
            actions_p1=a1,
            actions_p2=a2,
            rewards=rewards,
            transitions=transitions,
            terminal_mass=terminal,
            gamma=float(gamma),
            reward_range=(float(reward_range[0]), float(reward_range[1])),
            state_labels=tuple(state_labels) if state_labels is not None else None,
        )

    @classmethod
    def from_dense(
        cls,
        rewards: np.ndarray,
        transition_probs: np.ndarray,
        gamma: float,
        reward_range: tuple[float, float] | None = None,
        state_labels=None,
    ) -> "ExplicitGame":
        """Build from a dense (S, A1, A2, S) transition tensor; mass missing
        from each row is terminal absorption."""
        rewards = np.asarray(rewards, dtype=float)
        probs = np.asarray(transition_probs, dtype=float)
        num_states, a1, a2 = rewards.shape
        flat = probs.reshape(num_states * a1 * a2, num_states)
        transitions = sp.csr_matrix(flat)
        transitions.sort_indices()
        terminal = 1.0 - flat.sum(axis=1).reshape(num_states, a1, a2)
        terminal[np.abs(terminal) < 1e-15] = 0.0
        if reward_range is None:
            reward_range = (float(rewards.min()), float(rewards.max()))
        return cls(
            num_states=num_states,
            actions_p1=a1,
            actions_p2=a2,
            rewards=rewards,
            transitions=transitions,
            terminal_mass=terminal,
            gamma=float(gamma),
            reward_range=(float(reward_range[0]), float(reward_range[1])),
            state_labels=tuple(state_labels) if state_labels is not None else None,
        )

    def flat_index(self, s: int, a1: int, a2: int) -> int:
        return (s * self.actions_p1 + a1) * self.actions_p2 + a2

    def successors(self, s: int, a1: int, a2: int) -> tuple[np.ndarray, np.ndarray]:
        """Successor state indices and probabilities for one action profile."""
        row = self.flat_index(s, a1, a2)
        start, end = self.transitions.indptr[row], self.transitions.indptr[row + 1]
        return self.transitions.indices[start:end], self.transitions.data[start:end]

    @property
    def value_bounds(self) -> tuple[float, float]:
        """Loose per-state value bounds [r_min, r_max] / (1 - gamma)."""
        lo, hi = self.reward_range
        return lo / (1.0 - self.gamma), hi / (1.0 - self.gamma)

    def q_from_values(self, values: np.ndarray) -> np.ndarray:
        """One Bellman backup: Q(s,a) = R(s,a) + gamma * E[V(s')]."""
        pv = self.transitions @ values
        return self.rewards + self.gamma * pv.reshape(
            self.num_states, self.actions_p1, self.actions_p2
        )

    def swap_players(self) -> "ExplicitGame":
        """The same game from player 2's perspective: negated rewards,
        transposed action axes."""
        rewards = -np.swapaxes(self.rewards, 1, 2)
        s, a1, a2 = self.num_states, self.actions_p1, self.actions_p2
        perm = np.arange(s * a1 * a2).reshape(s, a1, a2)
        perm = np.swapaxes(perm, 1, 2).reshape(-1)
        transitions = sp.csr_matrix(self.transitions[perm])
        transitions.sort_indices()
        return ExplicitGame(
            num_states=s,
            actions_p1=a2,
            actions_p2=a1,
            rewards=rewards,
            transitions=transitions,
            terminal_mass=np.swapaxes(self.terminal_mass, 1, 2),
            gamma=self.gamma,
            reward_range=(-self.reward_range[1], -self.reward_range[0]),
            state_labels=self.state_labels,
        )


@dataclass
class PolicyProfile:
    """Per-state mixed strategies for both players.

    pi1 has shape (S, A1), pi2 has shape (S, A2); each row is a probability
    vector.
    """

    pi1: np.ndarray
    pi2: np.ndarray

    @classmethod
    def uniform(cls, num_states: int, actions_p1: int, actions_p2: int) -> "PolicyProfile":
        return cls(
            pi1=np.full((num_states, actions_p1), 1.0 / actions_p1),
            pi2=np.full((num_states, actions_p2), 1.0 / actions_p2),
        )

    def copy(self) -> "PolicyProfile":
        return PolicyProfile(self.pi1.copy(), self.pi2.copy())

    def validate_for(self, game: ExplicitGame) -> None:
        """Raise ValueError on shape mismatch or invalid distributions."""
        expected1 = (game.num_states, game.actions_p1)
        expected2 = (game.num_states, game.actions_p2)
        if self.pi1.shape != expected1 or self.pi2.shape != expected2:
            raise ValueError(
                f"policy shapes {self.pi1.shape}/{self.pi2.shape} do not match "
                f"game shapes {expected1}/{expected2}"
            )
        for name, pi in (("pi1", self.pi1), ("pi2", self.pi2)):
            if pi.min() < -_PROB_ATOL:
                raise ValueError(f"{name} has negative probabilities")
            sums = pi.sum(axis=1)
            bad = np.nonzero(np.abs(sums - 1.0) > _PROB_ATOL)[0]
            if bad.size:
                raise ValueError(f"{name} rows {bad[:5].tolist()} do not sum to 1")


@dataclass(frozen=True)
class ShapleySolution:
    """Result of Shapley value iteration.

    values(s) is exactly the maximin value of q_values[s]; profile holds the
    per-state optimal strategies of those matrices. When converged is False
    the tables are the last iterate and residuals[-1] the last sup-norm
    change.
    """

    values: np.ndarray
    q_values: np.ndarray
    profile: PolicyProfile
    iterations: int
    residuals: tuple[float, ...]
    converged: bool


def validate_game(game: ExplicitGame) -> list[str]:
    """Check all ExplicitGame invariants; returns violations (empty = valid)."""
    violations: list[str] = []
    s, a1, a2 = game.num_states, game.actions_p1, game.actions_p2
    if not (0.0 <= game.gamma < 1.0):
        violations.append(f"discount out of range: gamma={game.gamma!r}")
    if game.rewards.shape != (s, a1, a2):
        violations.append(f"reward table shape {game.rewards.shape} != {(s, a1, a2)}")
        return violations
    if game.transitions.shape != (s * a1 * a2, s):
        violations.append(
            f"transition shape {game.transitions.shape} != {(s * a1 * a2, s)}"
        )
        return violations
    if not np.all(np.isfinite(game.rewards)):
        violations.append("reward table has non-finite entries")
    lo, hi = game.reward_range
    if game.rewards.min() < lo - _PROB_ATOL or game.rewards.max() > hi + _PROB_ATOL:
        violations.append(
            f"rewards exit declared range [{lo}, {hi}]: "
            f"observed [{game.rewards.min()}, {game.rewards.max()}]"
        )
    if game.transitions.nnz and game.transitions.data.min() < -_PROB_ATOL:
        violations.append("negative transition probabilities")
    terminal = game.terminal_mass
    if terminal.min() < -_PROB_ATOL:
        idx = np.unravel_index(int(np.argmin(terminal)), terminal.shape)
        violations.append(f"negative terminal mass at (s,a1,a2)={idx}")
    row_sums = np.asarray(game.transitions.sum(axis=1)).reshape(s, a1, a2) + terminal
    bad = np.nonzero(np.abs(row_sums - 1.0) > _PROB_ATOL)
    for k in range(min(len(bad[0]), 5)):
        cell = (int(bad[0][k]), int(bad[1][k]), int(bad[2][k]))
        violations.append(
            f"transition row (s,a1,a2)={cell} sums to {row_sums[cell]!r}, not 1"
        )
    if len(bad[0]) > 5:
        violations.append(f"... and {len(bad[0]) - 5} more bad transition rows")
    return violations


def _effective_tol(tol: float, gamma: float) -> float:
    # Stopping once the sup-norm change is below this guarantees the final
    # value error is <= tol/2, not just tol*gamma/(1-gamma).
    if gamma <= 0.0:
        return tol
    return tol * min(1.0, (1.0 - gamma) / (2.0 * gamma))


def evaluate_policy(
    game: ExplicitGame,
    profile: PolicyProfile,
    tol: float = 1e-9,
    max_iters: int = 100_000,
) -> tuple[np.ndarray, np.ndarray]:
    """Iterative policy evaluation; returns (V, Q) with Bellman residual < tol.

    Q is one backup of the returned V, so V(s) and the profile-weighted
    average of Q(s,.,.) agree to within the residual.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    profile.validate_for(game)
    stop = _effective_tol(tol, game.gamma)
    v = np.zeros(game.num_states)
    for _ in range(max_iters):
        q = game.q_from_values(v)
        v_new = np.einsum("sa,sab,sb->s", profile.pi1, q, profile.pi2)
        delta = float(np.max(np.abs(v_new - v))) if v.size else 0.0
        v = v_new
        if delta < stop:
            return v, game.q_from_values(v)
    raise RuntimeError(
        f"policy evaluation did not reach tolerance {tol} in {max_iters} iterations"
    )


def shapley_solve(
    game: ExplicitGame,
    tol: float = 1e-9,
    max_iters: int = 100_000,
) -> ShapleySolution:
    """Shapley value iteration to the unique minimax value function.

    Iterates V(s) <- maximin of [R(s,a) + gamma * E V] until the sup-norm
    change drops below (a tightened multiple of) tol, then extracts an
    equilibrium profile as the optimal mixed strategies of the converged
    per-state matrices. Non-convergence within max_iters is reported via
    converged=False on the result, which still carries the last iterate.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    stop = _effective_tol(tol, game.gamma)
    v = np.zeros(game.num_states)
    residuals: list[float] = []
    converged = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        q = game.q_from_values(v)
        v_new = stage_values(q)
        delta = float(np.max(np.abs(v_new - v))) if v.size else 0.0
        residuals.append(delta)
        v = v_new
        if delta < stop:
            converged = True
            break

    q = game.q_from_values(v)
    pi1 = np.empty((game.num_states, game.actions_p1))
    pi2 = np.empty((game.num_states, game.actions_p2))
    values = np.empty(game.num_states)
    for s in range(game.num_states):
        sol = solve_matrix_game(q[s])
        pi1[s] = sol.row_strategy
        pi2[s] = sol.col_strategy
        values[s] = sol.value
    return ShapleySolution(
        values=values,
        q_values=q,
        profile=PolicyProfile(pi1, pi2),
        iterations=iterations,
        residuals=tuple(residuals),
        converged=converged,
    )
