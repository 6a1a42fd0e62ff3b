"""State aggregation under four similarity criteria, and the induced
abstract game.

Three criteria (minimax_q, boltzmann, multinomial) aggregate by
complete-linkage agglomerative clustering on the criterion's deviation
measure: blocks merge while every cross pair stays within tolerance, so each
produced block has pairwise deviation <= epsilon (the full pairwise
guarantee) and the partitions for growing epsilon are nested, which makes
the block count monotone along a sweep. The model criterion is
self-referential (its transition condition is measured against the partition
being built), so it runs partition refinement to a fixed point instead.

The abstract game averages transition rows and rewards over each block with
a weight function that sums to 1 inside every block; abstract policies lift
back to the ground game by copying each block's policy to its members.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import pdist

from zsmg.game import ExplicitGame, PolicyProfile, validate_game

_NEVER_MERGE = 1e300  # sentinel distance for forced singletons

_WEIGHT_ATOL = 1e-12

CRITERIA = ("minimax_q", "model", "boltzmann", "multinomial")


@dataclass(frozen=True)
class Abstraction:
    """A partition of ground states with per-state weights.

    state_to_block maps every ground state to a block id contiguous in
    0..num_blocks-1; weights sum to 1 within each block. epsilon and k
    record the criterion parameters; degenerate_states lists states pinned
    to singleton blocks because the multinomial criterion's normalizer floor
    failed for them.
    """

    state_to_block: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    criterion: str
    epsilon: float
    k: float = 0.0
    degenerate_states: tuple[int, ...] = ()

    @property
    def num_ground_states(self) -> int:
        return len(self.state_to_block)

    @property
    def num_blocks(self) -> int:
        return int(self.state_to_block.max()) + 1 if len(self.state_to_block) else 0

    def blocks(self) -> list[np.ndarray]:
        """Members of each block, in block-id order."""
        order = np.argsort(self.state_to_block, kind="stable")
        boundaries = np.searchsorted(
            self.state_to_block[order], np.arange(self.num_blocks + 1)
        )
        return [order[a:b] for a, b in zip(boundaries[:-1], boundaries[1:])]

    def validate(self) -> None:
        """Raise ValueError if the partition or weight invariants fail."""
        blocks = self.state_to_block
        if blocks.min() < 0:
            raise ValueError("negative block id")
        present = np.unique(blocks)
        if not np.array_equal(present, np.arange(len(present))):
            raise ValueError("block ids are not contiguous from 0")
        sums = np.bincount(blocks, weights=self.weights)
        bad = np.nonzero(np.abs(sums - 1.0) > _WEIGHT_ATOL)[0]
        if bad.size:
            raise ValueError(
                f"block weights do not sum to 1 (blocks {bad[:5].tolist()})"
            )

    @classmethod
    def identity(cls, num_states: int) -> "Abstraction":
        return cls(
            state_to_block=np.arange(num_states),
            weights=np.ones(num_states),
            criterion="minimax_q",
            epsilon=0.0,
        )


@dataclass(frozen=True)
class AbstractGame:
    """Aggregated game together with its provenance."""

    game: ExplicitGame
    ground: ExplicitGame = field(repr=False)
    abstraction: Abstraction


def _uniform_block_weights(state_to_block: np.ndarray) -> np.ndarray:
    sizes = np.bincount(state_to_block)
    return 1.0 / sizes[state_to_block]


def _agglomerate(conditions, num_states: int, epsilon: float, forced_singletons=()) -> np.ndarray:
    """Complete-linkage aggregation under joint deviation conditions.

    conditions is a list of (features, tolerance) pairs; the pair deviation
    is the max over conditions of (Chebyshev feature distance) / (tolerance
    expressed relative to epsilon), so that "deviation <= epsilon" is exactly
    the conjunction of the per-condition inequalities. Merging greedily at
    minimal complete linkage and cutting at epsilon keeps every intra-block
    pair within every condition and makes partitions nested across epsilon.
    States in forced_singletons never merge with anything.
    """
    if num_states == 1:
        return np.zeros(1, dtype=int)
    dist = np.zeros(num_states * (num_states - 1) // 2)
    for feats, tol in conditions:
        feats = np.asarray(feats, dtype=float).reshape(num_states, -1)
        cond = pdist(feats, metric="chebyshev")
        if tol == 0.0:
            # zero tolerance: equal features pass, everything else never merges
            cond = np.where(cond == 0.0, 0.0, _NEVER_MERGE)
        else:
            cond = cond * (epsilon / tol)
        np.maximum(dist, cond, out=dist)
    if len(forced_singletons):
        mask = np.zeros(num_states, dtype=bool)
        mask[np.asarray(forced_singletons, dtype=int)] = True
        rows, cols = np.triu_indices(num_states, k=1)
        dist[mask[rows] | mask[cols]] = _NEVER_MERGE
    merges = linkage(dist, method="complete")
    raw = fcluster(merges, t=epsilon, criterion="distance")
    # Relabel blocks contiguously in order of first appearance.
    _, first = np.unique(raw, return_index=True)
    order = {raw[i]: rank for rank, i in enumerate(np.sort(first))}
    return np.array([order[r] for r in raw], dtype=int)


def aggregate_minimax_q(q_star: np.ndarray, epsilon: float) -> Abstraction:
    """Aggregate states whose optimal Q rows agree within epsilon for every
    action profile.

    epsilon = 0 performs no aggregation: exactly solved games contain
    genuinely tied Q rows (e.g. forced-win regions), and zero tolerance is
    defined to keep the ground state space.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    q_flat = np.asarray(q_star, dtype=float).reshape(len(q_star), -1)
    if epsilon == 0.0:
        blocks = np.arange(len(q_flat))  # zero tolerance: keep the ground states
    else:
        blocks = _agglomerate([(q_flat, epsilon)], len(q_flat), epsilon)
    return Abstraction(
        state_to_block=blocks,
        weights=_uniform_block_weights(blocks),
        criterion="minimax_q",
        epsilon=float(epsilon),
    )


def aggregate_boltzmann(q_star: np.ndarray, epsilon: float, k: float) -> Abstraction:
    """Aggregate states with close softmax-normalized Q rows and normalizers
    within k*epsilon. As for the Q-value criterion, epsilon = 0 keeps the
    ground state space."""
    if epsilon < 0 or k < 0:
        raise ValueError("epsilon and k must be non-negative")
    q_flat = np.asarray(q_star, dtype=float).reshape(len(q_star), -1)
    if epsilon == 0.0:
        blocks = np.arange(len(q_flat))
    else:
        exp_q = np.exp(q_flat)
        normalizers = exp_q.sum(axis=1, keepdims=True)
        softmax = exp_q / normalizers
        blocks = _agglomerate(
            [(softmax, epsilon), (normalizers, k * epsilon)], len(q_flat), epsilon
        )
    return Abstraction(
        state_to_block=blocks,
        weights=_uniform_block_weights(blocks),
        criterion="boltzmann",
        epsilon=float(epsilon),
        k=float(k),
    )


def aggregate_multinomial(
    q_star: np.ndarray, epsilon: float, k: float, delta_floor: float
) -> Abstraction:
    """Aggregate states with close sum-normalized Q rows and normalizers
    within k*epsilon.

    States whose |sum_b Q(s, b)| falls below delta_floor violate the bound's
    precondition; they are reported via degenerate_states and kept as
    singleton blocks. As for the Q-value criterion, epsilon = 0 keeps the
    ground state space.
    """
    if epsilon < 0 or k < 0:
        raise ValueError("epsilon and k must be non-negative")
    if delta_floor <= 0:
        raise ValueError("delta_floor must be positive")
    q_flat = np.asarray(q_star, dtype=float).reshape(len(q_star), -1)
    normalizers = q_flat.sum(axis=1, keepdims=True)
    degenerate = np.nonzero(np.abs(normalizers[:, 0]) < delta_floor)[0]
    if epsilon == 0.0:
        blocks = np.arange(len(q_flat))
    else:
        safe = normalizers.copy()
        safe[degenerate] = 1.0  # placeholder; these states never merge
        ratios = q_flat / safe
        blocks = _agglomerate(
            [(ratios, epsilon), (normalizers, k * epsilon)],
            len(q_flat),
            epsilon,
            forced_singletons=degenerate,
        )
    return Abstraction(
        state_to_block=blocks,
        weights=_uniform_block_weights(blocks),
        criterion="multinomial",
        epsilon=float(epsilon),
        k=float(k),
        degenerate_states=tuple(int(s) for s in degenerate),
    )


def aggregate_model(game: ExplicitGame, epsilon: float) -> Abstraction:
    """Aggregate states with rewards within epsilon and blockwise transition
    masses within epsilon, measured against the produced partition itself.

    Starts from a single block and repeatedly separates the lexicographically
    first violating pair (the second state moves to a fresh singleton block)
    until no intra-block pair violates either condition; splitting strictly
    grows the block count, so the fixed point is reached in at most |S|-1
    rounds.
    """
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    num_states = game.num_states
    num_profiles = game.actions_p1 * game.actions_p2
    r_flat = game.rewards.reshape(num_states, num_profiles)
    t_flat = game.terminal_mass.reshape(num_states, num_profiles)
    trans = game.transitions.tocsc()

    blocks = np.zeros(num_states, dtype=int)
    # Blockwise transition mass per (state, profile). Terminal absorption is
    # compared as its own destination (t_flat below): two states whose
    # in-game masses agree but whose termination probabilities differ are
    # dynamically dissimilar, and the condition only gets stricter.
    block_mass = np.zeros((num_states * num_profiles, num_states))
    block_mass[:, 0] = np.asarray(trans.sum(axis=1)).ravel()
    num_blocks = 1

    while True:
        violator = _first_violating_pair(
            blocks, r_flat, block_mass[:, :num_blocks], t_flat, epsilon, num_profiles
        )
        if violator is None:
            break
        _, s2 = violator
        # Separate s2 into a new block and move its incoming mass over.
        old = blocks[s2]
        blocks[s2] = num_blocks
        col = trans[:, s2].toarray().ravel()
        block_mass[:, old] -= col
        block_mass[:, num_blocks] = col
        num_blocks += 1

    return Abstraction(
        state_to_block=blocks,
        weights=_uniform_block_weights(blocks),
        criterion="model",
        epsilon=float(epsilon),
    )


def _first_violating_pair(blocks, r_flat, block_mass, t_flat, epsilon, num_profiles):
    """Lexicographically first intra-block pair breaking the reward or
    blockwise-transition condition (terminal mass included)."""
    num_states = len(blocks)
    num_blocks = block_mass.shape[1]
    mass = block_mass.reshape(num_states, num_profiles, num_blocks)
    for s1 in range(num_states):
        members = np.nonzero(blocks == blocks[s1])[0]
        members = members[members > s1]
        if members.size == 0:
            continue
        reward_dev = np.abs(r_flat[members] - r_flat[s1]).max(axis=1)
        mass_dev = np.abs(mass[members] - mass[s1]).max(axis=(1, 2))
        term_dev = np.abs(t_flat[members] - t_flat[s1]).max(axis=1)
        bad = np.nonzero(
            (reward_dev > epsilon) | (mass_dev > epsilon) | (term_dev > epsilon)
        )[0]
        if bad.size:
            return s1, int(members[bad[0]])
    return None


def build_abstract_game(game: ExplicitGame, abstraction: Abstraction) -> AbstractGame:
    """Weighted aggregation of transitions and rewards over the partition.

    P_A(b' | b, a) sums w(s) * P(s' | s, a) over s in block b and s' in
    block b'; R_A and the terminal mass aggregate the same way. The result
    must pass validate_game.
    """
    if abstraction.num_ground_states != game.num_states:
        raise ValueError(
            f"abstraction covers {abstraction.num_ground_states} states, "
            f"game has {game.num_states}"
        )
    abstraction.validate()
    s, a1, a2 = game.num_states, game.actions_p1, game.actions_p2
    num_blocks = abstraction.num_blocks
    profiles = a1 * a2

    # Collapse successor columns into blocks, then average rows with weights.
    cols = sp.csr_matrix(
        (np.ones(s), (np.arange(s), abstraction.state_to_block)),
        shape=(s, num_blocks),
    )
    collapsed = game.transitions @ cols  # (S*A, S_A)
    flat_rows = np.arange(s * profiles)
    row_block = np.repeat(abstraction.state_to_block, profiles) * profiles + (
        flat_rows % profiles
    )
    averager = sp.csr_matrix(
        (np.repeat(abstraction.weights, profiles), (row_block, flat_rows)),
        shape=(num_blocks * profiles, s * profiles),
    )
    transitions = sp.csr_matrix(averager @ collapsed)
    transitions.sum_duplicates()
    transitions.sort_indices()
    rewards = (averager @ game.rewards.reshape(-1)).reshape(num_blocks, a1, a2)
    terminal = (averager @ game.terminal_mass.reshape(-1)).reshape(num_blocks, a1, a2)

    labels = None
    if game.state_labels is not None:
        first = {}
        sizes = np.bincount(abstraction.state_to_block)
        for state in range(s - 1, -1, -1):
            first[abstraction.state_to_block[state]] = game.state_labels[state]
        labels = tuple(
            f"{first[b]}+{sizes[b] - 1}" if sizes[b] > 1 else first[b]
            for b in range(num_blocks)
        )
    abstract = ExplicitGame(
        num_states=num_blocks,
        actions_p1=a1,
        actions_p2=a2,
        rewards=rewards,
        transitions=transitions,
        terminal_mass=terminal,
        gamma=game.gamma,
        reward_range=game.reward_range,
        state_labels=labels,
    )
    problems = validate_game(abstract)
    if problems:
        raise ValueError(f"aggregated game is invalid: {problems[:3]}")
    return AbstractGame(game=abstract, ground=game, abstraction=abstraction)


def lift_policy(abstraction: Abstraction, abstract_profile: PolicyProfile) -> PolicyProfile:
    """Ground profile that plays its block's abstract policy in every state."""
    expected = abstraction.num_blocks
    if abstract_profile.pi1.shape[0] != expected:
        raise ValueError(
            f"abstract profile covers {abstract_profile.pi1.shape[0]} states, "
            f"abstraction has {expected} blocks"
        )
    return PolicyProfile(
        pi1=abstract_profile.pi1[abstraction.state_to_block].copy(),
        pi2=abstract_profile.pi2[abstraction.state_to_block].copy(),
    )


def aggregate_initial_distribution(
    abstraction: Abstraction, initial: np.ndarray
) -> np.ndarray:
    """Push a ground initial-state distribution through the partition."""
    return np.bincount(
        abstraction.state_to_block,
        weights=initial,
        minlength=abstraction.num_blocks,
    )
