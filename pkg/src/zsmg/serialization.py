"""Plain-text file formats: games, solved tables/policies, abstractions.

All floats are written with repr (shortest round-trip form), so
export -> import -> export is byte-identical.

tzmg v1 (explicit game):
    tzmg v1 <S> <A1> <A2> <gamma> <r_min> <r_max>
    label <s> <text>                       # optional, one per labelled state
    <s> <a1> <a2> <reward> <term_prob> <k> <s_1> <p_1> ... <s_k> <p_k>
    ...                                    # rows lexicographic in (s, a1, a2)

qpolicy v1 (value/Q tables plus a policy profile):
    qpolicy v1 <S> <A1> <A2> <gamma>
    state <s>
    v <value>
    pi1 <A1 floats>
    pi2 <A2 floats>
    q <A2 floats>                          # one line per a1, in order

phi v1 (abstraction):
    phi v1 criterion=<tag> epsilon=<r> k=<r> num_ground=<n> num_abstract=<m>
    degenerate <s            ...>          # optional, multinomial floor failures
    <s> <block> <weight>
"""

from __future__ import annotations

import numpy as np

from zsmg.abstraction import Abstraction
from zsmg.game import ExplicitGame, PolicyProfile


def _fmt(x: float) -> str:
    return repr(float(x))


def write_tzmg(game: ExplicitGame, path: str) -> None:
    lo, hi = game.reward_range
    lines = [
        f"tzmg v1 {game.num_states} {game.actions_p1} {game.actions_p2} "
        f"{_fmt(game.gamma)} {_fmt(lo)} {_fmt(hi)}"
    ]
    if game.state_labels is not None:
        for s, label in enumerate(game.state_labels):
            lines.append(f"label {s} {label}")
    for s in range(game.num_states):
        for a1 in range(game.actions_p1):
            for a2 in range(game.actions_p2):
                succ, probs = game.successors(s, a1, a2)
                parts = [
                    str(s),
                    str(a1),
                    str(a2),
                    _fmt(game.rewards[s, a1, a2]),
                    _fmt(game.terminal_mass[s, a1, a2]),
                    str(len(succ)),
                ]
                for nxt, p in zip(succ, probs):
                    parts.append(str(int(nxt)))
                    parts.append(_fmt(p))
                lines.append(" ".join(parts))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_tzmg(path: str) -> ExplicitGame:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    header = lines[0].split()
    if header[:2] != ["tzmg", "v1"]:
        raise ValueError(f"{path}: not a tzmg v1 file")
    num_states, a1, a2 = int(header[2]), int(header[3]), int(header[4])
    gamma, r_min, r_max = float(header[5]), float(header[6]), float(header[7])
    labels: dict[int, str] | None = None
    rewards = np.zeros((num_states, a1, a2))
    kernel: dict[tuple[int, int, int], list[tuple[int, float]]] = {}
    seen = 0
    for line in lines[1:]:
        parts = line.split()
        if parts[0] == "label":
            labels = labels or {}
            labels[int(parts[1])] = " ".join(parts[2:])
            continue
        s, i, j = int(parts[0]), int(parts[1]), int(parts[2])
        rewards[s, i, j] = float(parts[3])
        count = int(parts[5])
        succ = [
            (int(parts[6 + 2 * t]), float(parts[7 + 2 * t])) for t in range(count)
        ]
        kernel[(s, i, j)] = succ
        seen += 1
    if seen != num_states * a1 * a2:
        raise ValueError(
            f"{path}: expected {num_states * a1 * a2} transition rows, found {seen}"
        )
    label_list = None
    if labels is not None:
        label_list = [labels.get(s, "") for s in range(num_states)]
    return ExplicitGame.from_kernel(
        rewards, kernel, gamma, reward_range=(r_min, r_max), state_labels=label_list
    )


def write_qpolicy(
    path: str,
    values: np.ndarray,
    q_values: np.ndarray,
    profile: PolicyProfile,
    gamma: float,
) -> None:
    num_states, a1, a2 = q_values.shape
    lines = [f"qpolicy v1 {num_states} {a1} {a2} {_fmt(gamma)}"]
    for s in range(num_states):
        lines.append(f"state {s}")
        lines.append("v " + _fmt(values[s]))
        lines.append("pi1 " + " ".join(_fmt(x) for x in profile.pi1[s]))
        lines.append("pi2 " + " ".join(_fmt(x) for x in profile.pi2[s]))
        for i in range(a1):
            lines.append("q " + " ".join(_fmt(x) for x in q_values[s, i]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_qpolicy(path: str):
    """Returns (values, q_values, profile, gamma)."""
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    header = lines[0].split()
    if header[:2] != ["qpolicy", "v1"]:
        raise ValueError(f"{path}: not a qpolicy v1 file")
    num_states, a1, a2 = int(header[2]), int(header[3]), int(header[4])
    gamma = float(header[5])
    values = np.zeros(num_states)
    q_values = np.zeros((num_states, a1, a2))
    pi1 = np.zeros((num_states, a1))
    pi2 = np.zeros((num_states, a2))
    s = -1
    q_row = 0
    for line in lines[1:]:
        parts = line.split()
        if parts[0] == "state":
            s = int(parts[1])
            q_row = 0
        elif parts[0] == "v":
            values[s] = float(parts[1])
        elif parts[0] == "pi1":
            pi1[s] = [float(x) for x in parts[1:]]
        elif parts[0] == "pi2":
            pi2[s] = [float(x) for x in parts[1:]]
        elif parts[0] == "q":
            q_values[s, q_row] = [float(x) for x in parts[1:]]
            q_row += 1
        else:
            raise ValueError(f"{path}: unexpected line {line!r}")
    return values, q_values, PolicyProfile(pi1, pi2), gamma


def write_phi(abstraction: Abstraction, path: str) -> None:
    lines = [
        f"phi v1 criterion={abstraction.criterion} epsilon={_fmt(abstraction.epsilon)} "
        f"k={_fmt(abstraction.k)} num_ground={abstraction.num_ground_states} "
        f"num_abstract={abstraction.num_blocks}"
    ]
    if abstraction.degenerate_states:
        lines.append(
            "degenerate " + " ".join(str(s) for s in abstraction.degenerate_states)
        )
    for s in range(abstraction.num_ground_states):
        lines.append(
            f"{s} {abstraction.state_to_block[s]} {_fmt(abstraction.weights[s])}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_phi(path: str) -> Abstraction:
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    header = lines[0].split()
    if header[:2] != ["phi", "v1"]:
        raise ValueError(f"{path}: not a phi v1 file")
    meta = dict(item.split("=", 1) for item in header[2:])
    num_ground = int(meta["num_ground"])
    state_to_block = np.zeros(num_ground, dtype=int)
    weights = np.zeros(num_ground)
    degenerate: tuple[int, ...] = ()
    for line in lines[1:]:
        parts = line.split()
        if parts[0] == "degenerate":
            degenerate = tuple(int(x) for x in parts[1:])
            continue
        s = int(parts[0])
        state_to_block[s] = int(parts[1])
        weights[s] = float(parts[2])
    abstraction = Abstraction(
        state_to_block=state_to_block,
        weights=weights,
        criterion=meta["criterion"],
        epsilon=float(meta["epsilon"]),
        k=float(meta["k"]),
        degenerate_states=degenerate,
    )
    if abstraction.num_blocks != int(meta["num_abstract"]):
        raise ValueError(f"{path}: block count does not match header")
    return abstraction


def write_csv(path: str, header: list[str], rows: list[list]) -> None:
    """Deterministic minimal CSV writer (floats via repr)."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(
            ",".join(_fmt(x) if isinstance(x, float) else str(x) for x in row)
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
