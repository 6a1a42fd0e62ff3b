"""Experiment drivers: solve/export, abstraction sweeps, gap curves.

Every driver takes an ExperimentConfig, writes its artifacts under the
configured output directory, and returns (outputs, violations) where
violations is a list of human-readable invariant failures (empty = all runs
healthy). CSV outputs are deterministic given config + seeds; plot files are
regenerated purely from the CSVs.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from zsmg.abstraction import (
    Abstraction,
    aggregate_boltzmann,
    aggregate_initial_distribution,
    aggregate_minimax_q,
    aggregate_model,
    aggregate_multinomial,
    build_abstract_game,
    lift_policy,
)
from zsmg.evaluation import duality_gap, duality_gap_learned, theorem_bound
from zsmg.game import ExplicitGame, shapley_solve, validate_game
from zsmg.learner import LearnerConfig, constant_schedule, decaying_power_schedule, train
from zsmg.serialization import (
    read_phi,
    read_qpolicy,
    read_tzmg,
    write_csv,
    write_phi,
    write_qpolicy,
    write_tzmg,
)
from zsmg.soccer import build_soccer_game

DESK_EPSILONS = (0.0, 0.2, 0.6, 1.0, 1.4, 1.8)
PAPER_EPSILONS = tuple(round(0.1 * i, 10) for i in range(21))
OUTPUT_ROOT_ENV = "ZSMG_OUT"

_CONFIG_KEYS = {
    "game", "gamma", "criterion", "epsilons", "k", "delta_floor", "iters",
    "beta", "lr", "checkpoint_every", "seeds", "out", "gap_mode",
    "gap_learn_iters", "workers", "tol", "paper_scale",
}


@dataclass(frozen=True)
class ExperimentConfig:
    """Configuration shared by all drivers; see load_config for the file
    format."""

    game: str = "soccer"
    gamma: float = 0.9
    criterion: str = "minimax_q"
    epsilons: tuple[float, ...] = DESK_EPSILONS
    k: float = 1.0
    delta_floor: float = 1e-6
    iters: int = 200_000
    beta: float = 0.2
    lr: str = "decay"
    checkpoint_every: int | None = None
    seeds: tuple[int, ...] = (0,)
    out: str = "zsmg_out"
    gap_mode: str = "exact"
    gap_learn_iters: int = 100_000
    workers: int = 0  # 0 = one worker per job, capped at cpu count
    tol: float = 1e-9

    def validate(self) -> None:
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must lie in [0, 1)")
        if self.criterion not in ("minimax_q", "model", "boltzmann", "multinomial"):
            raise ValueError(f"unknown criterion {self.criterion!r}")
        if not self.seeds:
            raise ValueError("at least one seed is required")
        if list(self.epsilons) != sorted(self.epsilons):
            raise ValueError("epsilon grid must be sorted ascending")
        if any(e < 0 for e in self.epsilons):
            raise ValueError("epsilon grid must be non-negative")
        if self.gap_mode not in ("exact", "learned"):
            raise ValueError("gap_mode must be exact or learned")
        if self.tol <= 0:
            raise ValueError("tol must be positive")

    def lr_schedule(self, total_iters: int):
        if self.lr == "decay":
            return decaying_power_schedule(total_iters)
        if self.lr.startswith("const:"):
            return constant_schedule(float(self.lr.split(":", 1)[1]))
        raise ValueError(f"unknown lr schedule {self.lr!r}")


def load_config(path: str | None, overrides: dict | None = None) -> ExperimentConfig:
    """Read a `key = value` config file and apply CLI overrides.

    Lines starting with # are comments. Recognized keys mirror the
    ExperimentConfig fields plus paper_scale (bool) which switches to the
    full-resolution grid and 10^6 iterations.
    """
    raw: dict[str, str] = {}
    if path is not None:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ValueError(f"{path}:{lineno}: expected key = value")
                key, value = (part.strip() for part in line.split("=", 1))
                if key not in _CONFIG_KEYS:
                    raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
                raw[key] = value
    if overrides:
        raw.update({k: v for k, v in overrides.items() if v is not None})

    paper_scale = str(raw.pop("paper_scale", "false")).lower() in ("1", "true", "yes")
    config = ExperimentConfig()
    if paper_scale:
        config = replace(config, iters=1_000_000, epsilons=PAPER_EPSILONS)

    def parse_floats(text):
        return tuple(float(x) for x in str(text).split(",") if str(x).strip())

    def parse_ints(text):
        return tuple(int(x) for x in str(text).split(",") if str(x).strip())

    casts = {
        "game": str, "gamma": float, "criterion": str, "epsilons": parse_floats,
        "k": float, "delta_floor": float, "iters": int, "beta": float, "lr": str,
        "checkpoint_every": lambda x: None if x in (None, "", "none") else int(x),
        "seeds": parse_ints, "out": str, "gap_mode": str, "gap_learn_iters": int,
        "workers": int, "tol": float,
    }
    fields = {}
    for key, value in raw.items():
        fields[key] = casts[key](value)
    config = replace(config, **fields)
    config.validate()
    return config


def output_dir(config: ExperimentConfig) -> str:
    root = os.environ.get(OUTPUT_ROOT_ENV, "")
    path = os.path.join(root, config.out) if root else config.out
    os.makedirs(path, exist_ok=True)
    return path


def resolve_game(config: ExperimentConfig) -> tuple[ExplicitGame, np.ndarray]:
    """The configured game plus its initial-state distribution."""
    if config.game == "soccer":
        return build_soccer_game(config.gamma)
    game = read_tzmg(config.game)
    return game, np.full(game.num_states, 1.0 / game.num_states)


def solve_ground(config: ExperimentConfig, game: ExplicitGame, out_dir: str):
    """Shapley-solve the ground game, cached as <out>/ground.qpolicy."""
    cache = os.path.join(out_dir, "ground.qpolicy")
    if os.path.exists(cache):
        values, q_values, profile, gamma = read_qpolicy(cache)
        if gamma == game.gamma and q_values.shape == (
            game.num_states, game.actions_p1, game.actions_p2,
        ):
            return values, q_values, profile
    solution = shapley_solve(game, tol=config.tol)
    if not solution.converged:
        raise RuntimeError(
            f"value iteration did not converge (residual {solution.residuals[-1]})"
        )
    write_qpolicy(cache, solution.values, solution.q_values, solution.profile, game.gamma)
    return solution.values, solution.q_values, solution.profile


def build_abstraction(
    config: ExperimentConfig,
    game: ExplicitGame,
    q_star: np.ndarray | None,
    epsilon: float,
) -> Abstraction:
    if config.criterion == "model":
        return aggregate_model(game, epsilon)
    if q_star is None:
        raise ValueError(f"criterion {config.criterion} needs solved Q values")
    if config.criterion == "minimax_q":
        return aggregate_minimax_q(q_star, epsilon)
    if config.criterion == "boltzmann":
        return aggregate_boltzmann(q_star, epsilon, config.k)
    return aggregate_multinomial(q_star, epsilon, config.k, config.delta_floor)


def bound_for(config: ExperimentConfig, game: ExplicitGame, epsilon: float) -> float:
    sizes = (game.num_states, game.actions_p1, game.actions_p2)
    return theorem_bound(
        config.criterion, epsilon, game.gamma,
        sizes=sizes, k=config.k, delta=config.delta_floor,
    )


def run_state_size_sweep(config: ExperimentConfig):
    """State-count sweep: epsilon -> number of abstract states."""
    config.validate()
    out_dir = output_dir(config)
    game, _ = resolve_game(config)
    q_star = None
    if config.criterion != "model":
        _, q_star, _ = solve_ground(config, game, out_dir)
    rows = []
    for eps in config.epsilons:
        abstraction = build_abstraction(config, game, q_star, eps)
        rows.append([float(eps), abstraction.num_blocks])
    csv_path = os.path.join(out_dir, "state_sizes.csv")
    write_csv(csv_path, ["epsilon", "num_abstract_states"], rows)
    plot_path = os.path.join(out_dir, "state_sizes.svg")
    plot_state_sizes(csv_path, plot_path)
    violations = []
    sizes = [r[1] for r in rows]
    if any(a < b for a, b in zip(sizes, sizes[1:])):
        violations.append(f"abstract state counts are not non-increasing: {sizes}")
    return {"csv": csv_path, "plot": plot_path, "rows": rows}, violations


def _gap_job(payload):
    """Worker for one (epsilon, seed) learning-plus-evaluation job."""
    (game, initial, abstraction, epsilon, seed, config) = payload
    if abstraction is None:
        learn_game, learn_initial = game, initial
    else:
        learn_game = build_abstract_game(game, abstraction).game
        learn_initial = aggregate_initial_distribution(abstraction, initial)
    learner_config = LearnerConfig(
        total_iters=config.iters,
        gamma=game.gamma,
        beta=config.beta,
        lr_schedule=config.lr_schedule(config.iters),
        checkpoint_every=config.checkpoint_every,
        rng_seed=seed,
    )
    result = train(learn_game, learner_config, learn_initial)
    bound = None if abstraction is None else bound_for(config, game, epsilon)
    rows_all, rows_initial = [], []
    for iteration, profile in result.checkpoints:
        lifted = profile if abstraction is None else lift_policy(abstraction, profile)
        if config.gap_mode == "exact":
            report_all = duality_gap(game, lifted, tol=config.tol)
            report_init = duality_gap(
                game, lifted, tol=config.tol,
                states="initial", initial_distribution=initial,
            )
        else:
            report_all = duality_gap_learned(
                game, lifted, iters=config.gap_learn_iters, rng_seed=seed,
                initial_distribution=initial,
            )
            report_init = duality_gap_learned(
                game, lifted, iters=config.gap_learn_iters, rng_seed=seed,
                states="initial", initial_distribution=initial,
            )
        bound_cell = "" if bound is None else repr(float(bound))
        rows_all.append(
            [float(epsilon), config.criterion, iteration, report_all.gap,
             bound_cell, report_all.argmax_state]
        )
        rows_initial.append(
            [float(epsilon), config.criterion, iteration, report_init.gap,
             bound_cell, report_init.argmax_state]
        )
    return epsilon, seed, rows_all, rows_initial


def run_gap_experiment(config: ExperimentConfig):
    """Gap-curve sweep: learn per epsilon, evaluate lifted checkpoints.

    epsilon = 0 is the ground run (no abstraction in force, empty bound
    column). Writes gaps.csv / gaps_initial.csv for the first seed and
    gaps_seed<k>.csv variants for any further seeds.
    """
    config.validate()
    out_dir = output_dir(config)
    game, initial = resolve_game(config)
    q_star = None
    if config.criterion != "model":
        _, q_star, _ = solve_ground(config, game, out_dir)

    jobs = []
    for eps in config.epsilons:
        abstraction = None if eps == 0.0 else build_abstraction(config, game, q_star, eps)
        for seed in config.seeds:
            jobs.append((game, initial, abstraction, float(eps), seed, config))
    max_workers = config.workers or min(len(jobs), os.cpu_count() or 1)
    if max_workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            results = list(pool.map(_gap_job, jobs))
    else:
        results = [_gap_job(job) for job in jobs]
    results.sort(key=lambda item: (item[0], item[1]))

    outputs = {}
    violations = []
    header = ["epsilon", "criterion", "iter", "gap", "bound", "argmax_state"]
    for seed_index, seed in enumerate(sorted(config.seeds)):
        suffix = "" if seed_index == 0 else f"_seed{seed}"
        rows_all = [r for e, s, ra, ri in results if s == seed for r in ra]
        rows_initial = [r for e, s, ra, ri in results if s == seed for r in ri]
        path_all = os.path.join(out_dir, f"gaps{suffix}.csv")
        path_initial = os.path.join(out_dir, f"gaps_initial{suffix}.csv")
        write_csv(path_all, header, rows_all)
        write_csv(path_initial, header, rows_initial)
        outputs[f"csv{suffix}"] = path_all
        outputs[f"csv_initial{suffix}"] = path_initial
        for row in rows_all + rows_initial:
            if row[3] < 0:
                violations.append(f"negative gap in seed {seed}: {row}")
            if row[4] != "" and row[3] > float(row[4]):
                violations.append(f"gap exceeds bound in seed {seed}: {row}")
    plot_path = os.path.join(out_dir, "gaps.svg")
    plot_gaps(outputs["csv"], plot_path)
    outputs["plot"] = plot_path
    return outputs, violations


def solve_and_export(config: ExperimentConfig):
    """Solve the ground game; persist tables and the game itself.

    Verifies that the exported files round-trip bit-exactly and that the
    reloaded equilibrium still has a tiny duality gap.
    """
    config.validate()
    out_dir = output_dir(config)
    game, initial = resolve_game(config)
    values, q_values, profile = solve_ground(config, game, out_dir)

    game_path = os.path.join(out_dir, "game.tzmg")
    write_tzmg(game, game_path)
    reloaded = read_tzmg(game_path)
    second = os.path.join(out_dir, "game_roundtrip.tzmg")
    write_tzmg(reloaded, second)
    violations = []
    with open(game_path, "rb") as a, open(second, "rb") as b:
        if a.read() != b.read():
            violations.append("tzmg export does not round-trip byte-identically")
    os.remove(second)
    if validate_game(reloaded):
        violations.append("re-imported game fails validation")

    ground_path = os.path.join(out_dir, "ground.qpolicy")
    re_values, re_q, re_profile, _ = read_qpolicy(ground_path)
    report = duality_gap(reloaded, re_profile, tol=config.tol)
    if report.raw_gap > 1e-6:
        violations.append(f"reloaded equilibrium gap too large: {report.raw_gap}")
    outputs = {
        "game": game_path,
        "solution": ground_path,
        "gap": report.raw_gap,
        "values_at_initial": [float(values[s]) for s in np.nonzero(initial)[0]],
    }
    return outputs, violations


def export_abstraction(config: ExperimentConfig, epsilon: float):
    """Build one abstraction and persist it as a phi v1 file."""
    config.validate()
    out_dir = output_dir(config)
    game, _ = resolve_game(config)
    q_star = None
    if config.criterion != "model":
        _, q_star, _ = solve_ground(config, game, out_dir)
    abstraction = build_abstraction(config, game, q_star, epsilon)
    path = os.path.join(out_dir, f"abstraction_{config.criterion}_eps{epsilon}.phi")
    write_phi(abstraction, path)
    return {"phi": path, "num_blocks": abstraction.num_blocks}, []


def train_and_export(config: ExperimentConfig, epsilon: float, seed: int):
    """Train one learner (ground or abstract) and persist the final tables."""
    config.validate()
    out_dir = output_dir(config)
    game, initial = resolve_game(config)
    abstraction = None
    if epsilon > 0.0:
        q_star = None
        if config.criterion != "model":
            _, q_star, _ = solve_ground(config, game, out_dir)
        abstraction = build_abstraction(config, game, q_star, epsilon)
        learn_game = build_abstract_game(game, abstraction).game
        learn_initial = aggregate_initial_distribution(abstraction, initial)
    else:
        learn_game, learn_initial = game, initial
    learner_config = LearnerConfig(
        total_iters=config.iters,
        gamma=game.gamma,
        beta=config.beta,
        lr_schedule=config.lr_schedule(config.iters),
        checkpoint_every=config.checkpoint_every,
        rng_seed=seed,
    )
    result = train(learn_game, learner_config, learn_initial)
    state = result.final_state
    path = os.path.join(
        out_dir, f"policy_{config.criterion}_eps{epsilon}_seed{seed}.qpolicy"
    )
    write_qpolicy(path, state.v, state.q, state.profile, learn_game.gamma)
    if abstraction is not None:
        phi_path = os.path.join(
            out_dir, f"abstraction_{config.criterion}_eps{epsilon}.phi"
        )
        write_phi(abstraction, phi_path)
    return {"policy": path, "visited": int((state.visit_counts > 0).sum())}, []


def evaluate_policy_file(config: ExperimentConfig, policy_path: str, epsilon: float):
    """Duality gap (exact or learned) of a stored policy, lifted if needed."""
    config.validate()
    out_dir = output_dir(config)
    game, initial = resolve_game(config)
    _, _, profile, _ = read_qpolicy(policy_path)
    bound = None
    if epsilon > 0.0:
        phi_path = os.path.join(
            out_dir, f"abstraction_{config.criterion}_eps{epsilon}.phi"
        )
        abstraction = read_phi(phi_path)
        profile = lift_policy(abstraction, profile)
        bound = bound_for(config, game, epsilon)
    if config.gap_mode == "exact":
        report = duality_gap(
            game, profile, tol=config.tol,
            bound=bound, bound_formula=config.criterion,
        )
    else:
        report = duality_gap_learned(
            game, profile, iters=config.gap_learn_iters,
            rng_seed=config.seeds[0], initial_distribution=initial,
            bound=bound, bound_formula=config.criterion,
        )
    violations = []
    if report.gap < 0:
        violations.append("negative duality gap")
    if bound is not None and report.gap > bound:
        violations.append(f"gap {report.gap} exceeds bound {bound}")
    name = os.path.splitext(os.path.basename(policy_path))[0]
    csv_path = os.path.join(out_dir, f"gap_{name}.csv")
    write_csv(
        csv_path,
        ["epsilon", "criterion", "iter", "gap", "bound", "argmax_state"],
        [[float(epsilon), config.criterion, config.iters, report.gap,
          "" if bound is None else repr(float(bound)), report.argmax_state]],
    )
    return {"csv": csv_path, "gap": report.gap, "mode": report.mode}, violations


def _read_csv(path: str):
    with open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, list(reader)


def plot_state_sizes(csv_path: str, out_path: str) -> None:
    """Regenerate the state-size figure from its CSV."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    _, rows = _read_csv(csv_path)
    eps = [float(r[0]) for r in rows]
    sizes = [int(r[1]) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(eps, sizes, marker="o")
    ax.set_xlabel("epsilon")
    ax.set_ylabel("abstract states")
    ax.set_title("Abstract state count vs epsilon")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)


def plot_gaps(csv_path: str, out_path: str) -> None:
    """Regenerate the gap-curve figure from its CSV."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    _, rows = _read_csv(csv_path)
    series: dict[float, list[tuple[int, float]]] = {}
    for row in rows:
        series.setdefault(float(row[0]), []).append((int(row[2]), float(row[3])))
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for eps in sorted(series):
        pts = sorted(series[eps])
        label = "Ground" if eps == 0.0 else f"eps={eps:g}"
        ax.plot([p[0] for p in pts], [p[1] for p in pts], label=label)
    ax.set_xlabel("learning iterations")
    ax.set_ylabel("duality gap")
    ax.set_title("Duality gap of lifted policies in the ground game")
    ax.legend(fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path)
    plt.close(fig)
