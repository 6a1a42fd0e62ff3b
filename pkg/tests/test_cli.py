"""End-to-end CLI tests on a small random game."""

import os

import numpy as np
import pytest

from zsmg.cli import main
from zsmg.experiments import DESK_EPSILONS, PAPER_EPSILONS, load_config
from zsmg.serialization import write_tzmg

from conftest import make_random_game


@pytest.fixture()
def small_game_file(tmp_path):
    rng = np.random.default_rng(0)
    game = make_random_game(rng, num_states=6, actions_p1=2, actions_p2=2)
    path = tmp_path / "small.tzmg"
    write_tzmg(game, str(path))
    return str(path)


def run_cli(*args):
    return main(list(args))


class TestConfigHandling:
    def test_defaults(self):
        config = load_config(None)
        assert config.epsilons == DESK_EPSILONS
        assert config.iters == 200_000
        assert config.seeds == (0,)

    def test_file_and_overrides(self, tmp_path):
        cfg = tmp_path / "exp.cfg"
        cfg.write_text(
            "# experiment\n"
            "game = soccer\n"
            "gamma = 0.8\n"
            "epsilons = 0.0, 0.5, 1.0\n"
            "seeds = 3, 4\n"
            "iters = 1000\n"
        )
        config = load_config(str(cfg))
        assert config.gamma == 0.8
        assert config.epsilons == (0.0, 0.5, 1.0)
        assert config.seeds == (3, 4)
        # CLI flags win over file values.
        config = load_config(str(cfg), {"gamma": 0.9, "iters": 42})
        assert config.gamma == 0.9
        assert config.iters == 42

    def test_unknown_key_rejected(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("banana = 3\n")
        with pytest.raises(ValueError):
            load_config(str(cfg))

    def test_paper_scale(self):
        config = load_config(None, {"paper_scale": "true"})
        assert config.iters == 1_000_000
        assert config.epsilons == PAPER_EPSILONS
        assert len(config.epsilons) == 21

    def test_invalid_grid_rejected(self):
        with pytest.raises(ValueError):
            load_config(None, {"epsilons": "1.0,0.5"})
        with pytest.raises(ValueError):
            load_config(None, {"seeds": ""})
        with pytest.raises(ValueError):
            load_config(None, {"gap_mode": "psychic"})


class TestSubcommands:
    def test_solve_and_reexport(self, small_game_file, tmp_path):
        out = str(tmp_path / "run")
        assert run_cli("solve", "--game", small_game_file, "--out", out) == 0
        assert os.path.exists(os.path.join(out, "ground.qpolicy"))
        assert os.path.exists(os.path.join(out, "game.tzmg"))

    def test_sweep_sizes_outputs(self, small_game_file, tmp_path):
        out = str(tmp_path / "run")
        code = run_cli(
            "sweep-sizes", "--game", small_game_file, "--out", out,
            "--epsilons", "0.0,0.4,0.9,2.0",
        )
        assert code == 0
        lines = open(os.path.join(out, "state_sizes.csv")).read().splitlines()
        assert lines[0] == "epsilon,num_abstract_states"
        assert len(lines) == 5
        assert os.path.exists(os.path.join(out, "state_sizes.svg"))

    def test_sweep_gaps_ground_column_conventions(self, small_game_file, tmp_path):
        out = str(tmp_path / "run")
        code = run_cli(
            "sweep-gaps", "--game", small_game_file, "--out", out,
            "--epsilons", "0.0,0.6", "--iters", "400", "--workers", "1",
        )
        assert code == 0
        lines = open(os.path.join(out, "gaps.csv")).read().splitlines()
        assert lines[0] == "epsilon,criterion,iter,gap,bound,argmax_state"
        ground = [ln for ln in lines[1:] if ln.startswith("0.0,")]
        abstracted = [ln for ln in lines[1:] if ln.startswith("0.6,")]
        assert ground and abstracted
        for ln in ground:
            assert ln.split(",")[4] == ""  # no abstraction in force -> no bound
        for ln in abstracted:
            gap, bound = float(ln.split(",")[3]), float(ln.split(",")[4])
            assert gap <= bound
            assert gap >= 0.0
        assert os.path.exists(os.path.join(out, "gaps_initial.csv"))

    def test_train_then_gap(self, small_game_file, tmp_path):
        out = str(tmp_path / "run")
        assert run_cli(
            "train", "--game", small_game_file, "--out", out,
            "--iters", "400", "--epsilon", "0.5",
        ) == 0
        policy = os.path.join(out, "policy_minimax_q_eps0.5_seed0.qpolicy")
        assert os.path.exists(policy)
        assert run_cli(
            "gap", "--game", small_game_file, "--out", out,
            "--policy", policy, "--epsilon", "0.5",
        ) == 0

    def test_abstract_writes_phi(self, small_game_file, tmp_path):
        out = str(tmp_path / "run")
        assert run_cli(
            "abstract", "--game", small_game_file, "--out", out, "--epsilon", "0.4",
        ) == 0
        assert os.path.exists(os.path.join(out, "abstraction_minimax_q_eps0.4.phi"))

    def test_violation_sets_exit_code(self, small_game_file, tmp_path):
        # A barely-trained policy cannot satisfy the near-zero bound of a
        # tiny epsilon, so the gap command must flag it and exit nonzero.
        out = str(tmp_path / "run")
        run_cli("abstract", "--game", small_game_file, "--out", out,
                "--epsilon", "1e-06")
        run_cli("train", "--game", small_game_file, "--out", out,
                "--iters", "30", "--epsilon", "1e-06")
        policy = os.path.join(out, "policy_minimax_q_eps1e-06_seed0.qpolicy")
        code = run_cli(
            "gap", "--game", small_game_file, "--out", out,
            "--policy", policy, "--epsilon", "1e-06",
        )
        assert code == 1

    def test_output_root_env_var(self, small_game_file, tmp_path, monkeypatch):
        monkeypatch.setenv("ZSMG_OUT", str(tmp_path / "root"))
        assert run_cli("solve", "--game", small_game_file, "--out", "nested") == 0
        assert os.path.exists(tmp_path / "root" / "nested" / "ground.qpolicy")

    def test_repeat_runs_are_byte_identical(self, small_game_file, tmp_path):
        args = [
            "sweep-gaps", "--game", small_game_file,
            "--epsilons", "0.0,0.6", "--iters", "300", "--workers", "1",
        ]
        out_a, out_b = str(tmp_path / "a"), str(tmp_path / "b")
        assert run_cli(*args, "--out", out_a) == 0
        assert run_cli(*args, "--out", out_b) == 0
        for name in ("gaps.csv", "gaps_initial.csv"):
            a = open(os.path.join(out_a, name), "rb").read()
            b = open(os.path.join(out_b, name), "rb").read()
            assert a == b

    def test_worker_pool_matches_sequential(self, small_game_file, tmp_path):
        base = [
            "sweep-gaps", "--game", small_game_file,
            "--epsilons", "0.0,0.6", "--iters", "200", "--seeds", "0,1",
        ]
        out_seq, out_par = str(tmp_path / "seq"), str(tmp_path / "par")
        assert run_cli(*base, "--workers", "1", "--out", out_seq) == 0
        assert run_cli(*base, "--workers", "2", "--out", out_par) == 0
        for name in ("gaps.csv", "gaps_seed1.csv"):
            a = open(os.path.join(out_seq, name), "rb").read()
            b = open(os.path.join(out_par, name), "rb").read()
            assert a == b
