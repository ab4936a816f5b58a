import json
import os
import subprocess
import sys

import pytest

from ludozero.cli import main
from ludozero.dsl import builtin_games


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_games(capsys):
    code, out, _ = run(capsys, "games")
    assert code == 0
    assert all(name in out for name in builtin_games())


def test_parse_file(capsys, tmp_path):
    path = tmp_path / "g.lgd"
    path.write_text(builtin_games()["yavalath"])
    code, out, _ = run(capsys, "parse", str(path))
    assert code == 0 and out.startswith("ok: yavalath")
    code, out, _ = run(capsys, "parse", str(path), "--canonical")
    assert code == 0 and out.startswith("(game")


@pytest.mark.parametrize("argv, fragment", [
    (["parse", "/no/such/file.lgd"], "cannot read"),
    (["inspect", "chess"], "chess"),
    (["perft", "hex-5", "-1"], "depth"),
    (["eval", "hex-5", "--paper-protocol", "--games", "2"], "--ckpt"),
    (["eval", "hex-5", "--ckpt", "/no/ckpt.lgc", "--games", "2"], "checkpoint"),
])
def test_errors_are_one_line(capsys, argv, fragment):
    code, out, err = run(capsys, *argv)
    assert code != 0
    assert err.startswith("error: ") and err.count("\n") == 1
    assert fragment in err


def test_parse_error_reports_position(capsys, tmp_path):
    path = tmp_path / "bad.lgd"
    path.write_text('(game "x"\n  (players 2)\n  (bogus 1))')
    code, _, err = run(capsys, "parse", str(path))
    assert code == 1 and "3:3:" in err and err.count("\n") == 1


def test_argparse_errors_exit_nonzero(capsys):
    with pytest.raises(SystemExit) as info:
        main(["perft", "hex-5"])
    assert info.value.code == 2
    assert capsys.readouterr().err.count("\n") == 1


def test_inspect_and_perft(capsys):
    code, out, _ = run(capsys, "inspect", "hex-11")
    assert code == 0 and "A=3" in out and "W=31" in out
    code, out, _ = run(capsys, "inspect", "squava", "--json")
    assert json.loads(out)["summary"]["C"] == 15
    code, out, _ = run(capsys, "perft", "gomoku-9", "2")
    assert code == 0 and "= 6480" in out


def test_train_then_eval(capsys, tmp_path):
    cfg = tmp_path / "tiny.cfg"
    cfg.write_text("games = 2\ntotal_steps = 4\nbatch_size = 4\nsearch_iterations = 4\n"
                   "trunk_channels = 4\nresidual_blocks = 1\nvalue_hidden = 4\nlog_every = 2\n")
    out_dir = tmp_path / "run"
    code, out, err = run(capsys, "train", "squava", "--config", str(cfg), "--out", str(out_dir),
                         "--set", "seed=5")
    assert code == 0, err
    assert "step      4" in out and "finished: 4 steps" in out
    ckpt = out_dir / "final.lgc"
    jsonl = tmp_path / "games.jsonl"
    code, out, err = run(capsys, "eval", "squava", "--ckpt", str(ckpt), "--a-iterations", "4",
                         "--b-kind", "random", "--games", "2", "--seed", "3", "--jsonl", str(jsonl))
    assert code == 0, err
    summary = json.loads(out.strip().splitlines()[-1])
    assert summary["games"] == 2 and summary["agent_a"] == "puct-4"
    assert len(jsonl.read_text().splitlines()) == 2


def test_train_bad_config(capsys, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("games 2\n")
    code, _, err = run(capsys, "train", "squava", "--config", str(cfg), "--out", str(tmp_path / "o"))
    assert code == 1 and "line 1" in err


def test_play_scripted(monkeypatch, capsys):
    moves = iter(["legal", "-99", "-0", "quit"])
    monkeypatch.setattr("builtins.input", lambda prompt="": next(moves))
    code, out, err = run(capsys, "play", "squava", "--iterations", "10", "--rollouts", "1")
    assert code == 0
    assert "agent plays" in out and "illegal" in err


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ludozero.cli", "perft", "nope", "1"],
                          capture_output=True, text=True)
    assert proc.returncode == 1 and proc.stderr.startswith("error:")
