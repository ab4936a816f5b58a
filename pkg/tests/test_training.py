import json
import os

import numpy as np
import pytest

from ludozero import checkpoint, nn
from ludozero.codec import codec_for
from ludozero.dsl import load_game
from ludozero.training import (ReplayBuffer, TrainConfig, TrainingConfigError, parse_config_text,
                               selfplay_game, train)

TINY = dict(games=4, total_steps=8, batch_size=8, search_iterations=8, trunk_channels=4,
            residual_blocks=1, value_hidden=4, log_every=2, snapshot_every=4)


def tiny_config(**kw):
    return TrainConfig(**{**TINY, **kw})


def test_config_text_parsing():
    text = "# comment\ngames = 10\n\ntotal_steps=5   # trailing\nlearning_rate = 0.05\n"
    cfg = TrainConfig.from_mapping(parse_config_text(text))
    assert (cfg.games, cfg.total_steps, cfg.learning_rate) == (10, 5, 0.05)
    assert cfg.sgd.learning_rate == 0.05


@pytest.mark.parametrize("values", [{"games": "0"}, {"total_steps": "-1"}, {"batch_size": "x"},
                                    {"colour": "red"}, {"dirichlet_weight": "1.5"}])
def test_config_errors(values):
    with pytest.raises(TrainingConfigError):
        TrainConfig.from_mapping(values)


def test_config_line_without_equals():
    with pytest.raises(TrainingConfigError, match="line 2"):
        parse_config_text("games = 1\nnonsense\n")


def test_selfplay_samples_are_consistent():
    spec = load_game("squava")
    codec = codec_for(spec)
    cfg = tiny_config()
    params = nn.init_params(nn.NetShape(codec.C, codec.A, codec.H, codec.W), cfg.network, seed=0)
    samples, winner, plies = selfplay_game(spec, params, cfg, seed=11)
    assert len(samples) == plies > 0
    for x, targets, z, legal in samples:
        assert x.shape == (codec.C, codec.H, codec.W)
        assert sum(targets.values()) == pytest.approx(1.0)
        assert set(targets) <= set(legal)
        assert z in (-1.0, 0.0, 1.0)
    if winner is None:
        assert all(s[2] == 0 for s in samples)
    else:
        # the player who made the final move won
        assert samples[-1][2] == 1.0
    again = selfplay_game(spec, params, cfg, seed=11)
    assert again[2] == plies and all(np.array_equal(a[0], b[0]) for a, b in zip(samples, again[0]))


def test_replay_buffer_is_fifo():
    buf = ReplayBuffer(3)
    buf.extend([1, 2])
    buf.extend([3, 4])
    assert list(buf.items) == [2, 3, 4]
    picks = buf.sample(50, np.random.default_rng(0))
    assert set(picks) <= {2, 3, 4}


def test_tiny_run_writes_artifacts(tmp_path):
    spec = load_game("squava")
    seen = []
    res = train(spec, tiny_config(), str(tmp_path), progress=seen.append)
    assert (res.steps, res.games, res.stopped_early) == (8, 4, False)
    files = sorted(os.listdir(tmp_path))
    assert files == ["ckpt_0000000.lgc", "ckpt_0000004.lgc", "ckpt_0000008.lgc", "config.json",
                     "final.lgc", "game.lgd", "metrics.jsonl", "result.json"]
    lines = [json.loads(l) for l in open(res.metrics_path)]
    assert [l["step"] for l in lines] == [2, 4, 6, 8]
    assert lines == seen
    for l in lines:
        assert set(l) == {"step", "policy_loss", "value_loss", "total_loss", "buffer_size", "games", "snapshot"}
        assert l["total_loss"] == pytest.approx(l["policy_loss"] + l["value_loss"])
    assert lines[1]["snapshot"].endswith("ckpt_0000004.lgc")
    params, meta, opt = checkpoint.load(res.final_checkpoint, codec_for(spec).layout_hash)
    assert meta["step"] == "8" and meta["game"] == "squava"
    assert set(opt) and set(opt) <= set(params)
    assert json.load(open(tmp_path / "config.json"))["games"] == 4
    assert json.load(open(tmp_path / "result.json"))["steps"] == 8


def test_zero_steps_only_initial_and_final(tmp_path):
    res = train(load_game("squava"), tiny_config(total_steps=0, games=1), str(tmp_path))
    assert res.steps == 0
    assert {f for f in os.listdir(tmp_path) if f.endswith(".lgc")} == {"ckpt_0000000.lgc", "final.lgc"}
    assert open(res.metrics_path).read() == ""
    p0, _, _ = checkpoint.load(str(tmp_path / "ckpt_0000000.lgc"))
    p1, meta, _ = checkpoint.load(res.final_checkpoint)
    assert all(p0[k].tobytes() == p1[k].tobytes() for k in p0)
    assert meta["games"] == "1"


def test_training_is_bit_identical_on_rerun(tmp_path):
    spec = load_game("squava")
    a = train(spec, tiny_config(seed=3), str(tmp_path / "a"))
    b = train(spec, tiny_config(seed=3), str(tmp_path / "b"))
    assert open(a.final_checkpoint, "rb").read() == open(b.final_checkpoint, "rb").read()
    assert open(a.metrics_path).read() == open(b.metrics_path).read()
    c = train(spec, tiny_config(seed=4), str(tmp_path / "c"))
    assert open(a.final_checkpoint, "rb").read() != open(c.final_checkpoint, "rb").read()


def test_should_stop_ends_early(tmp_path):
    res = train(load_game("squava"), tiny_config(), str(tmp_path), should_stop=lambda: True)
    assert res.stopped_early and res.games == 0 and res.steps == 0
    assert os.path.exists(res.final_checkpoint)


@pytest.mark.slow
def test_parallel_workers_complete(tmp_path):
    res = train(load_game("squava"), tiny_config(workers=2), str(tmp_path))
    assert (res.steps, res.games) == (8, 4)
