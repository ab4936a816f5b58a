import math

import numpy as np
import pytest

from ludozero.codec import codec_for
from ludozero.dsl import load_game
from ludozero.engine import EngineError, initial_state, legal_moves, make_state, apply, outcome, parse_move
from ludozero.search import (SearchConfig, SearchConfigError, UniformEvaluator, alias_targets, search,
                             select_move)
from test_engine import konane_alias_state


def gomoku_win_in_one():
    """P1 to move; 40 completes five, and P2 threatens an unstoppable five."""
    spec = load_game("gomoku-9")
    contents = [0] * 81
    for s in (36, 37, 38, 39):
        contents[s] = 1
    for s in (74, 75, 76, 77):
        contents[s] = 2
    return spec, make_state(spec, contents, mover=1, move_number=8)


def test_uct_finds_immediate_win():
    spec, state = gomoku_win_in_one()
    cfg = SearchConfig(iterations=400, rollouts_per_iteration=10, mode="pure-uct")
    for seed in range(3):
        res = search(spec, state, cfg, seed=seed)
        best = max(res.visits.values())
        winners = [m for m, v in res.visits.items() if v == best]
        assert [m.to for m in winners] == [40]
        assert res.chosen.to == 40


def test_uct_visits_sum_to_iterations_and_are_reproducible():
    spec = load_game("hex-5")
    s = initial_state(spec)
    cfg = SearchConfig(iterations=300, rollouts_per_iteration=2, mode="pure-uct")
    a = search(spec, s, cfg, seed=5)
    b = search(spec, s, cfg, seed=5)
    assert sum(a.visits.values()) == 300
    assert a.visits == b.visits and a.chosen == b.chosen and a.value_estimate == b.value_estimate
    assert -1 <= a.value_estimate <= 1
    c = search(spec, s, cfg, seed=6)
    assert c.visits != a.visits


def test_puct_requires_evaluator():
    spec = load_game("hex-5")
    with pytest.raises(SearchConfigError):
        search(spec, initial_state(spec), SearchConfig(iterations=10), None)


def test_bad_configs():
    with pytest.raises(SearchConfigError):
        SearchConfig(mode="alphabeta")
    with pytest.raises(SearchConfigError):
        SearchConfig(iterations=0)
    with pytest.raises(SearchConfigError):
        SearchConfig(mode="pure-uct", rollouts_per_iteration=0)
    assert SearchConfig(mode="pure-uct").exploration_constant == pytest.approx(math.sqrt(2))
    assert SearchConfig().exploration_constant == 1.5


def test_terminal_state_rejected():
    spec = load_game("squava")
    contents = [1, 1, 1] + [0] * 22
    s = make_state(spec, contents, mover=2, move_number=5)
    assert outcome(spec, s) is not None
    with pytest.raises(EngineError):
        search(spec, s, SearchConfig(iterations=5, mode="pure-uct"))


def test_evaluator_shape_mismatch():
    spec = load_game("hex-5")

    class Wrong(UniformEvaluator):
        shape = (1, 2, 3, 4)

    with pytest.raises(SearchConfigError):
        search(spec, initial_state(spec), SearchConfig(iterations=5), Wrong(spec))
    other = UniformEvaluator(load_game("squava"))
    with pytest.raises(SearchConfigError):
        search(spec, initial_state(spec), SearchConfig(iterations=5), other)


def test_puct_targets_sum_aliased_visits():
    spec = load_game("konane-6")
    s = konane_alias_state(spec)
    codec = codec_for(spec)
    res = search(spec, s, SearchConfig(iterations=200), UniformEvaluator(spec), seed=1)
    assert sum(res.visits.values()) == 200
    assert sum(res.logit_targets.values()) == pytest.approx(1.0, abs=1e-12)
    groups = codec.partition(list(res.visits))
    for flat, moves in groups.items():
        want = sum(res.visits[m] for m in moves) / 200
        assert res.logit_targets.get(flat, 0.0) == pytest.approx(want)
    assert any(len(v) == 2 for v in groups.values())


def test_aliased_moves_share_full_prior():
    spec = load_game("konane-6")
    s = konane_alias_state(spec)
    moves = legal_moves(spec, s)
    priors, _ = UniformEvaluator(spec).evaluate(s, moves)
    distinct = len(codec_for(spec).partition(moves))
    assert all(p == pytest.approx(1 / distinct) for p in priors)


def test_dirichlet_noise_is_seeded():
    spec = load_game("hex-5")
    s = initial_state(spec)
    cfg = SearchConfig(iterations=64, dirichlet_noise=(0.4, 0.25))
    a = search(spec, s, cfg, UniformEvaluator(spec), seed=3)
    b = search(spec, s, cfg, UniformEvaluator(spec), seed=3)
    plain = search(spec, s, SearchConfig(iterations=64), UniformEvaluator(spec), seed=3)
    assert a.visits == b.visits
    assert a.visits != plain.visits


def test_select_move_tiebreak_and_temperature():
    rng = np.random.default_rng(0)
    moves = ["a", "b", "c"]
    assert select_move(moves, [3, 5, 5], 0.0, rng) == "b"
    picks = [select_move(moves, [1, 0, 3], 1.0, np.random.default_rng(i)) for i in range(400)]
    assert "b" not in picks
    assert 0.15 < picks.count("a") / 400 < 0.35


def test_alias_targets_empty():
    spec = load_game("hex-5")
    assert alias_targets(codec_for(spec), {}) == {}


def test_uct_takes_squava_four():
    # P1 completes four at 2; otherwise P2 completes four at 22
    spec = load_game("squava")
    contents = [0] * 25
    for s in (0, 1, 3):
        contents[s] = 1
    for s in (20, 21, 23):
        contents[s] = 2
    s = make_state(spec, contents, mover=1, move_number=6)
    res = search(spec, s, SearchConfig(iterations=600, rollouts_per_iteration=4, mode="pure-uct"), seed=0)
    assert res.chosen.to == 2
