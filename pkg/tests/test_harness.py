import math

import pytest

from ludozero.dsl import load_game
from ludozero.harness import (BASELINE, AgentError, AgentSpec, _wilson, run_match, trained_agent)

RANDOM = AgentSpec(kind="random")


def test_wilson_interval_reference_values():
    lo, hi = _wilson(60, 100)
    assert (lo, hi) == pytest.approx((0.502, 0.691), abs=1e-3)
    assert _wilson(0, 10)[0] == 0.0
    assert _wilson(10, 10)[1] == pytest.approx(1.0)
    assert _wilson(0, 0) == (0.0, 1.0)


def test_wilson_matches_closed_form():
    n, s, z = 200, 131.5, 1.959963984540054
    p = s / n
    centre = (p + z * z / (2 * n)) / (1 + z * z / n)
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / (1 + z * z / n)
    assert _wilson(s, n) == pytest.approx((centre - half, centre + half))


def test_random_match_alternates_seats_and_counts():
    stats = run_match(load_game("squava"), RANDOM, RANDOM, games=10, seed=5)
    assert stats.games == 10
    assert [r.a_seat for r in stats.records] == [1, 2] * 5
    assert [r.seed for r in stats.records] == list(range(5, 15))
    assert stats.wins + stats.losses + stats.draws == 10
    assert stats.score == pytest.approx(stats.wins + 0.5 * stats.draws)
    seat_total = sum(sum(v.values()) for v in stats.by_seat.values())
    assert seat_total == 10 and sum(stats.by_seat["1"].values()) == 5
    assert stats.ci_low <= stats.win_rate <= stats.ci_high
    summary = stats.summary()
    assert "records" not in summary and summary["win_rate"] == stats.win_rate


def test_match_is_reproducible():
    spec = load_game("hex-5")
    uct = AgentSpec(kind="pure-uct", iterations=20, rollouts=1)
    a = run_match(spec, uct, RANDOM, games=4, seed=1)
    b = run_match(spec, uct, RANDOM, games=4, seed=1)
    assert [r.moves for r in a.records] == [r.moves for r in b.records]


def test_uct_beats_random_on_squava():
    uct = AgentSpec(kind="pure-uct", iterations=200, rollouts=2)
    stats = run_match(load_game("squava"), uct, RANDOM, games=6, seed=0)
    assert stats.score >= 5


def test_hooks():
    seen = []
    stats = run_match(load_game("squava"), RANDOM, RANDOM, games=5, on_game=seen.append,
                      should_stop=lambda: len(seen) >= 3)
    assert stats.games == 3 and len(seen) == 3


def test_agent_errors():
    with pytest.raises(AgentError):
        run_match(load_game("squava"), AgentSpec(kind="minimax"), RANDOM, games=1)
    with pytest.raises(AgentError):
        run_match(load_game("squava"), RANDOM, RANDOM, games=0)


def test_labels():
    assert BASELINE.label() == "uct-800x10"
    assert trained_agent("x.lgc").label() == "puct-40"
    assert AgentSpec().label() == "puct-40-uniform"
