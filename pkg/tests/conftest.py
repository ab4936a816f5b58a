import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from ludozero.dsl import load_game, parse_game  # noqa: E402

ACCEPTANCE_LINES = []

STACKING_SPEC = """
(game "stack-test"
  (players 2)
  (options stacking)
  (equipment (board (square 5 5)) (piece "Disc" each))
  (rules
    (play (step-move "Disc" (dirs all) (to empty enemy)))
    (end (no-moves-end lose))))
"""

HANDS_SPEC = """
(game "hands-test"
  (players 2)
  (equipment
    (board (square 9 9))
    (hand P1 7)
    (hand P2 7)
    (piece "Stone" each))
  (rules
    (play (place-empty "Stone"))
    (end (line-end 5 win) (no-moves-end draw))))
"""


@pytest.fixture(scope="session")
def stacking_spec():
    return parse_game(STACKING_SPEC)


@pytest.fixture(scope="session")
def hands_spec():
    return parse_game(HANDS_SPEC)


@pytest.fixture
def game():
    return load_game


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
