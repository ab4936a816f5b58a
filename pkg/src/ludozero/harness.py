"""Agents and head-to-head matches."""

from __future__ import annotations

import math
import random
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional

from . import checkpoint, nn
from .codec import codec_for
from .dsl import GameSpec
from .engine import GameState, Move, compile_rules
from .search import SearchConfig, search


class AgentError(ValueError):
    pass


@dataclass(frozen=True)
class AgentSpec:
    kind: str = "puct"              # "puct", "pure-uct" or "random"
    iterations: int = 40
    rollouts: int = 1
    checkpoint: Optional[str] = None
    exploration_constant: Optional[float] = None
    temperature: float = 0.0

    def label(self) -> str:
        if self.kind == "random":
            return "random"
        if self.kind == "pure-uct":
            return f"uct-{self.iterations}x{self.rollouts}"
        return f"puct-{self.iterations}" + ("" if self.checkpoint else "-uniform")


def trained_agent(ckpt: str) -> AgentSpec:
    return AgentSpec(kind="puct", iterations=40, checkpoint=ckpt)


BASELINE = AgentSpec(kind="pure-uct", iterations=800, rollouts=10)


class Agent:
    def __init__(self, spec: GameSpec, agent: AgentSpec):
        if agent.kind not in ("puct", "pure-uct", "random"):
            raise AgentError(f"unknown agent kind {agent.kind!r}")
        self.game = spec
        self.spec = agent
        self.evaluator = None
        if agent.kind == "puct":
            codec = codec_for(spec)
            if agent.checkpoint is None:
                from .search import UniformEvaluator
                self.evaluator = UniformEvaluator(spec)
            else:
                params, meta, _ = checkpoint.load(agent.checkpoint, expected_layout_hash=codec.layout_hash)
                self.evaluator = nn.NetworkEvaluator(codec, params)
        if agent.kind != "random":
            self.config = SearchConfig(
                iterations=agent.iterations, rollouts_per_iteration=agent.rollouts,
                exploration_constant=agent.exploration_constant, mode=agent.kind,
                temperature=agent.temperature)

    def choose(self, state: GameState, seed: int) -> Move:
        if self.spec.kind == "random":
            moves = compile_rules(self.game).legal(state)
            return moves[random.Random(seed).randrange(len(moves))]
        return search(self.game, state, self.config, self.evaluator, seed=seed).chosen


@dataclass
class GameRecord:
    index: int
    seed: int
    a_seat: int
    result_a: float     # 1 win, 0.5 draw, 0 loss
    length: int
    moves: List[str]


def _wilson(score: float, n: int, z: float = 1.959963984540054):
    if n == 0:
        return 0.0, 1.0
    p = score / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class MatchStats:
    agent_a: str
    agent_b: str
    games: int
    wins: int
    losses: int
    draws: int
    score: float
    ci_low: float
    ci_high: float
    by_seat: Dict[str, Dict[str, int]]
    mean_length: float
    records: List[GameRecord] = field(default_factory=list)

    @property
    def win_rate(self) -> float:
        return self.score / self.games if self.games else 0.0

    def summary(self) -> Dict[str, object]:
        out = asdict(self)
        out.pop("records")
        out["win_rate"] = self.win_rate
        return out


def play_game(spec: GameSpec, first: Agent, second: Agent, seed: int):
    """Returns (outcome, move list)."""
    rules = compile_rules(spec)
    state = rules.initial_state()
    agents = {1: first, 2: second}
    moves: List[str] = []
    ply = 0
    while rules.outcome(state) is None:
        move = agents[state.mover].choose(state, seed * 7919 + ply)
        moves.append(move.notation())
        state = rules.apply(state, move)
        ply += 1
    return rules.outcome(state), moves


def run_match(spec: GameSpec, agent_a: AgentSpec, agent_b: AgentSpec, games: int, seed: int = 0,
              on_game: Optional[Callable[[GameRecord], None]] = None,
              should_stop: Optional[Callable[[], bool]] = None) -> MatchStats:
    """Agent A takes seat 1 in even-numbered games and seat 2 in odd ones.

    Game ``i`` uses seed ``seed + i``.  Draws count half a point.
    """
    if games < 1:
        raise AgentError("games must be positive")
    a = Agent(spec, agent_a)
    b = Agent(spec, agent_b)
    records: List[GameRecord] = []
    by_seat = {str(s): {"wins": 0, "losses": 0, "draws": 0} for s in (1, 2)}
    for i in range(games):
        if should_stop is not None and should_stop():
            break
        a_seat = 1 if i % 2 == 0 else 2
        first, second = (a, b) if a_seat == 1 else (b, a)
        result, moves = play_game(spec, first, second, seed + i)
        score = (result.score(a_seat) + 1.0) / 2.0
        key = "wins" if score == 1 else "losses" if score == 0 else "draws"
        by_seat[str(a_seat)][key] += 1
        rec = GameRecord(i, seed + i, a_seat, score, len(moves), moves)
        records.append(rec)
        if on_game is not None:
            on_game(rec)
    n = len(records)
    total = sum(r.result_a for r in records)
    lo, hi = _wilson(total, n)
    wins = sum(1 for r in records if r.result_a == 1)
    losses = sum(1 for r in records if r.result_a == 0)
    return MatchStats(
        agent_a=agent_a.label(), agent_b=agent_b.label(), games=n, wins=wins, losses=losses,
        draws=n - wins - losses, score=total, ci_low=lo, ci_high=hi, by_seat=by_seat,
        mean_length=sum(r.length for r in records) / n if n else 0.0, records=records)
