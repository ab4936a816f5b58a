"""Monte-Carlo tree search: pure UCT with random rollouts, and network-guided PUCT.

The tree branches on distinct ``Move`` objects, so aliased moves (moves that
share one policy logit) still get their own children and statistics; only
the network prior is shared.  Training targets sum visit counts per logit.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Protocol, Sequence, Tuple

import numpy as np

from .codec import Codec, codec_for
from .dsl import GameSpec
from .engine import EngineError, GameState, Move, Rules, compile_rules


class SearchConfigError(Exception):
    pass


@dataclass
class SearchConfig:
    iterations: int = 400
    rollouts_per_iteration: int = 1
    exploration_constant: Optional[float] = None
    mode: str = "puct"
    dirichlet_noise: Optional[Tuple[float, float]] = None
    temperature: float = 0.0

    def __post_init__(self):
        if self.mode not in ("pure-uct", "puct"):
            raise SearchConfigError(f"unknown search mode {self.mode!r}")
        if self.iterations < 1:
            raise SearchConfigError("iterations must be positive")
        if self.mode == "pure-uct" and self.rollouts_per_iteration < 1:
            raise SearchConfigError("pure-uct needs at least one rollout per iteration")
        if self.temperature < 0:
            raise SearchConfigError("temperature must be non-negative")
        if self.exploration_constant is None:
            self.exploration_constant = math.sqrt(2) if self.mode == "pure-uct" else 1.5


@dataclass
class SearchResult:
    visits: Dict[Move, int]
    chosen: Move
    value_estimate: float
    logit_targets: Dict[int, float] = field(default_factory=dict)


class Evaluator(Protocol):
    codec: Codec

    def evaluate(self, state: GameState, moves: Sequence[Move]) -> Tuple[List[float], float]:
        """Per-move priors (aliased moves share their logit's probability) and the mover's value."""


class UniformEvaluator:
    """Uniform over distinct legal logits, value 0; a network stand-in for tests."""

    def __init__(self, spec: GameSpec):
        self.codec = codec_for(spec)

    def evaluate(self, state, moves):
        flats = [self.codec.flat(m) for m in moves]
        p = 1.0 / len(set(flats))
        return [p] * len(moves), 0.0


class _Node:
    __slots__ = ("state", "mover", "terminal", "moves", "priors", "children", "n", "w", "expanded")

    def __init__(self, state: GameState, terminal):
        self.state = state
        self.mover = state.mover
        self.terminal = terminal
        self.moves: List[Move] = []
        self.priors: List[float] = []
        self.children: List[Optional[_Node]] = []
        self.n: List[int] = []
        self.w: List[float] = []
        self.expanded = False

    def expand(self, moves: List[Move], priors: List[float]) -> None:
        k = len(moves)
        self.moves = moves
        self.priors = priors
        self.children = [None] * k
        self.n = [0] * k
        self.w = [0.0] * k
        self.expanded = True


def alias_targets(codec: Codec, visits: Dict[Move, int]) -> Dict[int, float]:
    """Normalised visit mass per logit, summing visits of aliased moves."""
    sums: Dict[int, int] = {}
    for m, v in visits.items():
        f = codec.flat(m)
        sums[f] = sums.get(f, 0) + v
    total = sum(sums.values())
    if total == 0:
        return {}
    return {f: v / total for f, v in sums.items()}


def _check_evaluator(codec: Codec, evaluator) -> None:
    ev_codec = getattr(evaluator, "codec", None)
    shape = getattr(evaluator, "shape", None)
    if shape is not None and tuple(shape) != (codec.C, codec.A, codec.H, codec.W):
        raise SearchConfigError(
            f"evaluator expects (C, A, H, W) = {tuple(shape)}, game has {(codec.C, codec.A, codec.H, codec.W)}"
        )
    if ev_codec is not None and ev_codec.layout_hash != codec.layout_hash:
        raise SearchConfigError("evaluator was built for a different game layout")


def search(
    spec: GameSpec,
    state: GameState,
    config: SearchConfig,
    evaluator=None,
    seed: int = 0,
) -> SearchResult:
    rules = compile_rules(spec)
    if rules.outcome(state) is not None:
        raise EngineError("search called on a terminal state")
    codec = codec_for(spec)
    puct = config.mode == "puct"
    if puct:
        if evaluator is None:
            raise SearchConfigError("puct mode requires an evaluator")
        _check_evaluator(codec, evaluator)
    rng = random.Random(seed)
    np_rng = np.random.default_rng(seed)
    c = config.exploration_constant

    root = _Node(state, None)
    moves = rules.legal(state)
    if puct:
        priors, root_value = evaluator.evaluate(state, moves)
        priors = list(priors)
        if config.dirichlet_noise is not None and len(moves) > 1:
            alpha, weight = config.dirichlet_noise
            noise = np_rng.dirichlet([alpha] * len(moves))
            priors = [(1 - weight) * p + weight * float(x) for p, x in zip(priors, noise)]
        root.expand(moves, priors)
    else:
        root.expand(moves, [])

    k_rollouts = config.rollouts_per_iteration
    for _ in range(config.iterations):
        node = root
        path: List[Tuple[_Node, int]] = []
        leaf = None
        while True:
            i = _select_puct(node, c) if puct else _select_uct(node, c)
            path.append((node, i))
            child = node.children[i]
            if child is None:
                cstate = rules.apply(node.state, node.moves[i], check=False)
                child = _Node(cstate, rules.outcome(cstate))
                node.children[i] = child
                leaf = child
                break
            if child.terminal is not None or not child.expanded:
                leaf = child
                break
            node = child

        if leaf.terminal is not None:
            value = leaf.terminal.score(leaf.mover)
        elif puct:
            lmoves = rules.legal(leaf.state)
            lpriors, value = evaluator.evaluate(leaf.state, lmoves)
            leaf.expand(lmoves, list(lpriors))
        else:
            lmoves = rules.legal(leaf.state)
            leaf.expand(lmoves, [])
            total = 0.0
            for _r in range(k_rollouts):
                total += rules.rollout(leaf.state, rng).score(leaf.mover)
            value = total / k_rollouts

        leaf_mover = leaf.mover
        for parent, i in reversed(path):
            parent.n[i] += 1
            parent.w[i] += value if parent.mover == leaf_mover else -value

    visits = dict(zip(root.moves, root.n))
    total_n = sum(root.n)
    value_estimate = sum(root.w) / total_n if total_n else 0.0
    value_estimate = max(-1.0, min(1.0, value_estimate))
    chosen = select_move(root.moves, root.n, config.temperature, np_rng)
    return SearchResult(visits, chosen, value_estimate, alias_targets(codec, visits))


def _select_uct(node: _Node, c: float) -> int:
    n = node.n
    best = -1
    best_score = -math.inf
    total = 0
    for i, ni in enumerate(n):
        if ni == 0:
            return i
        total += ni
    log_total = math.log(total)
    w = node.w
    for i, ni in enumerate(n):
        score = w[i] / ni + c * math.sqrt(log_total / ni)
        if score > best_score:
            best_score = score
            best = i
    return best


def _select_puct(node: _Node, c: float) -> int:
    n = node.n
    w = node.w
    p = node.priors
    sqrt_total = math.sqrt(sum(n) + 1)
    best = 0
    best_score = -math.inf
    for i, ni in enumerate(n):
        q = w[i] / ni if ni else 0.0
        score = q + c * p[i] * sqrt_total / (1 + ni)
        if score > best_score:
            best_score = score
            best = i
    return best


def select_move(moves: Sequence[Move], visits: Sequence[int], temperature: float, rng: np.random.Generator) -> Move:
    """Argmax of visits at temperature 0 (first in move order on ties); else visits^(1/T) sampling."""
    if temperature == 0 or sum(visits) == 0:
        best = max(range(len(moves)), key=lambda i: (visits[i], -i))
        return moves[best]
    v = np.asarray(visits, dtype=np.float64)
    logv = np.where(v > 0, np.log(np.maximum(v, 1e-300)), -np.inf) / temperature
    logv -= logv.max()
    probs = np.exp(logv)
    probs /= probs.sum()
    return moves[int(rng.choice(len(moves), p=probs))]


def random_rollout(spec: GameSpec, state: GameState, rng: random.Random, perspective: Optional[int] = None) -> float:
    rules: Rules = compile_rules(spec)
    result = rules.rollout(state, rng)
    return result.score(state.mover if perspective is None else perspective)
