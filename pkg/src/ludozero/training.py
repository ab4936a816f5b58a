"""Self-play training loop.

Each self-play move runs PUCT with Dirichlet noise at the root; visit counts
(summed per logit for aliased moves) become the policy target and the game
result, seen from the mover at that ply, becomes the value target.  With one
worker the whole run is a deterministic function of the config.
"""

from __future__ import annotations

import json
import multiprocessing
import os
import time
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import Callable, Deque, Dict, List, Optional, Tuple

import numpy as np

from . import checkpoint, nn
from .codec import Codec, codec_for
from .dsl import GameSpec
from .engine import compile_rules
from .search import SearchConfig, search
from .symmetry import augment, find_symmetries



class TrainingConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    games: int = 200
    total_steps: int = 2000
    batch_size: int = 64
    buffer_capacity: int = 20000
    search_iterations: int = 400
    dirichlet_alpha_scale: float = 10.0
    dirichlet_weight: float = 0.25
    temperature_plies: int = 8
    learning_rate: float = 0.01
    momentum: float = 0.9
    weight_decay: float = 1e-4
    trunk_channels: int = 32
    residual_blocks: int = 4
    value_hidden: int = 32
    workers: int = 1
    seed: int = 0
    snapshot_every: int = 500
    log_every: int = 10
    max_seconds: Optional[float] = None
    augment_symmetries: bool = True

    def __post_init__(self):
        if self.games < 1:
            raise TrainingConfigError("games must be at least 1")
        if self.total_steps < 0:
            raise TrainingConfigError("total_steps must be non-negative")
        for name in ("batch_size", "buffer_capacity", "search_iterations", "workers",
                     "trunk_channels", "value_hidden", "snapshot_every", "log_every"):
            if getattr(self, name) < 1:
                raise TrainingConfigError(f"{name} must be positive")
        if self.residual_blocks < 0:
            raise TrainingConfigError("residual_blocks must be non-negative")
        if not 0 <= self.dirichlet_weight <= 1:
            raise TrainingConfigError("dirichlet_weight must lie in [0, 1]")
        if self.learning_rate <= 0:
            raise TrainingConfigError("learning_rate must be positive")

    @classmethod
    def from_mapping(cls, values: Dict[str, object]) -> "TrainConfig":
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            name = key.replace("-", "_")
            if name not in known:
                raise TrainingConfigError(f"unknown config key {key!r}")
            kwargs[name] = _coerce(name, raw, cls.__dataclass_fields__[name].default)
        return cls(**kwargs)

    @property
    def network(self) -> nn.NetworkConfig:
        return nn.NetworkConfig(self.trunk_channels, self.residual_blocks, self.value_hidden)

    @property
    def sgd(self) -> nn.SGDConfig:
        return nn.SGDConfig(self.learning_rate, self.momentum, self.weight_decay)


def _coerce(name: str, raw, default):
    if not isinstance(raw, str):
        return raw
    text = raw.strip()
    if name == "max_seconds":
        return None if text.lower() in ("", "none") else float(text)
    try:
        if isinstance(default, bool):
            if text.lower() in ("1", "true", "yes"):
                return True
            if text.lower() in ("0", "false", "no"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
    except ValueError:
        raise TrainingConfigError(f"bad value {raw!r} for {name}") from None
    return text


def parse_config_text(text: str) -> Dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise TrainingConfigError(f"config line {lineno}: expected key = value")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


# ---------------------------------------------------------------- self-play

Sample = Tuple[np.ndarray, Dict[int, float], float, Tuple[int, ...]]


def selfplay_game(spec: GameSpec, params, config: TrainConfig, seed: int) -> Tuple[List[Sample], Optional[int], int]:
    """Play one game; returns (samples, winner seat or None, plies)."""
    rules = compile_rules(spec)
    codec = codec_for(spec)
    evaluator = nn.NetworkEvaluator(codec, params)
    state = rules.initial_state()
    pending: List[Tuple[np.ndarray, Dict[int, float], int, Tuple[int, ...]]] = []
    ply = 0
    while rules.outcome(state) is None:
        moves = rules.legal(state)
        temp = 1.0 if ply < config.temperature_plies else 0.0
        alpha = config.dirichlet_alpha_scale / len(moves)
        scfg = SearchConfig(iterations=config.search_iterations, mode="puct",
                            dirichlet_noise=(alpha, config.dirichlet_weight), temperature=temp)
        result = search(spec, state, scfg, evaluator, seed=seed * 10007 + ply)
        legal = tuple(sorted({codec.flat(m) for m in moves}))
        pending.append((codec.encode_state(state), result.logit_targets, state.mover, legal))
        state = rules.apply(state, result.chosen, check=False)
        ply += 1
    final = rules.outcome(state)
    samples = [(x, t, final.score(mover), legal) for x, t, mover, legal in pending]
    winner = 1 if final.p1 > final.p2 else 2 if final.p2 > final.p1 else None
    return samples, winner, ply


class ReplayBuffer:
    """FIFO of training samples with seeded uniform sampling."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.items: Deque[Sample] = deque(maxlen=capacity)

    def __len__(self):
        return len(self.items)

    def extend(self, samples: List[Sample]) -> None:
        self.items.extend(samples)

    def sample(self, n: int, rng: np.random.Generator) -> List[Sample]:
        idx = rng.integers(0, len(self.items), size=n)
        return [self.items[i] for i in idx]


# ---------------------------------------------------------------- worker pool

_WORKER_SPEC: Optional[GameSpec] = None


def _worker_init(spec_text: str) -> None:
    global _WORKER_SPEC
    from .dsl import parse_game
    _WORKER_SPEC = parse_game(spec_text)


def _worker_game(args):
    params, config, seed = args
    return selfplay_game(_WORKER_SPEC, params, config, seed)


# ---------------------------------------------------------------- training

@dataclass
class TrainResult:
    steps: int
    games: int
    final_checkpoint: str
    metrics_path: str
    elapsed: float
    stopped_early: bool


def checkpoint_metadata(spec: GameSpec, codec: Codec, config: TrainConfig, step: int, games: int) -> Dict[str, object]:
    return {
        "game": spec.name,
        "layout_hash": codec.layout_hash,
        "step": step,
        "games": games,
        "trunk_channels": config.trunk_channels,
        "residual_blocks": config.residual_blocks,
        "value_hidden": config.value_hidden,
        "C": codec.C, "A": codec.A, "H": codec.H, "W": codec.W,
    }


def train(spec: GameSpec, config: TrainConfig, outdir: str,
          progress: Optional[Callable[[Dict[str, object]], None]] = None,
          should_stop: Optional[Callable[[], bool]] = None) -> TrainResult:
    """Run self-play training and write checkpoints and metrics to ``outdir``.

    After self-play game ``g`` the learner catches up to
    ``total_steps * g // games`` optimiser steps.
    """
    from .dsl import print_game

    start = time.monotonic()
    os.makedirs(outdir, exist_ok=True)
    codec = codec_for(spec)
    shape = nn.NetShape(codec.C, codec.A, codec.H, codec.W)
    params = nn.init_params(shape, config.network, seed=config.seed)
    opt_state: Dict[str, np.ndarray] = {}
    rng = np.random.default_rng(config.seed)
    buffer = ReplayBuffer(config.buffer_capacity)
    metrics_path = os.path.join(outdir, "metrics.jsonl")
    with open(os.path.join(outdir, "config.json"), "w") as fh:
        json.dump({"game": spec.name, **asdict(config)}, fh, indent=2, sort_keys=True)
    with open(os.path.join(outdir, "game.lgd"), "w") as fh:
        fh.write(print_game(spec))

    def snapshot(step: int, games: int, name: Optional[str] = None) -> str:
        path = os.path.join(outdir, name or f"ckpt_{step:07d}.lgc")
        checkpoint.save(path, params, checkpoint_metadata(spec, codec, config, step, games), opt_state)
        return path

    def out_of_time() -> bool:
        if should_stop is not None and should_stop():
            return True
        return config.max_seconds is not None and time.monotonic() - start >= config.max_seconds

    symmetries = (None,) + (find_symmetries(spec) if config.augment_symmetries else ())
    metrics_fh = open(metrics_path, "w")
    step = 0
    games_done = 0
    window: List[Dict[str, float]] = []
    stopped = False
    snapshot(0, 0)

    def record(snap: Optional[str]) -> None:
        n = len(window)
        line = {
            "step": step,
            "policy_loss": sum(w["policy_loss"] for w in window) / n,
            "value_loss": sum(w["value_loss"] for w in window) / n,
            "total_loss": sum(w["policy_loss"] + w["value_loss"] for w in window) / n,
            "buffer_size": len(buffer),
            "games": games_done,
            "snapshot": os.path.basename(snap) if snap else None,
        }
        metrics_fh.write(json.dumps(line) + "\n")
        metrics_fh.flush()
        if progress is not None:
            progress(line)
        window.clear()

    def learn_until(target: int) -> bool:
        nonlocal params, opt_state, step
        while step < target:
            if out_of_time():
                return False
            items = buffer.sample(config.batch_size, rng)
            if len(symmetries) > 1:
                picks = rng.integers(0, len(symmetries), size=len(items))
                items = [augment(it, symmetries[k]) for it, k in zip(items, picks)]
            batch = nn.make_batch(items, codec.num_logits)
            _, grads, parts = nn.loss_and_gradients(params, batch, update_stats=True)
            params, opt_state = nn.optimizer_step(params, grads, opt_state, config.sgd)
            step += 1
            window.append(parts)
            snap = snapshot(step, games_done) if step % config.snapshot_every == 0 else None
            if step % config.log_every == 0 or snap is not None:
                record(snap)
        return True

    game_seeds = [config.seed * 1_000_003 + g for g in range(config.games)]
    try:
        if config.workers == 1:
            for g in range(config.games):
                if out_of_time():
                    stopped = True
                    break
                samples, _, _ = selfplay_game(spec, params, config, game_seeds[g])
                buffer.extend(samples)
                games_done += 1
                if not learn_until(config.total_steps * games_done // config.games):
                    stopped = True
                    break
        else:
            ctx = multiprocessing.get_context("spawn")
            with ProcessPoolExecutor(config.workers, mp_context=ctx, initializer=_worker_init,
                                     initargs=(print_game(spec),)) as pool:
                inflight: Deque = deque()
                next_game = 0
                while games_done < config.games:
                    while next_game < config.games and len(inflight) < 2 * config.workers and not out_of_time():
                        inflight.append(pool.submit(_worker_game, (params, config, game_seeds[next_game])))
                        next_game += 1
                    if not inflight:
                        stopped = True
                        break
                    samples, _, _ = inflight.popleft().result()
                    buffer.extend(samples)
                    games_done += 1
                    if not learn_until(config.total_steps * games_done // config.games):
                        stopped = True
                        break
                for fut in inflight:
                    fut.cancel()
    finally:
        if window:
            record(None)
        metrics_fh.close()

    final = snapshot(step, games_done, name="final.lgc")
    result = TrainResult(step, games_done, final, metrics_path, time.monotonic() - start, stopped)
    with open(os.path.join(outdir, "result.json"), "w") as fh:
        json.dump(asdict(result), fh, indent=2, sort_keys=True)
    return result
