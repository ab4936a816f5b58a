"""Game-agnostic tensorization of states and moves.

Nothing here knows about individual games: grids come from site
coordinates, channels from the spec's flags and equipment, and move
channels from the ``from``/``to``/level properties of moves.

Memory layout is channel-major, then row, then column: a state tensor has
shape ``(C, H, W)`` with ``H`` rows and ``W`` columns, and a logit index is
``(channel * H + row) * W + col``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .dsl import GameSpec
from .engine import NONE, GameState, Move, MoveKind

COORD_TOLERANCE = 1e-5
STACK_BOTTOM_LAYERS = 5
STACK_TOP_LAYERS = 5
MOVE_DELTA_CLIP = 3
LOCAL_STATE_BUCKETS = 6


class LayoutError(Exception):
    """The containers cannot be packed into a grid."""


class CodecError(Exception):
    """Internal inconsistency (e.g. a site without a grid cell)."""


@dataclass(frozen=True)
class GridMap:
    width: int
    height: int
    placement: Tuple[Tuple[int, int], ...]
    dummy_separator: Optional[Tuple[str, int]] = None

    def cell(self, site: int) -> Tuple[int, int]:
        return self.placement[site]


class ChannelSpec(NamedTuple):
    tag: str
    ref: object = None


@dataclass(frozen=True)
class StateChannelLayout:
    channels: Tuple[ChannelSpec, ...]
    bottom_layers: int = STACK_BOTTOM_LAYERS
    top_layers: int = STACK_TOP_LAYERS

    @property
    def C(self) -> int:
        return len(self.channels)

    def index(self, tag: str, ref=None) -> int:
        return self.channels.index(ChannelSpec(tag, ref))


@dataclass(frozen=True)
class MoveChannelLayout:
    A: int
    mode: str
    pass_channel: int = 0
    swap_channel: int = 1
    delta_clip: int = MOVE_DELTA_CLIP
    level_clip: int = 0


class LogitIndex(NamedTuple):
    channel: int
    row: int
    col: int

    def flat(self, height: int, width: int) -> int:
        return (self.channel * height + self.row) * width + self.col


def _merge_ranks(values: Sequence[float], tol: float = COORD_TOLERANCE) -> List[int]:
    """Rank of each value among distinct values, chaining gaps below ``tol``."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0] * len(values)
    rank = 0
    for k, i in enumerate(order):
        if k > 0 and values[i] - values[order[k - 1]] >= tol:
            rank += 1
        ranks[i] = rank
    return ranks


def build_grid(spec: GameSpec) -> GridMap:
    """Packs all containers into one row/column grid.

    The main board gets one column per distinct x and one row per distinct
    y.  Each further container becomes one extra row (or column), after a
    single empty separator line; the orientation adding fewer cells wins,
    ties going to rows.
    """
    board = spec.containers[0]
    cols = _merge_ranks([s.x for s in board.sites])
    rows = _merge_ranks([s.y for s in board.sites])
    width = max(cols) + 1
    height = max(rows) + 1
    placement = list(zip(rows, cols))
    extras = spec.containers[1:]
    dummy = None
    if extras:
        longest = max(len(c) for c in extras)
        k = len(extras)
        options = []
        if longest <= width:
            options.append(((height + 1 + k) * width, 0, "row"))
        if longest <= height:
            options.append((height * (width + 1 + k), 1, "col"))
        if not options:
            raise LayoutError(
                f"container of {longest} sites does not fit beside a {height}x{width} board"
            )
        _, _, orient = min(options)
        if orient == "row":
            dummy = ("row", height)
            for i, c in enumerate(extras):
                placement.extend((height + 1 + i, j) for j in range(len(c)))
            height += 1 + k
        else:
            dummy = ("col", width)
            for i, c in enumerate(extras):
                placement.extend((j, width + 1 + i) for j in range(len(c)))
            width += 1 + k
    return GridMap(width, height, tuple(placement), dummy)


def state_layout(spec: GameSpec) -> StateChannelLayout:
    f = spec.flags
    ch: List[ChannelSpec] = []
    for p in range(len(spec.piece_types)):
        if f.is_stacking:
            ch.extend(ChannelSpec("piece-bottom", (p, l)) for l in range(STACK_BOTTOM_LAYERS))
            ch.extend(ChannelSpec("piece-top", (p, l)) for l in range(STACK_TOP_LAYERS))
        else:
            ch.append(ChannelSpec("piece", p))
    if f.is_stacking:
        ch.append(ChannelSpec("stack-height"))
    if f.uses_counts:
        ch.append(ChannelSpec("count"))
    if f.uses_amounts:
        ch.extend(ChannelSpec("amount", p) for p in range(1, spec.num_players + 1))
    if spec.num_players > 1:
        ch.extend(ChannelSpec("mover", p) for p in range(1, spec.num_players + 1))
    ch.extend(ChannelSpec("local-state", v) for v in range(LOCAL_STATE_BUCKETS))
    if f.uses_swap_rule:
        ch.append(ChannelSpec("swap"))
    ch.extend(ChannelSpec("container", i) for i in range(len(spec.containers)))
    ch.extend([
        ChannelSpec("last-from", 0),
        ChannelSpec("last-to", 0),
        ChannelSpec("last-from", 1),
        ChannelSpec("last-to", 1),
    ])
    return StateChannelLayout(tuple(ch))


def move_layout(spec: GameSpec) -> MoveChannelLayout:
    if spec.flags.placement_only:
        return MoveChannelLayout(A=3, mode="placement")
    n = 2 if spec.flags.is_stacking else 0
    m = MOVE_DELTA_CLIP
    return MoveChannelLayout(A=2 + (2 * m + 1) ** 2 * (n + 1) ** 2, mode="from-to", level_clip=n)


def _clip(v: int, lo: int, hi: int) -> int:
    return lo if v < lo else hi if v > hi else v


def movement_channel(dx: int, dy: int, l_min: int, l_max: int, m: int, n: int) -> int:
    """Offset within the movement block; clipped deltas are shifted by ``+m``."""
    a = _clip(dx, -m, m) + m
    b = _clip(dy, -m, m) + m
    return ((a * (2 * m + 1) + b) * (n + 1) + _clip(l_min, 0, n)) * (n + 1) + _clip(l_max - l_min, 0, n)


def encode_move(spec: GameSpec, grid: GridMap, layout: MoveChannelLayout, move: Move) -> LogitIndex:
    if move.kind == MoveKind.PASS:
        return LogitIndex(layout.pass_channel, 0, 0)
    if move.kind == MoveKind.SWAP:
        return LogitIndex(layout.swap_channel, 0, 0)
    if move.to == NONE or not 0 <= move.to < len(grid.placement):
        raise CodecError(f"move target {move.to} has no grid cell")
    row, col = grid.placement[move.to]
    if layout.mode == "placement":
        return LogitIndex(2, row, col)
    src = move.to if move.from_ == NONE else move.from_
    frow, fcol = grid.placement[src]
    ch = 2 + movement_channel(row - frow, col - fcol, move.l_min, move.l_max, layout.delta_clip, layout.level_clip)
    return LogitIndex(ch, row, col)


def layout_hash(spec: GameSpec) -> str:
    """Fingerprint of the grid and both layouts; stored in checkpoints."""
    grid = build_grid(spec)
    sl = state_layout(spec)
    ml = move_layout(spec)
    text = repr((grid.width, grid.height, grid.placement, grid.dummy_separator, sl.channels, ml))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


class Codec:
    """Grid and layouts for one game, with cached encoders."""

    def __init__(self, spec: GameSpec):
        self.spec = spec
        self.grid = build_grid(spec)
        self.state_layout = state_layout(spec)
        self.move_layout = move_layout(spec)
        self.C = self.state_layout.C
        self.A = self.move_layout.A
        self.H = self.grid.height
        self.W = self.grid.width
        self.num_logits = self.A * self.H * self.W
        self.layout_hash = layout_hash(spec)
        self.mode = "stack" if spec.flags.is_stacking else "count" if spec.flags.uses_counts else "plain"
        n = spec.num_sites
        self.rows = np.array([p[0] for p in self.grid.placement], dtype=np.intp)
        self.cols = np.array([p[1] for p in self.grid.placement], dtype=np.intp)
        chans = self.state_layout.channels
        first = {}
        for i, c in enumerate(chans):
            first.setdefault(c.tag, i)
        self.first = first
        self.local_off = first["local-state"]
        self.n_sites = n
        mapped = np.zeros((self.H, self.W), dtype=np.float32)
        mapped[self.rows, self.cols] = 1.0
        self.mapped = mapped
        base = np.zeros((self.C, self.H, self.W), dtype=np.float32)
        off = 0
        for i, c in enumerate(spec.containers):
            ch = self.state_layout.index("container", i)
            base[ch, self.rows[off:off + len(c)], self.cols[off:off + len(c)]] = 1.0
            off += len(c)
        self.base = base
        self._flat_cache: Dict[Move, int] = {}

    # ------------------------------------------------------------ states

    def encode_state(self, state: GameState, out: Optional[np.ndarray] = None) -> np.ndarray:
        t = self.base.copy() if out is None else _fill(out, self.base)
        rows, cols = self.rows, self.cols
        contents = state.site_contents
        if self.mode == "plain":
            board = np.fromiter(contents, dtype=np.intp, count=self.n_sites)
            occ = np.flatnonzero(board)
            if occ.size:
                t[self.first["piece"] + board[occ] - 1, rows[occ], cols[occ]] = 1.0
        else:
            self._encode_contents(t, contents)
        if "amount" in self.first:
            for p, amount in enumerate(state.amounts):
                t[self.first["amount"] + p] = amount
        if "mover" in self.first:
            t[self.first["mover"] + state.mover - 1] = 1.0
        local = state.local_state
        if any(local):
            buckets = np.minimum(np.fromiter(local, dtype=np.intp, count=self.n_sites), LOCAL_STATE_BUCKETS - 1)
            t[self.local_off + buckets, rows, cols] = 1.0
        else:
            t[self.local_off, rows, cols] = 1.0
        if state.swap_occurred and "swap" in self.first:
            t[self.first["swap"]] = 1.0
        last_off = self.first["last-from"]
        for age, move in enumerate(reversed(state.last_moves[-2:])):
            ch = last_off + 2 * age
            if move.from_ != NONE:
                t[ch, rows[move.from_], cols[move.from_]] = 1.0
            if move.to != NONE:
                t[ch + 1, rows[move.to], cols[move.to]] = 1.0
        return t

    def _encode_contents(self, t: np.ndarray, contents) -> None:
        layout = self.state_layout
        for s, v in enumerate(contents):
            if v == 0:
                continue
            r, c = self.rows[s], self.cols[s]
            if self.mode == "count":
                code, count = v
                t[layout.index("piece", code - 1), r, c] = 1.0
                t[self.first["count"], r, c] = count
                continue
            h = len(v)
            for level in range(min(h, layout.bottom_layers)):
                t[layout.index("piece-bottom", (v[level] - 1, level)), r, c] = 1.0
            for k in range(min(h, layout.top_layers)):
                t[layout.index("piece-top", (v[h - 1 - k] - 1, k)), r, c] = 1.0
            t[self.first["stack-height"], r, c] = h

    # ------------------------------------------------------------ moves

    def logit(self, move: Move) -> LogitIndex:
        return encode_move(self.spec, self.grid, self.move_layout, move)

    def flat(self, move: Move) -> int:
        idx = self._flat_cache.get(move)
        if idx is None:
            idx = self.logit(move).flat(self.H, self.W)
            if len(self._flat_cache) < 200_000:
                self._flat_cache[move] = idx
        return idx

    def partition(self, moves: Sequence[Move]) -> Dict[int, List[Move]]:
        groups: Dict[int, List[Move]] = {}
        for m in moves:
            groups.setdefault(self.flat(m), []).append(m)
        return groups

    def unflatten(self, flat: int) -> LogitIndex:
        ch, rest = divmod(flat, self.H * self.W)
        row, col = divmod(rest, self.W)
        return LogitIndex(ch, row, col)


def _fill(out: np.ndarray, base: np.ndarray) -> np.ndarray:
    np.copyto(out, base)
    return out


@lru_cache(maxsize=64)
def codec_for(spec: GameSpec) -> Codec:
    return Codec(spec)


def encode_state(spec: GameSpec, grid: GridMap, layout: StateChannelLayout, state: GameState) -> np.ndarray:
    codec = codec_for(spec)
    if grid != codec.grid or layout != codec.state_layout:
        raise CodecError("grid/layout do not belong to this game")
    return codec.encode_state(state)


def logit_partition(spec: GameSpec, grid: GridMap, layout: MoveChannelLayout, moves: Sequence[Move]) -> Dict[int, List[Move]]:
    """Groups moves by flat logit index; groups larger than one are alias classes."""
    groups: Dict[int, List[Move]] = {}
    for m in moves:
        groups.setdefault(encode_move(spec, grid, layout, m).flat(grid.height, grid.width), []).append(m)
    return groups
