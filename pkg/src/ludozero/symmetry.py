"""Board symmetries found from the rules and used to augment training samples.

A candidate is a flip or rotation of the spatial grid. It is kept only if it
maps sites onto sites, leaves the static planes unchanged and commutes with
move generation, move application, outcome detection, state encoding and
logit indexing along random playouts.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Callable, Dict, List, NamedTuple, Optional, Tuple

import numpy as np

from .codec import Codec, codec_for
from .dsl import GameSpec
from .engine import NONE, GameState, Move, MoveKind, compile_rules

SITE_EFFECTS = frozenset({"hop", "capture", "remove"})

Cell = Tuple[int, int]


class Symmetry(NamedTuple):
    name: str
    rows: np.ndarray        # target row for each source cell, shape (H, W)
    cols: np.ndarray
    sites: Tuple[int, ...]  # site permutation
    logits: np.ndarray      # flat logit permutation

    def state(self, x: np.ndarray) -> np.ndarray:
        """Transforms a (..., H, W) tensor."""
        out = np.empty_like(x)
        out[..., self.rows, self.cols] = x
        return out

    def targets(self, t: Dict[int, float]) -> Dict[int, float]:
        perm = self.logits
        return {int(perm[f]): p for f, p in t.items()}

    def legal(self, flats: Tuple[int, ...]) -> Tuple[int, ...]:
        return tuple(sorted(int(self.logits[f]) for f in flats))

    def move(self, m: Move) -> Move:
        s = self.sites
        effects = tuple((tag, s[v]) if tag in SITE_EFFECTS else (tag, v) for tag, v in m.effects)
        return Move(m.kind, NONE if m.from_ == NONE else s[m.from_], NONE if m.to == NONE else s[m.to],
                    m.l_min, m.l_max, effects)

    def game_state(self, st: GameState) -> GameState:
        inv = [0] * len(self.sites)
        for a, b in enumerate(self.sites):
            inv[b] = a
        contents = tuple(st.site_contents[inv[i]] for i in range(len(inv)))
        local = tuple(st.local_state[inv[i]] for i in range(len(inv)))
        return GameState(st.mover, contents, local, st.amounts, st.swap_occurred,
                         tuple(self.move(m) for m in st.last_moves), st.move_number)


def _candidates(h: int, w: int) -> List[Tuple[str, Callable[[int, int], Cell], Callable[[int, int], Cell]]]:
    """(name, cell map, displacement map) for every non-identity grid transform."""
    out = [
        ("flip-rows", lambda r, c: (h - 1 - r, c), lambda dx, dy: (-dx, dy)),
        ("flip-cols", lambda r, c: (r, w - 1 - c), lambda dx, dy: (dx, -dy)),
        ("rot180", lambda r, c: (h - 1 - r, w - 1 - c), lambda dx, dy: (-dx, -dy)),
    ]
    if h == w:
        out += [
            ("transpose", lambda r, c: (c, r), lambda dx, dy: (dy, dx)),
            ("anti-transpose", lambda r, c: (w - 1 - c, h - 1 - r), lambda dx, dy: (-dy, -dx)),
            ("rot90", lambda r, c: (c, h - 1 - r), lambda dx, dy: (dy, -dx)),
            ("rot270", lambda r, c: (w - 1 - c, r), lambda dx, dy: (-dy, dx)),
        ]
    return out


def _logit_perm(codec: Codec, cell, disp) -> np.ndarray:
    layout = codec.move_layout
    H, W = codec.H, codec.W
    perm = np.arange(codec.num_logits)
    m = layout.delta_clip
    n = layout.level_clip
    side = 2 * m + 1
    for ch in range(2, codec.A):
        if layout.mode == "placement":
            new_ch = ch
        else:
            rest, ldiff = divmod(ch - 2, n + 1)
            rest, lmin = divmod(rest, n + 1)
            a, b = divmod(rest, side)
            dx, dy = disp(a - m, b - m)
            new_ch = 2 + ((dx + m) * side + (dy + m)) * (n + 1) ** 2 + lmin * (n + 1) + ldiff
        for r in range(H):
            for c in range(W):
                r2, c2 = cell(r, c)
                perm[(ch * H + r) * W + c] = (new_ch * H + r2) * W + c2
    return perm


def _build(codec: Codec, name: str, cell, disp) -> Optional[Symmetry]:
    H, W = codec.H, codec.W
    rows = np.empty((H, W), dtype=np.intp)
    cols = np.empty((H, W), dtype=np.intp)
    for r in range(H):
        for c in range(W):
            rows[r, c], cols[r, c] = cell(r, c)
    at: Dict[Cell, int] = {}
    for s, (r, c) in enumerate(zip(codec.rows.tolist(), codec.cols.tolist())):
        if (r, c) in at:
            return None
        at[(r, c)] = s
    try:
        sites = tuple(at[cell(r, c)] for r, c in zip(codec.rows.tolist(), codec.cols.tolist()))
    except KeyError:
        return None
    sym = Symmetry(name, rows, cols, sites, _logit_perm(codec, cell, disp))
    if not np.array_equal(sym.state(codec.base), codec.base):
        return None
    return sym


def _commutes(spec: GameSpec, sym: Symmetry, playouts: int, seed: int, max_plies: int) -> bool:
    rules = compile_rules(spec)
    codec = codec_for(spec)
    rng = np.random.default_rng(seed)
    for _ in range(playouts):
        st = rules.initial_state()
        if sym.game_state(st) != st:
            return False
        for _ in range(max_plies):
            image = sym.game_state(st)
            if rules.outcome(st) != rules.outcome(image):
                return False
            if not np.array_equal(sym.state(codec.encode_state(st)), codec.encode_state(image)):
                return False
            if rules.outcome(st) is not None:
                break
            moves = rules.legal(st)
            mapped = [sym.move(m) for m in moves]
            if set(mapped) != set(rules.legal(image)):
                return False
            if any(sym.logits[codec.flat(a)] != codec.flat(b) for a, b in zip(moves, mapped)):
                return False
            k = int(rng.integers(len(moves)))
            nxt = rules.apply(st, moves[k], check=False)
            if rules.apply(image, mapped[k], check=False) != sym.game_state(nxt):
                return False
            st = nxt
    return True


@lru_cache(maxsize=64)
def find_symmetries(spec: GameSpec, playouts: int = 30, seed: int = 0, max_plies: int = 400) -> Tuple[Symmetry, ...]:
    """Non-identity symmetries that survive ``playouts`` random games."""
    codec = codec_for(spec)
    found = []
    for name, cell, disp in _candidates(codec.H, codec.W):
        sym = _build(codec, name, cell, disp)
        if sym is not None and _commutes(spec, sym, playouts, seed, max_plies):
            found.append(sym)
    return tuple(found)


def augment(sample, sym: Optional[Symmetry]):
    """Applies ``sym`` to a (state, targets, z, legal) sample; ``None`` is the identity."""
    if sym is None:
        return sample
    x, t, z, legal = sample
    return sym.state(x), sym.targets(t), z, sym.legal(legal)
