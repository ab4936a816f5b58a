"""Forward model: initial state, legal moves, move application, terminal test.

A ``GameSpec`` is compiled once (``compile_rules``) into flat lookup tables;
the public functions below are thin wrappers over the compiled ``Rules``.

Conventions:

* Global site ids concatenate containers in declaration order.
* Pieces belong to *colours* (the owner named in the description).  Seats
  (players) control colours; a swap exchanges the seat -> colour mapping and
  never touches the board.
* Site contents: ``0`` for empty, else ``piece_type_index + 1`` for plain
  games, a tuple of such codes (bottom first) for stacking games, and a
  ``(code, count)`` pair for count games.
* Legal moves are ordered by ``(kind, from, to, l_min, l_max, effects)``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import IntEnum
from functools import lru_cache
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

from .dsl import GameSpec

NONE = -1


class EngineError(Exception):
    """Contract violation: terminal-state queries, illegal moves, bad fixtures."""


class IllegalMoveError(EngineError):
    pass


class UnsupportedRulesError(EngineError):
    pass


class MoveKind(IntEnum):
    PASS = 0
    SWAP = 1
    PLAY = 2


class Move(NamedTuple):
    kind: int
    from_: int = NONE
    to: int = NONE
    l_min: int = 0
    l_max: int = 0
    effects: Tuple = ()

    def notation(self) -> str:
        if self.kind == MoveKind.PASS:
            return "pass"
        if self.kind == MoveKind.SWAP:
            return "swap"
        src = "" if self.from_ == NONE else str(self.from_)
        text = f"{src}-{self.to}"
        hops = [str(s) for tag, s in self.effects if tag == "hop"]
        if len(hops) > 1:
            text += "[" + ",".join(hops) + "]"
        return text


PASS = Move(MoveKind.PASS)
SWAP = Move(MoveKind.SWAP)


class Outcome(NamedTuple):
    p1: float
    p2: float

    def score(self, player: int) -> float:
        return self.p1 if player == 1 else self.p2


WIN1 = Outcome(1.0, -1.0)
WIN2 = Outcome(-1.0, 1.0)
DRAW = Outcome(0.0, 0.0)

_UNKNOWN = object()


@dataclass(frozen=True)
class GameState:
    mover: int
    site_contents: Tuple
    local_state: Tuple[int, ...]
    amounts: Tuple[int, ...]
    swap_occurred: bool = False
    last_moves: Tuple[Move, ...] = ()
    move_number: int = 0
    _outcome: object = field(default=_UNKNOWN, compare=False, repr=False)
    _legal: object = field(default=None, compare=False, repr=False)

    def color_of(self, player: int) -> int:
        return 3 - player if self.swap_occurred else player


def _seat_of(color: int, swapped: bool) -> int:
    return 3 - color if swapped else color


def _win_for_color(color: int, swapped: bool) -> Outcome:
    return WIN1 if _seat_of(color, swapped) == 1 else WIN2


class Rules:
    """Lookup tables and move logic for one GameSpec."""

    def __init__(self, spec: GameSpec):
        self.spec = spec
        flags = spec.flags
        self.mode = "stack" if flags.is_stacking else "count" if flags.uses_counts else "plain"
        self.n_sites = spec.num_sites
        board = spec.board
        self.board_n = len(board)
        self.offsets = []
        off = 0
        for c in spec.containers:
            self.offsets.append(off)
            off += len(c)
        self.uses_swap = flags.uses_swap_rule
        self.rollout_cap = 4 * self.n_sites

        # piece codes: index + 1; colour of each code (0 for empty)
        self.code_color = [0] + [pt.owner for pt in spec.piece_types]
        self.code_of = {(pt.name, pt.owner): i + 1 for i, pt in enumerate(spec.piece_types)}

        sites = board.sites
        self.orth = [s.orthogonal_neighbors for s in sites]
        self.rc = [(s.row, s.col) for s in sites]

        # line tables: per axis, next/prev site along the axis (or -1)
        self.line_next = []
        self.line_prev = []
        for dr, dc in board.axes:
            nxt = [board.site_at(r + dr, c + dc) for r, c in self.rc]
            prv = [board.site_at(r - dr, c - dc) for r, c in self.rc]
            self.line_next.append([NONE if v is None else v for v in nxt])
            self.line_prev.append([NONE if v is None else v for v in prv])

        rt = spec.rule_tree
        self.place_codes = {}   # colour -> code placed by place-empty
        self.step = {}          # colour -> per-site list of (target, allow_empty, allow_enemy, move, capture_move)
        self.hop = None
        self.hop_piece = None
        families = 0
        for lud in rt.play:
            if lud.kind == "place-empty":
                for color in (1, 2):
                    self.place_codes.setdefault(color, self.code_of[(lud.get("piece"), color)])
            elif lud.kind == "step-move":
                self._add_step(lud)
            elif lud.kind == "hop-capture":
                if self.hop is not None:
                    raise UnsupportedRulesError("at most one hop-capture ludeme is supported")
                self.hop = lud
        families = int(bool(self.place_codes)) + int(bool(self.step)) + int(self.hop is not None)
        self.needs_sort = bool(self.step) and self.hop is not None
        if self.mode != "plain" and (self.step or self.hop is not None):
            raise UnsupportedRulesError("stacking/count games support place-empty play only")
        self._finish_step_tables()
        if self.hop is not None:
            self._build_hop_tables()
        self.place_moves = {
            color: [Move(MoveKind.PLAY, NONE, s, 0, 0, (("place", code),)) for s in range(self.board_n)]
            for color, code in self.place_codes.items()
        }

        # end clauses
        self.ends = []
        self.line_wins = []   # (length, exact)
        self.line_loses = []
        self.no_moves = None
        for lud in rt.end:
            if lud.kind == "line-end":
                (self.line_loses if lud.get("result") == "lose" else self.line_wins).append(
                    (lud.get("length"), lud.get("exact"), lud.get("result")))
                if ("line",) not in self.ends:
                    self.ends.append(("line",))
            elif lud.kind == "connect-end":
                a = self.region_sites(lud.get("a"))
                b = self.region_sites(lud.get("b"))
                self.ends.append(("connect", lud.get("owner"), frozenset(a), frozenset(b)))
            elif lud.kind == "reach-end":
                self.ends.append(("reach", lud.get("owner"), frozenset(self.region_sites(lud.get("region")))))
            elif lud.kind == "no-moves-end":
                if self.no_moves is None:
                    self.no_moves = lud.get("result")
        self.fill_rollout = (
            self.mode == "plain"
            and families == 1
            and bool(self.place_codes)
            and self.no_moves in (None, "draw", "lose", "win")
        )
        self.monotone_connect = self.fill_rollout and all(e[0] == "connect" for e in self.ends) and self.no_moves is None

    # ------------------------------------------------------------ tables

    def region_sites(self, region) -> List[int]:
        kind, values = region
        out = []
        for s, (r, c) in enumerate(self.rc):
            if kind == "rows" and r in values:
                out.append(s)
            elif kind == "cols" and c in values:
                out.append(s)
            elif kind == "checker" and (r + c) % 2 == values[0]:
                out.append(s)
            elif kind == "sites" and s in values:
                out.append(s)
            elif kind == "all":
                out.append(s)
        return out

    def _directions(self, names: Sequence[str], color: int) -> List[Tuple[int, int]]:
        f = 1 if color == 1 else -1
        table = {
            "forward": [(f, 0)],
            "backward": [(-f, 0)],
            "left": [(0, -f)],
            "right": [(0, f)],
            "forward-left": [(f, -f)],
            "forward-right": [(f, f)],
            "backward-left": [(-f, -f)],
            "backward-right": [(-f, f)],
            "orthogonal": [(1, 0), (-1, 0), (0, 1), (0, -1)],
            "diagonal": [(1, 1), (1, -1), (-1, 1), (-1, -1)],
        }
        table["all"] = table["orthogonal"] + table["diagonal"]
        if self.spec.board.tiling == "hex":
            hexdirs = [(0, -1), (0, 1), (-1, 0), (-1, 1), (1, 0), (1, -1)]
            table["orthogonal"] = table["all"] = hexdirs
        out = []
        for n in names:
            for d in table[n]:
                if d not in out:
                    out.append(d)
        return out

    def _add_step(self, lud) -> None:
        board = self.spec.board
        targets = lud.get("to")
        for color in (1, 2):
            code = self.code_of[(lud.get("piece"), color)]
            per_site = self.step.setdefault(color, {}).setdefault(code, [dict() for _ in range(self.board_n)])
            for s, (r, c) in enumerate(self.rc):
                for dr, dc in self._directions(lud.get("dirs"), color):
                    t = board.site_at(r + dr, c + dc)
                    if t is None:
                        continue
                    e, x = per_site[s].get(t, (False, False))
                    per_site[s][t] = (e or "empty" in targets, x or "enemy" in targets)

    def _finish_step_tables(self) -> None:
        for color, by_code in self.step.items():
            for code, per_site in by_code.items():
                for s, targets in enumerate(per_site):
                    per_site[s] = [
                        (t, e, x, Move(MoveKind.PLAY, s, t), Move(MoveKind.PLAY, s, t, 0, 0, (("capture", t),)))
                        for t, (e, x) in sorted(targets.items())
                    ]

    def _build_hop_tables(self) -> None:
        board = self.spec.board
        lud = self.hop
        self.hop_piece = lud.get("piece")
        self.hop_multi = lud.get("multi")
        self.hop_turn = lud.get("turn")
        self.hop_opening = lud.get("opening")
        dirs = self._directions(lud.get("dirs"), 1)
        self.hop_dirs = []
        for s, (r, c) in enumerate(self.rc):
            entries = []
            for d, (dr, dc) in enumerate(dirs):
                over = board.site_at(r + dr, c + dc)
                land = board.site_at(r + 2 * dr, c + 2 * dc)
                if over is not None and land is not None:
                    entries.append((d, over, land))
            self.hop_dirs.append(entries)
        rows = sorted({r for r, _ in self.rc})
        cols = sorted({c for _, c in self.rc})

        def middle(vals):
            n = len(vals)
            return {vals[n // 2 - 1], vals[n // 2]} if n % 2 == 0 else {vals[n // 2]}

        mr, mc = middle(rows), middle(cols)
        corners = {(rows[0], cols[0]), (rows[0], cols[-1]), (rows[-1], cols[0]), (rows[-1], cols[-1])}
        self.opening_sites = {s for s, (r, c) in enumerate(self.rc) if (r in mr and c in mc) or (r, c) in corners}

    # ------------------------------------------------------------ move generation

    def gen_moves(self, board, color: int, move_number: int, last_moves) -> List[Move]:
        """Legal moves for ``color`` on a plain board (pass/swap handled by caller)."""
        moves: List[Move] = []
        if self.place_codes:
            pm = self.place_moves[color]
            if self.mode == "plain":
                moves = [pm[s] for s in range(self.board_n) if board[s] == 0]
            else:
                moves = [pm[s] for s in range(self.board_n) if board[s] == 0]
        step = self.step.get(color)
        if step:
            code_color = self.code_color
            for code, per_site in step.items():
                for s in range(self.board_n):
                    if board[s] != code:
                        continue
                    for t, e, x, mv, cap in per_site[s]:
                        v = board[t]
                        if v == 0:
                            if e:
                                moves.append(mv)
                        elif x and code_color[v] != color:
                            moves.append(cap)
            if len(step) > 1:
                moves.sort()
        if self.hop is not None:
            moves.extend(self._gen_hops(board, color, move_number))
            if self.needs_sort:
                moves.sort()
        return moves

    def _gen_hops(self, board, color: int, move_number: int) -> List[Move]:
        code = self.code_of[(self.hop_piece, color)]
        if self.hop_opening == "konane" and move_number < 2:
            out = []
            for s in range(self.board_n):
                if board[s] != code:
                    continue
                if move_number == 0:
                    ok = s in self.opening_sites
                else:
                    ok = any(board[t] == 0 for t in self.orth[s])
                if ok:
                    out.append(Move(MoveKind.PLAY, s, s, 0, 0, (("remove", s),)))
            return out
        code_color = self.code_color
        out = []
        for s in range(self.board_n):
            if board[s] != code:
                continue
            found: List[Move] = []
            # iterative DFS over jump paths; the moving piece has left s
            stack = [(s, None, (), frozenset())]
            while stack:
                pos, direction, effects, captured = stack.pop()
                for d, over, land in self.hop_dirs[pos]:
                    if direction is not None and not self.hop_turn and d != direction:
                        continue
                    if over in captured or land == s:
                        continue
                    ov = board[over]
                    if ov == 0 or code_color[ov] == color or board[land] != 0:
                        continue
                    eff = effects + (("hop", land), ("capture", over))
                    found.append(Move(MoveKind.PLAY, s, land, 0, 0, eff))
                    if self.hop_multi:
                        stack.append((land, d, eff, captured | {over}))
            found.sort()
            out.extend(found)
        return out

    # ------------------------------------------------------------ application

    def do_move(self, board: list, color: int, move: Move) -> None:
        """Mutates ``board`` in place (plain and place-only modes)."""
        if move.kind != MoveKind.PLAY:
            return
        f, t = move.from_, move.to
        if f == NONE:
            code = move.effects[0][1]
            if self.mode == "plain":
                board[t] = code
            elif self.mode == "stack":
                board[t] = (code,)
            else:
                board[t] = (code, 1)
            return
        effects = move.effects
        if effects and effects[0][0] == "remove":
            board[f] = 0
            return
        board[t] = board[f]
        if f != t:
            board[f] = 0
        for tag, site in effects:
            if tag == "capture" and site != t:
                board[site] = 0

    def _color(self, v) -> int:
        if self.mode == "plain":
            return self.code_color[v]
        if v == 0:
            return 0
        return self.code_color[v[-1] if self.mode == "stack" else v[0]]

    def _run(self, board, site: int, color: int, axis: int) -> int:
        colorf = self._color
        n = 1
        nxt = self.line_next[axis]
        s = nxt[site]
        while s != NONE and board[s] != 0 and colorf(board[s]) == color:
            n += 1
            s = nxt[s]
        prv = self.line_prev[axis]
        s = prv[site]
        while s != NONE and board[s] != 0 and colorf(board[s]) == color:
            n += 1
            s = prv[s]
        return n

    def line_result(self, board, site: int, color: int) -> Optional[str]:
        """'lose' / 'win' / 'draw' for lines through ``site``; losing lines take precedence."""
        runs = [self._run(board, site, color, a) for a in range(len(self.line_next))]
        hit = None
        for length, exact, result in self.line_loses:
            if any((r == length) if exact else (r >= length) for r in runs):
                return result
        for length, exact, result in self.line_wins:
            if any((r == length) if exact else (r >= length) for r in runs):
                if hit is None:
                    hit = result
        return hit

    def connected(self, board, color: int, a, b, start: Optional[int] = None) -> bool:
        colorf = self._color
        if start is not None:
            seeds = [start]
        else:
            seeds = [s for s in a if board[s] != 0 and colorf(board[s]) == color]
        seen = set(seeds)
        stack = list(seeds)
        touch_a = touch_b = False
        while stack:
            s = stack.pop()
            if s in a:
                touch_a = True
            if s in b:
                touch_b = True
            if touch_a and touch_b:
                return True
            for t in self.orth[s]:
                if t not in seen and board[t] != 0 and colorf(board[t]) == color:
                    seen.add(t)
                    stack.append(t)
        return False

    def check_end(self, board, color: int, move: Move, swapped: bool) -> Optional[Outcome]:
        """End clauses triggered by ``color`` having just played ``move``; no-moves excluded."""
        to = move.to
        if move.kind != MoveKind.PLAY or to == NONE or board[to] == 0:
            return None
        for end in self.ends:
            kind = end[0]
            if kind == "line":
                res = self.line_result(board, to, color)
                if res is not None:
                    return self._result_for(res, color, swapped)
            elif kind == "connect":
                if end[1] == color and self.connected(board, color, end[2], end[3], to):
                    return _win_for_color(color, swapped)
            elif kind == "reach":
                if end[1] == color and to in end[2]:
                    return _win_for_color(color, swapped)
        return None

    def check_end_global(self, board, swapped: bool) -> Optional[Outcome]:
        """Static evaluation used when no last move is known (hand-built fixtures)."""
        for end in self.ends:
            kind = end[0]
            if kind == "line":
                for color in (1, 2):
                    for s in range(self.board_n):
                        if board[s] != 0 and self._color(board[s]) == color:
                            res = self.line_result(board, s, color)
                            if res is not None:
                                return self._result_for(res, color, swapped)
            elif kind == "connect":
                if self.connected(board, end[1], end[2], end[3]):
                    return _win_for_color(end[1], swapped)
            elif kind == "reach":
                if any(board[s] != 0 and self._color(board[s]) == end[1] for s in end[2]):
                    return _win_for_color(end[1], swapped)
        return None

    @staticmethod
    def _result_for(result: str, color: int, swapped: bool) -> Outcome:
        if result == "draw":
            return DRAW
        winner = color if result == "win" else 3 - color
        return _win_for_color(winner, swapped)

    # ------------------------------------------------------------ state API

    def initial_state(self) -> GameState:
        board: List = [0] * self.n_sites
        for lud in self.spec.rule_tree.start:
            code = self.code_of[(lud.get("piece"), lud.get("owner"))]
            for s in self.region_sites(lud.get("region")):
                if self.mode == "plain":
                    board[s] = code
                elif self.mode == "stack":
                    board[s] = (board[s] or ()) + (code,)
                else:
                    board[s] = (code, board[s][1] + 1 if board[s] else 1)
        state = GameState(1, tuple(board), (0,) * self.n_sites, (0, 0))
        self.outcome(state)
        return state

    def legal(self, state: GameState) -> List[Move]:
        cached = state._legal
        if cached is not None:
            return cached
        if self.outcome(state) is not None:
            raise EngineError("legal_moves called on a terminal state")
        moves = self._legal_raw(state)
        object.__setattr__(state, "_legal", moves)
        return moves

    def _legal_raw(self, state: GameState) -> List[Move]:
        if self.mode != "plain" and not self.place_codes:
            raise UnsupportedRulesError("no move generation for this game")
        color = state.color_of(state.mover)
        moves = self.gen_moves(state.site_contents, color, state.move_number, state.last_moves)
        if not moves and self.no_moves == "pass":
            moves = [PASS]
        if self.uses_swap and state.move_number == 1:
            moves = [SWAP] + moves
        return moves

    def outcome(self, state: GameState) -> Optional[Outcome]:
        cached = state._outcome
        if cached is not _UNKNOWN:
            return cached
        board = state.site_contents
        result = None
        if state.last_moves:
            last = state.last_moves[-1]
            prev_color = state.color_of(3 - state.mover)
            result = self.check_end(board, prev_color, last, state.swap_occurred)
            if result is None and last.kind == MoveKind.PASS and len(state.last_moves) == 2 \
                    and state.last_moves[0].kind == MoveKind.PASS:
                result = DRAW
        else:
            result = self.check_end_global(board, state.swap_occurred)
        if result is None and self.no_moves not in (None, "pass"):
            moves = self._legal_raw(state)
            if not moves:
                result = self._no_moves_outcome(state)
            else:
                object.__setattr__(state, "_legal", moves)
        object.__setattr__(state, "_outcome", result)
        return result

    def _no_moves_outcome(self, state: GameState) -> Outcome:
        if self.no_moves == "draw":
            return DRAW
        stuck = state.color_of(state.mover)
        winner = stuck if self.no_moves == "win" else 3 - stuck
        return _win_for_color(winner, state.swap_occurred)

    def apply(self, state: GameState, move: Move, check: bool = True) -> GameState:
        if check:
            legal = self.legal(state)
            if move not in legal:
                raise IllegalMoveError(f"illegal move {move.notation()} at move {state.move_number}")
        swapped = state.swap_occurred
        contents = state.site_contents
        local = state.local_state
        if move.kind == MoveKind.SWAP:
            swapped = True
        elif move.kind == MoveKind.PLAY:
            board = list(contents)
            self.do_move(board, state.color_of(state.mover), move)
            contents = tuple(board)
            if any(local):
                lst = list(local)
                for s in range(self.n_sites):
                    if board[s] == 0:
                        lst[s] = 0
                local = tuple(lst)
        last = state.last_moves
        last = (last[-1], move) if last else (move,)
        return GameState(3 - state.mover, contents, local, state.amounts, swapped, last, state.move_number + 1)

    # ------------------------------------------------------------ rollouts

    def rollout(self, state: GameState, rng: random.Random) -> Outcome:
        """Uniformly random playout to a terminal state (draw at the ply cap)."""
        result = self.outcome(state)
        if result is not None:
            return result
        plies = 0
        if self.uses_swap and state.move_number == 1:
            moves = self.legal(state)
            state = self.apply(state, moves[rng.randrange(len(moves))], check=False)
            result = self.outcome(state)
            plies = 1
            if result is not None:
                return result
        if self.fill_rollout:
            return self._fill_rollout(state, rng)
        board = list(state.site_contents)
        swapped = state.swap_occurred
        mover = state.mover
        move_number = state.move_number
        last = state.last_moves
        moves = self.legal(state)
        cap = self.rollout_cap
        while True:
            if plies >= cap:
                return DRAW
            color = 3 - mover if swapped else mover
            move = moves[rng.randrange(len(moves))]
            if move.kind == MoveKind.SWAP:
                swapped = True
            else:
                self.do_move(board, color, move)
            plies += 1
            move_number += 1
            last = (last[-1], move) if last else (move,)
            res = self.check_end(board, color, move, swapped)
            if res is not None:
                return res
            mover = 3 - mover
            if len(last) == 2 and last[0].kind == MoveKind.PASS and move.kind == MoveKind.PASS:
                return DRAW
            color = 3 - mover if swapped else mover
            moves = self.gen_moves(board, color, move_number, last)
            if not moves:
                if self.no_moves == "pass":
                    moves = [PASS]
                elif self.no_moves is None:
                    raise EngineError("no legal moves and no no-moves end clause")
                else:
                    stuck = color
                    if self.no_moves == "draw":
                        return DRAW
                    winner = stuck if self.no_moves == "win" else 3 - stuck
                    return _win_for_color(winner, swapped)

    def _fill_rollout(self, state: GameState, rng: random.Random) -> Outcome:
        """Placement-only playout: a uniform random order of the empty sites."""
        board = list(state.site_contents)
        swapped = state.swap_occurred
        empties = [s for s in range(self.board_n) if board[s] == 0]
        rng.shuffle(empties)
        first = 3 - state.mover if swapped else state.mover
        code_a = self.place_codes[first]
        code_b = self.place_codes[3 - first]
        if self.monotone_connect:
            for i, s in enumerate(empties):
                board[s] = code_a if i % 2 == 0 else code_b
            winners = [e[1] for e in self.ends if self.connected(board, e[1], e[2], e[3])]
            if len(set(winners)) == 1:
                return _win_for_color(winners[0], swapped)
            board = list(state.site_contents)
        cap = self.rollout_cap
        for i, s in enumerate(empties):
            if i >= cap:
                return DRAW
            color, code = (first, code_a) if i % 2 == 0 else (3 - first, code_b)
            board[s] = code
            res = self.check_end(board, color, self.place_moves[color][s], swapped)
            if res is not None:
                return res
        if self.no_moves is None:
            raise EngineError("board filled without a terminal condition")
        stuck = first if len(empties) % 2 == 0 else 3 - first
        if self.no_moves == "draw":
            return DRAW
        winner = stuck if self.no_moves == "win" else 3 - stuck
        return _win_for_color(winner, swapped)


@lru_cache(maxsize=64)
def compile_rules(spec: GameSpec) -> Rules:
    return Rules(spec)


# ---------------------------------------------------------------- public API

def initial_state(spec: GameSpec) -> GameState:
    return compile_rules(spec).initial_state()


def legal_moves(spec: GameSpec, state: GameState) -> List[Move]:
    return compile_rules(spec).legal(state)


def apply(spec: GameSpec, state: GameState, move: Move) -> GameState:
    return compile_rules(spec).apply(state, move)


def outcome(spec: GameSpec, state: GameState) -> Optional[Outcome]:
    return compile_rules(spec).outcome(state)


def random_rollout(spec: GameSpec, state: GameState, rng: random.Random, perspective: Optional[int] = None) -> float:
    """Score of a uniformly random playout for ``perspective`` (default: the mover)."""
    result = compile_rules(spec).rollout(state, rng)
    return result.score(state.mover if perspective is None else perspective)


def perft(spec: GameSpec, state: GameState, depth: int) -> int:
    """Leaf count of the game tree truncated at ``depth`` (terminals are leaves)."""
    rules = compile_rules(spec)
    if depth == 0 or rules.outcome(state) is not None:
        return 1
    moves = rules.legal(state)
    if depth == 1:
        return len(moves)
    return sum(perft(spec, rules.apply(state, m, check=False), depth - 1) for m in moves)


def make_state(
    spec: GameSpec,
    site_contents: Sequence,
    mover: int = 1,
    move_number: int = 0,
    swap_occurred: bool = False,
    last_moves: Sequence[Move] = (),
    local_state: Optional[Sequence[int]] = None,
    amounts: Sequence[int] = (0, 0),
) -> GameState:
    """Builds a fixture state (contents must match the game's content mode)."""
    n = spec.num_sites
    if len(site_contents) != n:
        raise EngineError(f"expected {n} site contents, got {len(site_contents)}")
    return GameState(
        mover,
        tuple(site_contents),
        tuple(local_state) if local_state is not None else (0,) * n,
        tuple(amounts),
        swap_occurred,
        tuple(last_moves)[-2:],
        move_number,
    )


# ---------------------------------------------------------------- text formats

def dump_state(spec: GameSpec, state: GameState) -> str:
    """Header line plus one token per site in global site order.

    Tokens: ``.`` empty, ``k`` piece code, ``a/b/c`` stack bottom-to-top,
    ``kxN`` count ``N`` of piece code ``k``.
    """
    rules = compile_rules(spec)
    tokens = []
    for v in state.site_contents:
        if v == 0:
            tokens.append(".")
        elif rules.mode == "stack":
            tokens.append("/".join(str(c) for c in v))
        elif rules.mode == "count":
            tokens.append(f"{v[0]}x{v[1]}")
        else:
            tokens.append(str(v))
    last = " ".join(m.notation() for m in state.last_moves) or "-"
    header = (
        f"game={spec.name} mover={state.mover} move={state.move_number} "
        f"swap={int(state.swap_occurred)} amounts={','.join(map(str, state.amounts))} last={last.replace(' ', ';')}"
    )
    local = " ".join(str(v) for v in state.local_state)
    return header + "\n" + " ".join(tokens) + "\n" + local + "\n"


def parse_move(spec: GameSpec, state: GameState, text: str) -> Move:
    """Resolves move notation (``pass``, ``swap``, ``from-to``, ``-to``) against the legal moves."""
    text = text.strip()
    matches = [m for m in legal_moves(spec, state) if m.notation() == text]
    if not matches:
        bare = [m for m in legal_moves(spec, state) if m.notation().split("[")[0] == text]
        if len(bare) == 1:
            return bare[0]
        if len(bare) > 1:
            raise IllegalMoveError(f"ambiguous move {text!r}: " + ", ".join(m.notation() for m in bare))
        raise IllegalMoveError(f"no legal move matches {text!r}")
    return matches[0]
