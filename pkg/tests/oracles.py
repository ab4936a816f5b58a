"""Brute-force reference implementations used to derive expected values.

Nothing in here imports the package's rule or codec internals; each oracle
works from first principles (coordinates, raw board arrays, plain loops).
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from typing import Dict, List, Sequence, Set, Tuple


def cluster_count(values: Sequence[float], tol: float) -> int:
    """Distinct values after merging neighbours closer than ``tol`` (sorted sweep)."""
    vals = sorted(values)
    groups = 1
    for a, b in zip(vals, vals[1:]):
        if b - a > tol:
            groups += 1
    return groups


def grid_dims(board_xy: Sequence[Tuple[float, float]], hand_sizes: Sequence[int], tol: float = 1e-5):
    """(rows, cols) of the packed grid: board axes, then hands as rows or columns."""
    w = cluster_count([p[0] for p in board_xy], tol)
    h = cluster_count([p[1] for p in board_xy], tol)
    if not hand_sizes:
        return h, w
    k = len(hand_sizes)
    longest = max(hand_sizes)
    as_rows = (h + 1 + k) * w if longest <= w else math.inf
    as_cols = h * (w + 1 + k) if longest <= h else math.inf
    return (h + 1 + k, w) if as_rows <= as_cols else (h, w + 1 + k)


def state_channel_count(pieces: int, players: int, stacking: bool, counts: bool, amounts: bool,
                        swap: bool, containers: int, local_buckets: int = 6, layers: int = 5) -> int:
    c = pieces * (2 * layers if stacking else 1)
    c += 1 if stacking else 0
    c += 1 if counts else 0
    c += players if amounts else 0
    c += players if players > 1 else 0
    c += local_buckets
    c += 1 if swap else 0
    c += containers
    c += 4
    return c


def move_channel_count(placement_only: bool, stacking: bool, m: int = 3) -> int:
    if placement_only:
        return 3
    n = 2 if stacking else 0
    return 2 + (2 * m + 1) ** 2 * (n + 1) ** 2


def alias_loss(logits: Sequence[float], legal: Sequence[int], alias_classes: Dict[int, List[str]],
               visits: Dict[str, int], value: float, z: float) -> Tuple[float, Dict[int, float]]:
    """Cross-entropy over distinct legal logits with per-logit summed visits, plus (v - z)^2."""
    total = sum(visits.values())
    targets = {i: sum(visits[m] for m in alias_classes[i]) / total for i in legal}
    lse = math.log(sum(math.exp(logits[i]) for i in legal))
    ce = -sum(t * (logits[i] - lse) for i, t in targets.items())
    return ce + (value - z) ** 2, targets


def gomoku_perft(n: int, depth: int, win: int = 5) -> int:
    """Naive perft for free-style k-in-a-row on an n x n board."""
    board = [[0] * n for _ in range(n)]

    def wins(r, c, p):
        for dr, dc in ((0, 1), (1, 0), (1, 1), (1, -1)):
            run = 1
            for s in (1, -1):
                rr, cc = r + s * dr, c + s * dc
                while 0 <= rr < n and 0 <= cc < n and board[rr][cc] == p:
                    run += 1
                    rr += s * dr
                    cc += s * dc
            if run >= win:
                return True
        return False

    def rec(d, p):
        if d == 0:
            return 1
        empties = [(r, c) for r in range(n) for c in range(n) if board[r][c] == 0]
        if not empties:
            return 1
        if d == 1:
            return len(empties)
        total = 0
        for r, c in empties:
            board[r][c] = p
            total += 1 if wins(r, c, p) else rec(d - 1, 3 - p)
            board[r][c] = 0
        return total

    return rec(depth, 1)


def hex_winner(cells: Dict[Tuple[int, int], int], size: int) -> int:
    """0 if nobody connects; colour 1 links rows 0 and size-1, colour 2 cols 0 and size-1."""
    nbrs = ((0, -1), (0, 1), (-1, 0), (-1, 1), (1, 0), (1, -1))
    for colour in (1, 2):
        if colour == 1:
            start = [(0, c) for c in range(size)]
            goal = lambda rc: rc[0] == size - 1
        else:
            start = [(r, 0) for r in range(size)]
            goal = lambda rc: rc[1] == size - 1
        seen: Set = set()
        todo = deque(rc for rc in start if cells.get(rc) == colour)
        seen.update(todo)
        while todo:
            rc = todo.popleft()
            if goal(rc):
                return colour
            for dr, dc in nbrs:
                nb = (rc[0] + dr, rc[1] + dc)
                if nb not in seen and cells.get(nb) == colour:
                    seen.add(nb)
                    todo.append(nb)
    return 0


def line_lengths(cells: Dict[Tuple[int, int], int], rc: Tuple[int, int], axes) -> List[int]:
    """Length of the maximal same-colour run through ``rc`` along each axis."""
    colour = cells[rc]
    out = []
    for dr, dc in axes:
        run = 1
        for s in (1, -1):
            r, c = rc[0] + s * dr, rc[1] + s * dc
            while cells.get((r, c)) == colour:
                run += 1
                r += s * dr
                c += s * dc
        out.append(run)
    return out


def movement_channel(dx: int, dy: int, lmin: int, lmax: int, m: int, n: int) -> int:
    """Channel of a movement, computed by enumeration order instead of a closed form."""
    clip = lambda v, lo, hi: max(lo, min(hi, v))
    key = (clip(dx, -m, m), clip(dy, -m, m), clip(lmin, 0, n), clip(lmax - lmin, 0, n))
    order = list(itertools.product(range(-m, m + 1), range(-m, m + 1), range(n + 1), range(n + 1)))
    return 2 + order.index(key)
