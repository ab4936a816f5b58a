"""Board graphs with GUI-style physical coordinates.

Every generated site carries ``x``/``y`` in ``[0, 1]`` plus a logical
``(row, col)`` label used by rules (regions, directions, lines).  The codec
never looks at the logical labels; it only sees the physical coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional, Sequence, Tuple


class ContainerKind(str, Enum):
    MAIN_BOARD = "main-board"
    HAND = "hand"


@dataclass(frozen=True)
class Site:
    id: int
    x: float
    y: float
    orthogonal_neighbors: Tuple[int, ...] = ()
    diagonal_neighbors: Tuple[int, ...] = ()
    row: int = 0
    col: int = 0


@dataclass(frozen=True)
class Container:
    name: str
    sites: Tuple[Site, ...]
    kind: ContainerKind = ContainerKind.MAIN_BOARD
    owner: Optional[int] = None
    tiling: str = "square"

    def __len__(self) -> int:
        return len(self.sites)

    @property
    def axes(self) -> Tuple[Tuple[int, int], ...]:
        """Logical (drow, dcol) line axes; one direction per axis."""
        if self.tiling == "square":
            return ((0, 1), (1, 0), (1, 1), (1, -1))
        if self.tiling == "hex":
            return ((0, 1), (1, 0), (1, -1))
        return ()

    def site_at(self, row: int, col: int) -> Optional[int]:
        return self._index().get((row, col))

    def _index(self) -> Dict[Tuple[int, int], int]:
        idx = self.__dict__.get("_rc_index")
        if idx is None:
            idx = {(s.row, s.col): s.id for s in self.sites}
            object.__setattr__(self, "_rc_index", idx)
        return idx


def _normalize(values: Sequence[float]) -> List[float]:
    lo = min(values)
    span = max(values) - lo
    if span <= 0:
        return [0.0 for _ in values]
    return [(v - lo) / span for v in values]


def _build(
    name: str,
    cells: Sequence[Tuple[int, int]],
    raw_xy: Sequence[Tuple[float, float]],
    orth_deltas: Iterable[Tuple[int, int]],
    diag_deltas: Iterable[Tuple[int, int]],
    tiling: str,
) -> Container:
    index = {rc: i for i, rc in enumerate(cells)}
    orth_deltas = tuple(orth_deltas)
    diag_deltas = tuple(diag_deltas)
    xs = _normalize([p[0] for p in raw_xy])
    ys = _normalize([p[1] for p in raw_xy])
    sites = []
    for i, (r, c) in enumerate(cells):
        orth = tuple(sorted(index[(r + dr, c + dc)] for dr, dc in orth_deltas if (r + dr, c + dc) in index))
        diag = tuple(sorted(index[(r + dr, c + dc)] for dr, dc in diag_deltas if (r + dr, c + dc) in index))
        sites.append(Site(i, xs[i], ys[i], orth, diag, r, c))
    return Container(name, tuple(sites), ContainerKind.MAIN_BOARD, None, tiling)


_SQUARE_ORTH = ((-1, 0), (0, -1), (0, 1), (1, 0))
_SQUARE_DIAG = ((-1, -1), (-1, 1), (1, -1), (1, 1))
_HEX_NEIGHBORS = ((0, -1), (0, 1), (-1, 0), (-1, 1), (1, 0), (1, -1))


def generate_square(rows: int, cols: int, name: str = "board") -> Container:
    """Square tiling; site ``r*cols + c`` sits at ``(c/(cols-1), r/(rows-1))``."""
    cells = [(r, c) for r in range(rows) for c in range(cols)]
    xy = [(c / max(cols - 1, 1), r / max(rows - 1, 1)) for r, c in cells]
    return _build(name, cells, xy, _SQUARE_ORTH, _SQUARE_DIAG, "square")


def generate_hex_rhombus(size: int, name: str = "board") -> Container:
    """Hex cells in a ``size x size`` rhombus with staggered coordinates.

    Row ``r`` is shifted right by half a cell per row, so the x coordinate
    ``c + 0.5 r`` takes ``2*size - 1`` distinct values.
    """
    cells = [(r, c) for r in range(size) for c in range(size)]
    xy = [(c + 0.5 * r, r * math.sqrt(3) / 2) for r, c in cells]
    return _build(name, cells, xy, _HEX_NEIGHBORS, (), "hex")


def generate_hex_hex(side: int, name: str = "board") -> Container:
    """Hexagon of hex cells with ``side`` cells per edge (axial coordinates)."""
    n = side - 1
    cells = [
        (r, q)
        for r in range(-n, n + 1)
        for q in range(-n, n + 1)
        if abs(q + r) <= n
    ]
    xy = [(q + 0.5 * r, r * math.sqrt(3) / 2) for r, q in cells]
    return _build(name, cells, xy, _HEX_NEIGHBORS, (), "hex")


def make_hand(capacity: int, owner: int, name: Optional[str] = None) -> Container:
    """A contiguous line of ``capacity`` unconnected cells."""
    step = 1.0 / max(capacity - 1, 1)
    sites = tuple(Site(i, i * step if capacity > 1 else 0.0, 0.0, (), (), 0, i) for i in range(capacity))
    return Container(name or f"hand{owner}", sites, ContainerKind.HAND, owner, "hand")
