"""A small ludemic game description language (``.lgd`` files).

Grammar (EBNF; ``;`` starts a comment running to end of line)::

    game        = "(" "game" STRING { clause } ")" ;
    clause      = "(" "players" INT ")"
                | "(" "options" { "stacking" | "counts" | "amounts" } ")"
                | "(" "equipment" { item } ")"
                | "(" "rules" { rule } ")" ;
    item        = "(" "board" shape ")"
                | "(" "hand" OWNER INT ")"
                | "(" "piece" STRING ( OWNER | "each" ) ")" ;
    shape       = "(" "square" INT INT ")" | "(" "hex-rhombus" INT ")"
                | "(" "hex-hex" INT ")" ;
    rule        = "(" "start" { start_place } ")"
                | "(" "meta" { "(" "swap" ")" } ")"
                | "(" "play" move_ludeme { move_ludeme } ")"
                | "(" "end" end_ludeme { end_ludeme } ")" ;
    start_place = "(" "start-place" STRING OWNER region ")" ;
    move_ludeme = "(" "place-empty" STRING ")"
                | "(" "step-move" STRING "(" "dirs" DIR { DIR } ")"
                      "(" "to" TARGET { TARGET } ")" ")"
                | "(" "hop-capture" STRING "(" "dirs" DIR { DIR } ")"
                      [ "multi" ] [ "turn" ] [ "(" "opening" "konane" ")" ] ")" ;
    end_ludeme  = "(" "line-end" INT RESULT [ "exact" ] ")"
                | "(" "connect-end" OWNER region region ")"
                | "(" "reach-end" OWNER region ")"
                | "(" "no-moves-end" ( RESULT | "pass" ) ")" ;
    region      = "(" ( "row" | "col" ) INT ")" | "(" ( "rows" | "cols" | "sites" ) INT { INT } ")"
                | "(" "checker" INT ")" | "(" "all" ")" ;
    OWNER       = "P1" | "P2" ;
    RESULT      = "win" | "lose" | "draw" ;
    TARGET      = "empty" | "enemy" ;
    DIR         = "forward" | "backward" | "left" | "right" | "forward-left"
                | "forward-right" | "backward-left" | "backward-right"
                | "orthogonal" | "diagonal" | "all" ;
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .geometry import Container, generate_hex_hex, generate_hex_rhombus, generate_square, make_hand

MAX_BOARD_DIM = 32
MAX_HAND = 64

LUDEME_KINDS = (
    "place-empty",
    "step-move",
    "hop-capture",
    "line-end",
    "connect-end",
    "reach-end",
    "no-moves-end",
    "swap-meta",
    "start-place",
)
MOVE_LUDEMES = ("place-empty", "step-move", "hop-capture")
END_LUDEMES = ("line-end", "connect-end", "reach-end", "no-moves-end")
DIRECTIONS = (
    "forward",
    "backward",
    "left",
    "right",
    "forward-left",
    "forward-right",
    "backward-left",
    "backward-right",
    "orthogonal",
    "diagonal",
    "all",
)
RESULTS = ("win", "lose", "draw")
TARGETS = ("empty", "enemy")


class ParseError(Exception):
    def __init__(self, message: str, line: int = 1, column: int = 1, offset: int = 0):
        super().__init__(f"{line}:{column}: {message}")
        self.message = message
        self.line = line
        self.column = column
        self.offset = offset


@dataclass(frozen=True)
class Ludeme:
    kind: str
    params: Tuple[Tuple[str, object], ...] = ()

    def get(self, key: str, default=None):
        for k, v in self.params:
            if k == key:
                return v
        return default


@dataclass(frozen=True)
class RuleTree:
    start: Tuple[Ludeme, ...]
    meta: Tuple[Ludeme, ...]
    play: Tuple[Ludeme, ...]
    end: Tuple[Ludeme, ...]

    def ludemes(self):
        return self.start + self.meta + self.play + self.end


@dataclass(frozen=True)
class Flags:
    uses_swap_rule: bool = False
    is_stacking: bool = False
    uses_counts: bool = False
    uses_amounts: bool = False
    placement_only: bool = False


@dataclass(frozen=True)
class PieceType:
    name: str
    owner: int


@dataclass(frozen=True)
class GameSpec:
    name: str
    num_players: int
    board_shape: Tuple
    hands: Tuple[Tuple[int, int], ...]
    pieces: Tuple[Tuple[str, Union[int, str]], ...]
    options: Tuple[str, ...]
    rule_tree: RuleTree
    containers: Tuple[Container, ...] = field(compare=False, default=())
    piece_types: Tuple[PieceType, ...] = field(compare=False, default=())
    flags: Flags = field(compare=False, default=Flags())

    @property
    def num_sites(self) -> int:
        return sum(len(c) for c in self.containers)

    @property
    def board(self) -> Container:
        return self.containers[0]

    def piece_index(self, name: str, owner: int) -> int:
        for i, pt in enumerate(self.piece_types):
            if pt.name == name and pt.owner == owner:
                return i
        raise KeyError((name, owner))


# ---------------------------------------------------------------- lexing

@dataclass
class _Atom:
    value: Union[str, int]
    quoted: bool
    line: int
    col: int
    offset: int


@dataclass
class _List:
    items: list
    line: int
    col: int
    offset: int


_TOKEN = re.compile(r'\s+|;[^\n]*|\(|\)|"[^"\n]*"|[^\s()";]+')


def _read(text: str) -> _List:
    """Reads exactly one top-level S-expression (iteratively; no recursion limit)."""
    line, line_start = 1, 0
    stack: List[_List] = []
    result: Optional[_List] = None
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            what = "unterminated string" if text[pos] == '"' else f"unexpected character {text[pos]!r}"
            raise ParseError(what, line, col, pos)
        tok = m.group(0)
        if tok[0].isspace() or tok[0] == ";":
            pass
        elif result is not None:
            raise ParseError("trailing content after game description", line, col, pos)
        elif tok == "(":
            stack.append(_List([], line, col, pos))
        elif tok == ")":
            if not stack:
                raise ParseError("unbalanced ')'", line, col, pos)
            done = stack.pop()
            if stack:
                stack[-1].items.append(done)
            else:
                result = done
        else:
            if not stack:
                raise ParseError(f"atom {tok!r} outside of any list", line, col, pos)
            if tok[0] == '"':
                atom = _Atom(tok[1:-1], True, line, col, pos)
            elif re.fullmatch(r"-?\d{1,9}", tok):
                atom = _Atom(int(tok), False, line, col, pos)
            else:
                atom = _Atom(tok, False, line, col, pos)
            stack[-1].items.append(atom)
        newlines = tok.count("\n")
        if newlines:
            line += newlines
            line_start = pos + tok.rindex("\n") + 1
        pos = m.end()
    if stack or result is None:
        col = pos - line_start + 1
        raise ParseError("unexpected end of input", line, col, pos)
    return result


# ---------------------------------------------------------------- semantics

def _err(node, message: str) -> ParseError:
    return ParseError(message, node.line, node.col, node.offset)


def _head(node) -> str:
    if not isinstance(node, _List) or not node.items or not isinstance(node.items[0], _Atom) or node.items[0].quoted:
        raise _err(node, "expected a (keyword ...) form")
    return str(node.items[0].value)


def _symbol(node, choices: Sequence[str] = ()) -> str:
    if not isinstance(node, _Atom) or node.quoted or not isinstance(node.value, str):
        raise _err(node, "expected a symbol")
    if choices and node.value not in choices:
        raise _err(node, f"expected one of {', '.join(choices)}; got {node.value!r}")
    return node.value


def _string(node) -> str:
    if not isinstance(node, _Atom) or not node.quoted:
        raise _err(node, "expected a quoted string")
    return str(node.value)


def _int(node, lo: int = 0, hi: int = 10**6) -> int:
    if not isinstance(node, _Atom) or not isinstance(node.value, int):
        raise _err(node, "expected an integer")
    if not lo <= node.value <= hi:
        raise _err(node, f"integer {node.value} outside [{lo}, {hi}]")
    return node.value


def _owner(node) -> int:
    return {"P1": 1, "P2": 2}[_symbol(node, ("P1", "P2"))]


def _arity(node: _List, lo: int, hi: Optional[int] = None) -> None:
    n = len(node.items) - 1
    hi = lo if hi is None else hi
    if n < lo or n > hi:
        want = str(lo) if lo == hi else f"{lo}..{hi}" if hi < 10**6 else f"at least {lo}"
        raise _err(node, f"arity mismatch for {_head(node)!r}: expected {want} arguments, got {n}")


def _region(node) -> Tuple:
    kind = _head(node)
    if kind in ("row", "col"):
        _arity(node, 1)
        return (kind + "s", (_int(node.items[1], 0, MAX_BOARD_DIM),))
    if kind in ("rows", "cols", "sites"):
        _arity(node, 1, 10**6)
        return (kind, tuple(_int(a, 0, 10**4) for a in node.items[1:]))
    if kind == "checker":
        _arity(node, 1)
        return ("checker", (_int(node.items[1], 0, 1),))
    if kind == "all":
        _arity(node, 0)
        return ("all", ())
    raise _err(node, f"unknown region {kind!r}")


def _move_ludeme(node) -> Ludeme:
    kind = _head(node)
    if kind == "place-empty":
        _arity(node, 1)
        return Ludeme(kind, (("piece", _string(node.items[1])),))
    if kind == "step-move":
        _arity(node, 3)
        piece = _string(node.items[1])
        dirs = _keyword_list(node.items[2], "dirs", DIRECTIONS)
        targets = _keyword_list(node.items[3], "to", TARGETS)
        return Ludeme(kind, (("piece", piece), ("dirs", dirs), ("to", targets)))
    if kind == "hop-capture":
        _arity(node, 2, 5)
        piece = _string(node.items[1])
        dirs = _keyword_list(node.items[2], "dirs", DIRECTIONS)
        multi = turn = False
        opening = None
        for extra in node.items[3:]:
            if isinstance(extra, _List):
                if _head(extra) != "opening":
                    raise _err(extra, f"unknown hop-capture option {_head(extra)!r}")
                _arity(extra, 1)
                opening = _symbol(extra.items[1], ("konane",))
            else:
                flag = _symbol(extra, ("multi", "turn"))
                if flag == "multi":
                    multi = True
                else:
                    turn = True
        if turn and not multi:
            raise _err(node, "'turn' requires 'multi'")
        return Ludeme(kind, (("piece", piece), ("dirs", dirs), ("multi", multi), ("turn", turn), ("opening", opening)))
    if kind in END_LUDEMES or kind in ("start-place", "swap"):
        raise _err(node, f"ludeme {kind!r} is not allowed in a play clause")
    raise _err(node, f"unknown ludeme {kind!r}")


def _keyword_list(node, keyword: str, choices: Sequence[str]) -> Tuple[str, ...]:
    if _head(node) != keyword:
        raise _err(node, f"expected ({keyword} ...)")
    _arity(node, 1, 10**6)
    return tuple(_symbol(a, choices) for a in node.items[1:])


def _end_ludeme(node) -> Ludeme:
    kind = _head(node)
    if kind == "line-end":
        _arity(node, 2, 3)
        length = _int(node.items[1], 2, MAX_BOARD_DIM)
        result = _symbol(node.items[2], RESULTS)
        exact = False
        if len(node.items) == 4:
            _symbol(node.items[3], ("exact",))
            exact = True
        return Ludeme(kind, (("length", length), ("result", result), ("exact", exact)))
    if kind == "connect-end":
        _arity(node, 3)
        return Ludeme(kind, (("owner", _owner(node.items[1])), ("a", _region(node.items[2])), ("b", _region(node.items[3]))))
    if kind == "reach-end":
        _arity(node, 2)
        return Ludeme(kind, (("owner", _owner(node.items[1])), ("region", _region(node.items[2]))))
    if kind == "no-moves-end":
        _arity(node, 1)
        return Ludeme(kind, (("result", _symbol(node.items[1], RESULTS + ("pass",))),))
    if kind in MOVE_LUDEMES:
        raise _err(node, f"ludeme {kind!r} is not allowed in an end clause")
    raise _err(node, f"unknown ludeme {kind!r}")


def _board(node) -> Tuple:
    kind = _head(node)
    if kind == "square":
        _arity(node, 2)
        return ("square", _int(node.items[1], 1, MAX_BOARD_DIM), _int(node.items[2], 1, MAX_BOARD_DIM))
    if kind == "hex-rhombus":
        _arity(node, 1)
        return ("hex-rhombus", _int(node.items[1], 1, MAX_BOARD_DIM))
    if kind == "hex-hex":
        _arity(node, 1)
        return ("hex-hex", _int(node.items[1], 1, MAX_BOARD_DIM // 2))
    raise _err(node, f"unknown board shape {kind!r}")


def build_containers(board_shape: Tuple, hands: Sequence[Tuple[int, int]]) -> Tuple[Container, ...]:
    kind = board_shape[0]
    if kind == "square":
        board = generate_square(board_shape[1], board_shape[2])
    elif kind == "hex-rhombus":
        board = generate_hex_rhombus(board_shape[1])
    else:
        board = generate_hex_hex(board_shape[1])
    return (board,) + tuple(make_hand(cap, owner, f"hand{i + 1}") for i, (owner, cap) in enumerate(hands))


def _expand_pieces(pieces) -> Tuple[PieceType, ...]:
    out = []
    for name, owner in pieces:
        if owner == "each":
            out.extend(PieceType(name, p) for p in (1, 2))
        else:
            out.append(PieceType(name, owner))
    return tuple(out)


def _infer_flags(rules: RuleTree, options: Sequence[str]) -> Flags:
    return Flags(
        uses_swap_rule=any(l.kind == "swap-meta" for l in rules.meta),
        is_stacking="stacking" in options,
        uses_counts="counts" in options,
        uses_amounts="amounts" in options,
        placement_only=all(l.kind == "place-empty" for l in rules.play),
    )


def finalize(name, num_players, board_shape, hands, pieces, options, rules) -> GameSpec:
    """Builds a GameSpec with derived containers, piece types and flags."""
    return GameSpec(
        name=name,
        num_players=num_players,
        board_shape=tuple(board_shape),
        hands=tuple(hands),
        pieces=tuple(pieces),
        options=tuple(options),
        rule_tree=rules,
        containers=build_containers(board_shape, hands),
        piece_types=_expand_pieces(pieces),
        flags=_infer_flags(rules, options),
    )


def _validate_region(node, region, board_shape, board: Container) -> None:
    kind, values = region
    if kind in ("rows", "cols"):
        axis = [s.row if kind == "rows" else s.col for s in board.sites]
        for v in values:
            if v not in axis:
                raise _err(node, f"region {kind} {v} is outside the board")
    elif kind == "sites":
        for v in values:
            if v >= len(board):
                raise _err(node, f"site {v} is outside the board")


def parse_game(text: Union[str, bytes]) -> GameSpec:
    """Parses one game description; raises ParseError with a source position."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"input is not valid UTF-8 ({exc.reason})", 1, 1, exc.start) from None
    try:
        root = _read(text)
        return _interpret(root)
    except ParseError:
        raise
    except (ValueError, UnicodeError) as exc:
        raise ParseError(f"malformed literal: {exc}") from None


def _interpret(root: _List) -> GameSpec:
    if _head(root) != "game":
        raise _err(root, "description must start with (game ...)")
    if len(root.items) < 2:
        raise _err(root, "arity mismatch for 'game': missing name")
    name = _string(root.items[1])
    num_players = None
    board_shape = None
    hands: List[Tuple[int, int]] = []
    pieces: List[Tuple[str, Union[int, str]]] = []
    options: List[str] = []
    start: List[Ludeme] = []
    meta: List[Ludeme] = []
    play: Optional[Tuple[Ludeme, ...]] = None
    end: List[Ludeme] = []
    ref_nodes: List[Tuple[_List, str]] = []
    region_nodes: List[Tuple[_List, Tuple]] = []

    for clause in root.items[2:]:
        head = _head(clause)
        if head == "players":
            _arity(clause, 1)
            num_players = _int(clause.items[1], 1, 16)
            if num_players != 2:
                raise _err(clause, "only 2-player games are supported")
        elif head == "options":
            for a in clause.items[1:]:
                opt = _symbol(a, ("stacking", "counts", "amounts"))
                if opt not in options:
                    options.append(opt)
        elif head == "equipment":
            for item in clause.items[1:]:
                ih = _head(item)
                if ih == "board":
                    _arity(item, 1)
                    if board_shape is not None:
                        raise _err(item, "more than one board")
                    board_shape = _board(item.items[1])
                elif ih == "hand":
                    _arity(item, 2)
                    hands.append((_owner(item.items[1]), _int(item.items[2], 1, MAX_HAND)))
                elif ih == "piece":
                    _arity(item, 2)
                    pname = _string(item.items[1])
                    owner_node = item.items[2]
                    if isinstance(owner_node, _Atom) and owner_node.value == "each":
                        owner: Union[int, str] = "each"
                    else:
                        owner = _owner(owner_node)
                    if any(p[0] == pname for p in pieces):
                        raise _err(item, f"piece {pname!r} declared twice")
                    pieces.append((pname, owner))
                else:
                    raise _err(item, f"unknown equipment {ih!r}")
        elif head == "rules":
            for rule in clause.items[1:]:
                rh = _head(rule)
                if rh == "start":
                    for sp in rule.items[1:]:
                        if _head(sp) != "start-place":
                            raise _err(sp, f"unknown ludeme {_head(sp)!r} in start clause")
                        _arity(sp, 3)
                        reg = _region(sp.items[3])
                        region_nodes.append((sp, reg))
                        ref_nodes.append((sp, _string(sp.items[1])))
                        start.append(Ludeme("start-place", (("piece", _string(sp.items[1])), ("owner", _owner(sp.items[2])), ("region", reg))))
                elif rh == "meta":
                    for m in rule.items[1:]:
                        if _head(m) != "swap":
                            raise _err(m, f"unknown ludeme {_head(m)!r} in meta clause")
                        _arity(m, 0)
                        meta.append(Ludeme("swap-meta"))
                elif rh == "play":
                    if play is not None:
                        raise _err(rule, "more than one play clause")
                    _arity(rule, 1, 10**6)
                    play = tuple(_move_ludeme(m) for m in rule.items[1:])
                    for m, lud in zip(rule.items[1:], play):
                        ref_nodes.append((m, lud.get("piece")))
                elif rh == "end":
                    _arity(rule, 1, 10**6)
                    for e in rule.items[1:]:
                        lud = _end_ludeme(e)
                        for key in ("a", "b", "region"):
                            if lud.get(key) is not None:
                                region_nodes.append((e, lud.get(key)))
                        end.append(lud)
                else:
                    raise _err(rule, f"unknown rule clause {rh!r}")
        else:
            raise _err(clause, f"unknown clause {head!r}")

    if num_players is None:
        raise _err(root, "missing (players ...) clause")
    if board_shape is None:
        raise _err(root, "missing (board ...) in equipment")
    if play is None:
        raise _err(root, "missing (play ...) clause")
    if not end:
        raise _err(root, "missing (end ...) clause")
    declared = {p[0] for p in pieces}
    for node, pname in ref_nodes:
        if pname not in declared:
            raise _err(node, f"reference to undefined piece {pname!r}")
    board = build_containers(board_shape, ())[0]
    for node, reg in region_nodes:
        _validate_region(node, reg, board_shape, board)
    if "counts" in options and "stacking" in options:
        raise _err(root, "options 'stacking' and 'counts' are mutually exclusive")
    if board_shape[0] != "square":
        for lud in play:
            if lud.kind != "place-empty":
                for d in lud.get("dirs"):
                    if d not in ("orthogonal", "all"):
                        raise _err(root, f"direction {d!r} requires a square board")
    rules = RuleTree(tuple(start), tuple(meta), play, tuple(end))
    return finalize(name, num_players, board_shape, hands, pieces, options, rules)


# ---------------------------------------------------------------- printing

def _fmt_region(region) -> str:
    kind, values = region
    if kind == "all":
        return "(all)"
    return "(" + " ".join([kind] + [str(v) for v in values]) + ")"


def _fmt_owner(owner) -> str:
    return owner if owner == "each" else f"P{owner}"


def _fmt_ludeme(l: Ludeme) -> str:
    k = l.kind
    if k == "start-place":
        return f'(start-place "{l.get("piece")}" P{l.get("owner")} {_fmt_region(l.get("region"))})'
    if k == "swap-meta":
        return "(swap)"
    if k == "place-empty":
        return f'(place-empty "{l.get("piece")}")'
    if k == "step-move":
        return f'(step-move "{l.get("piece")}" (dirs {" ".join(l.get("dirs"))}) (to {" ".join(l.get("to"))}))'
    if k == "hop-capture":
        parts = [f'(hop-capture "{l.get("piece")}" (dirs {" ".join(l.get("dirs"))})']
        if l.get("multi"):
            parts.append("multi")
        if l.get("turn"):
            parts.append("turn")
        if l.get("opening"):
            parts.append(f'(opening {l.get("opening")})')
        return " ".join(parts) + ")"
    if k == "line-end":
        return f'(line-end {l.get("length")} {l.get("result")}{" exact" if l.get("exact") else ""})'
    if k == "connect-end":
        return f'(connect-end P{l.get("owner")} {_fmt_region(l.get("a"))} {_fmt_region(l.get("b"))})'
    if k == "reach-end":
        return f'(reach-end P{l.get("owner")} {_fmt_region(l.get("region"))})'
    if k == "no-moves-end":
        return f'(no-moves-end {l.get("result")})'
    raise ValueError(k)


def print_game(spec: GameSpec) -> str:
    """Canonical source text; ``parse_game(print_game(s)) == s``."""
    shape = spec.board_shape
    lines = [f'(game "{spec.name}"', f"  (players {spec.num_players})"]
    if spec.options:
        lines.append(f"  (options {' '.join(spec.options)})")
    lines.append("  (equipment")
    lines.append(f"    (board ({' '.join(str(v) for v in shape)}))")
    for owner, cap in spec.hands:
        lines.append(f"    (hand P{owner} {cap})")
    for name, owner in spec.pieces:
        lines.append(f'    (piece "{name}" {_fmt_owner(owner)})')
    lines[-1] += ")"
    lines.append("  (rules")
    rt = spec.rule_tree
    if rt.start:
        lines.append("    (start")
        lines.extend(f"      {_fmt_ludeme(l)}" for l in rt.start)
        lines[-1] += ")"
    if rt.meta:
        lines.append("    (meta " + " ".join(_fmt_ludeme(l) for l in rt.meta) + ")")
    lines.append("    (play")
    lines.extend(f"      {_fmt_ludeme(l)}" for l in rt.play)
    lines[-1] += ")"
    lines.append("    (end")
    lines.extend(f"      {_fmt_ludeme(l)}" for l in rt.end)
    lines[-1] += ")))"
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- built-ins

_BUILTIN_FILES = {
    "hex-5": "hex-5.lgd",
    "hex-11": "hex-11.lgd",
    "gomoku-9": "gomoku-9.lgd",
    "yavalath": "yavalath.lgd",
    "squava": "squava.lgd",
    "breakthrough-6": "breakthrough-6.lgd",
    "breakthrough-8": "breakthrough-8.lgd",
    "konane-6": "konane-6.lgd",
}

_spec_cache: Dict[str, GameSpec] = {}


def builtin_games() -> Dict[str, str]:
    """Maps each built-in game name to its description source."""
    root = resources.files("ludozero") / "games"
    return {name: (root / fname).read_text(encoding="utf-8") for name, fname in _BUILTIN_FILES.items()}


def load_game(name: str) -> GameSpec:
    """Parses (once) and returns a built-in game by name."""
    spec = _spec_cache.get(name)
    if spec is None:
        if name not in _BUILTIN_FILES:
            raise KeyError(f"unknown game {name!r}; built-ins: {', '.join(sorted(_BUILTIN_FILES))}")
        root = resources.files("ludozero") / "games"
        spec = parse_game((root / _BUILTIN_FILES[name]).read_text(encoding="utf-8"))
        _spec_cache[name] = spec
    return spec
