"""Command-line client for the ludozero service.

By default requests go to an in-process instance of the app; ``--server URL``
sends them to a running ``ludozero serve`` instead (paths such as checkpoints
and output directories are then resolved on the server).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
import warnings
from typing import List, Optional

EXIT_ERROR = 1


class CliError(Exception):
    pass


class Backend:
    def __init__(self, server: Optional[str]):
        self.remote = server is not None
        if server is None:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                from fastapi.testclient import TestClient
            from .service.app import create_app
            self.client = TestClient(create_app(), raise_server_exceptions=False)
        else:
            import httpx
            self.client = httpx.Client(base_url=server.rstrip("/"), timeout=None)

    def call(self, method: str, path: str, payload=None, params=None):
        try:
            resp = self.client.request(method, path, json=payload, params=params)
        except Exception as exc:  # connection problems, unreachable server
            raise CliError(f"request to {path} failed: {exc}") from None
        if resp.status_code >= 400:
            try:
                detail = resp.json().get("detail", resp.text)
            except ValueError:
                detail = resp.text
            if isinstance(detail, list):  # pydantic validation errors
                detail = "; ".join(f"{'.'.join(map(str, d.get('loc', [])[1:]))}: {d.get('msg')}" for d in detail)
            raise CliError(str(detail))
        return resp.json()


def _game_ref(game: str) -> dict:
    """A path to a description file is sent as text, anything else as a built-in name."""
    if game.endswith(".lgd") or os.path.sep in game:
        try:
            with open(game, encoding="utf-8") as fh:
                return {"text": fh.read()}
        except OSError as exc:
            raise CliError(f"cannot read {game}: {exc.strerror}") from None
    return {"game": game}


def _local_path(backend: Backend, path: Optional[str]) -> Optional[str]:
    if path is None or backend.remote:
        return path
    return os.path.abspath(path)


def _table(headers: List[str], rows: List[List[object]]) -> str:
    cells = [[str(h) for h in headers]] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _poll(backend: Backend, job: dict, on_item, interval: float = 0.5) -> dict:
    cursor = 0
    try:
        while True:
            status = backend.call("GET", f"/jobs/{job['job']}", params={"since": cursor})
            for item in status["progress"]:
                on_item(item)
            cursor = status["next"]
            if status["status"] != "running":
                return status
            time.sleep(interval)
    except KeyboardInterrupt:
        backend.call("DELETE", f"/jobs/{job['job']}")
        raise CliError("interrupted; job cancelled")


# ---------------------------------------------------------------- commands

def cmd_games(backend: Backend, args) -> None:
    games = backend.call("GET", "/games")["games"]
    rows = [[g["name"], g["board"], g["sites"], g["C"], g["A"], f"{g['H']}x{g['W']}"] for g in games]
    print(_table(["game", "board", "sites", "C", "A", "HxW"], rows))


def cmd_parse(backend: Backend, args) -> None:
    if not os.path.exists(args.file):
        raise CliError(f"cannot read {args.file}: no such file")
    with open(args.file, encoding="utf-8") as fh:
        text = fh.read()
    out = backend.call("POST", "/parse", {"text": text})
    if args.canonical:
        print(out["canonical"], end="")
    else:
        s = out["summary"]
        print(f"ok: {out['name']} ({s['board']}, {s['sites']} sites, C={s['C']} A={s['A']} grid {s['H']}x{s['W']})")


def cmd_inspect(backend: Backend, args) -> None:
    out = backend.call("POST", "/inspect", _game_ref(args.game))
    if args.json:
        print(json.dumps(out, indent=2))
        return
    s = out["summary"]
    print(f"game       {s['name']}")
    print(f"board      {s['board']} ({s['sites']} sites)")
    print(f"tensor     C={s['C']} H={s['H']} W={s['W']}")
    print(f"logits     A={s['A']} ({out['move_channel_mode']}), {s['A'] * s['H'] * s['W']} total")
    print(f"layout     {out['layout_hash']}")
    print(f"flags      " + " ".join(k for k, v in out["flags"].items() if v))
    print(f"opening    {out['initial_moves']} legal moves")
    print("containers " + ", ".join(f"{c['name']}:{c['kind']}:{c['sites']}" for c in out["containers"]))
    print("channels   " + " ".join(c["tag"] + (f"[{c['ref']}]" if c["ref"] is not None else "") for c in out["state_channels"]))
    print()
    print("\n".join(out["grid"]))


def cmd_perft(backend: Backend, args) -> None:
    ref = _game_ref(args.game)
    out = backend.call("POST", "/perft", {**ref, "depth": args.depth})
    print(f"perft({out['game']}, {out['depth']}) = {out['nodes']}  [{out['seconds']:.2f}s]")


def read_config_file(path: str) -> dict:
    from .training import TrainingConfigError, parse_config_text
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from None
    except TrainingConfigError as exc:
        raise CliError(f"{path}: {exc}") from None


def cmd_train(backend: Backend, args) -> None:
    config = read_config_file(args.config)
    for override in args.set or []:
        if "=" not in override:
            raise CliError(f"--set expects key=value, got {override!r}")
        k, v = override.split("=", 1)
        config[k.strip()] = v.strip()
    outdir = _local_path(backend, args.out)
    job = backend.call("POST", "/train", {**_game_ref(args.game), "config": config, "outdir": outdir})
    print(f"training job {job['job']} -> {outdir}", file=sys.stderr)

    def show(item):
        if not args.quiet:
            snap = f"  snapshot {item['snapshot']}" if item.get("snapshot") else ""
            print(f"step {item['step']:>6}  games {item['games']:>4}  policy {item['policy_loss']:.4f}  "
                  f"value {item['value_loss']:.4f}  total {item['total_loss']:.4f}  buffer {item['buffer_size']}{snap}")

    status = _poll(backend, job, show)
    if status["status"] == "failed":
        raise CliError(status["error"])
    res = status["result"]
    print(f"finished: {res['steps']} steps, {res['games']} games in {res['elapsed']:.0f}s; final checkpoint {res['final_checkpoint']}")


def _agent(kind, iterations, rollouts, ckpt, c) -> dict:
    return {"kind": kind, "iterations": iterations, "rollouts": rollouts, "checkpoint": ckpt,
            "exploration_constant": c}


def cmd_eval(backend: Backend, args) -> None:
    ckpt = _local_path(backend, args.ckpt)
    if args.paper_protocol:
        if ckpt is None:
            raise CliError("--paper-protocol needs --ckpt")
        a = _agent("puct", 40, 1, ckpt, None)
        b = _agent("pure-uct", 800, 10, None, None)
    else:
        a = _agent(args.a_kind, args.a_iterations, args.a_rollouts, ckpt if args.a_kind == "puct" else None, args.a_c)
        b = _agent(args.b_kind, args.b_iterations, args.b_rollouts, _local_path(backend, args.b_ckpt), args.b_c)
    payload = {**_game_ref(args.game), "agent_a": a, "agent_b": b, "games": args.games, "seed": args.seed}
    job = backend.call("POST", "/eval", payload)
    sink = open(args.jsonl, "w") if args.jsonl else None
    try:
        def show(rec):
            if sink is not None:
                sink.write(json.dumps(rec) + "\n")
                sink.flush()
            if args.verbose:
                print(f"game {rec['index']:>4}  seat {rec['a_seat']}  result {rec['result_a']}  plies {rec['length']}")

        status = _poll(backend, job, show)
    finally:
        if sink is not None:
            sink.close()
    if status["status"] == "failed":
        raise CliError(status["error"])
    r = status["result"]
    rows = [
        ["A", r["agent_a"], r["wins"], r["draws"], r["losses"], f"{r['win_rate']:.3f}", f"[{r['ci_low']:.3f}, {r['ci_high']:.3f}]"],
        ["B", r["agent_b"], r["losses"], r["draws"], r["wins"], f"{1 - r['win_rate']:.3f}", ""],
    ]
    print(_table(["", "agent", "wins", "draws", "losses", "score", "95% CI"], rows))
    seat = r["by_seat"]
    print(f"A as P1: {seat['1']}  A as P2: {seat['2']}  mean length {r['mean_length']:.1f} plies")
    print(json.dumps(r, sort_keys=True))


def cmd_play(backend: Backend, args) -> None:
    ckpt = _local_path(backend, args.ckpt)
    if ckpt is not None:
        agent = _agent("puct", args.iterations or 40, 1, ckpt, None)
    else:
        agent = _agent("pure-uct", args.iterations or 800, args.rollouts, None, None)
    s = backend.call("POST", "/sessions", {**_game_ref(args.game), "agent": agent, "seed": args.seed})
    sid = s["session"]
    print("moves: 'pass', 'swap', 'FROM-TO', '-TO' (placement); 'legal' lists moves; 'quit' leaves", file=sys.stderr)
    while not s["finished"]:
        print("\n".join(s["board"]))
        if s["mover"] == args.seat:
            try:
                text = input(f"move {s['move_number']} (you, P{args.seat})> ").strip()
            except EOFError:
                text = "quit"
            if text in ("quit", "exit"):
                backend.call("DELETE", f"/sessions/{sid}")
                return
            if text == "legal":
                print(" ".join(s["legal"]))
                continue
            try:
                s = backend.call("POST", f"/sessions/{sid}/move", {"move": text})
            except CliError as exc:
                print(f"illegal: {exc}", file=sys.stderr)
        else:
            s = backend.call("POST", f"/sessions/{sid}/agent")
            print(f"agent plays {s['last'][-1]}")
    print("\n".join(s["board"]))
    res = s["result"]
    you = res["p1"] if args.seat == 1 else res["p2"]
    print("result: " + ("you win" if you > 0 else "you lose" if you < 0 else "draw"))


def cmd_serve(args) -> None:
    import uvicorn
    uvicorn.run("ludozero.service.app:app", host=args.host, port=args.port, log_level="info")


# ---------------------------------------------------------------- parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ludozero", description="General game playing: DSL, engine, search, training, matches.")
    p.add_argument("--server", help="URL of a running service (default: in-process)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("games", help="list built-in games")

    sp = sub.add_parser("parse", help="parse and validate a game description file")
    sp.add_argument("file")
    sp.add_argument("--canonical", action="store_true", help="print the canonical form")

    sp = sub.add_parser("inspect", help="show layout, channels and grid of a game")
    sp.add_argument("game")
    sp.add_argument("--json", action="store_true")

    sp = sub.add_parser("perft", help="count leaf nodes of the game tree")
    sp.add_argument("game")
    sp.add_argument("depth", type=int)

    sp = sub.add_parser("train", help="self-play training")
    sp.add_argument("game")
    sp.add_argument("--config", required=True, help="key = value config file")
    sp.add_argument("--out", default=None, help="output directory (default runs/<game>)")
    sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config entry")
    sp.add_argument("--quiet", action="store_true")

    sp = sub.add_parser("eval", help="play a match between two agents")
    sp.add_argument("game")
    sp.add_argument("--ckpt", help="checkpoint for agent A")
    sp.add_argument("--paper-protocol", action="store_true", help="A: PUCT 40 with --ckpt; B: pure UCT 800x10")
    sp.add_argument("--games", type=int, required=True)
    sp.add_argument("--seed", type=int, default=0)
    for side, kind, iters, rollouts in (("a", "puct", 40, 1), ("b", "pure-uct", 800, 10)):
        sp.add_argument(f"--{side}-kind", choices=["puct", "pure-uct", "random"], default=kind)
        sp.add_argument(f"--{side}-iterations", type=int, default=iters)
        sp.add_argument(f"--{side}-rollouts", type=int, default=rollouts)
        sp.add_argument(f"--{side}-c", type=float, default=None, help="exploration constant")
    sp.add_argument("--b-ckpt", help="checkpoint for agent B when it is a PUCT agent")
    sp.add_argument("--jsonl", help="write one JSON line per game to this file")
    sp.add_argument("--verbose", action="store_true")

    sp = sub.add_parser("play", help="play against an agent in the terminal")
    sp.add_argument("game")
    sp.add_argument("--ckpt")
    sp.add_argument("--seat", type=int, choices=[1, 2], default=1)
    sp.add_argument("--iterations", type=int, default=None)
    sp.add_argument("--rollouts", type=int, default=10)
    sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("serve", help="run the HTTP service")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)
    return p


COMMANDS = {
    "games": cmd_games, "parse": cmd_parse, "inspect": cmd_inspect, "perft": cmd_perft,
    "train": cmd_train, "eval": cmd_eval, "play": cmd_play,
}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            cmd_serve(args)
            return 0
        if args.command == "train" and args.out is None:
            args.out = os.path.join("runs", os.path.splitext(os.path.basename(args.game))[0])
        COMMANDS[args.command](Backend(args.server), args)
    except CliError as exc:
        message = " ".join(str(exc).splitlines())
        print(f"error: {message}", file=sys.stderr)
        return EXIT_ERROR
    except KeyboardInterrupt:
        print("error: interrupted", file=sys.stderr)
        return EXIT_ERROR
    return 0


if __name__ == "__main__":
    sys.exit(main())
