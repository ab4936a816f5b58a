"""HTTP service over the core package.

Long-running work (training, evaluation) runs in background threads and is
polled through ``/jobs/{id}``.  Play sessions are kept in memory.
"""

from __future__ import annotations

import dataclasses
import threading
import time
import uuid
from typing import Dict, List, Optional

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse

from .. import checkpoint
from ..codec import LayoutError, codec_for
from ..dsl import GameSpec, ParseError, builtin_games, load_game, parse_game, print_game
from ..engine import EngineError, GameState, compile_rules, dump_state, parse_move, perft
from ..harness import Agent, AgentError, AgentSpec, run_match
from ..search import SearchConfigError
from ..training import TrainConfig, TrainingConfigError, train
from . import schemas

MAX_PROGRESS = 2000


class _Job:
    def __init__(self, kind: str):
        self.id = uuid.uuid4().hex[:12]
        self.kind = kind
        self.status = "running"
        self.progress: List[dict] = []
        self.dropped = 0
        self.result: Optional[dict] = None
        self.error: Optional[str] = None
        self.cancel = threading.Event()
        self.thread: Optional[threading.Thread] = None

    def report(self, item: dict) -> None:
        self.progress.append(item)
        if len(self.progress) > MAX_PROGRESS:
            extra = len(self.progress) - MAX_PROGRESS
            del self.progress[:extra]
            self.dropped += extra

    def view(self, since: int = 0) -> schemas.JobStatus:
        return schemas.JobStatus(job=self.id, kind=self.kind, status=self.status,
                                 progress=self.progress[max(0, since - self.dropped):],
                                 next=self.dropped + len(self.progress), result=self.result, error=self.error)


class _Session:
    def __init__(self, spec: GameSpec, agent: Agent, seed: int):
        self.id = uuid.uuid4().hex[:12]
        self.spec = spec
        self.agent = agent
        self.seed = seed
        self.state: GameState = compile_rules(spec).initial_state()
        self.lock = threading.Lock()


def render_board(spec: GameSpec, state: GameState) -> List[str]:
    """One text line per grid row: ``.`` empty, ``X``/``O`` for piece codes 1/2.

    Stacks show their top piece.
    """
    codec = codec_for(spec)
    mode = compile_rules(spec).mode
    cells = [[" "] * codec.W for _ in range(codec.H)]
    glyphs = ".XOxo"
    for site, (r, c) in enumerate(codec.grid.placement):
        v = state.site_contents[site]
        if v and mode == "stack":
            v = v[-1]
        elif v and mode == "count":
            v = v[0]
        cells[r][c] = glyphs[v] if v < len(glyphs) else "?"
    return ["".join(row).rstrip() for row in cells]


def _summary(spec: GameSpec) -> schemas.GameSummary:
    codec = codec_for(spec)
    shape = spec.board_shape
    return schemas.GameSummary(
        name=spec.name, players=spec.num_players, board=" ".join(str(x) for x in shape),
        sites=spec.num_sites, C=codec.C, A=codec.A, H=codec.H, W=codec.W)


def _agent_spec(model: schemas.AgentModel) -> AgentSpec:
    return AgentSpec(**model.model_dump())


def create_app() -> FastAPI:
    app = FastAPI(title="ludozero", version="0.1.0")
    jobs: Dict[str, _Job] = {}
    sessions: Dict[str, _Session] = {}

    def resolve(ref: schemas.GameRef) -> GameSpec:
        if ref.text is not None:
            return parse_game(ref.text)
        try:
            return load_game(ref.game)
        except KeyError as exc:
            raise HTTPException(404, str(exc.args[0])) from None

    @app.exception_handler(ParseError)
    async def _parse_error(request: Request, exc: ParseError):
        return JSONResponse(status_code=400, content={
            "detail": str(exc), "line": exc.line, "column": exc.column})

    @app.exception_handler(EngineError)
    async def _engine_error(request: Request, exc: EngineError):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    for err in (LayoutError, checkpoint.CheckpointError, AgentError, SearchConfigError, TrainingConfigError):
        app.add_exception_handler(err, lambda request, exc: JSONResponse(status_code=400, content={"detail": str(exc)}))

    @app.exception_handler(Exception)
    async def _unexpected(request: Request, exc: Exception):
        return JSONResponse(status_code=500, content={"detail": f"internal error: {type(exc).__name__}: {exc}"})

    @app.get("/games", response_model=schemas.GamesResponse)
    def games():
        return schemas.GamesResponse(games=[_summary(load_game(n)) for n in sorted(builtin_games())])

    @app.post("/parse", response_model=schemas.ParseResponse)
    def parse(ref: schemas.GameRef):
        spec = resolve(ref)
        return schemas.ParseResponse(name=spec.name, canonical=print_game(spec), summary=_summary(spec))

    @app.post("/inspect", response_model=schemas.InspectResponse)
    def inspect(ref: schemas.GameRef):
        spec = resolve(ref)
        codec = codec_for(spec)
        rules = compile_rules(spec)
        try:
            initial = len(rules.legal(rules.initial_state()))
        except EngineError:
            initial = 0
        return schemas.InspectResponse(
            summary=_summary(spec),
            layout_hash=codec.layout_hash,
            containers=[schemas.ContainerInfo(name=c.name, kind=str(getattr(c.kind, "value", c.kind)),
                                              sites=len(c), owner=c.owner) for c in spec.containers],
            state_channels=[schemas.ChannelInfo(index=i, tag=ch.tag, ref=None if ch.ref is None else str(ch.ref))
                            for i, ch in enumerate(codec.state_layout.channels)],
            move_channel_mode=codec.move_layout.mode,
            flags=dataclasses.asdict(spec.flags),
            initial_moves=initial,
            grid=render_board(spec, rules.initial_state()),
        )

    @app.post("/perft", response_model=schemas.PerftResponse)
    def run_perft(req: schemas.PerftRequest):
        spec = resolve(req)
        t0 = time.perf_counter()
        nodes = perft(spec, compile_rules(spec).initial_state(), req.depth)
        return schemas.PerftResponse(game=spec.name, depth=req.depth, nodes=nodes, seconds=time.perf_counter() - t0)

    # ------------------------------------------------------------ play

    def session_view(s: _Session) -> schemas.SessionState:
        rules = compile_rules(s.spec)
        result = rules.outcome(s.state)
        return schemas.SessionState(
            session=s.id, game=s.spec.name, mover=s.state.mover, move_number=s.state.move_number,
            board=render_board(s.spec, s.state), dump=dump_state(s.spec, s.state),
            legal=[] if result is not None else [m.notation() for m in rules.legal(s.state)],
            last=[m.notation() for m in s.state.last_moves], finished=result is not None,
            result=None if result is None else {"p1": result.p1, "p2": result.p2})

    def get_session(sid: str) -> _Session:
        s = sessions.get(sid)
        if s is None:
            raise HTTPException(404, f"no play session {sid!r}")
        return s

    @app.post("/sessions", response_model=schemas.SessionState)
    def create_session(req: schemas.SessionCreate):
        spec = resolve(req)
        s = _Session(spec, Agent(spec, _agent_spec(req.agent)), req.seed)
        sessions[s.id] = s
        return session_view(s)

    @app.get("/sessions/{sid}", response_model=schemas.SessionState)
    def show_session(sid: str):
        return session_view(get_session(sid))

    @app.post("/sessions/{sid}/move", response_model=schemas.SessionState)
    def human_move(sid: str, req: schemas.MoveRequest):
        s = get_session(sid)
        with s.lock:
            move = parse_move(s.spec, s.state, req.move)
            s.state = compile_rules(s.spec).apply(s.state, move)
        return session_view(s)

    @app.post("/sessions/{sid}/agent", response_model=schemas.SessionState)
    def agent_move(sid: str):
        s = get_session(sid)
        with s.lock:
            rules = compile_rules(s.spec)
            if rules.outcome(s.state) is not None:
                raise HTTPException(409, "game is over")
            move = s.agent.choose(s.state, s.seed * 7919 + s.state.move_number)
            s.state = rules.apply(s.state, move)
        return session_view(s)

    @app.delete("/sessions/{sid}")
    def close_session(sid: str):
        get_session(sid)
        del sessions[sid]
        return {"closed": sid}

    # ------------------------------------------------------------ jobs

    def start(job: _Job, work) -> schemas.JobStatus:
        def runner():
            try:
                job.result = work()
                job.status = "cancelled" if job.cancel.is_set() else "done"
            except Exception as exc:  # surfaced through the job status
                job.error = f"{type(exc).__name__}: {exc}"
                job.status = "failed"

        jobs[job.id] = job
        job.thread = threading.Thread(target=runner, name=f"job-{job.id}", daemon=True)
        job.thread.start()
        return job.view()

    @app.post("/train", response_model=schemas.JobStatus)
    def start_train(req: schemas.TrainRequest):
        spec = resolve(req)
        config = TrainConfig.from_mapping(req.config)
        job = _Job("train")

        def work():
            result = train(spec, config, req.outdir, progress=job.report, should_stop=job.cancel.is_set)
            return dataclasses.asdict(result)

        return start(job, work)

    @app.post("/eval", response_model=schemas.JobStatus)
    def start_eval(req: schemas.EvalRequest):
        spec = resolve(req)
        a, b = _agent_spec(req.agent_a), _agent_spec(req.agent_b)
        Agent(spec, a), Agent(spec, b)  # fail fast on bad checkpoints
        job = _Job("eval")

        def work():
            stats = run_match(spec, a, b, req.games, req.seed,
                              on_game=lambda rec: job.report(dataclasses.asdict(rec)),
                              should_stop=job.cancel.is_set)
            return stats.summary()

        return start(job, work)

    @app.get("/jobs/{jid}", response_model=schemas.JobStatus)
    def job_status(jid: str, since: int = 0):
        job = jobs.get(jid)
        if job is None:
            raise HTTPException(404, f"no job {jid!r}")
        return job.view(since)

    @app.delete("/jobs/{jid}", response_model=schemas.JobStatus)
    def cancel_job(jid: str):
        job = jobs.get(jid)
        if job is None:
            raise HTTPException(404, f"no job {jid!r}")
        job.cancel.set()
        return job.view()

    return app


app = create_app()
