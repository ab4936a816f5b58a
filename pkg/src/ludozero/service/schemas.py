"""Request and response models of the HTTP API."""

from __future__ import annotations

from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field, model_validator


class GameRef(BaseModel):
    """A built-in game by name, or a game description in the DSL."""

    game: Optional[str] = None
    text: Optional[str] = None

    @model_validator(mode="after")
    def _one_source(self):
        if (self.game is None) == (self.text is None):
            raise ValueError("give exactly one of 'game' or 'text'")
        return self


class GameSummary(BaseModel):
    name: str
    players: int
    board: str
    sites: int
    C: int
    A: int
    H: int
    W: int


class GamesResponse(BaseModel):
    games: List[GameSummary]


class ParseResponse(BaseModel):
    name: str
    canonical: str
    summary: GameSummary


class ChannelInfo(BaseModel):
    index: int
    tag: str
    ref: Optional[str] = None


class ContainerInfo(BaseModel):
    name: str
    kind: str
    sites: int
    owner: Optional[int] = None


class InspectResponse(BaseModel):
    summary: GameSummary
    layout_hash: str
    containers: List[ContainerInfo]
    state_channels: List[ChannelInfo]
    move_channel_mode: str
    flags: Dict[str, bool]
    initial_moves: int
    grid: List[str]


class PerftRequest(GameRef):
    depth: int = Field(ge=0, le=8)


class PerftResponse(BaseModel):
    game: str
    depth: int
    nodes: int
    seconds: float


class AgentModel(BaseModel):
    kind: Literal["puct", "pure-uct", "random"] = "puct"
    iterations: int = Field(40, ge=1)
    rollouts: int = Field(1, ge=1)
    checkpoint: Optional[str] = None
    exploration_constant: Optional[float] = Field(None, gt=0)
    temperature: float = Field(0.0, ge=0)


class SessionCreate(GameRef):
    agent: AgentModel = AgentModel(kind="pure-uct", iterations=800, rollouts=10)
    seed: int = 0


class SessionState(BaseModel):
    session: str
    game: str
    mover: int
    move_number: int
    board: List[str]
    dump: str
    legal: List[str]
    last: List[str]
    finished: bool
    result: Optional[Dict[str, float]] = None


class MoveRequest(BaseModel):
    move: str


class TrainRequest(GameRef):
    config: Dict[str, str] = {}
    outdir: str


class EvalRequest(GameRef):
    agent_a: AgentModel
    agent_b: AgentModel
    games: int = Field(ge=1)
    seed: int = 0


class JobStatus(BaseModel):
    job: str
    kind: str
    status: Literal["running", "done", "failed", "cancelled"]
    progress: List[dict]
    next: int = 0
    result: Optional[dict] = None
    error: Optional[str] = None
