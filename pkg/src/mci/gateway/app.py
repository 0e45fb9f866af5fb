"""HTTP front door: sessions, uploads, agent messages, artifact bytes."""

from __future__ import annotations

import io
import json
import time
from pathlib import Path

from fastapi import FastAPI, HTTPException, Response, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from PIL import Image
from pydantic import BaseModel

from ..agent.core import Agent, ExecutionError, PlanningFailure
from ..agent.llm import LlmUnreachable, client_from_env
from ..agent.session import AgentSession
from ..agent.tools import store_pair
from ..artifacts import ArtifactNotFound, ArtifactStore
from ..checkpoint import checkpoint_id, load_checkpoint
from .config import ServiceConfig

MEDIA_TYPES = {"png": "image/png", "txt": "text/plain", "json": "application/json"}


class MessageIn(BaseModel):
    text: str


class GatewayState:
    def __init__(self, config: ServiceConfig, llm=None):
        self.config = config
        self.store = ArtifactStore(config.artifact_dir)
        self.journal_dir = Path(config.journal_dir)
        self.journal_dir.mkdir(parents=True, exist_ok=True)
        model, vocab = load_checkpoint(config.checkpoint)
        self.checkpoint_id = checkpoint_id(config.checkpoint)
        self.agent = Agent(
            store=self.store,
            model=model,
            vocab=vocab,
            llm=llm if llm is not None else client_from_env(),
            resolution_m_per_px=config.resolution_m_per_px,
        )
        self.sessions: dict[str, AgentSession] = {}

    def journal(self, session_id: str, entry: dict) -> None:
        path = self.journal_dir / f"{session_id}.jsonl"
        with open(path, "a") as fh:
            fh.write(json.dumps({"ts": time.time(), **entry}, sort_keys=True) + "\n")

    def sweep(self) -> None:
        ttl = self.config.session_ttl_s
        dead = [sid for sid, s in self.sessions.items() if s.expired(ttl)]
        for sid in dead:
            del self.sessions[sid]

    def session(self, session_id: str) -> AgentSession:
        self.sweep()
        sess = self.sessions.get(session_id)
        if sess is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        sess.touch()
        return sess


def _read_png(upload_bytes: bytes, part: str) -> Image.Image:
    try:
        img = Image.open(io.BytesIO(upload_bytes))
        if img.format != "PNG":
            raise ValueError(f"{part} is {img.format or 'not an image'}, expected PNG")
        img.load()
        return img
    except HTTPException:
        raise
    except Exception as exc:
        raise HTTPException(status_code=400, detail=f"bad upload for {part}: {exc}") from None


def create_app(config: ServiceConfig, llm=None) -> FastAPI:
    state = GatewayState(config, llm=llm)
    app = FastAPI(title="change interpretation gateway")
    app.state.gateway = state
    app.add_middleware(
        CORSMiddleware,
        allow_origins=config.cors_origins,
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/api/health")
    def health() -> dict:
        return {"status": "ok", "checkpoint_id": state.checkpoint_id}

    @app.post("/api/sessions")
    def create_session() -> dict:
        state.sweep()
        sess = AgentSession()
        state.sessions[sess.id] = sess
        state.journal(sess.id, {"event": "session_created"})
        return {"session_id": sess.id}

    @app.post("/api/sessions/{session_id}/pair")
    async def upload_pair(session_id: str, t1: UploadFile, t2: UploadFile) -> dict:
        sess = state.session(session_id)
        t1_bytes = await t1.read()
        t2_bytes = await t2.read()
        img1 = _read_png(t1_bytes, "t1")
        img2 = _read_png(t2_bytes, "t2")
        if img1.size != img2.size:
            raise HTTPException(
                status_code=400,
                detail=f"pair images differ in size: {img1.size} vs {img2.size}",
            )
        pair_ref, t1_ref, t2_ref = store_pair(state.store, t1_bytes, t2_bytes)
        sess.pair_ref, sess.t1_ref, sess.t2_ref = pair_ref, t1_ref, t2_ref
        state.journal(
            sess.id,
            {"event": "pair_uploaded", "pair_ref": pair_ref, "t1": t1_ref, "t2": t2_ref},
        )
        return {"pair_ref": pair_ref, "t1_ref": t1_ref, "t2_ref": t2_ref}

    @app.post("/api/sessions/{session_id}/messages")
    def post_message(session_id: str, message: MessageIn) -> dict:
        sess = state.session(session_id)
        state.journal(sess.id, {"event": "message", "role": "user", "text": message.text})
        try:
            reply = state.agent.handle(sess, message.text)
        except LlmUnreachable as exc:
            raise HTTPException(status_code=503, detail=str(exc)) from None
        except PlanningFailure as exc:
            raise HTTPException(
                status_code=422,
                detail={"error": "planning_failure", "diagnostics": exc.diagnostics},
            ) from None
        except ExecutionError as exc:
            raise HTTPException(
                status_code=422,
                detail={
                    "error": "execution_failure",
                    "step_id": exc.step_id,
                    "tool": exc.tool,
                    "message": str(exc),
                },
            ) from None
        state.journal(
            sess.id,
            {
                "event": "message",
                "role": "agent",
                "text": reply.text,
                "artifacts": reply.artifacts,
            },
        )
        return {"reply": reply.text, "artifacts": reply.artifacts}

    @app.get("/api/artifacts/{ref}")
    def get_artifact(ref: str) -> Response:
        try:
            data, kind = state.store.get(ref)
        except ArtifactNotFound:
            raise HTTPException(status_code=404, detail=f"unknown artifact {ref}") from None
        return Response(content=data, media_type=MEDIA_TYPES[kind])

    @app.get("/api/sessions/{session_id}/journal")
    def get_journal(session_id: str) -> Response:
        # serves the append-only transcript; sessions may have expired
        path = state.journal_dir / f"{session_id}.jsonl"
        if not path.exists():
            raise HTTPException(status_code=404, detail=f"no journal for {session_id}")
        return Response(content=path.read_bytes(), media_type="application/jsonl")

    return app
