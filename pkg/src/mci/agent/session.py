"""In-memory conversation state. Artifacts and journals live on disk;
sessions themselves are ephemeral and expire."""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field


@dataclass
class AgentSession:
    id: str = field(default_factory=lambda: uuid.uuid4().hex)
    history: list[dict] = field(default_factory=list)  # chat-completion messages
    pair_ref: str | None = None
    t1_ref: str | None = None
    t2_ref: str | None = None
    created_at: float = field(default_factory=time.time)
    last_active: float = field(default_factory=time.time)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def touch(self) -> None:
        self.last_active = time.time()

    def expired(self, ttl_s: float, now: float | None = None) -> bool:
        now = time.time() if now is None else now
        return now - self.last_active > ttl_s

    def bindings(self) -> dict[str, str]:
        out = {}
        if self.pair_ref:
            out["pair"] = self.pair_ref
        if self.t1_ref:
            out["t1"] = self.t1_ref
        if self.t2_ref:
            out["t2"] = self.t2_ref
        return out
