"""Service configuration, loadable from a JSON file."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path


@dataclass
class ServiceConfig:
    checkpoint: str
    artifact_dir: str = "artifacts"
    journal_dir: str = "journals"
    host: str = "127.0.0.1"
    port: int = 8000
    session_ttl_s: float = 3600.0
    resolution_m_per_px: float = 0.5
    cors_origins: list[str] = field(default_factory=lambda: ["*"])

    def __post_init__(self):
        if self.session_ttl_s <= 0:
            raise ValueError("session_ttl_s must be positive")
        if self.resolution_m_per_px <= 0:
            raise ValueError("resolution_m_per_px must be positive")

    @classmethod
    def from_json(cls, path: str | Path) -> "ServiceConfig":
        with open(path) as fh:
            payload = json.load(fh)
        known = {f.name for f in fields(cls)}
        unknown = set(payload) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**payload)
