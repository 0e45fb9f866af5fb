"""Content-addressed artifact store.

Artifacts are immutable files named by the sha256 of their bytes, with the
media kind as the file extension. Same bytes, same ref, forever.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

KINDS = ("png", "txt", "json")


class ArtifactNotFound(KeyError):
    pass


class ArtifactStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def put(self, data: bytes, kind: str) -> str:
        if kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {kind!r}")
        ref = hashlib.sha256(data).hexdigest()
        path = self.root / f"{ref}.{kind}"
        if not path.exists():
            tmp = path.with_suffix(path.suffix + ".tmp")
            tmp.write_bytes(data)
            tmp.replace(path)
        return ref

    def _find(self, ref: str) -> Path:
        if not ref or "/" in ref or "." in ref:
            raise ArtifactNotFound(ref)
        hits = sorted(self.root.glob(f"{ref}.*"))
        hits = [h for h in hits if h.suffix.lstrip(".") in KINDS]
        if not hits:
            raise ArtifactNotFound(ref)
        return hits[0]

    def get(self, ref: str) -> tuple[bytes, str]:
        path = self._find(ref)
        return path.read_bytes(), path.suffix.lstrip(".")

    def kind(self, ref: str) -> str:
        return self._find(ref).suffix.lstrip(".")

    def exists(self, ref: str) -> bool:
        try:
            self._find(ref)
            return True
        except ArtifactNotFound:
            return False
