"""Content-addressed on-disk cache, one subdirectory per pipeline stage."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any


def canonical_json(obj: Any) -> bytes:
    """Serialize ``obj`` so that equal values always give equal bytes."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def cache_key(stage: str, payload: bytes | str | dict | list) -> str:
    """SHA-256 over the stage name and the canonicalized payload.

    Dicts and lists are canonicalized with sorted keys; strings are UTF-8
    encoded; bytes are hashed as-is.
    """
    if isinstance(payload, (dict, list)):
        payload = canonical_json(payload)
    elif isinstance(payload, str):
        payload = payload.encode("utf-8")
    h = hashlib.sha256()
    h.update(stage.encode("utf-8"))
    h.update(b"\x00")
    h.update(payload)
    return h.hexdigest()


class StageCache:
    """Files live at ``<root>/<stage>/<key>``. ``root=None`` disables caching."""

    def __init__(self, root: str | os.PathLike | None):
        self.root = Path(root) if root is not None else None
        self.hits = 0
        self.misses = 0

    @property
    def enabled(self) -> bool:
        return self.root is not None

    def path(self, stage: str, key: str) -> Path:
        if self.root is None:
            raise RuntimeError("cache disabled")
        return self.root / stage / key

    def get(self, stage: str, key: str) -> bytes | None:
        if self.root is None:
            return None
        p = self.path(stage, key)
        if p.is_file():
            self.hits += 1
            return p.read_bytes()
        self.misses += 1
        return None

    def put(self, stage: str, key: str, data: bytes) -> None:
        if self.root is None:
            return
        p = self.path(stage, key)
        p.parent.mkdir(parents=True, exist_ok=True)
        # write-then-rename so an interrupted run never leaves a torn entry
        fd, tmp = tempfile.mkstemp(dir=p.parent, prefix=".tmp-")
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, p)

    def get_json(self, stage: str, key: str) -> Any | None:
        raw = self.get(stage, key)
        return None if raw is None else json.loads(raw)

    def put_json(self, stage: str, key: str, obj: Any) -> None:
        self.put(stage, key, json.dumps(obj, ensure_ascii=False, indent=1).encode("utf-8"))
