"""Content-addressed blob store plus an append-only JSONL study index.

Blobs live at blobs/<first two hash chars>/<sha256>; writes go through a
temp file + atomic rename so a crash never leaves a partial blob behind.
The index is replayed at startup to rebuild the worklist.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from pathlib import Path

from medrt.errors import StorageError


class BlobStore:
    def __init__(self, root):
        self.root = Path(root) / "blobs"
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, ref: str) -> Path:
        return self.root / ref[:2] / ref

    def put(self, data: bytes) -> str:
        ref = hashlib.sha256(data).hexdigest()
        path = self._path(ref)
        if path.exists():
            return ref  # content addressing dedups identical payloads
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp")
            with open(tmp, "wb") as f:
                f.write(data)
                f.flush()
                os.fsync(f.fileno())
            os.replace(tmp, path)
        except OSError as e:
            raise StorageError(f"blob write failed: {e}") from e
        return ref

    def get(self, ref: str) -> bytes:
        try:
            return self._path(ref).read_bytes()
        except OSError as e:
            raise StorageError(f"blob {ref} unreadable: {e}") from e

    def has(self, ref: str) -> bool:
        return self._path(ref).exists()


class StudyIndex:
    """JSONL rows describing completed (or failed) studies."""

    def __init__(self, root):
        self.path = Path(root) / "index.jsonl"
        self.lock = threading.Lock()
        self.path.parent.mkdir(parents=True, exist_ok=True)

    def append(self, row: dict) -> None:
        data = json.dumps(row, sort_keys=True) + "\n"
        try:
            with self.lock, open(self.path, "a") as f:
                f.write(data)
                f.flush()
                os.fsync(f.fileno())
        except OSError as e:
            raise StorageError(f"index append failed: {e}") from e

    def replay(self) -> list[dict]:
        if not self.path.exists():
            return []
        rows = []
        with open(self.path) as f:
            for line in f:
                line = line.strip()
                if line:
                    rows.append(json.loads(line))
        return rows
