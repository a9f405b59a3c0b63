"""Append-only audit log with a gapless sequence.

JSONL rows; the sequence counter resumes from the persisted maximum on
restart. A write failure flips the service into read-only mode (callers
check `read_only` before mutating state).
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
from pathlib import Path

from medrt.errors import StorageError


class AuditLog:
    def __init__(self, root, fsync: bool = True):
        self.path = Path(root) / "audit.jsonl"
        self.fsync = fsync
        self.lock = threading.Lock()
        self.read_only = False
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._seq = self._replay_max()

    def _replay_max(self) -> int:
        if not self.path.exists():
            return 0
        last = 0
        with open(self.path) as f:
            for line in f:
                line = line.strip()
                if line:
                    last = max(last, json.loads(line)["seq"])
        return last

    @staticmethod
    def actor_id(token: str, role: str) -> str:
        return f"{role}:{hashlib.sha256(token.encode()).hexdigest()[:8]}"

    def append(self, actor: str, action: str, study_id: str | None = None,
               detail: str | None = None, timestamp: float = 0.0) -> int:
        with self.lock:
            seq = self._seq + 1
            row = {"seq": seq, "ts": round(timestamp, 4), "actor": actor,
                   "action": action, "study_id": study_id, "detail": detail}
            try:
                with open(self.path, "a") as f:
                    f.write(json.dumps(row, sort_keys=True) + "\n")
                    f.flush()
                    if self.fsync:
                        os.fsync(f.fileno())
            except OSError as e:
                self.read_only = True
                raise StorageError(f"audit append failed: {e}") from e
            self._seq = seq
            return seq

    def entries(self) -> list[dict]:
        if not self.path.exists():
            return []
        out = []
        with open(self.path) as f:
            for line in f:
                line = line.strip()
                if line:
                    out.append(json.loads(line))
        return out
