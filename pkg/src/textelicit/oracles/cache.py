"""Persistent response cache: one immutable JSON file per request key."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import threading
import time
from pathlib import Path


def cache_key(template_name: str, rendered_prompt: str, model_id: str) -> str:
    digest = hashlib.sha256()
    for part in (template_name, rendered_prompt, model_id):
        encoded = part.encode("utf-8")
        digest.update(len(encoded).to_bytes(8, "big"))
        digest.update(encoded)
    return digest.hexdigest()


class ResponseCache:
    """Exact-match lookup of raw oracle responses on disk.

    Entries are immutable once written; writes are atomic (temp file plus
    rename) and serialized, reads are lock-free.
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()

    def _path(self, key: str) -> Path:
        return self.directory / key

    def get(self, key: str) -> str | None:
        path = self._path(key)
        if not path.exists():
            return None
        entry = json.loads(path.read_text())
        return entry["response"]

    def put(self, key: str, template_name: str, model_id: str, response: str) -> None:
        path = self._path(key)
        with self._write_lock:
            if path.exists():
                return
            entry = {
                "key": key,
                "template": template_name,
                "model_id": model_id,
                "response": response,
                "created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            }
            fd, tmp_name = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
            try:
                with os.fdopen(fd, "w") as handle:
                    json.dump(entry, handle, indent=2, sort_keys=True)
                os.replace(tmp_name, path)
            finally:
                if os.path.exists(tmp_name):
                    os.unlink(tmp_name)
