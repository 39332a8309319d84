"""Atomic file output and run manifests."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__

__all__ = ["atomic_write", "sha256_text", "RunManifest", "read_manifest"]


def atomic_write(path: str | os.PathLike, text: str) -> None:
    """Write ``text`` to ``path`` through a temp file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class RunManifest:
    command: str
    params: dict
    seed: int | None
    version: str = __version__
    duration_s: float = 0.0
    outputs: dict[str, str] = field(default_factory=dict)  # path -> sha256
    stdout_sha256: str = ""
    exit_code: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    def write(self, path: str | os.PathLike) -> None:
        atomic_write(path, self.to_json())


def read_manifest(path: str | os.PathLike) -> RunManifest:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return RunManifest(**doc)
