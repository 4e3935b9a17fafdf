"""Output directories and run manifests.

A manifest lists every file a command wrote, with sha256 checksums. It is
written last via rename, so its presence marks a completed run.
"""
from __future__ import annotations

import hashlib
import json
import os
import time
from datetime import datetime, timezone
from pathlib import Path

from . import __version__

MANIFEST_NAME = "manifest.json"


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class RunWriter:
    """Collects the files written under ``root`` and seals them in a manifest."""

    def __init__(self, root, command: str, config_hash: str | None = None, seed: int = 0):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.config_hash = config_hash
        self.seed = seed
        self.started = _now()
        self._t0 = time.perf_counter()
        self._files: list[Path] = []

    def path(self, relative) -> Path:
        p = self.root / relative
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def record(self, relative) -> Path:
        p = self.root / relative
        if p not in self._files:
            self._files.append(p)
        return p

    def write_text(self, relative, text: str) -> Path:
        p = self.path(relative)
        p.write_text(text, encoding="utf-8")
        return self.record(relative)

    def write_json(self, relative, obj) -> Path:
        return self.write_text(relative, json.dumps(obj, indent=2, sort_keys=True) + "\n")

    def manifest(self) -> dict:
        files = [{"path": p.relative_to(self.root).as_posix(), "bytes": p.stat().st_size,
                  "sha256": _sha256(p)} for p in sorted(self._files)]
        return {
            "schema": "dampwave-manifest/1",
            "command": self.command,
            "config_hash": self.config_hash,
            "code_version": __version__,
            "seed": self.seed,
            "started": self.started,
            "finished": _now(),
            "wall_seconds": round(time.perf_counter() - self._t0, 3),
            "files": files,
        }

    def seal(self) -> Path:
        final = self.root / MANIFEST_NAME
        tmp = final.with_suffix(".json.tmp")
        tmp.write_text(json.dumps(self.manifest(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        os.replace(tmp, final)
        return final


def verify_manifest(root) -> list[str]:
    """Paths whose checksum no longer matches (empty when intact)."""
    root = Path(root)
    data = json.loads((root / MANIFEST_NAME).read_text())
    return [f["path"] for f in data["files"]
            if not (root / f["path"]).exists() or _sha256(root / f["path"]) != f["sha256"]]
