"""
RunManifest: what a CLI run did, enough to run it again.
"""

import hashlib
import os
import tempfile
from datetime import datetime, timezone
from typing import Any, Dict, List

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from errors import IoError, SchemaError
from settings import PIPEFORGE_VERSION

MANIFEST_NAME = "manifest.json"


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def file_sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


class RunManifest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    version: str = PIPEFORGE_VERSION
    command: str
    argv: List[str] = Field(default_factory=list)
    config: Dict[str, Any] = Field(default_factory=dict)
    seed: int = 0
    started_at: str = Field(default_factory=utc_now)
    finished_at: str = ""
    inputs: Dict[str, str] = Field(default_factory=dict)
    outputs: List[str] = Field(default_factory=list)

    def add_input(self, path: str):
        self.inputs[os.path.abspath(path)] = file_sha256(path)

    def add_output(self, path: str):
        if path not in self.outputs:
            self.outputs.append(path)

    def changed_inputs(self) -> List[str]:
        """Inputs that are missing or no longer hash to the recorded digest"""
        changed = []
        for path, digest in sorted(self.inputs.items()):
            if not os.path.isfile(path) or file_sha256(path) != digest:
                changed.append(path)
        return changed


def write_manifest(path: str, manifest: RunManifest):
    """Stamps finished_at and replaces `path` in one rename"""
    manifest.finished_at = utc_now()
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        fd, temp_path = tempfile.mkstemp(dir=directory, prefix=".manifest-", suffix=".json")
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(manifest.model_dump_json(indent=4) + "\n")
        os.replace(temp_path, path)
    except OSError as exc:
        raise IoError(f"cannot write manifest {path}: {exc}") from exc


def load_manifest(path: str) -> RunManifest:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise IoError(f"cannot read manifest {path}: {exc}") from exc
    try:
        return RunManifest.model_validate_json(text)
    except ValidationError as exc:
        error = exc.errors()[0]
        field = ".".join(str(part) for part in error["loc"])
        raise SchemaError(f"{path}.{field}" if field else path, error["msg"]) from exc
