# artifact_store.py
import csv
import hashlib
import io
import json
import logging
import time
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any, Iterable, Sequence

from pydantic import BaseModel

from app.src.utils.files import format_float, to_jsonable

logger = logging.getLogger(__name__)

TRACKED_PACKAGES = ("fold-maps", "numpy", "scipy", "pydantic")


class EmittedFile(BaseModel):
    name: str
    sha256: str
    bytes: int


class RunManifest(BaseModel):
    scenario: str
    command: str
    config: dict[str, Any]
    versions: dict[str, str]
    wall_clock_seconds: float
    files: list[EmittedFile]


def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def package_versions() -> dict[str, str]:
    versions = {}
    for name in TRACKED_PACKAGES:
        try:
            versions[name] = version(name)
        except PackageNotFoundError:
            versions[name] = "unknown"
    return versions


class ArtifactStore:
    """Writes run artifacts into one directory and records their digests for the manifest."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.files: list[EmittedFile] = []
        self._started = time.perf_counter()

    def make_artifact_path(self, filename: str) -> Path:
        return self.out_dir / filename

    def _write(self, filename: str, data: bytes) -> Path:
        path = self.make_artifact_path(filename)
        path.write_bytes(data)
        self.files = [f for f in self.files if f.name != filename]
        self.files.append(EmittedFile(name=filename, sha256=sha256(data), bytes=len(data)))
        logger.info("Wrote %s (%d bytes).", path, len(data))
        return path

    def write_json(self, filename: str, payload: Any) -> Path:
        if isinstance(payload, BaseModel):
            payload = payload.model_dump(mode="python")
        text = json.dumps(to_jsonable(payload), indent=2, sort_keys=True, allow_nan=False) + "\n"
        return self._write(filename, text.encode("utf-8"))

    def write_csv(self, filename: str, header: Sequence[str], rows: Iterable[Sequence[float]]) -> Path:
        buffer = io.StringIO(newline="")
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(x) for x in row])
        return self._write(filename, buffer.getvalue().encode("utf-8"))

    def write_manifest(self, scenario: str, command: str, config: dict[str, Any]) -> Path:
        manifest = RunManifest(
            scenario=scenario,
            command=command,
            config=to_jsonable(config),
            versions=package_versions(),
            wall_clock_seconds=time.perf_counter() - self._started,
            files=sorted(self.files, key=lambda f: f.name),
        )
        text = json.dumps(to_jsonable(manifest.model_dump(mode="python")), indent=2, sort_keys=True) + "\n"
        path = self.make_artifact_path("manifest.json")
        path.write_text(text, encoding="utf-8")
        return path
