"""Run manifests written next to every CLI output."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Optional

from . import __version__

MANIFEST_SUFFIX = ".manifest.json"


@dataclass
class RunManifest:
    command: str
    parameters: dict
    seed: Optional[int]
    outputs: list = field(default_factory=list)
    version: str = __version__
    timestamp: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds")
    )

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            "parameters": self.parameters,
            "seed": self.seed,
            "version": self.version,
            "outputs": list(self.outputs),
            "timestamp": self.timestamp,
        }

    def write(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def manifest_path(output) -> Path:
    output = Path(output)
    return output.with_name(output.name + MANIFEST_SUFFIX)


def load_schema() -> dict:
    return json.loads(resources.files("qeraser").joinpath("manifest.schema.json").read_text())
