"""Run manifests: what produced an output file, reproducibly.

Output records reference their manifest through the stable
``config_hash``/``prompt_template_hash`` pair; wall-clock timestamps
live only in the manifest file so repeated runs stay byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone


def hash_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


@dataclass
class RunManifest:
    config_hash: str
    prompt_template_hash: str
    embed_provider: dict
    llm_provider: dict
    store_dir: str
    collections: list[str]
    seed: int | None = None
    created_at: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat()
    )
    argv: list[str] = field(default_factory=lambda: list(sys.argv))

    def write(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(asdict(self), fh, indent=2)
            fh.write("\n")


def manifest_path_for(output_path: str) -> str:
    return f"{output_path}.manifest.json"
