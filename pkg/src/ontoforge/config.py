"""Plain key=value configuration with defaults and flag overrides.

Secrets never live in config files; they come from the environment
(``ONTOFORGE_EMBED_API_KEY``, ``ONTOFORGE_LLM_API_KEY``,
``ONTOFORGE_GITHUB_TOKEN``). The config hash in run manifests covers
the effective (merged) configuration so runs are attributable.
"""

from __future__ import annotations

import hashlib

from .completion import CompletionProviderSpec, PromptBudget
from .embed import DEFAULT_LOCAL_DIM, DEFAULT_MODEL_NAME, DEFAULT_REMOTE_DIM, EmbeddingProviderSpec

DEFAULTS: dict[str, str] = {
    "embed.kind": "deterministic_local",
    "embed.model_name": DEFAULT_MODEL_NAME,
    "embed.endpoint": "",
    "embed.dim": "",  # empty: 256 for local, 1536 for remote
    "llm.kind": "scripted",
    "llm.model_name": "gpt-4",
    "llm.endpoint": "",
    "llm.temperature": "0",
    "llm.script_path": "",
    "retrieval.k": "10",
    "retrieval.mmr_lambda": "0.5",
    "retrieval.github_docs": "3",
    "retrieval.candidate_multiplier": "3",
    "prompt.max_tokens": "3000",
    "prompt.min_examples": "1",
}


class Config:
    def __init__(self, values: dict[str, str]):
        unknown = set(values) - set(DEFAULTS)
        if unknown:
            raise KeyError(f"unknown config keys: {sorted(unknown)}")
        self.values = dict(DEFAULTS)
        self.values.update(values)

    def get(self, key: str) -> str:
        return self.values[key]

    def getint(self, key: str) -> int:
        return int(self.values[key])

    def getfloat(self, key: str) -> float:
        return float(self.values[key])

    def override(self, key: str, value) -> None:
        if key not in DEFAULTS:
            raise KeyError(f"unknown config key {key!r}")
        self.values[key] = str(value)

    def canonical_text(self) -> str:
        return "\n".join(f"{k}={self.values[k]}" for k in sorted(self.values)) + "\n"

    def hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode("utf-8")).hexdigest()


def parse_config_text(text: str) -> dict[str, str]:
    values = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"config line {line_no} is not key=value: {line!r}")
        values[key.strip()] = value.strip()
    return values


def load_config(path=None) -> Config:
    if path is None:
        return Config({})
    with open(path, "r", encoding="utf-8") as fh:
        return Config(parse_config_text(fh.read()))


def embed_provider_from_config(config: Config) -> EmbeddingProviderSpec:
    kind = config.get("embed.kind")
    dim_raw = config.get("embed.dim")
    if dim_raw:
        dim = int(dim_raw)
    else:
        dim = DEFAULT_LOCAL_DIM if kind == "deterministic_local" else DEFAULT_REMOTE_DIM
    return EmbeddingProviderSpec(
        kind=kind,
        model_name=config.get("embed.model_name"),
        endpoint=config.get("embed.endpoint") or None,
        dim=dim,
    )


def llm_provider_from_config(config: Config) -> CompletionProviderSpec:
    return CompletionProviderSpec(
        kind=config.get("llm.kind"),
        model_name=config.get("llm.model_name"),
        endpoint=config.get("llm.endpoint") or None,
        temperature=config.getfloat("llm.temperature"),
        script_path=config.get("llm.script_path") or None,
    )


def budget_from_config(config: Config) -> PromptBudget:
    return PromptBudget(
        max_tokens=config.getint("prompt.max_tokens"),
        min_examples=config.getint("prompt.min_examples"),
        requested_examples=config.getint("retrieval.k"),
    )
