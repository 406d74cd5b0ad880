"""Prompt assembly, completion providers, response parsing, post-filtering.

The completion flow mirrors the retrieval-augmented pipeline: embed the
partial term, pull similar terms (and optionally tracker documents)
from the vector store, diversify with MMR, render input/output example
pairs into a fixed prompt template, call the provider, extract the JSON
object from the response, and drop predicted relationships whose
targets are unknown to the indexed ontology.
"""

from __future__ import annotations

import json
import logging
import math
import os
import re
import time
from dataclasses import dataclass, field

from .embed import EmbeddingProviderSpec, embed_text
from .errors import (
    BudgetImpossible,
    EmptyStore,
    MalformedJson,
    NoJsonFound,
    ProviderError,
    ScriptMiss,
)
from .model import Relationship, Symbol, TermObject, to_symbol
from .vstore import Collection, mmr_rerank

logger = logging.getLogger(__name__)

LLM_API_KEY_ENV = "ONTOFORGE_LLM_API_KEY"

CONTENT_FIELDS = ("label", "definition", "relationships", "logical_definitions")

_TEMPLATE_PATH = os.path.join(os.path.dirname(__file__), "data", "prompt_template.txt")


def default_prompt_template() -> str:
    with open(_TEMPLATE_PATH, "r", encoding="utf-8") as fh:
        return fh.read()


def estimate_tokens(text: str) -> int:
    """Provider-agnostic token estimate: one token per 4 characters."""
    return math.ceil(len(text) / 4)


@dataclass(frozen=True)
class PartialTerm:
    """A term with some fields populated and the rest to be generated."""

    label: str | None = None
    definition: str | None = None
    relationships: tuple[Relationship, ...] | None = None
    logical_definitions: tuple[Relationship, ...] | None = None
    mask: frozenset[str] = frozenset()

    def __post_init__(self):
        unknown = set(self.mask) - set(CONTENT_FIELDS)
        if unknown:
            raise ValueError(f"mask names unknown fields {sorted(unknown)}")
        if not self.mask:
            raise ValueError("mask must name at least one field to generate")
        populated = set(self.populated_fields())
        if not populated:
            raise ValueError("at least one field must be populated")
        overlap = populated & set(self.mask)
        if overlap:
            raise ValueError(f"mask overlaps populated fields {sorted(overlap)}")

    def populated_fields(self) -> dict:
        out = {}
        for name in CONTENT_FIELDS:
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        return out


@dataclass(frozen=True)
class ContextExample:
    """One in-context pair projected from a retrieved term."""

    key: str
    input_fields: dict
    output_fields: dict


@dataclass(frozen=True)
class PromptBudget:
    max_tokens: int = 3000
    min_examples: int = 1
    requested_examples: int = 10

    def __post_init__(self):
        if self.min_examples > self.requested_examples:
            raise ValueError("min_examples must be <= requested_examples")


@dataclass(frozen=True)
class CompletionProviderSpec:
    """Configuration of one completion provider."""

    kind: str = "scripted"  # or "remote_http"
    model_name: str = "gpt-4"
    endpoint: str | None = None
    temperature: float = 0.0
    script_path: str | None = None
    api_key_env: str = LLM_API_KEY_ENV

    def __post_init__(self):
        if self.kind not in ("remote_http", "scripted"):
            raise ValueError(f"unknown completion provider kind {self.kind!r}")
        if self.kind == "remote_http" and not self.endpoint:
            raise ValueError("remote_http completion provider requires an endpoint")
        if self.kind == "scripted" and not self.script_path:
            raise ValueError("scripted completion provider requires a script_path")


@dataclass(frozen=True)
class CompletedTerm:
    term: TermObject
    dropped_relationships: tuple[Relationship, ...]
    raw_response: str
    context_keys: tuple[str, ...]
    prompt_text: str


@dataclass
class CompletionOptions:
    budget: PromptBudget = field(default_factory=PromptBudget)
    mmr_lambda: float = 0.5
    candidate_multiplier: int = 3
    use_github: bool = False
    github_docs: int = 3
    background: bool = False
    prompt_template: str | None = None
    document_token_cap: int = 1500
    transport: object = None  # injectable HTTP transport for remote providers


# --- retrieval ---


def partial_query_text(query: PartialTerm, background: str | None = None) -> str:
    """Retrieval text for a partial term: same shape as term serialization."""
    parts = []
    if query.label:
        parts.append(query.label)
    if query.definition:
        if parts:
            parts[0] = parts[0] + "."
        parts.append(query.definition)
    text = " ".join(parts)
    for rel in query.relationships or ():
        text += f" {rel.predicate} {rel.target}"
    for rel in query.logical_definitions or ():
        text += f" {rel.predicate} {rel.target}"
    if background:
        text = (text + " " + background).strip()
    if not text:
        raise ValueError("partial term has no text to retrieve with")
    return text.strip()


def _payload_fields(payload: str) -> dict:
    try:
        return json.loads(payload)
    except json.JSONDecodeError:
        return {}


def _project_example(key: str, payload: dict, query: PartialTerm) -> ContextExample | None:
    populated = set(query.populated_fields())
    input_fields = {}
    output_fields = {}
    for name in CONTENT_FIELDS:
        if name not in payload or payload[name] in (None, [], ""):
            continue
        if name in populated:
            input_fields[name] = payload[name]
        elif name in query.mask:
            output_fields[name] = payload[name]
    if not output_fields:
        return None  # retrieved term teaches nothing about the masked fields
    return ContextExample(key=key, input_fields=input_fields, output_fields=output_fields)


def select_context(
    term_store: Collection,
    issue_store: Collection | None,
    embed_provider: EmbeddingProviderSpec,
    query: PartialTerm,
    budget: PromptBudget,
    use_github: bool = False,
    background: str | None = None,
    mmr_lambda: float = 0.5,
    candidate_multiplier: int = 3,
    github_docs: int = 3,
) -> tuple[list[ContextExample], list[dict]]:
    """Retrieve in-context examples (and optionally documents).

    Retrieves ``candidate_multiplier * requested_examples`` nearest
    terms, re-ranks with MMR down to the requested count, and projects
    each survivor onto the query's populated/masked fields. Any
    background text is appended to the retrieval query only.
    """
    if len(term_store) == 0:
        raise EmptyStore("term collection is empty")
    text = partial_query_text(query, background)
    query_vec = embed_text(embed_provider, text)

    requested = budget.requested_examples
    hits = term_store.knn_query(query_vec, candidate_multiplier * requested)
    candidates = [(h.key, term_store.vector(h.key), h.similarity) for h in hits]
    keys = mmr_rerank(query_vec, candidates, mmr_lambda, requested)

    examples = []
    for key in keys:
        example = _project_example(key, _payload_fields(term_store.payload(key)), query)
        if example is not None:
            examples.append(example)

    documents: list[dict] = []
    if use_github:
        if issue_store is None or len(issue_store) == 0:
            raise EmptyStore("github option set but the issue collection is empty")
        for hit in issue_store.knn_query(query_vec, github_docs):
            documents.append(_payload_fields(issue_store.payload(hit.key)))
    return examples, documents


# --- prompt ---


def _render_json(fields: dict) -> str:
    def plain(value):
        if isinstance(value, Relationship):
            return {"predicate": value.predicate, "target": value.target}
        if isinstance(value, (list, tuple)):
            return [plain(v) for v in value]
        return value

    ordered = {name: plain(fields[name]) for name in CONTENT_FIELDS if name in fields}
    return json.dumps(ordered, ensure_ascii=False)


def _render_example(example: ContextExample) -> str:
    return (
        "input:\n"
        + _render_json(example.input_fields)
        + "\noutput:\n"
        + _render_json(example.output_fields)
    )


def _render_document(doc: dict, token_cap: int) -> str:
    title = doc.get("title", "")
    body = doc.get("body", "")
    text = f"### {title}\n{body}" if title else body
    char_cap = token_cap * 4
    if len(text) > char_cap:
        text = text[:char_cap]
    return text


def build_prompt(
    query: PartialTerm,
    examples: list[ContextExample],
    documents: list[dict],
    budget: PromptBudget,
    background: str | None = None,
    template: str | None = None,
    document_token_cap: int = 1500,
) -> str:
    """Render the completion prompt, trimming tail examples to budget.

    The section layout comes from the shipped template and never
    changes; only section contents vary. Examples are dropped from the
    tail until the estimated token count fits ``budget.max_tokens``,
    but never below ``budget.min_examples``.
    """
    if len(examples) < budget.min_examples:
        raise BudgetImpossible(
            f"{len(examples)} examples available, floor is {budget.min_examples}"
        )
    template = template if template is not None else default_prompt_template()
    doc_text = "\n\n".join(_render_document(d, document_token_cap) for d in documents)

    def render(kept: list[ContextExample]) -> str:
        prompt = template
        prompt = prompt.replace("{masked_fields}", ", ".join(sorted(query.mask)))
        prompt = prompt.replace(
            "{examples}", "\n\n".join(_render_example(e) for e in kept)
        )
        prompt = prompt.replace("{documents}", doc_text)
        prompt = prompt.replace("{background}", background or "")
        prompt = prompt.replace("{query}", _render_json(query.populated_fields()))
        return prompt

    kept = list(examples)
    prompt = render(kept)
    while estimate_tokens(prompt) > budget.max_tokens and len(kept) > budget.min_examples:
        kept.pop()
        prompt = render(kept)
    if estimate_tokens(prompt) > budget.max_tokens:
        raise BudgetImpossible(
            f"prompt needs {estimate_tokens(prompt)} tokens with "
            f"{len(kept)} examples; budget is {budget.max_tokens}"
        )
    return prompt


# --- providers ---

_script_cache: dict[str, dict[str, str]] = {}


def _load_script(path: str) -> dict[str, str]:
    if path not in _script_cache:
        responses = {}
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                responses[obj["key"]] = obj["response"]
        _script_cache[path] = responses
    return _script_cache[path]


def _default_llm_transport(endpoint: str, payload: dict, api_key: str | None) -> dict:
    import requests

    headers = {"Content-Type": "application/json"}
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    resp = requests.post(endpoint, json=payload, headers=headers, timeout=120)
    resp.raise_for_status()
    return resp.json()


def call_provider(
    provider: CompletionProviderSpec,
    prompt: str,
    key: str | None = None,
    transport=None,
    retries: int = 3,
    backoff: float = 0.5,
) -> str:
    """Return the raw completion text for ``prompt``.

    The scripted provider answers from its canned file using ``key``
    and fails loudly on a miss so tests stay honest. The remote
    provider retries with exponential backoff.
    """
    if not prompt:
        raise ValueError("prompt must be non-empty")
    if provider.kind == "scripted":
        if key is None:
            raise ProviderError("scripted provider needs a response key")
        responses = _load_script(provider.script_path)
        if key not in responses:
            raise ScriptMiss(key)
        return responses[key]

    transport = transport or _default_llm_transport
    payload = {
        "model": provider.model_name,
        "prompt": prompt,
        "temperature": provider.temperature,
    }
    api_key = os.environ.get(provider.api_key_env)
    last_exc: Exception | None = None
    for attempt in range(retries):
        try:
            body = transport(provider.endpoint, payload, api_key)
            text = body.get("text")
            if not isinstance(text, str):
                raise ProviderError(f"endpoint response missing text field: {body!r}")
            return text
        except ProviderError:
            raise
        except Exception as exc:
            last_exc = exc
            if attempt < retries - 1:
                time.sleep(backoff * (2**attempt))
    raise ProviderError(f"completion failed after {retries} attempts: {last_exc}")


# --- parsing ---

_FIELD_ALIASES = {
    "id": "id",
    "originalid": "original_id",
    "label": "label",
    "definition": "definition",
    "definitions": "definition",
    "relationships": "relationships",
    "relationship": "relationships",
    "logicaldefinitions": "logical_definitions",
    "logicaldefinition": "logical_definitions",
    "predicate": "predicate",
    "target": "target",
}


def _normalize_key(key: str) -> str:
    squashed = re.sub(r"[^a-z]", "", key.lower())
    return _FIELD_ALIASES.get(squashed, key)


def _first_json_object(raw: str) -> str | None:
    """Extract the first balanced top-level {...} block, string-aware."""
    start = raw.find("{")
    while start != -1:
        depth = 0
        in_string = False
        escaped = False
        for i in range(start, len(raw)):
            ch = raw[i]
            if in_string:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_string = False
                continue
            if ch == '"':
                in_string = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    return raw[start : i + 1]
        start = raw.find("{", start + 1)
    return None


def parse_completion(raw: str, mask: frozenset[str] | set[str] | None = None) -> dict:
    """Extract and normalize the JSON object from a completion response.

    Preamble text, code fences, and trailing prose around the first
    balanced object are discarded. Known field names are normalized
    case-insensitively (the providers like to capitalize
    "Relationships"). With ``mask`` given, only masked fields are
    returned.
    """
    block = _first_json_object(raw)
    if block is None:
        raise NoJsonFound(raw)
    try:
        parsed = json.loads(block)
    except json.JSONDecodeError as exc:
        raise MalformedJson(f"completion JSON does not parse: {exc}", raw) from exc
    if not isinstance(parsed, dict):
        raise MalformedJson("completion JSON is not an object", raw)

    fields: dict = {}
    for key, value in parsed.items():
        name = _normalize_key(str(key))
        if name in ("relationships", "logical_definitions") and isinstance(value, list):
            value = [
                {_normalize_key(str(k)): v for k, v in entry.items()}
                if isinstance(entry, dict)
                else entry
                for entry in value
            ]
        fields[name] = value
    if mask is not None:
        fields = {name: value for name, value in fields.items() if name in mask}
    return fields


# --- post-filtering ---


def _coerce_relationships(value) -> list[Relationship]:
    """Turn parsed relationship entries into symbol-space relationships."""
    out = []
    if not isinstance(value, list):
        return out
    for entry in value:
        if isinstance(entry, Relationship):
            predicate, target = entry.predicate, entry.target
        elif isinstance(entry, dict):
            predicate = entry.get("predicate")
            target = entry.get("target")
        else:
            continue
        if not predicate or not target:
            continue
        try:
            out.append(Relationship(to_symbol(str(predicate)), to_symbol(str(target))))
        except Exception:
            logger.warning("discarding unusable relationship entry %r", entry)
    return out


def postfilter_relationships(
    relationships: list,
    symbol_universe: set[Symbol],
    predicate_whitelist: set[Symbol] | None = None,
) -> tuple[list[Relationship], list[Relationship]]:
    """Split predicted relationships into (kept, dropped).

    A relationship is kept iff its target symbol exists in the indexed
    universe and, when a whitelist is configured, its predicate is one
    the ontology already uses. Drops are returned, never discarded.
    """
    kept: list[Relationship] = []
    dropped: list[Relationship] = []
    seen = set()
    for rel in _coerce_relationships(relationships):
        if rel in seen:
            continue
        seen.add(rel)
        target_ok = rel.target in symbol_universe
        predicate_ok = predicate_whitelist is None or rel.predicate in predicate_whitelist
        if target_ok and predicate_ok:
            kept.append(rel)
        else:
            dropped.append(rel)
    return kept, dropped


def collection_universe(collection: Collection) -> tuple[set[str], set[str]]:
    """Symbol universe and predicate whitelist for a term collection.

    Uses index-time metadata when present; otherwise derives both from
    the stored payloads and caches the result on the collection.
    """
    meta = collection.metadata
    if "symbol_universe" not in meta:
        universe: set[str] = set()
        predicates: set[str] = set()
        for key in collection.keys:
            universe.add(key)
            payload = _payload_fields(collection.payload(key))
            for rel in payload.get("relationships", []):
                if isinstance(rel, dict) and rel.get("target"):
                    universe.add(rel["target"])
                if isinstance(rel, dict) and rel.get("predicate"):
                    predicates.add(rel["predicate"])
        meta["symbol_universe"] = sorted(universe)
        meta["predicate_whitelist"] = sorted(predicates)
    return set(meta["symbol_universe"]), set(meta.get("predicate_whitelist", []))


# --- orchestration ---

_BACKGROUND_INSTRUCTION = (
    "Describe the term {label!r} in one short paragraph, covering what "
    "it is and how it relates to nearby concepts. Respond with plain text."
)

REPAIR_SUFFIX = "\n\nRespond with a single JSON object only."


def background_key(label: str) -> str:
    """Scripted-provider key namespace for background generation calls."""
    return f"background:{label}"


def generate_background(
    provider: CompletionProviderSpec,
    query: PartialTerm,
    transport=None,
) -> str:
    """One no-context provider call describing the query term."""
    if not query.label:
        raise ValueError("background generation requires a label")
    prompt = _BACKGROUND_INSTRUCTION.format(label=query.label)
    raw = call_provider(
        provider, prompt, key=background_key(query.label), transport=transport
    )
    return raw.strip()


def complete_term(
    term_store: Collection,
    issue_store: Collection | None,
    embed_provider: EmbeddingProviderSpec,
    llm_provider: CompletionProviderSpec,
    query: PartialTerm,
    options: CompletionOptions | None = None,
) -> CompletedTerm:
    """Run the full completion pipeline for one partial term.

    Populated input fields are never overwritten; parsed values are
    merged for masked fields only, and predicted relationships are
    post-filtered against the indexed symbol universe.
    """
    options = options or CompletionOptions()
    background = None
    if options.background:
        background = generate_background(llm_provider, query, transport=options.transport)
        if not background:
            background = None  # degraded mode: proceed without it

    examples, documents = select_context(
        term_store,
        issue_store,
        embed_provider,
        query,
        options.budget,
        use_github=options.use_github,
        background=background,
        mmr_lambda=options.mmr_lambda,
        candidate_multiplier=options.candidate_multiplier,
        github_docs=options.github_docs,
    )
    prompt = build_prompt(
        query,
        examples,
        documents,
        options.budget,
        background=background,
        template=options.prompt_template,
        document_token_cap=options.document_token_cap,
    )
    key = query.label or ""
    raw = call_provider(llm_provider, prompt, key=key, transport=options.transport)
    try:
        fields = parse_completion(raw, mask=query.mask)
    except (NoJsonFound, MalformedJson):
        # One repair attempt with an explicit format reminder.
        raw = call_provider(
            llm_provider, prompt + REPAIR_SUFFIX, key=key, transport=options.transport
        )
        fields = parse_completion(raw, mask=query.mask)

    universe, whitelist = collection_universe(term_store)
    dropped: list[Relationship] = []

    def merged_rels(name: str) -> tuple[Relationship, ...] | None:
        populated = getattr(query, name)
        if populated is not None:
            return tuple(populated)
        if name not in query.mask or name not in fields:
            return None
        kept, rel_dropped = postfilter_relationships(fields[name], universe, whitelist)
        dropped.extend(rel_dropped)
        return tuple(kept)

    label = query.label if query.label is not None else str(fields.get("label", "") or "")
    definition = query.definition
    if definition is None and "definition" in query.mask:
        value = fields.get("definition")
        definition = str(value) if value is not None else None

    relationships = merged_rels("relationships") or ()
    logical = merged_rels("logical_definitions")
    term = TermObject(
        id=to_symbol(label) if label else "Term",
        label=label,
        definition=definition,
        relationships=relationships,
        logical_definitions=logical,
    )
    context_keys = tuple(e.key for e in examples) + tuple(
        str(d.get("doc_id", "")) for d in documents
    )
    return CompletedTerm(
        term=term,
        dropped_relationships=tuple(dropped),
        raw_response=raw,
        context_keys=context_keys,
        prompt_text=prompt,
    )


def completed_to_dict(completed: CompletedTerm) -> dict:
    from .model import term_to_dict

    return {
        "term": term_to_dict(completed.term),
        "dropped_relationships": [
            {"predicate": r.predicate, "target": r.target}
            for r in completed.dropped_relationships
        ],
        "raw_response": completed.raw_response,
        "context_keys": list(completed.context_keys),
        "prompt_text": completed.prompt_text,
    }
