"""Parsers turning ontology source files into canonical terms.

Two input dialects are supported:

* raw term JSONL — one JSON object per line with ``id`` holding the
  source CURIE and relationship predicates/targets given as CURIEs or
  plain labels;
* an OBO subset — ``[Term]`` stanzas with the tags ``id``, ``name``,
  ``is_a``, ``relationship``, ``def`` and ``creation_date``.

Both produce :class:`RawTermRecord` lists that :func:`canonicalize`
rewrites into symbol-space :class:`~ontoforge.model.TermObject`s.
"""

from __future__ import annotations

import io
import json
import logging
import re
from dataclasses import dataclass, field
from datetime import date

from .errors import ParseError, SchemaError
from .model import (
    Curie,
    Relationship,
    SymbolTable,
    TermObject,
    looks_like_curie,
    to_symbol,
)

logger = logging.getLogger(__name__)

SUBCLASS_LABEL = "subClassOf"


@dataclass
class RawTermRecord:
    """One term as read from a source file, still in CURIE space."""

    curie: Curie
    label: str
    definition: str | None = None
    raw_relationships: list[tuple[str, Curie]] = field(default_factory=list)
    raw_logical: list[tuple[str, Curie]] | None = None
    created_date: date | None = None
    definition_xrefs: list[str] = field(default_factory=list)


def _decode_lines(stream) -> list[str]:
    if isinstance(stream, bytes):
        text = stream.decode("utf-8")
    elif isinstance(stream, str):
        text = stream
    elif hasattr(stream, "read"):
        data = stream.read()
        text = data.decode("utf-8") if isinstance(data, bytes) else data
    else:
        raise TypeError(f"unsupported stream type {type(stream)!r}")
    return text.splitlines()


def _strip_comment(value: str) -> str:
    """Drop trailing ``! comment`` text after an identifier."""
    return value.split("!", 1)[0].strip()


def _parse_raw_relationship(obj: dict, line_no: int) -> tuple[str, Curie]:
    predicate = obj.get("predicate")
    target = obj.get("target")
    if not predicate or not target:
        raise SchemaError("relationship requires predicate and target", line_no)
    if not looks_like_curie(target):
        raise SchemaError(f"relationship target is not a CURIE: {target!r}", line_no)
    return str(predicate), Curie.parse(target)


def parse_term_jsonl(stream) -> list[RawTermRecord]:
    """Parse raw term JSONL. Unknown fields are ignored.

    Each line must carry a CURIE (in ``id`` or ``original_id``) and a
    ``label``; relationship targets must be CURIEs.
    """
    records = []
    for line_no, line in enumerate(_decode_lines(stream), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed JSON: {exc}", line_no) from exc
        if not isinstance(obj, dict):
            raise ParseError("line is not a JSON object", line_no)

        curie_text = None
        for key in ("id", "original_id"):
            value = obj.get(key)
            if isinstance(value, str) and looks_like_curie(value):
                curie_text = value
                break
        if curie_text is None:
            raise SchemaError("no CURIE in id or original_id", line_no)
        label = obj.get("label")
        if not label:
            raise SchemaError("missing label", line_no)

        rels = [
            _parse_raw_relationship(r, line_no) for r in obj.get("relationships", [])
        ]
        logical = obj.get("logical_definitions")
        if logical is not None:
            logical = [_parse_raw_relationship(r, line_no) for r in logical]
        created = obj.get("created_date")
        if created is not None:
            created = date.fromisoformat(str(created)[:10])
        records.append(
            RawTermRecord(
                curie=Curie.parse(curie_text),
                label=str(label),
                definition=obj.get("definition"),
                raw_relationships=rels,
                raw_logical=logical,
                created_date=created,
            )
        )
    return records


_DEF_RE = re.compile(r'^\s*"(?P<text>(?:[^"\\]|\\.)*)"\s*(?:\[(?P<xrefs>[^\]]*)\])?')


def _parse_def_value(value: str, line_no: int) -> tuple[str, list[str]]:
    match = _DEF_RE.match(value)
    if not match:
        raise ParseError("unterminated or missing quote in def", line_no)
    text = match.group("text").replace('\\"', '"')
    xrefs_raw = match.group("xrefs") or ""
    xrefs = [x.strip() for x in xrefs_raw.split(",") if x.strip()]
    return text, xrefs


def parse_obo_subset(stream) -> list[RawTermRecord]:
    """Parse ``[Term]`` stanzas for the supported tag subset.

    ``is_a`` becomes the predicate label ``subClassOf``; all other tags
    outside the subset are ignored. Non-Term stanzas are skipped.
    """
    records = []
    lines = _decode_lines(stream)
    stanza_start = None
    in_term = False
    current: dict = {}

    def finish(start_line: int):
        if "id" not in current:
            raise SchemaError("[Term] stanza missing id", start_line)
        if "name" not in current:
            raise SchemaError("[Term] stanza missing name", start_line)
        records.append(
            RawTermRecord(
                curie=Curie.parse(current["id"]),
                label=current["name"],
                definition=current.get("def"),
                raw_relationships=current.get("rels", []),
                created_date=current.get("created"),
                definition_xrefs=current.get("xrefs", []),
            )
        )

    for line_no, raw_line in enumerate(lines, start=1):
        line = raw_line.strip()
        if line.startswith("["):
            if in_term:
                finish(stanza_start)
            in_term = line == "[Term]"
            stanza_start = line_no
            current = {}
            continue
        if not in_term or not line or line.startswith("!"):
            continue
        tag, sep, value = line.partition(":")
        if not sep:
            continue
        tag = tag.strip()
        value = value.strip()
        if tag == "id":
            current["id"] = _strip_comment(value)
        elif tag == "name":
            current["name"] = value
        elif tag == "is_a":
            target = _strip_comment(value)
            current.setdefault("rels", []).append(
                (SUBCLASS_LABEL, Curie.parse(target))
            )
        elif tag == "relationship":
            body = _strip_comment(value)
            parts = body.split()
            if len(parts) != 2:
                raise ParseError(f"relationship needs predicate and target: {body!r}", line_no)
            current.setdefault("rels", []).append((parts[0], Curie.parse(parts[1])))
        elif tag == "def":
            text, xrefs = _parse_def_value(value, line_no)
            current["def"] = text
            current["xrefs"] = xrefs
        elif tag == "creation_date":
            current["created"] = date.fromisoformat(value[:10])
        # every other tag is outside the supported subset
    if in_term:
        finish(stanza_start)
    return records


def canonicalize(
    records: list[RawTermRecord],
    label_map: dict[str, str] | None = None,
) -> tuple[list[TermObject], SymbolTable]:
    """Rewrite CURIE-space records into symbol-space terms.

    Two passes: the first registers every term CURIE (then every foreign
    relationship target, drawing labels from ``label_map`` or falling
    back to ``Curie_<prefix>_<local>`` with a logged warning); the second
    rewrites relationships. Predicates given as CURIEs resolve through
    ``label_map``; predicates given as labels are camel-cased directly.
    """
    label_map = label_map or {}
    table = SymbolTable()
    for record in records:
        table.register(record.curie, record.label)

    def target_symbol(curie: Curie) -> str:
        existing = table.symbol_for(curie)
        if existing is not None:
            return existing
        label = label_map.get(str(curie))
        if label is not None:
            return table.register(curie, label)
        logger.warning("no label for relationship target %s; using fallback symbol", curie)
        return table.register_fallback(curie)

    def predicate_symbol(raw: str) -> str:
        if looks_like_curie(raw):
            label = label_map.get(raw)
            if label is None:
                logger.warning("no label for predicate %s; camel-casing the CURIE", raw)
                return to_symbol(raw)
            return to_symbol(label)
        return to_symbol(raw)

    def rewrite(pairs: list[tuple[str, Curie]]) -> tuple[Relationship, ...]:
        out = []
        seen = set()
        for pred_label, target_curie in pairs:
            rel = Relationship(predicate_symbol(pred_label), target_symbol(target_curie))
            if rel not in seen:
                seen.add(rel)
                out.append(rel)
        return tuple(out)

    terms = []
    for record in records:
        terms.append(
            TermObject(
                id=table.symbol_for(record.curie),
                original_id=record.curie,
                label=record.label,
                definition=record.definition,
                relationships=rewrite(record.raw_relationships),
                logical_definitions=(
                    rewrite(record.raw_logical) if record.raw_logical is not None else None
                ),
                created_date=record.created_date,
            )
        )
    return terms, table


def load_label_map(path) -> dict[str, str]:
    """TSV sidecar of ``CURIE<TAB>label`` lines for foreign identifiers."""
    out: dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError("expected CURIE<TAB>label", line_no)
            out[parts[0].strip()] = parts[1].strip()
    return out


def load_date_sidecar(path) -> dict[str, date]:
    """TSV sidecar of ``CURIE<TAB>YYYY-MM-DD`` creation dates."""
    out: dict[str, date] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ParseError("expected CURIE<TAB>date", line_no)
            out[parts[0].strip()] = date.fromisoformat(parts[1].strip())
    return out


def apply_date_sidecar(records: list[RawTermRecord], dates: dict[str, date]) -> None:
    """Fill missing ``created_date`` values from a sidecar mapping."""
    for record in records:
        if record.created_date is None:
            sidecar = dates.get(str(record.curie))
            if sidecar is not None:
                record.created_date = sidecar


def jsonl_is_raw(path) -> bool:
    """True when the file's terms are keyed by CURIE (the raw dialect)."""
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                obj = json.loads(line)
                return looks_like_curie(str(obj.get("id", "")))
    return False


def load_terms_auto(path, label_map: dict[str, str] | None = None) -> list[TermObject]:
    """Load a term JSONL file in either dialect.

    Lines whose ``id`` is a CURIE are the raw dialect and get
    canonicalized; otherwise the file is already in symbol space.
    """
    from .model import load_terms_jsonl

    if jsonl_is_raw(path):
        with open(path, "rb") as fh:
            records = parse_term_jsonl(fh.read())
        terms, _table = canonicalize(records, label_map)
        return terms
    return load_terms_jsonl(path)


def parse_ontology_file(path, fmt: str) -> list[RawTermRecord]:
    with open(path, "rb") as fh:
        data = fh.read()
    if fmt == "obo":
        return parse_obo_subset(data)
    if fmt == "jsonl":
        return parse_term_jsonl(data)
    raise ValueError(f"unknown ontology format {fmt!r}")


def records_from_bytes(data: bytes, fmt: str) -> list[RawTermRecord]:
    return parse_ontology_file_from_stream(io.BytesIO(data), fmt)


def parse_ontology_file_from_stream(stream, fmt: str) -> list[RawTermRecord]:
    if fmt == "obo":
        return parse_obo_subset(stream)
    if fmt == "jsonl":
        return parse_term_jsonl(stream)
    raise ValueError(f"unknown ontology format {fmt!r}")
