"""Canonical data model: CURIEs, symbols, terms, and the ontology graph.

Ontology identifiers come in two forms. The source form is a CURIE such
as ``CL:1001502``; the working form is a camel-case symbol such as
``MitralCell`` derived from the term label. Symbols are plain strings so
they can be used directly as dictionary keys and JSON values; the
:class:`SymbolTable` keeps the bijection back to CURIEs.
"""

from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass, field
from datetime import date

from .errors import DuplicateCurie, InvalidLabel, SchemaError

Symbol = str

SUBCLASS_OF: Symbol = "SubClassOf"

# Symbols are identifier-like: leading letter, then letters/digits.
# Underscores appear only in the Curie_<prefix>_<local> fallback for
# targets whose label is unknown.
SYMBOL_RE = re.compile(r"[A-Za-z][A-Za-z0-9_]*$")

_TOKEN_SPLIT_RE = re.compile(r"[^A-Za-z0-9]+")


@dataclass(frozen=True)
class Curie:
    """Compact identifier of the form ``prefix:local_id``."""

    prefix: str
    local_id: str

    def __post_init__(self):
        if not self.prefix or not self.local_id:
            raise ValueError(f"empty CURIE part in {self.prefix!r}:{self.local_id!r}")
        if ":" in self.prefix or ":" in self.local_id:
            raise ValueError(f"CURIE parts may not contain colons: {self}")

    @classmethod
    def parse(cls, text: str) -> "Curie":
        prefix, sep, local = text.partition(":")
        if not sep:
            raise ValueError(f"not a CURIE (no colon): {text!r}")
        return cls(prefix.strip(), local.strip())

    def __str__(self) -> str:
        return f"{self.prefix}:{self.local_id}"


def looks_like_curie(text: str) -> bool:
    prefix, sep, local = text.partition(":")
    return bool(sep and prefix.strip() and local.strip())


@dataclass(frozen=True)
class Relationship:
    """One edge of a term: a predicate symbol pointing at a target symbol."""

    predicate: Symbol
    target: Symbol

    def __post_init__(self):
        if not self.predicate or not self.target:
            raise ValueError("relationship predicate and target must be non-empty")


@dataclass(frozen=True)
class TermObject:
    """One ontology term in symbol space.

    ``relationships`` and ``logical_definitions`` are stored as tuples so
    terms are hashable and safe to share across threads.
    """

    id: Symbol
    label: str
    original_id: Curie | None = None
    definition: str | None = None
    relationships: tuple[Relationship, ...] = ()
    logical_definitions: tuple[Relationship, ...] | None = None
    created_date: date | None = None

    def __post_init__(self):
        seen = set()
        for rel in self.relationships:
            if rel in seen:
                raise ValueError(f"duplicate relationship {rel} on term {self.id}")
            seen.add(rel)


def is_genus_differentia(rels: tuple[Relationship, ...]) -> bool:
    """True when exactly one entry is the genus (a SubClassOf edge)."""
    return sum(1 for r in rels if r.predicate == SUBCLASS_OF) == 1


def to_symbol(label: str) -> Symbol:
    """Camel-case a label into a symbol.

    Tokens are split on any non-alphanumeric character; the first
    alphabetic character of each token is uppercased and the rest of the
    token is preserved, so re-applying the function to its own output is
    a no-op. A symbol that would start with a digit gets an ``N`` prefix.
    """
    tokens = [t for t in _TOKEN_SPLIT_RE.split(label) if t]
    if not tokens:
        raise InvalidLabel(f"label {label!r} has no alphanumeric characters")
    parts = []
    for token in tokens:
        for i, ch in enumerate(token):
            if ch.isalpha():
                token = token[:i] + ch.upper() + token[i + 1 :]
                break
        parts.append(token)
    symbol = "".join(parts)
    if symbol[0].isdigit():
        symbol = "N" + symbol
    return symbol


def curie_fallback_symbol(curie: Curie) -> Symbol:
    """Symbol for a target CURIE whose label is unknown anywhere."""
    clean = _TOKEN_SPLIT_RE.sub("", curie.prefix), _TOKEN_SPLIT_RE.sub("", curie.local_id)
    return f"Curie_{clean[0]}_{clean[1]}"


@dataclass
class SymbolTable:
    """Bijection between CURIEs and symbols, with collision bookkeeping."""

    forward: dict[Curie, Symbol] = field(default_factory=dict)
    reverse: dict[Symbol, Curie] = field(default_factory=dict)
    collisions: list[tuple[Curie, Symbol]] = field(default_factory=list)

    def register(self, curie: Curie, label: str) -> Symbol:
        """Register ``curie`` under the symbol derived from ``label``.

        On a collision with a symbol already bound to a different CURIE,
        the smallest integer suffix >= 2 that frees the symbol is
        appended and the event is recorded in ``collisions``.
        """
        if curie in self.forward:
            raise DuplicateCurie(f"{curie} already registered as {self.forward[curie]}")
        base = to_symbol(label)
        symbol = base
        suffix = 2
        while symbol in self.reverse:
            symbol = f"{base}{suffix}"
            suffix += 1
        if symbol != base:
            self.collisions.append((curie, symbol))
        self.forward[curie] = symbol
        self.reverse[symbol] = curie
        return symbol

    def register_fallback(self, curie: Curie) -> Symbol:
        """Register a CURIE with no known label under its fallback symbol."""
        if curie in self.forward:
            raise DuplicateCurie(f"{curie} already registered as {self.forward[curie]}")
        base = curie_fallback_symbol(curie)
        symbol = base
        suffix = 2
        while symbol in self.reverse:
            symbol = f"{base}{suffix}"
            suffix += 1
        if symbol != base:
            self.collisions.append((curie, symbol))
        self.forward[curie] = symbol
        self.reverse[symbol] = curie
        return symbol

    def symbol_for(self, curie: Curie) -> Symbol | None:
        return self.forward.get(curie)

    def curie_for(self, symbol: Symbol) -> Curie | None:
        return self.reverse.get(symbol)

    def __contains__(self, curie: Curie) -> bool:
        return curie in self.forward

    def __len__(self) -> int:
        return len(self.forward)


def register_term(table: SymbolTable, curie: Curie, label: str) -> Symbol:
    """Functional alias for :meth:`SymbolTable.register`."""
    return table.register(curie, label)


@dataclass
class OntologyGraph:
    """Directed labeled multigraph over term symbols.

    ``out_edges`` maps a subject to a list of (predicate, object) pairs;
    the flat ``edges`` set guarantees deduplication.
    """

    nodes: set[Symbol] = field(default_factory=set)
    edges: set[tuple[Symbol, Symbol, Symbol]] = field(default_factory=set)
    out_edges: dict[Symbol, list[tuple[Symbol, Symbol]]] = field(default_factory=dict)

    def add_edge(self, subject: Symbol, predicate: Symbol, obj: Symbol) -> None:
        self.nodes.add(subject)
        self.nodes.add(obj)
        edge = (subject, predicate, obj)
        if edge not in self.edges:
            self.edges.add(edge)
            self.out_edges.setdefault(subject, []).append((predicate, obj))

    def with_extra_edges(self, extra: list[tuple[Symbol, Symbol, Symbol]]) -> "OntologyGraph":
        """Copy of the graph with additional edges (used to add gold edges)."""
        g = OntologyGraph(set(self.nodes), set(), {})
        for s, p, o in self.edges:
            g.add_edge(s, p, o)
        for s, p, o in extra:
            g.add_edge(s, p, o)
        return g


def build_graph(terms: list[TermObject]) -> OntologyGraph:
    """Graph over all term ids and relationship targets.

    Dangling targets (no term of their own) become leaf nodes.
    """
    graph = OntologyGraph()
    for term in terms:
        graph.nodes.add(term.id)
        for rel in term.relationships:
            graph.add_edge(term.id, rel.predicate, rel.target)
    return graph


def is_more_general(
    graph: OntologyGraph, subject: Symbol, predicate: Symbol, target: Symbol
) -> bool:
    """True iff ``target`` is reachable from ``subject`` via a directed path
    of length >= 1 using only SubClassOf edges and ``predicate`` edges.

    Breadth-first search with a visited set; cycles are tolerated. A
    query with ``target == subject`` is true only via a genuine cycle.
    """
    allowed = {SUBCLASS_OF, predicate}
    queue: deque[Symbol] = deque()
    visited: set[Symbol] = set()
    for pred, obj in graph.out_edges.get(subject, ()):
        if pred in allowed and obj not in visited:
            visited.add(obj)
            queue.append(obj)
    while queue:
        node = queue.popleft()
        if node == target:
            return True
        for pred, obj in graph.out_edges.get(node, ()):
            if pred in allowed and obj not in visited:
                visited.add(obj)
                queue.append(obj)
    return False


# --- canonical term JSON (one object per line in term JSONL files) ---

TERM_FIELDS = (
    "id",
    "original_id",
    "label",
    "definition",
    "relationships",
    "logical_definitions",
    "created_date",
)


def term_to_dict(term: TermObject) -> dict:
    """Canonical JSON dict with fields in the documented order."""
    out: dict = {"id": term.id}
    if term.original_id is not None:
        out["original_id"] = str(term.original_id)
    out["label"] = term.label
    if term.definition is not None:
        out["definition"] = term.definition
    out["relationships"] = [
        {"predicate": r.predicate, "target": r.target} for r in term.relationships
    ]
    if term.logical_definitions is not None:
        out["logical_definitions"] = [
            {"predicate": r.predicate, "target": r.target}
            for r in term.logical_definitions
        ]
    if term.created_date is not None:
        out["created_date"] = term.created_date.isoformat()
    return out


def term_from_dict(obj: dict) -> TermObject:
    if "id" not in obj or "label" not in obj:
        raise SchemaError("term object requires id and label")
    rels = tuple(
        Relationship(r["predicate"], r["target"]) for r in obj.get("relationships", [])
    )
    logical = obj.get("logical_definitions")
    if logical is not None:
        logical = tuple(Relationship(r["predicate"], r["target"]) for r in logical)
    created = obj.get("created_date")
    if created is not None:
        created = date.fromisoformat(created[:10])
    original = obj.get("original_id")
    if original is not None:
        original = Curie.parse(original)
    return TermObject(
        id=obj["id"],
        label=obj["label"],
        original_id=original,
        definition=obj.get("definition"),
        relationships=rels,
        logical_definitions=logical,
        created_date=created,
    )


def dump_terms_jsonl(terms: list[TermObject], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for term in terms:
            fh.write(json.dumps(term_to_dict(term), ensure_ascii=False) + "\n")


def load_terms_jsonl(path) -> list[TermObject]:
    terms = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                terms.append(term_from_dict(json.loads(line)))
    return terms
