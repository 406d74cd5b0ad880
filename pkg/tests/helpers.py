"""Independent oracles and generators shared by the test modules.

Everything here is deliberately implemented differently from the
package code: reachability comes from boolean matrix powers rather
than BFS, and the relationship scorer re-derives the four-step rule on
top of that closure.
"""

from __future__ import annotations

import random

from ontoforge.ingest import RawTermRecord
from ontoforge.model import Curie, Relationship


def closure_reachable(edges, allowed, subject, target) -> bool:
    """Reachability over label-filtered edges via matrix powers.

    True iff a directed path of length >= 1 using edges whose predicate
    is in ``allowed`` leads from subject to target.
    """
    nodes = sorted({s for s, _, _ in edges} | {o for _, _, o in edges} | {subject, target})
    index = {n: i for i, n in enumerate(nodes)}
    n = len(nodes)
    adj = [[False] * n for _ in range(n)]
    for s, p, o in edges:
        if p in allowed:
            adj[index[s]][index[o]] = True

    def matmul(a, b):
        out = [[False] * n for _ in range(n)]
        for i in range(n):
            for k in range(n):
                if a[i][k]:
                    row_b = b[k]
                    row_o = out[i]
                    for j in range(n):
                        if row_b[j]:
                            row_o[j] = True
        return out

    reach = [row[:] for row in adj]
    power = adj
    for _ in range(n - 1):
        power = matmul(power, adj)
        for i in range(n):
            for j in range(n):
                reach[i][j] = reach[i][j] or power[i][j]
    return reach[index[subject]][index[target]]


def brute_force_score(pred, gold, edges, subject):
    """Re-derivation of the four-step relationship scoring rule."""
    pred_u = list(dict.fromkeys(pred))
    gold_u = list(dict.fromkeys(gold))
    exact = {p for p in pred_u if p in gold_u}
    rest = [p for p in pred_u if p not in exact]
    general = [
        p
        for p in rest
        if closure_reachable(edges, {"SubClassOf", p.predicate}, subject, p.target)
    ]
    general_predicates = {p.predicate for p in general}
    tp = float(len(exact))
    fp = float(len(rest) - len(general))
    fn = 0.0
    for g in gold_u:
        if g in exact:
            continue
        fn += 0.5 if g.predicate in general_predicates else 1.0
    return tp, fp, fn


def random_graph_instance(rng: random.Random, max_nodes=8, max_preds=4):
    """A random labeled graph plus a scoring instance over it."""
    n = rng.randint(2, max_nodes)
    nodes = [f"N{i}" for i in range(n)]
    predicates = ["SubClassOf", "PartOf", "HasPart", "RegulatedBy"][: rng.randint(1, 3)]
    edges = set()
    for _ in range(rng.randint(1, 2 * n)):
        s, o = rng.choice(nodes), rng.choice(nodes)
        if s != o or rng.random() < 0.2:  # occasional self loop
            edges.add((s, rng.choice(predicates), o))
    subject = rng.choice(nodes)
    gold = []
    seen = set()
    for _ in range(rng.randint(1, 3)):
        rel = Relationship(rng.choice(predicates), rng.choice(nodes))
        if rel not in seen:
            seen.add(rel)
            gold.append(rel)
    # gold edges always traversable from the subject
    edge_list = sorted(edges | {(subject, g.predicate, g.target) for g in gold})
    pred = []
    seen = set()
    for _ in range(rng.randint(0, 4)):
        if gold and rng.random() < 0.4:
            rel = rng.choice(gold)  # exact match
        else:
            rel = Relationship(rng.choice(predicates), rng.choice(nodes))
        if rel not in seen:
            seen.add(rel)
            pred.append(rel)
    return edge_list, subject, gold, pred


_WORDS = [
    "mitral",
    "cell",
    "layer",
    "olfactory",
    "bulb",
    "urine",
    "amino",
    "acid",
    "lymph",
    "node",
    "left",
    "right",
    "5-HT",
    "receptor",
    "DNA",
    "repair",
    "beta",
    "2",
]


def random_label(rng: random.Random) -> str:
    k = rng.randint(1, 4)
    sep = rng.choice([" ", " ", "-"])
    return sep.join(rng.choice(_WORDS) for _ in range(k))


def random_obo_records(rng: random.Random, count: int) -> list[RawTermRecord]:
    """Records covering the supported OBO tag subset, for round-trips."""
    from datetime import date, timedelta

    records = []
    for i in range(count):
        rels = []
        for j in range(rng.randint(0, 3)):
            predicate = rng.choice(["subClassOf", "RO:0002100", "BFO:0000050"])
            rels.append((predicate, Curie("TOY", f"{rng.randint(0, 99):07d}")))
        definition = None
        xrefs = []
        if rng.random() < 0.7:
            definition = f'A {random_label(rng)} with "quoted" text {i}.'
            if rng.random() < 0.5:
                xrefs = [f"PMID:{rng.randint(1, 9999)}"]
        created = None
        if rng.random() < 0.6:
            created = date(2020, 1, 1) + timedelta(days=rng.randint(0, 1500))
        records.append(
            RawTermRecord(
                curie=Curie("TOY", f"{1000 + i:07d}"),
                label=random_label(rng) or "term",
                definition=definition,
                raw_relationships=rels,
                created_date=created,
                definition_xrefs=xrefs,
            )
        )
    return records


def render_obo(records: list[RawTermRecord]) -> str:
    """Companion renderer for the supported subset (tests only)."""
    chunks = ["format-version: 1.2\n"]
    for record in records:
        lines = ["[Term]", f"id: {record.curie}", f"name: {record.label}"]
        if record.definition is not None:
            xref = f" [{', '.join(record.definition_xrefs)}]" if record.definition_xrefs else " []"
            escaped = record.definition.replace('"', '\\"')
            lines.append(f'def: "{escaped}"{xref}')
        for predicate, target in record.raw_relationships:
            if predicate == "subClassOf":
                lines.append(f"is_a: {target}")
            else:
                lines.append(f"relationship: {predicate} {target}")
        if record.created_date is not None:
            lines.append(f"creation_date: {record.created_date.isoformat()}")
        chunks.append("\n".join(lines) + "\n")
    return "\n".join(chunks)
