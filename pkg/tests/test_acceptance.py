"""Acceptance suite: one test per release criterion.

Each test prints a PASS line with its measured numbers so a plain
``pytest -s tests/test_acceptance.py`` doubles as the release report.
Criterion 8 needs the externally published score table and is skipped
unless ONTOFORGE_EVAL_DATASET points at a local copy.
"""

import json
import os
import random
import time

import numpy as np
import pytest

from conftest import TABLE1_JSONL, TABLE1_LABELS, TABLE1_OBO
from helpers import brute_force_score, random_graph_instance
from ontoforge import cli
from ontoforge import evaluation as ev
from ontoforge.data import TOY_QUERIES, TOY_RESPONSES
from ontoforge.errors import StoreIOError, VersionMismatch
from ontoforge.ingest import canonicalize, load_label_map, parse_obo_subset, parse_term_jsonl
from ontoforge.model import OntologyGraph, Relationship
from ontoforge.vstore import (
    CollectionItem,
    HnswParams,
    build_collection,
    exact_knn,
    load_collection,
    mmr_rerank,
    save_collection,
)


def test_criterion_1_metric_arithmetic():
    """Every derivable published F1 from its printed precision/recall."""
    start = time.monotonic()
    rows = ev.REFERENCE_RELATIONSHIP_RESULTS
    assert len(rows) == 7
    worst = 0.0
    for _method, _model, _task, precision, recall, printed_f1 in rows:
        f1 = ev.f1_score(precision, recall)
        worst = max(worst, abs(f1 - printed_f1))
        assert f1 == pytest.approx(printed_f1, abs=1e-3)
    # the two spotlighted rows
    assert ev.f1_score(0.889, 0.44) == pytest.approx(0.588, abs=1e-3)
    assert ev.f1_score(0.746, 0.392) == pytest.approx(0.514, abs=1e-3)
    elapsed = time.monotonic() - start
    assert elapsed < 1.0
    print(
        f"\nACCEPTANCE 1 PASS: 7/7 published F1 values reproduced to 3 d.p. "
        f"(worst gap {worst:.5f}, {elapsed * 1000:.0f} ms)"
    )


def test_criterion_2_scoring_oracle():
    """Four-step scorer equals the brute-force closure re-implementation."""
    start = time.monotonic()

    # the hand-derived generalization case
    graph = OntologyGraph()
    graph.add_edge("X", "SubClassOf", "B")
    graph.add_edge("B", "SubClassOf", "A")
    gold = [Relationship("SubClassOf", "B")]
    pred = [Relationship("SubClassOf", "A")]
    assert ev.score_relationships(pred, gold, graph, "X") == (0.0, 0.0, 0.5)

    rng = random.Random(0xACCE97)
    mismatches = 0
    for _ in range(1000):
        edges, subject, gold, pred = random_graph_instance(rng, max_nodes=8, max_preds=4)
        g = OntologyGraph()
        for s, p, o in edges:
            g.add_edge(s, p, o)
        mine = ev.score_relationships(pred, gold, g, subject)
        reference = brute_force_score(pred, gold, edges, subject)
        if mine != reference:
            mismatches += 1
    elapsed = time.monotonic() - start
    assert mismatches == 0
    assert elapsed < 10.0
    print(
        f"\nACCEPTANCE 2 PASS: 1000/1000 random instances match the "
        f"brute-force scorer, incl. the (0, 0, 0.5) case ({elapsed:.1f} s)"
    )


def test_criterion_3_ann_recall():
    """HNSW recall@10 >= 0.95 vs exact search, defaults, 5000x256."""
    start = time.monotonic()
    rng = np.random.default_rng(42)
    vectors = rng.standard_normal((5000, 256)).astype(np.float32)
    vectors /= np.linalg.norm(vectors, axis=1, keepdims=True)
    items = [CollectionItem(f"v{i:05d}", "{}", vectors[i]) for i in range(5000)]
    collection = build_collection(items, HnswParams(seed=7))
    queries = rng.standard_normal((100, 256)).astype(np.float32)
    recalls = []
    for query in queries:
        approx = {hit.key for hit in collection.knn_query(query, 10)}
        exact = {hit.key for hit in exact_knn(items, query, 10)}
        recalls.append(len(approx & exact) / 10.0)
    recall = float(np.mean(recalls))
    elapsed = time.monotonic() - start
    assert recall >= 0.95
    assert elapsed < 60.0
    print(
        f"\nACCEPTANCE 3 PASS: recall@10 = {recall:.4f} over 100 queries, "
        f"build+query {elapsed:.1f} s"
    )


def test_criterion_4_mmr():
    """Lambda=1 order preservation over 500 lists; hand-traced example."""
    rng = random.Random(1234)
    np_rng = np.random.default_rng(1234)
    for _ in range(500):
        n = rng.randint(1, 25)
        sims = sorted((rng.uniform(-1, 1) for _ in range(n)), reverse=True)
        candidates = [(f"c{i}", np_rng.standard_normal(6), sims[i]) for i in range(n)]
        keys = mmr_rerank(np_rng.standard_normal(6), candidates, 1.0, n)
        assert keys == [f"c{i}" for i in range(n)]

    query = np.array([1.0, 0.0])
    candidates = [
        ("c1", np.array([1.0, 0.0]), 1.0),
        ("c2", np.array([1.0, 0.0]), 1.0),
        ("c3", np.array([0.0, 1.0]), 0.0),
    ]
    assert mmr_rerank(query, candidates, 0.3, 2) == ["c1", "c3"]
    print(
        "\nACCEPTANCE 4 PASS: lambda=1 preserved order on 500 random lists; "
        "diversification trace selects [c1, c3]"
    )


def test_criterion_5_table_round_trip():
    """OBO and JSONL panels canonicalize identically with exact symbols."""
    labels = load_label_map(TABLE1_LABELS)
    with open(TABLE1_OBO, "rb") as fh:
        obo_terms, obo_table = canonicalize(parse_obo_subset(fh.read()), labels)
    with open(TABLE1_JSONL, "rb") as fh:
        jsonl_terms, _ = canonicalize(parse_term_jsonl(fh.read()), labels)
    assert obo_terms == jsonl_terms
    term = obo_terms[0]
    assert term.id == "MitralCell"
    assert term.relationships[0].target == "Interneuron"
    assert term.relationships[1].target == "OlfactoryBulbMitralCellLayer"
    assert obo_table.symbol_for(term.original_id) == "MitralCell"
    print(
        "\nACCEPTANCE 5 PASS: OBO and JSONL routes agree; symbols "
        "MitralCell / Interneuron / OlfactoryBulbMitralCellLayer"
    )


def test_criterion_6_end_to_end_determinism(toy_store, tmp_path):
    """Two scripted runs over the toy corpus are byte-identical."""
    outputs = []
    for name in ("run_a.jsonl", "run_b.jsonl"):
        out = tmp_path / name
        rc = cli.main(
            [
                "complete",
                "--store",
                str(toy_store),
                "--query-file",
                TOY_QUERIES,
                "--llm-script",
                TOY_RESPONSES,
                "--out",
                str(out),
            ]
        )
        assert rc == 0
        outputs.append(out.read_bytes())
    assert outputs[0] == outputs[1]

    records = [json.loads(line) for line in outputs[0].decode().splitlines()]
    invented = {"predicate": "SubClassOf", "target": "BodyJunction"}
    kept = [rel for record in records for rel in record["term"]["relationships"]]
    dropped = [rel for record in records for rel in record["dropped_relationships"]]
    assert invented not in kept
    assert invented in dropped
    print(
        "\nACCEPTANCE 6 PASS: byte-identical outputs across two runs; "
        "BodyJunction appears only in dropped_relationships"
    )


@pytest.mark.filterwarnings("ignore:Precision loss")
def test_criterion_7_blinded_workflow():
    """Sheets round-trip, synthetic Pearson r = 1, report shape."""
    definitions = {}
    for model in ("gpt-4", "gpt-3.5-turbo", "nous-hermes-13b"):
        for i in range(50):
            definitions[("DRAGON", model, f"Term{i}")] = f"generated {model} {i}"
    gold = {f"Term{i}": f"curated {i}" for i in range(50)}
    rows, key = ev.make_eval_sheets(definitions, gold, seed=99)
    assert len(rows) == 200

    for i, row in enumerate(rows):
        method, _model, _term = key[row.row_id]
        confidence = (i % 5) + 1
        row.confidence = confidence
        row.accuracy = (i % 3) + 2
        row.overall = confidence if method == "curator" else 1
    records, rejected = ev.ingest_eval_sheets(rows, key, evaluator="acceptance")
    assert rejected == []
    recovered = sorted((r["method"], r["model"], r["term"]) for r in records)
    expected = sorted(list(definitions) + [("curator", "human", t) for t in gold])
    assert recovered == expected

    report = ev.summarize_scores(records)
    assert report["confidence"]["pearson_r"] == pytest.approx(1.0, abs=1e-9)

    for row in report["methods"]:
        assert set(row) == {"method", "model", "accuracy", "score", "consistency", "n"}
    methods = {(m["method"], m["model"]) for m in report["methods"]}
    assert ("curator", "human") in methods
    assert len(methods) == 4
    print(
        "\nACCEPTANCE 7 PASS: (method, model, term) multiset recovered exactly; "
        f"Pearson r = {report['confidence']['pearson_r']:.12f}; report is methods x criteria"
    )


PUBLISHED_DATASET_ENV = "ONTOFORGE_EVAL_DATASET"


@pytest.mark.skipif(
    not os.path.exists(os.environ.get(PUBLISHED_DATASET_ENV, "")),
    reason=f"published expert-ranking table not present; set {PUBLISHED_DATASET_ENV}",
)
def test_criterion_8_published_dataset():
    """Re-derive the published per-source means from the released table."""
    records = ev.load_published_scores(os.environ[PUBLISHED_DATASET_ENV])
    report = ev.summarize_scores(records)
    by_source = {(m["method"], m["model"]): m for m in report["methods"]}
    curator = by_source[("curator", "human")]
    gpt4 = by_source[("DRAGON", "gpt-4")]
    assert curator["accuracy"] == pytest.approx(4.326, abs=0.005)
    assert gpt4["accuracy"] == pytest.approx(3.97, abs=0.005)
    assert report["confidence"]["pearson_r"] == pytest.approx(0.973, abs=0.02)
    print(
        "\nACCEPTANCE 8 PASS: published means reproduced "
        "(simple mean over rows convention)"
    )


def test_criterion_9_persistence(tmp_path):
    """1000-item save/load is query-exact; truncation is detected."""
    rng = np.random.default_rng(31337)
    vectors = rng.standard_normal((1000, 64)).astype(np.float32)
    items = [
        CollectionItem(f"item{i:04d}", json.dumps({"n": i}), vectors[i])
        for i in range(1000)
    ]
    collection = build_collection(items, HnswParams(seed=3), name="persist")
    save_collection(collection, str(tmp_path))
    loaded = load_collection(str(tmp_path), "persist")
    for _ in range(50):
        query = rng.standard_normal(64)
        before = collection.knn_query(query, 10)
        after = loaded.knn_query(query, 10)
        assert [h.key for h in before] == [h.key for h in after]
        assert [h.similarity for h in before] == [h.similarity for h in after]

    vec_path = tmp_path / "persist.vec"
    data = vec_path.read_bytes()
    vec_path.write_bytes(data[: len(data) // 2])
    with pytest.raises((StoreIOError, VersionMismatch)):
        load_collection(str(tmp_path), "persist")
    print(
        "\nACCEPTANCE 9 PASS: 50/50 queries identical after reload; "
        "truncated vector file rejected"
    )
