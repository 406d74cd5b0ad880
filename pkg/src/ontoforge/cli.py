"""Command-line surface: index, complete, and the eval subcommands.

Exit codes: 0 success, 1 runtime failure, 2 usage error. All outputs
are JSON Lines; wall-clock timestamps are confined to the run manifest
so identical runs produce byte-identical primary outputs.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import date

from . import completion as comp
from . import evaluation as ev
from .config import (
    Config,
    budget_from_config,
    embed_provider_from_config,
    llm_provider_from_config,
    load_config,
)
from .embed import EmbeddingProviderSpec, embed_batch, serialize_term
from .errors import OntoforgeError, ParseError, SchemaError
from .github_issues import read_issue_cache, serialize_document
from .ingest import (
    apply_date_sidecar,
    canonicalize,
    jsonl_is_raw,
    load_date_sidecar,
    load_label_map,
    load_terms_auto,
    parse_ontology_file,
)
from .manifest import RunManifest, hash_text, manifest_path_for
from .model import (
    Relationship,
    TermObject,
    dump_terms_jsonl,
    load_terms_jsonl,
    term_to_dict,
)
from .vstore import (
    CollectionItem,
    HnswParams,
    build_collection,
    collection_exists,
    load_collection,
    save_collection,
)


def _config_from_args(args) -> Config:
    config = load_config(getattr(args, "config", None))
    for override in getattr(args, "set", None) or []:
        key, sep, value = override.partition("=")
        if not sep:
            raise OntoforgeError(f"--set needs key=value, got {override!r}")
        config.override(key.strip(), value.strip())
    if getattr(args, "llm_script", None):
        config.override("llm.script_path", args.llm_script)
    return config


def _doc_payload(doc) -> str:
    return json.dumps(
        {"doc_id": doc.doc_id, "source": doc.source, "title": doc.title, "body": doc.body},
        ensure_ascii=False,
    )


def cmd_index(args) -> int:
    config = _config_from_args(args)
    provider = embed_provider_from_config(config)
    if collection_exists(args.store, args.collection) and not args.force:
        print(
            f"collection {args.collection!r} already exists in {args.store}; "
            "pass --force to re-index",
            file=sys.stderr,
        )
        return 1

    params = HnswParams(seed=args.seed)
    embed_meta = {
        "kind": provider.kind,
        "model_name": provider.model_name,
        "endpoint": provider.endpoint,
        "dim": provider.dim,
    }
    if args.format == "issues":
        docs = []
        for path in args.files:
            docs.extend(read_issue_cache(path))
        texts = [serialize_document(d) for d in docs]
        vectors = embed_batch(provider, texts)
        items = [
            CollectionItem(d.doc_id, _doc_payload(d), v) for d, v in zip(docs, vectors)
        ]
        metadata = {"kind": "issues", "embed": embed_meta}
        collection = build_collection(
            items, params, name=args.collection, metadata=metadata
        )
        save_collection(collection, args.store)
        print(f"indexed {len(items)} documents into {args.collection} (dim {provider.dim})")
        return 0

    label_map = load_label_map(args.labels) if args.labels else {}
    terms: list[TermObject] = []
    raw_files = [
        path
        for path in args.files
        if args.format == "obo" or jsonl_is_raw(path)
    ]
    if raw_files:
        records = []
        for path in raw_files:
            records.extend(parse_ontology_file(path, args.format))
        if args.dates:
            apply_date_sidecar(records, load_date_sidecar(args.dates))
        canonical, _table = canonicalize(records, label_map)
        terms.extend(canonical)
    for path in args.files:
        if path not in raw_files:  # already in symbol space
            terms.extend(load_terms_jsonl(path))

    universe = set()
    predicates = set()
    for term in terms:
        universe.add(term.id)
        for rel in term.relationships:
            universe.add(rel.target)
            predicates.add(rel.predicate)
        for rel in term.logical_definitions or ():
            universe.add(rel.target)
            predicates.add(rel.predicate)

    texts = [serialize_term(t) for t in terms]
    vectors = embed_batch(provider, texts)
    items = [
        CollectionItem(t.id, json.dumps(term_to_dict(t), ensure_ascii=False), v)
        for t, v in zip(terms, vectors)
    ]
    metadata = {
        "kind": "terms",
        "embed": embed_meta,
        "symbol_universe": sorted(universe),
        "predicate_whitelist": sorted(predicates),
    }
    collection = build_collection(items, params, name=args.collection, metadata=metadata)
    save_collection(collection, args.store)
    print(f"indexed {len(items)} terms into {args.collection} (dim {provider.dim})")
    return 0


def _embed_provider_for_collection(collection, config: Config) -> EmbeddingProviderSpec:
    """Prefer the provider recorded at index time so dims always match."""
    meta = collection.metadata.get("embed")
    if meta:
        return EmbeddingProviderSpec(
            kind=meta["kind"],
            model_name=meta["model_name"],
            endpoint=meta.get("endpoint"),
            dim=meta["dim"],
        )
    return embed_provider_from_config(config)


def _parse_query_obj(obj: dict, line_no: int | None = None) -> comp.PartialTerm:
    def rels(name):
        value = obj.get(name)
        if value is None:
            return None
        return tuple(Relationship(r["predicate"], r["target"]) for r in value)

    if "mask" not in obj:
        raise SchemaError("query object missing mask", line_no)
    try:
        return comp.PartialTerm(
            label=obj.get("label"),
            definition=obj.get("definition"),
            relationships=rels("relationships"),
            logical_definitions=rels("logical_definitions"),
            mask=frozenset(obj["mask"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"bad query object: {exc}", line_no) from exc


def _query_to_dict(query: comp.PartialTerm) -> dict:
    out = {}
    for name in ("label", "definition"):
        value = getattr(query, name)
        if value is not None:
            out[name] = value
    for name in ("relationships", "logical_definitions"):
        value = getattr(query, name)
        if value is not None:
            out[name] = [{"predicate": r.predicate, "target": r.target} for r in value]
    out["mask"] = sorted(query.mask)
    return out


def _run_completions(queries, subjects, args, config: Config) -> int:
    """Shared body of ``complete`` and ``eval run``."""
    term_collection = load_collection(args.store, args.collection)
    issue_collection = None
    if args.github:
        if not collection_exists(args.store, args.issue_collection):
            print(
                f"--github set but issue collection {args.issue_collection!r} "
                f"does not exist in {args.store}",
                file=sys.stderr,
            )
            return 1
        issue_collection = load_collection(args.store, args.issue_collection)

    embed_provider = _embed_provider_for_collection(term_collection, config)
    llm_provider = llm_provider_from_config(config)
    template = comp.default_prompt_template()
    options = comp.CompletionOptions(
        budget=budget_from_config(config),
        mmr_lambda=config.getfloat("retrieval.mmr_lambda"),
        candidate_multiplier=config.getint("retrieval.candidate_multiplier"),
        use_github=args.github,
        github_docs=config.getint("retrieval.github_docs"),
        background=args.background,
        prompt_template=template,
    )
    config_hash = config.hash()
    template_hash = hash_text(template)

    def run_one(query):
        try:
            done = comp.complete_term(
                term_collection, issue_collection, embed_provider, llm_provider, query, options
            )
            return {"completed": done, "error": None}
        except OntoforgeError as exc:
            return {"completed": None, "error": f"{type(exc).__name__}: {exc}"}

    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(run_one, queries))
    else:
        results = [run_one(q) for q in queries]

    completed_count = 0
    with open(args.out, "w", encoding="utf-8") as fh:
        for query, subject, result in zip(queries, subjects, results):
            record = {
                "subject": subject,
                "query": _query_to_dict(query),
                "config_hash": config_hash,
                "prompt_template_hash": template_hash,
            }
            if result["completed"] is not None:
                record.update(comp.completed_to_dict(result["completed"]))
                completed_count += 1
            else:
                record["error"] = result["error"]
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")

    RunManifest(
        config_hash=config_hash,
        prompt_template_hash=template_hash,
        embed_provider={
            "kind": embed_provider.kind,
            "model_name": embed_provider.model_name,
            "dim": embed_provider.dim,
        },
        llm_provider={
            "kind": llm_provider.kind,
            "model_name": llm_provider.model_name,
            "script_path": llm_provider.script_path,
        },
        store_dir=args.store,
        collections=[args.collection] + ([args.issue_collection] if args.github else []),
        seed=None,
    ).write(manifest_path_for(args.out))

    print(f"completed {completed_count}/{len(queries)} terms -> {args.out}")
    return 0 if completed_count >= 1 else 1


def cmd_complete(args) -> int:
    config = _config_from_args(args)
    queries = []
    if args.label:
        if not args.mask:
            print("--label requires --mask", file=sys.stderr)
            return 2
        try:
            queries.append(
                comp.PartialTerm(label=args.label, mask=frozenset(args.mask.split(",")))
            )
        except ValueError as exc:
            print(f"bad --mask: {exc}", file=sys.stderr)
            return 2
    elif args.query_file:
        with open(args.query_file, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"malformed query line: {exc}", line_no) from exc
                queries.append(_parse_query_obj(obj, line_no))
    else:
        print("provide --label or --query-file", file=sys.stderr)
        return 2
    subjects = [q.label for q in queries]
    return _run_completions(queries, subjects, args, config)


def cmd_eval_split(args) -> int:
    label_map = load_label_map(args.labels) if args.labels else {}
    terms = load_terms_auto(args.terms, label_map)
    spec = ev.SplitSpec(cutoff_date=date.fromisoformat(args.cutoff), n_test=args.n_test)
    core, test = ev.split_test_set(terms, spec, args.seed)
    dump_terms_jsonl(core, args.core_out)
    dump_terms_jsonl(test, args.test_out)
    print(f"split {len(terms)} terms -> core {len(core)}, test {len(test)}")
    return 0


def cmd_eval_run(args) -> int:
    config = _config_from_args(args)
    gold = load_terms_jsonl(args.test)
    queries = []
    subjects = []
    skipped = 0
    for term in gold:
        try:
            queries.append(ev.mask_term(term, args.task))
        except OntoforgeError as exc:
            print(f"skipping {term.id}: {exc}", file=sys.stderr)
            skipped += 1
            continue
        subjects.append(term.id)
    if skipped:
        print(f"skipped {skipped} terms without the {args.task} gold field", file=sys.stderr)
    if not queries:
        print("no test terms carry the gold field for this task", file=sys.stderr)
        return 1
    return _run_completions(queries, subjects, args, config)


def _load_pred_records(path) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def cmd_eval_score(args) -> int:
    gold_terms = {t.id: t for t in load_terms_jsonl(args.gold)}
    core_terms = load_terms_jsonl(args.core)
    records = _load_pred_records(args.pred)

    if args.task == "definition":
        print(
            "definition quality is scored through the blinded sheets workflow "
            "(sheets-make / sheets-ingest / report)",
            file=sys.stderr,
        )
        return 2

    report: dict = {"task": args.task, "per_term": {}}
    if args.task == "relationships":
        ledger = ev.ScoreLedger()
        for record in records:
            if record.get("error"):
                continue
            subject = record["subject"]
            gold_term = gold_terms.get(subject)
            if gold_term is None:
                continue
            pred = [
                Relationship(r["predicate"], r["target"])
                for r in record["term"]["relationships"]
            ]
            graph = ev.scoring_graph(core_terms, gold_term)
            tp, fp, fn = ev.score_relationships(
                pred, list(gold_term.relationships), graph, gold_term.id
            )
            ledger.add_term(gold_term.id, tp, fp, fn)
        metrics = ev.aggregate_metrics(ledger)
        report["per_term"] = {
            term: {"tp": v[0], "fp": v[1], "fn": v[2]} for term, v in ledger.per_term.items()
        }
        report["totals"] = {"tp": ledger.tp, "fp": ledger.fp, "fn": ledger.fn}
        report["metrics"] = {
            "precision": metrics.precision,
            "recall": metrics.recall,
            "f1": metrics.f1,
        }
        report["reference"] = [
            {
                "method": m,
                "model": mo,
                "task": t,
                "precision": p,
                "recall": r,
                "f1": f,
            }
            for m, mo, t, p, r, f in ev.REFERENCE_RELATIONSHIP_RESULTS
        ]
        report["reference_kge_hits_at_1"] = ev.REFERENCE_KGE_HITS_AT_1
    else:  # logical_definition
        exact_count = 0
        jaccards = []
        for record in records:
            if record.get("error"):
                continue
            subject = record["subject"]
            gold_term = gold_terms.get(subject)
            if gold_term is None or not gold_term.logical_definitions:
                continue
            pred = [
                Relationship(r["predicate"], r["target"])
                for r in record["term"].get("logical_definitions") or []
            ]
            scored = ev.score_logical_definitions(pred, list(gold_term.logical_definitions))
            report["per_term"][subject] = scored
            exact_count += 1 if scored["exact"] else 0
            jaccards.append(scored["jaccard"])
        n = len(report["per_term"])
        report["totals"] = {
            "terms": n,
            "exact_rate": exact_count / n if n else 0.0,
            "mean_jaccard": sum(jaccards) / n if n else 0.0,
        }

    with open(args.report_out, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if "metrics" in report:
        m = report["metrics"]
        print(
            f"precision={m['precision']:.3f} recall={m['recall']:.3f} f1={m['f1']:.3f}"
        )
    else:
        print(json.dumps(report["totals"]))
    return 0


def cmd_eval_sheets_make(args) -> int:
    definitions: dict[tuple[str, str, str], str] = {}
    for spec in args.pred:
        label, sep, path = spec.partition("=")
        if not sep or "/" not in label:
            print(f"--pred needs method/model=path, got {spec!r}", file=sys.stderr)
            return 2
        method, model = label.split("/", 1)
        for record in _load_pred_records(path):
            if record.get("error"):
                continue
            definition = record["term"].get("definition")
            if definition:
                definitions[(method, model, record["subject"])] = definition
    gold_terms = load_terms_jsonl(args.gold)
    gold = {t.id: t.definition for t in gold_terms if t.definition}
    labels = {t.id: t.label for t in gold_terms}
    rows, key = ev.make_eval_sheets(definitions, gold, args.seed, labels=labels)
    ev.write_sheet(rows, args.sheet_out)
    ev.write_blind_key(key, args.key_out)
    print(f"wrote {len(rows)} blinded rows -> {args.sheet_out}")
    return 0


def cmd_eval_sheets_ingest(args) -> int:
    rows = ev.read_sheet(args.sheet)
    key = ev.read_blind_key(args.key)
    records, rejected = ev.ingest_eval_sheets(rows, key, evaluator=args.evaluator)
    with open(args.out, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
    for row_id, reason in rejected:
        print(f"rejected {row_id}: {reason}", file=sys.stderr)
    print(f"ingested {len(records)} rows ({len(rejected)} rejected) -> {args.out}")
    return 0


def cmd_eval_report(args) -> int:
    if args.published:
        records = ev.load_published_scores(args.published)
    else:
        records = _load_pred_records(args.scores)
    report = ev.summarize_scores(records)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    text = ev.render_report_text(report)
    if args.text_out:
        with open(args.text_out, "w", encoding="utf-8") as fh:
            fh.write(text)
    print(text, end="")
    return 0


def _add_common_complete_args(parser) -> None:
    parser.add_argument("--store", required=True, help="store directory")
    parser.add_argument("--collection", default="terms", help="term collection name")
    parser.add_argument("--issue-collection", default="issues")
    parser.add_argument("--github", action="store_true", help="retrieve tracker documents")
    parser.add_argument("--background", action="store_true", help="auto-generated background block")
    parser.add_argument("--config", help="key=value config file")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE", help="config override")
    parser.add_argument("--llm-script", help="scripted provider response file")
    parser.add_argument("--jobs", type=int, default=1, help="concurrent completions")
    parser.add_argument("--out", required=True, help="output JSONL path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ontoforge")
    sub = parser.add_subparsers(dest="command", required=True)

    p_index = sub.add_parser("index", help="parse, embed, and index an ontology or issue cache")
    p_index.add_argument("files", nargs="+", help="input file(s)")
    p_index.add_argument("--format", required=True, choices=["obo", "jsonl", "issues"])
    p_index.add_argument("--store", required=True)
    p_index.add_argument("--collection", default="terms")
    p_index.add_argument("--labels", help="TSV sidecar: CURIE<TAB>label for foreign ids")
    p_index.add_argument("--dates", help="TSV sidecar: CURIE<TAB>date")
    p_index.add_argument("--seed", type=int, default=1337, help="index build seed")
    p_index.add_argument("--force", action="store_true")
    p_index.add_argument("--config", help="key=value config file")
    p_index.add_argument("--set", action="append", metavar="KEY=VALUE")
    p_index.set_defaults(func=cmd_index)

    p_complete = sub.add_parser("complete", help="complete partial terms against a store")
    p_complete.add_argument("--label", help="single query label")
    p_complete.add_argument("--mask", help="comma-separated fields to generate")
    p_complete.add_argument("--query-file", help="JSONL of partial term queries")
    _add_common_complete_args(p_complete)
    p_complete.set_defaults(func=cmd_complete)

    p_eval = sub.add_parser("eval", help="evaluation workflow")
    eval_sub = p_eval.add_subparsers(dest="eval_command", required=True)

    p_split = eval_sub.add_parser("split", help="date-based core/test split")
    p_split.add_argument("--terms", required=True)
    p_split.add_argument("--labels", help="TSV sidecar: CURIE<TAB>label for foreign ids")
    p_split.add_argument("--cutoff", required=True, help="ISO date, e.g. 2022-11-01")
    p_split.add_argument("--n-test", type=int, default=50)
    p_split.add_argument("--seed", type=int, required=True)
    p_split.add_argument("--core-out", required=True)
    p_split.add_argument("--test-out", required=True)
    p_split.set_defaults(func=cmd_eval_split)

    p_run = eval_sub.add_parser("run", help="mask and complete the test set")
    p_run.add_argument("--test", required=True, help="test term JSONL")
    p_run.add_argument("--task", required=True, choices=list(ev.MASK_TASKS))
    _add_common_complete_args(p_run)
    p_run.set_defaults(func=cmd_eval_run)

    p_score = eval_sub.add_parser("score", help="score predictions against gold")
    p_score.add_argument("--pred", required=True, help="completion record JSONL")
    p_score.add_argument("--gold", required=True, help="gold test term JSONL")
    p_score.add_argument("--core", required=True, help="core term JSONL")
    p_score.add_argument("--task", required=True, choices=list(ev.MASK_TASKS))
    p_score.add_argument("--report-out", required=True)
    p_score.set_defaults(func=cmd_eval_score)

    p_make = eval_sub.add_parser("sheets-make", help="build blinded evaluation sheets")
    p_make.add_argument(
        "--pred",
        action="append",
        required=True,
        metavar="METHOD/MODEL=PATH",
        help="completion records to include (repeatable)",
    )
    p_make.add_argument("--gold", required=True)
    p_make.add_argument("--seed", type=int, required=True)
    p_make.add_argument("--sheet-out", required=True)
    p_make.add_argument("--key-out", required=True)
    p_make.set_defaults(func=cmd_eval_sheets_make)

    p_ingest = eval_sub.add_parser("sheets-ingest", help="unblind scored sheets")
    p_ingest.add_argument("--sheet", required=True)
    p_ingest.add_argument("--key", required=True)
    p_ingest.add_argument("--evaluator", default="anonymous")
    p_ingest.add_argument("--out", required=True)
    p_ingest.set_defaults(func=cmd_eval_sheets_ingest)

    p_report = eval_sub.add_parser("report", help="summarize ingested scores")
    p_report.add_argument("--scores", help="ingested score JSONL")
    p_report.add_argument("--published", help="external CSV/TSV score table")
    p_report.add_argument("--out", required=True)
    p_report.add_argument("--text-out")
    p_report.set_defaults(func=cmd_eval_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except OntoforgeError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"IoError: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
