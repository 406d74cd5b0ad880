"""Test-set construction, scoring, metric aggregation, blinded sheets.

Relationship predictions are scored against the ontology's own edges:
exact predicate+target matches are true positives; a prediction whose
target is reachable from the subject over SubClassOf plus the
prediction's own predicate is "more general" and counts as neither a
true nor a false positive, while the gold edge it generalizes costs
half a false negative. Definition quality goes through a blinded
human-scoring workflow instead: shuffled score sheets with opaque row
ids, a separate key file, and ordinal 1-5 scores on three criteria.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from datetime import date

from scipy import stats

from .completion import PartialTerm
from .errors import (
    InsufficientNewTerms,
    MalformedGold,
    MissingGoldField,
    ScoreOutOfRange,
    UnknownRowId,
)
from .model import (
    OntologyGraph,
    Relationship,
    Symbol,
    TermObject,
    is_genus_differentia,
    is_more_general,
)

MASK_TASKS = ("relationships", "definition", "logical_definition")

# Published relationship-prediction results (method, model, subtask,
# precision, recall, f1); retained as report baselines only.
REFERENCE_RELATIONSHIP_RESULTS = [
    ("DRAGON", "gpt-3.5-turbo", "subclassof", 0.831, 0.352, 0.494),
    ("DRAGON", "gpt-4", "subclassof", 0.889, 0.44, 0.588),
    ("DRAGON", "nous-hermes-13b", "subclassof", 0.68, 0.273, 0.39),
    ("Reasoner", "n/a", "subclassof", 1.0, 0.337, 0.504),
    ("DRAGON", "gpt-3.5-turbo", "all", 0.746, 0.392, 0.514),
    ("DRAGON", "gpt-4", "all", 0.797, 0.456, 0.58),
    ("DRAGON", "nous-hermes-13b", "all", 0.597, 0.292, 0.392),
]

# Published Hits@1 for knowledge-graph-embedding baselines, by ontology.
REFERENCE_KGE_HITS_AT_1 = {
    "foodon": {"rdf2vec": 0.053, "owl2vec*": 0.143},
    "go": {"rdf2vec": 0.017, "owl2vec*": 0.076},
}

# Published effect of the auto-generated-background prompt variant on
# relationship prediction (method, model, precision, recall, f1).
REFERENCE_BACKGROUND_RESULTS = [
    ("RAG+background", "gpt-3.5-turbo", 0.782, 0.409, 0.537),
    ("RAG", "gpt-3.5-turbo", 0.746, 0.392, 0.514),
    ("RAG+background", "gpt-4", 0.726, 0.432, 0.541),
    ("RAG", "gpt-4", 0.797, 0.456, 0.58),
]


@dataclass(frozen=True)
class SplitSpec:
    cutoff_date: date
    n_test: int = 50

    def __post_init__(self):
        if self.n_test < 1:
            raise ValueError("n_test must be >= 1")


@dataclass
class ScoreLedger:
    """Weighted TP/FP/FN counts, per term and corpus-wide."""

    tp: float = 0.0
    fp: float = 0.0
    fn: float = 0.0
    per_term: dict[Symbol, tuple[float, float, float]] = field(default_factory=dict)

    def add_term(self, subject: Symbol, tp: float, fp: float, fn: float) -> None:
        self.per_term[subject] = (tp, fp, fn)
        self.tp += tp
        self.fp += fp
        self.fn += fn


@dataclass(frozen=True)
class Metrics:
    precision: float
    recall: float
    f1: float


def split_test_set(
    terms: list[TermObject], spec: SplitSpec, seed: int
) -> tuple[list[TermObject], list[TermObject]]:
    """Seeded (core, test) split over terms dated at or past the cutoff."""
    eligible = [
        i
        for i, term in enumerate(terms)
        if term.created_date is not None and term.created_date >= spec.cutoff_date
    ]
    if len(eligible) < spec.n_test:
        raise InsufficientNewTerms(available=len(eligible), requested=spec.n_test)
    rng = random.Random(seed)
    chosen = set(rng.sample(eligible, spec.n_test))
    test = [terms[i] for i in sorted(chosen)]
    core = [terms[i] for i in range(len(terms)) if i not in chosen]
    return core, test


def mask_term(term: TermObject, task: str) -> PartialTerm:
    """Build the prediction query for one gold term.

    Identifiers are always removed (the placeholder id is re-derived
    from the label downstream). The relationships task retains label
    and definition only; the definition task retains label,
    relationships, and logical definitions; the logical-definition task
    retains label, definition, and relationships.
    """
    if task not in MASK_TASKS:
        raise ValueError(f"unknown masking task {task!r}")
    if task == "relationships":
        if not term.relationships:
            raise MissingGoldField(f"term {term.id} has no relationships to predict")
        return PartialTerm(
            label=term.label,
            definition=term.definition,
            mask=frozenset({"relationships"}),
        )
    if task == "definition":
        if not term.definition:
            raise MissingGoldField(f"term {term.id} has no definition to predict")
        return PartialTerm(
            label=term.label,
            relationships=term.relationships,
            logical_definitions=term.logical_definitions,
            mask=frozenset({"definition"}),
        )
    if not term.logical_definitions:
        raise MissingGoldField(f"term {term.id} has no logical definition to predict")
    return PartialTerm(
        label=term.label,
        definition=term.definition,
        relationships=term.relationships,
        mask=frozenset({"logical_definitions"}),
    )


def scoring_graph(core_terms: list[TermObject], subject_gold: TermObject) -> OntologyGraph:
    """Core ontology graph plus the subject's own gold edges.

    Without the gold edges no path can leave a freshly masked subject
    and the more-general rule would be vacuous.
    """
    from .model import build_graph

    graph = build_graph(core_terms)
    for rel in subject_gold.relationships:
        graph.add_edge(subject_gold.id, rel.predicate, rel.target)
    return graph


def score_relationships(
    pred: list[Relationship],
    gold: list[Relationship],
    graph: OntologyGraph,
    subject: Symbol,
) -> tuple[float, float, float]:
    """Per-term (tp, fp, fn) under the four-step rule.

    1. exact predicate+target matches count one TP each;
    2. remaining predictions that are more general than the subject's
       position in the graph are set aside (neither TP nor FP);
    3. each unmatched gold edge costs 0.5 FN when a set-aside general
       prediction shares its predicate, else 1.0;
    4. every other prediction costs one FP.
    """
    gold_unique: list[Relationship] = []
    seen = set()
    for g in gold:
        if g not in seen:
            seen.add(g)
            gold_unique.append(g)
    pred_unique: list[Relationship] = []
    seen = set()
    for p in pred:
        if p not in seen:
            seen.add(p)
            pred_unique.append(p)

    gold_set = set(gold_unique)
    matched = set()
    remaining: list[Relationship] = []
    tp = 0.0
    for p in pred_unique:
        if p in gold_set and p not in matched:
            matched.add(p)
            tp += 1.0
        else:
            remaining.append(p)

    general_predicates = set()
    general_count = 0
    for p in remaining:
        if is_more_general(graph, subject, p.predicate, p.target):
            general_predicates.add(p.predicate)
            general_count += 1

    fn = 0.0
    for g in gold_unique:
        if g in matched:
            continue
        fn += 0.5 if g.predicate in general_predicates else 1.0

    fp = float(len(remaining) - general_count)
    return tp, fp, fn


def f1_score(precision: float, recall: float) -> float:
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def aggregate_metrics(ledger: ScoreLedger) -> Metrics:
    """Micro-aggregated precision/recall/F1.

    A 0/0 denominator yields 0, except the fully empty corpus (no
    predictions and no gold anywhere) which scores perfect by
    convention.
    """
    if ledger.tp == 0 and ledger.fp == 0 and ledger.fn == 0:
        return Metrics(1.0, 1.0, 1.0)
    precision = ledger.tp / (ledger.tp + ledger.fp) if ledger.tp + ledger.fp > 0 else 0.0
    recall = ledger.tp / (ledger.tp + ledger.fn) if ledger.tp + ledger.fn > 0 else 0.0
    return Metrics(precision, recall, f1_score(precision, recall))


def score_logical_definitions(
    pred: list[Relationship], gold: list[Relationship]
) -> dict:
    """Exact set match plus Jaccard overlap as a softer diagnostic."""
    if not gold:
        raise MalformedGold("gold logical definition is empty")
    if not is_genus_differentia(tuple(gold)):
        raise MalformedGold("gold logical definition is not genus-differentia shaped")
    pred_set = {(r.predicate, r.target) for r in pred}
    gold_set = {(r.predicate, r.target) for r in gold}
    union = pred_set | gold_set
    jaccard = len(pred_set & gold_set) / len(union) if union else 0.0
    return {"exact": pred_set == gold_set, "jaccard": jaccard}


# --- blinded definition-evaluation workflow ---

SHEET_HEADER = (
    "row_id",
    "term_label",
    "definition",
    "accuracy",
    "consistency",
    "overall",
    "confidence",
    "notes",
)

CURATOR_METHOD = "curator"
CURATOR_MODEL = "human"


@dataclass
class EvalSheetRow:
    row_id: str
    term_label: str
    definition_text: str
    accuracy: int | None = None
    consistency: int | None = None
    overall: int | None = None
    confidence: int | None = None
    notes: str = ""


def make_eval_sheets(
    definitions: dict[tuple[str, str, Symbol], str],
    gold: dict[Symbol, str],
    seed: int,
    labels: dict[Symbol, str] | None = None,
) -> tuple[list[EvalSheetRow], dict[str, tuple[str, str, Symbol]]]:
    """Shuffled, source-free score sheet rows plus the blind key.

    One row per generated definition and one per human-curated gold
    definition (method "curator"). Row ids are drawn from the seeded
    RNG, so the same seed reproduces the sheet exactly.
    """
    labels = labels or {}
    sources: list[tuple[tuple[str, str, Symbol], str]] = [
        (key, text) for key, text in definitions.items()
    ]
    sources.extend(
        ((CURATOR_METHOD, CURATOR_MODEL, term), text) for term, text in gold.items()
    )
    rng = random.Random(seed)
    rng.shuffle(sources)
    rows: list[EvalSheetRow] = []
    key: dict[str, tuple[str, str, Symbol]] = {}
    for source, text in sources:
        row_id = "".join(rng.choices("0123456789abcdef", k=12))
        while row_id in key:
            row_id = "".join(rng.choices("0123456789abcdef", k=12))
        key[row_id] = source
        term = source[2]
        rows.append(
            EvalSheetRow(
                row_id=row_id,
                term_label=labels.get(term, term),
                definition_text=text,
            )
        )
    return rows, key


def write_sheet(rows: list[EvalSheetRow], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\t".join(SHEET_HEADER) + "\n")
        for row in rows:
            cells = [
                row.row_id,
                row.term_label,
                row.definition_text,
                "" if row.accuracy is None else str(row.accuracy),
                "" if row.consistency is None else str(row.consistency),
                "" if row.overall is None else str(row.overall),
                "" if row.confidence is None else str(row.confidence),
                row.notes,
            ]
            fh.write("\t".join(cell.replace("\t", " ").replace("\n", " ") for cell in cells) + "\n")


def read_sheet(path) -> list[EvalSheetRow]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if tuple(header) != SHEET_HEADER:
            raise ValueError(f"unexpected sheet header {header!r}")
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            cells = line.split("\t")
            cells += [""] * (len(SHEET_HEADER) - len(cells))

            def score(cell: str) -> int | None:
                return int(cell) if cell.strip() else None

            rows.append(
                EvalSheetRow(
                    row_id=cells[0],
                    term_label=cells[1],
                    definition_text=cells[2],
                    accuracy=score(cells[3]),
                    consistency=score(cells[4]),
                    overall=score(cells[5]),
                    confidence=score(cells[6]),
                    notes=cells[7],
                )
            )
    return rows


def write_blind_key(key: dict[str, tuple[str, str, Symbol]], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row_id, (method, model, term) in key.items():
            fh.write(
                json.dumps(
                    {"row_id": row_id, "method": method, "model": model, "term": term},
                    ensure_ascii=False,
                )
                + "\n"
            )


def read_blind_key(path) -> dict[str, tuple[str, str, Symbol]]:
    key = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            key[obj["row_id"]] = (obj["method"], obj["model"], obj["term"])
    return key


def ingest_eval_sheets(
    rows: list[EvalSheetRow],
    key: dict[str, tuple[str, str, Symbol]],
    evaluator: str = "anonymous",
) -> tuple[list[dict], list[tuple[str, str]]]:
    """Unblind scored rows into a long-format table.

    Rows with any score outside 1..5 are rejected row-wise and reported
    alongside the ingested records; an unknown row id is a hard error.
    """
    records: list[dict] = []
    rejected: list[tuple[str, str]] = []
    for row in rows:
        if row.row_id not in key:
            raise UnknownRowId(f"row id {row.row_id!r} not present in the blind key")
        bad = None
        for name in ("accuracy", "consistency", "overall", "confidence"):
            value = getattr(row, name)
            if value is not None and not 1 <= value <= 5:
                bad = f"{name}={value} outside 1..5"
                break
        if bad:
            rejected.append((row.row_id, str(ScoreOutOfRange(bad))))
            continue
        method, model, term = key[row.row_id]
        records.append(
            {
                "method": method,
                "model": model,
                "term": term,
                "evaluator": evaluator,
                "accuracy": row.accuracy,
                "consistency": row.consistency,
                "overall": row.overall,
                "confidence": row.confidence,
                "notes": row.notes,
            }
        )
    return records, rejected


def _mean(values: list) -> float | None:
    values = [v for v in values if v is not None]
    return sum(values) / len(values) if values else None


def summarize_scores(records: list[dict]) -> dict:
    """Per-source means, confidence/gap correlation, pairwise tests.

    Sources are (method, model) pairs. The confidence analysis compares
    the curator rows against the best non-curator source (highest mean
    overall): per confidence level, gap = curator mean - model mean,
    with the Pearson correlation between level and gap. Pairwise
    significance uses Welch's two-sample t-test on row scores.
    """
    if not records:
        raise ValueError("score table is empty")
    sources: dict[tuple[str, str], list[dict]] = {}
    for record in records:
        sources.setdefault((record["method"], record["model"]), []).append(record)

    methods = []
    for (method, model), rows in sorted(sources.items()):
        methods.append(
            {
                "method": method,
                "model": model,
                "accuracy": _mean([r["accuracy"] for r in rows]),
                "score": _mean([r["overall"] for r in rows]),
                "consistency": _mean([r["consistency"] for r in rows]),
                "n": len(rows),
            }
        )

    curator_rows = sources.get((CURATOR_METHOD, CURATOR_MODEL), [])
    model_sources = {
        src: rows for src, rows in sources.items() if src[0] != CURATOR_METHOD
    }
    confidence = {"best_model": None, "levels": [], "gaps": [], "pearson_r": None}
    if curator_rows and model_sources:
        best_src = max(
            sorted(model_sources),
            key=lambda src: _mean([r["overall"] for r in model_sources[src]]) or 0.0,
        )
        confidence["best_model"] = list(best_src)
        best_rows = model_sources[best_src]
        levels, gaps = [], []
        for level in (1, 2, 3, 4, 5):
            curator_mean = _mean(
                [r["overall"] for r in curator_rows if r["confidence"] == level]
            )
            model_mean = _mean(
                [r["overall"] for r in best_rows if r["confidence"] == level]
            )
            if curator_mean is None or model_mean is None:
                continue
            levels.append(level)
            gaps.append(curator_mean - model_mean)
        confidence["levels"] = levels
        confidence["gaps"] = gaps
        if len(levels) >= 2 and len(set(gaps)) > 1:
            r_value = stats.pearsonr(levels, gaps).statistic
            confidence["pearson_r"] = float(r_value)

    pairwise = []
    source_list = sorted(sources)
    for i, src_a in enumerate(source_list):
        for src_b in source_list[i + 1 :]:
            for criterion in ("accuracy", "overall", "consistency"):
                a = [r[criterion] for r in sources[src_a] if r[criterion] is not None]
                b = [r[criterion] for r in sources[src_b] if r[criterion] is not None]
                if len(a) < 2 or len(b) < 2:
                    continue
                if len(set(a)) == 1 and len(set(b)) == 1:
                    continue  # no variance on either side, test is undefined
                result = stats.ttest_ind(a, b, equal_var=False)
                pairwise.append(
                    {
                        "a": list(src_a),
                        "b": list(src_b),
                        "criterion": criterion,
                        "p_value": float(result.pvalue),
                    }
                )

    return {"methods": methods, "confidence": confidence, "welch": pairwise}


def render_report_text(report: dict) -> str:
    """Human-readable table alongside the JSON report."""
    lines = ["method\tmodel\taccuracy\tscore\tconsistency\tn"]
    for row in report["methods"]:

        def cell(v):
            return f"{v:.3f}" if isinstance(v, float) else ("" if v is None else str(v))

        lines.append(
            "\t".join(
                [
                    row["method"],
                    row["model"],
                    cell(row["accuracy"]),
                    cell(row["score"]),
                    cell(row["consistency"]),
                    str(row["n"]),
                ]
            )
        )
    conf = report.get("confidence", {})
    if conf.get("pearson_r") is not None:
        lines.append("")
        lines.append(
            f"confidence-gap Pearson r = {conf['pearson_r']:.3f} "
            f"(best model: {'/'.join(conf['best_model'])}, "
            f"levels {conf['levels']}, gaps {[round(g, 3) for g in conf['gaps']]})"
        )
    return "\n".join(lines) + "\n"


def load_published_scores(path) -> list[dict]:
    """Read an external long-format score table (CSV or TSV).

    Column names are matched case-insensitively against the fields this
    module uses; ``score`` is accepted as an alias for ``overall`` and
    ``model_name`` for ``model``. Useful for re-deriving the published
    per-source means from the released evaluation data.
    """
    import csv

    aliases = {
        "method": "method",
        "model": "model",
        "model_name": "model",
        "term": "term",
        "evaluator": "evaluator",
        "accuracy": "accuracy",
        "consistency": "consistency",
        "overall": "overall",
        "score": "overall",
        "confidence": "confidence",
        "notes": "notes",
    }
    with open(path, "r", encoding="utf-8", newline="") as fh:
        sample = fh.read(4096)
        fh.seek(0)
        delimiter = "\t" if sample.count("\t") >= sample.count(",") else ","
        reader = csv.DictReader(fh, delimiter=delimiter)
        records = []
        for raw in reader:
            record = {
                "method": "",
                "model": "",
                "term": "",
                "evaluator": "",
                "accuracy": None,
                "consistency": None,
                "overall": None,
                "confidence": None,
                "notes": "",
            }
            for column, value in raw.items():
                if column is None:
                    continue
                name = aliases.get(column.strip().lower())
                if name is None:
                    continue
                if name in ("accuracy", "consistency", "overall", "confidence"):
                    value = value.strip() if isinstance(value, str) else value
                    record[name] = int(float(value)) if value not in (None, "") else None
                else:
                    record[name] = (value or "").strip()
            records.append(record)
    return records


def build_definition_key(
    method: str, model: str, term: Symbol
) -> tuple[str, str, Symbol]:
    return (method, model, term)
