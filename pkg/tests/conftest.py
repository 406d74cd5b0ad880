import json
import os

import pytest

from ontoforge import cli
from ontoforge.completion import CompletionProviderSpec
from ontoforge.data import TOY_ONTOLOGY, TOY_QUERIES, TOY_RESPONSES
from ontoforge.embed import EmbeddingProviderSpec
from ontoforge.ingest import load_terms_auto

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")

TABLE1_OBO = os.path.join(DATA_DIR, "mitral_cell.obo")
TABLE1_JSONL = os.path.join(DATA_DIR, "mitral_cell.jsonl")
TABLE1_LABELS = os.path.join(DATA_DIR, "table1_labels.tsv")


@pytest.fixture(scope="session")
def toy_terms():
    return load_terms_auto(TOY_ONTOLOGY)


@pytest.fixture(scope="session")
def local_provider():
    return EmbeddingProviderSpec()


@pytest.fixture(scope="session")
def scripted_llm():
    return CompletionProviderSpec(kind="scripted", script_path=TOY_RESPONSES)


@pytest.fixture(scope="session")
def toy_store(tmp_path_factory):
    """Store directory with the toy ontology indexed as 'terms'."""
    store = tmp_path_factory.mktemp("toy_store")
    rc = cli.main(
        [
            "index",
            TOY_ONTOLOGY,
            "--format",
            "jsonl",
            "--store",
            str(store),
            "--collection",
            "terms",
        ]
    )
    assert rc == 0
    return store


@pytest.fixture(scope="session")
def toy_collection(toy_store):
    from ontoforge.vstore import load_collection

    return load_collection(str(toy_store), "terms")


@pytest.fixture()
def toy_paths():
    return {
        "ontology": TOY_ONTOLOGY,
        "queries": TOY_QUERIES,
        "responses": TOY_RESPONSES,
    }


def write_jsonl(path, objs):
    with open(path, "w", encoding="utf-8") as fh:
        for obj in objs:
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
