"""Paths to shipped data files (prompt template and toy corpus)."""

import os

_HERE = os.path.dirname(__file__)

PROMPT_TEMPLATE = os.path.join(_HERE, "prompt_template.txt")
TOY_ONTOLOGY = os.path.join(_HERE, "toy", "toy_ontology.jsonl")
TOY_QUERIES = os.path.join(_HERE, "toy", "toy_queries.jsonl")
TOY_RESPONSES = os.path.join(_HERE, "toy", "toy_responses.jsonl")
