"""ontoforge: retrieval-augmented ontology term completion."""

__version__ = "0.1.0"
