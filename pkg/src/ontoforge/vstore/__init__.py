"""Vector collections: HNSW search, exact search, MMR, persistence."""

from .hnsw import HnswIndex, HnswParams
from .kernels import active_kernel, available_kernels, backend_name
from .mmr import mmr_rerank
from .store import (
    Collection,
    CollectionItem,
    SearchHit,
    build_collection,
    collection_exists,
    exact_knn,
    list_collections,
    load_collection,
    normalize,
    save_collection,
)

__all__ = [
    "Collection",
    "CollectionItem",
    "HnswIndex",
    "HnswParams",
    "SearchHit",
    "active_kernel",
    "available_kernels",
    "backend_name",
    "build_collection",
    "collection_exists",
    "exact_knn",
    "list_collections",
    "load_collection",
    "mmr_rerank",
    "normalize",
    "save_collection",
]
