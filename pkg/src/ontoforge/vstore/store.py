"""Persistent vector collections with approximate and exact search.

A collection is a set of (key, payload, vector) items with an HNSW
index. Vectors are L2-normalized at insert, so cosine similarity is a
dot product. On disk a collection is three files in a store directory:

* ``<name>.meta.jsonl`` — one ``{"key":…, "payload":…}`` per item, in
  matrix row order;
* ``<name>.vec`` — magic ``OFVS``, version u8, dim u32 LE, count u64
  LE, then the float32 matrix little-endian;
* ``<name>.hnsw`` — JSON with the graph structure, parameters, and
  collection metadata. The graph is serialized, not rebuilt, so a
  loaded collection answers every query exactly as the original.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass

import numpy as np

from ..errors import DimMismatch, DuplicateKey, StoreIOError, VersionMismatch
from .hnsw import HnswIndex, HnswParams
from .kernels import Kernel, active_kernel

VEC_MAGIC = b"OFVS"
VEC_VERSION = 1
HNSW_FORMAT_VERSION = 1

_VEC_HEADER = struct.Struct("<4sBIQ")


@dataclass(frozen=True)
class CollectionItem:
    key: str
    payload: str
    vector: np.ndarray


@dataclass(frozen=True)
class SearchHit:
    key: str
    similarity: float


def normalize(vector: np.ndarray) -> np.ndarray:
    """Unit-normalize to float32; an all-zero vector stays zero."""
    v = np.asarray(vector, dtype=np.float64).reshape(-1)
    norm = np.linalg.norm(v)
    if norm > 0:
        v = v / norm
    return np.ascontiguousarray(v, dtype=np.float32)


class Collection:
    """In-memory collection; construct via :func:`build_collection` or load."""

    def __init__(
        self,
        name: str,
        dim: int,
        params: HnswParams,
        metadata: dict | None = None,
        kernel: Kernel | None = None,
    ):
        self.name = name
        self.dim = dim
        self.params = params
        self.metadata = metadata or {}
        self.kernel = kernel or active_kernel()
        self.keys: list[str] = []
        self.payloads: list[str] = []
        self.matrix = np.zeros((0, dim), dtype=np.float32)
        self.key_to_idx: dict[str, int] = {}
        self.index = HnswIndex(params, kernel=self.kernel)

    def __len__(self) -> int:
        return len(self.keys)

    def __contains__(self, key: str) -> bool:
        return key in self.key_to_idx

    def vector(self, key: str) -> np.ndarray:
        return self.matrix[self.key_to_idx[key]]

    def payload(self, key: str) -> str:
        return self.payloads[self.key_to_idx[key]]

    def _check_query(self, query: np.ndarray) -> np.ndarray:
        q = np.asarray(query, dtype=np.float32).reshape(-1)
        if q.shape[0] != self.dim:
            raise DimMismatch(f"query dim {q.shape[0]} != collection dim {self.dim}")
        return np.ascontiguousarray(normalize(q))

    def knn_query(self, query: np.ndarray, k: int) -> list[SearchHit]:
        """Top-k by approximate cosine similarity.

        Collections of size <= k are scanned exactly. Hits come back in
        non-increasing similarity; ties break by key ascending.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        q = self._check_query(query)
        if len(self) == 0:
            return []
        if len(self) <= k:
            sims = self.kernel.dot_all(self.matrix, q)
            ranked = sorted(
                ((self.keys[i], float(sims[i])) for i in range(len(self))),
                key=lambda pair: (-pair[1], pair[0]),
            )
            return [SearchHit(key, sim) for key, sim in ranked]
        found = self.index.search(self.matrix, q, k)
        hits = [(self.keys[node_id], sim) for node_id, sim in found]
        hits.sort(key=lambda pair: (-pair[1], pair[0]))
        return [SearchHit(key, sim) for key, sim in hits]


def build_collection(
    items: list[CollectionItem],
    params: HnswParams | None = None,
    name: str = "collection",
    metadata: dict | None = None,
    kernel: Kernel | None = None,
) -> Collection:
    """Build a collection with an HNSW index over all items."""
    params = params or HnswParams()
    dims = {np.asarray(item.vector).reshape(-1).shape[0] for item in items}
    if len(dims) > 1:
        raise DimMismatch(f"items carry mixed dims {sorted(dims)}")
    dim = dims.pop() if dims else 0
    collection = Collection(name, dim, params, metadata=metadata, kernel=kernel)
    if not items:
        return collection
    collection.index = HnswIndex(params, kernel=collection.kernel, capacity=len(items))
    matrix = np.empty((len(items), dim), dtype=np.float32)
    for i, item in enumerate(items):
        if item.key in collection.key_to_idx:
            raise DuplicateKey(f"duplicate key {item.key!r}")
        collection.key_to_idx[item.key] = i
        collection.keys.append(item.key)
        collection.payloads.append(item.payload)
        matrix[i] = normalize(item.vector)
    collection.matrix = np.ascontiguousarray(matrix)
    for i in range(len(items)):
        collection.index.add(collection.matrix, i)
    return collection


def exact_knn(items: list[CollectionItem], query: np.ndarray, k: int) -> list[SearchHit]:
    """Full-scan cosine ranking; the reference oracle for recall checks.

    Independent of the HNSW path: similarities are computed in float64
    directly from the raw item vectors.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not items:
        return []
    q = np.asarray(query, dtype=np.float64).reshape(-1)
    scored: list[tuple[float, str]] = []
    for item in items:
        v = np.asarray(item.vector, dtype=np.float64).reshape(-1)
        if v.shape[0] != q.shape[0]:
            raise DimMismatch(f"item {item.key!r} dim {v.shape[0]} != query dim {q.shape[0]}")
        denom = np.linalg.norm(v) * np.linalg.norm(q)
        sim = float(v @ q / denom) if denom > 0 else 0.0
        scored.append((sim, item.key))
    scored.sort(key=lambda pair: (-pair[0], pair[1]))
    return [SearchHit(key, sim) for sim, key in scored[:k]]


# --- persistence ---


def _paths(store_dir: str, name: str) -> tuple[str, str, str]:
    base = os.path.join(store_dir, name)
    return f"{base}.meta.jsonl", f"{base}.vec", f"{base}.hnsw"


def collection_exists(store_dir: str, name: str) -> bool:
    return all(os.path.exists(p) for p in _paths(store_dir, name))


def list_collections(store_dir: str) -> list[str]:
    if not os.path.isdir(store_dir):
        return []
    names = []
    for entry in sorted(os.listdir(store_dir)):
        if entry.endswith(".hnsw"):
            names.append(entry[: -len(".hnsw")])
    return names


def save_collection(collection: Collection, store_dir: str) -> None:
    os.makedirs(store_dir, exist_ok=True)
    meta_path, vec_path, hnsw_path = _paths(store_dir, collection.name)
    with open(meta_path, "w", encoding="utf-8") as fh:
        for key, payload in zip(collection.keys, collection.payloads):
            fh.write(json.dumps({"key": key, "payload": payload}, ensure_ascii=False) + "\n")
    with open(vec_path, "wb") as fh:
        fh.write(_VEC_HEADER.pack(VEC_MAGIC, VEC_VERSION, collection.dim, len(collection)))
        fh.write(np.ascontiguousarray(collection.matrix, dtype="<f4").tobytes())
    doc = {
        "format_version": HNSW_FORMAT_VERSION,
        "dim": collection.dim,
        "count": len(collection),
        "metadata": collection.metadata,
        "index": collection.index.to_dict(),
    }
    with open(hnsw_path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_collection(store_dir: str, name: str, kernel: Kernel | None = None) -> Collection:
    meta_path, vec_path, hnsw_path = _paths(store_dir, name)
    for path in (meta_path, vec_path, hnsw_path):
        if not os.path.exists(path):
            raise StoreIOError(f"missing collection file {path}")

    with open(vec_path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _VEC_HEADER.size:
        raise StoreIOError(f"{vec_path} too short for header")
    magic, version, dim, count = _VEC_HEADER.unpack_from(raw)
    if magic != VEC_MAGIC:
        raise StoreIOError(f"{vec_path} has bad magic {magic!r}")
    if version != VEC_VERSION:
        raise VersionMismatch(f"{vec_path} is format version {version}, expected {VEC_VERSION}")
    expected = _VEC_HEADER.size + 4 * dim * count
    if len(raw) != expected:
        raise StoreIOError(f"{vec_path} has {len(raw)} bytes, expected {expected}")
    matrix = np.frombuffer(raw, dtype="<f4", offset=_VEC_HEADER.size).reshape(count, dim)

    with open(hnsw_path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format_version") != HNSW_FORMAT_VERSION:
        raise VersionMismatch(f"{hnsw_path} has format_version {doc.get('format_version')}")
    if doc["dim"] != dim or doc["count"] != count:
        raise StoreIOError(f"{hnsw_path} disagrees with {vec_path} on dim/count")

    collection = Collection(
        name,
        dim,
        HnswParams.from_dict(doc["index"]["params"]),
        metadata=doc.get("metadata", {}),
        kernel=kernel,
    )
    with open(meta_path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            key = obj["key"]
            if key in collection.key_to_idx:
                raise DuplicateKey(f"duplicate key {key!r} in {meta_path}")
            collection.key_to_idx[key] = len(collection.keys)
            collection.keys.append(key)
            collection.payloads.append(obj["payload"])
    if len(collection.keys) != count:
        raise StoreIOError(
            f"{meta_path} has {len(collection.keys)} items, {vec_path} has {count}"
        )
    collection.matrix = np.ascontiguousarray(matrix.astype(np.float32, copy=True))
    collection.index = HnswIndex.from_dict(doc["index"], kernel=collection.kernel)
    return collection
