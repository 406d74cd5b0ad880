"""Hierarchical Navigable Small World index over cosine similarity.

Multi-layer proximity graph in the style of Malkov & Yashunin: every
vector lives on layer 0, each higher layer keeps an exponentially
thinner subset, and queries greedily descend from the top-layer entry
point before a beam search on layer 0. Vectors are expected to be
L2-normalized float32, so similarity is a plain dot product;
internally the code works with distance = -similarity (smaller is
closer).

Level assignment draws ``floor(-ln(U) * mL)`` with ``mL = 1/ln(m)``
from a seeded RNG, so builds are reproducible. Layer 0 keeps up to
``4*m`` links per node (denser than the usual 2*m; random
high-dimensional data needs the extra connectivity to hold recall@10
above 0.95 at the default ef_search). New links are chosen with the
diversity heuristic from the HNSW paper; overflowing nodes are pruned
back to the closest links.

Adjacency lives in flat int32 arrays (one neighbor table and one
degree vector per layer) so the beam search can run inside the
compiled kernel; the numpy fallback walks the same arrays.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

from .kernels import Kernel, active_kernel


@dataclass(frozen=True)
class HnswParams:
    m: int = 16
    ef_construction: int = 200
    ef_search: int = 100
    metric: str = "cosine"
    seed: int = 1337

    def __post_init__(self):
        if self.m < 2:
            raise ValueError("m must be >= 2")
        if self.metric != "cosine":
            raise ValueError(f"unsupported metric {self.metric!r}")

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "ef_construction": self.ef_construction,
            "ef_search": self.ef_search,
            "metric": self.metric,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "HnswParams":
        return cls(
            m=obj["m"],
            ef_construction=obj["ef_construction"],
            ef_search=obj["ef_search"],
            metric=obj.get("metric", "cosine"),
            seed=obj.get("seed", 1337),
        )


class _Layer:
    """Fixed-width neighbor table for one graph layer."""

    def __init__(self, max_links: int, capacity: int):
        self.max_links = max_links
        self.nbr = np.full((capacity, max_links), -1, dtype=np.int32)
        self.cnt = np.zeros(capacity, dtype=np.int32)

    def grow(self, capacity: int) -> None:
        if capacity <= self.nbr.shape[0]:
            return
        nbr = np.full((capacity, self.max_links), -1, dtype=np.int32)
        nbr[: self.nbr.shape[0]] = self.nbr
        cnt = np.zeros(capacity, dtype=np.int32)
        cnt[: self.cnt.shape[0]] = self.cnt
        self.nbr = nbr
        self.cnt = cnt

    def neighbors(self, node_id: int) -> list[int]:
        return self.nbr[node_id, : self.cnt[node_id]].tolist()

    def set_neighbors(self, node_id: int, ids: list[int]) -> None:
        k = len(ids)
        self.nbr[node_id, :k] = ids
        self.cnt[node_id] = k


class HnswIndex:
    """Append-only HNSW graph over an external vector matrix.

    The index stores only graph structure; the caller owns the
    (count, dim) float32 matrix and passes it to every call, so a
    persisted graph can be re-attached to a loaded matrix and answer
    queries identically.
    """

    def __init__(
        self, params: HnswParams, kernel: Kernel | None = None, capacity: int = 0
    ):
        self.params = params
        self.kernel = kernel or active_kernel()
        self.count = 0
        self.levels: list[int] = []
        self.layers: list[_Layer] = []
        self.entry_point: int | None = None
        self.max_level: int = -1
        self._m0 = 4 * params.m
        self._mult = 1.0 / math.log(params.m)
        self._rng = random.Random(params.seed)
        self._capacity = max(capacity, 0)

    def __len__(self) -> int:
        return self.count

    def _draw_level(self) -> int:
        u = 1.0 - self._rng.random()  # (0, 1], avoids log(0)
        return int(-math.log(u) * self._mult)

    def _layer_links(self, layer: int) -> int:
        return self._m0 if layer == 0 else self.params.m

    def _ensure_room(self, node_id: int, level: int) -> None:
        if node_id >= self._capacity:
            self._capacity = max(2 * self._capacity, node_id + 1, 64)
        for layer in self.layers:
            layer.grow(self._capacity)
        while len(self.layers) <= level:
            self.layers.append(
                _Layer(self._layer_links(len(self.layers)), self._capacity)
            )

    def _sims(self, matrix: np.ndarray, ids: list[int], query: np.ndarray) -> np.ndarray:
        return self.kernel.gather_dot(matrix, np.asarray(ids, dtype=np.int64), query)

    def _search_layer(
        self,
        matrix: np.ndarray,
        query: np.ndarray,
        entry_ids: list[int],
        layer: int,
        ef: int,
    ) -> tuple[np.ndarray, np.ndarray]:
        lay = self.layers[layer]
        return self.kernel.search_layer(
            matrix, lay.nbr, lay.cnt, query, np.asarray(entry_ids, dtype=np.int64), ef
        )

    def _select_neighbors(
        self, matrix: np.ndarray, dists: np.ndarray, ids: np.ndarray, m: int
    ) -> list[int]:
        """Diversity-aware selection (the HNSW paper's heuristic).

        Candidates arrive sorted by distance; one is kept only if it is
        closer to the query point than to every already-kept neighbor.
        One candidate-by-candidate matmul feeds the whole greedy pass.
        """
        if len(ids) <= m:
            return [int(i) for i in ids]
        ids64 = np.asarray(ids, dtype=np.int64)
        vectors = matrix[ids64]
        mutual = -(vectors @ vectors.T).astype(np.float64)  # pairwise distances
        min_dist_to_sel = np.full(len(ids64), np.inf)
        selected: list[int] = []
        for pos in range(len(ids64)):
            if len(selected) >= m:
                break
            if not selected or dists[pos] < min_dist_to_sel[pos]:
                selected.append(int(ids64[pos]))
                np.minimum(min_dist_to_sel, mutual[pos], out=min_dist_to_sel)
        return selected

    def _link(self, matrix: np.ndarray, layer: int, node_id: int, neighbor_id: int) -> None:
        """Add the reverse edge, pruning to the closest links on overflow."""
        lay = self.layers[layer]
        degree = int(lay.cnt[neighbor_id])
        if degree < lay.max_links:
            lay.nbr[neighbor_id, degree] = node_id
            lay.cnt[neighbor_id] = degree + 1
            return
        ids = lay.nbr[neighbor_id, :degree].tolist() + [node_id]
        sims = self._sims(matrix, ids, matrix[neighbor_id])
        ranked = sorted(zip((-float(s) for s in sims), ids))
        lay.set_neighbors(neighbor_id, [n for _, n in ranked[: lay.max_links]])

    def add(self, matrix: np.ndarray, node_id: int) -> None:
        """Insert the vector at ``matrix[node_id]``; ids must be dense."""
        if node_id != self.count:
            raise ValueError(f"expected dense node id {self.count}, got {node_id}")
        level = self._draw_level()
        self._ensure_room(node_id, level)
        self.levels.append(level)
        self.count += 1
        if self.entry_point is None:
            self.entry_point = node_id
            self.max_level = level
            return

        query = matrix[node_id]
        entry = [self.entry_point]
        for layer in range(self.max_level, level, -1):
            _, ids = self._search_layer(matrix, query, entry, layer, 1)
            entry = [int(ids[0])]

        for layer in range(min(level, self.max_level), -1, -1):
            dists, ids = self._search_layer(
                matrix, query, entry, layer, self.params.ef_construction
            )
            neighbors = self._select_neighbors(matrix, dists, ids, self._layer_links(layer))
            self.layers[layer].set_neighbors(node_id, neighbors)
            for neighbor_id in neighbors:
                self._link(matrix, layer, node_id, neighbor_id)
            entry = [int(i) for i in ids]
        if level > self.max_level:
            self.entry_point = node_id
            self.max_level = level

    def search(
        self, matrix: np.ndarray, query: np.ndarray, k: int, ef: int | None = None
    ) -> list[tuple[int, float]]:
        """Approximate top-k as (node id, similarity), best first."""
        if self.entry_point is None:
            return []
        ef = max(ef if ef is not None else self.params.ef_search, k)
        entry = [self.entry_point]
        for layer in range(self.max_level, 0, -1):
            _, ids = self._search_layer(matrix, query, entry, layer, 1)
            entry = [int(ids[0])]
        dists, ids = self._search_layer(matrix, query, entry, 0, ef)
        return [(int(i), -float(d)) for d, i in zip(dists[:k], ids[:k])]

    # --- persistence ---

    def to_dict(self) -> dict:
        neighbors = [
            [self.layers[layer].neighbors(node) for layer in range(level + 1)]
            for node, level in enumerate(self.levels)
        ]
        return {
            "params": self.params.to_dict(),
            "entry_point": self.entry_point,
            "max_level": self.max_level,
            "levels": list(self.levels),
            "neighbors": neighbors,
        }

    @classmethod
    def from_dict(cls, obj: dict, kernel: Kernel | None = None) -> "HnswIndex":
        index = cls(
            HnswParams.from_dict(obj["params"]),
            kernel=kernel,
            capacity=len(obj["levels"]),
        )
        index.entry_point = obj["entry_point"]
        index.max_level = obj["max_level"]
        index.levels = [int(lv) for lv in obj["levels"]]
        index.count = len(index.levels)
        if index.count:
            index._ensure_room(index.count - 1, max(index.levels))
        for node_id, node_layers in enumerate(obj["neighbors"]):
            for layer, ids in enumerate(node_layers):
                index.layers[layer].set_neighbors(node_id, [int(i) for i in ids])
        return index
