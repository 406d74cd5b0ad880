"""Maximal Marginal Relevance re-ranking.

Greedy selection balancing query relevance against redundancy with the
already-selected set:

    score(c) = lambda * sim(c, query) - (1 - lambda) * max_{s in S} sim(c, s)

The first pick is the candidate most similar to the query. Ties break
by higher query similarity, then input order.
"""

from __future__ import annotations

import numpy as np


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    denom = np.linalg.norm(a) * np.linalg.norm(b)
    return float(a @ b / denom) if denom > 0 else 0.0


def mmr_rerank(
    query: np.ndarray,
    candidates: list[tuple[str, np.ndarray, float]],
    lam: float,
    m: int,
) -> list[str]:
    """Select up to ``m`` keys from (key, vector, query-similarity) triples.

    Candidates are expected pre-ranked by query similarity. Candidate
    mutual similarity is cosine over the stored vectors. ``lam=1``
    reduces to pure relevance order.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must be in [0, 1]")
    if m <= 0 or not candidates:
        return []

    remaining = list(range(len(candidates)))
    selected: list[int] = []
    # Candidate-to-selected similarities, computed lazily and cached.
    pair_sims: dict[tuple[int, int], float] = {}

    def mutual(i: int, j: int) -> float:
        key = (min(i, j), max(i, j))
        if key not in pair_sims:
            pair_sims[key] = _cosine(candidates[i][1], candidates[j][1])
        return pair_sims[key]

    while remaining and len(selected) < m:
        best_idx = None
        best_rank: tuple[float, float, int] | None = None
        for idx in remaining:
            relevance = candidates[idx][2]
            if selected:
                redundancy = max(mutual(idx, s) for s in selected)
                score = lam * relevance - (1.0 - lam) * redundancy
            else:
                score = relevance
            # Higher score wins; ties by higher query similarity, then
            # input order (idx ascending).
            rank = (-score, -relevance, idx)
            if best_rank is None or rank < best_rank:
                best_rank = rank
                best_idx = idx
        selected.append(best_idx)  # type: ignore[arg-type]
        remaining.remove(best_idx)
    return [candidates[i][0] for i in selected]
