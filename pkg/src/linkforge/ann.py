"""Approximate nearest-neighbor search over unit vectors.

A forest of random-projection trees (hyperplanes between two sampled
points, as popularized by tree-based angular ANN libraries. Queries
descend all trees best-first, sharing one priority queue keyed by
hyperplane margins, then re-rank the gathered candidates exactly.

Builds are a deterministic function of (vectors, seed); the tree
structure serializes to plain JSON-compatible lists so an index file can
round-trip bit-identically.
"""
from __future__ import annotations

import heapq
from typing import Any

import numpy as np

__all__ = ["AnnForest", "DEFAULT_ANN_PARAMS"]

DEFAULT_ANN_PARAMS: dict[str, int] = {
    "trees": 32,
    "leaf_size": 32,
    "search_k": 6000,
}

_LEAF = 0
_SPLIT = 1


def _normalize_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("cannot index zero vectors under the angular metric")
    return matrix / norms


class AnnForest:
    """Random-projection tree forest (angular metric).

    ``search_k`` bounds how many candidate items a query gathers before
    exact re-ranking; more trees and a larger search_k trade speed for
    recall.
    """

    def __init__(
        self,
        trees: int = DEFAULT_ANN_PARAMS["trees"],
        leaf_size: int = DEFAULT_ANN_PARAMS["leaf_size"],
        search_k: int = DEFAULT_ANN_PARAMS["search_k"],
        seed: int = 0,
    ) -> None:
        if trees < 1 or leaf_size < 1 or search_k < 1:
            raise ValueError("trees, leaf_size, and search_k must all be >= 1")
        self.trees = trees
        self.leaf_size = leaf_size
        self.search_k = search_k
        self.seed = seed
        self._vectors: np.ndarray | None = None
        self._forest: list[list[list[Any]]] = []

    @property
    def params(self) -> dict[str, int]:
        return {
            "trees": self.trees,
            "leaf_size": self.leaf_size,
            "search_k": self.search_k,
            "seed": self.seed,
        }

    @property
    def size(self) -> int:
        return 0 if self._vectors is None else len(self._vectors)

    def build(self, vectors: np.ndarray) -> "AnnForest":
        """Index a (n, dim) matrix; rows are normalized internally."""
        matrix = np.asarray(vectors, dtype=np.float64)
        if matrix.ndim != 2:
            raise ValueError("expected a (n, dim) matrix")
        self._vectors = _normalize_rows(matrix)
        rng = np.random.default_rng(self.seed)
        self._forest = []
        all_items = np.arange(len(matrix))
        for _ in range(self.trees):
            nodes: list[list[Any]] = []
            self._build_node(all_items, rng, nodes)
            self._forest.append(nodes)
        return self

    def _build_node(self, items: np.ndarray, rng: np.random.Generator, nodes: list[list[Any]]) -> int:
        node_id = len(nodes)
        nodes.append([])  # reserve slot; children are appended after
        if len(items) <= self.leaf_size:
            nodes[node_id] = [_LEAF, [int(i) for i in items]]
            return node_id
        assert self._vectors is not None
        plane = None
        for _ in range(3):
            picks = rng.choice(len(items), size=2, replace=False)
            p = self._vectors[items[picks[0]]]
            q = self._vectors[items[picks[1]]]
            w = p - q
            norm = np.linalg.norm(w)
            if norm < 1e-12:
                continue
            w = w / norm
            offset = -float(w @ ((p + q) / 2.0))
            margins = self._vectors[items] @ w + offset
            mask = margins < 0
            if mask.any() and not mask.all():
                plane = (w, offset, mask)
                break
        if plane is None:
            # degenerate region (e.g. duplicated points): split arbitrarily
            order = rng.permutation(len(items))
            mask = np.zeros(len(items), dtype=bool)
            mask[order[: len(items) // 2]] = True
            w = np.zeros(self._vectors.shape[1])
            plane = (w, 0.0, mask)
        w, offset, mask = plane
        left = self._build_node(items[mask], rng, nodes)
        right = self._build_node(items[~mask], rng, nodes)
        nodes[node_id] = [_SPLIT, [float(x) for x in w], offset, left, right]
        return node_id

    def query(
        self, vector: np.ndarray, top_k: int = 1, search_k: int | None = None
    ) -> list[tuple[int, float]]:
        """Approximate top_k items by cosine distance: [(item, distance), ...].

        Ties in the re-ranked distances break toward the smaller item id.
        """
        if self._vectors is None:
            raise ValueError("forest not built")
        budget = self.search_k if search_k is None else search_k
        v = np.asarray(vector, dtype=np.float64)
        norm = np.linalg.norm(v)
        if norm == 0:
            raise ValueError("cannot query with a zero vector")
        v = v / norm

        candidates: set[int] = set()
        heap: list[tuple[float, int, int, int]] = []
        counter = 0
        for tree_id in range(len(self._forest)):
            heap.append((-np.inf, counter, tree_id, 0))
            counter += 1
        heapq.heapify(heap)
        while heap and len(candidates) < budget:
            neg_conf, _, tree_id, node_id = heapq.heappop(heap)
            node = self._forest[tree_id][node_id]
            if node[0] == _LEAF:
                candidates.update(node[1])
                continue
            _, w, offset, left, right = node
            margin = float(np.dot(w, v) + offset)
            near, far = (left, right) if margin < 0 else (right, left)
            # keys are negated priorities: a branch's priority is the minimum
            # signed margin along its path (near side +|m|, far side -|m|)
            counter += 1
            heapq.heappush(heap, (max(neg_conf, -abs(margin)), counter, tree_id, near))
            counter += 1
            heapq.heappush(heap, (max(neg_conf, abs(margin)), counter, tree_id, far))

        if not candidates:
            return []
        cand = np.fromiter(sorted(candidates), dtype=np.int64)
        dists = np.clip(1.0 - self._vectors[cand] @ v, 0.0, 2.0)
        order = np.lexsort((cand, dists))[:top_k]
        return [(int(cand[i]), float(dists[i])) for i in order]

    # -- serialization ------------------------------------------------------

    def to_payload(self) -> dict[str, Any]:
        """Tree structure and params as JSON-compatible data (vectors excluded)."""
        return {"params": self.params, "forest": self._forest}

    @classmethod
    def from_payload(cls, payload: dict[str, Any], vectors: np.ndarray) -> "AnnForest":
        params = payload["params"]
        forest = cls(
            trees=params["trees"],
            leaf_size=params["leaf_size"],
            search_k=params["search_k"],
            seed=params["seed"],
        )
        forest._vectors = _normalize_rows(np.asarray(vectors, dtype=np.float64))
        forest._forest = payload["forest"]
        return forest
