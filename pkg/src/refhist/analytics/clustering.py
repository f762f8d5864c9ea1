"""K-means over editor feature vectors, silhouettes and cross-k cluster trees."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


@dataclass
class ClusterModel:
    k: int
    centroids: np.ndarray
    labels: np.ndarray
    inertia: float
    seed: int
    n_iter: int
    inertia_trace: list[float] = field(default_factory=list)
    silhouettes: np.ndarray | None = None
    mean_silhouette: float | None = None


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    d = (x * x).sum(1)[:, None] - 2.0 * x @ c.T + (c * c).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _plusplus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = [x[rng.integers(n)]]
    closest = _sq_dists(x, np.array(centers))[:, 0]
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            idx = min(idx, n - 1)
        centers.append(x[idx])
        closest = np.minimum(closest, _sq_dists(x, x[idx][None, :])[:, 0])
    return np.array(centers, dtype=float)


def kmeans(
    features: np.ndarray | Sequence[Sequence[float]],
    k: int,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-6,
) -> ClusterModel:
    """Lloyd iterations from k-means++ seeding.

    An emptied cluster is re-seeded with the point farthest from its centroid.
    Labels are the nearest centroid of the final centroids.
    """
    x = np.asarray(features, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points ({n})")
    rng = np.random.default_rng(seed)
    centroids = _plusplus(x, k, rng)
    trace = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        d = _sq_dists(x, centroids)
        labels = d.argmin(1)
        trace.append(float(d[np.arange(n), labels].sum()))
        new = np.empty_like(centroids)
        for j in range(k):
            members = x[labels == j]
            if len(members):
                new[j] = members.mean(0)
            else:
                far = int(d[np.arange(n), labels].argmax())
                new[j] = x[far]
                labels[far] = j
        shift = float(np.sqrt(((new - centroids) ** 2).sum(1)).max())
        centroids = new
        if shift < tol:
            break
    d = _sq_dists(x, centroids)
    labels = d.argmin(1)
    inertia = float(d[np.arange(n), labels].sum())
    return ClusterModel(k, centroids, labels, inertia, seed, n_iter, trace)


def silhouette(
    features: np.ndarray | Sequence[Sequence[float]],
    labels: Sequence[int],
    chunk: int = 256,
) -> tuple[np.ndarray, float]:
    """Per-point silhouette and its mean (Euclidean); singleton clusters score 0."""
    x = np.asarray(features, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    lab = np.asarray(labels)
    uniq, inv = np.unique(lab, return_inverse=True)
    if len(uniq) < 2:
        raise ValueError("silhouette needs at least two clusters")
    n, m = x.shape[0], len(uniq)
    sizes = np.bincount(inv, minlength=m).astype(float)
    onehot = np.zeros((n, m))
    onehot[np.arange(n), inv] = 1.0
    s = np.zeros(n)
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        # Exact differences: the dot-product expansion loses precision near zero.
        dist = np.sqrt(((x[lo:hi, None, :] - x[None, :, :]) ** 2).sum(-1))
        sums = dist @ onehot
        own = inv[lo:hi]
        own_size = sizes[own]
        a = sums[np.arange(hi - lo), own] / np.maximum(own_size - 1, 1)
        mean_other = sums / sizes[None, :]
        mean_other[np.arange(hi - lo), own] = np.inf
        b = mean_other.min(1)
        denom = np.maximum(a, b)
        with np.errstate(invalid="ignore", divide="ignore"):
            val = np.where(denom > 0, (b - a) / denom, 0.0)
        s[lo:hi] = np.where(own_size > 1, val, 0.0)
    return s, float(s.mean())


@dataclass(frozen=True)
class ClusTreeEdge:
    k_from: int
    cluster_from: int
    k_to: int
    cluster_to: int
    count: int
    in_prop: float


def clustree(models: Sequence[ClusterModel]) -> tuple[list[ClusTreeEdge], dict[tuple[int, int], int]]:
    """Edges between consecutive k levels plus node sizes keyed by ``(k, cluster)``."""
    if not models:
        return [], {}
    n = len(models[0].labels)
    if any(len(m.labels) != n for m in models):
        raise ValueError("all models must cover the same editors")
    models = sorted(models, key=lambda m: m.k)
    nodes: dict[tuple[int, int], int] = {}
    for m in models:
        for c, size in zip(*np.unique(m.labels, return_counts=True)):
            nodes[(m.k, int(c))] = int(size)
    edges = []
    for lo, hi in zip(models, models[1:]):
        pairs, counts = np.unique(np.stack([lo.labels, hi.labels], 1), axis=0, return_counts=True)
        for (a, b), c in zip(pairs, counts):
            edges.append(ClusTreeEdge(lo.k, int(a), hi.k, int(b), int(c), int(c) / nodes[(hi.k, int(b))]))
    return edges, nodes


def clustree_json(edges: Sequence[ClusTreeEdge], nodes: dict[tuple[int, int], int]) -> str:
    doc = {
        "nodes": [{"k": k, "cluster": c, "size": s} for (k, c), s in sorted(nodes.items())],
        "edges": [e.__dict__ for e in edges],
    }
    return json.dumps(doc, indent=1, sort_keys=True)


def clustree_dot(edges: Sequence[ClusTreeEdge], nodes: dict[tuple[int, int], int]) -> str:
    lines = ["digraph clustree {"]
    for (k, c), size in sorted(nodes.items()):
        lines.append(f'  "k{k}c{c}" [label="k={k} c={c}\\nn={size}", size={size}];')
    for e in edges:
        lines.append(
            f'  "k{e.k_from}c{e.cluster_from}" -> "k{e.k_to}c{e.cluster_to}" '
            f'[count={e.count}, in_prop={e.in_prop:.6f}];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"
