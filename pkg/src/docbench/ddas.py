"""Cluster-and-reweight sampling over precomputed embeddings.

Items are clustered with k-means, clusters are weighted by size and by the
difficulty mix of their members, and a fixed budget is spread over clusters
and drawn within each cluster by tier-weighted sampling without replacement.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import DifficultyTier

log = logging.getLogger(__name__)


class KTooLarge(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class AllClustersFiltered(ValueError):
    pass


class BudgetExceedsPool(UserWarning):
    pass


@dataclass(frozen=True)
class EmbeddedItem:
    item_id: str
    vector: tuple[float, ...]
    tier: DifficultyTier | None = None
    invalid: bool = False

    def __post_init__(self):
        if not all(math.isfinite(v) for v in self.vector):
            raise ValueError(f"item {self.item_id}: non-finite vector entry")

    @classmethod
    def from_dict(cls, d: dict) -> "EmbeddedItem":
        tier = d.get("tier")
        return cls(
            str(d["item_id"]),
            tuple(float(v) for v in d["vector"]),
            None if tier is None else DifficultyTier.parse(tier),
            bool(d.get("invalid", False)),
        )


@dataclass(frozen=True)
class WeightParams:
    alpha: float = 0.5
    beta_easy: float = 0.5
    beta_medium: float = 2.0
    beta_hard: float = 1.5
    gamma: float = 0.5
    entropy_bonus: float = 0.0  # > 0 favours clusters with mixed difficulty

    def beta(self, tier: DifficultyTier | None) -> float:
        # untiered items count as Easy: nothing suggests they are informative
        if tier is DifficultyTier.MEDIUM:
            return self.beta_medium
        if tier is DifficultyTier.HARD:
            return self.beta_hard
        return self.beta_easy


@dataclass
class ClusterModel:
    centroids: np.ndarray
    assignments: dict[str, int]
    k: int
    seed: int
    inertia: float = 0.0
    inertia_history: list[float] = field(default_factory=list)

    def members(self) -> list[list[str]]:
        out: list[list[str]] = [[] for _ in range(self.k)]
        for item_id, c in self.assignments.items():
            out[c].append(item_id)
        return out


@dataclass
class SamplingPlan:
    weights: list[float]
    quotas: list[int]
    included: list[str]
    budget: int
    seed: int
    cluster_of: dict[str, int] = field(default_factory=dict)

    def rows(self, items: list[EmbeddedItem]) -> list[dict]:
        chosen = set(self.included)
        return [
            {"item_id": it.item_id, "cluster": self.cluster_of[it.item_id], "included": it.item_id in chosen}
            for it in items
        ]


def _matrix(items: list[EmbeddedItem]) -> np.ndarray:
    if not items:
        return np.zeros((0, 0))
    dim = len(items[0].vector)
    for it in items:
        if len(it.vector) != dim:
            raise DimensionMismatch(f"item {it.item_id} has dimension {len(it.vector)}, expected {dim}")
    return np.array([it.vector for it in items], dtype=float)


def _sq_dists(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    return ((x[:, None, :] - c[None, :, :]) ** 2).sum(axis=2)


def _kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(x)
    centers = [int(rng.integers(n))]
    d2 = ((x - x[centers[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            # all remaining points coincide with a centre; take unused indices in order
            nxt = next(i for i in range(n) if i not in centers)
        else:
            nxt = int(rng.choice(n, p=d2 / total))
        centers.append(nxt)
        d2 = np.minimum(d2, ((x - x[nxt]) ** 2).sum(axis=1))
    return x[centers].copy()


def kmeans(items: list[EmbeddedItem], k: int, seed: int, max_iter: int = 100, tol: float = 1e-4) -> ClusterModel:
    x = _matrix(items)
    n = len(items)
    if k < 1:
        raise ValueError("k must be positive")
    if k > n:
        raise KTooLarge(f"k={k} exceeds item count {n}")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp(x, k, rng)

    history: list[float] = []
    labels = np.zeros(n, dtype=int)
    for _ in range(max_iter):
        d = _sq_dists(x, centroids)
        labels = d.argmin(axis=1)
        inertia = float(d[np.arange(n), labels].sum())
        if history:
            assert inertia <= history[-1] * (1 + 1e-9) + 1e-9, "k-means inertia increased"
        history.append(inertia)

        new = np.empty_like(centroids)
        taken: set[int] = set()
        point_d = d[np.arange(n), labels]
        for c in range(k):
            mask = labels == c
            if mask.any():
                new[c] = x[mask].mean(axis=0)
                continue
            # empty cluster: move it to the point farthest from its centre
            order = np.argsort(-point_d, kind="stable")
            far = next(int(i) for i in order if int(i) not in taken)
            taken.add(far)
            new[c] = x[far]
            point_d[far] = 0.0
        shift = float(np.sqrt(((new - centroids) ** 2).sum(axis=1)).max())
        centroids = new
        if shift < tol:
            break

    d = _sq_dists(x, centroids)
    labels = d.argmin(axis=1)
    inertia = float(d[np.arange(n), labels].sum())
    history.append(inertia)
    return ClusterModel(
        centroids=centroids,
        assignments={it.item_id: int(c) for it, c in zip(items, labels)},
        k=k,
        seed=seed,
        inertia=inertia,
        inertia_history=history,
    )


def cluster_weights(
    model: ClusterModel,
    items: list[EmbeddedItem],
    params: WeightParams | None = None,
) -> list[float]:
    """Normalized per-cluster weights; clusters with too many invalid items get 0."""
    p = params or WeightParams()
    by_id = {it.item_id: it for it in items}
    raw = []
    for members in model.members():
        group = [by_id[m] for m in members]
        if not group:
            raw.append(0.0)
            continue
        invalid = sum(it.invalid for it in group) / len(group)
        valid = [it for it in group if not it.invalid]
        if invalid > p.gamma or not valid:
            raw.append(0.0)
            continue
        fractions = [
            sum(1 for it in valid if (it.tier or DifficultyTier.EASY) is t) / len(valid)
            for t in DifficultyTier
        ]
        mix = sum(p.beta(t) * f for t, f in zip(DifficultyTier, fractions))
        if p.entropy_bonus:
            entropy = -sum(f * math.log(f) for f in fractions if f > 0) / math.log(3)
            mix *= 1.0 + p.entropy_bonus * entropy
        raw.append(len(group) ** p.alpha * mix)
    total = math.fsum(raw)
    if total <= 0:
        raise AllClustersFiltered("every cluster was filtered out")
    return [w / total for w in raw]


def largest_remainder(weights: list[float], total: int) -> list[int]:
    exact = [w * total for w in weights]
    quotas = [math.floor(e) for e in exact]
    short = total - sum(quotas)
    order = sorted(range(len(weights)), key=lambda i: (-(exact[i] - quotas[i]), i))
    for i in order[:short]:
        quotas[i] += 1
    return quotas


def _allocate(weights: list[float], capacity: list[int], budget: int) -> list[int]:
    """Largest-remainder quotas, spilling what full clusters cannot absorb."""
    quotas = [0] * len(weights)
    remaining = budget
    open_ = [i for i, w in enumerate(weights) if w > 0 and capacity[i] > 0]
    while remaining > 0 and open_:
        w_sum = math.fsum(weights[i] for i in open_)
        share = largest_remainder([weights[i] / w_sum for i in open_], remaining)
        for i, q in zip(open_, share):
            take = min(q, capacity[i] - quotas[i])
            quotas[i] += take
            remaining -= take
        open_ = [i for i in open_ if quotas[i] < capacity[i]]
    return quotas


def _weighted_draw(group: list[EmbeddedItem], m: int, rng: np.random.Generator, p: WeightParams) -> list[str]:
    # Efraimidis-Spirakis keys u^(1/w): top-m keys give a weighted sample without replacement
    if m <= 0:
        return []
    w = np.array([p.beta(it.tier) for it in group], dtype=float)
    u = rng.random(len(group))
    keys = np.log(u) / w
    order = np.lexsort((np.arange(len(group)), -keys))
    return [group[i].item_id for i in order[:m]]


def sample_plan(
    weights: list[float],
    model: ClusterModel,
    items: list[EmbeddedItem],
    budget: int,
    seed: int,
    params: WeightParams | None = None,
) -> SamplingPlan:
    if budget < 1:
        raise ValueError("budget must be at least 1")
    p = params or WeightParams()
    by_id = {it.item_id: it for it in items}
    pools = [
        [by_id[m] for m in members if not by_id[m].invalid] if weights[c] > 0 else []
        for c, members in enumerate(model.members())
    ]
    pool_size = sum(len(g) for g in pools)
    if budget > pool_size:
        warnings.warn(
            BudgetExceedsPool(f"budget {budget} exceeds eligible pool {pool_size}; taking whole pool"),
            stacklevel=2,
        )
    quotas = _allocate(weights, [len(g) for g in pools], min(budget, pool_size))
    included: list[str] = []
    for c, (group, q) in enumerate(zip(pools, quotas)):
        rng = np.random.default_rng([seed, c])
        included.extend(_weighted_draw(group, q, rng, p))
    return SamplingPlan(
        weights=list(weights),
        quotas=quotas,
        included=included,
        budget=budget,
        seed=seed,
        cluster_of=dict(model.assignments),
    )


def load_items(path) -> list[EmbeddedItem]:
    with open(path, encoding="utf-8") as fh:
        return [EmbeddedItem.from_dict(json.loads(line)) for line in fh if line.strip()]


def write_plan(plan: SamplingPlan, items: list[EmbeddedItem], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in plan.rows(items):
            fh.write(json.dumps(row) + "\n")
