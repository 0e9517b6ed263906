"""Cluster synthetic embeddings and compare tier mix before and after difficulty-aware sampling."""

import argparse
from collections import Counter

import numpy as np

from docbench.core import DifficultyTier
from docbench.ddas import EmbeddedItem, WeightParams, cluster_weights, kmeans, sample_plan


def synthetic_pool(n: int, seed: int) -> list[EmbeddedItem]:
    rng = np.random.default_rng(seed)
    # four blobs; blob 0 is large and mostly easy, the others are smaller and harder
    sizes = [int(n * f) for f in (0.55, 0.2, 0.15, 0.1)]
    mixes = [(0.9, 0.07, 0.03), (0.4, 0.4, 0.2), (0.2, 0.5, 0.3), (0.3, 0.2, 0.5)]
    items = []
    for b, (size, mix) in enumerate(zip(sizes, mixes)):
        centre = rng.normal(0, 10, 16)
        for v in centre + rng.normal(0, 1, (size, 16)):
            tier = DifficultyTier(int(rng.choice(3, p=mix)))
            items.append(EmbeddedItem(f"b{b}-{len(items):05d}", tuple(v.tolist()), tier, bool(rng.random() < 0.02)))
    return items


def mix(items) -> str:
    c = Counter(it.tier.label for it in items)
    total = sum(c.values())
    return " ".join(f"{t.label}={c.get(t.label, 0) / total:.2f}" for t in DifficultyTier)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--items", type=int, default=5000)
    ap.add_argument("--budget", type=int, default=1000)
    ap.add_argument("--k", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    pool = synthetic_pool(args.items, args.seed)
    model = kmeans(pool, args.k, args.seed)
    params = WeightParams()
    weights = cluster_weights(model, pool, params)
    plan = sample_plan(weights, model, pool, args.budget, args.seed, params)
    by_id = {it.item_id: it for it in pool}
    sizes = [len(m) for m in model.members()]
    print("cluster sizes:", sizes)
    print("cluster weights:", [round(w, 3) for w in weights])
    print("quotas:", plan.quotas)
    print("pool tier mix:   ", mix(pool))
    print("sampled tier mix:", mix(by_id[i] for i in plan.included))


if __name__ == "__main__":
    main()
