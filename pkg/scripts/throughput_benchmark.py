"""Time end-to-end evaluation of a synthetic manifest with imperfect stub predictions."""

import argparse
import random
import time

from docbench.core import Category, DocElement
from docbench.protocol import PageManifestEntry, evaluate_manifest

WORDS = ["data", "model", "table", "value", "result", "page", "layout", "order", "score", "text"]


def make_page(rng: random.Random, pid: str):
    gt = []
    for i in range(rng.randint(6, 12)):
        r = rng.random()
        if r < 0.7:
            cat, content = Category.TEXT, " ".join(rng.choice(WORDS) for _ in range(rng.randint(5, 25)))
        elif r < 0.9:
            cat, content = Category.FORMULA, rng.choice(["a^{2}+b^{2}=c^{2}", "\\frac{x}{y}", "\\sum_{i} x_{i}"])
        else:
            rows = "".join("<tr>" + "<td>1</td>" * 3 + "</tr>" for _ in range(3))
            cat, content = Category.TABLE, f"<table>{rows}</table>"
        gt.append(DocElement(f"{pid}-{i}", pid, cat, content, order_index=i))
    pred = []
    for e in gt:
        if rng.random() < 0.1:
            continue
        content = e.content
        if e.category is Category.TEXT and rng.random() < 0.4:
            words = content.split()
            cut = rng.randint(1, len(words))
            pred.append(DocElement(e.id + "a", pid, e.category, " ".join(words[:cut]), order_index=2 * e.order_index))
            content = " ".join(words[cut:])
        pred.append(DocElement(e.id, pid, e.category, content, order_index=2 * e.order_index + 1))
    return gt, pred


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--pages", type=int, default=1651)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    rng = random.Random(args.seed)
    manifest, preds = [], {}
    for i in range(args.pages):
        pid = f"p{i:05d}"
        gt, pred = make_page(rng, pid)
        manifest.append(PageManifestEntry(pid, i % 5 != 0, i % 5 == 0, gt))
        preds[pid] = pred
    start = time.perf_counter()
    report = evaluate_manifest(manifest, preds, "full", "stub", jobs=args.jobs)
    elapsed = time.perf_counter() - start
    print(report.to_markdown())
    print(f"{args.pages} pages in {elapsed:.1f} s ({1000 * elapsed / args.pages:.1f} ms/page, jobs={args.jobs})")


if __name__ == "__main__":
    main()
