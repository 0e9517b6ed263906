"""Difficulty tiers from cross-model output agreement, anchored on a target model."""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .contentsim import formula_similarity, text_similarity
from .core import DifficultyTier
from .tableteds import TableParseError, parse_html_table, tree_similarity

log = logging.getLogger(__name__)

TASKS = ("text", "formula", "table")
DEFAULT_THRESHOLDS = {"text": 0.95, "formula": 0.90, "table": 0.90}


class DegenerateMatrix(ValueError):
    pass


@dataclass(frozen=True)
class ModelOutputSet:
    sample_id: str
    task: str
    outputs: tuple[tuple[str, str], ...]  # (model_name, content)
    target_index: int = 0

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if not 0 <= self.target_index < len(self.outputs):
            raise ValueError("target_index out of range")

    @classmethod
    def from_dict(cls, d: dict) -> "ModelOutputSet":
        outputs = tuple((str(o["model"]), o.get("content", "") or "") for o in d["outputs"])
        return cls(str(d["sample_id"]), str(d["task"]).lower(), outputs, int(d.get("target_index", 0)))


@dataclass
class ConsistencyRecord:
    sample_id: str
    pairwise: np.ndarray
    tier: DifficultyTier
    thresholds_used: float
    diagnostics: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "tier": self.tier.label,
            "pairwise": [[round(float(v), 6) for v in row] for row in self.pairwise],
        }


def pairwise_consistency(sample: ModelOutputSet) -> np.ndarray:
    contents = [c for _, c in sample.outputs]
    k = len(contents)
    mat = np.eye(k)
    if sample.task == "table":
        trees = []
        for name, c in sample.outputs:
            try:
                trees.append(parse_html_table(c))
            except TableParseError as e:
                log.warning("%s/%s: unparseable table (%s)", sample.sample_id, name, e)
                trees.append(None)

        def sim(i, j):
            if trees[i] is None or trees[j] is None:
                return 0.0
            return tree_similarity(trees[i], trees[j])
    else:
        fn = text_similarity if sample.task == "text" else formula_similarity

        def sim(i, j):
            return fn(contents[i], contents[j])

    for i in range(k):
        for j in range(i + 1, k):
            mat[i, j] = mat[j, i] = sim(i, j)
    return mat


def classify_difficulty(pairwise, target_index: int, tau: float) -> DifficultyTier:
    """Easy: target agrees with some external model. Medium: two externals agree
    with each other while the target agrees with none. Hard: no agreement."""
    m = np.asarray(pairwise, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 3:
        raise DegenerateMatrix(f"need a square matrix of size >= 3, got {m.shape}")
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    k = m.shape[0]
    externals = [e for e in range(k) if e != target_index]
    if any(m[target_index, e] >= tau for e in externals):
        return DifficultyTier.EASY
    if any(m[a, b] >= tau for i, a in enumerate(externals) for b in externals[i + 1:]):
        return DifficultyTier.MEDIUM
    return DifficultyTier.HARD


def stratify_manifest(
    samples: list[ModelOutputSet],
    thresholds: dict[str, float] | None = None,
) -> list[ConsistencyRecord]:
    taus = {**DEFAULT_THRESHOLDS, **(thresholds or {})}
    records = []
    for s in sorted(samples, key=lambda s: s.sample_id):
        tau = taus[s.task]
        try:
            mat = pairwise_consistency(s)
            tier = classify_difficulty(mat, s.target_index, tau)
            diag = []
        except (DegenerateMatrix, ValueError) as e:
            # unassessable samples are not safe to auto-annotate
            mat = np.eye(len(s.outputs))
            tier = DifficultyTier.HARD
            diag = [f"unassessable: {e}"]
        records.append(ConsistencyRecord(s.sample_id, mat, tier, tau, diag))
    counts = tier_counts(records)
    log.info("tier counts: %s", counts)
    return records


def tier_counts(records: list[ConsistencyRecord]) -> dict[str, int]:
    c = Counter(r.tier for r in records)
    return {t.label: c.get(t, 0) for t in DifficultyTier}


def load_samples(path) -> list[ModelOutputSet]:
    with open(path, encoding="utf-8") as fh:
        return [ModelOutputSet.from_dict(json.loads(line)) for line in fh if line.strip()]


def write_records(records: list[ConsistencyRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r.to_dict(), ensure_ascii=False) + "\n")
