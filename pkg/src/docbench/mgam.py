"""Multi-granularity adaptive matching of prediction elements to ground truth.

The ground-truth segmentation is never changed. Three candidate matchings are
built on the prediction side and the best aggregate wins:

1. Hungarian matching at the original prediction granularity.
2. Hungarian matching after splitting predictions at line-break delimiters.
3. Hungarian matching for every contiguous partition of the split fragments
   (exhaustive up to ``exact_gap_limit`` gaps, beam search beyond).
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .contentsim import formula_similarity, normalize_text, text_similarity


class SimFn(str, enum.Enum):
    TEXT = "text"
    FORMULA = "formula"

    def __call__(self, a: str, b: str) -> float:
        if self is SimFn.TEXT:
            return text_similarity(a, b)
        return formula_similarity(a, b)


@dataclass(frozen=True)
class MgamLimits:
    exact_gap_limit: int = 12
    beam_width: int = 64

    def __post_init__(self):
        if not 0 <= self.exact_gap_limit <= 20:
            raise ValueError("exact_gap_limit must be in [0, 20]")
        if self.beam_width < 1:
            raise ValueError("beam_width must be positive")


PAD_COST = 1.0


def hungarian(cost) -> list[tuple[int, int]]:
    """Minimum-cost one-to-one assignment, as (row, col) pairs sorted by row.

    Rectangular inputs behave as if padded to square with ``PAD_COST``;
    pairs involving padding are not returned. Empty input gives ``[]``.
    """
    c = np.asarray(cost, dtype=float)
    if c.ndim != 2 or c.shape[0] == 0 or c.shape[1] == 0:
        return []
    if not np.all(np.isfinite(c)):
        raise ValueError("cost matrix must be finite")
    rows, cols = linear_sum_assignment(c)
    return [(int(r), int(k)) for r, k in zip(rows, cols)]


def best_assignment(sims: np.ndarray, gt_w: np.ndarray, block_w: np.ndarray):
    """One-to-one block/GT assignment maximizing the aggregate score.

    The aggregate is a ratio (matched weighted similarity over GT weight plus
    leftover block weight), so it is maximized by Dinkelbach iteration: each
    step solves a linear assignment on ``gt_w * sim + lam * block_w`` and sets
    ``lam`` to the ratio reached. With equal weights this is the plain
    minimum ``1 - sim`` assignment.
    """
    total = float(np.add.reduce(gt_w)) + float(np.add.reduce(block_w))
    gain = sims * gt_w[None, :]
    bw = block_w[:, None]
    lam = 0.0
    best = None
    for _ in range(64):
        rows, cols = linear_sum_assignment(gain + lam * bw if lam else gain, maximize=True)
        num = float(np.add.reduce(gain[rows, cols]))
        ratio = num / (total - float(np.add.reduce(block_w[rows])))
        if best is not None and ratio <= best[2] + 1e-12:
            break
        best = (rows, cols, ratio)
        lam = ratio
    return best


_SPLIT_LATEX = re.compile(r"\\\\|\\newline(?![A-Za-z])|\\cr(?![A-Za-z])")
_SPLIT_TEXT = re.compile(r"\\\\|\\newline(?![A-Za-z])|\\cr(?![A-Za-z])|\n")


def split_predictions(preds: Sequence[str], task: SimFn) -> tuple[list[str], list[int]]:
    pattern = _SPLIT_TEXT if task is SimFn.TEXT else _SPLIT_LATEX
    fine: list[str] = []
    origin: list[int] = []
    for i, p in enumerate(preds):
        for frag in pattern.split(p):
            frag = frag.strip()
            if frag:
                fine.append(frag)
                origin.append(i)
    return fine, origin


def content_weight(s: str) -> int:
    return max(1, len(normalize_text(s)))


def aggregate_score(
    pairs: Sequence[tuple[object, int]],
    pair_sims: Sequence[float],
    gts: Sequence[str],
    unmatched_pred_blocks: Sequence[str],
) -> float:
    """Length-weighted mean similarity over GT, penalizing leftover prediction blocks.

    ``pairs`` holds ``(block, gt_index)``; unmatched GT count with similarity 0.
    """
    gt_w = [content_weight(g) for g in gts]
    denom = sum(gt_w) + sum(content_weight(getattr(b, "content", b)) for b in unmatched_pred_blocks)
    if denom == 0:
        return 1.0
    num = sum(gt_w[j] * s for (_, j), s in zip(pairs, pair_sims))
    return num / denom


@dataclass(frozen=True)
class Block:
    """A contiguous run of prediction units merged into one matching operand."""

    start: int
    stop: int
    content: str
    sources: tuple[int, ...]


@dataclass
class MatchCandidate:
    stage: int
    pairs: list[tuple[Block, int]]
    pair_sims: list[float]
    aggregate: float
    blocks: list[Block] = field(default_factory=list)

    @property
    def unmatched_blocks(self) -> list[Block]:
        used = {id(b) for b, _ in self.pairs}
        return [b for b in self.blocks if id(b) not in used]


@dataclass
class MatchResult:
    chosen: MatchCandidate
    all_stage_scores: tuple[float, float, float]
    unmatched_gt: list[int]
    unmatched_pred_blocks: list[Block]
    approximate: bool = False

    @property
    def aggregate(self) -> float:
        return self.chosen.aggregate


class _Scorer:
    """Caches block contents and similarity rows over a fixed unit list."""

    def __init__(self, units: list[str], origin: list[int], gts: Sequence[str], sim: SimFn):
        self.units = units
        self.origin = origin
        self.gts = list(gts)
        self.sim = sim
        self.gt_w = np.array([content_weight(g) for g in gts], dtype=float)
        self.gt_total = float(self.gt_w.sum())
        self._spans: dict[tuple[int, int], tuple[Block, np.ndarray, int]] = {}

    def span(self, start: int, stop: int):
        key = (start, stop)
        hit = self._spans.get(key)
        if hit is None:
            content = " ".join(self.units[start:stop])
            block = Block(start, stop, content, tuple(sorted(set(self.origin[start:stop]))))
            row = np.array([self.sim(content, g) for g in self.gts], dtype=float)
            hit = self._spans[key] = (block, row, content_weight(content))
        return hit

    def _entries(self, spans):
        entries = [self.span(a, b) for a, b in spans]
        sims = np.array([e[1] for e in entries])
        block_w = np.array([e[2] for e in entries], dtype=float)
        return entries, sims, block_w

    def aggregate(self, spans: list[tuple[int, int]]) -> float:
        """Aggregate score of a partition without building the candidate."""
        if not spans or not self.gts:
            return 1.0 if (not spans and not self.gts) else 0.0
        _, sims, block_w = self._entries(spans)
        return best_assignment(sims, self.gt_w, block_w)[2]

    def score(self, spans: list[tuple[int, int]], stage: int) -> MatchCandidate:
        if not spans or not self.gts:
            blocks = [self.span(a, b)[0] for a, b in spans]
            agg = 1.0 if (not spans and not self.gts) else 0.0
            return MatchCandidate(stage, [], [], agg, blocks)
        entries, sims, block_w = self._entries(spans)
        blocks = [e[0] for e in entries]
        rows, cols, agg = best_assignment(sims, self.gt_w, block_w)
        pairs = [(blocks[r], int(j)) for r, j in zip(rows, cols)]
        pair_sims = [float(sims[r, j]) for r, j in zip(rows, cols)]
        return MatchCandidate(stage, pairs, pair_sims, agg, blocks)


def _spans_from_mask(n: int, mask: int) -> list[tuple[int, int]]:
    spans, start = [], 0
    for gap in range(n - 1):
        if mask >> gap & 1:
            spans.append((start, gap + 1))
            start = gap + 1
    spans.append((start, n))
    return spans


def _partition_upper_bounds(scorer: _Scorer, n: int) -> np.ndarray:
    """Upper bound on the aggregate of every partition, indexed by cut mask.

    Any one-to-one matching gains at most the best GT per block, and at most
    the best block per GT; leftover-block penalties only lower the score.
    """
    m = len(scorer.gts)
    gain = np.zeros((n + 1, n + 1, m))
    for a in range(n):
        for b in range(a + 1, n + 1):
            gain[a, b] = scorer.span(a, b)[1] * scorer.gt_w
    row_best = gain.max(axis=2)
    masks = np.arange(1 << (n - 1))
    start = np.zeros(len(masks), dtype=int)
    by_block = np.zeros(len(masks))
    by_gt = np.zeros((len(masks), m))
    for gap in range(n - 1):
        cut = (masks >> gap) & 1 == 1
        s = start[cut]
        by_block[cut] += row_best[s, gap + 1]
        by_gt[cut] = np.maximum(by_gt[cut], gain[s, gap + 1])
        start[cut] = gap + 1
    by_block += row_best[start, n]
    by_gt = np.maximum(by_gt, gain[start, n]).sum(axis=1)
    return np.minimum(by_block, by_gt) / scorer.gt_total


def _stage3_exact(scorer: _Scorer, n: int) -> MatchCandidate:
    """Best contiguous partition; ties go to the lowest cut mask."""
    if not scorer.gts:
        return scorer.score(_spans_from_mask(n, 0), 3)
    bound = _partition_upper_bounds(scorer, n)
    masks = np.arange(len(bound))
    best_mask, best = 0, -1.0
    for mask in np.lexsort((masks, -bound)):
        if bound[mask] + 1e-9 < best:
            break  # every remaining partition is bounded below the incumbent
        agg = scorer.aggregate(_spans_from_mask(n, int(mask)))
        if agg > best or (agg == best and mask < best_mask):
            best_mask, best = int(mask), agg
    return scorer.score(_spans_from_mask(n, best_mask), 3)


def _stage3_beam(scorer: _Scorer, n: int, width: int) -> MatchCandidate:
    # state: closed spans plus the start of the open block
    beam: list[tuple[tuple[tuple[int, int], ...], int]] = [((), 0)]
    for t in range(1, n):
        expanded = []
        for closed, open_start in beam:
            expanded.append((closed, open_start))  # merge fragment t into open block
            expanded.append((closed + ((open_start, t),), t))  # split before t
        scored = []
        for k, (closed, open_start) in enumerate(expanded):
            agg = scorer.aggregate(list(closed) + [(open_start, t + 1)])
            scored.append((-agg, k, closed, open_start))
        scored.sort(key=lambda x: (x[0], x[1]))
        beam = [(c, o) for _, _, c, o in scored[:width]]
    best_spans, best = None, -1.0
    for closed, open_start in beam:
        spans = list(closed) + [(open_start, n)]
        agg = scorer.aggregate(spans)
        if agg > best:
            best_spans, best = spans, agg
    return scorer.score(best_spans, 3)


def mgam_match(
    preds: Sequence[str],
    gts: Sequence[str],
    sim: SimFn,
    limits: MgamLimits | None = None,
) -> MatchResult:
    limits = limits or MgamLimits()
    preds = list(preds)

    s1 = _Scorer(preds, list(range(len(preds))), gts, sim)
    c1 = s1.score([(i, i + 1) for i in range(len(preds))], 1)

    fine, origin = split_predictions(preds, sim)
    s23 = _Scorer(fine, origin, gts, sim)
    c2 = s23.score([(i, i + 1) for i in range(len(fine))], 2)

    approximate = False
    n = len(fine)
    if n == 0:
        c3 = s23.score([], 3)
    elif n - 1 <= limits.exact_gap_limit:
        c3 = _stage3_exact(s23, n)
    else:
        c3 = _stage3_beam(s23, n, limits.beam_width)
        approximate = True

    chosen = c1
    for c in (c2, c3):
        if c.aggregate > chosen.aggregate:
            chosen = c
    matched_gt = {j for _, j in chosen.pairs}
    return MatchResult(
        chosen=chosen,
        all_stage_scores=(c1.aggregate, c2.aggregate, c3.aggregate),
        unmatched_gt=[j for j in range(len(gts)) if j not in matched_gt],
        unmatched_pred_blocks=chosen.unmatched_blocks,
        approximate=approximate,
    )
