"""Tiered benchmark evaluation: page scoring, tier means, overall score, reports."""

from __future__ import annotations

import enum
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .contentsim import reading_order_edit
from .core import TEXT_CATEGORIES, Category, DocElement, check_unique_order
from .extract import extract_markdown_elements
from .mgam import MatchResult, MgamLimits, SimFn, hungarian, mgam_match
from .tableteds import TableParseError, parse_html_table, table_to_text, teds_pair

log = logging.getLogger(__name__)

OFFICIAL_TIER_COUNTS = {"base": 1355, "hard": 296, "full": 1651}
# a predicted table counts as recognized text only if it matches a text block at least this well
TABLE_AS_TEXT_MIN_SIM = 0.5


class RangeError(ValueError):
    pass


class TierLabel(str, enum.Enum):
    BASE = "base"
    HARD = "hard"
    FULL = "full"


@dataclass
class PageScore:
    """Scores for one page; ``None`` marks a metric whose category is absent from GT."""

    page_id: str
    text_edit: float | None
    formula_score: float | None
    teds: float | None
    teds_s: float | None
    read_order_edit: float | None
    counts: dict[str, int] = field(default_factory=dict)
    diagnostics: list[str] = field(default_factory=list)


@dataclass
class PageManifestEntry:
    page_id: str
    base: bool
    hard: bool
    gt_elements: list[DocElement]
    image_path: str | None = None

    def in_tier(self, tier: TierLabel) -> bool:
        if tier is TierLabel.BASE:
            return self.base
        if tier is TierLabel.HARD:
            return self.hard
        return self.base or self.hard

    @classmethod
    def from_dict(cls, d: dict) -> "PageManifestEntry":
        page_id = str(d["page_id"])
        tiers = d.get("tiers", [d["tier"]] if "tier" in d else [])
        tiers = {str(t).lower() for t in tiers}
        unknown = tiers - {"base", "hard"}
        if unknown:
            raise ValueError(f"page {page_id}: unknown tier(s) {sorted(unknown)}")
        elements = [DocElement.from_dict(e, page_id) for e in d.get("gt_elements", [])]
        check_unique_order(elements)
        for el in elements:
            if el.category is Category.TABLE and el.content:
                parse_html_table(el.content)  # corrupt GT tables fail at ingestion
        return cls(page_id, "base" in tiers, "hard" in tiers, elements, d.get("image_path"))

    def to_dict(self) -> dict:
        tiers = [t for t, on in (("base", self.base), ("hard", self.hard)) if on]
        return {
            "page_id": self.page_id,
            "tiers": tiers,
            "gt_elements": [e.to_dict() for e in self.gt_elements],
            "image_path": self.image_path,
        }


@dataclass
class BenchmarkReport:
    model_name: str
    tier: str
    text_edit: float | None
    formula: float | None
    teds: float | None
    teds_s: float | None
    read_order: float | None
    overall: float | None
    page_count: int
    metric_page_counts: dict[str, int] = field(default_factory=dict)
    diagnostics: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2, ensure_ascii=False)

    def to_markdown(self) -> str:
        def pct(v):
            return "-" if v is None else f"{v * 100:.2f}"

        def frac(v):
            return "-" if v is None else f"{v:.3f}"

        overall = "-" if self.overall is None else f"{self.overall:.2f}"
        return "\n".join([
            "| Model | Tier | Overall ↑ | Text Edit ↓ | Formula ↑ | Table TEDS ↑ | Table TEDS-S ↑ | Read Order Edit ↓ |",
            "|---|---|---|---|---|---|---|---|",
            f"| {self.model_name} | {self.tier} | {overall} | {frac(self.text_edit)} | {pct(self.formula)} "
            f"| {pct(self.teds)} | {pct(self.teds_s)} | {frac(self.read_order)} |",
        ])


def overall_score(text_edit: float, formula: float, teds: float) -> float:
    """Mean of (1 - text edit), formula and TEDS, on a 0-100 scale."""
    for name, v in (("text_edit", text_edit), ("formula", formula), ("teds", teds)):
        if not (isinstance(v, (int, float)) and 0.0 <= v <= 1.0):
            raise RangeError(f"{name}={v!r} outside [0, 1]")
    return ((1.0 - text_edit) * 100 + formula * 100 + teds * 100) / 3


# --- page level -------------------------------------------------------------------


def _by_order(elements: Iterable[DocElement]) -> list[DocElement]:
    return sorted(elements, key=lambda e: e.order_index)


def _order_keys(result: MatchResult, units: list[DocElement]) -> dict[int, tuple[int, int]]:
    """GT index -> sort key of the prediction it matched (pairs with zero similarity excluded)."""
    keys = {}
    for (block, j), s in zip(result.chosen.pairs, result.chosen.pair_sims):
        if s > 0:
            keys[j] = (units[block.sources[0]].order_index, block.start)
    return keys


def evaluate_page(
    gt: list[DocElement],
    pred: list[DocElement],
    limits: MgamLimits | None = None,
    page_id: str | None = None,
) -> PageScore:
    page_id = page_id if page_id is not None else (gt[0].page_id if gt else (pred[0].page_id if pred else ""))
    diagnostics: list[str] = []

    gt_text = _by_order(e for e in gt if e.category in TEXT_CATEGORIES)
    gt_formula = _by_order(e for e in gt if e.category is Category.FORMULA)
    gt_table = _by_order(e for e in gt if e.category is Category.TABLE)
    pred_text = _by_order(e for e in pred if e.category in TEXT_CATEGORIES)
    pred_formula = _by_order(e for e in pred if e.category is Category.FORMULA)
    pred_table = _by_order(e for e in pred if e.category is Category.TABLE)

    order_keys: dict[str, tuple[int, int]] = {}
    consumed_tables: set[str] = set()

    text_edit = None
    if gt_text:
        gts = [g.content for g in gt_text]
        result = mgam_match([p.content for p in pred_text], gts, SimFn.TEXT, limits)
        units = pred_text
        rendered = []
        for t in pred_table:
            try:
                rendered.append((t, table_to_text(parse_html_table(t.content))))
            except TableParseError:
                continue
        if rendered:
            as_text = {t.id: s for t, s in rendered}
            tables = [t for t, _ in rendered]
            # two passes: find which tables really carry the text, then rematch with only those,
            # so tables that really are tables do not count as unmatched text
            for _ in range(2):
                mixed = _by_order(pred_text + tables)
                alt = mgam_match([as_text.get(u.id, u.content) for u in mixed], gts, SimFn.TEXT, limits)
                used = {
                    mixed[i].id
                    for (block, _), sim in zip(alt.chosen.pairs, alt.chosen.pair_sims) if sim >= TABLE_AS_TEXT_MIN_SIM
                    for i in block.sources if mixed[i].id in as_text
                }
                tables = [t for t in tables if t.id in used]
                if not tables:
                    break
            if tables and alt.aggregate > result.aggregate:
                result, units = alt, mixed
                consumed_tables = used
                diagnostics.append(f"tables matched as text: {sorted(consumed_tables)}")
        text_edit = 1.0 - result.aggregate
        if result.approximate:
            diagnostics.append("text matching used beam search")
        order_keys.update({gt_text[j].id: k for j, k in _order_keys(result, units).items()})

    formula_score = None
    if gt_formula:
        result = mgam_match([p.content for p in pred_formula], [g.content for g in gt_formula], SimFn.FORMULA, limits)
        formula_score = result.aggregate
        if result.approximate:
            diagnostics.append("formula matching used beam search")
        order_keys.update({gt_formula[j].id: k for j, k in _order_keys(result, pred_formula).items()})

    teds_mean = teds_s_mean = None
    if gt_table:
        candidates = [t for t in pred_table if t.id not in consumed_tables]
        gt_trees = [parse_html_table(g.content) for g in gt_table]
        pair_scores = {}
        matched: dict[int, int] = {}
        if candidates:
            cost = np.ones((len(gt_table), len(candidates)))
            for i, tree in enumerate(gt_trees):
                for k, p in enumerate(candidates):
                    res = pair_scores[i, k] = teds_pair(tree, p.content)
                    if res.diagnostic and i == 0:
                        diagnostics.append(f"{p.id}: {res.diagnostic}")
                    cost[i, k] = 1.0 - res.teds_s
            matched = dict(hungarian(cost))
            for i, k in matched.items():
                if pair_scores[i, k].teds_s > 0:
                    order_keys[gt_table[i].id] = (candidates[k].order_index, 0)
        teds_vals = [pair_scores[i, matched[i]].teds if i in matched else 0.0 for i in range(len(gt_table))]
        teds_s_vals = [pair_scores[i, matched[i]].teds_s if i in matched else 0.0 for i in range(len(gt_table))]
        teds_mean = math.fsum(teds_vals) / len(teds_vals)
        teds_s_mean = math.fsum(teds_s_vals) / len(teds_s_vals)

    scored_gt = _by_order(gt_text + gt_formula + gt_table)
    read_order = None
    if scored_gt:
        gt_ids = [g.id for g in scored_gt]
        position = {g: i for i, g in enumerate(gt_ids)}
        matched_ids = sorted(order_keys, key=lambda g: (order_keys[g], position[g]))
        read_order = reading_order_edit(gt_ids, matched_ids)

    counts = {c.value: 0 for c in Category}
    for el in gt:
        counts[el.category.value] += 1
    return PageScore(page_id, text_edit, formula_score, teds_mean, teds_s_mean, read_order,
                     {k: v for k, v in counts.items() if v}, diagnostics)


# --- manifest level ---------------------------------------------------------------


def validate_tier_counts(entries: Iterable[PageManifestEntry], expected: Mapping[str, int] | None = None) -> dict[str, int]:
    """Check Base/Hard disjointness and Full = Base + Hard, optionally against expected counts."""
    entries = list(entries)
    ids = [e.page_id for e in entries]
    if len(ids) != len(set(ids)):
        raise ValueError("duplicate page_id in manifest")
    both = [e.page_id for e in entries if e.base and e.hard]
    if both:
        raise ValueError(f"pages in both base and hard: {both[:5]}")
    counts = {t.value: sum(e.in_tier(t) for e in entries) for t in TierLabel}
    if counts["full"] != counts["base"] + counts["hard"]:
        raise ValueError(f"full={counts['full']} != base+hard={counts['base'] + counts['hard']}")
    if expected is not None:
        for tier, n in expected.items():
            if counts[tier] != n:
                raise ValueError(f"tier {tier}: expected {n} pages, found {counts[tier]}")
    return counts


def predictions_from_record(rec: dict) -> list[DocElement]:
    page_id = str(rec["page_id"])
    if "elements" in rec:
        return [DocElement.from_dict(e, page_id) for e in rec["elements"]]
    return extract_markdown_elements(rec.get("markdown", ""), page_id=page_id)


def _evaluate_job(args) -> PageScore:
    entry, pred, limits = args
    return evaluate_page(entry.gt_elements, pred, limits, page_id=entry.page_id)


def _mean(values: list[float | None]) -> tuple[float | None, int]:
    vals = [v for v in values if v is not None]
    if not vals:
        return None, 0
    return math.fsum(vals) / len(vals), len(vals)


def aggregate_pages(scores: list[PageScore], model_name: str, tier: TierLabel | str) -> BenchmarkReport:
    scores = sorted(scores, key=lambda s: s.page_id)
    text, n_text = _mean([s.text_edit for s in scores])
    formula, n_formula = _mean([s.formula_score for s in scores])
    teds_v, n_table = _mean([s.teds for s in scores])
    teds_s_v, _ = _mean([s.teds_s for s in scores])
    ro, n_ro = _mean([s.read_order_edit for s in scores])
    if None not in (text, formula, teds_v):
        overall = overall_score(text, formula, teds_v)
    else:
        parts = [v for v in ((None if text is None else 1.0 - text), formula, teds_v) if v is not None]
        overall = math.fsum(parts) * 100 / len(parts) if parts else None
    return BenchmarkReport(
        model_name=model_name,
        tier=TierLabel(tier).value,
        text_edit=text,
        formula=formula,
        teds=teds_v,
        teds_s=teds_s_v,
        read_order=ro,
        overall=overall,
        page_count=len(scores),
        metric_page_counts={"text": n_text, "formula": n_formula, "table": n_table, "read_order": n_ro},
        diagnostics=sum(len(s.diagnostics) for s in scores),
    )


def evaluate_pages(
    manifest: list[PageManifestEntry],
    predictions: Mapping[str, list[DocElement]],
    tier: TierLabel | str = TierLabel.FULL,
    limits: MgamLimits | None = None,
    jobs: int = 1,
) -> list[PageScore]:
    tier = TierLabel(tier)
    known = {e.page_id for e in manifest}
    for pid in sorted(set(predictions) - known):
        log.warning("prediction for unknown page_id %r ignored", pid)
    pages = sorted((e for e in manifest if e.in_tier(tier)), key=lambda e: e.page_id)
    work = [(e, predictions.get(e.page_id, []), limits) for e in pages]
    if jobs <= 1:
        return [_evaluate_job(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_evaluate_job, work, chunksize=max(1, len(work) // (jobs * 8))))


def evaluate_manifest(
    manifest: list[PageManifestEntry],
    predictions: Mapping[str, list[DocElement]],
    tier: TierLabel | str = TierLabel.FULL,
    model_name: str = "model",
    limits: MgamLimits | None = None,
    jobs: int = 1,
) -> BenchmarkReport:
    scores = evaluate_pages(manifest, predictions, tier, limits, jobs)
    return aggregate_pages(scores, model_name, tier)


def load_manifest(lines: Iterable[str]) -> list[PageManifestEntry]:
    entries = [PageManifestEntry.from_dict(json.loads(l)) for l in lines if l.strip()]
    validate_tier_counts(entries)
    return entries


def load_predictions(lines: Iterable[str]) -> dict[str, list[DocElement]]:
    out = {}
    for l in lines:
        if l.strip():
            rec = json.loads(l)
            out[str(rec["page_id"])] = predictions_from_record(rec)
    return out
