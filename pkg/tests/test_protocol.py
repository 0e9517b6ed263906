import json
import math
import random

import pytest
from hypothesis import given, strategies as st

from docbench.core import Category, DocElement
from docbench.protocol import (
    OFFICIAL_TIER_COUNTS,
    BenchmarkReport,
    PageManifestEntry,
    PageScore,
    RangeError,
    TierLabel,
    aggregate_pages,
    evaluate_manifest,
    evaluate_page,
    load_manifest,
    overall_score,
    validate_tier_counts,
)

TABLE = "<table><tr><td>1</td><td>2</td></tr><tr><td>3</td><td>4</td></tr></table>"


def el(i, cat, content, page="p"):
    return DocElement(f"{page}#{i}", page, cat, content, order_index=i)


def page(page_id="p"):
    return [
        el(0, Category.TITLE, "Results", page_id),
        el(1, Category.TEXT, "The measured values are listed below.", page_id),
        el(2, Category.FORMULA, "E = m c^{2}", page_id),
        el(3, Category.TABLE, TABLE, page_id),
        el(4, Category.FOOTER, "page 3", page_id),
    ]


def test_perfect_prediction():
    s = evaluate_page(page(), page())
    assert (s.text_edit, s.formula_score, s.teds, s.teds_s, s.read_order_edit) == (0.0, 1.0, 1.0, 1.0, 0.0)


def test_empty_prediction():
    s = evaluate_page(page(), [])
    assert (s.text_edit, s.formula_score, s.teds) == (1.0, 0.0, 0.0)


def test_swapped_pair_read_order():
    gt = [el(0, Category.TEXT, "alpha one"), el(1, Category.TEXT, "beta two"), el(2, Category.TEXT, "gamma three")]
    pred = [el(0, Category.TEXT, "alpha one"), el(1, Category.TEXT, "gamma three"), el(2, Category.TEXT, "beta two")]
    s = evaluate_page(gt, pred)
    assert s.text_edit == 0.0
    assert s.read_order_edit == pytest.approx(2 / 3)


def test_footer_and_header_ignored():
    gt = page()
    pred = [e for e in gt if e.category is not Category.FOOTER] + [el(9, Category.HEADER, "junk")]
    assert evaluate_page(gt, pred).text_edit == 0.0


def test_text_recognized_as_table_is_credited():
    gt = [el(0, Category.TEXT, "a b\nc d")]
    pred = [el(0, Category.TABLE, "<table><tr><td>a</td><td>b</td></tr><tr><td>c</td><td>d</td></tr></table>")]
    s = evaluate_page(gt, pred)
    assert s.text_edit == 0.0
    assert s.teds is None
    assert any("tables matched as text" in d for d in s.diagnostics)


def test_consumed_table_leaves_table_pool():
    gt = [el(0, Category.TEXT, "a b c d"), el(1, Category.TABLE, TABLE)]
    as_table = "<table><tr><td>a</td><td>b</td></tr><tr><td>c</td><td>d</td></tr></table>"
    pred = [el(0, Category.TABLE, as_table), el(1, Category.TABLE, TABLE)]
    s = evaluate_page(gt, pred)
    assert s.text_edit == 0.0 and s.teds == 1.0


def test_malformed_predicted_table_scores_zero():
    gt = [el(0, Category.TABLE, TABLE)]
    s = evaluate_page(gt, [el(0, Category.TABLE, "<table><tr><td>1")])
    assert s.teds == 0.0 and s.teds_s == 0.0 and s.diagnostics


def test_overall_examples():
    assert overall_score(0.036, 0.9729, 0.9342) == pytest.approx(95.70, abs=0.005)
    assert overall_score(0.044, 0.9699, 0.9283) == pytest.approx(95.14, abs=0.005)
    assert overall_score(0, 1, 1) == 100.0
    for bad in [(-0.1, 1, 1), (0, 1.5, 1), (0, 1, float("nan"))]:
        with pytest.raises(RangeError):
            overall_score(*bad)


unit = st.floats(0, 1)


@given(unit, unit, unit, unit)
def test_overall_monotone(t, f, s, delta):
    base = overall_score(t, f, s)
    assert overall_score(min(1, t + delta), f, s) <= base + 1e-9
    assert overall_score(t, min(1, f + delta), s) >= base - 1e-9
    assert overall_score(t, f, min(1, s + delta)) >= base - 1e-9


def entry(pid, tier, elements):
    return PageManifestEntry(pid, tier == "base", tier == "hard", elements)


def test_manifest_perfect_two_pages():
    manifest = [entry("a", "base", page("a")), entry("b", "hard", page("b"))]
    preds = {e.page_id: e.gt_elements for e in manifest}
    report = evaluate_manifest(manifest, preds, TierLabel.FULL, "perfect")
    assert report.overall == 100.0 and report.page_count == 2


def test_hand_computed_means():
    scores = [
        PageScore("1", 0.1, 0.9, 0.8, 0.9, 0.0),
        PageScore("2", 0.3, None, 0.6, 0.7, 0.5),
        PageScore("3", 0.2, 0.5, None, None, 0.1),
    ]
    r = aggregate_pages(scores, "m", "full")
    assert r.text_edit == pytest.approx(0.2)
    assert r.formula == pytest.approx(0.7)
    assert r.teds == pytest.approx(0.7) and r.teds_s == pytest.approx(0.8)
    assert r.read_order == pytest.approx(0.2)
    assert r.overall == pytest.approx((80 + 70 + 70) / 3)
    assert r.metric_page_counts == {"text": 3, "formula": 2, "table": 2, "read_order": 3}


def test_report_is_order_independent_and_deterministic():
    scores = [PageScore(str(i), i / 10, 1 - i / 10, 0.5, 0.5, 0.1) for i in range(5)]
    a = aggregate_pages(scores, "m", "base").to_json()
    b = aggregate_pages(list(reversed(scores)), "m", "base").to_json()
    assert a == b
    md = aggregate_pages(scores, "m", "base").to_markdown()
    assert md.splitlines()[0].startswith("| Model | Tier | Overall")


def test_full_mean_between_base_and_hard():
    rng = random.Random(3)
    for _ in range(50):
        base = [PageScore(f"b{i}", rng.random(), rng.random(), rng.random(), rng.random(), rng.random()) for i in range(rng.randint(1, 6))]
        hard = [PageScore(f"h{i}", rng.random(), rng.random(), rng.random(), rng.random(), rng.random()) for i in range(rng.randint(1, 6))]
        rb, rh, rf = (aggregate_pages(s, "m", t) for s, t in ((base, "base"), (hard, "hard"), (base + hard, "full")))
        for field in ("text_edit", "formula", "teds", "read_order"):
            lo, hi = sorted([getattr(rb, field), getattr(rh, field)])
            assert lo - 1e-12 <= getattr(rf, field) <= hi + 1e-12


def test_tier_counts_official_shape():
    manifest = [entry(f"b{i}", "base", []) for i in range(1355)] + [entry(f"h{i}", "hard", []) for i in range(296)]
    counts = validate_tier_counts(manifest, OFFICIAL_TIER_COUNTS)
    assert counts == {"base": 1355, "hard": 296, "full": 1651}
    with pytest.raises(ValueError):
        validate_tier_counts(manifest[:-1], OFFICIAL_TIER_COUNTS)


def test_manifest_validation():
    with pytest.raises(ValueError):
        validate_tier_counts([entry("x", "base", []), entry("x", "hard", [])])
    bad = {"page_id": "x", "tier": "base", "gt_elements": [{"id": "t", "category": "table", "content": "<table><tr>"}]}
    with pytest.raises(ValueError):
        PageManifestEntry.from_dict(bad)
    good = {"page_id": "x", "tiers": ["hard"], "gt_elements": [{"id": "t", "category": "text", "content": "a"}]}
    e = PageManifestEntry.from_dict(good)
    assert e.hard and not e.base and PageManifestEntry.from_dict(e.to_dict()) == e
    assert load_manifest([json.dumps(good), ""])[0].page_id == "x"


def test_unknown_prediction_page_warns(caplog):
    manifest = [entry("a", "base", page("a"))]
    evaluate_manifest(manifest, {"a": page("a"), "zzz": []}, "base")
    assert "zzz" in caplog.text


def test_parallel_equals_serial():
    manifest = [entry(f"p{i}", "base" if i % 3 else "hard", page(f"p{i}")) for i in range(12)]
    rng = random.Random(0)
    preds = {e.page_id: rng.sample(e.gt_elements, k=rng.randint(0, len(e.gt_elements))) for e in manifest}
    serial = evaluate_manifest(manifest, preds, "full", jobs=1).to_json()
    parallel = evaluate_manifest(manifest, preds, "full", jobs=3).to_json()
    assert serial == parallel


def test_report_json_fields():
    r = BenchmarkReport("m", "full", 0.1, 0.9, 0.8, 0.85, 0.2, 86.67, 3)
    d = json.loads(r.to_json())
    assert d["overall"] == 86.67 and d["page_count"] == 3
    assert not math.isnan(d["teds_s"])


def test_table_not_consumed_by_weak_text_match():
    gt = [el(0, Category.TEXT, "a long paragraph that the model never produced"), el(1, Category.TABLE, TABLE)]
    s = evaluate_page(gt, [el(0, Category.TABLE, TABLE)])
    assert s.teds == 1.0 and s.text_edit == 1.0
