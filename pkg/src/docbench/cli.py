"""``docbench`` command line.

Exit codes: 0 success, 1 bad input (missing file, malformed record, bad flag),
2 anything else.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .assembly import assemble_document, load_decisions
from .cmcv import load_samples, stratify_manifest, tier_counts, write_records
from .config import Config, ConfigError, load_config
from .core import DocElement
from .ddas import cluster_weights, kmeans, load_items, sample_plan, write_plan
from .otsl import OtslError, UnknownPlaceholder, otsl_to_html, parse_otsl, restore_placeholders
from .protocol import (
    OFFICIAL_TIER_COUNTS,
    evaluate_manifest,
    load_manifest,
    load_predictions,
    validate_tier_counts,
)

log = logging.getLogger("docbench")

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2
INPUT_ERRORS = (OSError, ValueError, KeyError, TypeError, ConfigError, OtslError, UnknownPlaceholder)


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; route them to the input-error code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _read_lines(path: str) -> list[str]:
    return Path(path).read_text(encoding="utf-8").splitlines()


def _write(path: str, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")


def cmd_evaluate(args, cfg: Config) -> int:
    manifest = load_manifest(_read_lines(args.gt))
    if args.official:
        validate_tier_counts(manifest, OFFICIAL_TIER_COUNTS)
    preds = load_predictions(_read_lines(args.pred))
    model_name = args.model_name or cfg.report.model_name
    jobs = args.jobs or cfg.report.jobs
    report = evaluate_manifest(manifest, preds, args.tier, model_name, cfg.matching, jobs)
    _write(args.out, report.to_json() + "\n")
    md = report.to_markdown()
    if cfg.report.markdown:
        _write(str(Path(args.out).with_suffix(".md")), md + "\n")
    print(md)
    return EXIT_OK


def cmd_stratify(args, cfg: Config) -> int:
    thresholds = {"text": cfg.thresholds.text, "formula": cfg.thresholds.formula, "table": cfg.thresholds.table}
    for task in thresholds:
        flag = getattr(args, f"tau_{task}")
        if flag is not None:
            thresholds[task] = flag
    records = stratify_manifest(load_samples(args.samples), thresholds)
    write_records(records, args.out)
    print(json.dumps(tier_counts(records)))
    return EXIT_OK


def cmd_sample(args, cfg: Config) -> int:
    items = load_items(args.embeddings)
    s = cfg.sampling
    k = args.k if args.k is not None else s.k
    seed = args.seed if args.seed is not None else s.seed
    model = kmeans(items, k, seed, s.max_iter, s.tol)
    weights = cluster_weights(model, items, s.weights)
    plan = sample_plan(weights, model, items, args.budget, seed, s.weights)
    write_plan(plan, items, args.out)
    print(json.dumps({"included": len(plan.included), "quotas": plan.quotas}))
    return EXIT_OK


def cmd_otsl2html(args, cfg: Config) -> int:
    table = parse_otsl(Path(args.input).read_text(encoding="utf-8"))
    if args.placeholders:
        mapping = json.loads(Path(args.placeholders).read_text(encoding="utf-8"))
        table = restore_placeholders(table, mapping)
    _write(args.out, otsl_to_html(table) + "\n")
    return EXIT_OK


def cmd_assemble(args, cfg: Config) -> int:
    pages = []
    for line in _read_lines(args.pages):
        if line.strip():
            rec = json.loads(line)
            pages.append([DocElement.from_dict(e, str(rec["page_id"])) for e in rec["elements"]])
    labels, columns = load_decisions(args.decisions) if args.decisions else ([], [])
    elements = assemble_document(pages, labels, columns)
    _write(args.out, "".join(json.dumps(e.to_dict(), ensure_ascii=False) + "\n" for e in elements))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="docbench", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--config", help="JSON config file (default: $DOCBENCH_CONFIG)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    e = sub.add_parser("evaluate", help="score predictions against a ground-truth manifest")
    e.add_argument("--gt", required=True, help="manifest JSONL")
    e.add_argument("--pred", required=True, help="predictions JSONL")
    e.add_argument("--tier", choices=["base", "hard", "full"], default="full")
    e.add_argument("--out", required=True, help="report JSON; a .md twin is written alongside")
    e.add_argument("--jobs", type=int, default=None)
    e.add_argument("--model-name", default=None)
    e.add_argument("--official", action="store_true", help="require the official tier page counts")
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("stratify", help="assign difficulty tiers from multi-model outputs")
    s.add_argument("--samples", required=True)
    s.add_argument("--out", required=True)
    for task in ("text", "formula", "table"):
        s.add_argument(f"--tau-{task}", type=float, default=None)
    s.set_defaults(func=cmd_stratify)

    m = sub.add_parser("sample", help="cluster embeddings and draw a sampling plan")
    m.add_argument("--embeddings", required=True)
    m.add_argument("--budget", type=int, required=True)
    m.add_argument("--out", required=True)
    m.add_argument("--k", type=int, default=None)
    m.add_argument("--seed", type=int, default=None)
    m.set_defaults(func=cmd_sample)

    o = sub.add_parser("otsl2html", help="convert an OTSL token stream to HTML")
    o.add_argument("--in", dest="input", required=True)
    o.add_argument("--out", required=True)
    o.add_argument("--placeholders", help="JSON object mapping placeholder tokens to image ids")
    o.set_defaults(func=cmd_otsl2html)

    a = sub.add_parser("assemble", help="apply paragraph and cross-page table merge decisions")
    a.add_argument("--pages", required=True, help="JSONL of {page_id, elements}")
    a.add_argument("--decisions", help="JSONL of merge labels and column decisions")
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_assemble)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as stop:  # --help, --version and usage errors
        return int(stop.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_INPUT
    try:
        cfg = load_config(args.config)
        if getattr(args, "jobs", None) is not None and args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        return args.func(args, cfg)
    except INPUT_ERRORS as exc:
        print(f"docbench {args.command}: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception:
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
