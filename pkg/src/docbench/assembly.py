"""Document assembly: paragraph merging across region boundaries and cross-page table stitching.

Merge *decisions* come from outside (a model or a human). This module decides
which boundaries are worth asking about and applies the answers.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace

from .contentsim import text_similarity
from .core import Category, DocElement
from .tableteds import TableNode, TableParseError, TableTree, parse_html_table


class NonAdjacentLabel(ValueError):
    pass


class ColumnMismatch(ValueError):
    pass


@dataclass(frozen=True)
class MergeLabel:
    boundary: tuple[str, str]
    decision: bool = True

    @classmethod
    def from_dict(cls, d: dict) -> "MergeLabel":
        a, b = d["boundary"]
        return cls((str(a), str(b)), bool(d.get("merge", True)))


@dataclass(frozen=True)
class ColumnDecisionList:
    upper_id: str
    lower_id: str
    decisions: tuple[int, ...]

    def __post_init__(self):
        if any(v not in (0, 1) for v in self.decisions):
            raise ValueError("column decisions must be 0 or 1")

    @classmethod
    def from_dict(cls, d: dict) -> "ColumnDecisionList":
        return cls(str(d["upper_id"]), str(d["lower_id"]), tuple(int(v) for v in d["decisions"]))


# --- joints ------------------------------------------------------------------------

_CJK = re.compile(
    "[⺀-⿿　-〿぀-ヿ㄀-ㇿ㐀-䶿"
    "一-鿿가-힯豈-﫿＀-￯]"
)


def is_cjk(ch: str) -> bool:
    return bool(ch) and _CJK.match(ch) is not None


def join_fragments(left: str, right: str) -> str:
    """Join two pieces of one sentence split by a layout boundary.

    A word broken with a trailing hyphen is rejoined without the hyphen. Otherwise
    the pieces are separated by one space, except around CJK characters.
    """
    if not left or not right:
        return left + right
    if left.endswith("-") and not right[0].isspace():
        # a broken word loses its hyphen; a dash after a digit ("1990-2000") stays
        return (left[:-1] if len(left) > 1 and left[-2].isalpha() else left) + right
    if left[-1].isspace() or right[0].isspace() or is_cjk(left[-1]) or is_cjk(right[0]):
        return left + right
    return left + " " + right


# --- paragraphs --------------------------------------------------------------------

TERMINAL_PUNCT = frozenset(".!?。！？；")
MIN_LEFT_LENGTH = 20
_NUMBERING = re.compile(r"^(?:\d+|[ivxlcdm]+|[IVXLCDM]+|[A-Za-z])[.)、]")
_BULLET = re.compile(r"^(?:[•●○◦▪▫■□◆◇▶►‣⁃·]|[-*+–](?=\s))")


def starts_with_numbering(text: str) -> bool:
    s = text.lstrip()
    return bool(_NUMBERING.match(s) or _BULLET.match(s))


def paragraph_merge_filter(a: DocElement, b: DocElement) -> bool:
    """Whether the boundary between ``a`` and ``b`` should go to the merge judge."""
    left = a.content.rstrip()
    if not left or left[-1] in TERMINAL_PUNCT:
        return False
    if starts_with_numbering(b.content):
        return False
    return len(left) >= MIN_LEFT_LENGTH


def apply_paragraph_merges(elements: list[DocElement], labels: list[MergeLabel]) -> list[DocElement]:
    order = sorted(elements, key=lambda e: (e.page_id, e.order_index))
    pos = {e.id: i for i, e in enumerate(order)}
    joins_next = [False] * len(order)
    for lab in labels:
        a, b = lab.boundary
        if a not in pos or b not in pos:
            raise NonAdjacentLabel(f"unknown element in boundary {lab.boundary}")
        if pos[b] != pos[a] + 1:
            raise NonAdjacentLabel(f"{a} and {b} are not adjacent in reading order")
        if lab.decision:
            joins_next[pos[a]] = True

    out: list[DocElement] = []
    i = 0
    while i < len(order):
        head = order[i]
        text = head.content
        while joins_next[i]:
            i += 1
            text = join_fragments(text, order[i].content)
        out.append(replace(head, content=text) if text != head.content else head)
        i += 1
    return out


# --- tables ------------------------------------------------------------------------

HEADER_REPEAT_THRESHOLD = 0.9


def _row_similarity(a: TableNode, b: TableNode) -> float:
    ca = [c.content for c in a.children]
    cb = [c.content for c in b.children]
    width = max(len(ca), len(cb))
    if width == 0:
        return 1.0
    ca += [""] * (width - len(ca))
    cb += [""] * (width - len(cb))
    return sum(text_similarity(x, y) for x, y in zip(ca, cb)) / width


def _first_table(page: list[DocElement], last: bool) -> DocElement | None:
    tables = [e for e in sorted(page, key=lambda e: e.order_index) if e.category is Category.TABLE]
    if not tables:
        return None
    return tables[-1] if last else tables[0]


def table_merge_candidates(
    pages: list[list[DocElement]],
    header_threshold: float = HEADER_REPEAT_THRESHOLD,
) -> list[tuple[DocElement, DocElement]]:
    out = []
    for upper_page, lower_page in zip(pages, pages[1:]):
        upper = _first_table(upper_page, last=True)
        lower = _first_table(lower_page, last=False)
        if upper is None or lower is None:
            continue
        try:
            ut, lt = parse_html_table(upper.content), parse_html_table(lower.content)
        except TableParseError:
            continue
        if not ut.rows or not lt.rows or ut.column_count != lt.column_count:
            continue
        if _row_similarity(ut.rows[0], lt.rows[0]) >= header_threshold:
            continue  # the lower table restates the header: a new table, not a continuation
        out.append((upper, lower))
    return out


def _column_starts(row: TableNode) -> list[int]:
    starts, col = [], 0
    for c in row.children:
        starts.append(col)
        col += c.colspan
    return starts


def _covering(row: TableNode, col: int) -> int | None:
    for i, (start, cell) in enumerate(zip(_column_starts(row), row.children)):
        if start <= col < start + cell.colspan:
            return i
    return None


def apply_column_decisions(upper: TableTree, lower: TableTree, decisions) -> TableTree:
    """Stitch ``lower`` under ``upper``.

    Column decision 0 joins the lower table's first-row cell onto the upper
    table's last-row cell in that column. Decision 1 keeps it as a separate row.
    When every decision is 1 the lower rows are appended unchanged.
    """
    d = list(getattr(decisions, "decisions", decisions))
    n_cols = upper.column_count
    if lower.column_count != n_cols or len(d) != n_cols:
        raise ColumnMismatch(
            f"upper has {n_cols} columns, lower {lower.column_count}, decisions {len(d)}"
        )
    if not upper.rows or not lower.rows or all(d):
        return TableTree(replace(upper.root, children=upper.rows + lower.rows))

    last, first = upper.rows[-1], lower.rows[0]
    merged = [c.content for c in last.children]
    new_row: list[TableNode] = []
    col = 0
    for start, cell in zip(_column_starts(first), first.children):
        while col < start:
            new_row.append(TableNode("td"))
            col += 1
        if d[start] == 0 and merged:
            target = _covering(last, start)
            if target is None:
                target = len(merged) - 1  # short upper row: attach to its last cell
            merged[target] = join_fragments(merged[target], cell.content)
            new_row.extend(TableNode("td") for _ in range(cell.colspan))
        else:
            new_row.append(replace(cell, rowspan=1))
        col = start + cell.colspan
    while col < n_cols:
        new_row.append(TableNode("td"))
        col += 1

    joined = replace(last, children=tuple(replace(c, content=t) for c, t in zip(last.children, merged)))
    rows = list(upper.rows[:-1]) + [joined]
    if any(c.content for c in new_row) or any(d):
        rows.append(TableNode("tr", tuple(new_row)))
    rows.extend(lower.rows[1:])
    return TableTree(replace(upper.root, children=tuple(rows)))


# --- document-level driver ---------------------------------------------------------


def assemble_document(
    pages: list[list[DocElement]],
    merge_labels: list[MergeLabel],
    column_decisions: list[ColumnDecisionList],
) -> list[DocElement]:
    """Apply table stitching then paragraph merges to a whole document."""
    elements = [e for page in pages for e in page]
    by_id = {e.id: e for e in elements}
    dropped: set[str] = set()
    stitched: dict[str, DocElement] = {}
    host: dict[str, str] = {}  # absorbed table id -> id of the table that now holds it
    for cd in column_decisions:
        if cd.upper_id not in by_id or cd.lower_id not in by_id:
            raise KeyError(f"unknown table id in decision {cd.upper_id}/{cd.lower_id}")
        key = host.get(cd.upper_id, cd.upper_id)
        upper = stitched.get(key, by_id[key])
        tree = apply_column_decisions(
            parse_html_table(upper.content), parse_html_table(by_id[cd.lower_id].content), cd
        )
        stitched[key] = replace(upper, content=tree.to_html())
        host[cd.lower_id] = key
        dropped.add(cd.lower_id)
    elements = [stitched.get(e.id, e) for e in elements if e.id not in dropped]
    return apply_paragraph_merges(elements, merge_labels)


def load_decisions(path) -> tuple[list[MergeLabel], list[ColumnDecisionList]]:
    labels, columns = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            d = json.loads(line)
            if "boundary" in d:
                labels.append(MergeLabel.from_dict(d))
            elif "decisions" in d:
                columns.append(ColumnDecisionList.from_dict(d))
            else:
                raise ValueError(f"unrecognized decision record: {line.strip()[:60]}")
    return labels, columns
