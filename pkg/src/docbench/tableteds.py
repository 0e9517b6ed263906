"""HTML tables as ordered labeled trees, tree edit distance, TEDS and TEDS-S."""

from __future__ import annotations

import logging
import re
import unicodedata
from dataclasses import dataclass, field
from html.parser import HTMLParser

from .contentsim import normalized_edit_distance

log = logging.getLogger(__name__)

CELL_TAGS = ("td", "th")
_WS = re.compile(r"\s+")


class TableParseError(ValueError):
    pass


class NoTableFound(TableParseError):
    pass


class UnclosedTag(TableParseError):
    def __init__(self, tag: str):
        super().__init__(f"unclosed <{tag}>")
        self.tag = tag


@dataclass(frozen=True)
class TableNode:
    label: str
    children: tuple["TableNode", ...] = ()
    colspan: int = 1
    rowspan: int = 1
    content: str = ""

    @property
    def is_cell(self) -> bool:
        return self.label in CELL_TAGS

    def size(self) -> int:
        return 1 + sum(c.size() for c in self.children)


@dataclass(frozen=True)
class TableTree:
    root: TableNode

    @classmethod
    def from_rows(cls, rows: list[list[str]], header_rows: int = 0) -> "TableTree":
        trs = []
        for r, row in enumerate(rows):
            tag = "th" if r < header_rows else "td"
            trs.append(TableNode("tr", tuple(TableNode(tag, content=c) for c in row)))
        return cls(TableNode("table", tuple(trs)))

    @property
    def rows(self) -> tuple[TableNode, ...]:
        return self.root.children

    @property
    def node_count(self) -> int:
        return self.root.size()

    def cell_texts(self) -> list[list[str]]:
        return [[c.content for c in row.children] for row in self.rows]

    @property
    def column_count(self) -> int:
        return max((sum(c.colspan for c in row.children) for row in self.rows), default=0)

    def to_html(self) -> str:
        parts = ["<table>"]
        for row in self.rows:
            parts.append("<tr>")
            for c in row.children:
                attrs = ""
                if c.colspan != 1:
                    attrs += f' colspan="{c.colspan}"'
                if c.rowspan != 1:
                    attrs += f' rowspan="{c.rowspan}"'
                parts.append(f"<{c.label}{attrs}>{escape_cell_html(c.content)}</{c.label}>")
            parts.append("</tr>")
        parts.append("</table>")
        return "".join(parts)


_IMG = re.compile(r"<img\b[^>]*/?>", re.IGNORECASE)


def escape_cell_html(text: str) -> str:
    out, last = [], 0
    for m in _IMG.finditer(text):
        out.append(_escape(text[last:m.start()]))
        out.append(m.group(0))
        last = m.end()
    out.append(_escape(text[last:]))
    return "".join(out)


def _escape(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _span(value: str | None) -> int:
    try:
        v = int(str(value).strip())
    except (TypeError, ValueError):
        return 1
    return v if v >= 1 else 1


@dataclass
class _Cell:
    label: str
    colspan: int
    rowspan: int
    parts: list[str] = field(default_factory=list)


class _TableBuilder(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.depth = 0
        self.done = False
        self.rows: list[list[_Cell]] = []
        self.row: list[_Cell] | None = None
        self.cell: _Cell | None = None

    def _close_cell(self):
        if self.cell is not None:
            if self.row is None:
                self.row = []
            self.row.append(self.cell)
            self.cell = None

    def _close_row(self):
        self._close_cell()
        if self.row is not None:
            self.rows.append(self.row)
            self.row = None

    def handle_starttag(self, tag, attrs):
        if self.done:
            return
        attrs = dict(attrs)
        if tag == "table":
            # nested tables stay opaque: their text lands in the enclosing cell
            self.depth += 1
            return
        if self.depth == 0:
            return
        if tag == "img" and self.cell is not None:
            ident = attrs.get("id")
            self.cell.parts.append(f'<img id="{ident}"/>' if ident else "<img/>")
            return
        if self.depth > 1:
            if tag in ("br", "tr", *CELL_TAGS) and self.cell is not None:
                self.cell.parts.append(" ")
            return
        if tag == "tr":
            self._close_row()
            self.row = []
        elif tag in CELL_TAGS:
            self._close_cell()
            if self.row is None:
                self.row = []
            self.cell = _Cell(tag, _span(attrs.get("colspan", 1)), _span(attrs.get("rowspan", 1)))
        elif tag == "br" and self.cell is not None:
            self.cell.parts.append(" ")

    def handle_startendtag(self, tag, attrs):
        self.handle_starttag(tag, attrs)

    def handle_endtag(self, tag):
        if self.done or self.depth == 0:
            return
        if tag == "table":
            self.depth -= 1
            if self.depth == 0:
                self._close_row()
                self.done = True
            return
        if self.depth > 1:
            return
        if tag in CELL_TAGS:
            self._close_cell()
        elif tag == "tr":
            self._close_row()

    def handle_data(self, data):
        if self.cell is not None and not self.done:
            self.cell.parts.append(data)


def _cell_text(parts: list[str]) -> str:
    return _WS.sub(" ", unicodedata.normalize("NFC", "".join(parts))).strip()


def parse_html_table(html: str) -> TableTree:
    if not re.search(r"<table\b", html, re.IGNORECASE):
        raise NoTableFound("no <table> element")
    b = _TableBuilder()
    b.feed(html)
    b.close()
    if not b.done:
        if b.cell is not None:
            raise UnclosedTag(b.cell.label)
        if b.row is not None:
            raise UnclosedTag("tr")
        raise UnclosedTag("table")
    trs = []
    for row in b.rows:
        cells = tuple(
            TableNode(c.label, colspan=c.colspan, rowspan=c.rowspan, content=_cell_text(c.parts)) for c in row
        )
        trs.append(TableNode("tr", cells))
    return TableTree(TableNode("table", tuple(trs)))


def table_to_text(tree: TableTree) -> str:
    lines = []
    for row in tree.rows:
        cells = [c.content for c in row.children if c.content]
        if cells:
            lines.append(" ".join(cells))
    return "\n".join(lines)


# --- tree edit distance -------------------------------------------------------


def rename_cost(a: TableNode, b: TableNode, structure_only: bool) -> float:
    if a.label != b.label or a.colspan != b.colspan or a.rowspan != b.rowspan:
        return 1.0
    if a.is_cell and not structure_only:
        return normalized_edit_distance(a.content, b.content)
    return 0.0


def _postorder(root: TableNode):
    nodes: list[TableNode] = []
    leftmost: list[int] = []

    def walk(n: TableNode) -> int:
        first = None
        for c in n.children:
            lm = walk(c)
            if first is None:
                first = lm
        nodes.append(n)
        idx = len(nodes) - 1
        leftmost.append(idx if first is None else first)
        return leftmost[idx]

    walk(root)
    keyroots = {}
    for i, l in enumerate(leftmost):
        keyroots[l] = i
    return nodes, leftmost, sorted(keyroots.values())


def tree_edit_distance(a: TableTree | TableNode, b: TableTree | TableNode, structure_only: bool = False) -> float:
    """Ordered tree edit distance (Zhang-Shasha) with unit insert/delete."""
    ra = a.root if isinstance(a, TableTree) else a
    rb = b.root if isinstance(b, TableTree) else b
    na, la, kra = _postorder(ra)
    nb, lb, krb = _postorder(rb)
    ren_cache: dict[tuple[int, int], float] = {}

    def ren(i: int, j: int) -> float:
        key = (i, j)
        v = ren_cache.get(key)
        if v is None:
            v = ren_cache[key] = rename_cost(na[i], nb[j], structure_only)
        return v

    td = [[0.0] * len(nb) for _ in range(len(na))]
    for i in kra:
        for j in krb:
            li, lj = la[i], lb[j]
            m, n = i - li + 2, j - lj + 2
            ioff, joff = li - 1, lj - 1
            fd = [[0.0] * n for _ in range(m)]
            for x in range(1, m):
                fd[x][0] = fd[x - 1][0] + 1
            for y in range(1, n):
                fd[0][y] = fd[0][y - 1] + 1
            for x in range(1, m):
                xi = x + ioff
                lx = la[xi]
                row, prev = fd[x], fd[x - 1]
                for y in range(1, n):
                    yj = y + joff
                    if lx == li and lb[yj] == lj:
                        v = min(prev[y] + 1, row[y - 1] + 1, prev[y - 1] + ren(xi, yj))
                        row[y] = v
                        td[xi][yj] = v
                    else:
                        p, q = lx - 1 - ioff, lb[yj] - 1 - joff
                        row[y] = min(prev[y] + 1, row[y - 1] + 1, fd[p][q] + td[xi][yj])
    return td[len(na) - 1][len(nb) - 1]


def tree_similarity(a: TableTree, b: TableTree, structure_only: bool = False) -> float:
    denom = max(a.node_count, b.node_count)
    return 1.0 - tree_edit_distance(a, b, structure_only) / denom


@dataclass(frozen=True)
class TedsResult:
    teds: float
    teds_s: float
    diagnostic: str | None = None


def teds_pair(gt_html: str | TableTree, pred_html: str | TableTree) -> TedsResult:
    """Both TEDS variants for one pair; a malformed prediction scores 0."""
    gt = gt_html if isinstance(gt_html, TableTree) else parse_html_table(gt_html)
    try:
        pred = pred_html if isinstance(pred_html, TableTree) else parse_html_table(pred_html)
    except TableParseError as e:
        msg = f"unparseable predicted table: {e}"
        log.warning(msg)
        return TedsResult(0.0, 0.0, msg)
    return TedsResult(tree_similarity(gt, pred), tree_similarity(gt, pred, structure_only=True))


def teds(gt_html: str, pred_html: str) -> float:
    return teds_pair(gt_html, pred_html).teds


def teds_s(gt_html: str, pred_html: str) -> float:
    gt = parse_html_table(gt_html)
    try:
        pred = parse_html_table(pred_html)
    except TableParseError as e:
        log.warning("unparseable predicted table: %s", e)
        return 0.0
    return tree_similarity(gt, pred, structure_only=True)
