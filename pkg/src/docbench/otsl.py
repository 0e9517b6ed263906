"""OTSL table token streams: parsing, HTML emission, image placeholder restoration.

Accepted cell tokens: ``<fcel>`` (filled), ``<ecel>`` (empty), ``<lcel>``
(continues the cell to the left), ``<ucel>`` (continues the cell above) and
``<xcel>`` (continues both). ``<nl>`` ends a row.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

from .tableteds import escape_cell_html

CELL_KINDS = ("fcel", "ecel", "lcel", "ucel", "xcel")
_TOKEN = re.compile(r"<(fcel|ecel|lcel|ucel|xcel|nl)>")
_LEADING_WS = re.compile(r"^\s*")
_TRAILING_WS = re.compile(r"\s*\Z")

PLACEHOLDER = re.compile(r"<\|(P\d+)\|>")


class OtslError(ValueError):
    pass


class EmptyStream(OtslError):
    pass


class StrayContent(OtslError):
    pass


class UnknownPlaceholder(KeyError):
    def __init__(self, token: str):
        super().__init__(token)
        self.token = token


@dataclass(frozen=True)
class OtslCell:
    text: str = ""
    kind: str = "fcel"
    # whitespace around the text in the source stream; kept for byte-exact re-serialization
    pad: tuple[str, str] = field(default=("", ""), compare=False)


@dataclass(frozen=True)
class OtslRow:
    cells: tuple[OtslCell, ...]
    lead: str = field(default="", compare=False)


@dataclass(frozen=True)
class OtslTable:
    rows: tuple[OtslRow, ...]
    tail: str = field(default="", compare=False)

    @classmethod
    def from_texts(cls, rows: list[list[str]]) -> "OtslTable":
        return cls(tuple(OtslRow(tuple(OtslCell(t) for t in row)) for row in rows))

    def texts(self) -> list[list[str]]:
        return [[c.text for c in r.cells] for r in self.rows]

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), max((len(r.cells) for r in self.rows), default=0)


def parse_otsl(stream: str) -> OtslTable:
    if not stream.strip():
        raise EmptyStream("empty OTSL stream")
    rows: list[OtslRow] = []
    cells: list[OtslCell] = []
    lead = ""
    pos = 0
    current: tuple[str, int] | None = None  # (kind, text start)

    def close_cell(end: int) -> None:
        nonlocal current
        if current is None:
            return
        kind, start = current
        raw = stream[start:end]
        left = _LEADING_WS.match(raw).group(0)
        body = raw[len(left):]
        right = _TRAILING_WS.search(body).group(0)
        text = body[: len(body) - len(right)] if right else body
        cells.append(OtslCell(text, kind, (left, right)))
        current = None

    for m in _TOKEN.finditer(stream):
        between = stream[pos:m.start()]
        if current is None and between.strip():
            raise StrayContent(f"text {between.strip()[:20]!r} outside any cell at offset {pos}")
        if current is None and not cells:
            lead = between
        close_cell(m.start())
        tok = m.group(1)
        if tok == "nl":
            rows.append(OtslRow(tuple(cells), lead))
            cells, lead = [], ""
        else:
            current = (tok, m.end())
        pos = m.end()

    tail = ""
    if current is not None:
        # final row without a terminating <nl>
        close_cell(len(stream))
        rows.append(OtslRow(tuple(cells), lead))
    elif cells:
        rows.append(OtslRow(tuple(cells), lead))
    else:
        tail = stream[pos:]
        if tail.strip():
            raise StrayContent(f"trailing text {tail.strip()[:20]!r}")
    if not rows:
        raise EmptyStream("no cells in OTSL stream")
    return OtslTable(tuple(rows), tail)


def serialize_otsl(table: OtslTable) -> str:
    out = []
    for row in table.rows:
        out.append(row.lead)
        for c in row.cells:
            out.append(f"<{c.kind}>{c.pad[0]}{c.text}{c.pad[1]}")
        out.append("<nl>")
    out.append(table.tail)
    return "".join(out)


def otsl_to_html(table: OtslTable) -> str:
    """Emit HTML; continuation cells become colspan/rowspan on their anchor cell."""
    n_rows, n_cols = table.shape
    grid = [[r.cells[c] if c < len(r.cells) else OtslCell("", "ecel") for c in range(n_cols)] for r in table.rows]

    def continues(r: int, c: int) -> bool:
        return grid[r][c].kind in ("lcel", "ucel", "xcel")

    parts = ["<table>"]
    for r in range(n_rows):
        parts.append("<tr>")
        for c in range(n_cols):
            cell = grid[r][c]
            if continues(r, c):
                if cell.text:
                    # content on a continuation token is kept as its own cell
                    parts.append(f"<td>{escape_cell_html(cell.text)}</td>")
                continue
            colspan = 1
            while c + colspan < n_cols and grid[r][c + colspan].kind == "lcel" and not grid[r][c + colspan].text:
                colspan += 1
            rowspan = 1
            while r + rowspan < n_rows and grid[r + rowspan][c].kind == "ucel" and not grid[r + rowspan][c].text:
                rowspan += 1
            attrs = ""
            if colspan > 1:
                attrs += f' colspan="{colspan}"'
            if rowspan > 1:
                attrs += f' rowspan="{rowspan}"'
            parts.append(f"<td{attrs}>{escape_cell_html(cell.text)}</td>")
        parts.append("</tr>")
    parts.append("</table>")
    return "".join(parts)


def _key(token: str) -> str:
    m = PLACEHOLDER.fullmatch(token)
    return m.group(1) if m else token


def restore_placeholders(table: OtslTable, mapping: dict[str, str]) -> OtslTable:
    """Replace ``<|P1|>``-style placeholder tokens with ``<img id="..."/>`` tags."""
    lookup = {_key(k): v for k, v in mapping.items()}

    def sub(m: re.Match) -> str:
        name = m.group(1)
        if name not in lookup:
            raise UnknownPlaceholder(m.group(0))
        return f'<img id="{lookup[name]}"/>'

    rows = []
    for row in table.rows:
        cells = tuple(replace(c, text=PLACEHOLDER.sub(sub, c.text)) for c in row.cells)
        rows.append(replace(row, cells=cells))
    return replace(table, rows=tuple(rows))
