"""Parsers turning raw model output into ordered ``DocElement`` lists."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from .core import BBox, Category, DocElement, Rotation

log = logging.getLogger(__name__)


class MalformedDescriptor(ValueError):
    def __init__(self, line_no: int, reason: str = ""):
        super().__init__(f"malformed layout descriptor on line {line_no}: {reason}")
        self.line_no = line_no


class UnclosedTable(ValueError):
    pass


class MissingField(ValueError):
    def __init__(self, name: str):
        super().__init__(f"missing field {name!r}")
        self.name = name


# --- layout tokens ----------------------------------------------------------------

_TOKEN = re.compile(r"<\|([a-z_]+)\|>")
_DESCRIPTOR = re.compile(
    r"<\|box_start\|>(?P<box>[^<]*)<\|box_end\|>"
    r"<\|ref_start\|>(?P<ref>[^<]*)<\|ref_end\|>"
)
_ROTATIONS = {f"rotate_{r.value}": r for r in Rotation}

CANONICAL_LABELS = {c: c.value for c in Category}


def parse_layout_tokens(raw: str, page_id: str = "") -> list[DocElement]:
    elements: list[DocElement] = []
    for line_no, line in enumerate(raw.split("\n"), start=1):
        if not line.strip():
            continue
        m = _DESCRIPTOR.search(line)
        if m is None:
            raise MalformedDescriptor(line_no, "missing box/ref delimiters")
        parts = m.group("box").split()
        if len(parts) != 4:
            raise MalformedDescriptor(line_no, f"expected 4 coordinates, got {len(parts)}")
        try:
            coords = [int(p) for p in parts]
            bbox = BBox(*coords)
        except ValueError as e:
            raise MalformedDescriptor(line_no, str(e)) from None

        rotation = Rotation.UP
        rest = line[: m.start()] + line[m.end():]
        for tok in _TOKEN.finditer(rest):
            name = tok.group(1)
            if name in _ROTATIONS:
                rotation = _ROTATIONS[name]
            else:
                log.warning("line %d: skipping unknown token <|%s|>", line_no, name)
        idx = len(elements)
        elements.append(
            DocElement(
                id=f"{page_id}#{idx}" if page_id else str(idx),
                page_id=page_id,
                category=Category.parse(m.group("ref")),
                bbox=bbox,
                rotation=rotation,
                order_index=idx,
            )
        )
    return elements


def serialize_layout_tokens(elements: list[DocElement]) -> str:
    lines = []
    for el in elements:
        if el.bbox is None:
            raise ValueError(f"element {el.id} has no box")
        box = " ".join(f"{v:03d}" for v in el.bbox.as_tuple())
        lines.append(
            f"<|box_start|>{box}<|box_end|>"
            f"<|ref_start|>{CANONICAL_LABELS[el.category]}<|ref_end|>"
            f"<|rotate_{el.rotation.value}|>"
        )
    return "\n".join(lines)


# --- markdown -----------------------------------------------------------------------

_TABLE_TAG = re.compile(r"<(/?)table\b[^>]*>", re.IGNORECASE)
_MATH_OPEN = re.compile(r"\$\$|\\\[|\\begin\{(equation\*?|align\*?)\}")
_BLANK = re.compile(r"\n[ \t]*\n")
_HEADING = re.compile(r"^(#{1,6})[ \t]+")


@dataclass(frozen=True)
class _Span:
    kind: str  # "text" | "formula" | "table"
    content: str


def _find_table_end(md: str, start: int) -> int:
    depth = 0
    for m in _TABLE_TAG.finditer(md, start):
        depth += -1 if m.group(1) else 1
        if depth == 0:
            return m.end()
    raise UnclosedTable(f"<table> at offset {start} has no closing tag")


def _scan(md: str) -> list[_Span]:
    spans: list[_Span] = []
    text_start = 0
    pos = 0
    while True:
        t = _TABLE_TAG.search(md, pos)
        while t is not None and t.group(1):
            t = _TABLE_TAG.search(md, t.end())  # stray closing tags stay text
        f = _MATH_OPEN.search(md, pos)
        if t is None and f is None:
            break
        if f is None or (t is not None and t.start() < f.start()):
            end = _find_table_end(md, t.start())
            spans.append(_Span("text", md[text_start:t.start()]))
            spans.append(_Span("table", md[t.start():end]))
            text_start = pos = end
            continue
        opener = f.group(0)
        if opener == "$$":
            closer = "$$"
        elif opener == "\\[":
            closer = "\\]"
        else:
            closer = "\\end{" + f.group(1) + "}"
        close_at = md.find(closer, f.end())
        if close_at < 0:
            log.warning("unclosed display math %r at offset %d kept as text", opener, f.start())
            pos = f.end()
            continue
        spans.append(_Span("text", md[text_start:f.start()]))
        spans.append(_Span("formula", md[f.end():close_at].strip()))
        text_start = pos = close_at + len(closer)
    spans.append(_Span("text", md[text_start:]))
    return spans


def extract_markdown_elements(markdown: str, page_id: str = "") -> list[DocElement]:
    """Split a markdown page into Text/Title, Formula and Table elements in document order."""
    out: list[DocElement] = []

    def emit(cat: Category, content: str) -> None:
        idx = len(out)
        out.append(
            DocElement(
                id=f"{page_id}#{idx}" if page_id else str(idx),
                page_id=page_id,
                category=cat,
                content=content,
                order_index=idx,
            )
        )

    for span in _scan(markdown):
        if span.kind == "table":
            emit(Category.TABLE, span.content.strip())
        elif span.kind == "formula":
            emit(Category.FORMULA, span.content)
        else:
            for para in _BLANK.split(span.content):
                para = para.strip()
                if not para:
                    continue
                h = _HEADING.match(para)
                if h and "\n" not in para:
                    emit(Category.TITLE, para[h.end():].strip())
                else:
                    emit(Category.TEXT, para)
    return out


# --- image analysis ----------------------------------------------------------------


@dataclass(frozen=True)
class ImageAnalysis:
    class_: str
    sub_class: str
    caption: str
    content: str


_FIELDS = ("class", "sub_class", "caption", "content")


def parse_image_analysis(raw: str) -> ImageAnalysis:
    values = {}
    for name in _FIELDS:
        m = re.search(rf"<\|{name}_start\|>(.*?)<\|{name}_end\|>", raw, re.DOTALL)
        if m is None:
            raise MissingField(name)
        values[name] = m.group(1).strip()
    return ImageAnalysis(values["class"], values["sub_class"], values["caption"], values["content"])
