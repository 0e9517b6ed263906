"""Shared domain types and box geometry."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass

log = logging.getLogger(__name__)

GRID_MAX = 999


class Category(str, enum.Enum):
    TEXT = "text"
    TITLE = "title"
    FORMULA = "formula"
    TABLE = "table"
    FIGURE = "figure"
    HEADER = "header"
    FOOTER = "footer"
    LIST_ITEM = "list_item"
    IGNORE = "ignore"

    @classmethod
    def parse(cls, label: str) -> "Category":
        """Map a free-form label onto a category; unknown labels become IGNORE."""
        key = label.strip().lower().replace("-", "_").replace(" ", "_")
        key = _CATEGORY_ALIASES.get(key, key)
        try:
            return cls(key)
        except ValueError:
            log.warning("unknown category %r mapped to ignore", label)
            return cls.IGNORE


_CATEGORY_ALIASES = {
    "plain_text": "text",
    "paragraph": "text",
    "image": "figure",
    "equation": "formula",
    "interline_equation": "formula",
    "equation_block": "formula",
    "list": "list_item",
    "listitem": "list_item",
    "page_header": "header",
    "page_footer": "footer",
    "abandon": "ignore",
}

TEXT_CATEGORIES = frozenset({Category.TEXT, Category.TITLE, Category.LIST_ITEM})


class Rotation(str, enum.Enum):
    UP = "up"
    DOWN = "down"
    LEFT = "left"
    RIGHT = "right"


class DifficultyTier(enum.IntEnum):
    EASY = 0
    MEDIUM = 1
    HARD = 2

    @classmethod
    def parse(cls, label: str | int | "DifficultyTier") -> "DifficultyTier":
        if isinstance(label, DifficultyTier):
            return label
        if isinstance(label, int):
            return cls(label)
        return cls[label.strip().upper()]

    @property
    def label(self) -> str:
        return self.name.capitalize()


@dataclass(frozen=True, order=True)
class BBox:
    x1: int
    y1: int
    x2: int
    y2: int

    def __post_init__(self):
        for v in (self.x1, self.y1, self.x2, self.y2):
            if not isinstance(v, int) or isinstance(v, bool):
                raise TypeError(f"box coordinates must be int, got {v!r}")
        if not (0 <= self.x1 <= self.x2 <= GRID_MAX and 0 <= self.y1 <= self.y2 <= GRID_MAX):
            raise ValueError(f"invalid box {self.as_tuple()}")

    @classmethod
    def from_pixels(cls, x1: float, y1: float, x2: float, y2: float, width: float, height: float) -> "BBox":
        """Rescale a pixel-space box onto the 0..999 grid."""

        def sx(v: float, extent: float) -> int:
            return min(GRID_MAX, max(0, round(v / extent * GRID_MAX)))

        return cls(sx(x1, width), sx(y1, height), sx(x2, width), sx(y2, height))

    @property
    def area(self) -> int:
        return (self.x2 - self.x1) * (self.y2 - self.y1)

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.x1, self.y1, self.x2, self.y2)

    def intersection(self, other: "BBox") -> "BBox | None":
        x1, y1 = max(self.x1, other.x1), max(self.y1, other.y1)
        x2, y2 = min(self.x2, other.x2), min(self.y2, other.y2)
        if x1 > x2 or y1 > y2:
            return None
        return BBox(x1, y1, x2, y2)


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union with half-open integer areas.

    Two zero-area boxes score 1 only when identical; any other pairing that
    involves a zero-area box scores 0.
    """
    if a.area == 0 or b.area == 0:
        return 1.0 if (a == b and a.area == 0 and b.area == 0) else 0.0
    inter = a.intersection(b)
    if inter is None or inter.area == 0:
        return 0.0
    return inter.area / (a.area + b.area - inter.area)


@dataclass(frozen=True)
class DocElement:
    id: str
    page_id: str
    category: Category
    content: str = ""
    bbox: BBox | None = None
    rotation: Rotation = Rotation.UP
    order_index: int = 0

    def __post_init__(self):
        if self.order_index < 0:
            raise ValueError("order_index must be non-negative")

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "page_id": self.page_id,
            "category": self.category.value,
            "content": self.content,
            "rotation": self.rotation.value,
            "order_index": self.order_index,
        }
        if self.bbox is not None:
            d["bbox"] = list(self.bbox.as_tuple())
        return d

    @classmethod
    def from_dict(cls, d: dict, page_id: str | None = None) -> "DocElement":
        bbox = d.get("bbox")
        return cls(
            id=str(d["id"]),
            page_id=str(d.get("page_id", page_id or "")),
            category=Category.parse(d.get("category", "text")),
            content=d.get("content", "") or "",
            bbox=BBox(*(int(v) for v in bbox)) if bbox is not None else None,
            rotation=Rotation(d.get("rotation", "up")),
            order_index=int(d.get("order_index", 0)),
        )


def check_unique_order(elements: list[DocElement]) -> None:
    seen: set[tuple[str, int]] = set()
    for el in elements:
        key = (el.page_id, el.order_index)
        if key in seen:
            raise ValueError(f"duplicate order_index {el.order_index} on page {el.page_id!r}")
        seen.add(key)

