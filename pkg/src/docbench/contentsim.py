"""Text normalization, edit distances and the formula similarity proxy.

The formula score here is a tokenized-LaTeX edit similarity standing in for
rendering-based CDM. It is reported under the "Formula" column but is not CDM.
"""

from __future__ import annotations

import re
import unicodedata
from collections.abc import Hashable, Sequence
from dataclasses import dataclass
from functools import lru_cache

from rapidfuzz.distance import Levenshtein

_WS = re.compile(r"\s+")
_EMPHASIS = re.compile(r"\*\*|__|\*")


@lru_cache(maxsize=1 << 16)
def normalize_text(s: str) -> str:
    s = unicodedata.normalize("NFC", s)
    s = _EMPHASIS.sub("", s)
    return _WS.sub(" ", s).strip()


def edit_distance(a: str | Sequence[Hashable], b: str | Sequence[Hashable]) -> int:
    """Unit-cost Levenshtein distance over characters or over any token sequence."""
    return Levenshtein.distance(a, b)


def normalized_edit_distance(a, b) -> float:
    longest = max(len(a), len(b))
    if longest == 0:
        return 0.0
    return edit_distance(a, b) / longest


def text_similarity(a: str, b: str) -> float:
    return 1.0 - normalized_edit_distance(normalize_text(a), normalize_text(b))


def reading_order_edit(gt_order: Sequence[str], pred_order: Sequence[str]) -> float:
    """Normalized token-level edit distance between two id sequences."""
    return normalized_edit_distance(list(gt_order), list(pred_order))


@dataclass(frozen=True)
class LatexTokenStream:
    tokens: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def __getitem__(self, i):
        return self.tokens[i]

    def __eq__(self, other):
        if isinstance(other, (list, tuple)):
            return list(self.tokens) == list(other)
        if isinstance(other, LatexTokenStream):
            return self.tokens == other.tokens
        return NotImplemented

    def __hash__(self):
        return hash(self.tokens)


def tokenize_latex(s: str) -> LatexTokenStream:
    tokens: list[str] = []
    i, n = 0, len(s)
    while i < n:
        c = s[i]
        if c.isspace():
            i += 1
        elif c == "\\":
            j = i + 1
            while j < n and s[j].isascii() and s[j].isalpha():
                j += 1
            if j == i + 1 and j < n and not s[j].isspace():
                j += 1  # control symbol such as \\ \, \{
            tokens.append(s[i:j])
            i = j
        elif c.isascii() and c.isdigit():
            j = i + 1
            while j < n and s[j].isascii() and s[j].isdigit():
                j += 1
            tokens.append(s[i:j])
            i = j
        else:
            tokens.append(c)
            i += 1
    return LatexTokenStream(tuple(tokens))


# Token-level equivalence rewrites, applied before comparison.
_DROP = frozenset({
    "\\,", "\\;", "\\:", "\\!", "\\quad", "\\qquad", "\\",
    "\\\\", "\\newline", "\\cr",
    "\\[", "\\]", "\\displaystyle",
})
_RENAME = {"\\dfrac": "\\frac", "\\tfrac": "\\frac"}
_SIZED = frozenset({"\\left", "\\right", "\\bigl", "\\bigr", "\\Bigl", "\\Bigr"})
_UNWRAP = frozenset({"\\mathrm"})


def canonical_formula_tokens(s: str) -> list[str]:
    """Tokenize and apply the equivalence table (dfrac, sized delimiters, spacing, mathrm)."""
    s = s.strip()
    if s.startswith("$$") and s.endswith("$$") and len(s) >= 4:
        s = s[2:-2]
    toks = list(tokenize_latex(s).tokens)
    out: list[str] = []
    i = 0
    # positions of closing braces to drop when an \mathrm group is unwrapped
    drop_close: set[int] = set()
    while i < len(toks):
        t = toks[i]
        if i in drop_close:
            i += 1
            continue
        if t in _DROP:
            i += 1
            continue
        if t in _SIZED:
            if i + 1 < len(toks) and toks[i + 1] == ".":
                i += 2
            else:
                i += 1
            continue
        if t in _UNWRAP and i + 1 < len(toks) and toks[i + 1] == "{":
            close = _matching_brace(toks, i + 1)
            if close is not None:
                drop_close.add(close)
                i += 2
                continue
        out.append(_RENAME.get(t, t))
        i += 1
    return out


def _matching_brace(toks: list[str], open_at: int) -> int | None:
    depth = 0
    for k in range(open_at, len(toks)):
        if toks[k] == "{":
            depth += 1
        elif toks[k] == "}":
            depth -= 1
            if depth == 0:
                return k
    return None


@lru_cache(maxsize=1 << 16)
def _canonical_tuple(s: str) -> tuple[str, ...]:
    return tuple(canonical_formula_tokens(s))


def formula_similarity(a: str, b: str) -> float:
    return 1.0 - normalized_edit_distance(_canonical_tuple(a), _canonical_tuple(b))
