"""Tokenization shared by every lexical component and by query-length measurement.

The rules are deliberately minimal so that token counts (and everything derived
from them, like the query-length damping factor) are unambiguous: split on any
run of non-alphanumeric characters, casefold, keep duplicates, no stemming and
no stopword removal.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

# Letters and digits in any script; underscore is treated as punctuation.
_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)


@dataclass(frozen=True)
class TokenStream:
    """An ordered list of normalized tokens plus its length."""

    tokens: tuple[str, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def __bool__(self) -> bool:
        return bool(self.tokens)


def tokenize(text: str) -> TokenStream:
    """Split ``text`` into lowercase alphanumeric tokens.

    Casefolding (not plain lowercasing) is used so that tokenization commutes
    with case changes for practically every character.
    """
    return TokenStream(tokens=tuple(_TOKEN.findall(text.casefold())))
