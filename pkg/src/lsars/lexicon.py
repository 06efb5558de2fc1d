"""Seed lexicon used to anchor sentiment labels at initialization.

File format: UTF-8, one token per line under ``[positive]`` and
``[negative]`` section headers.  Blank lines and lines starting with ``#``
are ignored.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

NEGATIVE = 0
POSITIVE = 1

_DEFAULT_POSITIVE = """
good great excellent amazing awesome love loved lovely delicious tasty
friendly best nice perfect fantastic wonderful fresh clean helpful
recommend favorite beautiful pleasant enjoy enjoyed fun cozy
""".split()

_DEFAULT_NEGATIVE = """
bad terrible awful horrible worst rude dirty slow disappointing
disappointed poor bland overpriced cold gross mediocre unfriendly noisy
stale boring broken avoid never wrong
""".split()


@dataclass(frozen=True)
class SeedLexicon:
    positive: frozenset[str]
    negative: frozenset[str]

    def polarity(self, tokens) -> int | None:
        """Majority polarity of ``tokens``, or None when there is no signal."""
        tokens = list(tokens)
        pos = sum(t in self.positive for t in tokens)
        neg = sum(t in self.negative for t in tokens)
        if pos > neg:
            return POSITIVE
        if neg > pos:
            return NEGATIVE
        return None


def default_lexicon() -> SeedLexicon:
    return SeedLexicon(frozenset(_DEFAULT_POSITIVE), frozenset(_DEFAULT_NEGATIVE))


def load_lexicon(path: str | os.PathLike) -> SeedLexicon:
    sections: dict[str, set[str]] = {"positive": set(), "negative": set()}
    current = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1].strip().lower()
                if current not in sections:
                    raise ValueError(f"{path}:{lineno}: unknown section [{current}]")
                continue
            if current is None:
                raise ValueError(f"{path}:{lineno}: token outside a [positive]/[negative] section")
            sections[current].add(line)
    return SeedLexicon(frozenset(sections["positive"]), frozenset(sections["negative"]))
