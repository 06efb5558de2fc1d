"""Check-in data model, JSON-lines ingestion and train/test splitting.

A corpus is a sequence of check-in records ``(user, item, location,
content_words, review_words)``, each interned against four vocabularies
(users, items, content words, review words).  Records are kept in file
order; ``profiles`` groups record positions per user.
"""

from __future__ import annotations

import json
import math
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np

__all__ = [
    "CorpusError",
    "GeoPoint",
    "CheckinRecord",
    "Vocabulary",
    "CheckinCorpus",
    "build_corpus",
    "parse_checkin_file",
    "write_checkin_file",
    "infer_home_location",
    "split_train_test",
]


class CorpusError(ValueError):
    """Raised for malformed or inconsistent check-in data."""


@dataclass(frozen=True)
class GeoPoint:
    """A (lat, lon) pair in decimal degrees."""

    lat: float
    lon: float

    def __post_init__(self):
        lat, lon = float(self.lat), float(self.lon)
        if not (math.isfinite(lat) and math.isfinite(lon)):
            raise CorpusError(f"non-finite coordinate ({self.lat}, {self.lon})")
        if not -90.0 <= lat <= 90.0:
            raise CorpusError(f"latitude {lat} outside [-90, 90]")
        if not -180.0 <= lon <= 180.0:
            raise CorpusError(f"longitude {lon} outside [-180, 180]")
        object.__setattr__(self, "lat", lat)
        object.__setattr__(self, "lon", lon)

    def as_array(self) -> np.ndarray:
        return np.array([self.lat, self.lon], dtype=np.float64)


@dataclass(frozen=True)
class CheckinRecord:
    user: int
    item: int
    location: GeoPoint
    content_words: tuple[int, ...] = ()
    review_words: tuple[int, ...] = ()
    timestamp: str | None = None


class Vocabulary:
    """Bijective token <-> dense index map; indices follow insertion order."""

    def __init__(self, tokens: Iterable[str] = ()):
        self._tokens: list[str] = []
        self._index: dict[str, int] = {}
        for t in tokens:
            self.add(t)

    def add(self, token: str) -> int:
        idx = self._index.get(token)
        if idx is None:
            idx = len(self._tokens)
            self._index[token] = idx
            self._tokens.append(token)
        return idx

    def index_of(self, token: str) -> int:
        return self._index[token]

    def get(self, token: str, default: int | None = None) -> int | None:
        return self._index.get(token, default)

    def token_of(self, index: int) -> str:
        return self._tokens[index]

    @property
    def tokens(self) -> list[str]:
        return list(self._tokens)

    def __contains__(self, token: object) -> bool:
        return token in self._index

    def __len__(self) -> int:
        return len(self._tokens)

    def __iter__(self) -> Iterator[str]:
        return iter(self._tokens)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self._tokens == other._tokens

    def __repr__(self) -> str:
        return f"Vocabulary({len(self)} tokens)"


@dataclass(eq=False)
class CheckinCorpus:
    """An interned collection of check-in records.

    Attributes
    ----------
    records : list of CheckinRecord
        All records in file order.
    profiles : list of list of int
        ``profiles[u]`` holds positions in ``records`` belonging to user ``u``
        (the profile D_u), in file order.
    item_locations : ndarray, shape (V, 2)
        (lat, lon) of each item.
    item_content : list of tuple of int
        Content words of each item, taken from its first record.
    home_locations : ndarray, shape (N, 2)
        Inferred home location per user; NaN for users with an empty profile.
    """

    users: Vocabulary
    items: Vocabulary
    content_vocab: Vocabulary
    review_vocab: Vocabulary
    records: list[CheckinRecord]
    profiles: list[list[int]]
    item_locations: np.ndarray
    item_content: list[tuple[int, ...]]
    home_locations: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        if self.home_locations is None:
            home = np.full((len(self.users), 2), np.nan)
            for u, positions in enumerate(self.profiles):
                if positions:
                    home[u] = infer_home_location(
                        [self.records[i] for i in positions]
                    ).as_array()
            self.home_locations = home

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_items(self) -> int:
        return len(self.items)

    @property
    def n_content_words(self) -> int:
        return len(self.content_vocab)

    @property
    def n_review_words(self) -> int:
        return len(self.review_vocab)

    @property
    def n_locations(self) -> int:
        """Distinct item locations (M); reported statistic only."""
        if self.n_items == 0:
            return 0
        return len(np.unique(self.item_locations, axis=0))

    def __len__(self) -> int:
        return len(self.records)

    def profile(self, user: int) -> list[CheckinRecord]:
        return [self.records[i] for i in self.profiles[user]]

    def home_location(self, user: int) -> GeoPoint:
        lat, lon = self.home_locations[user]
        return GeoPoint(lat, lon)

    def summary(self) -> dict:
        return {
            "n_users": self.n_users,
            "n_items": self.n_items,
            "n_locations": self.n_locations,
            "n_content_words": self.n_content_words,
            "n_review_words": self.n_review_words,
            "n_records": len(self.records),
        }

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CheckinCorpus):
            return NotImplemented
        return (
            self.users == other.users
            and self.items == other.items
            and self.content_vocab == other.content_vocab
            and self.review_vocab == other.review_vocab
            and self.records == other.records
            and self.profiles == other.profiles
            and self.item_content == other.item_content
            and np.array_equal(self.item_locations, other.item_locations)
            and np.array_equal(
                self.home_locations, other.home_locations, equal_nan=True
            )
        )


def build_corpus(rows: Iterable[dict]) -> CheckinCorpus:
    """Intern an iterable of raw check-in dicts into a corpus.

    Each row needs ``user``, ``item``, ``lat``, ``lon``, ``content_words``
    and ``review_words``; ``timestamp`` is optional.  Errors name the
    1-based row number.
    """
    return _build(enumerate(rows, start=1))


def _build(numbered_rows: Iterable[tuple[int, dict]]) -> CheckinCorpus:
    users, items = Vocabulary(), Vocabulary()
    content_vocab, review_vocab = Vocabulary(), Vocabulary()
    records: list[CheckinRecord] = []
    profiles: list[list[int]] = []
    locations: list[GeoPoint] = []
    item_content: list[tuple[int, ...]] = []

    for lineno, row in numbered_rows:
        try:
            user_tok = row["user"]
            item_tok = row["item"]
            lat, lon = row["lat"], row["lon"]
            cw = row.get("content_words", [])
            rw = row.get("review_words", [])
            ts = row.get("timestamp")
        except (KeyError, TypeError, AttributeError) as exc:
            raise CorpusError(f"line {lineno}: missing or invalid field ({exc})") from None
        if not isinstance(user_tok, str) or not isinstance(item_tok, str):
            raise CorpusError(f"line {lineno}: user and item must be strings")
        if not isinstance(cw, list) or not all(isinstance(w, str) for w in cw):
            raise CorpusError(f"line {lineno}: content_words must be a list of strings")
        if not isinstance(rw, list) or not all(isinstance(w, str) for w in rw):
            raise CorpusError(f"line {lineno}: review_words must be a list of strings")
        if ts is not None and not isinstance(ts, str):
            raise CorpusError(f"line {lineno}: timestamp must be a string")
        if isinstance(lat, bool) or isinstance(lon, bool) or not (
            isinstance(lat, (int, float)) and isinstance(lon, (int, float))
        ):
            raise CorpusError(f"line {lineno}: lat/lon must be numbers")
        try:
            loc = GeoPoint(lat, lon)
        except CorpusError as exc:
            raise CorpusError(f"line {lineno}: {exc}") from None

        u = users.add(user_tok)
        if u == len(profiles):
            profiles.append([])
        v = items.add(item_tok)
        cw_idx = tuple(content_vocab.add(w) for w in cw)
        rw_idx = tuple(review_vocab.add(w) for w in rw)
        if v == len(locations):
            locations.append(loc)
            item_content.append(cw_idx)
        elif locations[v] != loc:
            raise CorpusError(
                f"line {lineno}: item {item_tok!r} has conflicting locations "
                f"({locations[v].lat}, {locations[v].lon}) and ({loc.lat}, {loc.lon})"
            )
        profiles[u].append(len(records))
        records.append(CheckinRecord(u, v, loc, cw_idx, rw_idx, ts))

    item_locations = (
        np.array([[p.lat, p.lon] for p in locations], dtype=np.float64)
        if locations
        else np.zeros((0, 2))
    )
    return CheckinCorpus(
        users=users,
        items=items,
        content_vocab=content_vocab,
        review_vocab=review_vocab,
        records=records,
        profiles=profiles,
        item_locations=item_locations,
        item_content=item_content,
    )


def _iter_json_lines(path: str | os.PathLike) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusError(f"line {lineno}: malformed JSON ({exc.msg})") from None
            if not isinstance(obj, dict):
                raise CorpusError(f"line {lineno}: expected a JSON object")
            yield lineno, obj


def parse_checkin_file(path: str | os.PathLike) -> CheckinCorpus:
    """Parse a UTF-8 JSON-lines check-in file into a corpus.

    Blank lines are ignored.  Error messages carry the physical line number.
    An empty file yields an empty corpus.
    """
    return _build(_iter_json_lines(path))


def record_to_row(corpus: CheckinCorpus, rec: CheckinRecord) -> dict:
    row = {
        "user": corpus.users.token_of(rec.user),
        "item": corpus.items.token_of(rec.item),
        "lat": rec.location.lat,
        "lon": rec.location.lon,
        "content_words": [corpus.content_vocab.token_of(w) for w in rec.content_words],
        "review_words": [corpus.review_vocab.token_of(w) for w in rec.review_words],
    }
    if rec.timestamp is not None:
        row["timestamp"] = rec.timestamp
    return row


def write_checkin_file(
    corpus: CheckinCorpus,
    path: str | os.PathLike,
    records: Sequence[CheckinRecord] | None = None,
) -> None:
    """Write records (default: all of ``corpus``) in the JSON-lines format."""
    from ._io import atomic_write

    recs = corpus.records if records is None else records
    with atomic_write(path, "w") as fh:
        for rec in recs:
            fh.write(json.dumps(record_to_row(corpus, rec), ensure_ascii=False))
            fh.write("\n")


def infer_home_location(profile: Sequence[CheckinRecord]) -> GeoPoint:
    """Location of the user's most checked-in item.

    Ties go to the item that appears first in the profile.
    """
    if not profile:
        raise CorpusError("cannot infer a home location from an empty profile")
    counts = Counter(rec.item for rec in profile)
    best = max(counts.values())
    for rec in profile:
        if counts[rec.item] == best:
            return rec.location
    raise AssertionError("unreachable")


def split_train_test(
    corpus: CheckinCorpus, train_fraction: float = 0.7, seed: int = 0
) -> tuple[CheckinCorpus, list[CheckinRecord]]:
    """Per-user random split into a training corpus and held-out records.

    Each user keeps ``floor(train_fraction * |D_u|)`` records for training,
    at least one when the profile has two or more records; a single-record
    profile goes entirely to training.  The training corpus shares every
    vocabulary and item map with ``corpus`` so indices stay comparable, and
    its home locations are recomputed from the training records alone.
    """
    if len(corpus) == 0:
        raise CorpusError("cannot split an empty corpus")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    train_pos: set[int] = set()
    test_pos: set[int] = set()
    for positions in corpus.profiles:
        n = len(positions)
        if n == 0:
            continue
        n_train = math.floor(train_fraction * n)
        if n >= 2:
            n_train = max(n_train, 1)
        else:
            n_train = n
        chosen = rng.permutation(n)[:n_train]
        keep = {positions[i] for i in chosen}
        train_pos |= keep
        test_pos |= set(positions) - keep

    profiles: list[list[int]] = [[] for _ in range(corpus.n_users)]
    train_records: list[CheckinRecord] = []
    for i, rec in enumerate(corpus.records):
        if i in train_pos:
            profiles[rec.user].append(len(train_records))
            train_records.append(rec)
    test_records = [rec for i, rec in enumerate(corpus.records) if i in test_pos]
    train = CheckinCorpus(
        users=corpus.users,
        items=corpus.items,
        content_vocab=corpus.content_vocab,
        review_vocab=corpus.review_vocab,
        records=train_records,
        profiles=profiles,
        item_locations=corpus.item_locations,
        item_content=corpus.item_content,
    )
    return train, test_records
