import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_corpus, rows, write_jsonl
from lsars.corpus import (
    CorpusError,
    GeoPoint,
    Vocabulary,
    build_corpus,
    infer_home_location,
    parse_checkin_file,
    split_train_test,
    write_checkin_file,
)


class TestParse:
    def test_minimal_line(self, tmp_path):
        path = write_jsonl(tmp_path / "c.jsonl", [{"user": "a", "item": "x", "lat": 0, "lon": 0,
                                                  "content_words": ["cafe"],
                                                  "review_words": ["good"]}])
        c = parse_checkin_file(path)
        assert (c.n_users, c.n_items, c.n_content_words, c.n_review_words) == (1, 1, 1, 1)
        assert c.records[0].location == GeoPoint(0, 0)

    def test_latitude_out_of_range_names_line(self, tmp_path):
        good = {"user": "a", "item": "x", "lat": 0, "lon": 0, "content_words": [], "review_words": []}
        bad = dict(good, item="y", lat=95)
        path = write_jsonl(tmp_path / "c.jsonl", [good, bad])
        with pytest.raises(CorpusError, match=r"line 2.*latitude"):
            parse_checkin_file(path)

    def test_conflicting_item_location(self, tmp_path):
        r = rows(("a", "x", 0, 0, [], []), ("b", "x", 0, 1, [], []))
        path = write_jsonl(tmp_path / "c.jsonl", r)
        with pytest.raises(CorpusError, match="'x'.*conflicting"):
            parse_checkin_file(path)

    def test_malformed_json_names_physical_line(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text(json.dumps(rows(("a", "x", 0, 0, [], []))[0]) + "\n\n{not json\n")
        with pytest.raises(CorpusError, match="line 3"):
            parse_checkin_file(path)

    def test_missing_field(self, tmp_path):
        path = write_jsonl(tmp_path / "c.jsonl", [{"user": "a", "lat": 0, "lon": 0}])
        with pytest.raises(CorpusError, match="line 1"):
            parse_checkin_file(path)

    def test_empty_file_is_empty_corpus(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        c = parse_checkin_file(path)
        assert len(c) == 0 and c.n_users == 0 and c.n_items == 0

    def test_first_appearance_order_and_profiles(self):
        c = make_corpus(("b", "y", 1, 1, ["t2", "t1"], []), ("a", "x", 0, 0, ["t1"], ["r"]),
                        ("b", "x", 0, 0, [], []))
        assert c.users.tokens == ["b", "a"]
        assert c.items.tokens == ["y", "x"]
        assert c.content_vocab.tokens == ["t2", "t1"]
        assert c.profiles == [[0, 2], [1]]
        assert c.item_content == [(0, 1), (1,)]

    def test_timestamp_kept(self, tmp_path):
        r = rows(("a", "x", 0, 0, [], []))
        r[0]["timestamp"] = "2010-01-01"
        c = build_corpus(r)
        assert c.records[0].timestamp == "2010-01-01"


def test_vocabulary_bijective():
    v = Vocabulary(["a", "b", "a", "c"])
    assert len(v) == 3
    for i in range(len(v)):
        assert v.index_of(v.token_of(i)) == i


class TestHomeLocation:
    def test_single_location(self):
        c = make_corpus(*[("a", "x", 3, 4, [], [])] * 5)
        assert infer_home_location(c.profile(0)) == GeoPoint(3, 4)

    def test_majority(self):
        c = make_corpus(("a", "B", 1, 1, [], []), ("a", "A", 2, 2, [], []), ("a", "A", 2, 2, [], []),
                        ("a", "B", 1, 1, [], []), ("a", "A", 2, 2, [], []))
        assert infer_home_location(c.profile(0)) == GeoPoint(2, 2)

    def test_tie_goes_to_first_appearance(self):
        c = make_corpus(("a", "A", 2, 2, [], []), ("a", "B", 1, 1, [], []), ("a", "B", 1, 1, [], []),
                        ("a", "A", 2, 2, [], []))
        assert infer_home_location(c.profile(0)) == GeoPoint(2, 2)

    def test_empty_profile(self):
        with pytest.raises(CorpusError):
            infer_home_location([])


class TestSplit:
    def _corpus(self, sizes):
        specs = []
        for u, n in enumerate(sizes):
            specs += [(f"u{u}", f"i{u}_{j}", 0.0, float(j % 90), [], []) for j in range(n)]
        return make_corpus(*specs)

    def test_floor_arithmetic(self):
        c = self._corpus([10, 1])
        train, test = split_train_test(c, 0.7, seed=1)
        assert len(train.profiles[0]) == 7
        assert sum(r.user == 0 for r in test) == 3
        assert len(train.profiles[1]) == 1 and not any(r.user == 1 for r in test)

    def test_two_records_keep_one_in_train(self):
        c = self._corpus([2])
        train, test = split_train_test(c, 0.3, seed=0)
        assert len(train) == 1 and len(test) == 1

    def test_deterministic(self):
        c = self._corpus([10, 7, 3])
        a = split_train_test(c, 0.7, seed=5)
        b = split_train_test(c, 0.7, seed=5)
        assert a[0].records == b[0].records and a[1] == b[1]

    @given(st.lists(st.integers(1, 12), min_size=1, max_size=6), st.integers(0, 2**16))
    @settings(max_examples=40, deadline=None)
    def test_partition(self, sizes, seed):
        c = self._corpus(sizes)
        train, test = split_train_test(c, 0.7, seed)
        assert len(train) + len(test) == len(c)
        ids = [id(r) for r in train.records] + [id(r) for r in test]
        assert len(set(ids)) == len(c)

    def test_empty_corpus_rejected(self):
        with pytest.raises(CorpusError):
            split_train_test(build_corpus([]), 0.7, 0)


word = st.sampled_from(["cafe", "bar", "good", "bad", "museum", "ok"])
record = st.tuples(st.sampled_from("abc"), st.sampled_from("xyzw"),
                   st.lists(word, max_size=3), st.lists(word, max_size=3))


@given(st.lists(record, min_size=1, max_size=12))
@settings(max_examples=50, deadline=None)
def test_round_trip(tmp_path_factory, recs):
    # item locations must be consistent: derive from the item token
    spec = [(u, it, float(ord(it) - 100), float(ord(it) - 50), cw, rw) for u, it, cw, rw in recs]
    corpus = make_corpus(*spec)
    path = tmp_path_factory.mktemp("rt") / "c.jsonl"
    write_checkin_file(corpus, path)
    again = parse_checkin_file(path)
    assert again == corpus
    # home location is always some item of the user's profile
    for u in range(corpus.n_users):
        locs = {r.location for r in corpus.profile(u)}
        assert corpus.home_location(u) in locs
