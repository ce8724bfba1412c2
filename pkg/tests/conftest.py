"""Shared fixtures: tiny hand-built corpora and timestamp helpers."""

from datetime import datetime, timezone

import pytest

from hashscope.corpus import Corpus, PostRecord


def ts(year, month=1, day=1, hour=0) -> int:
    return int(datetime(year, month, day, hour, tzinfo=timezone.utc).timestamp())


@pytest.fixture
def three_post_corpus() -> Corpus:
    posts = [
        PostRecord("alice", ts(2012, 2), frozenset({"sun", "sea"}), "loc1"),
        PostRecord("alice", ts(2012, 5), frozenset({"sun"}), None),
        PostRecord("bob", ts(2013, 7), frozenset({"sea", "ski"}), "loc2"),
    ]
    return Corpus(posts=posts)
