"""Descriptive corpus statistics: count distributions, top hashtags, and
quarterly adoption series."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus, QuarterBucket, quarter_range, top_k_hashtags


@dataclass
class StatsReport:
    n_posts: int
    n_users: int
    n_hashtags: int
    n_hashtag_instances: int
    n_friendships: int
    hashtag_count_histogram: dict[int, float]   # tags-per-post -> proportion of posts
    share_count_bins: list[dict]                # log-binned hashtag share counts
    user_count_bins: list[dict]                 # log-binned distinct-user counts
    top_hashtags: list[tuple[str, int]]
    adoption: list[dict]                        # per-quarter adoption proportions

    def to_dict(self) -> dict:
        return {
            "n_posts": self.n_posts,
            "n_users": self.n_users,
            "n_hashtags": self.n_hashtags,
            "n_hashtag_instances": self.n_hashtag_instances,
            "n_friendships": self.n_friendships,
            "hashtag_count_histogram": {str(k): v for k, v in self.hashtag_count_histogram.items()},
            "share_count_bins": self.share_count_bins,
            "user_count_bins": self.user_count_bins,
            "top_hashtags": [[t, c] for t, c in self.top_hashtags],
            "adoption": self.adoption,
        }

    def save_json(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _log_bins(values: list[int]) -> list[dict]:
    """Histogram over power-of-two count bins [1,2), [2,4), [4,8), ..."""
    if not values:
        return []
    arr = np.asarray(values, dtype=np.int64)
    top = int(arr.max())
    edges = [1]
    while edges[-1] <= top:
        edges.append(edges[-1] * 2)
    out = []
    for lo, hi in zip(edges, edges[1:]):
        mask = (arr >= lo) & (arr < hi)
        count = int(mask.sum())
        if count:
            out.append({"lo": lo, "hi": hi, "count": count,
                        "proportion": count / len(arr)})
    return out


def report_stats(corpus: Corpus, top_k: int = 10) -> StatsReport:
    """Summary statistics of a loaded corpus.

    The adoption series covers the quarters spanned by the corpus: per
    quarter, the proportion of posts carrying at least one hashtag and the
    proportion of that quarter's active users who attached hashtags.
    """
    if not corpus.posts:
        raise ValueError("empty corpus")
    counts = corpus.share_counts()
    per_tag_users: dict[str, set[str]] = {}
    hist: dict[int, int] = {}
    for post in corpus.posts:
        hist[len(post.hashtags)] = hist.get(len(post.hashtags), 0) + 1
        for tag in post.hashtags:
            per_tag_users.setdefault(tag, set()).add(post.user)

    first = QuarterBucket.from_timestamp(min(p.time for p in corpus.posts))
    last = QuarterBucket.from_timestamp(max(p.time for p in corpus.posts))
    quarters = quarter_range(first, last)
    q_index = {q: i for i, q in enumerate(quarters)}
    posts_q = np.zeros(len(quarters), dtype=np.int64)
    tagged_q = np.zeros(len(quarters), dtype=np.int64)
    users_q: list[set[str]] = [set() for _ in quarters]
    tagged_users_q: list[set[str]] = [set() for _ in quarters]
    for post in corpus.posts:
        qi = q_index[QuarterBucket.from_timestamp(post.time)]
        posts_q[qi] += 1
        users_q[qi].add(post.user)
        if post.hashtags:
            tagged_q[qi] += 1
            tagged_users_q[qi].add(post.user)

    adoption = []
    for i, q in enumerate(quarters):
        if posts_q[i] == 0:
            continue
        adoption.append({
            "quarter": str(q),
            "posts": int(posts_q[i]),
            "post_proportion": float(tagged_q[i] / posts_q[i]),
            "user_proportion": float(len(tagged_users_q[i]) / len(users_q[i])),
        })

    n_posts = len(corpus.posts)
    return StatsReport(
        n_posts=n_posts,
        n_users=len(corpus.users),
        n_hashtags=len(counts),
        n_hashtag_instances=int(sum(counts.values())),
        n_friendships=len(corpus.friendships),
        hashtag_count_histogram={k: hist[k] / n_posts for k in sorted(hist)},
        share_count_bins=_log_bins(list(counts.values())),
        user_count_bins=_log_bins([len(v) for v in per_tag_users.values()]),
        top_hashtags=[(t, int(counts[t])) for t in top_k_hashtags(corpus, top_k)],
        adoption=adoption,
    )


def render_stats(report: StatsReport) -> str:
    lines = [
        f"posts: {report.n_posts}",
        f"users: {report.n_users}",
        f"distinct hashtags: {report.n_hashtags}",
        f"hashtag instances: {report.n_hashtag_instances}",
        f"friendships: {report.n_friendships}",
        "",
        "hashtags per post:",
    ]
    for k, v in report.hashtag_count_histogram.items():
        lines.append(f"  {k:>3}: {v:.4f}")
    lines.append("")
    lines.append("top hashtags by share count:")
    for tag, count in report.top_hashtags:
        lines.append(f"  {tag}: {count}")
    lines.append("")
    lines.append("quarterly adoption (posts with hashtags / users using hashtags):")
    for row in report.adoption:
        lines.append(
            f"  {row['quarter']}: {row['post_proportion']:.3f} / {row['user_proportion']:.3f}"
        )
    return "\n".join(lines)
