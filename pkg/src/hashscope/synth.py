"""Synthetic corpus generation with planted ground truth.

The generator plants four kinds of structure that the analysis pipelines are
expected to recover:

* temporal classes (periodic / rising / stable / meteor share profiles),
* synonym communities of hashtags that co-occur within posts,
* drifted hashtags that switch co-occurrence community at a chosen year and
  are dominated by a single sharer in each period,
* friendship homophily (friends tend to live in the same hashtag community).

Everything is a pure function of the spec, including its seed: the same spec
always yields a byte-identical corpus.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone

import numpy as np

from .corpus import Corpus, PostRecord, MAX_HASHTAGS_PER_POST

TEMPORAL_CLASSES = ("periodic", "rising", "stable", "meteor")

DEFAULT_CATEGORIES = (
    "park", "cafe", "restaurant", "bar", "office",
    "museum", "gym", "theater", "hotel", "market",
)
# relative propensity to attach hashtags at each category; bar and office suppressed
DEFAULT_CATEGORY_TAG_RATES = (1.3, 1.1, 1.0, 0.35, 0.5, 1.2, 1.0, 1.1, 0.9, 1.0)

LOCATIONS_PER_CATEGORY = 3


class SynthesisError(ValueError):
    """The requested spec cannot be generated."""


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a planted-ground-truth corpus.

    Counts for the four temporal classes plant that many hashtags with the
    corresponding share profile; ``communities`` partitions all non-drifted
    hashtags (and all users) round-robin into co-occurrence groups;
    ``drifted`` hashtags switch community at ``drift_year`` and are mostly
    shared by one owner user per period; ``homophily`` is the probability a
    sampled friend pair is drawn from within a single community.
    """

    users: int = 200
    hashtags: int = 400
    posts: int = 20000
    start_year: int = 2012
    years: int = 4

    periodic: int = 0
    rising: int = 0
    stable: int = 0
    meteor: int = 0

    communities: int = 0
    community_mix: float = 0.85
    pair_affinity: float = 0.0

    drifted: int = 0
    drift_year: int | None = None
    drift_owner_rate: float = 0.8
    drift_comm_rate: float = 0.002

    homophily: float = 0.0
    friends_per_user: float = 6.0

    zipf_exponent: float = 0.8
    mean_extra_tags: float = 2.0
    no_hashtag_rate: float = 0.35
    adoption_growth: bool = False
    adoption_start: float = 0.15
    adoption_end: float = 0.9

    located_rate: float = 0.0
    categories: tuple[str, ...] = DEFAULT_CATEGORIES
    category_tag_rates: tuple[float, ...] = DEFAULT_CATEGORY_TAG_RATES

    seed: int = 0

    # ---- derived ground truth -------------------------------------------

    @property
    def n_quarters(self) -> int:
        return 4 * self.years

    @property
    def n_communities(self) -> int:
        return max(self.communities, 1)

    @property
    def effective_drift_year(self) -> int:
        if self.drift_year is not None:
            return self.drift_year
        return self.start_year + self.years // 2

    def planted_tags(self, cls: str) -> list[str]:
        count = getattr(self, cls)
        return [f"{cls}{i:03d}" for i in range(count)]

    def drifted_tags(self) -> list[str]:
        return [f"drift{i:03d}" for i in range(self.drifted)]

    def pool_tags(self) -> list[str]:
        """Non-drifted hashtags in popularity-rank order (planted classes first)."""
        queues = [list(self.planted_tags(cls)) for cls in TEMPORAL_CLASSES]
        interleaved: list[str] = []
        while any(queues):
            for q in queues:
                if q:
                    interleaved.append(q.pop(0))
        n_filler = self.hashtags - self.drifted - len(interleaved)
        filler = [f"tag{i:04d}" for i in range(n_filler)]
        return interleaved + filler

    def all_tags(self) -> list[str]:
        return self.pool_tags() + self.drifted_tags()

    def user_names(self) -> list[str]:
        return [f"u{i:04d}" for i in range(self.users)]

    def periodic_quarter(self, tag: str) -> int:
        """Designated quarter-of-year (0..3) of a planted periodic hashtag."""
        return int(tag.removeprefix("periodic")) % 4

    def meteor_quarter(self, tag: str) -> int:
        """Absolute quarter index of a planted meteor hashtag's spike."""
        return int(tag.removeprefix("meteor")) % self.n_quarters

    def synonym_pairs(self) -> list[tuple[str, str]]:
        """Within-community tag pairs treated as interchangeable variants.

        Members of each community pair up in popularity-rank order; tags
        carrying a planted temporal class and trailing odd members stay
        unpaired.
        """
        pool = self.pool_tags()
        c = self.n_communities
        pairs = []
        for comm in range(c):
            members = [t for i, t in enumerate(pool)
                       if i % c == comm and _class_of(t) is None]
            for j in range(0, len(members) - 1, 2):
                pairs.append((members[j], members[j + 1]))
        return pairs

    def drift_communities(self, tag: str) -> tuple[int, int]:
        """(community before drift year, community after)."""
        i = int(tag.removeprefix("drift"))
        c = self.n_communities
        before = i % c
        return before, (before + max(c // 2, 1)) % c

    def drift_owners(self, tag: str) -> tuple[str, str]:
        """(dominant sharer before drift year, dominant sharer after)."""
        i = int(tag.removeprefix("drift"))
        before_c, after_c = self.drift_communities(tag)
        c = self.n_communities
        names = self.user_names()
        return names[before_c + c * (i + 1)], names[after_c + c * (i + 1)]

    def validate(self) -> None:
        if min(self.users, self.hashtags, self.posts, self.years) < 1:
            raise SynthesisError("users, hashtags, posts, and years must be positive")
        planted = self.periodic + self.rising + self.stable + self.meteor
        if planted + self.drifted > self.hashtags:
            raise SynthesisError(
                f"{planted} planted + {self.drifted} drifted hashtags exceed "
                f"hashtag count {self.hashtags}"
            )
        for name in ("community_mix", "homophily", "no_hashtag_rate", "located_rate",
                     "drift_owner_rate", "drift_comm_rate", "adoption_start",
                     "adoption_end", "pair_affinity"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise SynthesisError(f"{name} must be in [0, 1], got {value}")
        if self.drifted > 0:
            if self.n_communities < 2:
                raise SynthesisError("drifted hashtags require at least 2 communities")
            y = self.effective_drift_year
            if not self.start_year < y < self.start_year + self.years:
                raise SynthesisError(f"drift year {y} outside corpus years")
            for tag in self.drifted_tags():
                i = int(tag.removeprefix("drift"))
                if max(self.drift_communities(tag)) + self.n_communities * (i + 1) >= self.users:
                    raise SynthesisError(
                        f"not enough users to assign distinct owners for {self.drifted} "
                        "drifted hashtags"
                    )
        if self.located_rate > 0 and len(self.categories) != len(self.category_tag_rates):
            raise SynthesisError("categories and category_tag_rates must align")


def _class_of(tag: str) -> str | None:
    for cls in TEMPORAL_CLASSES:
        if tag.startswith(cls):
            return cls
    return None


def _temporal_profiles(spec: SyntheticSpec, pool: list[str]) -> np.ndarray:
    """Per-tag per-quarter draw multipliers, mean 1 per row.

    Rows are share-mass vectors scaled by the quarter count, so a tag's total
    expected frequency stays proportional to its popularity weight.
    """
    q = spec.n_quarters
    profiles = np.ones((len(pool), q))
    for row, tag in enumerate(pool):
        cls = _class_of(tag)
        if cls is None:
            continue
        mass = np.empty(q)
        if cls == "periodic":
            peak = spec.periodic_quarter(tag)
            peaks = np.arange(q) % 4 == peak
            mass[peaks] = 0.9 / peaks.sum()
            mass[~peaks] = 0.1 / (~peaks).sum()
        elif cls == "rising":
            ramp = (np.arange(q, dtype=np.float64) + 1.0) ** 2
            mass = ramp / ramp.sum()
        elif cls == "stable":
            shape = np.ones(q)
            shape[:4] = [0.5, 0.72, 0.88, 1.0]
            mass = shape / shape.sum()
        else:  # meteor
            spike = spec.meteor_quarter(tag)
            mass[:] = 0.05 / (q - 1)
            mass[spike] = 0.95
        profiles[row] = mass * q
    return profiles


def _gumbel_top_m(rng: np.random.Generator, log_w: np.ndarray,
                  sizes: np.ndarray) -> list[np.ndarray]:
    """For each row size m, draw m distinct indices with probability ~ w.

    Gumbel-max sampling without replacement; rows are processed in one block.
    """
    n, m_max = len(sizes), int(sizes.max())
    picks: list[np.ndarray] = []
    chunk = max(1, 2_000_000 // max(len(log_w), 1))
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        keys = log_w[None, :] + rng.gumbel(size=(hi - lo, len(log_w)))
        top = np.argpartition(-keys, min(m_max, len(log_w) - 1), axis=1)[:, :m_max]
        for r, size in enumerate(sizes[lo:hi]):
            picks.append(top[r, :size])
    return picks


def _sample_distinct_pair(rng: np.random.Generator, pool: np.ndarray) -> tuple[int, int]:
    a = int(pool[rng.integers(len(pool))])
    while True:
        b = int(pool[rng.integers(len(pool))])
        if b != a:
            return a, b


def _sample_friendships(spec: SyntheticSpec, rng: np.random.Generator,
                        user_comm: np.ndarray) -> set[tuple[str, str]]:
    names = spec.user_names()
    target = int(round(spec.users * spec.friends_per_user / 2))
    max_pairs = spec.users * (spec.users - 1) // 2
    if target > max_pairs:
        raise SynthesisError(f"cannot place {target} friendships among {spec.users} users")
    members = [np.flatnonzero(user_comm == c) for c in range(spec.n_communities)]
    everyone = np.arange(spec.users)
    pairs: set[tuple[str, str]] = set()
    attempts = 0
    while len(pairs) < target:
        attempts += 1
        if attempts > 50 * target + 1000:
            raise SynthesisError("friendship sampling failed to reach target; spec infeasible")
        if rng.random() < spec.homophily:
            group = members[int(rng.integers(spec.n_communities))]
            if len(group) < 2:
                continue
            a, b = _sample_distinct_pair(rng, group)
        else:
            a, b = _sample_distinct_pair(rng, everyone)
        pairs.add((names[a], names[b]) if a < b else (names[b], names[a]))
    return pairs


def generate_synthetic(spec: SyntheticSpec) -> Corpus:
    """Generate a corpus realizing the spec's planted structure.

    Deterministic under the spec's seed.  Raises SynthesisError on
    infeasible specs.
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)

    pool = spec.pool_tags()
    pool_arr = np.array(pool)
    n_pool = len(pool)
    n_comm = spec.n_communities
    tag_comm = np.arange(n_pool) % n_comm
    zipf = 1.0 / np.power(np.arange(1, n_pool + 1), spec.zipf_exponent)
    profiles = _temporal_profiles(spec, pool)
    n_q = spec.n_quarters

    start_ts = int(datetime(spec.start_year, 1, 1, tzinfo=timezone.utc).timestamp())
    end_ts = int(datetime(spec.start_year + spec.years, 1, 1, tzinfo=timezone.utc).timestamp())

    n = spec.posts
    post_user = rng.integers(0, spec.users, n)
    post_ts = rng.integers(start_ts, end_ts, n)
    months = (post_ts.astype("datetime64[s]").astype("datetime64[M]")
              - np.datetime64(f"{spec.start_year}-01", "M")).astype(int)
    post_quarter = months // 3
    post_year = spec.start_year + months // 12
    user_comm_all = np.arange(spec.users) % n_comm
    post_comm = user_comm_all[post_user]

    # location assignment; category popularity decays linearly with rank
    n_cat = len(spec.categories)
    post_cat = np.full(n, -1)
    post_loc_idx = np.full(n, -1)
    if spec.located_rate > 0:
        located = rng.random(n) < spec.located_rate
        cat_w = np.arange(n_cat, 0, -1).astype(float)
        cat_w /= cat_w.sum()
        cats = rng.choice(n_cat, size=int(located.sum()), p=cat_w)
        post_cat[located] = cats
        post_loc_idx[located] = cats * LOCATIONS_PER_CATEGORY + rng.integers(
            0, LOCATIONS_PER_CATEGORY, len(cats)
        )

    # hashtag adoption; optionally growing over time, suppressed at some categories
    if spec.adoption_growth:
        frac = (post_ts - start_ts) / max(end_ts - start_ts, 1)
        p_tags = spec.adoption_start + (spec.adoption_end - spec.adoption_start) * frac
    else:
        p_tags = np.full(n, 1.0 - spec.no_hashtag_rate)
    if spec.located_rate > 0:
        rates = np.array(spec.category_tag_rates)
        mask = post_cat >= 0
        p_tags = p_tags.copy()
        p_tags[mask] = np.clip(p_tags[mask] * rates[post_cat[mask]], 0.0, 1.0)
    has_tags = rng.random(n) < p_tags

    sizes = np.zeros(n, dtype=np.int64)
    tagged = np.flatnonzero(has_tags)
    sizes[tagged] = 1 + rng.poisson(spec.mean_extra_tags, len(tagged))
    sizes = np.minimum(sizes, min(MAX_HASHTAGS_PER_POST - 2, n_pool))

    if n_comm > 1:
        m_comm = rng.binomial(sizes, spec.community_mix)
    else:
        m_comm = sizes.copy()
    m_glob = sizes - m_comm

    post_tags: list[list[str]] = [[] for _ in range(n)]
    log_zipf = np.log(zipf)

    # synonym pairs: a drawn pair member is re-rolled uniformly between the
    # two variants with probability pair_affinity, making the variants
    # interchangeable (near-identical context distributions)
    partner_idx = np.full(n_pool, -1)
    if spec.pair_affinity > 0:
        pool_index = {t: i for i, t in enumerate(pool)}
        for a, b in spec.synonym_pairs():
            partner_idx[pool_index[a]] = pool_index[b]
            partner_idx[pool_index[b]] = pool_index[a]
    swap_pairs = spec.pair_affinity > 0 and (partner_idx >= 0).any()

    # community-pool draws, grouped by (community, quarter)
    for c in range(n_comm):
        comm_tags = np.flatnonzero(tag_comm == c)
        for q in range(n_q):
            rows = np.flatnonzero((post_comm == c) & (post_quarter == q) & (m_comm > 0))
            if len(rows) == 0:
                continue
            w = log_zipf[comm_tags] + np.log(profiles[comm_tags, q])
            want = np.minimum(m_comm[rows], len(comm_tags))
            for i, picks in enumerate(_gumbel_top_m(rng, w, want)):
                chosen = comm_tags[picks]
                if swap_pairs and len(chosen):
                    paired = partner_idx[chosen] >= 0
                    reroll = paired & (rng.random(len(chosen)) < spec.pair_affinity)
                    flip = reroll & (rng.random(len(chosen)) < 0.5)
                    chosen = np.where(flip, partner_idx[chosen], chosen)
                post_tags[rows[i]] = [pool[j] for j in chosen]

    # global-pool draws (cross-community noise), grouped by quarter
    if n_comm > 1:
        for q in range(n_q):
            rows = np.flatnonzero((post_quarter == q) & (m_glob > 0))
            if len(rows) == 0:
                continue
            w = log_zipf + np.log(profiles[:, q])
            want = np.minimum(m_glob[rows], n_pool)
            for row, picks in zip(rows, _gumbel_top_m(rng, w, want)):
                post_tags[row].extend(pool_arr[picks])

    # drifted-hashtag injection: owner-dominated, community-bound per period
    drift_year = spec.effective_drift_year
    user_names = spec.user_names()
    name_to_idx = {u: i for i, u in enumerate(user_names)}
    for tag in spec.drifted_tags():
        before_c, after_c = spec.drift_communities(tag)
        owner_b, owner_a = spec.drift_owners(tag)
        before = post_year < drift_year
        cur_comm = np.where(before, before_c, after_c)
        cur_owner = np.where(before, name_to_idx[owner_b], name_to_idx[owner_a])
        is_owner = post_user == cur_owner
        in_comm = post_comm == cur_comm
        p = np.where(is_owner, spec.drift_owner_rate,
                     np.where(in_comm, spec.drift_comm_rate, 0.0))
        hits = np.flatnonzero(has_tags & (rng.random(n) < p))
        for row in hits:
            post_tags[row].append(tag)

    names = spec.user_names()
    loc_names = [f"loc{i:04d}" for i in range(n_cat * LOCATIONS_PER_CATEGORY)]
    location_categories = {
        loc_names[i]: spec.categories[i // LOCATIONS_PER_CATEGORY]
        for i in range(len(loc_names))
    } if spec.located_rate > 0 else {}

    order = np.lexsort((post_user, post_ts))
    posts = []
    for i in order:
        tags = frozenset(post_tags[i])
        if len(tags) > MAX_HASHTAGS_PER_POST:
            tags = frozenset(sorted(tags)[:MAX_HASHTAGS_PER_POST])
        posts.append(
            PostRecord(
                user=names[post_user[i]],
                time=int(post_ts[i]),
                hashtags=tags,
                location=loc_names[post_loc_idx[i]] if post_loc_idx[i] >= 0 else None,
            )
        )

    friendships = _sample_friendships(spec, rng, user_comm_all)
    return Corpus(
        posts=posts,
        users=set(names),
        friendships=friendships,
        location_categories=location_categories,
    )


def demo_spec(seed: int = 0) -> SyntheticSpec:
    """A bundled all-features spec sized for quick end-to-end runs."""
    return SyntheticSpec(
        users=300,
        hashtags=185,
        posts=30000,
        years=4,
        periodic=30,
        rising=90,
        stable=40,
        meteor=15,
        communities=8,
        drifted=10,
        homophily=0.6,
        located_rate=0.5,
        zipf_exponent=0.7,
        seed=seed,
    )
