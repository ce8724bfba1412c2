"""Temporal pattern analysis over quarterly share series.

Each hashtag's share-proportion series is summarized into a 13-value feature
vector, feature-standardized, clustered with k-means, and the cluster count
is picked by silhouette.  Clusters are then labeled Stable, Rising, Periodic,
or Meteor from their members' series statistics.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .corpus import Corpus, QuarterBucket, bucket_share_series, top_k_hashtags, DEFAULT_BUCKET_RANGE

SERIES_LENGTH = 16
N_FEATURES = 13

FEATURE_NAMES = [
    "series_std",
    "top1", "top2", "top3",
    "top3_mean", "top3_std", "top3_index_std",
    "bottom1", "bottom2", "bottom3",
    "bottom3_mean", "bottom3_std", "bottom3_index_std",
]

LABELS = ("Stable", "Rising", "Periodic", "Meteor")


@dataclass(frozen=True)
class LabelThresholds:
    """Cutoffs for the cluster labeling heuristics."""

    periodic_autocorr: float = 0.3    # lag-4 autocorrelation of detrended series
    rising_slope: float = 0.005       # linear-fit slope per quarter
    meteor_peak_mass: float = 0.5     # largest single-bucket share


@dataclass
class TemporalProfile:
    hashtag: str
    series: np.ndarray     # 16 share proportions, sum 1
    features: np.ndarray   # 13 derived values


@dataclass
class ClusterResult:
    k: int
    assignment: dict[str, int]
    centroids: np.ndarray            # k x n_features, in standardized space
    silhouette: float
    labels: dict[int, str] = field(default_factory=dict)
    sse: float = 0.0
    sse_history: list[float] = field(default_factory=list)


def extract_features(series: np.ndarray) -> np.ndarray:
    """13 ordered summary features of a 16-quarter share series.

    Order: overall std; the 3 largest values (descending); their mean, std,
    and index std; the 3 smallest values (ascending); their mean, std, and
    index std.  Population std throughout; value ties resolve to the lowest
    index.
    """
    series = np.asarray(series, dtype=np.float64)
    if series.shape != (SERIES_LENGTH,):
        raise ValueError(f"series must have length {SERIES_LENGTH}, got shape {series.shape}")
    idx = np.arange(SERIES_LENGTH)
    desc = np.lexsort((idx, -series))[:3]    # by value desc, then lowest index
    asc = np.lexsort((idx, series))[:3]      # by value asc, then lowest index
    top_vals = series[desc]
    bot_vals = series[asc]
    return np.array([
        series.std(),
        top_vals[0], top_vals[1], top_vals[2],
        top_vals.mean(), top_vals.std(), desc.astype(np.float64).std(),
        bot_vals[0], bot_vals[1], bot_vals[2],
        bot_vals.mean(), bot_vals.std(), asc.astype(np.float64).std(),
    ])


def build_profiles(
    corpus: Corpus,
    top_k: int = 1000,
    bucket_range: tuple[QuarterBucket, QuarterBucket] = DEFAULT_BUCKET_RANGE,
) -> list[TemporalProfile]:
    """Profiles for the top-k most shared hashtags with in-range activity."""
    series_map = bucket_share_series(corpus, bucket_range)
    profiles = []
    for tag in top_k_hashtags(corpus, top_k):
        series = series_map.get(tag)
        if series is None:
            continue
        profiles.append(TemporalProfile(tag, series, extract_features(series)))
    return profiles


def standardize(points: np.ndarray) -> np.ndarray:
    """Z-score per feature; constant features pass through unscaled."""
    points = np.asarray(points, dtype=np.float64)
    mean = points.mean(axis=0)
    std = points.std(axis=0)
    std[std == 0.0] = 1.0
    return (points - mean) / std


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(points)
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    d2 = ((points - centroids[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centroids[i] = points[rng.integers(n)]
            continue
        r = rng.random() * total
        centroids[i] = points[np.searchsorted(np.cumsum(d2), r)]
        d2 = np.minimum(d2, ((points - centroids[i]) ** 2).sum(axis=1))
    return centroids


@dataclass
class KMeansRun:
    assignment: np.ndarray
    centroids: np.ndarray
    sse_history: list[float]
    repairs: int

    @property
    def sse(self) -> float:
        return self.sse_history[-1]


def kmeans(points: np.ndarray, k: int, seed: int = 0, max_iter: int = 300) -> KMeansRun:
    """Lloyd's iteration with k-means++ seeding.

    An empty cluster is repaired by reseeding its centroid at the point
    farthest from its assigned centroid; the within-cluster SSE is checked
    to be non-increasing on every iteration.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or len(points) == 0:
        raise ValueError("points must be a non-empty 2-D array")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > len(points):
        raise ValueError(f"k={k} exceeds number of points {len(points)}")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(points, k, rng)
    assignment = np.zeros(len(points), dtype=np.int64)
    sse_history: list[float] = []
    repairs = 0
    for _ in range(max_iter):
        d2 = ((points[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assignment = d2.argmin(axis=1)
        dist_own = d2[np.arange(len(points)), new_assignment]
        for c in range(k):
            if (new_assignment == c).any():
                continue
            far = int(dist_own.argmax())
            centroids[c] = points[far]
            new_assignment[far] = c
            dist_own[far] = 0.0
            repairs += 1
        sse = float(dist_own.sum())

        if sse_history and sse > sse_history[-1] * (1 + 1e-12) + 1e-12:
            raise AssertionError(f"k-means SSE increased: {sse_history[-1]} -> {sse}")
        sse_history.append(sse)
        converged = (new_assignment == assignment).all() and len(sse_history) > 1
        assignment = new_assignment
        for c in range(k):
            members = points[assignment == c]
            if len(members):
                centroids[c] = members.mean(axis=0)
        if converged:
            break
    return KMeansRun(assignment=assignment, centroids=centroids,
                     sse_history=sse_history, repairs=repairs)


def silhouette(points: np.ndarray, assignment: np.ndarray) -> float:
    """Mean silhouette value with Euclidean distances.

    Points in singleton clusters contribute 0.  Requires at least two
    non-empty clusters.
    """
    points = np.asarray(points, dtype=np.float64)
    assignment = np.asarray(assignment)
    cluster_ids = np.unique(assignment)
    if len(cluster_ids) < 2:
        raise ValueError("silhouette requires at least 2 clusters")
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=2))
    n = len(points)
    scores = np.zeros(n)
    masks = {c: assignment == c for c in cluster_ids}
    sizes = {c: int(m.sum()) for c, m in masks.items()}
    for i in range(n):
        own = assignment[i]
        if sizes[own] == 1:
            continue
        a = dist[i, masks[own]].sum() / (sizes[own] - 1)
        b = min(
            dist[i, masks[c]].mean() for c in cluster_ids if c != own
        )
        scores[i] = (b - a) / max(a, b)
    return float(scores.mean())


def select_k(
    points: np.ndarray,
    k_range: range | list[int],
    seed: int = 0,
    names: list[str] | None = None,
    restarts: int = 10,
) -> ClusterResult:
    """Cluster at each k (best SSE of several restarts) and keep the k with
    the highest silhouette.  Input features are standardized here.
    """
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise ValueError("empty k range")
    if any(k < 2 or k > 10 for k in ks):
        raise ValueError(f"k range must lie within [2, 10], got {ks}")
    pts = standardize(points)
    if names is None:
        names = [str(i) for i in range(len(pts))]
    best: ClusterResult | None = None
    for k in ks:
        run_best: KMeansRun | None = None
        for r in range(restarts):
            run = kmeans(pts, k, seed=seed * 1000 + k * 37 + r)
            if run_best is None or run.sse < run_best.sse:
                run_best = run
        score = silhouette(pts, run_best.assignment)
        if best is None or score > best.silhouette:
            best = ClusterResult(
                k=k,
                assignment={names[i]: int(c) for i, c in enumerate(run_best.assignment)},
                centroids=run_best.centroids,
                silhouette=score,
                sse=run_best.sse,
                sse_history=run_best.sse_history,
            )
    return best


def _detrended_lag4_autocorr(series: np.ndarray) -> float:
    x = np.asarray(series, dtype=np.float64)
    t = np.arange(len(x))
    slope, intercept = np.polyfit(t, x, 1)
    r = x - (slope * t + intercept)
    denom = (r ** 2).sum()
    # a (near-)perfect linear fit leaves only float noise; call that zero
    if denom <= 1e-12 * max(((x - x.mean()) ** 2).sum(), 1e-300):
        return 0.0
    return float((r[:-4] * r[4:]).sum() / denom)


def _slope(series: np.ndarray) -> float:
    t = np.arange(len(series))
    return float(np.polyfit(t, np.asarray(series, dtype=np.float64), 1)[0])


def label_clusters(
    result: ClusterResult,
    profiles: list[TemporalProfile],
    thresholds: LabelThresholds = LabelThresholds(),
) -> ClusterResult:
    """Attach a temporal label to every cluster.

    Per-member series statistics are averaged within each cluster: lag-4
    autocorrelation of the detrended series marks Periodic, a dominant
    positive slope marks Rising, a dominant single bucket marks Meteor, and
    anything else falls back to Stable.
    """
    by_tag = {p.hashtag: p for p in profiles}
    stats: dict[int, list[np.ndarray]] = {}
    for tag, cluster in result.assignment.items():
        series = by_tag[tag].series
        row = np.array([
            _detrended_lag4_autocorr(series),
            _slope(series),
            float(np.max(series)),
        ])
        stats.setdefault(cluster, []).append(row)
    labels: dict[int, str] = {}
    for cluster, rows in stats.items():
        autocorr, slope, peak = np.mean(rows, axis=0)
        if autocorr > thresholds.periodic_autocorr:
            labels[cluster] = "Periodic"
        elif slope > thresholds.rising_slope:
            labels[cluster] = "Rising"
        elif peak > thresholds.meteor_peak_mass:
            labels[cluster] = "Meteor"
        else:
            labels[cluster] = "Stable"
    return replace(result, labels=labels)


def export_csv(result: ClusterResult, profiles: list[TemporalProfile],
               path: str | Path) -> None:
    """hashtag, 16 series values, 13 features, cluster id, label."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["hashtag"] + [f"q{i}" for i in range(SERIES_LENGTH)]
            + FEATURE_NAMES + ["cluster", "label"]
        )
        for p in sorted(profiles, key=lambda p: p.hashtag):
            cluster = result.assignment[p.hashtag]
            writer.writerow(
                [p.hashtag]
                + [repr(float(x)) for x in p.series]
                + [repr(float(x)) for x in p.features]
                + [cluster, result.labels.get(cluster, "")]
            )


def export_centroid_series(result: ClusterResult, profiles: list[TemporalProfile],
                           path: str | Path) -> None:
    """JSON plot data: mean share series per cluster."""
    by_tag = {p.hashtag: p for p in profiles}
    series: dict[int, list[np.ndarray]] = {}
    for tag, cluster in result.assignment.items():
        series.setdefault(cluster, []).append(by_tag[tag].series)
    payload = {
        "k": result.k,
        "silhouette": result.silhouette,
        "clusters": [
            {
                "cluster": c,
                "label": result.labels.get(c, ""),
                "size": len(series[c]),
                "mean_series": [float(x) for x in np.mean(series[c], axis=0)],
            }
            for c in sorted(series)
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
