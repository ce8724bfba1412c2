"""Diachronic hashtag semantics: per-year embeddings, orthogonal alignment,
displacement scores, sharing entropy, and their correlations.

Vectors trained on different years live in arbitrary coordinate frames, so a
year is rotated onto the next with the closed-form orthogonal least-squares
alignment before distances are measured.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus, top_k_hashtags
from .embedding import EmbeddingTable, TrainConfig, cosine_distance, train

ORTHOGONALITY_TOL = 1e-8


@dataclass
class AlignmentMap:
    """Orthogonal d x d matrix rotating a source year onto a target year."""

    matrix: np.ndarray

    def orthogonality_residual(self) -> float:
        x = self.matrix
        return float(np.abs(x @ x.T - np.eye(len(x))).max())

    def apply(self, vectors: np.ndarray) -> np.ndarray:
        """Rotate column vectors (d x n) or a single vector."""
        return self.matrix @ vectors


@dataclass
class YearlyEmbeddings:
    tables: dict[int, EmbeddingTable]

    @property
    def years(self) -> list[int]:
        return sorted(self.tables)

    def shared_vocab(self, year_a: int, year_b: int, order_by: dict[str, int]) -> list[str]:
        """Hashtags present in both years, most frequent first, ties lexical."""
        common = set(self.tables[year_a].vocab.index) & set(self.tables[year_b].vocab.index)
        return sorted(common, key=lambda t: (-order_by.get(t, 0), t))


@dataclass
class DisplacementReport:
    years: list[int]
    hashtags: list[str]
    single: dict[str, dict[tuple[int, int], float]]
    overall: dict[str, float]
    entropy: dict[tuple[str, int], float]
    frequency: dict[tuple[str, int], int]
    entropy_correlation: float | None
    frequency_correlation: float | None


def procrustes_align(source: np.ndarray, target: np.ndarray) -> AlignmentMap:
    """Best orthogonal X mapping source columns onto target columns.

    Both matrices are d x n with column i of each holding the same
    vocabulary item.  X = U V^T from the SVD of target @ source^T, the
    minimizer of ||X source - target||_F over orthogonal X.
    """
    source = np.asarray(source, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if source.shape != target.shape:
        raise ValueError(f"shape mismatch: source {source.shape}, target {target.shape}")
    if source.ndim != 2:
        raise ValueError("expected 2-D matrices")
    u, _, vt = np.linalg.svd(target @ source.T)
    x = u @ vt
    result = AlignmentMap(matrix=x)
    residual = result.orthogonality_residual()
    if residual > ORTHOGONALITY_TOL:
        raise ArithmeticError(f"alignment not orthogonal: residual {residual:.3e}")
    return result


def single_displacement(aligned_source_vec: np.ndarray, target_vec: np.ndarray) -> float:
    """Cosine distance between a hashtag's aligned vector and its target-year vector."""
    return cosine_distance(aligned_source_vec, target_vec)


def overall_displacement(per_pair: list[float]) -> float:
    """Mean of a hashtag's consecutive-year displacements."""
    if not per_pair:
        raise ValueError("hashtag has no consecutive-year displacement values")
    return float(np.mean(per_pair))


def user_share_counts(corpus: Corpus, hashtag: str, year: int) -> Counter:
    counts: Counter = Counter()
    for post in corpus.posts_in_year(year):
        if hashtag in post.hashtags:
            counts[post.user] += 1
    return counts


def entropy_from_counts(counts, bits: bool = False) -> float:
    values = np.array([c for c in counts if c > 0], dtype=np.float64)
    if values.sum() <= 0:
        raise ValueError("entropy undefined without shares")
    p = values / values.sum()
    h = float(-(p * np.log(p)).sum())
    return h / math.log(2) if bits else h


def hashtag_entropy(corpus: Corpus, hashtag: str, year: int, bits: bool = False) -> float:
    """Entropy of the hashtag's share distribution across users in a year.

    p(u) is the fraction of the hashtag's shares that user u contributed;
    natural log by default.  0 means a single sharer; ln(n) means n users
    sharing uniformly.
    """
    counts = user_share_counts(corpus, hashtag, year)
    if not counts:
        raise ValueError(f"hashtag {hashtag!r} unshared in {year}")
    return entropy_from_counts(counts.values(), bits=bits)


def pearson(x, y) -> float:
    """Pearson product-moment correlation coefficient."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be 1-D and the same length")
    if len(x) < 3:
        raise ValueError(f"need at least 3 points, got {len(x)}")
    xc = x - x.mean()
    yc = y - y.mean()
    vx = (xc ** 2).sum()
    vy = (yc ** 2).sum()
    if vx == 0.0 or vy == 0.0:
        raise ValueError("zero variance input")
    return float((xc * yc).sum() / math.sqrt(vx * vy))


def yearly_sentences(corpus: Corpus, year: int) -> list[list[str]]:
    """Each post's hashtag set as one sentence, sorted for determinism."""
    return [sorted(p.hashtags) for p in corpus.posts_in_year(year) if len(p.hashtags) >= 2]


def train_yearly(corpus: Corpus, years: list[int], config: TrainConfig) -> YearlyEmbeddings:
    """One embedding table per year, all trained with the same config.

    The same seed is reused for every year: together with the per-token
    hash initialization this makes identical year slices produce identical
    tables, so the identical-data control shows zero displacement.
    """
    tables = {}
    for year in years:
        sentences = yearly_sentences(corpus, year)
        if not sentences:
            raise ValueError(f"no multi-hashtag posts in {year}")
        tables[year] = train(sentences, config)
    return YearlyEmbeddings(tables=tables)


def drift_analysis(
    corpus: Corpus,
    years: list[int],
    top_k: int = 1000,
    config: TrainConfig | None = None,
    entropy_at_earlier_year: bool = True,
) -> DisplacementReport:
    """Full displacement pipeline over consecutive year pairs.

    Trains per-year embeddings, aligns year t onto t+1 over their shared
    vocabulary, and reports per-hashtag single and overall displacements for
    the corpus-wide top-k hashtags, per-year sharing entropies, and the
    displacement-entropy and displacement-frequency correlations.  Each
    (hashtag, year pair) contributes one correlation point, with entropy and
    frequency read at the pair's earlier year by default.
    """
    years = sorted(years)
    if len(years) < 2:
        raise ValueError("need at least 2 years")
    if config is None:
        config = TrainConfig()
    yearly = train_yearly(corpus, years, config)

    share_order = {t: c for t, c in corpus.share_counts().items()}
    focus = top_k_hashtags(corpus, top_k)
    focus_set = set(focus)

    single: dict[str, dict[tuple[int, int], float]] = {t: {} for t in focus}
    entropy: dict[tuple[str, int], float] = {}
    frequency: dict[tuple[str, int], int] = {}

    yearly_user_counts: dict[int, dict[str, Counter]] = {}
    for year in years:
        per_tag: dict[str, Counter] = {}
        for post in corpus.posts_in_year(year):
            for tag in post.hashtags:
                if tag in focus_set:
                    per_tag.setdefault(tag, Counter())[post.user] += 1
        yearly_user_counts[year] = per_tag
        for tag, counts in per_tag.items():
            entropy[(tag, year)] = entropy_from_counts(counts.values())
            frequency[(tag, year)] = int(sum(counts.values()))

    for y_a, y_b in zip(years, years[1:]):
        shared = yearly.shared_vocab(y_a, y_b, share_order)
        if not shared:
            raise ValueError(f"no shared vocabulary between {y_a} and {y_b}")
        tab_a, tab_b = yearly.tables[y_a], yearly.tables[y_b]
        src = np.stack([tab_a.vector(t) for t in shared], axis=1).astype(np.float64)
        dst = np.stack([tab_b.vector(t) for t in shared], axis=1).astype(np.float64)
        alignment = procrustes_align(src, dst)
        aligned = alignment.apply(src)
        for col, tag in enumerate(shared):
            if tag in focus_set:
                single[tag][(y_a, y_b)] = single_displacement(aligned[:, col], dst[:, col])

    overall = {
        tag: overall_displacement(list(pairs.values()))
        for tag, pairs in single.items()
        if pairs
    }

    ent_x, ent_y, freq_x, freq_y = [], [], [], []
    for tag, pairs in single.items():
        for (y_a, y_b), disp in pairs.items():
            ref_year = y_a if entropy_at_earlier_year else y_b
            if (tag, ref_year) in entropy:
                ent_x.append(entropy[(tag, ref_year)])
                ent_y.append(disp)
            if (tag, ref_year) in frequency:
                freq_x.append(frequency[(tag, ref_year)])
                freq_y.append(disp)
    ent_corr = pearson(ent_x, ent_y) if len(ent_x) >= 3 and len(set(ent_x)) > 1 else None
    freq_corr = pearson(freq_x, freq_y) if len(freq_x) >= 3 and len(set(freq_x)) > 1 else None

    return DisplacementReport(
        years=years,
        hashtags=[t for t in focus if t in overall],
        single=single,
        overall=overall,
        entropy=entropy,
        frequency=frequency,
        entropy_correlation=ent_corr,
        frequency_correlation=freq_corr,
    )


def export_csv(report: DisplacementReport, path: str | Path) -> None:
    """Per-hashtag overall displacement with per-pair detail columns."""
    pairs = list(zip(report.years, report.years[1:]))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        header = ["hashtag", "overall_displacement"]
        for y_a, y_b in pairs:
            header += [f"disp_{y_a}_{y_b}", f"entropy_{y_a}", f"shares_{y_a}"]
        writer.writerow(header)
        ranked = sorted(report.overall, key=lambda t: (-report.overall[t], t))
        for tag in ranked:
            row = [tag, repr(report.overall[tag])]
            for y_a, y_b in pairs:
                disp = report.single.get(tag, {}).get((y_a, y_b))
                ent = report.entropy.get((tag, y_a))
                freq = report.frequency.get((tag, y_a))
                row += [
                    repr(disp) if disp is not None else "",
                    repr(ent) if ent is not None else "",
                    freq if freq is not None else "",
                ]
            writer.writerow(row)


def export_scatter(report: DisplacementReport, path: str | Path) -> None:
    """(entropy, displacement) scatter points for external plotting."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["hashtag", "year_a", "year_b", "entropy", "displacement"])
        for tag in sorted(report.single):
            for (y_a, y_b), disp in sorted(report.single[tag].items()):
                ent = report.entropy.get((tag, y_a))
                if ent is not None:
                    writer.writerow([tag, y_a, y_b, repr(ent), repr(disp)])
