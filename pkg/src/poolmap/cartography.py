"""Dataset maps: per-example learnability statistics from training dynamics.

Each watched example gets a mean gold-label confidence (mu), its variability
(sigma, population standard deviation over epochs), a correctness fraction, a
difficulty bucket derived from mu, and an outlier score. Low-score examples
are the pruning targets for the ablation experiments.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

from .datagen import GROUP_NAMES, Dataset, Group
from .errors import ConfigError, CsvFormatError
from .models import TrainingDynamics

SCORE_RULES = ("product", "corner_distance")


class Bucket(IntEnum):
    EASY = 0
    MEDIUM = 1
    HARD = 2
    IMPOSSIBLE = 3


BUCKET_NAMES = {
    Bucket.EASY: "easy",
    Bucket.MEDIUM: "medium",
    Bucket.HARD: "hard",
    Bucket.IMPOSSIBLE: "impossible",
}
_NAME_TO_BUCKET = {name: bucket for bucket, name in BUCKET_NAMES.items()}

# Half-open mean-confidence intervals: easy [0.75, 1], medium [0.50, 0.75),
# hard [0.25, 0.50), impossible [0, 0.25).
BUCKET_THRESHOLDS = (0.75, 0.50, 0.25)


@dataclass
class DatasetMap:
    indices: np.ndarray  # (w,) watched example ids, ascending
    mu: np.ndarray
    sigma: np.ndarray
    correctness: np.ndarray
    bucket: np.ndarray  # (w,) Bucket values
    outlier_score: np.ndarray

    def __post_init__(self) -> None:
        self.indices = np.asarray(self.indices, dtype=np.int64)
        if np.any(np.diff(self.indices) <= 0):
            raise ConfigError("map indices must be strictly ascending")

    @property
    def num_examples(self) -> int:
        return len(self.indices)

    def rows_for(self, indices) -> np.ndarray:
        """Positions of the given example ids inside the map."""
        query = np.asarray(indices, dtype=np.int64)
        pos = np.searchsorted(self.indices, query)
        bad = (pos >= len(self.indices)) | (self.indices[np.minimum(pos, len(self.indices) - 1)] != query)
        if np.any(bad):
            missing = query[bad][:5]
            raise ConfigError(f"examples {missing.tolist()} are not covered by the map")
        return pos


def assign_buckets(mu: np.ndarray) -> np.ndarray:
    mu = np.asarray(mu)
    out = np.full(mu.shape, int(Bucket.IMPOSSIBLE), dtype=np.int8)
    out[mu >= BUCKET_THRESHOLDS[2]] = int(Bucket.HARD)
    out[mu >= BUCKET_THRESHOLDS[1]] = int(Bucket.MEDIUM)
    out[mu >= BUCKET_THRESHOLDS[0]] = int(Bucket.EASY)
    return out


def compute_map(dynamics: TrainingDynamics, score_rule: str = "product") -> DatasetMap:
    """Reduce per-epoch gold confidences to map statistics.

    ``score_rule="product"`` is the default mu * sigma outlier score;
    ``"corner_distance"`` (Euclidean distance from the map origin) is a
    non-default alternative for sensitivity checks.
    """
    if score_rule not in SCORE_RULES:
        raise ConfigError(f"unknown score_rule {score_rule!r}")
    conf = np.asarray(dynamics.gold_confidence, dtype=np.float64)
    if conf.ndim != 2 or conf.shape[1] < 2:
        raise ConfigError("dynamics must cover at least two epochs")
    mu = conf.mean(axis=1)
    sigma = conf.std(axis=1)  # population std: spread over all logged epochs
    correctness = np.asarray(dynamics.correct, dtype=np.float64).mean(axis=1)
    if score_rule == "product":
        score = mu * sigma
    else:
        score = np.hypot(mu, sigma)
    order = np.argsort(dynamics.indices)
    return DatasetMap(
        indices=np.asarray(dynamics.indices)[order],
        mu=mu[order],
        sigma=sigma[order],
        correctness=correctness[order],
        bucket=assign_buckets(mu[order]),
        outlier_score=score[order],
    )


def rank_by_outlier_score(dmap: DatasetMap) -> np.ndarray:
    """Example ids ordered by ascending outlier score, ties by ascending id."""
    if dmap.num_examples == 0:
        raise ConfigError("map is empty")
    order = np.lexsort((dmap.indices, dmap.outlier_score))
    return dmap.indices[order]


def ablate_pool(pool, dmap: DatasetMap, removal_fraction: float) -> np.ndarray:
    """Drop the ``floor(fraction * |pool|)`` lowest-score pool members.

    Returns the surviving pool indices sorted ascending; increasing the
    fraction yields nested (shrinking) pools.
    """
    if not 0.0 <= removal_fraction < 1.0:
        raise ConfigError("removal_fraction must lie in [0, 1)")
    pool = np.sort(np.asarray(pool, dtype=np.int64))
    k = int(np.floor(removal_fraction * len(pool)))
    if k == 0:
        return pool
    scores = dmap.outlier_score[dmap.rows_for(pool)]
    order = np.lexsort((pool, scores))
    return np.sort(pool[order[k:]])


def bucket_histogram(dmap: DatasetMap, indices) -> np.ndarray:
    """Counts per bucket (easy, medium, hard, impossible) for the given ids."""
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        return np.zeros(len(Bucket), dtype=np.int64)
    buckets = dmap.bucket[dmap.rows_for(indices)]
    return np.bincount(buckets, minlength=len(Bucket)).astype(np.int64)


MAP_CSV_HEADER = ["index", "mu", "sigma", "correctness", "bucket", "outlier_score", "group"]


def save_map_csv(dmap: DatasetMap, dataset: Dataset, path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MAP_CSV_HEADER)
        for row in range(dmap.num_examples):
            idx = int(dmap.indices[row])
            writer.writerow(
                [
                    str(idx),
                    repr(float(dmap.mu[row])),
                    repr(float(dmap.sigma[row])),
                    repr(float(dmap.correctness[row])),
                    BUCKET_NAMES[Bucket(int(dmap.bucket[row]))],
                    repr(float(dmap.outlier_score[row])),
                    GROUP_NAMES[Group(int(dataset.groups[idx]))],
                ]
            )


def load_map_csv(path) -> tuple[DatasetMap, np.ndarray]:
    """Read a map CSV back; returns (map, per-row group tags)."""
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError("line 1: empty file") from None
        if header != MAP_CSV_HEADER:
            raise CsvFormatError(f"line 1: expected header {','.join(MAP_CSV_HEADER)}")
        from .datagen import _NAME_TO_GROUP

        rows = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(MAP_CSV_HEADER):
                raise CsvFormatError(f"line {lineno}: expected {len(MAP_CSV_HEADER)} fields")
            try:
                rows.append(
                    (
                        int(row[0]),
                        float(row[1]),
                        float(row[2]),
                        float(row[3]),
                        int(_NAME_TO_BUCKET[row[4]]),
                        float(row[5]),
                        int(_NAME_TO_GROUP[row[6]]),
                    )
                )
            except (ValueError, KeyError) as exc:
                raise CsvFormatError(f"line {lineno}: {exc!r}") from None
    if not rows:
        raise CsvFormatError("line 2: file contains no data rows")
    rows.sort(key=lambda r: r[0])
    groups = np.asarray([r[6] for r in rows], dtype=np.int8)
    dmap = DatasetMap(
        indices=np.asarray([r[0] for r in rows], dtype=np.int64),
        mu=np.asarray([r[1] for r in rows]),
        sigma=np.asarray([r[2] for r in rows]),
        correctness=np.asarray([r[3] for r in rows]),
        bucket=np.asarray([r[4] for r in rows], dtype=np.int8),
        outlier_score=np.asarray([r[5] for r in rows]),
    )
    return dmap, groups
