"""Synthetic classification pools with injected collective outliers, plus CSV I/O.

Examples live in two feature subspaces ("vision-like" and "language-like") so
that diversity-based selection can operate per subspace or on the fused space.
Two kinds of collective outliers can be injected:

* noise collectives: a few dedicated feature clusters whose labels are drawn
  uniformly at random, independent of the features (unlearnable by design);
* underspecified collectives: small groups of examples with byte-identical
  features but pairwise-different labels (no single correct answer exists).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import ConfigError, CsvFormatError
from .seeds import derive_rng

# Random-label examples are concentrated in a few dedicated clusters so they
# form collectives rather than scattered global outliers.
NOISE_CLUSTER_COUNT = 3


class Group(IntEnum):
    """Provenance of an example: ordinary cluster member or injected outlier."""

    LEARNABLE = 0
    NOISE_COLLECTIVE = 1
    UNDERSPECIFIED_COLLECTIVE = 2


GROUP_NAMES = {
    Group.LEARNABLE: "learnable",
    Group.NOISE_COLLECTIVE: "noise_collective",
    Group.UNDERSPECIFIED_COLLECTIVE: "underspecified_collective",
}
_NAME_TO_GROUP = {name: group for group, name in GROUP_NAMES.items()}


@dataclass(frozen=True)
class GeneratorConfig:
    num_examples: int
    num_classes: int
    dim_vision: int
    dim_language: int
    cluster_spread: float = 1.0
    outlier_fraction_noise: float = 0.0
    outlier_fraction_underspecified: float = 0.0
    rng_seed: int = 0

    def validate(self) -> None:
        if self.num_examples < 1:
            raise ConfigError("num_examples must be >= 1")
        if self.num_classes < 2:
            raise ConfigError("num_classes must be >= 2")
        if self.dim_vision < 1 or self.dim_language < 1:
            raise ConfigError("both feature subspaces need at least one dimension")
        if not self.cluster_spread > 0:
            raise ConfigError("cluster_spread must be > 0")
        for name in ("outlier_fraction_noise", "outlier_fraction_underspecified"):
            frac = getattr(self, name)
            if not 0.0 <= frac <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.outlier_fraction_noise + self.outlier_fraction_underspecified >= 1.0:
            raise ConfigError("outlier fractions must sum to < 1")


@dataclass
class Dataset:
    """Immutable feature/label/provenance container.

    Arrays are copied on construction and marked read-only, so a Dataset can
    be shared freely across concurrent readers.
    """

    features_vision: np.ndarray
    features_language: np.ndarray
    labels: np.ndarray
    groups: np.ndarray
    num_classes: int

    def __post_init__(self) -> None:
        self.features_vision = np.array(self.features_vision, dtype=np.float64)
        self.features_language = np.array(self.features_language, dtype=np.float64)
        self.labels = np.array(self.labels, dtype=np.int64)
        self.groups = np.array(self.groups, dtype=np.int8)
        n = self.features_vision.shape[0]
        if n < 1:
            raise ConfigError("dataset must contain at least one example")
        if self.features_vision.ndim != 2 or self.features_language.ndim != 2:
            raise ConfigError("feature blocks must be 2-D matrices")
        if self.features_language.shape[0] != n or self.labels.shape != (n,) or self.groups.shape != (n,):
            raise ConfigError("feature, label, and group arrays must agree on the example count")
        if self.features_vision.shape[1] < 1 or self.features_language.shape[1] < 1:
            raise ConfigError("both feature subspaces need at least one dimension")
        if self.num_classes < 2:
            raise ConfigError("num_classes must be >= 2")
        if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
            raise ConfigError("labels must lie in [0, num_classes)")
        valid_groups = {int(g) for g in Group}
        if not set(np.unique(self.groups)).issubset(valid_groups):
            raise ConfigError("groups must be Group values")
        for arr in (self.features_vision, self.features_language, self.labels, self.groups):
            arr.setflags(write=False)

    @property
    def num_examples(self) -> int:
        return self.features_vision.shape[0]

    @property
    def dim_vision(self) -> int:
        return self.features_vision.shape[1]

    @property
    def dim_language(self) -> int:
        return self.features_language.shape[1]

    def feature_pair(self, indices=None) -> tuple[np.ndarray, np.ndarray]:
        if indices is None:
            return self.features_vision, self.features_language
        idx = np.asarray(indices, dtype=np.int64)
        return self.features_vision[idx], self.features_language[idx]

    def features(self, indices=None) -> np.ndarray:
        xv, xl = self.feature_pair(indices)
        return np.hstack([xv, xl])

    def group_indices(self, group: Group) -> np.ndarray:
        return np.flatnonzero(self.groups == int(group))


@dataclass(frozen=True)
class SeedPoolSplit:
    seed_indices: np.ndarray
    pool_indices: np.ndarray


def _underspecified_group_sizes(n: int, num_classes: int) -> list[int]:
    # Group size is capped by how many pairwise-distinct labels are available
    # once the host cluster's class is excluded; a group may grow to use every
    # class when that is the only way to avoid a size-1 leftover.
    max_size = min(4, num_classes - 1) if num_classes >= 4 else 2
    sizes: list[int] = []
    remaining = n
    while remaining:
        g = min(max_size, remaining)
        if remaining - g == 1:
            if max_size >= 3:
                g -= 1  # keep the leftover group at size >= 2
            elif num_classes >= 3:
                g += 1  # one size-3 group drawing on all classes
            else:
                raise ConfigError(
                    f"cannot partition {n} underspecified examples into groups of >= 2 "
                    f"with {num_classes} classes"
                )
        sizes.append(g)
        remaining -= g
    return sizes


def _underspecified_block(
    rng: np.random.Generator, n: int, centers: np.ndarray, config: GeneratorConfig
) -> tuple[np.ndarray, np.ndarray]:
    dim = centers.shape[1]
    c = config.num_classes
    if n == 0:
        return np.empty((0, dim)), np.empty((0,), dtype=np.int64)
    features = np.empty((n, dim))
    labels = np.empty((n,), dtype=np.int64)
    cursor = 0
    for size in _underspecified_group_sizes(n, c):
        base_class = int(rng.integers(0, c))
        base = centers[base_class] + config.cluster_spread * rng.standard_normal(dim)
        if c - 1 >= size:
            allowed = np.array([k for k in range(c) if k != base_class])
        else:
            allowed = np.arange(c)
        picked = rng.permutation(allowed)[:size]
        features[cursor : cursor + size] = base  # exact duplicates within the group
        labels[cursor : cursor + size] = picked
        cursor += size
    return features, labels


def generate_synthetic(config: GeneratorConfig) -> Dataset:
    """Build a dataset of Gaussian class clusters plus injected outlier collectives.

    Fully deterministic given ``config.rng_seed``; each generation phase draws
    from its own derived stream.
    """
    config.validate()
    n_total = config.num_examples
    n_noise = round(config.outlier_fraction_noise * n_total)
    n_under = round(config.outlier_fraction_underspecified * n_total)
    n_learn = n_total - n_noise - n_under
    if n_learn < 1:
        raise ConfigError("outlier fractions leave no learnable examples")
    if n_under == 1:
        raise ConfigError(
            "outlier_fraction_underspecified yields a single example; "
            "groups need at least two members"
        )
    dim = config.dim_vision + config.dim_language
    c = config.num_classes
    spread = config.cluster_spread

    centers = derive_rng(config.rng_seed, "class-centers").standard_normal((c, dim))

    rng_learn = derive_rng(config.rng_seed, "learnable")
    labels_learn = rng_learn.integers(0, c, size=n_learn)
    feats_learn = centers[labels_learn] + spread * rng_learn.standard_normal((n_learn, dim))

    rng_noise = derive_rng(config.rng_seed, "noise-collective")
    if n_noise:
        k = min(NOISE_CLUSTER_COUNT, n_noise)
        noise_centers = rng_noise.standard_normal((k, dim))
        assignment = rng_noise.integers(0, k, size=n_noise)
        feats_noise = noise_centers[assignment] + spread * rng_noise.standard_normal((n_noise, dim))
        labels_noise = rng_noise.integers(0, c, size=n_noise)
    else:
        feats_noise = np.empty((0, dim))
        labels_noise = np.empty((0,), dtype=np.int64)

    feats_under, labels_under = _underspecified_block(
        derive_rng(config.rng_seed, "underspecified"), n_under, centers, config
    )

    features = np.vstack([feats_learn, feats_noise, feats_under])
    labels = np.concatenate([labels_learn, labels_noise, labels_under])
    groups = np.concatenate(
        [
            np.full(n_learn, int(Group.LEARNABLE), dtype=np.int8),
            np.full(n_noise, int(Group.NOISE_COLLECTIVE), dtype=np.int8),
            np.full(n_under, int(Group.UNDERSPECIFIED_COLLECTIVE), dtype=np.int8),
        ]
    )
    perm = derive_rng(config.rng_seed, "shuffle").permutation(n_total)
    features = features[perm]
    return Dataset(
        features_vision=features[:, : config.dim_vision],
        features_language=features[:, config.dim_vision :],
        labels=labels[perm],
        groups=groups[perm],
        num_classes=c,
    )


def split_seed_pool(
    dataset: Dataset,
    seed_fraction: float,
    rng_seed: int,
    candidates=None,
) -> SeedPoolSplit:
    """Uniform random split of ``candidates`` (default: all examples) into seed and pool.

    ``|seed| = round(seed_fraction * n)``, clamped so both sides are non-empty.
    """
    if not 0.0 < seed_fraction < 1.0:
        raise ConfigError("seed_fraction must lie strictly between 0 and 1")
    if candidates is None:
        cand = np.arange(dataset.num_examples, dtype=np.int64)
    else:
        cand = np.unique(np.asarray(candidates, dtype=np.int64))
        if len(cand) and (cand[0] < 0 or cand[-1] >= dataset.num_examples):
            raise ConfigError("candidate indices out of range")
    if len(cand) < 2:
        raise ConfigError("need at least two candidate examples to split")
    n_seed = int(round(seed_fraction * len(cand)))
    n_seed = min(max(n_seed, 1), len(cand) - 1)
    perm = derive_rng(rng_seed, "seed-pool").permutation(len(cand))
    seed_idx = np.sort(cand[perm[:n_seed]])
    pool_idx = np.sort(cand[perm[n_seed:]])
    return SeedPoolSplit(seed_indices=seed_idx, pool_indices=pool_idx)


def _csv_header(dim_vision: int, dim_language: int, include_group: bool) -> list[str]:
    header = [f"v{i}" for i in range(dim_vision)]
    header += [f"l{i}" for i in range(dim_language)]
    header.append("label")
    if include_group:
        header.append("group")
    return header


def save_csv(dataset: Dataset, path, include_group: bool = True) -> None:
    """Write a dataset as UTF-8 CSV with LF line endings.

    Floats use ``repr`` (shortest round-trip form), so a reload reproduces the
    original bits.
    """
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_csv_header(dataset.dim_vision, dataset.dim_language, include_group))
        for i in range(dataset.num_examples):
            row = [repr(float(x)) for x in dataset.features_vision[i]]
            row += [repr(float(x)) for x in dataset.features_language[i]]
            row.append(str(int(dataset.labels[i])))
            if include_group:
                row.append(GROUP_NAMES[Group(int(dataset.groups[i]))])
            writer.writerow(row)


def _parse_header(header: list[str]) -> tuple[int, int, bool]:
    dv = 0
    while dv < len(header) and header[dv] == f"v{dv}":
        dv += 1
    dl = 0
    while dv + dl < len(header) and header[dv + dl] == f"l{dl}":
        dl += 1
    rest = header[dv + dl :]
    if dv < 1 or dl < 1 or not rest or rest[0] != "label" or rest[1:] not in ([], ["group"]):
        raise CsvFormatError(
            "line 1: header must be v0..v{Dv-1},l0..l{Dl-1},label[,group]"
        )
    return dv, dl, rest[1:] == ["group"]


def load_csv(path, num_classes: int | None = None) -> Dataset:
    """Load a dataset from the documented CSV schema.

    Rows without a ``group`` column are tagged LEARNABLE. When ``num_classes``
    is omitted it is inferred as ``max(label) + 1``.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError("line 1: empty file") from None
        dv, dl, has_group = _parse_header(header)
        expected = dv + dl + 1 + int(has_group)
        feats: list[list[float]] = []
        labels: list[int] = []
        groups: list[int] = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != expected:
                raise CsvFormatError(f"line {lineno}: expected {expected} fields, got {len(row)}")
            try:
                feats.append([float(x) for x in row[: dv + dl]])
            except ValueError as exc:
                raise CsvFormatError(f"line {lineno}: {exc}") from None
            try:
                label = int(row[dv + dl])
            except ValueError:
                raise CsvFormatError(f"line {lineno}: label {row[dv + dl]!r} is not an integer") from None
            if label < 0:
                raise CsvFormatError(f"line {lineno}: label {label} is negative")
            if num_classes is not None and label >= num_classes:
                raise CsvFormatError(
                    f"line {lineno}: label {label} out of range for {num_classes} classes"
                )
            labels.append(label)
            if has_group:
                name = row[dv + dl + 1]
                if name not in _NAME_TO_GROUP:
                    raise CsvFormatError(f"line {lineno}: unknown group {name!r}")
                groups.append(int(_NAME_TO_GROUP[name]))
            else:
                groups.append(int(Group.LEARNABLE))
    if not feats:
        raise CsvFormatError("line 2: file contains no data rows")
    matrix = np.asarray(feats, dtype=np.float64)
    label_arr = np.asarray(labels, dtype=np.int64)
    c = num_classes if num_classes is not None else int(label_arr.max()) + 1
    return Dataset(
        features_vision=matrix[:, :dv],
        features_language=matrix[:, dv:],
        labels=label_arr,
        groups=np.asarray(groups, dtype=np.int8),
        num_classes=c,
    )
