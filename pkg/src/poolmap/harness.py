"""Active-learning experiment orchestration.

A run: split validation off the dataset, split the rest into seed and pool,
optionally prune the pool by outlier score against a reference map, then
iterate acquire -> retrain-from-scratch -> evaluate until the pool is empty
or the iteration cap is hit. Every random stream is keyed off the replicate
seed, so a result is reproducible byte for byte.

Records carry one row per trained model: row ``t`` holds the accuracy of the
model trained before acquisition ``t`` and the batch that model selected; the
final row (empty batch) is the model trained on everything acquired.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np
from scipy import stats

from .acquisition import AcquisitionStrategy, select_batch
from .cartography import BUCKET_NAMES, Bucket, DatasetMap, ablate_pool, bucket_histogram, compute_map
from .datagen import Dataset, GeneratorConfig, Group, generate_synthetic, load_csv, split_seed_pool
from .errors import ConfigError
from .models import ModelSpec, TrainConfig, accuracy, init_model, train
from .seeds import derive_rng, derive_seed


@dataclass(frozen=True)
class CsvSource:
    path: str
    num_classes: int | None = None


@dataclass(frozen=True)
class ModelConfig:
    """Model settings without the input layout, which comes from the dataset."""

    kind: str = "mlp"
    hidden_dim: int = 64
    dropout_rate: float = 0.2
    init_scale: float = 0.1
    rng_seed: int = 7

    def to_spec(self, dataset: Dataset, rng_seed: int | None = None) -> ModelSpec:
        spec = ModelSpec(
            kind=self.kind,
            dim_vision=dataset.dim_vision,
            dim_language=dataset.dim_language,
            num_classes=dataset.num_classes,
            hidden_dim=self.hidden_dim,
            dropout_rate=self.dropout_rate,
            init_scale=self.init_scale,
            rng_seed=self.rng_seed if rng_seed is None else rng_seed,
        )
        spec.validate()
        return spec


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: GeneratorConfig | CsvSource
    model: ModelConfig
    train: TrainConfig
    strategy: AcquisitionStrategy
    validation_fraction: float = 0.2
    seed_fraction: float = 0.1
    batch_fraction: float = 0.1
    max_iterations: int = 25
    removal_fraction: float = 0.0
    replicate_seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    map_score_rule: str = "product"

    def validate(self) -> None:
        if isinstance(self.dataset, GeneratorConfig):
            self.dataset.validate()
        self.train.validate()
        self.strategy.validate()
        if not 0.0 < self.validation_fraction < 1.0:
            raise ConfigError("validation_fraction must lie strictly between 0 and 1")
        if not 0.0 < self.seed_fraction < 1.0:
            raise ConfigError("seed_fraction must lie strictly between 0 and 1")
        if not 0.0 < self.batch_fraction <= 1.0:
            raise ConfigError("batch_fraction must lie in (0, 1]")
        if self.max_iterations < 1:
            raise ConfigError("max_iterations must be >= 1")
        if not 0.0 <= self.removal_fraction < 1.0:
            raise ConfigError("removal_fraction must lie in [0, 1)")
        if not self.replicate_seeds:
            raise ConfigError("replicate_seeds must be non-empty")


def load_dataset(source: GeneratorConfig | CsvSource) -> Dataset:
    if isinstance(source, GeneratorConfig):
        return generate_synthetic(source)
    return load_csv(source.path, num_classes=source.num_classes)


def source_seed(source: GeneratorConfig | CsvSource) -> int:
    return source.rng_seed if isinstance(source, GeneratorConfig) else 0


def validation_split(dataset: Dataset, fraction: float, rng_seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Hold out ``fraction`` of the data, stratified by class among LEARNABLE
    examples and by group among the outlier collectives.

    Returns (train_indices, validation_indices), both sorted.
    """
    if not 0.0 < fraction < 1.0:
        raise ConfigError("validation fraction must lie strictly between 0 and 1")
    rng = derive_rng(rng_seed, "validation-split")
    val_parts: list[np.ndarray] = []
    learnable = dataset.groups == int(Group.LEARNABLE)
    for cls in range(dataset.num_classes):
        members = np.flatnonzero(learnable & (dataset.labels == cls))
        take = int(round(fraction * len(members)))
        if len(members):
            val_parts.append(rng.permutation(members)[:take])
    for group in (Group.NOISE_COLLECTIVE, Group.UNDERSPECIFIED_COLLECTIVE):
        members = dataset.group_indices(group)
        take = int(round(fraction * len(members)))
        if len(members):
            val_parts.append(rng.permutation(members)[:take])
    val_idx = np.sort(np.concatenate(val_parts)) if val_parts else np.empty(0, dtype=np.int64)
    if len(val_idx) == 0 or len(val_idx) >= dataset.num_examples:
        raise ConfigError("validation split left an empty side; adjust validation_fraction")
    mask = np.ones(dataset.num_examples, dtype=bool)
    mask[val_idx] = False
    return np.flatnonzero(mask), val_idx


def iteration_model_seed(replicate_seed: int, iteration: int) -> int:
    return derive_seed(replicate_seed, "init", iteration)


def iteration_train_seed(replicate_seed: int, iteration: int) -> int:
    return derive_seed(replicate_seed, "sgd", iteration)


def iteration_acquire_seed(replicate_seed: int, iteration: int) -> int:
    return derive_seed(replicate_seed, "acquire", iteration)


def build_reference_map(cfg: ExperimentConfig, dataset: Dataset | None = None) -> DatasetMap:
    """Post-hoc map: one full training run on seed-plus-pool (everything that
    is not validation), logging dynamics over those same examples."""
    cfg.validate()
    if dataset is None:
        dataset = load_dataset(cfg.dataset)
    train_idx, _ = validation_split(dataset, cfg.validation_fraction, source_seed(cfg.dataset))
    model = init_model(cfg.model.to_spec(dataset))
    result = train(model, dataset, train_idx, cfg.train, watch=train_idx)
    return compute_map(result.dynamics, score_rule=cfg.map_score_rule)


@dataclass
class RunSetup:
    dataset: Dataset
    train_indices: np.ndarray
    val_indices: np.ndarray
    seed_indices: np.ndarray
    pool_indices: np.ndarray  # post-ablation
    batch_size: int
    reference_map: DatasetMap | None


def prepare_run(
    cfg: ExperimentConfig,
    replicate_seed: int,
    dataset: Dataset | None = None,
    reference_map: DatasetMap | None = None,
) -> RunSetup:
    cfg.validate()
    if dataset is None:
        dataset = load_dataset(cfg.dataset)
    train_idx, val_idx = validation_split(dataset, cfg.validation_fraction, source_seed(cfg.dataset))
    split = split_seed_pool(
        dataset, cfg.seed_fraction, derive_seed(replicate_seed, "split"), candidates=train_idx
    )
    pool = split.pool_indices
    if cfg.removal_fraction > 0.0:
        if reference_map is None:
            reference_map = build_reference_map(cfg, dataset=dataset)
        pool = ablate_pool(pool, reference_map, cfg.removal_fraction)
        if len(pool) == 0:
            raise ConfigError("ablation removed the whole pool")
    batch_size = max(1, int(round(cfg.batch_fraction * len(pool))))
    return RunSetup(
        dataset=dataset,
        train_indices=train_idx,
        val_indices=val_idx,
        seed_indices=split.seed_indices,
        pool_indices=pool,
        batch_size=batch_size,
        reference_map=reference_map,
    )


@dataclass
class IterationRecord:
    iteration: int
    labeled_size: int
    val_accuracy: float
    acquired: list[int]
    bucket_counts: dict[str, int] | None
    wall_clock: float


@dataclass
class ExperimentResult:
    strategy: AcquisitionStrategy
    removal_fraction: float
    replicate_seed: int
    records: list[IterationRecord]
    config: dict

    @property
    def labeled_sizes(self) -> np.ndarray:
        return np.asarray([r.labeled_size for r in self.records], dtype=np.int64)

    @property
    def accuracies(self) -> np.ndarray:
        return np.asarray([r.val_accuracy for r in self.records])

    def to_json_dict(self, include_timing: bool = False) -> dict:
        # Timing is kept out of the canonical form so repeated runs serialize
        # byte-identically.
        rows = []
        for rec in self.records:
            row = {
                "iteration": rec.iteration,
                "labeled_size": rec.labeled_size,
                "val_accuracy": rec.val_accuracy,
                "acquired": list(map(int, rec.acquired)),
                "bucket_counts": rec.bucket_counts,
            }
            if include_timing:
                row["wall_clock"] = rec.wall_clock
            rows.append(row)
        return {
            "strategy": asdict(self.strategy),
            "removal_fraction": self.removal_fraction,
            "replicate_seed": self.replicate_seed,
            "config": self.config,
            "iterations": rows,
        }

    @staticmethod
    def from_json_dict(payload: dict) -> "ExperimentResult":
        records = [
            IterationRecord(
                iteration=row["iteration"],
                labeled_size=row["labeled_size"],
                val_accuracy=row["val_accuracy"],
                acquired=list(row["acquired"]),
                bucket_counts=row.get("bucket_counts"),
                wall_clock=row.get("wall_clock", 0.0),
            )
            for row in payload["iterations"]
        ]
        return ExperimentResult(
            strategy=AcquisitionStrategy(**payload["strategy"]),
            removal_fraction=payload["removal_fraction"],
            replicate_seed=payload["replicate_seed"],
            records=records,
            config=payload.get("config", {}),
        )


def config_to_dict(cfg: ExperimentConfig) -> dict:
    if isinstance(cfg.dataset, GeneratorConfig):
        dataset = {"generator": asdict(cfg.dataset)}
    else:
        dataset = {"csv": asdict(cfg.dataset)}
    return {
        "dataset": dataset,
        "model": asdict(cfg.model),
        "train": asdict(cfg.train),
        "strategy": asdict(cfg.strategy),
        "validation_fraction": cfg.validation_fraction,
        "seed_fraction": cfg.seed_fraction,
        "batch_fraction": cfg.batch_fraction,
        "max_iterations": cfg.max_iterations,
        "removal_fraction": cfg.removal_fraction,
        "replicate_seeds": list(cfg.replicate_seeds),
        "map_score_rule": cfg.map_score_rule,
    }


def run_experiment(
    cfg: ExperimentConfig,
    replicate_seed: int,
    dataset: Dataset | None = None,
    reference_map: DatasetMap | None = None,
) -> ExperimentResult:
    """One active-learning run for one replicate seed.

    When a reference map is available (always for ablation runs, optionally
    otherwise) each record also carries the difficulty-bucket composition of
    its acquisition batch.
    """
    setup = prepare_run(cfg, replicate_seed, dataset=dataset, reference_map=reference_map)
    dataset = setup.dataset
    dmap = setup.reference_map
    labeled = setup.seed_indices.copy()
    pool = setup.pool_indices.copy()
    xv_val, xl_val = dataset.feature_pair(setup.val_indices)
    y_val = dataset.labels[setup.val_indices]

    records: list[IterationRecord] = []
    t = 0
    while True:
        started = time.perf_counter()
        spec = cfg.model.to_spec(dataset, rng_seed=iteration_model_seed(replicate_seed, t))
        train_cfg = replace(cfg.train, rng_seed=iteration_train_seed(replicate_seed, t))
        model = train(init_model(spec), dataset, labeled, train_cfg).model
        val_acc = accuracy(model, xv_val, xl_val, y_val)
        if len(pool) == 0 or t >= cfg.max_iterations:
            records.append(
                IterationRecord(t, len(labeled), val_acc, [], None, time.perf_counter() - started)
            )
            break
        batch = select_batch(
            cfg.strategy,
            model,
            dataset,
            pool,
            min(setup.batch_size, len(pool)),  # the last batch may be smaller
            iteration_acquire_seed(replicate_seed, t),
            labeled=labeled,
        )
        counts = None
        if dmap is not None:
            histogram = bucket_histogram(dmap, batch.indices)
            counts = {BUCKET_NAMES[Bucket(i)]: int(histogram[i]) for i in range(len(histogram))}
        records.append(
            IterationRecord(
                t,
                len(labeled),
                val_acc,
                sorted(int(i) for i in batch.indices),
                counts,
                time.perf_counter() - started,
            )
        )
        labeled = np.union1d(labeled, batch.indices)
        pool = np.setdiff1d(pool, batch.indices, assume_unique=True)
        t += 1

    return ExperimentResult(
        strategy=cfg.strategy,
        removal_fraction=cfg.removal_fraction,
        replicate_seed=replicate_seed,
        records=records,
        config=config_to_dict(cfg),
    )


def run_replicates(
    cfg: ExperimentConfig,
    dataset: Dataset | None = None,
    reference_map: DatasetMap | None = None,
) -> list[ExperimentResult]:
    if dataset is None:
        dataset = load_dataset(cfg.dataset)
    return [
        run_experiment(cfg, seed, dataset=dataset, reference_map=reference_map)
        for seed in cfg.replicate_seeds
    ]


def run_ablation_suite(
    cfg: ExperimentConfig,
    removal_fractions,
    strategies=None,
    dataset: Dataset | None = None,
    reference_map: DatasetMap | None = None,
) -> list[ExperimentResult]:
    """One reference map, then one run per (fraction, strategy, replicate)."""
    cfg.validate()
    fractions = [float(f) for f in removal_fractions]
    for f in fractions:
        if not 0.0 <= f < 1.0:
            raise ConfigError("removal fractions must lie in [0, 1)")
    if dataset is None:
        dataset = load_dataset(cfg.dataset)
    if reference_map is None:
        reference_map = build_reference_map(cfg, dataset=dataset)
    if strategies is None:
        strategies = [cfg.strategy]
    results = []
    for fraction in fractions:
        for strategy in strategies:
            run_cfg = replace(cfg, strategy=strategy, removal_fraction=fraction)
            results.extend(run_replicates(run_cfg, dataset=dataset, reference_map=reference_map))
    return results


def one_shot_accuracy(
    cfg: ExperimentConfig,
    replicate_seed: int,
    dataset: Dataset | None = None,
    reference_map: DatasetMap | None = None,
) -> float:
    """Accuracy of a single training run on seed plus the (post-ablation) pool,
    using the same seeds the final iteration of an exhausting AL run would use."""
    setup = prepare_run(cfg, replicate_seed, dataset=dataset, reference_map=reference_map)
    n_acq = math.ceil(len(setup.pool_indices) / setup.batch_size)
    if n_acq > cfg.max_iterations:
        raise ConfigError("pool does not exhaust under max_iterations; no one-shot equivalent")
    labeled = np.union1d(setup.seed_indices, setup.pool_indices)
    spec = cfg.model.to_spec(setup.dataset, rng_seed=iteration_model_seed(replicate_seed, n_acq))
    train_cfg = replace(cfg.train, rng_seed=iteration_train_seed(replicate_seed, n_acq))
    model = train(init_model(spec), setup.dataset, labeled, train_cfg).model
    xv, xl = setup.dataset.feature_pair(setup.val_indices)
    return accuracy(model, xv, xl, setup.dataset.labels[setup.val_indices])


@dataclass
class AcquisitionProfile:
    iterations: list[int]
    counts: np.ndarray  # (iterations, buckets)
    batch_sizes: np.ndarray
    pool_counts: np.ndarray  # (buckets,) baseline composition of the pool

    @property
    def pool_proportions(self) -> np.ndarray:
        total = self.pool_counts.sum()
        return self.pool_counts / total if total else self.pool_counts.astype(float)


def profile_acquisitions(
    result: ExperimentResult, dmap: DatasetMap, pool_indices=None
) -> AcquisitionProfile:
    """Per-iteration bucket composition of acquisitions, with the pool's own
    composition as the comparison baseline (defaults to the map's domain)."""
    if pool_indices is None:
        pool_indices = dmap.indices
    iterations = [r.iteration for r in result.records if r.acquired]
    counts = np.zeros((len(iterations), len(Bucket)), dtype=np.int64)
    for row, rec in enumerate(r for r in result.records if r.acquired):
        counts[row] = bucket_histogram(dmap, np.asarray(rec.acquired, dtype=np.int64))
    return AcquisitionProfile(
        iterations=iterations,
        counts=counts,
        batch_sizes=counts.sum(axis=1),
        pool_counts=bucket_histogram(dmap, pool_indices),
    )


def within_multinomial_bounds(counts, proportions, confidence: float = 0.99) -> bool:
    """Check each bucket count against its binomial two-sided bound, with a
    Bonferroni split of the miss probability across buckets."""
    counts = np.asarray(counts, dtype=np.int64)
    proportions = np.asarray(proportions, dtype=np.float64)
    n = int(counts.sum())
    alpha = (1.0 - confidence) / len(counts)
    for count, p in zip(counts, proportions):
        lo = stats.binom.ppf(alpha / 2.0, n, p) if p > 0 else 0
        hi = stats.binom.ppf(1.0 - alpha / 2.0, n, p) if p > 0 else 0
        if not lo <= count <= hi:
            return False
    return True


def save_result(result: ExperimentResult, path) -> None:
    Path(path).write_text(
        json.dumps(result.to_json_dict(), indent=2) + "\n", encoding="utf-8"
    )


def load_result(path) -> ExperimentResult:
    return ExperimentResult.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def write_summary_csv(results: list[ExperimentResult], path) -> None:
    """Aggregate CSV: strategy,removal_fraction,replicate,iteration,labeled_size,val_accuracy."""
    lines = ["strategy,removal_fraction,replicate,iteration,labeled_size,val_accuracy"]
    for result in results:
        for rec in result.records:
            lines.append(
                f"{result.strategy.kind},{result.removal_fraction!r},{result.replicate_seed},"
                f"{rec.iteration},{rec.labeled_size},{rec.val_accuracy!r}"
            )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass(frozen=True)
class ExperimentFile:
    """A parsed experiment JSON: the shared config plus the strategy list and
    the removal fractions for ablation sweeps."""

    config: ExperimentConfig  # strategy field holds the first listed strategy
    strategies: tuple[AcquisitionStrategy, ...]
    removal_fractions: tuple[float, ...]


def _build(cls, payload: dict, context: str):
    try:
        return cls(**payload)
    except TypeError as exc:
        raise ConfigError(f"{context}: {exc}") from None


def experiment_file_from_dict(payload: dict) -> ExperimentFile:
    if "dataset" not in payload:
        raise ConfigError("experiment config needs a 'dataset' section")
    dataset_section = payload["dataset"]
    if "generator" in dataset_section:
        dataset = _build(GeneratorConfig, dataset_section["generator"], "dataset.generator")
    elif "csv" in dataset_section:
        dataset = _build(CsvSource, dataset_section["csv"], "dataset.csv")
    else:
        raise ConfigError("dataset section must contain 'generator' or 'csv'")
    model = _build(ModelConfig, payload.get("model", {}), "model")
    train_cfg = _build(TrainConfig, payload.get("train", {}), "train")
    names = payload.get("strategies", ["random"])
    if not isinstance(names, list) or not names:
        raise ConfigError("'strategies' must be a non-empty list of strategy names")
    options = payload.get("acquisition", {})
    strategies = tuple(
        _build(AcquisitionStrategy, {"kind": name, **options}, f"strategy {name}") for name in names
    )
    for strategy in strategies:
        strategy.validate()
    cfg = ExperimentConfig(
        dataset=dataset,
        model=model,
        train=train_cfg,
        strategy=strategies[0],
        validation_fraction=payload.get("validation_fraction", 0.2),
        seed_fraction=payload.get("seed_fraction", 0.1),
        batch_fraction=payload.get("batch_fraction", 0.1),
        max_iterations=payload.get("max_iterations", 25),
        removal_fraction=payload.get("removal_fraction", 0.0),
        replicate_seeds=tuple(payload.get("replicate_seeds", [1, 2, 3, 4, 5])),
        map_score_rule=payload.get("map_score_rule", "product"),
    )
    cfg.validate()
    fractions = tuple(float(f) for f in payload.get("removal_fractions", (0.10, 0.25, 0.50)))
    for fraction in fractions:
        if not 0.0 <= fraction < 1.0:
            raise ConfigError("removal_fractions entries must lie in [0, 1)")
    return ExperimentFile(config=cfg, strategies=strategies, removal_fractions=fractions)


def load_experiment_file(path) -> ExperimentFile:
    text = Path(path).read_text(encoding="utf-8")
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return experiment_file_from_dict(payload)
