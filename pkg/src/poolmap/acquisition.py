"""Acquisition strategies: uncertainty scores and k-center (core-set) selection.

All scoring functions are pure maps over probability vectors; selection is
top-B with ties broken by ascending example index so runs are reproducible.
Entropies are in nats.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .datagen import Dataset
from .errors import ConfigError
from .models import Model, hidden_representation, mc_dropout_proba, predict_proba
from .seeds import derive_rng, derive_seed

STRATEGY_KINDS = (
    "random",
    "least-confidence",
    "entropy",
    "mc-entropy",
    "bald",
    "coreset-vision",
    "coreset-language",
    "coreset-fused",
)
BAYESIAN_KINDS = ("mc-entropy", "bald")
CORESET_KINDS = ("coreset-vision", "coreset-language", "coreset-fused")
CORESET_MODES = ("exact", "amortized")


@dataclass(frozen=True)
class AcquisitionStrategy:
    kind: str
    k_passes: int = 10
    coreset_mode: str = "exact"
    pca_dims: int | None = None
    refresh_interval: int | None = None

    def validate(self) -> None:
        if self.kind not in STRATEGY_KINDS:
            raise ConfigError(f"unknown strategy {self.kind!r}")
        if self.kind in BAYESIAN_KINDS and self.k_passes < 2:
            raise ConfigError(f"{self.kind} needs k_passes >= 2")
        if self.coreset_mode not in CORESET_MODES:
            raise ConfigError(f"unknown coreset_mode {self.coreset_mode!r}")
        if self.pca_dims is not None and self.pca_dims < 1:
            raise ConfigError("pca_dims must be >= 1")
        if self.refresh_interval is not None and self.refresh_interval < 1:
            raise ConfigError("refresh_interval must be >= 1")


@dataclass
class AcquisitionBatch:
    indices: np.ndarray  # selection order
    scores: np.ndarray  # score of each index at selection time
    pool_exhausted: bool = False


def _as_distributions(p, min_k: int | None = None) -> np.ndarray:
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim == 0 or arr.shape[-1] < 2:
        raise ConfigError("probability vectors need at least two classes")
    if min_k is not None:
        if arr.ndim < 2 or arr.shape[0] < min_k:
            raise ConfigError(f"need at least {min_k} forward passes")
    if arr.min() < -1e-9 or not np.allclose(arr.sum(axis=-1), 1.0, atol=1e-6):
        raise ConfigError("input rows must be probability distributions")
    return np.clip(arr, 0.0, None)


def score_least_confidence(p) -> np.ndarray | float:
    """1 - max(p); higher means stronger acquisition preference."""
    arr = _as_distributions(p)
    out = 1.0 - arr.max(axis=-1)
    return float(out) if out.ndim == 0 else out


def _entropy(arr: np.ndarray) -> np.ndarray:
    terms = np.where(arr > 0.0, arr * np.log(np.where(arr > 0.0, arr, 1.0)), 0.0)
    return -terms.sum(axis=-1)


def score_entropy(p) -> np.ndarray | float:
    """Shannon entropy in nats, with 0*ln(0) taken as 0."""
    out = _entropy(_as_distributions(p))
    return float(out) if out.ndim == 0 else out


def score_mc_entropy(passes) -> np.ndarray | float:
    """Entropy of the mean predictive distribution across dropout passes."""
    arr = _as_distributions(passes, min_k=2)
    out = _entropy(arr.mean(axis=0))
    return float(out) if out.ndim == 0 else out


def score_bald(passes) -> np.ndarray | float:
    """Mutual information: entropy of the mean minus mean per-pass entropy.

    Clamped at 0 so floating-point noise cannot produce a negative score for
    identical passes.
    """
    arr = _as_distributions(passes, min_k=2)
    out = np.maximum(_entropy(arr.mean(axis=0)) - _entropy(arr).mean(axis=0), 0.0)
    return float(out) if out.ndim == 0 else out


def pca_project(matrix: np.ndarray, dims: int) -> tuple[np.ndarray, np.ndarray]:
    """Center columns and project onto the top principal directions.

    Returns (projected M x d matrix, orthonormal D x d basis) with components
    ordered by descending eigenvalue; each basis column's largest-magnitude
    entry is made positive so the decomposition is deterministic.
    """
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ConfigError("pca_project needs an M x D matrix with M >= 2")
    if not 1 <= dims <= x.shape[1]:
        raise ConfigError(f"dims must lie in [1, {x.shape[1]}]")
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / x.shape[0]
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:dims]
    basis = eigvecs[:, order]
    for j in range(basis.shape[1]):
        if basis[np.argmax(np.abs(basis[:, j])), j] < 0:
            basis[:, j] = -basis[:, j]
    return centered @ basis, basis


def _sq_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # (len(a), len(b)) squared Euclidean distances via the expanded quadratic.
    d2 = (a**2).sum(axis=1)[:, None] + (b**2).sum(axis=1)[None, :] - 2.0 * (a @ b.T)
    return np.maximum(d2, 0.0)


def _bootstrap_first_pick(reps: np.ndarray, pool: np.ndarray) -> tuple[int, float]:
    # With no labeled points the greedy objective is undefined; start from the
    # pool point closest to the representation centroid (lowest index on ties).
    centroid = reps[pool].mean(axis=0)
    to_centroid = ((reps[pool] - centroid) ** 2).sum(axis=1)
    pos = int(np.argmin(to_centroid))
    return pos, float(np.sqrt(to_centroid[pos]))


def coreset_greedy(
    representations: np.ndarray,
    labeled,
    pool,
    batch_size: int,
) -> AcquisitionBatch:
    """Exact batch-aware greedy k-center selection.

    Repeatedly picks the pool point farthest from labeled plus already
    selected points, updating min-distances after every single pick. With an
    empty labeled set the first pick is the point closest to the pool
    centroid (its recorded score is that centroid distance).
    """
    reps = np.asarray(representations, dtype=np.float64)
    labeled = np.asarray([] if labeled is None else labeled, dtype=np.int64)
    pool = np.sort(np.asarray(pool, dtype=np.int64))
    if batch_size < 1:
        raise ConfigError("batch_size must be >= 1")
    if len(pool) == 0:
        raise ConfigError("pool must be non-empty")
    batch_size = min(batch_size, len(pool))

    chosen = np.empty(batch_size, dtype=np.int64)
    scores = np.empty(batch_size)
    if len(labeled):
        active = _sq_distances(reps[pool], reps[labeled]).min(axis=1)
        start = 0
    else:
        pos, dist = _bootstrap_first_pick(reps, pool)
        chosen[0] = pool[pos]
        scores[0] = dist
        active = _sq_distances(reps[pool], reps[pool[pos]][None, :])[:, 0]
        active[pos] = -np.inf
        start = 1
    for step in range(start, batch_size):
        pos = int(np.argmax(active))  # pool sorted ascending, so ties pick the lowest index
        chosen[step] = pool[pos]
        scores[step] = float(np.sqrt(active[pos]))
        active = np.minimum(active, _sq_distances(reps[pool], reps[pool[pos]][None, :])[:, 0])
        active[pos] = -np.inf
    return AcquisitionBatch(indices=chosen, scores=scores)


def coreset_amortized(
    representations: np.ndarray,
    labeled,
    pool,
    batch_size: int,
    pca_dims: int | None = None,
    refresh_interval: int | None = None,
) -> AcquisitionBatch:
    """Greedy k-center on PCA-reduced representations with delayed updates.

    Pool min-distances are refreshed only every ``refresh_interval``
    selections (default: about 5% of the batch); between refreshes the stale
    ranking is consumed, skipping anything already selected. With
    ``refresh_interval=1`` and full-dimensional PCA this reproduces the exact
    greedy selection.
    """
    reps = np.asarray(representations, dtype=np.float64)
    labeled = np.asarray([] if labeled is None else labeled, dtype=np.int64)
    pool = np.sort(np.asarray(pool, dtype=np.int64))
    if batch_size < 1:
        raise ConfigError("batch_size must be >= 1")
    if len(pool) == 0:
        raise ConfigError("pool must be non-empty")
    batch_size = min(batch_size, len(pool))
    if refresh_interval is None:
        refresh_interval = max(1, round(0.05 * batch_size))
    if refresh_interval < 1:
        raise ConfigError("refresh_interval must be >= 1")
    if pca_dims is None:
        pca_dims = min(32, reps.shape[1])

    rows = np.unique(np.concatenate([labeled, pool]))
    projected_rows, _ = pca_project(reps[rows], pca_dims)
    projected = np.zeros((reps.shape[0], pca_dims))
    projected[rows] = projected_rows

    chosen = np.empty(batch_size, dtype=np.int64)
    scores = np.empty(batch_size)
    pending: list[int] = []  # positions selected since the last distance refresh
    if len(labeled):
        active = _sq_distances(projected[pool], projected[labeled]).min(axis=1)
        start = 0
    else:
        pos, dist = _bootstrap_first_pick(projected, pool)
        chosen[0] = pool[pos]
        scores[0] = dist
        active = _sq_distances(projected[pool], projected[pool[pos]][None, :])[:, 0]
        active[pos] = -np.inf
        start = 1
    for step in range(start, batch_size):
        if (step - start) % refresh_interval == 0 and pending:
            to_new = _sq_distances(projected[pool], projected[pool[pending]])
            # -inf marks on already-selected positions survive the minimum
            active = np.minimum(active, to_new.min(axis=1))
            pending = []
        pos = int(np.argmax(active))
        chosen[step] = pool[pos]
        scores[step] = float(np.sqrt(max(active[pos], 0.0)))
        active[pos] = -np.inf
        pending.append(pos)
    return AcquisitionBatch(indices=chosen, scores=scores)


def coverage_radius(representations: np.ndarray, centers, points) -> float:
    """Max distance from any point to its nearest center (k-center objective)."""
    reps = np.asarray(representations, dtype=np.float64)
    centers = np.asarray(centers, dtype=np.int64)
    points = np.asarray(points, dtype=np.int64)
    if len(centers) == 0:
        raise ConfigError("need at least one center")
    return float(np.sqrt(_sq_distances(reps[points], reps[centers]).min(axis=1).max()))


def _strategy_space(kind: str) -> str:
    return kind.removeprefix("coreset-")


def _pool_scores(
    strategy: AcquisitionStrategy,
    model: Model,
    dataset: Dataset,
    pool: np.ndarray,
    rng_seed: int,
) -> np.ndarray:
    xv, xl = dataset.feature_pair(pool)
    if strategy.kind == "least-confidence":
        return np.asarray(score_least_confidence(predict_proba(model, xv, xl)))
    if strategy.kind == "entropy":
        return np.asarray(score_entropy(predict_proba(model, xv, xl)))
    passes = mc_dropout_proba(
        model, xv, xl, strategy.k_passes, derive_seed(rng_seed, "mc"), example_ids=pool
    )
    if strategy.kind == "mc-entropy":
        return np.asarray(score_mc_entropy(passes))
    return np.asarray(score_bald(passes))


def select_batch(
    strategy: AcquisitionStrategy,
    model: Model,
    dataset: Dataset,
    pool,
    batch_size: int,
    rng_seed: int,
    labeled=None,
) -> AcquisitionBatch:
    """Pick ``batch_size`` pool examples according to the strategy.

    Score-based kinds take the top scores with ties broken by ascending
    example index; core-set kinds run greedy k-center over the configured
    representation space against ``labeled``. Asking for more than the pool
    holds returns the whole pool and flags the batch.
    """
    strategy.validate()
    pool = np.sort(np.asarray(pool, dtype=np.int64))
    if len(pool) == 0:
        raise ConfigError("pool must be non-empty")
    if batch_size < 1:
        raise ConfigError("batch_size must be >= 1")
    exhausted = batch_size > len(pool)
    if exhausted:
        warnings.warn(
            f"batch_size {batch_size} exceeds pool size {len(pool)}; returning the whole pool",
            stacklevel=2,
        )
        batch_size = len(pool)

    if strategy.kind == "random":
        rng = derive_rng(rng_seed, "random-acquire")
        picked = pool[rng.permutation(len(pool))[:batch_size]]
        batch = AcquisitionBatch(indices=picked, scores=np.zeros(batch_size))
    elif strategy.kind in CORESET_KINDS:
        labeled = np.asarray([] if labeled is None else labeled, dtype=np.int64)
        reps = hidden_representation(
            model, dataset.features_vision, dataset.features_language, _strategy_space(strategy.kind)
        )
        if strategy.coreset_mode == "exact":
            batch = coreset_greedy(reps, labeled, pool, batch_size)
        else:
            batch = coreset_amortized(
                reps, labeled, pool, batch_size, strategy.pca_dims, strategy.refresh_interval
            )
    else:
        scores = _pool_scores(strategy, model, dataset, pool, rng_seed)
        order = np.lexsort((pool, -scores))[:batch_size]
        batch = AcquisitionBatch(indices=pool[order], scores=scores[order])
    batch.pool_exhausted = exhausted
    return batch
