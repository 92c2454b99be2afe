"""Aggregation of run results into learning curves, sample-efficiency ratios,
and deterministic CSV/SVG artifacts."""
from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cartography import BUCKET_NAMES, Bucket, DatasetMap
from .errors import ConfigError
from .harness import AcquisitionProfile, ExperimentResult
from .svg import render_bucket_bars, render_learning_curves, render_map_scatter

_BUCKET_ORDER = [BUCKET_NAMES[b] for b in Bucket]


@dataclass
class LearningCurve:
    strategy: str
    removal_fraction: float
    labeled_sizes: np.ndarray
    mean_accuracy: np.ndarray
    std_accuracy: np.ndarray  # population std across replicates
    num_replicates: int


@dataclass
class SampleEfficiency:
    target_accuracy: float
    examples_random: float | None
    examples_strategy: float | None
    ratio: float | None

    @property
    def defined(self) -> bool:
        return self.ratio is not None


def aggregate_curves(results: list[ExperimentResult]) -> dict[tuple[str, float], LearningCurve]:
    """Pointwise mean/std over replicates, grouped by (strategy, removal fraction).

    All replicates of a group must share the same labeled-size grid.
    """
    groups: dict[tuple[str, float], list[ExperimentResult]] = {}
    for result in results:
        groups.setdefault((result.strategy.kind, float(result.removal_fraction)), []).append(result)
    curves: dict[tuple[str, float], LearningCurve] = {}
    for key in sorted(groups):
        members = groups[key]
        grid = members[0].labeled_sizes
        for member in members[1:]:
            if not np.array_equal(member.labeled_sizes, grid):
                raise ConfigError(
                    f"replicates of {key} disagree on the labeled-size grid; cannot aggregate"
                )
        stacked = np.vstack([m.accuracies for m in members])
        curves[key] = LearningCurve(
            strategy=key[0],
            removal_fraction=key[1],
            labeled_sizes=grid.copy(),
            mean_accuracy=stacked.mean(axis=0),
            std_accuracy=stacked.std(axis=0),
            num_replicates=len(members),
        )
    return curves


def curve_auc(curve: LearningCurve) -> float:
    """Trapezoidal area under the mean learning curve."""
    x = curve.labeled_sizes.astype(np.float64)
    y = curve.mean_accuracy
    return float(0.5 * ((y[1:] + y[:-1]) * (x[1:] - x[:-1])).sum())


def _first_crossing(sizes: np.ndarray, values: np.ndarray, target: float) -> float | None:
    """Smallest labeled size where the curve reaches ``target``, linearly
    interpolating between grid points; None when the curve never gets there."""
    if values[0] >= target:
        return float(sizes[0])
    for i in range(1, len(values)):
        if values[i] >= target:
            x0, x1 = float(sizes[i - 1]), float(sizes[i])
            y0, y1 = float(values[i - 1]), float(values[i])
            return x0 + (target - y0) * (x1 - x0) / (y1 - y0)
    return None


def sample_efficiency(
    strategy_curve: LearningCurve, random_curve: LearningCurve, target_accuracy: float
) -> SampleEfficiency:
    """Labels random needs divided by labels the strategy needs, at a fixed
    target accuracy. Flagged undefined when either curve never reaches it."""
    if not np.array_equal(strategy_curve.labeled_sizes, random_curve.labeled_sizes):
        raise ConfigError("curves must share the same labeled-size grid")
    needed_strategy = _first_crossing(
        strategy_curve.labeled_sizes, strategy_curve.mean_accuracy, target_accuracy
    )
    needed_random = _first_crossing(
        random_curve.labeled_sizes, random_curve.mean_accuracy, target_accuracy
    )
    ratio = None
    if needed_strategy is not None and needed_random is not None:
        ratio = needed_random / needed_strategy
    return SampleEfficiency(
        target_accuracy=target_accuracy,
        examples_random=needed_random,
        examples_strategy=needed_strategy,
        ratio=ratio,
    )


CURVES_CSV_HEADER = ["strategy", "removal_fraction", "labeled_size", "mean_accuracy", "std_accuracy"]


def write_curves_csv(curves: dict[tuple[str, float], LearningCurve], path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CURVES_CSV_HEADER)
        for key in sorted(curves):
            curve = curves[key]
            for size, mean, std in zip(
                curve.labeled_sizes, curve.mean_accuracy, curve.std_accuracy
            ):
                writer.writerow(
                    [curve.strategy, repr(curve.removal_fraction), str(int(size)), repr(float(mean)), repr(float(std))]
                )


def read_curves_csv(path) -> dict[tuple[str, float], LearningCurve]:
    rows: dict[tuple[str, float], list[tuple[int, float, float]]] = {}
    with Path(path).open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CURVES_CSV_HEADER:
            raise ConfigError(f"expected curves CSV header {','.join(CURVES_CSV_HEADER)}")
        for row in reader:
            key = (row[0], float(row[1]))
            rows.setdefault(key, []).append((int(row[2]), float(row[3]), float(row[4])))
    curves = {}
    for key, points in rows.items():
        curves[key] = LearningCurve(
            strategy=key[0],
            removal_fraction=key[1],
            labeled_sizes=np.asarray([p[0] for p in points], dtype=np.int64),
            mean_accuracy=np.asarray([p[1] for p in points]),
            std_accuracy=np.asarray([p[2] for p in points]),
            num_replicates=0,  # replicate count is not stored in the CSV
        )
    return curves


def write_profile_csv(profile: AcquisitionProfile, path) -> None:
    """Per-iteration bucket counts; the ``pool`` row is the baseline composition."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "batch_size"] + _BUCKET_ORDER)
        writer.writerow(
            ["pool", str(int(profile.pool_counts.sum()))] + [str(int(c)) for c in profile.pool_counts]
        )
        for row, iteration in enumerate(profile.iterations):
            writer.writerow(
                [str(iteration), str(int(profile.batch_sizes[row]))]
                + [str(int(c)) for c in profile.counts[row]]
            )


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def emit_artifacts(
    curves: dict[tuple[str, float], LearningCurve],
    maps: dict[str, DatasetMap],
    profiles: dict[str, AcquisitionProfile],
    out_dir,
) -> list[dict]:
    """Write SVG plots and CSV tables plus a ``manifest.json`` of content hashes.

    Outputs are deterministic: identical inputs produce identical bytes.
    Returns the manifest entries.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    curves_csv = out / "learning_curves.csv"
    write_curves_csv(curves, curves_csv)
    written.append(curves_csv)
    fractions = sorted({key[1] for key in curves})
    for fraction in fractions:
        series = [
            {
                "label": curve.strategy,
                "sizes": curve.labeled_sizes.tolist(),
                "mean": curve.mean_accuracy.tolist(),
                "std": curve.std_accuracy.tolist(),
            }
            for key, curve in sorted(curves.items())
            if key[1] == fraction
        ]
        svg_path = out / f"learning_curves_removal_{fraction:.2f}.svg"
        svg_path.write_text(
            render_learning_curves(series, f"learning curves (removal {fraction:.2f})"),
            encoding="utf-8",
        )
        written.append(svg_path)

    for name in sorted(maps):
        dmap = maps[name]
        svg_path = out / f"map_{name}.svg"
        svg_path.write_text(
            render_map_scatter(dmap.mu, dmap.sigma, dmap.correctness, f"dataset map: {name}"),
            encoding="utf-8",
        )
        written.append(svg_path)

    for name in sorted(profiles):
        profile = profiles[name]
        csv_path = out / f"profile_{name}.csv"
        write_profile_csv(profile, csv_path)
        written.append(csv_path)
        svg_path = out / f"profile_{name}.svg"
        svg_path.write_text(
            render_bucket_bars(
                profile.iterations,
                profile.counts.tolist(),
                _BUCKET_ORDER,
                f"acquisition composition: {name}",
            ),
            encoding="utf-8",
        )
        written.append(svg_path)

    manifest = [{"filename": p.name, "sha256": _sha256_file(p)} for p in sorted(written)]
    (out / "manifest.json").write_text(json.dumps({"files": manifest}, indent=2) + "\n", encoding="utf-8")
    return manifest
