"""Command-line entry point.

Subcommands (each driven by a JSON config file):

* ``gen``     write a synthetic dataset CSV
* ``map``     build and export the post-hoc reference dataset map
* ``run``     run active learning for every configured strategy
* ``profile`` join a run result with a map into bucket-composition tables
* ``ablate``  run the outlier-removal sweep
* ``report``  aggregate results into curves, plots, and a hashed manifest

Exit status: 0 on success, 1 on usage errors, 2 on runtime errors. All
diagnostics go to stderr; machine-readable output goes only to files.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

from .cartography import load_map_csv, save_map_csv
from .datagen import GeneratorConfig, generate_synthetic, save_csv
from .errors import ConfigError, PoolmapError
from .harness import (
    ExperimentConfig,
    ExperimentResult,
    build_reference_map,
    load_dataset,
    load_experiment_file,
    load_result,
    profile_acquisitions,
    run_experiment,
    save_result,
    write_summary_csv,
)
from .reporting import aggregate_curves, emit_artifacts, write_profile_csv
from .svg import render_bucket_bars, render_map_scatter


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); usage problems are exit 1
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="poolmap", description=__doc__, add_help=True)
    sub = parser.add_subparsers(dest="command")
    for name, helptext in (
        ("gen", "generate a synthetic dataset CSV"),
        ("map", "build and export the reference dataset map"),
        ("run", "run active-learning experiments"),
        ("profile", "bucket-profile a result against a map"),
        ("ablate", "run the outlier-removal ablation sweep"),
        ("report", "aggregate results into curves and plots"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="path to the JSON config")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--parallel", type=int, default=1, help="replicate parallelism (run/ablate)")
        p.add_argument("--seed", type=int, default=None, help="override replicate seeds with one seed")
    return parser


def _load_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_gen(args) -> int:
    payload = _load_json(args.config)
    try:
        config = GeneratorConfig(**payload)
    except TypeError as exc:
        raise ConfigError(f"generator config: {exc}") from None
    dataset = generate_synthetic(config)
    out = _out_dir(args) / "dataset.csv"
    save_csv(dataset, out)
    print(f"wrote {out} ({dataset.num_examples} examples)", file=sys.stderr)
    return 0


def _cmd_map(args) -> int:
    exp = load_experiment_file(args.config)
    dataset = load_dataset(exp.config.dataset)
    dmap = build_reference_map(exp.config, dataset=dataset)
    out = _out_dir(args)
    save_map_csv(dmap, dataset, out / "map.csv")
    (out / "map.svg").write_text(
        render_map_scatter(dmap.mu, dmap.sigma, dmap.correctness, "reference dataset map"),
        encoding="utf-8",
    )
    print(f"wrote {out / 'map.csv'} and {out / 'map.svg'}", file=sys.stderr)
    return 0


def _run_one(task) -> ExperimentResult:
    cfg, seed, dataset, dmap = task
    return run_experiment(cfg, seed, dataset=dataset, reference_map=dmap)


def _execute(tasks: list, parallel: int) -> list[ExperimentResult]:
    if parallel <= 1:
        return [_run_one(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=parallel) as pool:
        return list(pool.map(_run_one, tasks))


def _result_name(result: ExperimentResult) -> str:
    return (
        f"run_{result.strategy.kind}_removal_{result.removal_fraction:.2f}"
        f"_seed_{result.replicate_seed}.json"
    )


def _write_run_outputs(results: list[ExperimentResult], out: Path) -> None:
    results_dir = out / "results"
    results_dir.mkdir(parents=True, exist_ok=True)
    timing_lines = ["file,iteration,seconds"]
    for result in results:
        name = _result_name(result)
        save_result(result, results_dir / name)
        for rec in result.records:
            timing_lines.append(f"{name},{rec.iteration},{rec.wall_clock:.6f}")
    write_summary_csv(results, out / "summary.csv")
    # Wall-clock lives in its own file; result JSONs stay byte-reproducible.
    (out / "timings.csv").write_text("\n".join(timing_lines) + "\n", encoding="utf-8")
    print(f"wrote {len(results)} result files under {out / 'results'}", file=sys.stderr)


def _seeds_for(cfg: ExperimentConfig, args) -> tuple[int, ...]:
    return (args.seed,) if args.seed is not None else cfg.replicate_seeds


def _cmd_run(args) -> int:
    exp = load_experiment_file(args.config)
    cfg = exp.config
    dataset = load_dataset(cfg.dataset)
    dmap = build_reference_map(cfg, dataset=dataset)
    seeds = _seeds_for(cfg, args)
    tasks = [
        (replace(cfg, strategy=strategy), seed, dataset, dmap)
        for strategy in exp.strategies
        for seed in seeds
    ]
    _write_run_outputs(_execute(tasks, args.parallel), _out_dir(args))
    return 0


def _cmd_ablate(args) -> int:
    exp = load_experiment_file(args.config)
    cfg = exp.config
    dataset = load_dataset(cfg.dataset)
    dmap = build_reference_map(cfg, dataset=dataset)
    seeds = _seeds_for(cfg, args)
    tasks = [
        (replace(cfg, strategy=strategy, removal_fraction=fraction), seed, dataset, dmap)
        for fraction in exp.removal_fractions
        for strategy in exp.strategies
        for seed in seeds
    ]
    _write_run_outputs(_execute(tasks, args.parallel), _out_dir(args))
    return 0


def _cmd_profile(args) -> int:
    payload = _load_json(args.config)
    for key in ("result_json", "map_csv"):
        if key not in payload:
            raise ConfigError(f"profile config needs {key!r}")
    result = load_result(payload["result_json"])
    dmap, _ = load_map_csv(payload["map_csv"])
    profile = profile_acquisitions(result, dmap)
    out = _out_dir(args)
    stem = f"profile_{result.strategy.kind}_seed_{result.replicate_seed}"
    write_profile_csv(profile, out / f"{stem}.csv")
    (out / f"{stem}.svg").write_text(
        render_bucket_bars(
            profile.iterations,
            profile.counts.tolist(),
            ["easy", "medium", "hard", "impossible"],
            f"acquisition composition: {result.strategy.kind}",
        ),
        encoding="utf-8",
    )
    print(f"wrote {out / stem}.csv and .svg", file=sys.stderr)
    return 0


def _cmd_report(args) -> int:
    payload = _load_json(args.config)
    if "results_dir" not in payload:
        raise ConfigError("report config needs 'results_dir'")
    results_dir = Path(payload["results_dir"])
    paths = sorted(results_dir.glob("*.json"))
    if not paths:
        raise ConfigError(f"no result JSON files found in {results_dir}")
    results = [load_result(p) for p in paths]
    curves = aggregate_curves(results)

    maps = {}
    profiles = {}
    if payload.get("map_csv"):
        dmap, _ = load_map_csv(payload["map_csv"])
        maps["reference"] = dmap
        for kind in payload.get("profile", []):
            candidates = [r for r in results if r.strategy.kind == kind]
            if not candidates:
                raise ConfigError(f"profile requested for {kind!r} but no such results exist")
            chosen = min(candidates, key=lambda r: (r.removal_fraction, r.replicate_seed))
            profiles[f"{kind}_seed_{chosen.replicate_seed}"] = profile_acquisitions(chosen, dmap)
    elif payload.get("profile"):
        raise ConfigError("profiles need 'map_csv' in the report config")

    manifest = emit_artifacts(curves, maps, profiles, _out_dir(args))
    print(f"wrote {len(manifest)} artifacts to {args.out}", file=sys.stderr)
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "map": _cmd_map,
    "run": _cmd_run,
    "profile": _cmd_profile,
    "ablate": _cmd_ablate,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (PoolmapError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
