#!/usr/bin/env python3
"""
PipeForge command line.

    pipeforge.py compose   --data D --task T --target Y --out DIR
    pipeforge.py tune      --pipeline P --data D --task T --target Y --out DIR
    pipeforge.py analyze   --pipeline P --data D --task T --target Y --out DIR
    pipeforge.py predict   --pipeline P --data D --target Y --out FILE
    pipeforge.py export    --pipeline P --data D --task T --target Y --out DIR
    pipeforge.py import    --path DIR
    pipeforge.py adapt     --pipeline P --data D --task T --target Y --out DIR
    pipeforge.py benchmark --suite S --repeats N --out DIR
    pipeforge.py fixtures  --out DIR
    pipeforge.py rerun     --manifest FILE --out DIR

Exit codes: 0 ok, 1 runtime failure, 2 usage error.
"""

import argparse
import json
import logging
import os
import sys
from typing import List, Optional

import benchmark
import settings
from atomization import adapt, adaptation_registry
from composer import ComposerConfig, GenerationStats, ParetoFront, compose, write_convergence_plot
from dataio import Dataset, TaskType, load_csv, split
from errors import PipeForgeError
from fixtures import write_fixtures
from operations.registry import get_registry
from pipeline.executor import fit
from pipeline.graph import canonical_signature, compute_depth
from pipeline.node import StructureClass
from sensitivity import SAConfig, analyze, improve
from storage import MANIFEST_NAME, RunManifest, export_pipeline, import_pipeline, load_manifest, write_manifest
from tuner import TuningConfig, TuningStrategy, tune

logger = logging.getLogger("pipeforge")


def configure_logging(verbose: bool):
    level = logging.DEBUG if verbose else settings.log_level()
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s", force=True)


def error_chain(exc: BaseException) -> str:
    messages = []
    while exc is not None:
        messages.append(f"{type(exc).__name__}: {exc}")
        exc = exc.__cause__
    return "\n  caused by ".join(messages)


def document_path(path: str) -> str:
    return path if path.endswith(".json") else os.path.join(path, "pipeline.json")


def load_data(args, require_target: bool = True) -> Dataset:
    return load_csv(args.data, args.task, args.target, args.horizon, require_target)


def start_manifest(args, argv: List[str], config: Optional[dict] = None) -> RunManifest:
    manifest = RunManifest(command=args.command, argv=list(argv), config=config or {}, seed=getattr(args, "seed", 0))
    for name in ("data", "pipeline"):
        path = getattr(args, name, None)
        if path:
            manifest.add_input(document_path(path) if name == "pipeline" else path)
    return manifest


def finish_manifest(manifest: RunManifest, out_dir: str):
    path = os.path.join(out_dir, MANIFEST_NAME)
    write_manifest(path, manifest)
    print(f"📝 Manifest: {path}")


def export_fitted(pipeline, data: Dataset, out_dir: str, registry, seed: int, manifest: RunManifest):
    """Fit on all of `data` and export with the data archive"""
    fitted = fit(pipeline, data, seed, registry)
    export_pipeline(pipeline, out_dir, fitted=fitted, train=data)
    manifest.add_output(out_dir)
    print(f"✅ Pipeline exported: {document_path(out_dir)}")
    return fitted


def write_front(front: ParetoFront, data: Dataset, out_dir: str, registry, seed: int, manifest: RunManifest):
    """front.json, telemetry plot, best pipeline and (multi-objective) every front member"""
    front_path = os.path.join(out_dir, "front.json")
    with open(front_path, "w", encoding="utf-8") as handle:
        json.dump(front.to_dict(), handle, indent=2)
    manifest.add_output(front_path)

    if front.history:
        plot_path = os.path.join(out_dir, "convergence.png")
        write_convergence_plot(plot_path, [GenerationStats(**row) for row in front.history])
        manifest.add_output(plot_path)
    telemetry_path = os.path.join(out_dir, "telemetry.csv")
    if os.path.isfile(telemetry_path):
        manifest.add_output(telemetry_path)
        print(f"📈 Telemetry: {telemetry_path} ({len(front.history)} rows)")

    best = front.best
    export_fitted(best.pipeline, data, os.path.join(out_dir, "best"), registry, seed, manifest)
    if len(front) > 1:
        for rank, member in enumerate(front.sorted_members()):
            export_fitted(member.pipeline, data, os.path.join(out_dir, "front", f"member_{rank}"), registry, seed, manifest)
    print(f"🏆 Best fitness {tuple(round(v, 6) for v in best.fitness)} after {front.generations_completed} generations")


def composer_config(args, out_dir: str) -> ComposerConfig:
    objectives = [item.strip() for item in (args.objectives or "").split(",") if item.strip()]
    return ComposerConfig(
        pop_size=args.pop_size,
        max_generations=args.generations,
        time_limit_seconds=args.timeout,
        seed=args.seed,
        objectives=objectives,
        structure_class=args.structure,
        selection_type=args.selection,
        adaptive_scheme=args.adaptive,
        tags_include=tuple(args.tags_include or ()),
        tags_exclude=tuple(args.tags_exclude or ()),
        jobs=args.jobs,
        use_cache=not args.no_cache,
        regularization=not args.no_regularization,
        telemetry_path=os.path.join(out_dir, "telemetry.csv"),
    )


def cmd_compose(args, argv) -> int:
    data = load_data(args)
    os.makedirs(args.out, exist_ok=True)
    config = composer_config(args, args.out)
    manifest = start_manifest(args, argv, config.to_dict())
    registry = get_registry()
    print(f"🧬 Composing {data.task.value} pipeline on {data.n_rows} rows")
    front = compose(config, data, registry)
    write_front(front, data, args.out, registry, args.seed, manifest)
    finish_manifest(manifest, args.out)
    return 0


def fitted_bundle(path: str):
    bundle = import_pipeline(path)
    if bundle.fitted is None:
        raise PipeForgeError(f"{document_path(path)} holds no fitted states")
    return bundle


def cmd_tune(args, argv) -> int:
    data = load_data(args)
    bundle = import_pipeline(args.pipeline)
    config = TuningConfig(strategy=args.strategy, iterations=args.iterations, metric=args.metric, seed=args.seed)
    manifest = start_manifest(args, argv, config.to_dict())
    os.makedirs(args.out, exist_ok=True)
    print(f"🎛️  Tuning {len(bundle.pipeline)}-node pipeline ({config.strategy.value}, {config.iterations} iterations)")
    tuned, report = tune(bundle.pipeline, data, config, bundle.registry)
    report_path = os.path.join(args.out, "tuning_report.json")
    report.write_json(report_path)
    manifest.add_output(report_path)
    print(f"📊 {report.metric}: {report.metric_before} -> {report.metric_after}" + (" (reverted)" if report.reverted else ""))
    export_fitted(tuned, data, os.path.join(args.out, "tuned"), bundle.registry, args.seed, manifest)
    finish_manifest(manifest, args.out)
    return 0


def cmd_analyze(args, argv) -> int:
    data = load_data(args)
    bundle = import_pipeline(args.pipeline)
    approaches = tuple(item.strip() for item in args.approaches.split(",") if item.strip())
    config = SAConfig(approaches=approaches, iterations=args.iterations, metric=args.metric, seed=args.seed)
    manifest = start_manifest(args, argv, config.to_dict())
    os.makedirs(args.out, exist_ok=True)
    report = analyze(bundle.pipeline, data, config, bundle.registry)

    report_path = os.path.join(args.out, "sa_report.json")
    report.write_json(report_path)
    dot_path = os.path.join(args.out, "sensitivity.dot")
    with open(dot_path, "w", encoding="utf-8") as handle:
        handle.write(report.to_dot())
    manifest.add_output(report_path)
    manifest.add_output(dot_path)
    print(f"🔍 Sustainability index {report.sustainability_index:.3f} "
          f"({report.n_del} deletable, {report.n_repl} replaceable of {report.n_total} nodes)")
    print(f"📄 Report: {report_path}")

    if args.improve:
        improved = improve(bundle.pipeline, report, bundle.registry)
        export_fitted(improved, data, os.path.join(args.out, "improved"), bundle.registry, args.seed, manifest)
    finish_manifest(manifest, args.out)
    return 0


def cmd_predict(args, argv) -> int:
    bundle = fitted_bundle(args.pipeline)
    fitted = bundle.fitted
    data = load_csv(args.data, fitted.task, args.target, fitted.horizon,
                    require_target=fitted.task == TaskType.TS_FORECASTING, category_maps=fitted.category_maps)
    table = fitted.predict(data)
    directory = os.path.dirname(os.path.abspath(args.out))
    os.makedirs(directory, exist_ok=True)
    table.write_csv(args.out, fitted.class_names)
    print(f"✅ {len(table)} predictions written: {args.out}")
    return 0


def cmd_export(args, argv) -> int:
    data = load_data(args)
    bundle = import_pipeline(args.pipeline)
    manifest = start_manifest(args, argv, {"validation_split": args.validation_split})
    train, validation = split(data, 1.0 - args.validation_split, args.seed)
    fitted = fit(bundle.pipeline, train, args.seed, bundle.registry)
    export_pipeline(bundle.pipeline, args.out, fitted=fitted, train=train, validation=validation)
    manifest.add_output(args.out)
    print(f"✅ Pipeline exported with fitted states and data archive: {args.out}")
    finish_manifest(manifest, args.out)
    return 0


def cmd_import(args, argv) -> int:
    bundle = import_pipeline(args.path)
    summary = {
        "nodes": len(bundle.pipeline),
        "depth": compute_depth(bundle.pipeline),
        "task": bundle.pipeline.task.value if bundle.pipeline.task else None,
        "signature": canonical_signature(bundle.pipeline, bundle.registry),
        "fitted": bundle.is_fitted,
        "operations": [node.operation_id for node in sorted(bundle.pipeline.nodes, key=lambda n: n.id)],
    }
    print(json.dumps(summary, indent=2))
    return 0


def cmd_adapt(args, argv) -> int:
    data = load_data(args)
    bundle = fitted_bundle(args.pipeline)
    os.makedirs(args.out, exist_ok=True)
    config = composer_config(args, args.out)
    manifest = start_manifest(args, argv, config.to_dict())
    print(f"♻️  Adapting {len(bundle.pipeline)}-node pipeline to {data.n_rows} new rows")
    front = adapt(bundle.fitted, data, config, bundle.registry)
    _, registry = adaptation_registry(bundle.fitted, bundle.registry)
    write_front(front, data, args.out, registry, args.seed, manifest)
    finish_manifest(manifest, args.out)
    return 0


def cmd_benchmark(args, argv) -> int:
    config = ComposerConfig(pop_size=args.pop_size, max_generations=args.generations, time_limit_seconds=args.timeout, jobs=args.jobs)
    manifest = start_manifest(args, argv, {"suite": args.suite, "repeats": args.repeats, **config.to_dict()})
    summary = benchmark.run_suite(args.suite, args.repeats, args.out, config, args.tune_iterations, args.seed)
    print(benchmark.summary_table(summary))
    for name in ("cells.csv", "summary.csv", "summary.txt"):
        manifest.add_output(os.path.join(args.out, name))
    print(f"📊 Summary: {os.path.join(args.out, 'summary.csv')}")
    finish_manifest(manifest, args.out)
    return 0


def cmd_fixtures(args, argv) -> int:
    for name, path in write_fixtures(args.out).items():
        print(f"✅ {name}: {path}")
    return 0


def replace_out(argv: List[str], out_dir: str) -> List[str]:
    replaced = []
    skip = False
    for index, item in enumerate(argv):
        if skip:
            skip = False
            continue
        if item == "--out":
            replaced += ["--out", out_dir]
            skip = index + 1 < len(argv)
        elif item.startswith("--out="):
            replaced.append(f"--out={out_dir}")
        else:
            replaced.append(item)
    return replaced


def cmd_rerun(args, argv) -> int:
    manifest = load_manifest(args.manifest)
    if manifest.command == "rerun":
        raise PipeForgeError("a rerun manifest cannot be rerun")
    changed = manifest.changed_inputs()
    if changed:
        raise PipeForgeError(f"inputs changed since the recorded run: {changed}")
    print(f"🔁 Re-running {manifest.command} into {args.out}")
    return run(replace_out(manifest.argv, args.out))


def add_data_arguments(parser: argparse.ArgumentParser, task_required: bool = True):
    parser.add_argument("--data", required=True, help="CSV file with a header row.")
    if task_required:
        parser.add_argument("--task", required=True, choices=[t.value for t in TaskType] + ["ts"], help="Learning task.")
    parser.add_argument("--target", required=True, help="Target column name.")
    parser.add_argument("--horizon", type=int, default=None, help="Forecast horizon for series.")
    parser.add_argument("--seed", type=int, default=0, help="Random seed.")


def add_composer_arguments(parser: argparse.ArgumentParser):
    parser.add_argument("--generations", type=int, default=200, help="Maximum number of generations.")
    parser.add_argument("--pop-size", type=int, default=10, help="Population size.")
    parser.add_argument("--timeout", type=float, default=600.0, help="Wall-clock limit in seconds.")
    parser.add_argument("--objectives", default="", help="Comma-separated objectives, quality first (e.g. RMSE,node_count).")
    parser.add_argument("--structure", choices=[s.value for s in StructureClass], default="composite", help="Structure class.")
    parser.add_argument("--selection", choices=["tournament", "spea2_like"], default="tournament", help="Selection type.")
    parser.add_argument("--adaptive", choices=["none", "rate_adaptation"], default="none", help="Adaptive rate scheme.")
    parser.add_argument("--tags-include", nargs="*", help="Only operations with one of these tags.")
    parser.add_argument("--tags-exclude", nargs="*", help="No operations with these tags.")
    parser.add_argument("--no-cache", action="store_true", help="Disable the fitness cache.")
    parser.add_argument("--no-regularization", action="store_true", help="Disable structural regularization.")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pipeforge", description="Evolutionary design of composite ML pipelines.")
    parser.add_argument("--verbose", action="store_true", help="Debug logging.")
    parser.add_argument("--jobs", type=int, default=1, help="Parallel fitness evaluations.")
    commands = parser.add_subparsers(dest="command", required=True)

    compose_parser = commands.add_parser("compose", help="Compose a pipeline for a dataset.")
    add_data_arguments(compose_parser)
    add_composer_arguments(compose_parser)
    compose_parser.add_argument("--out", required=True, help="Output directory.")
    compose_parser.set_defaults(handler=cmd_compose)

    tune_parser = commands.add_parser("tune", help="Tune the hyperparameters of an exported pipeline.")
    tune_parser.add_argument("--pipeline", required=True, help="Exported pipeline directory or pipeline.json.")
    add_data_arguments(tune_parser)
    tune_parser.add_argument("--strategy", choices=[s.value for s in TuningStrategy], default="simultaneous")
    tune_parser.add_argument("--iterations", type=int, default=settings.TUNING_ITERATIONS)
    tune_parser.add_argument("--metric", default=None, help="Metric to optimize (default: the task's).")
    tune_parser.add_argument("--out", required=True, help="Output directory.")
    tune_parser.set_defaults(handler=cmd_tune)

    analyze_parser = commands.add_parser("analyze", help="Structural sensitivity analysis.")
    analyze_parser.add_argument("--pipeline", required=True, help="Exported pipeline directory or pipeline.json.")
    add_data_arguments(analyze_parser)
    analyze_parser.add_argument("--approaches", default="delete,replace", help="Comma-separated: delete, replace.")
    analyze_parser.add_argument("--iterations", type=int, default=1, help="Refits per importance estimate.")
    analyze_parser.add_argument("--metric", default=None)
    analyze_parser.add_argument("--improve", action="store_true", help="Also export the pipeline with the best improving move applied.")
    analyze_parser.add_argument("--out", required=True, help="Output directory.")
    analyze_parser.set_defaults(handler=cmd_analyze)

    predict_parser = commands.add_parser("predict", help="Predict with a fitted exported pipeline.")
    predict_parser.add_argument("--pipeline", required=True, help="Exported pipeline directory or pipeline.json.")
    add_data_arguments(predict_parser, task_required=False)
    predict_parser.add_argument("--out", default="predictions.csv", help="Predictions CSV.")
    predict_parser.set_defaults(handler=cmd_predict)

    export_parser = commands.add_parser("export", help="Fit a pipeline document and export it with fitted states.")
    export_parser.add_argument("--pipeline", required=True, help="Pipeline directory or pipeline.json.")
    add_data_arguments(export_parser)
    export_parser.add_argument("--validation-split", type=float, default=0.2, help="Share of rows archived as validation data.")
    export_parser.add_argument("--out", required=True, help="Output directory.")
    export_parser.set_defaults(handler=cmd_export)

    import_parser = commands.add_parser("import", help="Load an exported pipeline and print its summary.")
    import_parser.add_argument("--path", required=True, help="Exported pipeline directory or pipeline.json.")
    import_parser.set_defaults(handler=cmd_import)

    adapt_parser = commands.add_parser("adapt", help="Re-compose on new data around the atomized old pipeline.")
    adapt_parser.add_argument("--pipeline", required=True, help="Fitted exported pipeline.")
    add_data_arguments(adapt_parser)
    add_composer_arguments(adapt_parser)
    adapt_parser.add_argument("--out", required=True, help="Output directory.")
    adapt_parser.set_defaults(handler=cmd_adapt)

    benchmark_parser = commands.add_parser("benchmark", help="Run the fixture benchmark suite.")
    benchmark_parser.add_argument("--suite", choices=sorted(benchmark.SUITES), default="regression")
    benchmark_parser.add_argument("--repeats", type=int, default=3)
    benchmark_parser.add_argument("--generations", type=int, default=3)
    benchmark_parser.add_argument("--pop-size", type=int, default=6)
    benchmark_parser.add_argument("--timeout", type=float, default=60.0)
    benchmark_parser.add_argument("--tune-iterations", type=int, default=20)
    benchmark_parser.add_argument("--seed", type=int, default=0)
    benchmark_parser.add_argument("--out", required=True, help="Output directory.")
    benchmark_parser.set_defaults(handler=cmd_benchmark)

    fixtures_parser = commands.add_parser("fixtures", help="Write the bundled fixtures as CSV.")
    fixtures_parser.add_argument("--out", required=True, help="Output directory.")
    fixtures_parser.set_defaults(handler=cmd_fixtures)

    rerun_parser = commands.add_parser("rerun", help="Re-execute a recorded run.")
    rerun_parser.add_argument("--manifest", required=True, help="manifest.json of the recorded run.")
    rerun_parser.add_argument("--out", required=True, help="New output directory.")
    rerun_parser.set_defaults(handler=cmd_rerun)
    return parser


def run(argv: List[str]) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose)
    try:
        return args.handler(args, argv)
    except (PipeForgeError, OSError, ValueError) as exc:
        logger.debug("command failed", exc_info=True)
        print(f"❌ {error_chain(exc)}", file=sys.stderr)
        return 1


def main(argv: Optional[List[str]] = None) -> int:
    return run(list(sys.argv[1:] if argv is None else argv))


if __name__ == "__main__":
    sys.exit(main())
