"""CLI entry point for SkillSeries."""

import argparse
import json
import logging
import sys
import traceback
from pathlib import Path
from typing import Optional

import numpy as np
from rich.console import Console
from rich.logging import RichHandler
from rich.markup import escape
from rich.table import Table

from skillseries import __version__
from skillseries.analysis.experiment import ExperimentReport, run_experiment
from skillseries.analysis.highlights import attach_gesture_overlay, impact_curve
from skillseries.analysis.tuning import tune
from skillseries.core.config import FAMILY_NAMES, ConfigManager, RunConfig, dump_config
from skillseries.core.errors import BadParam, ConfigError, SkillSeriesError
from skillseries.core.trial import Criterion, Dataset, Task
from skillseries.data.loaders import load_dataset, write_dataset
from skillseries.data.synth import synth_dataset
from skillseries.features.base import FeatureFamily
from skillseries.features.extract import (
    ExtractionParams,
    build_feature_table,
    write_feature_csv,
)
from skillseries.models.pipeline import (
    TrainedPipeline,
    fit_regression_pipeline,
    load_pipeline,
    save_pipeline,
)
from skillseries.ui.report import (
    render_curve,
    render_reports,
    write_averaged,
    write_curve,
    write_report,
)
from skillseries.utils.cache import Cache
from skillseries.utils.files import atomic_write_text

logger = logging.getLogger("skillseries")

RESOLVED_CONFIG = "config.resolved.toml"

console = Console()
err_console = Console(stderr=True)


def setup_logging(level: str, log_file: Optional[str] = None) -> None:
    """Route package logs to a rich console handler and optionally a plain file."""
    handlers: list[logging.Handler] = [
        RichHandler(console=err_console, show_path=False, rich_tracebacks=False)
    ]
    if log_file:
        file_handler = logging.FileHandler(log_file, encoding="utf-8")
        file_handler.setFormatter(
            logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s")
        )
        handlers.append(file_handler)

    logger.handlers.clear()
    for handler in handlers:
        logger.addHandler(handler)
    logger.setLevel(level.upper())
    logger.propagate = False


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", type=str, default=None, help="Path to a TOML config")
    common.add_argument("--dataset", type=str, default=None, help="Dataset root directory")
    common.add_argument(
        "--task", type=str, default=None, help="Suturing, Knot_Tying, Needle_Passing or all"
    )
    common.add_argument("--scheme", type=str, default=None, help="LOSO or LOUO")
    common.add_argument(
        "--families", type=str, default=None, help="Comma-separated families, e.g. DCT,ApEn"
    )
    common.add_argument("--seed", type=int, default=None, help="Seed for every random draw")
    common.add_argument("--repeats", type=int, default=None, help="LOSO repetitions")
    common.add_argument("--window", type=int, default=None, help="Highlight window length")
    common.add_argument("--stride", type=int, default=None, help="Highlight window stride")
    common.add_argument(
        "--rho-mode", type=str, default=None, choices=["pooled", "per_fold"], help="rho mode"
    )
    common.add_argument("--out", type=str, default=None, help="Output directory")
    common.add_argument("--debug", action="store_true", help="Debug logging and tracebacks")

    parser = argparse.ArgumentParser(
        prog="skillseries",
        description="SkillSeries - surgical skill assessment from kinematic time series",
    )
    parser.add_argument("--version", action="version", version=f"skillseries {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("extract", parents=[common], help="Write feature CSVs per family")
    commands.add_parser("report", parents=[common], help="Cross-validate and write reports")

    highlights = commands.add_parser(
        "highlights", parents=[common], help="Impact curve of one trial"
    )
    highlights.add_argument("--trial", required=True, help="Trial id, e.g. Suturing_B001")
    highlights.add_argument("--criterion", default=None, help="RT, TM, FO, OP, QP, SH or GRS")
    highlights.add_argument("--pipeline", default=None, help="Trained DCT pipeline bundle")
    highlights.add_argument(
        "--save-pipeline", default=None, help="Save the pipeline trained for this trial"
    )

    commands.add_parser("tune", parents=[common], help="Grid-search k and C per family")

    synth = commands.add_parser("synth", parents=[common], help="Write a synthetic dataset")
    synth.add_argument("--surgeons", type=int, default=8)
    synth.add_argument("--trials", type=int, default=5)
    synth.add_argument("--channels", type=int, default=6)
    synth.add_argument("--frames", type=int, default=1000)

    init = commands.add_parser("init-config", help="Write the default config file")
    init.add_argument("path", help="Where to write the config")
    init.add_argument("--debug", action="store_true", help=argparse.SUPPRESS)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Config file values with command-line flags applied on top."""
    config = ConfigManager(args.config).load()
    families = None
    combinations = None
    if args.families:
        families = [FeatureFamily.parse(name).value for name in args.families.split(",")]
        allowed = set(families)
        combinations = [c for c in config.combinations if set(c) <= allowed] or [
            [f] for f in families
        ]
    config = config.with_overrides(
        dataset_root=args.dataset,
        task=args.task,
        scheme=args.scheme.upper() if args.scheme else None,
        families=families,
        combinations=combinations,
        seed=args.seed,
        repeats=args.repeats,
        window_length=args.window,
        stride=args.stride,
        rho_mode=args.rho_mode,
        out_dir=args.out,
    )
    if args.debug:
        config.log_level = "DEBUG"
    config.validate()
    return config


def selected_tasks(config: RunConfig) -> list[Task]:
    if config.task.strip().lower() == "all":
        return list(Task)
    try:
        return [Task.parse(config.task)]
    except SkillSeriesError as e:
        raise ConfigError(str(e), key="run.task") from e


def dataset_root(config: RunConfig) -> Path:
    if not config.dataset_root:
        raise ConfigError("No dataset root; pass --dataset", key="run.dataset_root")
    return Path(config.dataset_root).expanduser()


def load_task(config: RunConfig, task: Task) -> Dataset:
    return load_dataset(dataset_root(config), task)


def cmd_extract(config: RunConfig) -> list[Path]:
    """One feature CSV per task and family."""
    out_dir = Path(config.out_dir)
    extraction = ExtractionParams.from_config(config)
    families = [FeatureFamily.parse(name) for name in FAMILY_NAMES if _used(config, name)]
    written = []
    for task in selected_tasks(config):
        dataset = load_task(config, task)
        for family in families:
            table = build_feature_table(
                dataset.trials, family, extraction, threads=config.effective_threads()
            )
            path = out_dir / f"features_{task.dir_name}_{family.value}.csv"
            write_feature_csv(path, table)
            written.append(path)
            logger.info(f"Wrote {path}")
    dump_config(config, out_dir / RESOLVED_CONFIG)
    return written


def _used(config: RunConfig, name: str) -> bool:
    return name in config.families or any(name in combo for combo in config.combinations)


def cmd_report(config: RunConfig) -> list[ExperimentReport]:
    out_dir = Path(config.out_dir)
    cache = Cache()
    reports = []
    for task in selected_tasks(config):
        dataset = load_task(config, task)
        report = run_experiment(dataset, config.with_overrides(task=task.value), cache=cache)
        write_report(out_dir, report)
        reports.append(report)

    render_reports(console, reports)
    if len(reports) > 1:
        write_averaged(out_dir, reports)
    dump_config(config, out_dir / RESOLVED_CONFIG)
    return reports


def train_highlight_pipeline(
    dataset: Dataset, config: RunConfig, trial_id: str, criterion: Criterion
) -> TrainedPipeline:
    """DCT pipeline trained on every trial except those of the selected trial's surgeon."""
    surgeon = dataset.get(trial_id).surgeon_id
    train = [t for t in dataset if t.surgeon_id != surgeon]
    if not train:
        raise BadParam(f"No trials left after excluding surgeon {surgeon}", trial=trial_id)

    extraction = ExtractionParams.from_config(config)
    table = build_feature_table(train, FeatureFamily.DCT, extraction)
    targets = [t.labels.targets() for t in train]
    logger.info(f"Training DCT pipeline on {len(train)} trials (surgeon {surgeon} held out)")
    return fit_regression_pipeline(
        table.matrix,
        np.vstack(targets),
        FeatureFamily.DCT,
        extraction,
        config.family(FeatureFamily.DCT.value),
        table.trial_ids,
        criteria=(criterion,),
        tol=config.svr_tol,
        max_iter=config.svr_max_iter,
    )


def cmd_highlights(
    config: RunConfig,
    trial_id: str,
    criterion: Criterion,
    pipeline_path: Optional[str] = None,
    save_path: Optional[str] = None,
) -> tuple[Path, Path]:
    tasks = selected_tasks(config)
    task = next((t for t in tasks if trial_id.startswith(t.dir_name + "_")), tasks[0])
    dataset = load_task(config, task)
    trial = dataset.get(trial_id)

    if pipeline_path:
        pipeline = load_pipeline(Path(pipeline_path))
    else:
        pipeline = train_highlight_pipeline(dataset, config, trial_id, criterion)
        if save_path:
            save_pipeline(pipeline, Path(save_path))

    curve = impact_curve(trial, pipeline, criterion, config.window_length, config.stride)
    if trial.transcript is not None:
        curve = attach_gesture_overlay(curve, trial.transcript)

    out_dir = Path(config.out_dir)
    paths = write_curve(out_dir, curve)
    render_curve(console, curve)
    dump_config(config, out_dir / RESOLVED_CONFIG)
    return paths


def cmd_tune(config: RunConfig) -> Path:
    """Tune the first selected task and write the tuned config and score grids."""
    task = selected_tasks(config)[0]
    dataset = load_task(config, task)
    results = tune(dataset, config)

    settings = dict(config.family_settings)
    table = Table(title=f"Tuned settings ({task.value})")
    for column in ("Family", "k classify", "k predict", "C"):
        table.add_column(column)
    grids = {}
    for family, result in results.items():
        settings[family.value] = result.apply(settings[family.value])
        table.add_row(
            family.value,
            str(result.best_k_classify),
            str(result.best_k_predict),
            f"{result.best_C:g}",
        )
        grids[family.value] = {
            "k_grid": list(result.k_grid),
            "C_grid": list(result.C_grid),
            "regression": [
                [None if np.isnan(v) else float(v) for v in row] for row in result.regression_scores
            ],
            "classification": {str(k): v for k, v in result.classification_scores.items()},
        }
    console.print(table)

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tuned = config.with_overrides(family_settings=settings)
    path = out_dir / "config.tuned.toml"
    dump_config(tuned, path)
    atomic_write_text(out_dir / f"tuning_{task.dir_name}.json", json.dumps(grids, indent=2) + "\n")
    return path


def cmd_synth(config: RunConfig, surgeons: int, trials: int, channels: int, frames: int) -> Path:
    root = Path(config.dataset_root or config.out_dir).expanduser()
    for task in selected_tasks(config):
        dataset = synth_dataset(
            n_surgeons=surgeons,
            trials_per_surgeon=trials,
            task=task,
            n_channels=channels,
            n_frames=frames,
            seed=config.seed,
        )
        write_dataset(root, dataset)
        console.print(f"[green]Wrote {len(dataset)} {task.value} trials under {root}[/green]")
    return root


def dispatch(args: argparse.Namespace) -> None:
    if args.command == "init-config":
        path = ConfigManager().create_default_config(Path(args.path))
        console.print(f"[green]Wrote default config to {path}[/green]")
        return

    config = resolve_config(args)
    setup_logging(config.log_level, config.log_file)

    if args.command == "extract":
        cmd_extract(config)
    elif args.command == "report":
        cmd_report(config)
    elif args.command == "highlights":
        criterion = Criterion.parse(args.criterion or config.criterion)
        cmd_highlights(config, args.trial, criterion, args.pipeline, args.save_pipeline)
    elif args.command == "tune":
        cmd_tune(config)
    elif args.command == "synth":
        cmd_synth(config, args.surgeons, args.trials, args.channels, args.frames)


def run(argv: Optional[list[str]] = None) -> int:
    """Run the CLI and return its exit code."""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        # Usage errors share the configuration exit code
        return 0 if e.code in (0, None) else 1
    try:
        dispatch(args)
    except KeyboardInterrupt:
        err_console.print("Interrupted by user")
        return 130
    except SkillSeriesError as e:
        err_console.print(f"[red]Error: {escape(str(e))}[/red]", highlight=False)
        if getattr(args, "debug", False):
            err_console.print(traceback.format_exc(), markup=False, highlight=False)
        return e.exit_code
    return 0


def main() -> None:
    """Main CLI entry point."""
    sys.exit(run())


if __name__ == "__main__":
    main()
