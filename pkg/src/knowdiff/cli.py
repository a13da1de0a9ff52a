"""Command-line surface wiring the pipeline end to end.

Exit codes: 2 I/O or usage, 3 empty data, 4 numeric failure,
5 configuration/secret, 6 incompatible data.
"""

from __future__ import annotations

import json
import os
import sys
from collections import Counter
from pathlib import Path

import click
import numpy as np

from .actions import MetaAction
from .decision import API_KEY_ENV, HeuristicProvider, RemoteConfig, RemoteProvider
from .diffusion.checkpoint import load_checkpoint, save_checkpoint
from .diffusion.network import Architecture, DenoiserModel
from .diffusion.schedule import NoiseSchedule
from .diffusion.training import TrainConfig, train
from .exceptions import (ConfigError, EmptyDataError, FileFormatError,
                         IncompatibleDataError, KnowdiffError, MetricError,
                         NumericError)
from .formats import write_report
from .library import build_library, classify, load_library, save_library, segment_log
from .metrics import evaluate_open_loop, ground_truth_future
from .pipeline import (ExpertReplayPlanner, Planner, PriorOnlyPlanner,
                       training_samples_from_logs)
from .scenarios import (ALL_KINDS, generate_scenarios, load_drive_log,
                        observation_at, save_drive_log, suffix_segment)
from .simulate import SimConfig, rollout_closed_loop
from .trajectory import extract_features

EXIT_IO = 2
EXIT_EMPTY = 3
EXIT_NUMERIC = 4
EXIT_CONFIG = 5
EXIT_INCOMPATIBLE = 6

_EXIT_BY_ERROR = (
    (NumericError, EXIT_NUMERIC),
    (MetricError, EXIT_EMPTY),
    (EmptyDataError, EXIT_EMPTY),
    (IncompatibleDataError, EXIT_INCOMPATIBLE),
    (ConfigError, EXIT_CONFIG),
    (FileFormatError, EXIT_IO),
)


def _run(body):
    try:
        body()
    except KnowdiffError as exc:
        for err_type, code in _EXIT_BY_ERROR:
            if isinstance(exc, err_type):
                click.echo(f"error: {exc}", err=True)
                sys.exit(code)
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_IO)
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_IO)


def _load_logs(logs_dir: Path):
    files = sorted(Path(logs_dir).glob("*.kdlog"))
    if not files:
        raise EmptyDataError(f"no .kdlog files under {logs_dir}")
    logs = [load_drive_log(f) for f in files]
    dts = {log.dt for log in logs}
    if len(dts) > 1:
        raise IncompatibleDataError(f"mixed dt across logs: {sorted(dts)}")
    return logs


@click.group()
def main():
    """Meta-action guided diffusion motion planner."""


@main.command("gen-data")
@click.option("--count", type=int, required=True, help="number of scenarios")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
@click.option("--kinds", default=None,
              help=f"comma-separated subset of {','.join(ALL_KINDS)}")
def cmd_gen_data(count, seed, out_dir, kinds):
    """Generate synthetic drive logs and print label coverage."""
    if count < 1:
        raise click.UsageError("--count must be >= 1")

    def body():
        kind_list = tuple(k.strip() for k in kinds.split(",")) if kinds else None
        logs = generate_scenarios(count, seed, kind_list)
        out_dir.mkdir(parents=True, exist_ok=True)
        for i, log in enumerate(logs):
            save_drive_log(log, out_dir / f"scenario_{i:04d}.kdlog")
        coverage = Counter(
            classify(extract_features(suffix_segment(log))).label for log in logs)
        click.echo(f"wrote {len(logs)} logs to {out_dir}")
        click.echo("suffix label coverage:")
        for label, n in sorted(coverage.items()):
            click.echo(f"  {label}: {n}")

    _run(body)


@main.command("build-library")
@click.option("--logs", "logs_dir", type=click.Path(exists=True, path_type=Path),
              required=True)
@click.option("--out", "out_file", type=click.Path(path_type=Path), required=True)
@click.option("--window-s", type=float, default=8.0, show_default=True)
def cmd_build_library(logs_dir, out_file, window_s):
    """Segment logs, classify, average into the prior library."""

    def body():
        logs = _load_logs(logs_dir)
        segments = []
        for log in logs:
            segments.extend(segment_log(log, window_s))
        if not segments:
            raise EmptyDataError(
                f"{len(logs)} logs produced no {window_s}-second segments")
        library = build_library(segments)
        save_library(library, out_file)
        click.echo(f"library with {len(library)} actions from {len(segments)} segments:")
        for action in library.actions():
            entry = library.entries[action.index]
            click.echo(f"  {action.label}: {entry.sample_count}")

    _run(body)


_TRAIN_DEFAULTS = {
    "steps": 2000, "batch_size": 64, "learning_rate": 1e-3, "seed": 0,
    "hidden_width": 256, "hidden_layers": 3,
    "beta_min": 0.1, "beta_max": 20.0, "eps_t": 1e-3,
}


@main.command("train")
@click.option("--logs", "logs_dir", type=click.Path(exists=True, path_type=Path),
              required=True)
@click.option("--library", "library_file", type=click.Path(exists=True, path_type=Path),
              required=True)
@click.option("--config", "config_file", type=click.Path(exists=True, path_type=Path),
              required=True)
@click.option("--out", "out_file", type=click.Path(path_type=Path), required=True)
@click.option("--resume", "resume_file", type=click.Path(exists=True, path_type=Path),
              default=None, help="continue from an existing checkpoint")
def cmd_train(logs_dir, library_file, config_file, out_file, resume_file):
    """Train the denoiser; writes the checkpoint and a loss-curve file."""

    def body():
        try:
            overrides = json.loads(Path(config_file).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{config_file}: invalid JSON: {exc}") from exc
        unknown = set(overrides) - set(_TRAIN_DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg_map = {**_TRAIN_DEFAULTS, **overrides}
        click.echo("effective config: " + json.dumps(cfg_map, sort_keys=True))

        load_library(library_file)  # validates the library artifact
        logs = _load_logs(logs_dir)
        dataset = training_samples_from_logs(logs)
        sched = NoiseSchedule(cfg_map["beta_min"], cfg_map["beta_max"], cfg_map["eps_t"])
        if resume_file is not None:
            model, sched = load_checkpoint(resume_file)
        else:
            arch = Architecture(hidden_width=cfg_map["hidden_width"],
                                hidden_layers=cfg_map["hidden_layers"])
            model = DenoiserModel.initialize(
                arch, np.random.default_rng(cfg_map["seed"]), zero_final=True)
        train_cfg = TrainConfig(steps=cfg_map["steps"], batch_size=cfg_map["batch_size"],
                                learning_rate=cfg_map["learning_rate"],
                                seed=cfg_map["seed"])
        losses = train(model, sched, dataset, train_cfg)
        save_checkpoint(out_file, model, sched)
        write_report(Path(str(out_file) + ".losses.json"), "loss_curve",
                     {"losses": losses, "config": cfg_map})
        click.echo(f"trained {train_cfg.steps} steps on {len(dataset)} samples; "
                   f"loss {losses[0]:.4f} -> {losses[-1]:.4f}")

    _run(body)


@main.command("plan")
@click.option("--scenario", "scenario_file", type=click.Path(exists=True, path_type=Path),
              required=True)
@click.option("--library", "library_file", type=click.Path(exists=True, path_type=Path),
              required=True)
@click.option("--ckpt", "ckpt_file", type=click.Path(exists=True, path_type=Path),
              required=True)
@click.option("--provider", type=click.Choice(["heuristic", "remote"]),
              default="heuristic", show_default=True)
@click.option("--endpoint", default="", help="chat-completion URL (remote provider)")
@click.option("--model", "model_name", default="gpt-4o", show_default=True)
@click.option("--t1", type=float, default=0.05, show_default=True)
@click.option("--t2", type=float, default=0.10, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_file", type=click.Path(path_type=Path), default=None)
def cmd_plan(scenario_file, library_file, ckpt_file, provider, endpoint, model_name,
             t1, t2, seed, out_file):
    """Plan one scenario: decision, prior lookup, truncated diffusion."""
    if t1 >= t2:
        raise click.UsageError(f"--t1 must be < --t2 (got {t1} >= {t2})")

    def body():
        if provider == "remote":
            key = os.environ.get(API_KEY_ENV, "")
            if not key:
                raise ConfigError(
                    f"remote provider requires {API_KEY_ENV}; refusing to start")
            if not endpoint:
                raise ConfigError("remote provider requires --endpoint")
            decision_provider = RemoteProvider(
                RemoteConfig(endpoint=endpoint, model=model_name, api_key=key))
        else:
            decision_provider = HeuristicProvider()

        library = load_library(library_file)
        model, sched = load_checkpoint(ckpt_file)
        log = load_drive_log(scenario_file)
        obs, _ = ground_truth_future(log)
        planner = Planner(library, model, sched, provider=decision_provider,
                          t1=t1, t2=t2, seed=seed)
        trajectory = planner.plan(obs)
        record = planner.decisions[-1]
        doc = {
            "trajectory": {"dt": trajectory.dt, "points": trajectory.points.tolist()},
            "decision": {"action": record.action.label, "provider": record.provider,
                         "latency_ms": record.latency_ms},
        }
        click.echo(f"decision: {record.action.label} ({record.provider})")
        click.echo(f"trajectory: {len(trajectory)} points at dt={trajectory.dt}")
        if out_file is not None:
            write_report(out_file, "plan", doc)
            click.echo(f"wrote {out_file}")

    _run(body)


@main.command("evaluate")
@click.option("--mode", type=click.Choice(["open", "closed"]), required=True)
@click.option("--scenarios", "scenarios_dir", type=click.Path(exists=True, path_type=Path),
              required=True)
@click.option("--library", "library_file", type=click.Path(path_type=Path), default=None)
@click.option("--ckpt", "ckpt_file", type=click.Path(path_type=Path), default=None)
@click.option("--planner", "planner_kind",
              type=click.Choice(["diffusion", "prior", "expert"]),
              default="diffusion", show_default=True)
@click.option("--reactive", is_flag=True, help="reactive agents in closed loop")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out_file", type=click.Path(path_type=Path), default=None)
@click.option("--traces", "traces_dir", type=click.Path(path_type=Path), default=None)
def cmd_evaluate(mode, scenarios_dir, library_file, ckpt_file, planner_kind,
                 reactive, seed, out_file, traces_dir):
    """Open-loop displacement metrics or closed-loop simulation scores."""

    def body():
        logs = _load_logs(scenarios_dir)

        def make_planner(log=None):
            if planner_kind == "expert":
                if log is None:
                    raise ConfigError("expert planner is closed-loop only")
                return ExpertReplayPlanner(log)
            if planner_kind == "prior":
                if library_file is None:
                    raise ConfigError("--library is required for the prior planner")
                return PriorOnlyPlanner(load_library(library_file))
            if library_file is None or ckpt_file is None:
                raise ConfigError("--library and --ckpt are required for the "
                                  "diffusion planner")
            model, sched = load_checkpoint(ckpt_file)
            return Planner(load_library(library_file), model, sched, seed=seed)

        if mode == "open":
            if planner_kind == "expert":
                raise ConfigError("expert planner is closed-loop only")
            report = evaluate_open_loop(make_planner(), logs)
            click.echo("open-loop results:")
            for key, value in report.to_dict().items():
                click.echo(f"  {key}: {value}")
            if out_file is not None:
                write_report(out_file, "open_loop_report", report.to_dict())
                click.echo(f"wrote {out_file}")
            return

        cfg = SimConfig(reactive=reactive)
        results = []
        for i, log in enumerate(logs):
            report, trace = rollout_closed_loop(make_planner(log), log, cfg)
            results.append(report.to_dict())
            if traces_dir is not None:
                Path(traces_dir).mkdir(parents=True, exist_ok=True)
                write_report(Path(traces_dir) / f"trace_{i:04d}.json",
                             "rollout_trace", trace)
        mean_score = float(np.mean([r["score"] for r in results]))
        total_collisions = int(sum(r["collisions"] for r in results))
        click.echo(f"closed-loop over {len(results)} scenarios "
                   f"({'reactive' if reactive else 'non-reactive'}):")
        click.echo(f"  mean score: {mean_score:.2f}")
        click.echo(f"  total collisions: {total_collisions}")
        if out_file is not None:
            write_report(out_file, "closed_loop_report",
                         {"mean_score": mean_score, "collisions": total_collisions,
                          "reactive": reactive, "scenarios": results})
            click.echo(f"wrote {out_file}")

    _run(body)


if __name__ == "__main__":
    main()
