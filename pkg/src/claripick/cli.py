"""Command-line entry points: data generation, training, evaluation, serving."""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from .checkpoint import load_checkpoint, save_checkpoint
from .errors import ClariPickError
from .evaluation import emit_report, run_simulated_clarification
from .importer import ImportStats, import_external
from .model import ModelConfig
from .scenes import load_dataset, save_scene, write_manifest
from .synthetic import GeneratorConfig, generate_synthetic_dataset, save_labels
from .training import TrainingConfig, save_training_log, train


@click.group()
def main():
    """Interactive instruction grounding for pick-and-place."""


def _fail(exc: Exception):
    raise click.ClickException(str(exc))


@main.command("gen-data")
@click.option("--scenes", "scene_count", type=int, required=True, help="Total scenes to generate.")
@click.option("--val-scenes", type=int, default=0, help="How many of them go to validation.")
@click.option("--ambiguity-rate", type=float, default=0.0)
@click.option("--min-objects", type=int, default=6)
@click.option("--max-objects", type=int, default=10)
@click.option("--image-size", type=int, default=320)
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def gen_data(scene_count, val_scenes, ambiguity_rate, min_objects, max_objects,
             image_size, seed, out_dir):
    """Generate a synthetic dataset with ground-truth labels and a manifest."""
    try:
        config = GeneratorConfig(scene_count=scene_count, min_objects=min_objects,
                                 max_objects=max_objects, ambiguity_rate=ambiguity_rate,
                                 image_size=image_size)
        if not 0 <= val_scenes < scene_count:
            raise ClariPickError("--val-scenes must be smaller than --scenes")
        dataset = generate_synthetic_dataset(config, seed)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        entries = []
        for i, scene in enumerate(dataset.scenes):
            save_scene(scene, out)
            save_labels(dataset.labels[scene.scene_id], out, scene.scene_id)
            tag = "validation" if i >= scene_count - val_scenes else "train"
            entries.append((scene.scene_id, tag))
        write_manifest(out / "manifest.txt", entries)
        click.echo(f"wrote {scene_count} scenes to {out} "
                   f"({scene_count - val_scenes} train, {val_scenes} validation)")
    except ClariPickError as exc:
        _fail(exc)


def _load_json_config(path):
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        _fail(exc)


@main.command("train")
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON file with 'training' and 'model' sections.")
@click.option("--iterations", type=int, default=None)
@click.option("--batch-size", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--log", "log_path", type=click.Path(), default=None)
def train_cmd(data_dir, config_path, iterations, batch_size, seed, out_path, log_path):
    """Train on the 'train' split of a dataset directory and checkpoint."""
    try:
        raw = _load_json_config(config_path)
        training_kwargs = dict(raw.get("training", {}))
        if iterations is not None:
            training_kwargs["iterations"] = iterations
        if batch_size is not None:
            training_kwargs["batch_size"] = batch_size
        if seed is not None:
            training_kwargs["seed"] = seed
        training_config = TrainingConfig(**training_kwargs)
        model_config = ModelConfig(**raw.get("model", {}))

        groups = load_dataset(data_dir)
        train_scenes = groups.get("train", [])
        if not train_scenes:
            raise ClariPickError(f"no scenes tagged 'train' under {data_dir}")

        model, log = train(train_scenes, training_config, model_config)
        save_checkpoint(model, out_path)
        if log_path is None:
            log_path = str(Path(out_path).with_suffix(".log.jsonl"))
        save_training_log(log, log_path)
        final = log[-1] if log else None
        click.echo(f"trained {training_config.iterations} iterations; "
                   f"checkpoint {out_path}; log {log_path}")
        if final:
            click.echo(f"final losses: margin {final.margin_loss:.4f} "
                       f"dest {final.dest_loss:.4f}")
    except ClariPickError as exc:
        _fail(exc)


@main.command("eval")
@click.option("--data", "data_dir", type=click.Path(exists=True), required=True)
@click.option("--ckpt", "ckpt_path", type=click.Path(exists=True), required=True)
@click.option("--report", "report_path", type=click.Path(), required=True)
@click.option("--simulate-clarification/--no-simulate-clarification", default=True)
@click.option("--single-clarification", is_flag=True, default=False)
@click.option("--m-obj", type=float, default=0.1)
@click.option("--m-box", type=float, default=0.1)
def eval_cmd(data_dir, ckpt_path, report_path, simulate_clarification,
             single_clarification, m_obj, m_box):
    """Evaluate a checkpoint on the 'validation' split and write report.json."""
    try:
        model = load_checkpoint(ckpt_path)
        groups = load_dataset(data_dir)
        scenes = groups.get("validation") or groups.get("train")
        if not scenes:
            raise ClariPickError(f"no scenes found under {data_dir}")
        if not simulate_clarification:
            rounds = 0
        elif single_clarification:
            rounds = 1
        else:
            rounds = 2
        report = run_simulated_clarification(scenes, model, m_obj=m_obj, m_box=m_box,
                                             max_clarifications=rounds)
        Path(report_path).write_text(emit_report(report, "json"))
        csv_path = Path(report_path).with_suffix(".csv")
        csv_path.write_text(emit_report(report, "csv"))
        click.echo(emit_report(report, "table"))
        click.echo(f"report written to {report_path} and {csv_path}")
    except ClariPickError as exc:
        _fail(exc)


@main.command("serve")
@click.option("--ckpt", "ckpt_path", type=click.Path(exists=True), required=True)
@click.option("--scenes", "scenes_dir", type=click.Path(exists=True), default=None)
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
def serve_cmd(ckpt_path, scenes_dir, host, port):
    """Serve the HTTP gateway (CLARIPICK_PORT overrides --port)."""
    try:
        import uvicorn

        from .server import create_app

        model = load_checkpoint(ckpt_path)
        store = {}
        if scenes_dir is not None:
            for tag_scenes in load_dataset(scenes_dir).values():
                for scene in tag_scenes:
                    store[scene.scene_id] = scene
        port = int(os.environ.get("CLARIPICK_PORT", port))
        app = create_app(model, store)
        click.echo(f"serving on {host}:{port} with {len(store)} stored scenes")
        uvicorn.run(app, host=host, port=port, log_level="warning")
    except ClariPickError as exc:
        _fail(exc)


@main.command("import")
@click.option("--from", "from_root", type=click.Path(exists=True), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
def import_cmd(from_root, out_dir):
    """Convert an externally annotated dataset into the canonical format."""
    try:
        stats = ImportStats()
        scenes = import_external(from_root, stats)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for scene in scenes:
            save_scene(scene, out)
        write_manifest(out / "manifest.txt", [(s.scene_id, "train") for s in scenes])
        click.echo(f"imported {stats.scenes_converted} scenes "
                   f"({stats.scenes_skipped} skipped, "
                   f"{stats.instructions_dropped} instructions dropped, "
                   f"{stats.objects_dropped} objects dropped)")
    except ClariPickError as exc:
        _fail(exc)


if __name__ == "__main__":
    sys.exit(main())
