"""
FACTUAL CLI

Command-line interface for data generation, training, attacks and evaluation.
"""

import json
import sys
import traceback
from dataclasses import asdict
from functools import wraps
from pathlib import Path
from typing import Optional, Sequence

import click

from .config import logger, set_verbosity
from .config.overrides import Override, OverrideBuilder
from .config.settings import RunConfig, RunWorkspace, config_hash, load_config
from .data import Dataset, TripleSet, generate_dataset, load_dataset, perturb_dataset, save_dataset
from .errors import ConfigError, FactualError, InvariantViolation
from .model import load_checkpoint
from .pipeline import evaluate, finetune, pretrain, run_adversarial_training, run_standard_training, write_report
from .selftest import run_selftest


# Context object to pass global flags between commands
class CLIContext:
    """Context object for CLI commands."""

    def __init__(self):
        self.verbose = False


pass_context = click.make_pass_decorator(CLIContext, ensure=True)


def run_options(func):
    """Options shared by every command that resolves a RunConfig."""
    options = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="YAML configuration file"),
        click.option("--seed", type=int, help="Global seed"),
        click.option("--threads", type=click.IntRange(min=1), help="Worker cap (default: every core)"),
        click.option("--epsilon", type=float, help="PGD L-infinity budget"),
        click.option("--pgd-steps", type=click.IntRange(min=1), help="PGD iterations"),
        click.option("--otsa-scatterers", type=click.IntRange(min=1), help="Scatterers per image"),
        click.option("--otsa-steps", type=click.IntRange(min=1), help="Scatterer attack iterations"),
        click.option("--tau", type=float, help="Contrastive temperature"),
        click.option("--epochs", type=click.IntRange(min=1), help="Training epochs"),
        click.option("--batch", type=click.IntRange(min=2), help="Originals per batch"),
        click.option("--set", "settings", multiple=True, help="Override: section.field=value (repeatable)"),
        click.option("--out", required=True, type=click.Path(), help="Output directory"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def resolve_config(config_path: Optional[str], settings: Sequence[str], **flags) -> RunConfig:
    """Defaults, then the config file, then --set overrides, then named flags."""
    config = load_config(config_path) if config_path else RunConfig()
    builder = OverrideBuilder()
    for text in settings:
        builder.parse(text)
    for name, value in flags.items():
        if name not in Override.FLAG_MAP:
            raise ConfigError(f"Unknown flag '{name}'. Must be one of: {', '.join(Override.FLAG_MAP)}")
        getattr(builder, name)(value)
    return builder.apply(config)


def _flags(kwargs: dict) -> dict:
    """Split click kwargs into resolve_config arguments."""
    names = ("seed", "threads", "epsilon", "pgd_steps", "otsa_scatterers", "otsa_steps", "tau", "epochs", "batch")
    return {name: kwargs.pop(name, None) for name in names}


def _originals(path: str) -> Dataset:
    data = load_dataset(path)
    if isinstance(data, TripleSet):
        raise FactualError(f"{path} holds triples; this command needs a plain dataset")
    return data


def _write_history(ws: RunWorkspace, stage: str, history, steps: int):
    ws.path("history.json").write_text(json.dumps({"stage": stage, "loss": history, "steps": steps}, indent=2) + "\n")


def reported(func):
    """Echo failures in red and re-raise them so main() can map exit codes."""

    @wraps(func)
    def wrapper(ctx: CLIContext, *args, **kwargs):
        try:
            return func(ctx, *args, **kwargs)
        except Exception as e:
            click.echo(click.style(f"✗ Error: {e}", fg="red"), err=True)
            if ctx.verbose:
                traceback.print_exc()
            raise

    return wrapper


@click.group()
@click.option("--verbose", "-v", is_flag=True, help="Enable debug logging and tracebacks")
@pass_context
def cli(ctx, verbose):
    """FACTUAL - adversarial contrastive training for SAR target recognition."""
    ctx.verbose = verbose
    if verbose:
        set_verbosity("DEBUG")
        logger.debug("Verbose mode enabled")


@cli.command(name="gen-data")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="YAML configuration file")
@click.option("--classes", type=click.IntRange(min=2), help="Number of target classes")
@click.option("--per-class", type=click.IntRange(min=1), help="Images per class")
@click.option("--size", type=click.IntRange(min=16), help="Image height and width")
@click.option("--split", type=click.Choice(["train", "test"]), default="train", help="Split to synthesize")
@click.option("--seed", type=int, help="Dataset seed")
@click.option("--threads", type=click.IntRange(min=1), help="Worker cap")
@click.option("--set", "settings", multiple=True, help="Override: section.field=value (repeatable)")
@click.option("--out", required=True, type=click.Path(dir_okay=False), help="Output dataset file")
@pass_context
@reported
def gen_data(ctx, config_path, classes, per_class, size, split, seed, threads, settings, out):
    """Synthesize a labeled train or test split."""
    sized = list(settings)
    if classes is not None:
        sized.append(f"data.class_count={classes}")
    if size is not None:
        sized.append(f"data.size={size}")
    if per_class is not None:
        sized.append(f"data.{'per_class' if split == 'train' else 'test_per_class'}={per_class}")
    config = resolve_config(config_path, sized, seed=seed, threads=threads)
    out = Path(out)
    with RunWorkspace(out.parent, config, command="gen-data", config_name=f"{out.name}.config.yaml") as ws:
        count = config.data.per_class if split == "train" else config.data.test_per_class
        dataset = generate_dataset(count, config.run.seed, config.data.scene(), split, config.run.threads)
        save_dataset(dataset, ws.path(out.name))
    click.echo(click.style(f"✓ Wrote {len(dataset)} {split} images to {out}", fg="green"))


@cli.command(name="pretrain")
@click.option("--data", "data_path", required=True, type=click.Path(dir_okay=False), help="Training dataset file")
@run_options
@pass_context
@reported
def pretrain_cmd(ctx, data_path, config_path, settings, out, **kwargs):
    """Supervised adversarial contrastive pre-training."""
    config = resolve_config(config_path, settings, **_flags(kwargs))
    with RunWorkspace(out, config, inputs=[data_path], command="pretrain") as ws:
        dataset = _originals(data_path)
        arch = config.model.arch(dataset.image_shape[0], dataset.class_count)
        result = pretrain(dataset, config.train_config(ws.out_dir), arch)
        _write_history(ws, "pretrain", result.history, result.steps)
    click.echo(click.style(f"✓ Pre-trained for {len(result.history)} epochs, checkpoint in {out}", fg="green"))


@cli.command(name="finetune")
@click.option("--checkpoint", required=True, type=click.Path(dir_okay=False), help="Pre-trained checkpoint")
@click.option("--data", "data_path", required=True, type=click.Path(dir_okay=False), help="Dataset or triple file")
@click.option("--freeze-encoder", is_flag=True, help="Train only the linear classifier")
@click.option("--clean-only", is_flag=True, help="Fine-tune on clean images only")
@run_options
@pass_context
@reported
def finetune_cmd(ctx, checkpoint, data_path, freeze_encoder, clean_only, config_path, settings, out, **kwargs):
    """Adversarial fine-tuning of encoder and linear classifier."""
    flags = _flags(kwargs)
    flags["freeze_encoder"] = True if freeze_encoder else None
    flags["clean_only"] = True if clean_only else None
    config = resolve_config(config_path, settings, **flags)
    with RunWorkspace(out, config, inputs=[checkpoint, data_path], command="finetune") as ws:
        result = finetune(load_checkpoint(checkpoint), load_dataset(data_path), config.train_config(ws.out_dir))
        _write_history(ws, "finetune", result.history, result.steps)
    click.echo(click.style(f"✓ Fine-tuned for {len(result.history)} epochs, checkpoint in {out}", fg="green"))


def _baseline(name: str, trainer, stage: str, help_text: str):
    @cli.command(name=name, help=help_text)
    @click.option("--data", "data_path", required=True, type=click.Path(dir_okay=False), help="Training dataset file")
    @run_options
    @pass_context
    @reported
    def command(ctx, data_path, config_path, settings, out, **kwargs):
        config = resolve_config(config_path, settings, **_flags(kwargs))
        with RunWorkspace(out, config, inputs=[data_path], command=name) as ws:
            dataset = _originals(data_path)
            arch = config.model.arch(dataset.image_shape[0], dataset.class_count)
            result = trainer(dataset, config.train_config(ws.out_dir), arch)
            _write_history(ws, stage, result.history, result.steps)
        click.echo(click.style(f"✓ Trained {stage} baseline for {len(result.history)} epochs, checkpoint in {out}", fg="green"))

    return command


train_st = _baseline("train-st", run_standard_training, "standard", "Standard training baseline on clean images.")
train_at = _baseline("train-at", run_adversarial_training, "adversarial", "Adversarial training baseline on PGD images.")


@cli.command(name="attack")
@click.option("--checkpoint", required=True, type=click.Path(dir_okay=False), help="Model to attack")
@click.option("--data", "data_path", required=True, type=click.Path(dir_okay=False), help="Dataset file")
@run_options
@pass_context
@reported
def attack_cmd(ctx, checkpoint, data_path, config_path, settings, out, **kwargs):
    """Write a triple file (clean, scatterer, PGD views) attacked against a checkpoint."""
    config = resolve_config(config_path, settings, **_flags(kwargs))
    with RunWorkspace(out, config, inputs=[checkpoint, data_path], command="attack") as ws:
        train = config.train_config()
        triples = perturb_dataset(
            _originals(data_path),
            load_checkpoint(checkpoint),
            train.pgd.with_changes(loss_mode="classifier"),
            train.otsa.with_changes(loss_mode="classifier"),
            rng_seed=config.run.seed,
            scatterers=train.scatterers,
            threads=config.run.threads,
        )
        target = save_dataset(triples, ws.path("perturbed.fctd"))
    click.echo(click.style(f"✓ Wrote {len(triples)} triples to {target}", fg="green"))


@cli.command(name="evaluate")
@click.option("--checkpoint", required=True, type=click.Path(dir_okay=False), help="Model to evaluate")
@click.option("--data", "data_path", required=True, type=click.Path(dir_okay=False), help="Test dataset file")
@run_options
@pass_context
@reported
def evaluate_cmd(ctx, checkpoint, data_path, config_path, settings, out, **kwargs):
    """Report TA, RA, AA and the TA-RA gap."""
    config = resolve_config(config_path, settings, **_flags(kwargs))
    with RunWorkspace(out, config, inputs=[checkpoint, data_path], command="evaluate") as ws:
        report = evaluate(
            load_checkpoint(checkpoint),
            _originals(data_path),
            config.pgd,
            config.otsa,
            config.scatterers,
            seed=config.run.seed,
            threads=config.run.threads,
            config_hash=ws.config_hash,
        )
        write_report(report, ws.out_dir)
    click.echo(f"TA {report.ta:.2f}  RA {report.ra:.2f}  AA {report.aa:.2f}  gap {report.gap:.2f}")


@cli.command(name="selftest")
@click.option("--seeds", default=10, type=click.IntRange(min=1), help="Seeds per gradient check")
@click.option("--batches", default=100, type=click.IntRange(min=1), help="Contrastive oracle batches")
@click.option("--perturbations", default=1000, type=click.IntRange(min=1), help="PGD budget check size")
@click.option("--config", "config_path", type=click.Path(dir_okay=False), help="YAML configuration file")
@click.option("--set", "settings", multiple=True, help="Override: section.field=value (repeatable)")
@click.option("--out", type=click.Path(), help="Directory for the resolved config and selftest.json")
@pass_context
@reported
def selftest_cmd(ctx, seeds, batches, perturbations, config_path, settings, out):
    """Run gradient checks and oracle suites."""
    config = resolve_config(config_path, settings)
    click.echo(f"config {config_hash(config)}")
    report = run_selftest(seeds, batches, perturbations)
    for check in report.checks:
        mark = click.style("✓", fg="green") if check.passed else click.style("✗", fg="red")
        click.echo(f"{mark} {check.name} {check.detail}")
    if out is not None:
        with RunWorkspace(out, config, command="selftest") as ws:
            document = {"passed": report.passed, "checks": [asdict(check) for check in report.checks]}
            ws.path("selftest.json").write_text(json.dumps(document, indent=2) + "\n")
    if not report.passed:
        raise InvariantViolation(f"{len(report.failures)} selftest checks failed")


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Main entry point for the CLI.

    Returns:
        0 on success, 1 on user errors, 2 on invariant violations and unexpected errors
    """
    try:
        result = cli.main(args=list(argv) if argv is not None else None, prog_name="factual", standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return 1
    except click.Abort:
        return 1
    except InvariantViolation:
        return 2
    except (FactualError, ValueError, OSError):
        return 1
    except Exception as e:
        logger.error(f"Unexpected error: {e}")
        return 2
    return result if isinstance(result, int) else 0


if __name__ == "__main__":
    sys.exit(main())
