"""
Run configuration: defaults, YAML files and CLI overrides resolved into one
frozen RunConfig, plus the output workspace every command writes into.
"""

import dataclasses
import hashlib
import json
import os
import shutil
import typing
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Iterable, Optional, Tuple, Union

import yaml

from ..attacks import OTSA_STEPS, AttackConfig, ScattererConfig
from ..data import AugmentConfig, SceneConfig
from ..errors import ConfigError
from ..model import ArchitectureConfig
from ..pipeline import TrainConfig
from . import logger

CONFIG_FILENAME = "resolved_config.yaml"


@dataclass(frozen=True)
class DataConfig:
    """Scene geometry plus split sizes."""

    size: int = 64
    clutter: float = 0.12
    looks: float = 4.0
    class_count: int = 4
    per_class: int = 200
    test_per_class: int = 50

    def scene(self) -> SceneConfig:
        return SceneConfig(self.size, self.clutter, self.looks, self.class_count).validate()


@dataclass(frozen=True)
class ModelConfig:
    """Architecture widths; image size and class count come from the data."""

    channels: Tuple[int, ...] = (16, 32, 64)
    representation_dim: int = 128
    projector_hidden: int = 64
    projector_dim: int = 32
    residual: bool = False

    def arch(self, image_size: int, class_count: int) -> ArchitectureConfig:
        return ArchitectureConfig(
            image_size=image_size,
            channels=self.channels,
            representation_dim=self.representation_dim,
            projector_hidden=self.projector_hidden,
            projector_dim=self.projector_dim,
            class_count=class_count,
            residual=self.residual,
        )


@dataclass(frozen=True)
class TrainSection:
    epochs: int = 10
    finetune_epochs: Optional[int] = None
    batch_size: int = 32
    lr: float = 0.05
    momentum: float = 0.9
    weight_decay: float = 1e-4
    temperature: float = 0.1
    regeneration: str = "per-batch"
    attack_loss: str = "contrastive"
    freeze_encoder: bool = False
    clean_only: bool = False


@dataclass(frozen=True)
class RunSection:
    seed: int = 0
    threads: Optional[int] = None


SECTIONS: Dict[str, type] = {
    "data": DataConfig,
    "model": ModelConfig,
    "train": TrainSection,
    "pgd": AttackConfig,
    "otsa": AttackConfig,
    "scatterers": ScattererConfig,
    "augment": AugmentConfig,
    "run": RunSection,
}


def _otsa_default() -> AttackConfig:
    return AttackConfig(steps=OTSA_STEPS)


@dataclass(frozen=True)
class RunConfig:
    """Every setting of one command, grouped by section."""

    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainSection = field(default_factory=TrainSection)
    pgd: AttackConfig = field(default_factory=AttackConfig)
    otsa: AttackConfig = field(default_factory=_otsa_default)
    scatterers: ScattererConfig = field(default_factory=ScattererConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    run: RunSection = field(default_factory=RunSection)

    def to_dict(self) -> Dict[str, Dict[str, Any]]:
        return {name: _plain(dataclasses.asdict(getattr(self, name))) for name in SECTIONS}

    def with_value(self, section: str, name: str, value: Any) -> "RunConfig":
        updated = dataclasses.replace(getattr(self, section), **{name: value})
        return dataclasses.replace(self, **{section: updated})

    def train_config(self, checkpoint_dir: Optional[Union[str, Path]] = None) -> TrainConfig:
        """The TrainConfig the pipeline consumes."""
        return TrainConfig(
            **dataclasses.asdict(self.train),
            pgd=self.pgd,
            otsa=self.otsa,
            scatterers=self.scatterers,
            augment=self.augment,
            seed=self.run.seed,
            threads=self.run.threads,
            checkpoint_dir=str(checkpoint_dir) if checkpoint_dir is not None else None,
        ).validate()


def _plain(value: Any) -> Any:
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def field_types(section: str) -> Dict[str, Any]:
    cls = SECTIONS[section]
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in fields(cls)}


def known_keys() -> Dict[str, Any]:
    """Every dotted key section.field with its annotated type."""
    return {f"{section}.{name}": hint for section in SECTIONS for name, hint in field_types(section).items()}


def coerce(value: Any, annotation: Any, key: str) -> Any:
    """
    Convert a parsed YAML value to the annotated field type.

    Raises:
        ConfigError: Naming the key when the value does not fit
    """
    origin = typing.get_origin(annotation)
    args = typing.get_args(annotation)
    if origin is Union:
        if value is None and type(None) in args:
            return None
        inner = [a for a in args if a is not type(None)]
        return coerce(value, inner[0], key)
    if origin in (tuple, Tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"field '{key}' expects a list, got {value!r}", {"field": key})
        if len(args) == 2 and args[1] is Ellipsis:
            return tuple(coerce(v, args[0], key) for v in value)
        if len(value) != len(args):
            raise ConfigError(f"field '{key}' expects {len(args)} values, got {len(value)}", {"field": key})
        return tuple(coerce(v, a, key) for v, a in zip(value, args))
    if annotation is bool:
        if isinstance(value, bool):
            return value
        raise ConfigError(f"field '{key}' expects true or false, got {value!r}", {"field": key})
    if annotation is int:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        raise ConfigError(f"field '{key}' expects an integer, got {value!r}", {"field": key})
    if annotation is float:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        if isinstance(value, str):
            # PyYAML reads exponents without a dot, like 1e-4, as strings
            try:
                return float(value)
            except ValueError:
                pass
        raise ConfigError(f"field '{key}' expects a number, got {value!r}", {"field": key})
    if annotation is str:
        if isinstance(value, str):
            return value
        raise ConfigError(f"field '{key}' expects a string, got {value!r}", {"field": key})
    raise ConfigError(f"field '{key}' has an unsupported type", {"field": key})


def _key_lines(text: str) -> Dict[str, int]:
    """1-based line of every section and section.field key in a YAML document."""
    lines: Dict[str, int] = {}
    root = yaml.compose(text)
    if not isinstance(root, yaml.MappingNode):
        return lines
    for key_node, value_node in root.value:
        section = str(key_node.value)
        lines[section] = key_node.start_mark.line + 1
        if isinstance(value_node, yaml.MappingNode):
            for field_node, _ in value_node.value:
                lines[f"{section}.{field_node.value}"] = field_node.start_mark.line + 1
    return lines


def parse_config(text: str, source: str = "<config>", base: Optional[RunConfig] = None) -> RunConfig:
    """
    Apply a YAML document on top of base (default: all defaults).

    Raises:
        ConfigError: On YAML syntax errors (with line), unknown sections or
            fields, mistyped values and invalid section values
    """
    config = base or RunConfig()
    try:
        document = yaml.safe_load(text)
        lines = _key_lines(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark is not None else source
        problem = getattr(e, "problem", None) or str(e)
        raise ConfigError(f"{where}: invalid YAML: {problem}", {"file": source}) from e
    if document is None:
        return config
    if not isinstance(document, dict):
        raise ConfigError(f"{source}: top level must be a mapping of sections", {"file": source})

    for section, values in document.items():
        line = lines.get(str(section))
        if section not in SECTIONS:
            raise ConfigError(
                f"{source}:{line}: unknown section '{section}'. Must be one of: {', '.join(SECTIONS)}",
                {"file": source, "line": line, "field": section},
            )
        if values is None:
            continue
        if not isinstance(values, dict):
            raise ConfigError(f"{source}:{line}: section '{section}' must be a mapping", {"file": source, "line": line})
        types = field_types(section)
        for name, value in values.items():
            key = f"{section}.{name}"
            line = lines.get(key)
            if name not in types:
                raise ConfigError(
                    f"{source}:{line}: unknown field '{key}'. Known fields: {', '.join(types)}",
                    {"file": source, "line": line, "field": key},
                )
            try:
                config = config.with_value(section, name, coerce(value, types[name], key))
            except (ConfigError, ValueError) as e:
                raise ConfigError(f"{source}:{line}: {e}", {"file": source, "line": line, "field": key}) from e
    return validate_config(config, source)


def load_config(path: Union[str, Path], base: Optional[RunConfig] = None) -> RunConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}", {"file": str(path)})
    logger.debug(f"Loading config from {path}")
    return parse_config(path.read_text(), str(path), base)


def validate_config(config: RunConfig, source: str = "<config>") -> RunConfig:
    """Run every section's own validation, reporting failures as ConfigError."""
    try:
        config.data.scene()
        config.model.arch(config.data.size, config.data.class_count)
        config.train_config()
        if config.data.per_class < 1 or config.data.test_per_class < 1:
            raise ValueError("per_class and test_per_class must be positive")
        if config.run.threads is not None and config.run.threads < 1:
            raise ValueError("threads must be positive")
    except ValueError as e:
        raise ConfigError(f"{source}: {e}", {"file": source}) from e
    return config


def config_hash(config: RunConfig) -> str:
    """First 16 hex digits of SHA-256 over the canonical JSON of the resolved config."""
    canonical = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()[:16]


class RunWorkspace:
    """
    Output directory of one command.

    On entry the input paths are checked, the directory is created atomically
    when absent and the resolved configuration is written into it.

    Example:
        >>> with RunWorkspace("runs/st", config, inputs=["train.fctd"]) as ws:
        ...     save_checkpoint(params, ws.path("standard.fctc"))
    """

    def __init__(
        self,
        out_dir: Union[str, Path],
        config: RunConfig,
        inputs: Iterable[Union[str, Path]] = (),
        command: str = "",
        config_name: str = CONFIG_FILENAME,
    ):
        self.out_dir = Path(out_dir)
        self.config = config
        self.inputs = [Path(p) for p in inputs]
        self.command = command
        self.config_name = config_name
        self.config_hash = config_hash(config)

    def __enter__(self) -> "RunWorkspace":
        for path in self.inputs:
            if not path.exists():
                raise ConfigError(f"input path does not exist: {path}", {"path": str(path)})
        self._create_dir()
        self.write_config()
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        if exc_type is not None:
            logger.debug(f"{self.command or 'command'} failed in {self.out_dir}: {exc_val}")
        return False

    def _create_dir(self):
        if self.out_dir.is_dir():
            return
        if self.out_dir.exists():
            raise ConfigError(f"output path exists and is not a directory: {self.out_dir}")
        self.out_dir.parent.mkdir(parents=True, exist_ok=True)
        staging = self.out_dir.with_name(f".{self.out_dir.name}.tmp-{os.getpid()}")
        staging.mkdir()
        try:
            os.rename(staging, self.out_dir)
        except OSError:
            # created concurrently by another run
            shutil.rmtree(staging, ignore_errors=True)
            if not self.out_dir.is_dir():
                raise
        logger.debug(f"Created output directory {self.out_dir}")

    def path(self, name: str) -> Path:
        """Path of an output file; outputs never overwrite inputs."""
        target = self.out_dir / name
        if any(target.resolve() == source.resolve() for source in self.inputs):
            raise ConfigError(f"refusing to overwrite input file {target}", {"path": str(target)})
        return target

    def write_config(self) -> Path:
        document = {"command": self.command, "config_hash": self.config_hash, **self.config.to_dict()}
        target = self.path(self.config_name)
        target.write_text(yaml.safe_dump(document, sort_keys=True))
        return target
