"""
Command-line overrides of configuration fields.

Overrides are collected with a fluent OverrideBuilder and applied on top of a
RunConfig, so flags always win over file values.
"""

from typing import Any, List

import yaml

from ..errors import ConfigError
from .settings import RunConfig, coerce, known_keys, validate_config


class Override:
    """
    A single `section.field = value` assignment.

    String values are parsed as YAML scalars, so "0.1", "true" and "[8, 16]"
    become a float, a bool and a list before type coercion.
    """

    # Flag names mapped to the dotted keys they set
    FLAG_MAP = {
        "seed": "run.seed",
        "threads": "run.threads",
        "epsilon": "pgd.epsilon",
        "pgd_steps": "pgd.steps",
        "otsa_scatterers": "scatterers.count",
        "otsa_steps": "otsa.steps",
        "tau": "train.temperature",
        "epochs": "train.epochs",
        "batch": "train.batch_size",
        "freeze_encoder": "train.freeze_encoder",
        "clean_only": "train.clean_only",
    }

    def __init__(self, key: str, value: Any):
        """
        Args:
            key: Dotted key, e.g. "pgd.epsilon"
            value: Raw value; strings are parsed as YAML scalars

        Raises:
            ConfigError: If the key is unknown or the value does not fit its type
        """
        types = known_keys()
        if key not in types:
            raise ConfigError(
                f"Invalid override key '{key}'. Must be one of: {', '.join(sorted(types))}",
                {"field": key},
            )
        if isinstance(value, str):
            try:
                value = yaml.safe_load(value) if value.strip() else value
            except yaml.YAMLError as e:
                raise ConfigError(f"override '{key}': cannot parse value {value!r}", {"field": key}) from e
        self.key = key
        self.section, self.field = key.split(".", 1)
        self.value = coerce(value, types[key], key)

    @classmethod
    def parse(cls, text: str) -> "Override":
        """Build an override from `section.field=value`."""
        key, sep, value = text.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"Invalid override '{text}'. Expected format: section.field=value")
        return cls(key.strip(), value.strip())

    def apply(self, config: RunConfig) -> RunConfig:
        return config.with_value(self.section, self.field, self.value)

    def __repr__(self) -> str:
        return f"Override(key={self.key!r}, value={self.value!r})"


class OverrideBuilder:
    """Collects overrides with a fluent API; later overrides of a key win."""

    def __init__(self):
        self.overrides: List[Override] = []

    def add(self, key: str, value: Any) -> "OverrideBuilder":
        """
        Add an override.

        Example:
            >>> OverrideBuilder().add("pgd.epsilon", 0.05).epochs(3).apply(RunConfig())
        """
        self.overrides.append(Override(key, value))
        return self

    def parse(self, text: str) -> "OverrideBuilder":
        self.overrides.append(Override.parse(text))
        return self

    def flag(self, name: str, value: Any) -> "OverrideBuilder":
        """Add the override for a named CLI flag; None means the flag was not given."""
        if value is None:
            return self
        return self.add(Override.FLAG_MAP[name], value)

    def seed(self, value: int) -> "OverrideBuilder":
        return self.flag("seed", value)

    def threads(self, value: int) -> "OverrideBuilder":
        return self.flag("threads", value)

    def epsilon(self, value: float) -> "OverrideBuilder":
        return self.flag("epsilon", value)

    def pgd_steps(self, value: int) -> "OverrideBuilder":
        return self.flag("pgd_steps", value)

    def otsa_scatterers(self, value: int) -> "OverrideBuilder":
        return self.flag("otsa_scatterers", value)

    def otsa_steps(self, value: int) -> "OverrideBuilder":
        return self.flag("otsa_steps", value)

    def tau(self, value: float) -> "OverrideBuilder":
        return self.flag("tau", value)

    def epochs(self, value: int) -> "OverrideBuilder":
        return self.flag("epochs", value)

    def batch(self, value: int) -> "OverrideBuilder":
        return self.flag("batch", value)

    def freeze_encoder(self, value: bool = True) -> "OverrideBuilder":
        return self.flag("freeze_encoder", value)

    def clean_only(self, value: bool = True) -> "OverrideBuilder":
        return self.flag("clean_only", value)

    def apply(self, config: RunConfig) -> RunConfig:
        """
        Apply every override in order and validate the result.

        Raises:
            ConfigError: If the resolved configuration is invalid
        """
        for override in self.overrides:
            config = override.apply(config)
        return validate_config(config, "<overrides>") if self.overrides else config

    def __len__(self) -> int:
        return len(self.overrides)

    def __repr__(self) -> str:
        return f"OverrideBuilder(overrides={self.overrides!r})"
