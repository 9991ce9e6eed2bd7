"""Shared state handed to every command handler."""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from dampwave.models.config import CommandOptions, ExperimentSpec, ModelConfig
from dampwave.services.errors import ConfigError
from dampwave.storage.config_file import parse_config


@dataclass
class RunContext:
    spec: ExperimentSpec
    cfg: Optional[ModelConfig] = None
    options: CommandOptions = field(default_factory=CommandOptions)
    artifacts: list[Path] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    @property
    def out_dir(self) -> Path:
        return self.spec.output_dir

    @property
    def scheme(self) -> str:
        return self.spec.scheme or self.options.scheme

    def require_config(self) -> ModelConfig:
        if self.cfg is None:
            raise ConfigError(f"command '{self.spec.command}' needs --config")
        return self.cfg

    def keep(self, path: Path) -> Path:
        self.artifacts.append(path)
        return path


Handler = Callable[[RunContext], int]


def load_context(spec: ExperimentSpec) -> RunContext:
    ctx = RunContext(spec=spec)
    if spec.config_path is not None:
        overrides = {"p": spec.p} if spec.p is not None else None
        ctx.cfg, ctx.options = parse_config(spec.config_path, overrides)
    return ctx
