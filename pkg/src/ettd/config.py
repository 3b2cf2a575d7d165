"""INI-style configuration holding endpoints, data paths and thresholds.

Example::

    [annotator]
    endpoint = https://api.openai.com/v1
    model_id = gpt-4o
    api_key_env = OPENAI_API_KEY

    [metrics]
    vectors = /data/vectors.txt
    classify_max_ed = 3
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

from ettd.errors import ConfigError

_SECTIONS = {
    "annotator": ("endpoint", "model_id", "api_key_env", "temperature", "max_retries", "backoff", "concurrency"),
    "metrics": ("vectors", "stopwords", "classify_max_ed", "iou_threshold"),
    "filter": ("filter_threshold",),
    "solver": ("solver_tol", "iters_per_unknown"),
}


@dataclass
class Config:
    endpoint: Optional[str] = None
    model_id: str = "gpt-4o"
    api_key_env: str = "OPENAI_API_KEY"
    temperature: float = 0.0
    max_retries: int = 3
    backoff: float = 0.5
    concurrency: int = 4
    vectors: Optional[str] = None
    stopwords: Optional[str] = None
    classify_max_ed: int = 3
    iou_threshold: float = 0.5
    filter_threshold: float = 0.8
    solver_tol: float = 1e-3
    iters_per_unknown: int = 10

    def validate(self) -> "Config":
        checks = [
            (0.0 <= self.temperature <= 2.0, "temperature must lie in [0, 2]"),
            (self.max_retries >= 0, "max_retries must be >= 0"),
            (self.backoff >= 0, "backoff must be >= 0"),
            (self.concurrency >= 1, "concurrency must be >= 1"),
            (self.classify_max_ed >= 0, "classify_max_ed must be >= 0"),
            (0.0 < self.iou_threshold <= 1.0, "iou_threshold must lie in (0, 1]"),
            (0.0 <= self.filter_threshold <= 1.0, "filter_threshold must lie in [0, 1]"),
            (self.solver_tol > 0, "solver_tol must be > 0"),
            (self.iters_per_unknown >= 1, "iters_per_unknown must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        for name in ("vectors", "stopwords"):
            value = getattr(self, name)
            if value and not Path(value).is_file():
                raise ConfigError(f"{name} file not found: {value}")
        return self

    def override(self, **kwargs) -> "Config":
        for key, value in kwargs.items():
            if value is not None:
                setattr(self, key, value)
        return self


def load_config(path=None) -> Config:
    cfg = Config()
    if path is None:
        return cfg
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    types = {f.name: f.type for f in fields(Config)}
    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            name = key
            if section == "filter" and key == "threshold":
                name = "filter_threshold"
            elif section == "solver" and key == "tol":
                name = "solver_tol"
            if name not in _SECTIONS[section]:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            kind = types[name]
            try:
                if "int" in str(kind):
                    value = int(raw)
                elif "float" in str(kind):
                    value = float(raw)
                else:
                    value = raw
            except ValueError:
                raise ConfigError(f"{path}: bad value for {key}: {raw!r}") from None
            if name in ("vectors", "stopwords"):
                value = str((path.parent / value).resolve()) if value else None
            setattr(cfg, name, value)
    return cfg.validate()
