"""Run configuration: built-in defaults < config file < command-line flags."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

from .core import TimeBinning


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Thresholds:
    address_island_eps: float = 0.001
    reliable_uptime: float = 0.85
    flaky_combos: int = 10
    long_event_s: int = 18000
    confirmations: int = 3

    def __post_init__(self) -> None:
        if not 0.0 <= self.address_island_eps < 0.5:
            raise ConfigError("address_island_eps must be within [0, 0.5)")
        if not 0.0 <= self.reliable_uptime <= 1.0:
            raise ConfigError("reliable_uptime must be within [0, 1]")
        if self.flaky_combos < 1:
            raise ConfigError("flaky_combos must be >= 1")
        if self.long_event_s < 0:
            raise ConfigError("long_event_s must be >= 0")
        if self.confirmations < 1:
            raise ConfigError("confirmations must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    window: int = 660
    epoch: int = 0
    thresholds: Thresholds = field(default_factory=Thresholds)
    seed: int = 0
    paths: Mapping[str, str] = field(default_factory=dict)

    @property
    def binning(self) -> TimeBinning:
        return TimeBinning(self.window, self.epoch)

    def merged(self, overrides: Mapping[str, Any]) -> RunConfig:
        """Apply a flat or nested mapping; None values are ignored."""
        top = {f.name for f in fields(self)} - {"thresholds"}
        th_names = {f.name for f in fields(Thresholds)}
        th = dict(asdict(self.thresholds))
        new: dict[str, Any] = {}
        for key, value in overrides.items():
            if value is None:
                continue
            if key == "thresholds":
                if not isinstance(value, Mapping):
                    raise ConfigError("thresholds must be an object")
                for k, v in value.items():
                    if k not in th_names:
                        raise ConfigError(f"unknown threshold {k!r}")
                    th[k] = v
            elif key == "binning":
                new.update({k: v for k, v in value.items() if k in ("window", "epoch")})
            elif key in th_names:
                th[key] = value
            elif key in top:
                new[key] = dict(value) if key == "paths" else value
            else:
                raise ConfigError(f"unknown config key {key!r}")
        try:
            return replace(self, thresholds=Thresholds(**th), **new)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["paths"] = dict(self.paths)
        return d

    def header_lines(self) -> list[str]:
        """Effective configuration as ``#`` comment lines for report headers."""
        return [f"# config {json.dumps(self.to_dict(), sort_keys=True)}"]


def load_config(path: str | Path | None, cli: Mapping[str, Any] | None = None) -> RunConfig:
    cfg = RunConfig()
    if path:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        if not isinstance(doc, Mapping):
            raise ConfigError("config must be a JSON object")
        cfg = cfg.merged({k: v for k, v in doc.items() if k in _RUN_KEYS})
    return cfg.merged(cli or {})


_RUN_KEYS = {"window", "epoch", "binning", "thresholds", "seed", "paths", *(f.name for f in fields(Thresholds))}
