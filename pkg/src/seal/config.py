"""Run configuration: DQN hyperparameters plus the alternation schedule and seed."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

from .dqn.agent import Hyperparams
from .exceptions import ConfigurationError
from .trainer import AlternationSchedule

_HP_KEYS = {f.name for f in fields(Hyperparams)}
_RUN_KEYS = {"f_mw", "f_wm", "seed", "watermark", "checkpoint_freq", "eval_seed"}


@dataclass
class RunConfig:
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    f_mw: int = 10
    f_wm: int = 1
    seed: int = 0
    watermark: bool = True
    checkpoint_freq: Optional[int] = 5000
    eval_seed: int = 12345

    @property
    def schedule(self) -> AlternationSchedule:
        return AlternationSchedule(self.f_mw, self.f_wm)

    def to_dict(self) -> dict:
        d = self.hyperparams.to_dict()
        d.update(f_mw=self.f_mw, f_wm=self.f_wm, seed=self.seed, watermark=self.watermark,
                 checkpoint_freq=self.checkpoint_freq, eval_seed=self.eval_seed)
        return dict(sorted(d.items()))

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigurationError("run config must be a JSON object")
        unknown = set(data) - _HP_KEYS - _RUN_KEYS
        if unknown:
            raise ConfigurationError(f"unknown run config keys: {sorted(unknown)}")
        try:
            hp = Hyperparams(**{k: v for k, v in data.items() if k in _HP_KEYS})
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from None
        run = {k: v for k, v in data.items() if k in _RUN_KEYS}
        cfg = cls(hyperparams=hp, **run)
        cfg.schedule  # validates frequencies
        return cfg

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: not valid JSON ({exc})") from None
        return cls.from_dict(data)
