"""Run configuration: one JSON document, unknown keys are a hard error."""
from __future__ import annotations

import json
from dataclasses import dataclass, field, fields

LOSS_KINDS = ("cfm", "consistency", "multisegment", "distill")
PATH_KINDS = ("linear", "trig")
LAMBDA_PRESETS = ("uniform", "middle")
ACTIVATIONS = ("silu", "tanh", "softplus")

_DATASET_KEYS = {"kind", "dim", "mu", "sigma", "radius", "noise", "cells", "extent"}


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


@dataclass
class RunConfig:
    loss: str = "consistency"
    p0: dict = field(default_factory=lambda: {"kind": "standard-gaussian", "dim": 2})
    p1: dict = field(default_factory=lambda: {"kind": "eight-gaussians",
                                              "radius": 4.0, "sigma": 0.3})
    coupling: object = "independent"  # "independent" | {"kind":"affine","A":..,"b":..}
    path: str = "linear"
    segments: int = 1
    alpha: float = 1.0
    dt: float = 0.01
    lambda_preset: str = "uniform"
    hidden: list = field(default_factory=lambda: [128, 128, 128, 128])
    activation: str = "silu"
    time_freqs: int = 8
    lr: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    # Desk-scale bootstrap targets must track the online params closely:
    # with dt ~ 0.01 a long-horizon EMA starves the loss of data signal,
    # while decay 0 leaves the feedback loop undamped.
    ema_decay: float = 0.5
    batch: int = 256
    steps: int = 20000
    seed: int = 0
    eval_every: int = 1000
    eval_n: int = 256
    outdir: str = "runs/out"
    teacher: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.loss not in LOSS_KINDS:
            raise ConfigError(f"loss must be one of {LOSS_KINDS}, got {self.loss!r}")
        if self.path not in PATH_KINDS:
            raise ConfigError(f"path must be one of {PATH_KINDS}, got {self.path!r}")
        if self.lambda_preset not in LAMBDA_PRESETS:
            raise ConfigError(f"lambda_preset must be one of {LAMBDA_PRESETS}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"activation must be one of {ACTIVATIONS}")
        for spec, name in ((self.p0, "p0"), (self.p1, "p1")):
            if not isinstance(spec, dict) or "kind" not in spec:
                raise ConfigError(f"{name} must be a dataset object with a 'kind'")
            unknown = set(spec) - _DATASET_KEYS
            if unknown:
                raise ConfigError(f"unknown {name} keys: {sorted(unknown)}")
        if isinstance(self.coupling, dict):
            unknown = set(self.coupling) - {"kind", "A", "b"}
            if unknown:
                raise ConfigError(f"unknown coupling keys: {sorted(unknown)}")
            if self.coupling.get("kind") != "affine":
                raise ConfigError("coupling object must have kind 'affine'")
            if "A" not in self.coupling or "b" not in self.coupling:
                raise ConfigError("affine coupling needs 'A' and 'b'")
        elif self.coupling != "independent":
            raise ConfigError(f"coupling must be 'independent' or an affine object, "
                              f"got {self.coupling!r}")
        if self.segments < 1:
            raise ConfigError(f"segments must be >= 1, got {self.segments}")
        if self.alpha <= 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}")
        if not 0.0 < self.dt < 1.0 / self.segments:
            raise ConfigError(
                f"dt must lie in (0, 1/segments), got dt={self.dt} segments={self.segments}"
            )
        if not self.hidden or any(int(h) < 1 for h in self.hidden):
            raise ConfigError(f"hidden widths must be positive, got {self.hidden}")
        if self.time_freqs < 1:
            raise ConfigError(f"time_freqs must be >= 1, got {self.time_freqs}")
        if self.lr <= 0 or self.eps <= 0:
            raise ConfigError("lr and eps must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigError("beta1/beta2 must lie in [0, 1)")
        if not 0.0 <= self.ema_decay <= 1.0:
            raise ConfigError(f"ema_decay must lie in [0,1], got {self.ema_decay}")
        if self.batch < 1 or self.steps < 0 or self.eval_every < 1 or self.eval_n < 2:
            raise ConfigError("batch >= 1, steps >= 0, eval_every >= 1, eval_n >= 2 required")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError(f"seed must be a uint64, got {self.seed}")
        if self.loss == "distill":
            if not self.teacher:
                raise ConfigError("distill runs need a 'teacher' checkpoint path")
            if self.segments != 1:
                raise ConfigError(
                    f"distillation is single-segment; got segments={self.segments}"
                )

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def from_json(cls, path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config root must be a JSON object")
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}
