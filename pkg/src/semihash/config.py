"""Run configuration: plain-text ``key = value`` files with CLI overrides."""

from __future__ import annotations

import os
import typing
from dataclasses import MISSING, asdict, dataclass, field, fields
from typing import List, Optional

from .data import Hyperparameters
from .errors import ConfigError
from .synth import SynthSpec

THREADS_ENV = "SEMIHASH_THREADS"


def _default_threads():
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


@dataclass
class RunConfig:
    # data files
    train_features: List[str] = field(default_factory=list)
    train_labels: str = ""
    test_features: List[str] = field(default_factory=list)
    test_labels: str = ""
    modality_names: List[str] = field(default_factory=lambda: ["image", "text"])
    # outputs
    model: str = "model.bin"
    out_dir: str = "."
    # training
    label_fraction: float = 0.5
    code_length: int = 32
    alpha: float = 100.0
    gamma: float = 0.01
    beta_l: Optional[float] = None
    beta_u: Optional[float] = None
    step: float = 0.001
    m: float = 2.0
    max_iter_hash: int = 400
    max_iter_fuzzy: int = 15
    seed: int = 0
    tol: float = 1e-6
    on_singular: str = "pinv"
    # evaluation
    cutoff: Optional[int] = None
    threads: int = field(default_factory=_default_threads)
    # synthetic data
    n: int = 2000
    n_classes: int = 4
    dims: List[int] = field(default_factory=lambda: [64, 32])
    noise: List[float] = field(default_factory=lambda: [5.25, 5.25])
    multi_label_prob: float = 0.1
    latent_dim: int = 16
    scale: float = 5.0
    test_fraction: float = 0.05
    # encode
    input: str = ""
    modality: int = 0
    output: str = "codes.hcod"

    def __post_init__(self):
        if not 0 < self.label_fraction <= 1:
            raise ConfigError(f"label_fraction must be in (0, 1], got {self.label_fraction}")
        if self.code_length < 1:
            raise ConfigError(f"code_length must be >= 1, got {self.code_length}")
        if self.threads < 1:
            raise ConfigError(f"threads must be >= 1, got {self.threads}")
        if self.cutoff is not None and self.cutoff < 1:
            raise ConfigError(f"cutoff must be >= 1, got {self.cutoff}")

    def hyperparameters(self) -> Hyperparameters:
        keys = {f.name for f in fields(Hyperparameters)}
        try:
            return Hyperparameters(**{k: v for k, v in asdict(self).items() if k in keys})
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def synth_spec(self) -> SynthSpec:
        try:
            return SynthSpec(
                n=self.n, n_classes=self.n_classes, dims=tuple(self.dims), noise=tuple(self.noise),
                multi_label_prob=self.multi_label_prob, latent_dim=self.latent_dim, scale=self.scale, seed=self.seed,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def check_files(self, *names):
        for name in names:
            value = getattr(self, name)
            paths = value if isinstance(value, list) else [value]
            if not paths or not all(paths):
                raise ConfigError(f"{name} is not set")
            for p in paths:
                if not os.path.exists(p):
                    raise ConfigError(f"{name}: file not found: {p}")

    # ---------------------------------------------------------------- text

    def to_text(self):
        lines = []
        for f in fields(self):
            lines.append(f"{f.name} = {_format(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text, base=None):
        values = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            values[key] = value
        return cls.from_strings(values, base)

    @classmethod
    def from_strings(cls, values, base=None):
        """Build a config from string values layered over ``base`` (or defaults)."""
        hints = typing.get_type_hints(cls)
        known = {f.name: f for f in fields(cls)}
        current = asdict(base) if base is not None else {}
        for key, value in values.items():
            key = key.replace("-", "_")
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            try:
                current[key] = _parse(hints[key], value)
            except ValueError as exc:
                raise ConfigError(f"{key}: cannot parse {value!r} ({exc})") from None
        try:
            return cls(**current)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path, overrides=None):
        try:
            with open(path) as f:
                text = f.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        cfg = cls.from_text(text)
        return cls.from_strings(overrides, cfg) if overrides else cfg

    def save(self, path):
        with open(path, "w") as f:
            f.write(self.to_text())


def _format(v):
    if v is None:
        return ""
    if isinstance(v, list):
        return ",".join(_format(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse(hint, value):
    origin = typing.get_origin(hint)
    args = typing.get_args(hint)
    if origin is typing.Union and type(None) in args:
        if value.strip() == "":
            return None
        inner = next(a for a in args if a is not type(None))
        return _parse(inner, value)
    if origin in (list, List):
        (inner,) = args
        return [_parse(inner, part.strip()) for part in value.split(",") if part.strip()]
    if hint is bool:
        if value.lower() in ("1", "true", "yes", "on"):
            return True
        if value.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError("expected a boolean")
    if hint is int:
        return int(value)
    if hint is float:
        return float(value)
    return value


def config_fields():
    """(name, type hint, default) for every config key; used to build CLI flags."""
    hints = typing.get_type_hints(RunConfig)
    out = []
    for f in fields(RunConfig):
        default = f.default if f.default is not MISSING else f.default_factory()
        out.append((f.name, hints[f.name], default))
    return out
