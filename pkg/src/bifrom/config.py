"""Pipeline configuration: UTF-8 ``key=value`` lines, unknown keys rejected."""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, fields, replace

from .ann import TrainConfig
from .errors import ConfigError
from .fom import FomConfig

SEED_ENV = "BIFROM_SEED"


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    # full-order model
    n_interior: int = 63
    mu1_min: float = 0.5
    mu1_max: float = 2.0
    mu2_min: float = 0.06
    mu2_max: float = 0.15
    dt: float = 0.05
    tol: float = 1e-9
    # grid points within ~1e-3 of the critical curve decay at rate ~1e-5 per step
    max_steps: int = 2_000_000
    bias_amplitude: float = 0.1
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    # sampling
    snap_n1: int = 8
    snap_n2: int = 9
    ref_n1: int = 40
    ref_n2: int = 41
    # reduced models
    k: int = 8
    restarts: int = 10
    tol1: float = 1e-4
    tol2: float = 1e-6
    global_tol: float = 1e-6
    podnn_tol: float = 1e-6
    # networks
    hidden: tuple[int, ...] = (2048, 1024)
    learning_rate: float = 1e-3
    max_epochs_per_round: int = 500
    max_rounds: int = 20
    plateau_tol: float = 1e-10

    def __post_init__(self):
        if self.k < 1 or self.restarts < 1:
            raise ConfigError("k and restarts must be positive")
        if min(self.snap_n1, self.snap_n2, self.ref_n1, self.ref_n2) < 2:
            raise ConfigError("grids need at least 2 points per axis")
        if not (0 <= self.tol2 <= self.tol1 < 1):
            raise ConfigError("need 0 <= tol2 <= tol1 < 1")
        if not self.hidden or min(self.hidden) < 1:
            raise ConfigError("hidden layer sizes must be positive")
        self.fom()  # validates the model block

    def fom(self) -> FomConfig:
        return FomConfig(
            n_interior=self.n_interior,
            mu1_range=(self.mu1_min, self.mu1_max),
            mu2_range=(self.mu2_min, self.mu2_max),
            dt=self.dt,
            tol=self.tol,
            max_steps=self.max_steps,
            bias_amplitude=self.bias_amplitude,
            newton_tol=self.newton_tol,
            newton_max_iter=self.newton_max_iter,
        )

    def train(self, loss: str = "mse") -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            max_epochs_per_round=self.max_epochs_per_round,
            max_rounds=self.max_rounds,
            seed=self.seed,
            loss=loss,
            plateau_tol=self.plateau_tol,
        )

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{f.name}={value}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()


def _coerce(name: str, raw: str, default):
    try:
        if isinstance(default, bool):
            return raw.strip().lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(int(v) for v in raw.split(",") if v.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {name}: {raw!r}") from exc
    return raw


def parse_config(text: str, base: PipelineConfig | None = None) -> PipelineConfig:
    base = base or PipelineConfig()
    known = {f.name for f in fields(base)}
    updates = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        updates[key] = _coerce(key, raw, getattr(base, key))
    return replace(base, **updates)


def load_config(path=None, environ=None) -> PipelineConfig:
    """Read a config file (optional) and apply the BIFROM_SEED override."""
    environ = os.environ if environ is None else environ
    if path is None:
        cfg = PipelineConfig()
    else:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except UnicodeDecodeError as exc:
            raise ConfigError(f"config {path} is not UTF-8") from exc
        cfg = parse_config(text)
    seed = environ.get(SEED_ENV)
    if seed is not None:
        try:
            cfg = replace(cfg, seed=int(seed))
        except ValueError as exc:
            raise ConfigError(f"{SEED_ENV} must be an integer, got {seed!r}") from exc
    return cfg
