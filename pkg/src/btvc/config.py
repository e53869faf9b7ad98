"""Run configuration: a YAML document validated into frozen dataclasses.

Every section is optional; missing keys take the level-factor defaults.
Unknown keys, wrong types and out-of-domain values raise :class:`InputError`
before any computation starts.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .backtest import MODEL_NAMES, BacktestConfig
from .errors import InputError, ParameterError
from .model import PriorConfig


@dataclass(frozen=True)
class DataSection:
    path: str | None = None
    # Subtract the sample mean of a univariate series before fitting (the
    # model's long-run mean is zero). PCA scores are centered already.
    center: bool = False


@dataclass(frozen=True)
class SamplerSection:
    iterations: int = 10_000
    burn_in: int = 2_000
    thinning: int = 1
    horizon: int = 480


@dataclass(frozen=True)
class ForecastSection:
    summary_horizons: tuple[int, ...] = (1, 3, 6, 12, 60, 120, 240, 480)
    report_maturities: tuple[float, ...] = (1.0, 3.0, 5.0, 10.0)


@dataclass(frozen=True)
class SimulateSection:
    n_obs: int = 241
    rho: float = 0.98
    beta: float = 0.95
    sigma_sq: float = 1.0
    target_var: float = 120.0
    tau_sq: float | None = None
    panel: bool = True
    maturities: tuple[float, ...] = tuple(float(m) for m in range(1, 21))
    slope_gamma: float = 0.95
    slope_sd: float = 0.3
    noise_sd: float = 0.02
    warmup: int = 10_000
    start: str = "1997-09"


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    out: str = "out"
    models: tuple[str, ...] = MODEL_NAMES
    data: DataSection = field(default_factory=DataSection)
    prior: PriorConfig = field(default_factory=PriorConfig)
    sampler: SamplerSection = field(default_factory=SamplerSection)
    forecast: ForecastSection = field(default_factory=ForecastSection)
    backtest: BacktestConfig = field(default_factory=BacktestConfig)
    simulate: SimulateSection = field(default_factory=SimulateSection)
    base_dir: str = field(default=".", compare=False, repr=False)

    def data_path(self) -> Path:
        if self.data.path is None:
            raise InputError("config has no data.path")
        p = Path(self.data.path)
        return p if p.is_absolute() else Path(self.base_dir) / p

    def backtest_config(self) -> BacktestConfig:
        return dataclasses.replace(self.backtest, prior=self.prior)

    def to_dict(self) -> dict:
        d = _plain(self)
        d.pop("base_dir")
        d["backtest"].pop("prior")
        return d

    def digest(self) -> str:
        """sha256 of the canonical JSON of everything that affects results
        (the output directory and the data location are excluded)."""
        d = self.to_dict()
        d.pop("out")
        d["data"].pop("path")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def _plain(obj):
    if dataclasses.is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, tuple):
        return [_plain(v) for v in obj]
    return obj


def _coerce(value, tp, where: str):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin in (typing.Union, types.UnionType):
        if value is None and type(None) in args:
            return None
        (inner,) = [a for a in args if a is not type(None)]
        return _coerce(value, inner, where)
    if origin is tuple:
        if not isinstance(value, (list, tuple)):
            raise InputError(f"{where}: expected a list, got {type(value).__name__}")
        return tuple(_coerce(v, args[0], f"{where}[{i}]") for i, v in enumerate(value))
    if dataclasses.is_dataclass(tp):
        return _build(tp, value, where)
    if tp is bool:
        if not isinstance(value, bool):
            raise InputError(f"{where}: expected true/false, got {value!r}")
        return value
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise InputError(f"{where}: expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise InputError(f"{where}: expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise InputError(f"{where}: expected a string, got {value!r}")
        return value
    raise TypeError(f"unsupported config type {tp}")


def _build(cls, doc, where: str):
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise InputError(f"{where or 'config'}: expected a mapping, got {type(doc).__name__}")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls) if f.init and f.name != "base_dir"}
    if cls is BacktestConfig:
        names.discard("prior")  # shared with the top-level prior section
    unknown = sorted(set(doc) - names)
    if unknown:
        raise InputError(f"{where or 'config'}: unknown key(s) {unknown}; allowed: {sorted(names)}")
    kwargs = {k: _coerce(v, hints[k], f"{where}.{k}" if where else k) for k, v in doc.items()}
    try:
        return cls(**kwargs)
    except ParameterError as exc:
        raise InputError(f"{where or 'config'}: {exc}") from exc


def parse_config(doc, base_dir: str | Path = ".") -> RunConfig:
    cfg = _build(RunConfig, doc, "")
    bad = [m for m in cfg.models if m not in MODEL_NAMES]
    if bad:
        raise InputError(f"models: unknown {bad}; choose from {list(MODEL_NAMES)}")
    if not 0 <= cfg.seed < 2**64:
        raise InputError(f"seed must be a 64-bit unsigned integer, got {cfg.seed}")
    s = cfg.sampler
    if s.iterations < 1 or not 0 <= s.burn_in < s.iterations or s.thinning < 1 or s.horizon < 0:
        raise InputError(f"sampler: need iterations >= 1, 0 <= burn_in < iterations, thinning >= 1, horizon >= 0; got {s}")
    if cfg.backtest.burn_in >= cfg.backtest.iterations:
        raise InputError("backtest: burn_in must be smaller than iterations")
    if any(h < 1 for h in cfg.forecast.summary_horizons):
        raise InputError("forecast.summary_horizons must be positive")
    if cfg.simulate.n_obs < 3:
        raise InputError("simulate.n_obs must be at least 3")
    return dataclasses.replace(cfg, base_dir=str(base_dir))


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise InputError(f"{path}: invalid YAML: {exc}") from exc
    return parse_config(doc, base_dir=path.parent)


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False, default_flow_style=None)
