"""Experiment configuration: JSON documents plus command-line overrides."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

from .errors import ConfigError, HagerlabError
from .symbol import FourierSymbol, exp_minus_ix
from .theory import Box, ModelParams

_EXP_FORM = re.compile(r"^\s*exp\(\s*-\s*([0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)?\s*/\s*h\s*\)\s*$")

KNOWN_KEYS = {
    "symbol", "h", "delta", "epsilon0", "N", "trials", "box", "bins", "seed", "gaussian_scale",
}


def parse_delta(value_in: Any, h: float) -> float:
    """``delta`` from a number, a numeric string, or the form ``exp(-c/h)``."""
    if isinstance(value_in, bool):
        raise ConfigError("expected a number or 'exp(-c/h)'", field="delta")
    if isinstance(value_in, (int, float)):
        value = float(value_in)
    elif isinstance(value_in, str):
        m = _EXP_FORM.match(value_in)
        if m:
            c = float(m.group(1)) if m.group(1) else 1.0
            value = math.exp(-c / h)
        else:
            try:
                value = float(value_in)
            except ValueError:
                raise ConfigError(f"cannot parse {value_in!r}; use a number or 'exp(-c/h)'", field="delta") from None
    else:
        raise ConfigError(f"unsupported value {value_in!r}", field="delta")
    if not (value >= 0 and math.isfinite(value)):
        raise ConfigError(f"must be finite and non-negative, got {value!r}", field="delta")
    return value


@dataclass(frozen=True)
class ExperimentConfig:
    symbol: FourierSymbol = field(default_factory=exp_minus_ix)
    h: float = 0.05
    delta: float = math.exp(-20.0)
    N: int = 800
    trials: int = 100
    box: Box = Box(-10.0, 10.0, -1.0, 1.0)
    bins: int = 100
    seed: int = 20240601
    gaussian_scale: float = 1.0

    def __post_init__(self):
        if not self.h > 0:
            raise ConfigError("must be positive", field="h")
        if self.trials < 1:
            raise ConfigError("need at least one trial", field="trials")
        if self.bins < 2:
            raise ConfigError("need at least two bins", field="bins")
        if self.N < self.symbol.order:
            raise ConfigError(f"below the symbol order {self.symbol.order}", field="N")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("must be a 64-bit unsigned integer", field="seed")
        lo, hi = self.symbol.im_min, self.symbol.im_max
        tol = 1e-12 * max(1.0, hi - lo)
        if self.box.im0 < lo - tol or self.box.im1 > hi + tol:
            raise ConfigError(f"Im range must lie in the strip [{lo!r}, {hi!r}]", field="box")

    @property
    def dim(self) -> int:
        return 2 * self.N + 1

    @property
    def params(self) -> ModelParams:
        if self.delta <= 0:
            raise HagerlabError("delta = 0 has no coupling parameters")
        return ModelParams.from_delta(self.h, self.delta, self.symbol)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def to_dict(self) -> dict:
        return {
            "symbol": self.symbol.to_triples(),
            "h": self.h,
            "delta": self.delta,
            "N": self.N,
            "trials": self.trials,
            "box": self.box.as_list(),
            "bins": self.bins,
            "seed": self.seed,
            "gaussian_scale": self.gaussian_scale,
        }


def _num(doc: dict, key: str, kind=float):
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", field=key)
    if kind is int:
        if int(value) != value:
            raise ConfigError(f"expected an integer, got {value!r}", field=key)
        return int(value)
    return float(value)


def _box(value) -> Box:
    if not (isinstance(value, (list, tuple)) and len(value) == 4):
        raise ConfigError("expected [re0, re1, im0, im1]", field="box")
    try:
        return Box(*(float(v) for v in value))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), field="box") from None


def config_from_dict(doc: dict, overrides: dict | None = None) -> ExperimentConfig:
    """Build a config; ``overrides`` (possibly ``None`` values) win over ``doc``.

    ``delta`` and ``epsilon0`` are mutually exclusive after merging.
    """
    if not isinstance(doc, dict):
        raise ConfigError("top level must be a JSON object")
    unknown = set(doc) - KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)}", field=sorted(unknown)[0])
    merged = dict(doc)
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}
    if "delta" in overrides:
        merged.pop("epsilon0", None)
    if "epsilon0" in overrides:
        merged.pop("delta", None)
    merged.update(overrides)

    kw: dict[str, Any] = {}
    if "symbol" in merged:
        try:
            kw["symbol"] = FourierSymbol.from_triples(merged["symbol"])
        except (HagerlabError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc), field="symbol") from None
    symbol = kw.get("symbol", exp_minus_ix())
    if "h" in merged:
        kw["h"] = _num(merged, "h")
    h = kw.get("h", ExperimentConfig.h)
    if not h > 0:
        raise ConfigError("must be positive", field="h")
    if "delta" in merged and "epsilon0" in merged:
        raise ConfigError("give exactly one of delta and epsilon0", field="delta")
    if "delta" in merged:
        kw["delta"] = parse_delta(merged["delta"], h)
    elif "epsilon0" in merged:
        eps0 = _num(merged, "epsilon0")
        try:
            kw["delta"] = ModelParams.from_epsilon0(h, eps0, symbol).delta
        except HagerlabError as exc:
            raise ConfigError(str(exc), field="epsilon0") from None
    for key in ("N", "trials", "bins", "seed"):
        if key in merged:
            kw[key] = _num(merged, key, int)
    if "gaussian_scale" in merged:
        kw["gaussian_scale"] = _num(merged, "gaussian_scale")
    if "box" in merged:
        kw["box"] = _box(merged["box"])
    cfg = ExperimentConfig(**kw)
    if cfg.delta > 0:
        try:
            cfg.params
        except HagerlabError as exc:
            raise ConfigError(str(exc), field="delta") from None
    return cfg


def load_config(path: str | Path | None, overrides: dict | None = None) -> ExperimentConfig:
    """Read a UTF-8 JSON config (or start from defaults when ``path`` is ``None``)."""
    doc: dict = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    return config_from_dict(doc, overrides)
