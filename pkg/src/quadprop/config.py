"""Flat key-value configuration shared by the CLI subcommands.

Config files hold one ``key = value`` per line; blank lines and ``#``
comments are ignored.  Command-line flags override file values, which
override the defaults below.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(tok) for tok in text.split(",") if tok.strip())


def _parse_ratios(text: str) -> tuple[tuple[float, float], ...]:
    pairs = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        parts = tok.split(":")
        if len(parts) != 2:
            raise ValueError(f"ratio {tok!r} is not of the form p:q")
        pairs.append((float(parts[0]), float(parts[1])))
    return tuple(pairs)


@dataclass
class Config:
    base_size: float = 16.0
    scales: tuple[float, ...] = (4.0, 8.0, 16.0, 32.0, 64.0)
    ratios: tuple[tuple[float, float], ...] = ((1, 1), (1, 2), (2, 1), (1, 8), (8, 1))
    pos_iou: float = 0.7
    neg_iou: float = 0.3
    nms_iou: float = 0.5
    score_thr: float = 0.5
    match_iou: float = 0.5
    top_k: int = 300
    tile: int = 1024
    overlap: int = 200
    ap_method: str = "continuous"
    seed: int = 0
    lateral_channels: int = 16
    upsample: str = "nearest"

    def validate(self) -> "Config":
        if self.base_size <= 0:
            raise ConfigError("base_size must be positive")
        if not self.scales or any(s <= 0 for s in self.scales):
            raise ConfigError("scales must be positive")
        if not self.ratios or any(p <= 0 or q <= 0 for p, q in self.ratios):
            raise ConfigError("ratio components must be positive")
        for name in ("pos_iou", "neg_iou", "nms_iou", "match_iou"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1]")
        if self.neg_iou > self.pos_iou:
            raise ConfigError("neg_iou must not exceed pos_iou")
        if not 0.0 <= self.score_thr <= 1.0:
            raise ConfigError("score_thr must be in [0, 1]")
        if self.top_k < 1:
            raise ConfigError("top_k must be >= 1")
        if self.tile <= 0 or not 0 <= self.overlap < self.tile:
            raise ConfigError("need tile > 0 and 0 <= overlap < tile")
        if self.ap_method not in ("continuous", "eleven_point"):
            raise ConfigError(f"unknown ap_method {self.ap_method!r}")
        if self.upsample not in ("nearest", "bilinear"):
            raise ConfigError(f"unknown upsample mode {self.upsample!r}")
        if self.lateral_channels < 1:
            raise ConfigError("lateral_channels must be >= 1")
        return self


_PARSERS = {
    "base_size": float,
    "scales": _parse_floats,
    "ratios": _parse_ratios,
    "pos_iou": float,
    "neg_iou": float,
    "nms_iou": float,
    "score_thr": float,
    "match_iou": float,
    "top_k": int,
    "tile": int,
    "overlap": int,
    "ap_method": str,
    "seed": int,
    "lateral_channels": int,
    "upsample": str,
}


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _PARSERS:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        try:
            values[key] = _PARSERS[key](value)
        except ValueError as exc:
            raise ConfigError(f"config line {lineno}: bad value for {key}: {exc}") from exc
    return values


def load_config(path: str | Path | None, overrides: dict | None = None) -> Config:
    """Defaults, then file values, then non-None overrides; validated."""
    cfg = Config()
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        for key, value in parse_config_text(text).items():
            setattr(cfg, key, value)
    known = {f.name for f in fields(Config)}
    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(cfg, key, value)
    return cfg.validate()
