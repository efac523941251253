"""Flat key=value configuration for planner, EM, and network parameters.

Config files are TOML-style assignments, one per line; ``#`` starts a
comment.  Values parse as int, float, or bool when they look like one and
stay strings otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path


@dataclass(frozen=True)
class Config:
    # world / planners
    gamma: float = 0.99
    vi_epsilon: float = 1e-6
    brtdp_alpha: float = 1e-3
    brtdp_tau: float = 10.0
    brtdp_max_trials: int = 1_000_000
    # IBM2
    em_bakein_iters: int = 5
    em_full_iters: int = 10
    # neural nets
    embed_dim: int = 30
    hidden_dim: int = 60
    head_dim: int = 80
    epochs: int = 100
    batch_size: int = 16
    lr: float = 0.001
    dropout_p: float = 0.5
    # corpus + evaluation
    n_per_task: int = 30
    cv_folds: int = 10
    cross_level_trials: int = 5
    timing_repeats: int = 1
    timing_timeout_seconds: float = 300.0
    workers: int = 1
    seed: int = 0


def _parse_value(raw: str):
    raw = raw.strip().strip('"').strip("'")
    lowered = raw.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


def load_config(path: str | Path | None = None, **overrides) -> Config:
    """Defaults, then file assignments, then keyword overrides."""
    values: dict = {}
    if path is not None:
        known = {f.name for f in fields(Config)}
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, raw = line.split("=", 1)
            key = key.strip()
            if key not in known:
                raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _parse_value(raw)
    config = Config(**values)
    overrides = {k: v for k, v in overrides.items() if v is not None}
    return replace(config, **overrides) if overrides else config
