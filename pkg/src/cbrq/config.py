"""Run configuration: JSON file, environment fallback, flag overrides."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

from .errors import UsageError
from .months import Month
from .similarity import SimilarityConfig, SimilarityVariant

ENV_CONFIG = "CBRQ_CONFIG"

DEFAULT_VARIANTS = tuple(v.value for v in SimilarityVariant)
DEFAULT_KS = (1, 5, 10, 25, 50)
DEFAULT_WEIGHT_GRID = tuple(i / 20.0 for i in range(21))


@dataclass(frozen=True)
class RunConfig:
    """Every knob of the pipeline with its default."""

    data_dir: str | None = None
    returns_dir: str | None = None
    casebase: str | None = None
    output_dir: str = "cbrq_output"
    window: int = 12
    horizon: int = 6
    variants: tuple[str, ...] = DEFAULT_VARIANTS
    weight: float = 0.5
    ks: tuple[int, ...] = DEFAULT_KS
    sweep_k: int = 20
    weight_grid: tuple[float, ...] = DEFAULT_WEIGHT_GRID
    epsilon: float = 1e-6
    bins: int = 40
    k: int = 10
    top_n: int = 5
    initial_capital: float = 1000.0
    cost_bps: float = 0.0
    invest_when_undersized: bool = False
    runs: int = 100
    drop_fraction: float = 0.2
    master_seed: int = 0
    jobs: int = 1
    allow_gap_fill_days: int = 0
    include_warmup: bool = False
    start: str | None = None
    end: str | None = None
    figures: bool = True
    per_run_ledgers: bool = True

    def __post_init__(self) -> None:
        object.__setattr__(self, "variants", tuple(self.variants))
        object.__setattr__(self, "ks", tuple(int(k) for k in self.ks))
        object.__setattr__(self, "weight_grid", tuple(float(w) for w in self.weight_grid))
        if self.window < 1:
            raise UsageError(f"window must be >= 1, got {self.window}")
        if self.horizon < 1:
            raise UsageError(f"horizon must be >= 1, got {self.horizon}")
        if not 0.0 <= self.weight <= 1.0:
            raise UsageError(f"weight must lie in [0, 1], got {self.weight}")
        if not self.variants:
            raise UsageError("variants must be non-empty")
        known = {v.value for v in SimilarityVariant}
        for name in self.variants:
            if name not in known:
                raise UsageError(
                    f"unknown variant {name!r}; choose from {sorted(known)}"
                )
        if len(set(self.variants)) != len(self.variants):
            raise UsageError(f"duplicate variants in {self.variants}")
        if not self.ks or any(k < 1 for k in self.ks):
            raise UsageError(f"ks must be non-empty positive integers, got {self.ks}")
        if self.sweep_k < 1:
            raise UsageError(f"sweep_k must be >= 1, got {self.sweep_k}")
        if not self.weight_grid or any(not 0.0 <= w <= 1.0 for w in self.weight_grid):
            raise UsageError("weight_grid values must lie in [0, 1]")
        if not self.epsilon > 0.0:
            raise UsageError(f"epsilon must be positive, got {self.epsilon}")
        if self.bins < 1:
            raise UsageError(f"bins must be >= 1, got {self.bins}")
        if self.k < 1:
            raise UsageError(f"k must be >= 1, got {self.k}")
        if self.top_n < 1:
            raise UsageError(f"top_n must be >= 1, got {self.top_n}")
        if not self.initial_capital > 0.0:
            raise UsageError(f"initial_capital must be positive, got {self.initial_capital}")
        if self.cost_bps < 0.0:
            raise UsageError(f"cost_bps must be >= 0, got {self.cost_bps}")
        if self.runs < 1:
            raise UsageError(f"runs must be >= 1, got {self.runs}")
        if not 0.0 <= self.drop_fraction < 1.0:
            raise UsageError(f"drop_fraction must lie in [0, 1), got {self.drop_fraction}")
        if self.jobs < 1:
            raise UsageError(f"jobs must be >= 1, got {self.jobs}")
        if self.allow_gap_fill_days < 0:
            raise UsageError(f"allow_gap_fill_days must be >= 0, got {self.allow_gap_fill_days}")
        for label in (self.start, self.end):
            if label is not None:
                try:
                    Month.parse(label)
                except ValueError as exc:
                    raise UsageError(str(exc)) from None

    def variant_configs(self) -> list[SimilarityConfig]:
        return [SimilarityConfig(SimilarityVariant(name), self.weight) for name in self.variants]

    def start_month(self) -> Month | None:
        return Month.parse(self.start) if self.start else None

    def end_month(self) -> Month | None:
        return Month.parse(self.end) if self.end else None

    def output_path(self) -> Path:
        return Path(self.output_dir)

    def returns_path(self) -> Path:
        if self.returns_dir is not None:
            return Path(self.returns_dir)
        return self.output_path() / "returns"

    def casebase_path(self) -> Path:
        if self.casebase is not None:
            return Path(self.casebase)
        return self.output_path() / "casebase.jsonl"

    def resolved(self) -> dict[str, Any]:
        raw = dataclasses.asdict(self)
        raw["variants"] = list(self.variants)
        raw["ks"] = list(self.ks)
        raw["weight_grid"] = list(self.weight_grid)
        return raw


FIELD_NAMES = frozenset(f.name for f in dataclasses.fields(RunConfig))


def load_config(path: str | None, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """Build the run configuration.

    Precedence, lowest to highest: built-in defaults, the JSON file (the
    --config path or $CBRQ_CONFIG), then explicit flag overrides.
    """
    if path is None:
        path = os.environ.get(ENV_CONFIG) or None
    data: dict[str, Any] = {}
    if path is not None:
        config_path = Path(path)
        if not config_path.is_file():
            raise UsageError(f"config file not found: {config_path}")
        try:
            loaded = json.loads(config_path.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file {config_path} is not valid JSON: {exc}") from None
        if not isinstance(loaded, dict):
            raise UsageError(f"config file {config_path} must hold a JSON object")
        data = loaded
    unknown = sorted(set(data) - FIELD_NAMES)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    if overrides:
        data.update({key: value for key, value in overrides.items() if value is not None})
    try:
        return RunConfig(**data)
    except TypeError as exc:
        raise UsageError(f"invalid configuration: {exc}") from None


def write_resolved_config(config: RunConfig, path: str | Path) -> None:
    """Record the fully resolved configuration next to the outputs."""
    with Path(path).open("w") as handle:
        json.dump(config.resolved(), handle, indent=2, sort_keys=True)
        handle.write("\n")
