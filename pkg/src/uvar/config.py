"""Flat key-value run configuration.

The config format is deliberately primitive: one ``key = value`` pair per
line, ``#`` comments, dotted keys, no nesting. Overrides from the command
line use the same key space, so a run is fully described by one mapping.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .designs import DesignSpec
from .errors import ConfigError

__all__ = ["RunConfig", "parse_config_file", "parse_config_text"]

_KNOWN_KEYS = {
    "population.path",
    "population.id",
    "population.outcome",
    "population.covariates",
    "population.stratum",
    "population.cluster",
    "population.size",
    "population.log_outcome",
    "synth.units",
    "synth.covariates",
    "synth.coefficients",
    "synth.noise",
    "synth.family",
    "synth.seed",
    "synth.strata",
    "synth.clusters",
    "design.variant",
    "design.expected_n",
    "design.n",
    "design.n_per_stratum",
    "design.n_clusters",
    "design.n_units_per_cluster",
    "sample.path",
    "sample.column",
    "sample.seed",
    "run.methods",
    "run.replicates",
    "run.master_seed",
    "run.alphas",
    "run.output_dir",
    "run.include_tau2b",
    "run.fast_tau2a",
    "run.parallelism",
    "run.figures",
}

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def parse_config_text(text: str) -> dict:
    """Parse config text into a flat string-to-string mapping."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        values[key] = value
    return values


def parse_config_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"))


@dataclass
class RunConfig:
    """Typed view over the flat key-value mapping."""

    values: dict = field(default_factory=dict)

    def apply_overrides(self, overrides) -> "RunConfig":
        for item in overrides or ():
            if "=" not in item:
                raise ConfigError(f"override must look like key=value, got {item!r}")
            key, _, value = item.partition("=")
            key = key.strip()
            if key not in _KNOWN_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            self.values[key] = value.strip()
        return self

    # -- typed accessors ---------------------------------------------------

    def _get(self, key: str, default=None) -> Optional[str]:
        return self.values.get(key, default)

    def require(self, key: str) -> str:
        value = self._get(key)
        if value is None or value == "":
            raise ConfigError(f"missing required config key {key!r}")
        return value

    def get_int(self, key: str, default: Optional[int] = None) -> Optional[int]:
        raw = self._get(key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{key} must be an integer, got {raw!r}") from None

    def get_float(self, key: str, default: Optional[float] = None) -> Optional[float]:
        raw = self._get(key)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{key} must be a number, got {raw!r}") from None

    def get_bool(self, key: str, default: bool = False) -> bool:
        raw = self._get(key)
        if raw is None:
            return default
        lowered = raw.lower()
        if lowered in _TRUE:
            return True
        if lowered in _FALSE:
            return False
        raise ConfigError(f"{key} must be boolean-like, got {raw!r}")

    def get_list(self, key: str, default=()) -> list:
        raw = self._get(key)
        if raw is None:
            return list(default)
        return [item.strip() for item in raw.split(",") if item.strip()]

    def get_float_list(self, key: str, default=()) -> list:
        return [self._as_float(key, item) for item in self.get_list(key, default)]

    @staticmethod
    def _as_float(key, item):
        try:
            return float(item)
        except ValueError:
            raise ConfigError(f"{key} entries must be numbers, got {item!r}") from None

    # -- composites ---------------------------------------------------------

    def design_spec(self) -> DesignSpec:
        variant = self.require("design.variant").lower().replace("-", "_")
        if variant == "bernoulli":
            return DesignSpec.bernoulli(self._needed_float("design.expected_n"))
        if variant == "poisson":
            return DesignSpec.poisson(self._needed_float("design.expected_n"))
        if variant == "srswor":
            return DesignSpec.srswor(self._needed_int("design.n"))
        if variant == "stratified":
            return DesignSpec.stratified(self._needed_int("design.n_per_stratum"))
        if variant == "two_stage_cluster":
            return DesignSpec.two_stage_cluster(
                self._needed_int("design.n_clusters"),
                self._needed_int("design.n_units_per_cluster"),
            )
        raise ConfigError(f"unknown design.variant {variant!r}")

    def _needed_int(self, key: str) -> int:
        value = self.get_int(key)
        if value is None:
            raise ConfigError(f"missing required config key {key!r}")
        return value

    def _needed_float(self, key: str) -> float:
        value = self.get_float(key)
        if value is None:
            raise ConfigError(f"missing required config key {key!r}")
        return value

    def methods(self) -> tuple:
        methods = tuple(self.get_list("run.methods", default=("asy", "hd", "ij")))
        for method in methods:
            if method not in ("asy", "hd", "ij"):
                raise ConfigError(f"unknown method {method!r} in run.methods")
        return methods

    def alphas(self) -> tuple:
        alphas = tuple(self.get_float_list("run.alphas", default=(0.8, 0.9, 0.95)))
        for alpha in alphas:
            if not 0.0 < alpha < 1.0:
                raise ConfigError(f"run.alphas entries must lie in (0, 1), got {alpha}")
        return alphas

    def replicates(self) -> int:
        count = self.get_int("run.replicates", default=2)
        if count < 1:
            raise ConfigError(f"run.replicates must be >= 1, got {count}")
        return count
