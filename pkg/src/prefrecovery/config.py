"""Flat ``key = value`` run configuration with command-line overrides.

Values stay strings until a typed getter reads them; every getter validates
and raises :class:`ConfigError` with the offending key.  The config hash covers
the fully resolved key set (defaults included), so two runs with equal hashes
are configured identically.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

DEFAULTS: dict[str, str] = {
    "space": "simplex",
    "dim": "3",
    "support_lo": "",
    "support_hi": "",
    "family": "expected_utility",
    "truth": "",
    "truth_file": "",
    "du_knots": "4",
    "du_eps": "0.05",
    "du_a": "0.5",
    "du_b": "2.0",
    "design": "exhaustive",
    "n": "200",
    "noise": "none",
    "kappa": "2.0",
    "slope": "1.0",
    "tie_rule": "lexicographic",
    "seed": "0",
    "method": "exact",
    "tie_break": "max_margin",
    "starts": "32",
    "iterations": "500",
    "step_decay": "0.9",
    "grid_m": "",
    "etas": "0.4,0.2,0.1",
    "delta": "0.1",
    "replications": "20",
    "n_schedule": "25,50,100,200,400,800",
    "probes": "20",
    "mc": "20000",
    "demo_n_max": "40",
    "demo_grid": "201",
    "radius": "0.05",
    "samples": "200",
}


@dataclass
class RunConfig:
    values: dict[str, str] = field(default_factory=lambda: dict(DEFAULTS))
    source: str = "<defaults>"

    @classmethod
    def parse(cls, text: str, source: str = "<text>") -> RunConfig:
        cfg = cls(source=source)
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
            key, _, value = line.partition("=")
            cfg.set(key.strip(), value.strip(), f"{source}:{lineno}")
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> RunConfig:
        return cls.parse(Path(path).read_text(), str(path))

    def set(self, key: str, value: str, where: str = "override") -> None:
        if key not in DEFAULTS:
            raise ConfigError(f"{where}: unknown config key {key!r}")
        self.values[key] = value

    def apply_overrides(self, items: list[str]) -> None:
        for item in items:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not key=value")
            key, _, value = item.partition("=")
            self.set(key.strip(), value.strip())

    # -- typed access --------------------------------------------------------
    def text(self, key: str) -> str:
        return self.values[key]

    def integer(self, key: str, minimum: int | None = None) -> int:
        try:
            value = int(self.values[key])
        except ValueError:
            raise ConfigError(f"{key} must be an integer, got {self.values[key]!r}") from None
        if minimum is not None and value < minimum:
            raise ConfigError(f"{key} must be >= {minimum}, got {value}")
        return value

    def number(self, key: str, lo: float | None = None, hi: float | None = None) -> float:
        try:
            value = float(self.values[key])
        except ValueError:
            raise ConfigError(f"{key} must be a number, got {self.values[key]!r}") from None
        if value != value or (lo is not None and value < lo) or (hi is not None and value > hi):
            raise ConfigError(f"{key}={value} outside [{lo}, {hi}]")
        return value

    def numbers(self, key: str) -> list[float]:
        text = self.values[key].strip()
        if not text:
            return []
        try:
            return [float(t) for t in text.split(",")]
        except ValueError:
            raise ConfigError(f"{key} must be a comma-separated list of numbers") from None

    def integers(self, key: str) -> list[int]:
        out = []
        for v in self.numbers(key):
            if v != int(v):
                raise ConfigError(f"{key} must list integers")
            out.append(int(v))
        return out

    def choice(self, key: str, options: tuple[str, ...]) -> str:
        value = self.values[key]
        if value not in options:
            raise ConfigError(f"{key} must be one of {', '.join(options)}; got {value!r}")
        return value

    # -- provenance ---------------------------------------------------------
    def canonical(self) -> str:
        return "".join(f"{k}={self.values[k]}\n" for k in sorted(self.values))

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]
