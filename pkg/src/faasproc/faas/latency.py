from __future__ import annotations

import configparser
import math
import random
from dataclasses import dataclass, fields, replace
from pathlib import Path

COLD, WARM = "cold", "warm"


@dataclass(frozen=True)
class LatencyModel:
    """Startup-latency model for simulated function invocations (seconds).

    Startup delays are log-normal around their median; ``dispersion`` is the
    sigma of the underlying normal, so 0 makes every delay equal its median.
    ``dispatch_cost`` spaces out the invocations of one batch, which are
    issued one after another. ``setup_*`` is the worker wrapper's own setup
    time and ``result_delay`` the lag before a finished result becomes
    visible to the orchestrator (storage listing / upload).
    """

    cold_median: float = 0.0
    warm_median: float = 0.0
    dispersion: float = 0.0
    dispatch_cost: float = 0.0
    seed: int = 0
    eviction: float = 300.0
    setup_cold: float = 0.0
    setup_warm: float = 0.0
    result_delay: float = 0.0
    max_execution: float | None = None

    def __post_init__(self):
        if self.dispersion < 0:
            raise ValueError("dispersion must be >= 0")
        for f in ("cold_median", "warm_median", "dispatch_cost", "setup_cold", "setup_warm", "result_delay"):
            if getattr(self, f) < 0:
                raise ValueError(f"{f} must be >= 0")

    @classmethod
    def zero(cls, **overrides) -> "LatencyModel":
        return cls(**overrides)

    @classmethod
    def lambda_defaults(cls, **overrides) -> "LatencyModel":
        """Per-phase averages measured for warm and cold AWS Lambda invocations."""
        base = cls(
            cold_median=1.719,
            warm_median=0.258,
            setup_cold=0.052,
            setup_warm=0.046,
            result_delay=0.6,
        )
        return replace(base, **overrides)

    @classmethod
    def from_mapping(cls, values: dict) -> "LatencyModel":
        ms = lambda k, d=0.0: float(values.get(k, d)) / 1000.0  # noqa: E731
        max_exec = values.get("max_execution_s")
        return cls(
            cold_median=ms("cold_median_ms"),
            warm_median=ms("warm_median_ms"),
            dispersion=float(values.get("dispersion", 0.0)),
            dispatch_cost=ms("dispatch_cost_ms"),
            seed=int(values.get("seed", 0)),
            eviction=float(values.get("eviction_s", 300.0)),
            setup_cold=ms("setup_cold_ms"),
            setup_warm=ms("setup_warm_ms"),
            result_delay=ms("result_delay_ms"),
            max_execution=None if max_exec in (None, "") else float(max_exec),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "LatencyModel":
        """Read a ``key = value`` file (TOML-like; section headers optional)."""
        text = Path(path).read_text()
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        if not text.lstrip().startswith("["):
            text = "[sim]\n" + text
        parser.read_string(text)
        values = {}
        for section in parser.sections():
            for key, value in parser.items(section):
                values[key] = value.strip().strip('"')
        known = {
            "cold_median_ms", "warm_median_ms", "dispersion", "dispatch_cost_ms", "seed", "eviction_s",
            "setup_cold_ms", "setup_warm_ms", "result_delay_ms", "max_execution_s",
        }
        unknown = set(values) - known
        if unknown:
            raise ValueError(f"unknown simulator settings: {sorted(unknown)}")
        return cls.from_mapping(values)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def median(self, temperature: str) -> float:
        return self.cold_median if temperature == COLD else self.warm_median

    def startup(self, rng: random.Random, temperature: str) -> float:
        median = self.median(temperature)
        if self.dispersion == 0 or median == 0:
            return median
        return median * math.exp(self.dispersion * rng.gauss(0.0, 1.0))

    def setup(self, temperature: str) -> float:
        return self.setup_cold if temperature == COLD else self.setup_warm
