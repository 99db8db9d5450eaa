"""
JSON run configuration shared by the CLI subcommands.

A run is reproducible from its run config and seed alone: every field here
is plain JSON, and explicit CLI flags override what the file says.
"""
from dataclasses import asdict, dataclass, field
import json
import logging
from pathlib import Path
from typing import IO, List, Optional, Union

import jsonschema

from .core import OT_METHODS, SUBPROBLEM_METHODS, TwiConfig
from .errors import ConfigError
from .initializers import RunConfigInitializer
from .manager import ConfigManager
from .types import Cutoff
from .utils import resolve_cutoff

logger = logging.getLogger(__name__)

CONFIG_FILE = "twimpute.json"
SCHEMA_FILE = "twimpute.schema.json"

_cutoff = {"type": "number", "exclusiveMinimum": 0}

RUN_CONFIG_SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "$id": "urn:twimpute:run-config:1",
    "title": "twimpute run config",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "$schema": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "out": {"type": ["string", "null"]},
        "constraints": {"type": ["object", "null"], "required": ["kind"]},
        "twi": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "method": {"type": "string"},
                "init": {"type": ["string", "null"]},
                "p": {"type": "integer", "minimum": 1},
                "n1": _cutoff,
                "lambda": {"type": "number", "minimum": 0},
                "k": {"type": "number", "minimum": 1},
                "ot_method": {"enum": list(OT_METHODS)},
                "sinkhorn_epsilon": {"type": "number", "exclusiveMinimum": 0},
                "max_outer_iters": {"type": "integer", "minimum": 1},
                "tol_rel": {"type": "number", "exclusiveMinimum": 0},
                "subproblem_method": {"enum": list(SUBPROBLEM_METHODS)},
                "cutoffs": {"type": ["array", "null"], "items": _cutoff, "minItems": 1},
            },
        },
        "simulate": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "model": {"type": "string"},
                "n": {"type": "integer", "minimum": 10},
                "pattern": {"type": ["string", "integer"]},
            },
        },
        "benchmark": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "models": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                "patterns": {"type": "array", "items": {"type": ["string", "integer"]}, "minItems": 1},
                "methods": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                "reps": {"type": "integer", "minimum": 1},
                "n": {"type": "integer", "minimum": 10},
                "jobs": {"type": ["integer", "null"], "minimum": 1},
            },
        },
    },
}


@dataclass
class TwiSettings:
    method: str = "twi"
    init: Optional[str] = None
    p: int = 6
    n1: Cutoff = 0.4
    lam: float = 0.0
    k: float = 2.0
    ot_method: str = "exact"
    sinkhorn_epsilon: float = 1e-2
    max_outer_iters: int = 100
    tol_rel: float = 1e-6
    subproblem_method: str = "direct"
    cutoffs: Optional[List[Cutoff]] = None

    @classmethod
    def from_dict(cls, raw: dict) -> "TwiSettings":
        raw = dict(raw)
        if "lambda" in raw:
            raw["lam"] = raw.pop("lambda")
        return cls(**raw)

    def to_dict(self) -> dict:
        raw = asdict(self)
        raw["lambda"] = raw.pop("lam")
        return raw


@dataclass
class SimulateSettings:
    model: str = "ar"
    n: int = 1000
    pattern: Union[str, int] = "1"


@dataclass
class BenchmarkSettings:
    models: List[str] = field(default_factory=lambda: ["ar"])
    patterns: List[Union[str, int]] = field(default_factory=lambda: ["1"])
    methods: List[str] = field(default_factory=lambda: ["linear", "twi_lin"])
    reps: int = 100
    n: int = 1000
    jobs: Optional[int] = None


@dataclass
class RunConfig:
    """Settings for every subcommand, loaded from a JSON run config"""

    seed: int = 0
    out: Optional[str] = None
    constraints: Optional[dict] = None
    twi: TwiSettings = field(default_factory=TwiSettings)
    simulate: SimulateSettings = field(default_factory=SimulateSettings)
    benchmark: BenchmarkSettings = field(default_factory=BenchmarkSettings)

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        try:
            jsonschema.validate(raw, RUN_CONFIG_SCHEMA)
        except jsonschema.ValidationError as e:
            where = "/".join(str(part) for part in e.absolute_path) or "<root>"
            raise ConfigError(f"invalid run config at {where}: {e.message}") from None

        return cls(
            seed=raw.get("seed", 0),
            out=raw.get("out"),
            constraints=raw.get("constraints"),
            twi=TwiSettings.from_dict(raw.get("twi", {})),
            simulate=SimulateSettings(**raw.get("simulate", {})),
            benchmark=BenchmarkSettings(**raw.get("benchmark", {})),
        )

    @classmethod
    def from_file(cls, f: IO) -> "RunConfig":
        try:
            raw = json.load(f)
        except json.JSONDecodeError as e:
            raise ConfigError(f"run config is not valid JSON: {e}") from None
        return cls.from_dict(raw)

    @classmethod
    def from_path(cls, path: Union[Path, str]) -> "RunConfig":
        with Path(path).open("r") as f:
            return cls.from_file(f)

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "out": self.out,
            "constraints": self.constraints,
            "twi": self.twi.to_dict(),
            "simulate": asdict(self.simulate),
            "benchmark": asdict(self.benchmark),
        }

    def twi_config(self, n: int) -> TwiConfig:
        """The TwiConfig for a series of length `n`, cut-off resolved against n"""
        s = self.twi
        return TwiConfig(
            n1=resolve_cutoff(s.n1, n),
            p=s.p,
            lam=s.lam,
            cost_order=s.k,
            ot_method=s.ot_method,
            sinkhorn_epsilon=s.sinkhorn_epsilon,
            max_outer_iters=s.max_outer_iters,
            tol_rel=s.tol_rel,
            subproblem_method=s.subproblem_method,
        )


def default_run_config(**overrides) -> dict:
    """The run config `config init` writes, with top-level keys replaced by `overrides`"""
    raw = RunConfig().to_dict()
    unknown = set(overrides) - set(raw)
    if unknown:
        raise ConfigError(f"unknown run config keys: {sorted(unknown)}")
    raw.update(overrides)
    return raw


def make_manager(
    path: Union[Path, str] = CONFIG_FILE,
    schema_path: Optional[Union[Path, str]] = SCHEMA_FILE,
) -> ConfigManager[RunConfig]:
    """A manager for the run config at `path`, with its schema beside it"""
    initializer = RunConfigInitializer(default_run_config, RUN_CONFIG_SCHEMA)
    return ConfigManager(RunConfig, path, initializer, schema_path)


def load_run_config(path: Optional[Union[Path, str]]) -> RunConfig:
    """The run config at `path`, or the defaults when no path is given"""
    if path is None:
        return RunConfig()
    logger.debug(f"loading run config from {path}")
    return RunConfig.from_path(path)
