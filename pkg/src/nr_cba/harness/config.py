"""Experiment configuration: dataclasses plus a YAML loader with field/line diagnostics."""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..adaptation import UtilityConfig
from ..channel import KINDS, LONG_DELAY_SPREAD, SHORT_DELAY_SPREAD, SPEED_PRESETS
from ..codebook import CodebookConfig
from ..errors import ConfigError
from ..fed import FederationConfig
from ..features import DEFAULT_SEQUENCE_LENGTH, IndicatorSchema
from ..rc import TrainConfig


@dataclass(frozen=True)
class Scenario:
    kind: str
    speed: float          # m/s
    delay_spread: float   # s
    weight: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown kind {self.kind!r}; expected one of {KINDS}", field="scenarios.kind")
        if self.speed < 0 or self.delay_spread <= 0 or self.weight < 0:
            raise ConfigError("speed and weight must be >= 0, delay_spread > 0", field="scenarios")

    @property
    def label(self) -> str:
        return f"{self.kind}/{self.speed * 3.6:g}kmh/{self.delay_spread * 1e9:g}ns"


def default_scenarios() -> tuple[Scenario, ...]:
    return tuple(Scenario(kind, speed, ds)
                 for kind in KINDS
                 for speed in SPEED_PRESETS.values()
                 for ds in (SHORT_DELAY_SPREAD, LONG_DELAY_SPREAD))


@dataclass(frozen=True)
class ExperimentConfig:
    codebook: CodebookConfig = field(default_factory=CodebookConfig)
    scenarios: tuple[Scenario, ...] = field(default_factory=default_scenarios)
    snr_grid_db: tuple[float, ...] = (0.0, 10.0, 20.0, 30.0, 40.0, 50.0)
    train_snr_db: tuple[float, float] = (0.0, 50.0)
    staleness_s: float = 5e-3
    sequence_length: int = DEFAULT_SEQUENCE_LENGTH
    n_rb: int = 26
    n_ue_antennas: int = 4
    samples_per_ue: int = 200
    val_samples: int = 200
    test_samples: int = 200
    eval_seeds: int = 20
    fed: FederationConfig = field(default_factory=FederationConfig)
    utility: UtilityConfig = field(default_factory=UtilityConfig)
    reservoir_size: int = 64
    reservoir_rho: float = 0.9
    reservoir_leak: float = 1.0
    reservoir_seed: int = 7
    knn_k: int = 5
    master_seed: int = 0

    def __post_init__(self):
        if not self.snr_grid_db:
            raise ConfigError("SNR grid must not be empty", field="snr_grid_db")
        if not self.scenarios:
            raise ConfigError("at least one scenario is required", field="scenarios")
        total = sum(s.weight for s in self.scenarios)
        if total <= 0:
            raise ConfigError("scenario weights must have a positive sum", field="scenarios")
        if self.sequence_length < 1:
            raise ConfigError("must be >= 1", field="sequence_length")
        if self.n_rb < 1 or self.n_ue_antennas < 2:
            raise ConfigError("need n_rb >= 1 and n_ue_antennas >= 2", field="n_ue_antennas")
        if min(self.samples_per_ue, self.val_samples, self.test_samples, self.eval_seeds) < 0:
            raise ConfigError("sample counts must be non-negative", field="samples_per_ue")
        if self.staleness_s < 0:
            raise ConfigError("must be non-negative", field="staleness_s")
        lo, hi = self.train_snr_db
        if lo > hi:
            raise ConfigError("low end above high end", field="train_snr_db")

    @property
    def mix_weights(self) -> tuple[float, ...]:
        total = sum(s.weight for s in self.scenarios)
        return tuple(s.weight / total for s in self.scenarios)

    @property
    def schema(self) -> IndicatorSchema:
        return IndicatorSchema(l_beams=self.codebook.l_beams)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["scenarios"] = [dataclasses.asdict(s) for s in self.scenarios]
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def model_digest(self) -> str:
        """Hash of the parts a checkpoint depends on: codebook, features and reservoir."""
        d = {"codebook": dataclasses.asdict(self.codebook), "schema": self.schema.to_dict(),
             "sequence_length": self.sequence_length,
             "reservoir": [self.reservoir_size, self.reservoir_rho, self.reservoir_leak, self.reservoir_seed]}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# YAML loading

_SECTIONS = {
    "codebook": CodebookConfig,
    "fed": FederationConfig,
    "train": TrainConfig,
    "utility": UtilityConfig,
}
_TOP_LEVEL = {f.name for f in dataclasses.fields(ExperimentConfig)} - {"codebook", "fed", "utility", "scenarios"}


def _line_index(text: str) -> dict[tuple[str, ...], int]:
    """Map key paths to 1-based line numbers for diagnostics."""
    lines: dict[tuple[str, ...], int] = {}

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = path + (str(k.value),)
                lines[key] = k.start_mark.line + 1
                walk(v, key)
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                key = path + (str(i),)
                lines[key] = v.start_mark.line + 1
                walk(v, key)

    try:
        walk(yaml.compose(text), ())
    except yaml.YAMLError:
        pass
    return lines


def _build(cls, data, path: str, lines):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError("expected a mapping", field=path, line=lines.get((path,)))
    names = {f.name: f for f in dataclasses.fields(cls)}
    for key in data:
        if key not in names and not (cls is UtilityConfig and key == "lambda"):
            raise ConfigError("unknown field", field=f"{path}.{key}", line=lines.get((path, key)))
    kwargs = {}
    for key, value in data.items():
        name = "lam" if (cls is UtilityConfig and key == "lambda") else key
        kwargs[name] = _coerce(names[name].type, value, f"{path}.{key}", lines.get((path, key)))
    try:
        return cls(**kwargs)
    except ConfigError as e:
        raise ConfigError(e.reason, field=f"{path}.{e.field}" if e.field else path, line=lines.get((path,))) from None
    except (TypeError, ValueError) as e:
        raise ConfigError(str(e), field=path, line=lines.get((path,))) from None


def _coerce(type_name, value, fieldname, line):
    t = str(type_name)
    try:
        if t == "int":
            if isinstance(value, bool) or float(value) != int(value):
                raise ValueError
            return int(value)
        if t == "float":
            return float(value)
        if t.startswith("tuple"):
            return tuple(float(v) for v in value)
        return value
    except (TypeError, ValueError):
        raise ConfigError(f"invalid value {value!r} for {t}", field=fieldname, line=line) from None


def config_from_dict(data: dict, text: str = "") -> ExperimentConfig:
    lines = _line_index(text) if text else {}
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", line=1)
    kwargs = {}
    for key, value in data.items():
        line = lines.get((key,))
        if key in ("codebook", "utility"):
            kwargs[key] = _build(_SECTIONS[key], value, key, lines)
        elif key == "fed":
            value = dict(value or {})
            train = _build(TrainConfig, value.pop("train", None), "fed.train", lines)
            fed = _build(FederationConfig, value, "fed", lines)
            kwargs["fed"] = dataclasses.replace(fed, train_cfg=train)
        elif key == "scenarios":
            kwargs["scenarios"] = _scenarios(value, lines)
        elif key in _TOP_LEVEL:
            ftype = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}[key]
            kwargs[key] = _coerce(ftype, value, key, line)
        else:
            raise ConfigError("unknown field", field=key, line=line)
    try:
        return ExperimentConfig(**kwargs)
    except ConfigError as e:
        raise ConfigError(e.reason, field=e.field,
                          line=lines.get((e.field,)) if e.field else None) from None


def _scenarios(value, lines) -> tuple[Scenario, ...]:
    if not isinstance(value, list):
        raise ConfigError("expected a list", field="scenarios", line=lines.get(("scenarios",)))
    out = []
    for i, item in enumerate(value):
        line = lines.get(("scenarios", str(i)))
        if not isinstance(item, dict) or "kind" not in item:
            raise ConfigError("each scenario needs at least 'kind'", field=f"scenarios[{i}]", line=line)
        unknown = set(item) - {"kind", "speed_kmh", "speed", "delay_spread_ns", "delay_spread", "weight"}
        if unknown:
            raise ConfigError(f"unknown keys {sorted(unknown)}", field=f"scenarios[{i}]", line=line)
        try:
            speed = float(item["speed"]) if "speed" in item else float(item.get("speed_kmh", 3.0)) / 3.6
            ds = (float(item["delay_spread"]) if "delay_spread" in item
                  else float(item.get("delay_spread_ns", SHORT_DELAY_SPREAD * 1e9)) * 1e-9)
            out.append(Scenario(str(item["kind"]), speed, ds, float(item.get("weight", 1.0))))
        except ConfigError as e:
            raise ConfigError(e.reason, field=f"scenarios[{i}]", line=line) from None
        except (TypeError, ValueError) as e:
            raise ConfigError(str(e), field=f"scenarios[{i}]", line=line) from None
    return tuple(out)


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {getattr(e, 'problem', e)}",
                          line=mark.line + 1 if mark else None) from None
    return config_from_dict(data, text)
