"""Experiment configuration: typed schema, strict JSON loading, hashing.

Unknown keys are rejected with a path-qualified message so a typo like
"algo.eta_gl" fails loudly instead of silently running defaults. The config
hash is the sha256 of the canonical JSON form of the fully resolved config
and is stamped into every output so reports can refuse to mix runs of
different configurations.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .algorithms import AlgoConfig
from .data import DatasetConfig
from .latency import (
    PDPE_SCENARIO,
    PDPE_STANDARD_PROFILE,
    PDPE_STRAGGLER_PROFILE,
    PE_PROFILE,
    PE_SCENARIO,
    LatencyProfile,
    LatencyScenario,
    LognormalParams,
)


class ConfigError(ValueError):
    """Invalid configuration content; message carries the offending path."""


@dataclass(frozen=True)
class ModelConfig:
    """Classifier architecture and loss options shared by all clients."""

    hidden: int = 32
    activation: str = "tanh"
    init_scale: float = 0.05
    distill_loss: str = "soft_ce"
    distill_temperature: float = 1.0

    def __post_init__(self) -> None:
        if self.hidden < 0:
            raise ValueError(f"hidden must be >= 0, got {self.hidden}")
        if self.init_scale < 0:
            raise ValueError(f"init_scale must be >= 0, got {self.init_scale}")
        if self.distill_loss not in ("soft_ce", "logit_mse"):
            raise ValueError(f"distill_loss must be soft_ce or logit_mse, got {self.distill_loss!r}")
        if self.distill_temperature <= 0:
            raise ValueError(f"distill_temperature must be > 0, got {self.distill_temperature}")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one simulated experiment needs, minus the trial seed."""

    algo: AlgoConfig
    dataset: DatasetConfig = DatasetConfig()
    latency: LatencyScenario = PDPE_SCENARIO
    model: ModelConfig = ModelConfig()
    budget: int = 5000
    eval_every: int = 10
    eval_cap: int = 2048
    trials: int = 10
    base_seed: int = 0
    data_seed: int | None = None
    name: str = ""

    def __post_init__(self) -> None:
        if self.budget < 1:
            raise ValueError(f"budget must be >= 1, got {self.budget}")
        if self.eval_every < 1:
            raise ValueError(f"eval_every must be >= 1, got {self.eval_every}")
        if self.eval_cap < 1:
            raise ValueError(f"eval_cap must be >= 1, got {self.eval_cap}")
        if self.trials < 1:
            raise ValueError(f"trials must be >= 1, got {self.trials}")

    def effective_data_seed(self) -> int:
        return self.base_seed if self.data_seed is None else self.data_seed


# ---- dict <-> config ---- #


def config_to_dict(config: ExperimentConfig) -> dict:
    """Plain-JSON form of a config (tuples become lists)."""
    return json.loads(json.dumps(dataclasses.asdict(config)))


def config_hash(config: ExperimentConfig) -> str:
    canonical = json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


_TUPLE_FIELDS = {"straggler_classes", "class_mixture"}


def _build_dataclass(cls: type, payload: Any, path: str):
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: expected an object, got {type(payload).__name__}")
    field_names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(payload) - field_names)
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {unknown}; known keys: {sorted(field_names)}")
    kwargs = {}
    for key, value in payload.items():
        if key in _TUPLE_FIELDS and isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_lognormal(payload: Any, path: str) -> LognormalParams:
    if isinstance(payload, (list, tuple)) and len(payload) == 2:
        try:
            return LognormalParams(mu=float(payload[0]), sigma=float(payload[1]))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if isinstance(payload, dict):
        return _build_dataclass(LognormalParams, payload, path)
    raise ConfigError(f"{path}: expected [mu, sigma] or an object with mu/sigma")


def _parse_profile(payload: Any, path: str, default: LatencyProfile) -> LatencyProfile:
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: expected an object")
    unknown = sorted(set(payload) - {"comm", "per_example", "overhead"})
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {unknown}")
    return LatencyProfile(
        comm=_parse_lognormal(payload["comm"], f"{path}.comm") if "comm" in payload else default.comm,
        per_example=(
            _parse_lognormal(payload["per_example"], f"{path}.per_example")
            if "per_example" in payload
            else default.per_example
        ),
        overhead=(
            _parse_lognormal(payload["overhead"], f"{path}.overhead")
            if "overhead" in payload
            else default.overhead
        ),
    )


def _parse_latency(payload: Any, path: str) -> LatencyScenario:
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: expected an object")
    known = {"mode", "standard", "straggler", "teacher_download_factor"}
    unknown = sorted(set(payload) - known)
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {unknown}; known keys: {sorted(known)}")
    mode = payload.get("mode")
    if mode not in ("pe", "pdpe"):
        raise ConfigError(f"{path}.mode: must be 'pe' or 'pdpe', got {mode!r}")
    if mode == "pe":
        standard = _parse_profile(payload.get("standard", {}), f"{path}.standard", PE_PROFILE)
        if "straggler" in payload:
            raise ConfigError(f"{path}.straggler: pe mode uses a single shared profile")
        straggler = standard
    else:
        standard = _parse_profile(
            payload.get("standard", {}), f"{path}.standard", PDPE_STANDARD_PROFILE
        )
        straggler = _parse_profile(
            payload.get("straggler", {}), f"{path}.straggler", PDPE_STRAGGLER_PROFILE
        )
    try:
        return LatencyScenario(
            mode=mode,
            standard_profile=standard,
            straggler_profile=straggler,
            teacher_download_factor=float(payload.get("teacher_download_factor", 1.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


_TOP_LEVEL_KEYS = {
    "algo",
    "dataset",
    "latency",
    "model",
    "budget",
    "eval_every",
    "eval_cap",
    "trials",
    "base_seed",
    "data_seed",
    "name",
}


def config_from_dict(payload: dict, path: str = "config") -> ExperimentConfig:
    if not isinstance(payload, dict):
        raise ConfigError(f"{path}: expected a JSON object at the top level")
    unknown = sorted(set(payload) - _TOP_LEVEL_KEYS)
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {unknown}; known keys: {sorted(_TOP_LEVEL_KEYS)}")
    if "algo" not in payload:
        raise ConfigError(f"{path}.algo: required section is missing")
    kwargs: dict[str, Any] = {
        "algo": _build_dataclass(AlgoConfig, payload["algo"], f"{path}.algo")
    }
    if "dataset" in payload:
        kwargs["dataset"] = _build_dataclass(DatasetConfig, payload["dataset"], f"{path}.dataset")
    if "latency" in payload:
        kwargs["latency"] = _parse_latency(payload["latency"], f"{path}.latency")
    if "model" in payload:
        kwargs["model"] = _build_dataclass(ModelConfig, payload["model"], f"{path}.model")
    for key in ("budget", "eval_every", "eval_cap", "trials", "base_seed", "data_seed", "name"):
        if key in payload:
            kwargs[key] = payload[key]
    try:
        return ExperimentConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def load_config(path: str | Path) -> ExperimentConfig:
    """Load and validate an experiment config from a JSON file."""
    file_path = Path(path)
    text = file_path.read_text(encoding="utf-8")
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{file_path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return config_from_dict(payload, path=str(file_path))


# ---- sweeps ---- #


@dataclass(frozen=True)
class SweepConfig:
    """Grid sweep: a base experiment plus per-parameter value lists."""

    base: ExperimentConfig
    base_dict: dict
    parameters: dict[str, list]
    objective: str = "straggler_acc"
    max_points: int = 64

    def __post_init__(self) -> None:
        if self.objective not in ("straggler_acc", "total_acc"):
            raise ValueError(f"objective must be straggler_acc or total_acc, got {self.objective!r}")
        if self.max_points < 1:
            raise ValueError("max_points must be >= 1")
        if not self.parameters:
            raise ValueError("sweep needs at least one parameter list")


def _set_path(payload: dict, dotted: str, value: Any, path: str) -> None:
    parts = dotted.split(".")
    node = payload
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"{path}: {dotted} does not address an object field")
    node[parts[-1]] = value


def sweep_points(sweep: SweepConfig) -> list[tuple[dict[str, Any], ExperimentConfig]]:
    """Expand the grid (outer product, capped) into concrete configs.

    Returns (assignment, config) pairs in deterministic order: parameter
    names sorted, values in listed order, rightmost parameter fastest.
    """
    names = sorted(sweep.parameters)
    combos: list[dict[str, Any]] = [{}]
    for name in names:
        values = sweep.parameters[name]
        if not isinstance(values, list) or not values:
            raise ConfigError(f"sweep.parameters.{name}: expected a nonempty list")
        combos = [{**combo, name: v} for combo in combos for v in values]
    if len(combos) > sweep.max_points:
        raise ConfigError(
            f"sweep grid has {len(combos)} points, above max_points={sweep.max_points}"
        )
    out = []
    for combo in combos:
        payload = json.loads(json.dumps(sweep.base_dict))
        for dotted, value in combo.items():
            _set_path(payload, dotted, value, "sweep")
        out.append((combo, config_from_dict(payload, path="sweep.base")))
    return out


def load_sweep(path: str | Path) -> SweepConfig:
    """Load a sweep file: {"base": {...}, "parameters": {...}, ...}."""
    file_path = Path(path)
    text = file_path.read_text(encoding="utf-8")
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{file_path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(payload, dict):
        raise ConfigError(f"{file_path}: expected a JSON object")
    known = {"base", "parameters", "objective", "max_points"}
    unknown = sorted(set(payload) - known)
    if unknown:
        raise ConfigError(f"{file_path}: unknown key(s) {unknown}; known keys: {sorted(known)}")
    if "base" not in payload or "parameters" not in payload:
        raise ConfigError(f"{file_path}: sweep file needs 'base' and 'parameters'")
    base = config_from_dict(payload["base"], path=f"{file_path}:base")
    try:
        return SweepConfig(
            base=base,
            base_dict=payload["base"],
            parameters=payload["parameters"],
            objective=payload.get("objective", "straggler_acc"),
            max_points=payload.get("max_points", 64),
        )
    except ValueError as exc:
        raise ConfigError(f"{file_path}: {exc}") from exc
