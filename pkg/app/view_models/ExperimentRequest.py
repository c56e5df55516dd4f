"""
Experiment configuration: flat `key = value` files with `#` comments,
command-line overrides and an emitter that writes the same format back
"""
from enum import Enum
from pathlib import Path
from typing import Any, Optional, Sequence

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from app.config import (
    AggregationScope,
    Arch,
    CentralityMeasure,
    Normalization,
    Order,
    RunMode,
    ScheduleMode,
    settings,
)
from app.engine.models import ModelConfig
from app.errors import ConfigError
from app.services.common.dataset_presets import DatasetPresets


class ExperimentConfig(BaseModel):
    """One training configuration; a run repeats it over `trials` seeded splits"""

    model_config = ConfigDict(extra="forbid", validate_assignment=False)

    dataset: str
    name: Optional[str] = None
    arch: Arch = Arch.GCN
    mode: RunMode = RunMode.CAMP
    num_layers: Optional[int] = Field(default=None, ge=1)
    hidden_dim: int = Field(default=settings.DEFAULT_HIDDEN_DIM, ge=1)
    measure: Optional[CentralityMeasure] = None
    order: Order = Order.DESCENDING
    sampling_p: float = Field(default=1.0, gt=0.0, le=1.0)
    lr: float = Field(default=settings.DEFAULT_LR, gt=0.0)
    dropout: float = Field(default=settings.DEFAULT_DROPOUT, ge=0.0, lt=1.0)
    weight_decay: float = Field(default=settings.DEFAULT_WEIGHT_DECAY, ge=0.0)
    batch_size: int = Field(default=settings.DEFAULT_BATCH_SIZE, ge=1)
    epochs: int = Field(default=settings.DEFAULT_EPOCHS, ge=1)
    trials: int = Field(default=settings.DEFAULT_TRIALS, ge=1)
    base_seed: int = Field(default=0, ge=0)
    aggregation_scope: AggregationScope = AggregationScope.ALL_NEIGHBORS
    normalization: Optional[Normalization] = None
    resample_per_epoch: bool = False
    use_presets: bool = False
    run_id: Optional[str] = None
    num_workers: int = Field(default=settings.NUM_WORKERS, ge=1)

    @model_validator(mode="before")
    @classmethod
    def _fill_presets(cls, values: Any) -> Any:
        if not isinstance(values, dict):
            return values
        use_presets = str(values.get("use_presets", False)).strip().lower() in ("true", "1", "yes")
        if not use_presets:
            return values

        dataset_name = values.get("name") or Path(str(values.get("dataset", ""))).name
        try:
            arch = Arch(str(values.get("arch", Arch.GCN.value)).lower())
        except ValueError:
            return values
        preset = DatasetPresets.get_preset(dataset_name, arch)
        if preset is None:
            return values

        filled = dict(values)
        layers, measure = preset
        filled.setdefault("num_layers", layers)
        if str(filled.get("mode", RunMode.CAMP.value)).lower() == RunMode.CAMP.value:
            filled.setdefault("measure", measure)
        return filled

    @model_validator(mode="after")
    def _check_consistency(self) -> "ExperimentConfig":
        if self.num_layers is None:
            self.num_layers = settings.DEFAULT_LAYERS
        if self.mode is RunMode.CAMP and self.measure is None:
            raise ValueError("measure is required when mode = camp")
        if self.mode is not RunMode.CAMP and self.measure is not None:
            raise ValueError(f"measure is only valid when mode = camp, got mode = {self.mode.value}")
        return self

    @property
    def dataset_name(self) -> str:
        return self.name or Path(self.dataset).name

    @property
    def schedule_mode(self) -> ScheduleMode:
        return ScheduleMode.RAMP if self.mode is RunMode.RAMP else ScheduleMode.CAMP

    def to_model_config(self) -> ModelConfig:
        return ModelConfig(
            arch=self.arch,
            num_layers=self.num_layers,
            hidden_dim=self.hidden_dim,
            dropout=self.dropout,
            aggregation_scope=self.aggregation_scope,
            normalization=self.normalization,
            sync=self.mode is RunMode.SYNC,
        )

    def with_overrides(self, **changes) -> "ExperimentConfig":
        """Validated copy with some keys replaced (used by sweeps)"""
        data = self.model_dump(exclude_none=True)
        data.update({k: v for k, v in changes.items()})
        data = {k: v for k, v in data.items() if v is not None}
        return build_config(data)

    def emit(self) -> str:
        """Serialize to the flat key/value format; parse_config_text(cfg.emit()) == cfg"""
        lines = []
        for key, value in self.model_dump().items():
            if value is None:
                continue
            if isinstance(value, Enum):
                value = value.value
            elif isinstance(value, bool):
                value = "true" if value else "false"
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.emit(), encoding="utf-8")
        return path


def _split_pair(raw: str, where: str) -> tuple[str, str]:
    if "=" not in raw:
        raise ConfigError(f"{where}: expected 'key = value', got '{raw.strip()}'")
    key, value = raw.split("=", 1)
    key = key.strip().lower().replace("-", "_")
    if not key:
        raise ConfigError(f"{where}: missing key")
    return key, value.strip()


def build_config(values: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(values)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or 'config'}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"Invalid experiment configuration: {problems}")


def parse_config_text(text: str, overrides: Optional[Sequence[str]] = None, source: str = "config") -> ExperimentConfig:
    """
    Parse flat `key = value` text. Blank lines and `#` comments are ignored;
    repeated keys are an error. Overrides (`key=value`) win over file values.
    """
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        key, value = _split_pair(content, f"{source} line {lineno}")
        if key in values:
            raise ConfigError(f"{source} line {lineno}: duplicate key '{key}'")
        if value:
            values[key] = value

    for override in overrides or ():
        key, value = _split_pair(override, "--override")
        if value:
            values[key] = value
        else:
            values.pop(key, None)

    return build_config(values)


def load_config(path: str | Path, overrides: Optional[Sequence[str]] = None) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"), overrides, source=path.name)
