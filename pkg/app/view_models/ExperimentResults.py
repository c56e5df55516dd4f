from typing import Literal, Optional

from pydantic import BaseModel, Field, model_validator


class TrialResult(BaseModel):
    """Outcome of one seeded split; failed trials keep the epoch where training broke"""
    trial: int = Field(ge=0)
    seed: int
    status: Literal["ok", "failed"] = "ok"
    test_accuracy: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    best_valid_accuracy: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    best_epoch: Optional[int] = None
    failed_epoch: Optional[int] = None
    error: Optional[str] = None
    train_loss: list[float] = Field(default_factory=list)
    train_accuracy: list[float] = Field(default_factory=list)
    valid_accuracy: list[float] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_status(self) -> "TrialResult":
        if self.status == "ok" and self.test_accuracy is None:
            raise ValueError("successful trials need a test accuracy")
        return self

    @property
    def ok(self) -> bool:
        return self.status == "ok"


class AggregateResult(BaseModel):
    """Mean test accuracy and the sample s.d. scaled by 2/sqrt(T)"""
    mean: float
    std: float = Field(ge=0.0)
    scaled_std: float = Field(ge=0.0)
    num_trials: int = Field(ge=1)
    num_failed: int = Field(default=0, ge=0)
    failed_trials: list[int] = Field(default_factory=list)
    accuracies: list[float] = Field(default_factory=list)


class ExperimentSummary(BaseModel):
    """Contents of summary.json"""
    run_id: str
    dataset: str
    arch: str
    mode: str
    measure: Optional[str] = None
    num_layers: int
    sampling_p: float
    order: str
    result: AggregateResult
    # published accuracies in percent, when the dataset is known
    targets: Optional[dict] = None
    config: str
