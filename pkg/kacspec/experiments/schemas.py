import math
from typing import Any, Dict, List, Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from kacspec import settings
from kacspec.errors import ConfigValidationError


def _finite_or_none(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, (list, tuple)):
        return [_finite_or_none(item) for item in value]
    if isinstance(value, dict):
        return {str(key): _finite_or_none(item) for key, item in value.items()}
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    s: float = Field(0.5, gt=0.0, lt=1.0)
    K: int = Field(20, ge=2)
    d: int = Field(1, ge=1, le=3)
    t: float = Field(1.0, gt=0.0)
    symbol: Literal["l1", "l2", "full", "mehler"] = "l1"
    order: int = Field(2, ge=0, le=6)
    half_width: Optional[float] = Field(None, gt=0.0)
    points: Optional[int] = Field(None, ge=4)
    tol: Optional[float] = Field(None, gt=0.0)
    seed: int = 0
    profile: Literal["quick", "full"] = settings.KACSPEC_PROFILE
    threads: Optional[int] = Field(None, ge=1)
    output_format: Literal["csv", "json"] = "csv"
    output: Optional[str] = None
    matrix_output: Optional[str] = None

    @field_validator("points")
    @classmethod
    def _power_of_two(cls, value: Optional[int]) -> Optional[int]:
        if value is not None and value & (value - 1):
            raise ValueError(f"grid points must be a power of two, got {value}")
        return value

    def echo(self) -> Dict[str, Any]:
        """Config as embedded in artifact headers; output paths are left out."""
        return self.model_dump(exclude={"output", "matrix_output"})


def build_config(**values: Any) -> RunConfig:
    try:
        return RunConfig(**{key: value for key, value in values.items() if value is not None})
    except ValidationError as exc:
        raise ConfigValidationError(str(exc)) from exc


class ExperimentCheck(BaseModel):
    name: str
    value: Optional[float] = None
    threshold: float
    passed: bool

    @field_validator("value", mode="before")
    @classmethod
    def _finite_value(cls, value: Any) -> Any:
        return _finite_or_none(value)


class ExperimentReport(BaseModel):
    experiment: str
    version: str = settings.KACSPEC["version"]
    config: Dict[str, Any] = Field(default_factory=dict)
    columns: List[str]
    rows: List[List[Optional[float]]] = Field(default_factory=list)
    checks: List[ExperimentCheck] = Field(default_factory=list)
    summary: Dict[str, Any] = Field(default_factory=dict)
    # secondary artifacts, e.g. the full operator matrix; never rendered with the report
    attachments: Dict[str, "ExperimentReport"] = Field(default_factory=dict, exclude=True)

    @field_validator("rows", mode="before")
    @classmethod
    def _finite_rows(cls, rows: Any) -> Any:
        return [[None if cell is None else _finite_or_none(float(cell)) for cell in row] for row in rows]

    @field_validator("summary", mode="before")
    @classmethod
    def _finite_summary(cls, summary: Any) -> Any:
        return {key: _finite_or_none(value) for key, value in dict(summary).items()}

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def failed_checks(self) -> List[str]:
        return [check.name for check in self.checks if not check.passed]


class ExperimentInfo(BaseModel):
    name: str
    description: str
    profiles: Dict[str, Dict[str, Any]] = Field(default_factory=dict)
    error: Optional[str] = None


class ExperimentListResponse(BaseModel):
    experiments: List[ExperimentInfo]
