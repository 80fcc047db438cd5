from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class SeedKind(str, Enum):
    VOXELIZED = "voxelized"
    LINEAR = "linear"
    CONSTANT = "constant"
    RECOVERY = "recovery"


class MinimizeConfig(BaseModel):
    step_size: float = Field(1.0, gt=0)
    min_step: float = Field(1e-14, gt=0)
    growth: float = Field(2.0, ge=1)
    shrink: float = Field(0.5, gt=0, lt=1)
    armijo: float = Field(1e-4, gt=0, lt=1)
    max_iter: int = Field(2000, ge=1)
    tol: float = Field(1e-6, gt=0)
    rel_energy_tol: float = Field(0.0, ge=0)
    perturb: bool = False
    perturb_amplitude: float = 1e-3
    seed: SeedKind = SeedKind.VOXELIZED
    seed_value: float = 0.0

    @model_validator(mode="after")
    def check_steps(self):
        if self.min_step > self.step_size:
            raise ValueError("min_step must not exceed step_size")
        return self

    model_config = ConfigDict(json_schema_extra={
        "example": {"step_size": 1.0, "max_iter": 500, "tol": 1e-6, "seed": "voxelized"}
    })


@dataclass
class IterationRecord:
    iteration: int
    energy: float
    grad_norm: float
    step: float


@dataclass
class MinimizeResult:
    field: object
    energy: float
    trace: List[IterationRecord] = field(default_factory=list)
    converged: bool = False
    reason: str = ""
    breakdown: Optional[object] = None
