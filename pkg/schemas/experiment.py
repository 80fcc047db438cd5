import math
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator


class ExperimentName(str, Enum):
    POINTWISE_S_LIMIT = "POINTWISE_S_LIMIT"
    GAMMA_EPS_LIMIT = "GAMMA_EPS_LIMIT"
    EXT_VANISHING = "EXT_VANISHING"
    ENERGY_GROWTH = "ENERGY_GROWTH"
    DENSITY_ESTIMATE = "DENSITY_ESTIMATE"
    LEVELSET_CONV = "LEVELSET_CONV"
    BBM_LIMIT = "BBM_LIMIT"
    ABS1D_LIMIT = "ABS1D_LIMIT"
    MULTIPLIER_ASYMPTOTICS = "MULTIPLIER_ASYMPTOTICS"


class Verdict(str, Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    INCONCLUSIVE = "INCONCLUSIVE"


class Experiment(BaseModel):
    name: ExperimentName
    grid: List[float] = Field(default_factory=list)
    tolerance: float = Field(0.05, gt=0)
    target: Optional[float] = None
    target_note: str = ""
    params: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("grid")
    @classmethod
    def check_monotone(cls, v):
        if len(v) > 1:
            d = [b - a for a, b in zip(v[:-1], v[1:])]
            if not (all(x > 0 for x in d) or all(x < 0 for x in d)):
                raise ValueError("parameter grid must be strictly monotone")
        return v

    def param(self, key: str, default=None):
        return self.params.get(key, default)

    model_config = ConfigDict(json_schema_extra={
        "example": {"name": "BBM_LIMIT", "grid": [0.3, 0.35, 0.4, 0.45, 0.48], "tolerance": 0.02}
    })


class SweepRow(BaseModel):
    parameter: float
    measured: Dict[str, float] = Field(default_factory=dict)
    reference: Optional[float] = None
    rel_error: Optional[float] = None
    flagged: bool = False
    note: str = ""


class RateFit(BaseModel):
    slope: float
    intercept: float
    residual: float
    model: str = "linear"


class SweepReport(BaseModel):
    experiment: ExperimentName
    rows: List[SweepRow] = Field(default_factory=list)
    fit: Optional[RateFit] = None
    extrapolated: Optional[float] = None
    richardson: Optional[float] = None
    target: Optional[float] = None
    tolerance: float
    checks: Dict[str, bool] = Field(default_factory=dict)
    verdict: Verdict = Verdict.INCONCLUSIVE
    flagged: bool = False  # extrapolation cross-check disagreed
    notes: List[str] = Field(default_factory=list)

    def decide(self) -> Verdict:
        """PASS iff nothing is flagged and every recorded check holds"""
        if self.flagged or any(r.flagged for r in self.rows) or not self.checks:
            return Verdict.INCONCLUSIVE
        return Verdict.PASS if all(self.checks.values()) else Verdict.FAIL

    def finalize(self) -> "SweepReport":
        self.verdict = self.decide()
        return self

    def summary_line(self) -> str:
        failed = [k for k, ok in self.checks.items() if not ok]
        extra = f" failed: {', '.join(failed)}" if failed else ""
        value = "" if self.extrapolated is None or math.isnan(self.extrapolated) else f" limit={self.extrapolated:.6g}"
        return f"{self.experiment.value}: {self.verdict.value}{value}{extra}"
