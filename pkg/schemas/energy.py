import math
from enum import Enum
from typing import Any, Dict, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from models.potential import QuarticWell


class EnergyTag(str, Enum):
    MM = "MM"
    F_INT = "F_int"
    F_EXT = "F_ext"
    F_FULL = "F_full"
    J_RAW = "J_raw"
    CAPILLARY_LOCAL = "CAPILLARY_LOCAL"
    CAPILLARY_FRAC = "CAPILLARY_FRAC"
    J_EPS_S = "J_eps_s"
    BOUNDARY_MODICA = "BOUNDARY_MODICA"
    ABS_1D = "ABS_1D"
    PHI_LINE = "PHI_LINE"
    G_SHARP = "G_SHARP"

    @property
    def is_set_functional(self) -> bool:
        return self in (EnergyTag.CAPILLARY_LOCAL, EnergyTag.CAPILLARY_FRAC, EnergyTag.PHI_LINE, EnergyTag.G_SHARP)


class LambdaSchedule(str, Enum):
    CONSTANT = "constant"  # λ = 1
    EXPONENTIAL = "exponential"  # λ_ε = e^{k/ε}
    LOGARITHMIC = "logarithmic"  # λ_ε = ε^{-1} |log ε|^{-1}


class EnergySpec(BaseModel):
    model_config = ConfigDict(
        arbitrary_types_allowed=True,
        frozen=True,
        json_schema_extra={"example": {"tag": "F_full", "eps": 0.05, "s": 0.25}},
    )

    tag: EnergyTag
    eps: float = Field(0.1, gt=0)
    s: float = Field(0.25, gt=0, lt=1)
    sigma: float = Field(1.0, ge=-1, le=1)
    k: float = Field(1.0, gt=0)
    c: float = 0.0  # line-tension coefficient
    schedule: LambdaSchedule = LambdaSchedule.CONSTANT
    well: Any = Field(default_factory=QuarticWell)
    boundary_well: Any = None

    @model_validator(mode="after")
    def check_regime(self):
        if self.tag in (EnergyTag.F_INT, EnergyTag.F_EXT, EnergyTag.F_FULL) and self.s == 0.5 and self.eps >= 1:
            raise ValueError("the s = 1/2 regime needs eps < 1")
        if self.schedule == LambdaSchedule.LOGARITHMIC and self.eps >= 1:
            raise ValueError("the logarithmic schedule needs eps < 1")
        return self

    def regime_weights(self):
        """(kinetic, potential) weights of the rescaled nonlocal functional"""
        eps, s = self.eps, self.s
        if s < 0.5:
            return 1.0, eps ** (-2 * s) / 2
        if s == 0.5:
            log = abs(math.log(eps))
            return 1.0 / log, 1.0 / (eps * log) / 2
        return eps ** (2 * s - 1), 1.0 / eps / 2

    def lambda_eps(self) -> float:
        if self.schedule == LambdaSchedule.EXPONENTIAL:
            return math.exp(self.k / self.eps)
        if self.schedule == LambdaSchedule.LOGARITHMIC:
            return 1.0 / (self.eps * abs(math.log(self.eps)))
        return 1.0


class EnergyBreakdown(BaseModel):
    tag: str
    total: float
    kinetic: float = 0.0
    potential: float = 0.0
    boundary: float = 0.0
    components: Dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_total(self):
        parts = self.kinetic + self.potential + self.boundary
        if not math.isclose(self.total, parts, rel_tol=1e-12, abs_tol=1e-300):
            raise ValueError("total must equal the sum of its parts")
        return self

    @classmethod
    def assemble(cls, tag, kinetic=0.0, potential=0.0, boundary=0.0, components=None) -> "EnergyBreakdown":
        kinetic, potential, boundary = float(kinetic), float(potential), float(boundary)
        return cls(tag=str(getattr(tag, "value", tag)), total=kinetic + potential + boundary,
                   kinetic=kinetic, potential=potential, boundary=boundary,
                   components={k: float(v) for k, v in (components or {}).items()})

    def csv_row(self, spec: Optional[EnergySpec] = None):
        eps = spec.eps if spec else ""
        s = spec.s if spec else ""
        sigma = spec.sigma if spec else ""
        k = spec.k if spec else ""
        return [self.tag, eps, s, sigma, k, self.kinetic, self.potential, self.boundary, self.total]


ENERGY_CSV_HEADER = ["tag", "eps", "s", "sigma", "k", "kinetic", "potential", "boundary", "total"]
