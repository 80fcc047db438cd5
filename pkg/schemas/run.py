from enum import Enum
from typing import Optional

from pydantic import BaseModel, Field


class Command(str, Enum):
    PERIMETER = "perimeter"
    ENERGY = "energy"
    MINIMIZE = "minimize"
    SWEEP = "sweep"
    MULTIPLIER = "multiplier"
    REPORT = "report"


class RunConfig(BaseModel):
    command: Command
    config_path: Optional[str] = None
    output_dir: str = "output"
    threads: int = Field(1, ge=1)
    cache_dir: Optional[str] = None
