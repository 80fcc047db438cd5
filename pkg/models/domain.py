import logging
import math
from enum import Enum
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator, model_validator

logger = logging.getLogger(__name__)


class DomainShape(str, Enum):
    BOX = "box"
    BALL = "ball"


class Domain(BaseModel):
    """Container Ω sampled by a cell-centered grid over its bounding box"""

    model_config = ConfigDict(frozen=True)

    shape: DomainShape = DomainShape.BOX
    lower: Optional[Tuple[float, ...]] = None
    upper: Optional[Tuple[float, ...]] = None
    center: Optional[Tuple[float, ...]] = None
    radius: Optional[float] = None
    cells: Tuple[int, ...]
    margin: Optional[float] = None  # defaults to 4 x diameter

    @field_validator("cells")
    @classmethod
    def check_cells(cls, v):
        if len(v) not in (1, 2, 3):
            raise ValueError("dimension must be 1, 2 or 3")
        if any(c <= 0 for c in v):
            raise ValueError("cells per axis must be positive")
        return v

    @model_validator(mode="after")
    def check_geometry(self):
        n = len(self.cells)
        if self.shape == DomainShape.BOX:
            if self.lower is None or self.upper is None:
                raise ValueError("box domain needs lower and upper corners")
            if len(self.lower) != n or len(self.upper) != n:
                raise ValueError("box corners must match the grid dimension")
            if any(hi <= lo for lo, hi in zip(self.lower, self.upper)):
                raise ValueError("box extents must be positive")
        else:
            if self.center is None or self.radius is None:
                raise ValueError("ball domain needs center and radius")
            if len(self.center) != n:
                raise ValueError("ball center must match the grid dimension")
            if self.radius <= 0:
                raise ValueError("ball radius must be positive")
        if self.margin is not None and self.margin < 0:
            raise ValueError("exterior margin must be nonnegative")
        return self

    @classmethod
    def box(cls, lower, upper, cells, margin=None) -> "Domain":
        lower = tuple(float(x) for x in np.atleast_1d(lower))
        upper = tuple(float(x) for x in np.atleast_1d(upper))
        cells = tuple(int(c) for c in np.atleast_1d(cells))
        if len(cells) == 1 and len(lower) > 1:
            cells = cells * len(lower)
        return cls(shape=DomainShape.BOX, lower=lower, upper=upper, cells=cells, margin=margin)

    @classmethod
    def ball(cls, center, radius, cells, margin=None) -> "Domain":
        center = tuple(float(x) for x in np.atleast_1d(center))
        cells = tuple(int(c) for c in np.atleast_1d(cells))
        if len(cells) == 1 and len(center) > 1:
            cells = cells * len(center)
        return cls(shape=DomainShape.BALL, center=center, radius=float(radius), cells=cells, margin=margin)

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def bbox_lower(self) -> np.ndarray:
        if self.shape == DomainShape.BOX:
            return np.array(self.lower, dtype=float)
        return np.array(self.center, dtype=float) - self.radius

    @property
    def bbox_upper(self) -> np.ndarray:
        if self.shape == DomainShape.BOX:
            return np.array(self.upper, dtype=float)
        return np.array(self.center, dtype=float) + self.radius

    @property
    def extents(self) -> np.ndarray:
        return self.bbox_upper - self.bbox_lower

    @property
    def spacing(self) -> np.ndarray:
        return self.extents / np.array(self.cells, dtype=float)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def diameter(self) -> float:
        if self.shape == DomainShape.BALL:
            return 2.0 * self.radius
        return float(np.linalg.norm(self.extents))

    @property
    def volume(self) -> float:
        """Analytic measure of Ω"""
        if self.shape == DomainShape.BOX:
            return float(np.prod(self.extents))
        n = self.dim
        return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * self.radius ** n

    @property
    def exterior_margin(self) -> float:
        return 4.0 * self.diameter if self.margin is None else float(self.margin)

    def padding(self) -> Tuple[int, ...]:
        """Whole cells of exterior margin on each side, per axis"""
        return tuple(int(math.ceil(self.exterior_margin / h - 1e-9)) for h in self.spacing)

    def axis_centers(self, axis: int, pad: int = 0) -> np.ndarray:
        h = self.spacing[axis]
        k = np.arange(-pad, self.cells[axis] + pad)
        return self.bbox_lower[axis] + (k + 0.5) * h

    def cell_centers(self, padding: Tuple[int, ...] = None) -> np.ndarray:
        """Array of shape (*grid, n) with the cell centers of the (optionally padded) grid"""
        padding = padding or (0,) * self.dim
        axes = [self.axis_centers(k, padding[k]) for k in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def contains(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if self.shape == DomainShape.BOX:
            return np.all((points > self.bbox_lower) & (points < self.bbox_upper), axis=-1)
        d = np.linalg.norm(points - np.array(self.center), axis=-1)
        return d < self.radius

    def omega_mask(self, padding: Tuple[int, ...] = None) -> np.ndarray:
        """Cells of the (padded) grid whose centers lie in Ω"""
        return self.contains(self.cell_centers(padding))

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        return self.as_set().signed_distance(points)

    def as_set(self):
        from models.geometry import Ball, Box
        if self.shape == DomainShape.BOX:
            return Box(self.bbox_lower, self.bbox_upper)
        return Ball(self.center, self.radius)

    def scaled(self, factor: float) -> "Domain":
        margin = None if self.margin is None else self.margin * factor
        if self.shape == DomainShape.BOX:
            return Domain.box(self.bbox_lower * factor, self.bbox_upper * factor, self.cells, margin)
        return Domain.ball(np.array(self.center) * factor, self.radius * factor, self.cells, margin)

    def refined(self, factor: int = 2) -> "Domain":
        cells = tuple(c * factor for c in self.cells)
        return self.model_copy(update={"cells": cells})

    def describe(self) -> str:
        if self.shape == DomainShape.BOX:
            bounds = ",".join(f"{lo:g},{hi:g}" for lo, hi in zip(self.bbox_lower, self.bbox_upper))
            return f"box:{bounds}"
        return "ball:" + ",".join(f"{c:g}" for c in self.center) + f",{self.radius:g}"


def parse_domain(text: str, cells, margin: Optional[float] = None) -> Domain:
    """'box:lo,hi,...' (per-axis bounds) or 'ball:c_1,...,c_n,r'"""
    name, _, args = text.strip().partition(":")
    values = [float(x) for x in args.split(",") if x.strip()]
    name = name.lower()
    if name == "box":
        if not values or len(values) % 2:
            raise ValueError(f"box domain needs lower,upper pairs: '{text}'")
        return Domain.box(values[0::2], values[1::2], cells, margin)
    if name == "ball":
        if len(values) < 2:
            raise ValueError(f"ball domain needs a center and a radius: '{text}'")
        return Domain.ball(values[:-1], values[-1], cells, margin)
    raise ValueError(f"unknown domain shape '{name}'")
