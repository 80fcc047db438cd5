import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Union

import numpy as np

from models.domain import Domain
from models.geometry import GeometricSet

logger = logging.getLogger(__name__)

RANGE_TOLERANCE = 1e-12


class ValueRange(str, Enum):
    SIGNED = "[-1,1]"
    UNIT = "[0,1]"

    @property
    def bounds(self):
        return (-1.0, 1.0) if self is ValueRange.SIGNED else (0.0, 1.0)


ExteriorDatum = Union[GeometricSet, float, None]


@dataclass(frozen=True)
class ScalarField:
    """Cell-centered values on the bounding-box grid of a domain plus an exterior datum.

    Cells of the bounding box outside Ω (ball domains) carry the datum values and
    are never free variables.
    """

    values: np.ndarray
    domain: Domain
    exterior: ExteriorDatum = None
    value_range: ValueRange = ValueRange.SIGNED
    periodic: bool = False
    outer_radius: Optional[float] = None  # exterior restricted to |x| < outer_radius
    _mask: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != tuple(self.domain.cells):
            raise ValueError(f"field shape {values.shape} does not match grid {self.domain.cells}")
        lo, hi = self.value_range.bounds
        if values.size and (values.min() < lo - RANGE_TOLERANCE or values.max() > hi + RANGE_TOLERANCE):
            raise ValueError(f"field values leave the declared range {self.value_range.value}")
        values = np.clip(values, lo, hi)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self._mask is None:
            mask = self.domain.omega_mask()
            mask.setflags(write=False)
            object.__setattr__(self, "_mask", mask)

    @property
    def omega_mask(self) -> np.ndarray:
        return self._mask

    @property
    def dim(self) -> int:
        return self.domain.dim

    def omega_values(self) -> np.ndarray:
        return self.values[self._mask]

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return replace(self, values=values)

    def with_omega_values(self, free: np.ndarray) -> "ScalarField":
        values = np.array(self.values)
        values[self._mask] = free
        return self.with_values(values)

    def has_datum(self) -> bool:
        return self.exterior is not None

    def datum_at(self, points: np.ndarray) -> np.ndarray:
        """Exterior datum values at points"""
        if self.exterior is None:
            raise ValueError("field carries no exterior datum")
        points = np.asarray(points, dtype=float)
        if isinstance(self.exterior, GeometricSet):
            lo, hi = self.value_range.bounds
            return np.where(self.exterior.contains(points), hi, lo)
        return np.full(points.shape[:-1], float(self.exterior))

    def datum_levels(self) -> tuple:
        if self.exterior is None:
            return ()
        if isinstance(self.exterior, GeometricSet):
            return self.value_range.bounds
        return (float(self.exterior),)

    def is_indicator(self) -> bool:
        lo, hi = self.value_range.bounds
        v = self.omega_values()
        return bool(np.all((v == lo) | (v == hi)))
