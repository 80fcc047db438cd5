import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from models.domain import Domain

logger = logging.getLogger(__name__)


class FacetTag(str, Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"


@dataclass(frozen=True)
class InterfaceMesh:
    centers: np.ndarray  # (m, n)
    measures: np.ndarray  # (m,)
    normals: np.ndarray  # (m, n)
    tags: np.ndarray  # (m,) of FacetTag values

    def __post_init__(self):
        if np.any(self.measures <= 0):
            raise ValueError("facet measures must be positive")

    @classmethod
    def empty(cls, dim: int) -> "InterfaceMesh":
        return cls(np.zeros((0, dim)), np.zeros(0), np.zeros((0, dim)), np.zeros(0, dtype=object))

    @classmethod
    def concatenate(cls, meshes) -> "InterfaceMesh":
        meshes = list(meshes)
        return cls(
            np.concatenate([m.centers for m in meshes]),
            np.concatenate([m.measures for m in meshes]),
            np.concatenate([m.normals for m in meshes]),
            np.concatenate([m.tags for m in meshes]),
        )

    def __len__(self):
        return len(self.measures)

    def select(self, tag: FacetTag) -> "InterfaceMesh":
        keep = self.tags == tag.value
        return InterfaceMesh(self.centers[keep], self.measures[keep], self.normals[keep], self.tags[keep])

    def total(self, tag: FacetTag = None) -> float:
        if tag is None:
            return float(np.sum(self.measures))
        return float(np.sum(self.measures[self.tags == tag.value]))

    def rows(self):
        for c, m, t in zip(self.centers, self.measures, self.tags):
            yield [*map(float, c), float(m), str(t)]


@dataclass(frozen=True)
class VoxelSet:
    """Cells of a grid selected by a boolean mask"""

    mask: np.ndarray
    domain: Domain

    @property
    def points(self) -> np.ndarray:
        return self.domain.cell_centers()[self.mask]

    def __len__(self):
        return int(np.count_nonzero(self.mask))

    def is_empty(self) -> bool:
        return not self.mask.any()

    def measure(self) -> float:
        return len(self) * self.domain.cell_volume


@dataclass(frozen=True)
class BoundaryFacets:
    """Voxel faces separating Ω cells from the rest of the grid, in a fixed order"""

    domain: Domain
    cells: np.ndarray  # (m, n) grid index of the inner cell
    axes: np.ndarray  # (m,) axis normal to the face
    sides: np.ndarray  # (m,) -1 or +1
    centers: np.ndarray  # (m, n)
    measures: np.ndarray  # (m,)
    normals: np.ndarray  # (m, n) outward from Ω

    def __len__(self):
        return len(self.measures)

    @property
    def total(self) -> float:
        return float(np.sum(self.measures))

    def trace(self, values: np.ndarray) -> np.ndarray:
        """Outermost cell values of a grid array, one per facet"""
        return values[tuple(self.cells.T)]

    def mesh(self, keep: np.ndarray = None) -> InterfaceMesh:
        keep = np.ones(len(self), dtype=bool) if keep is None else keep
        tags = np.full(int(np.count_nonzero(keep)), FacetTag.BOUNDARY.value, dtype=object)
        return InterfaceMesh(self.centers[keep], self.measures[keep], self.normals[keep], tags)


@dataclass(frozen=True)
class BoundaryField:
    """Values v on the boundary facets of a domain"""

    values: np.ndarray
    facets: BoundaryFacets

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (len(self.facets),):
            raise ValueError(f"boundary field needs {len(self.facets)} values, got {values.shape}")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class PerimeterMeasurement:
    value: float
    tangential: bool = False
    lower_accuracy: bool = False
