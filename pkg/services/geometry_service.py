import logging
import math
from enum import Enum

import numpy as np
from scipy.spatial import cKDTree

from models.domain import Domain, DomainShape
from models.field import ScalarField, ValueRange
from models.geometry import GeometricSet, EmptySet, FullSpace
from models.interface import (
    BoundaryFacets, FacetTag, InterfaceMesh, PerimeterMeasurement, VoxelSet,
)
from utils.exceptions import ToolkitException, InvalidInputError, NumericalError

logger = logging.getLogger(__name__)

# offset used to test membership on either side of ∂Ω
SIDE_OFFSET = 1e-9


class PerimeterWhere(str, Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"


def _has_normals(E) -> bool:
    return isinstance(E, GeometricSet) and not isinstance(E, (EmptySet, FullSpace))


class GeometryService:

    @staticmethod
    def voxelize(E: GeometricSet, domain: Domain) -> ScalarField:
        """+1 on cells whose center lies in E, -1 elsewhere; exterior datum E"""
        logger.debug(f"Voxelizing {E.describe()} on {domain.cells}")
        inside = E.contains(domain.cell_centers())
        return ScalarField(np.where(inside, 1.0, -1.0), domain, exterior=E)

    @staticmethod
    def interior_facets(inside: np.ndarray, domain: Domain, E: GeometricSet = None) -> InterfaceMesh:
        """Faces between two Ω cells with different membership.

        With an analytic E the face measure is scaled by |ν_k| so the staircase
        sums to the length (area) of the smooth interface.
        """
        omega = domain.omega_mask()
        centers_all = domain.cell_centers()
        h = domain.spacing
        n = domain.dim
        centers, measures, normals = [], [], []
        for k in range(n):
            lo = [slice(None)] * n
            hi = [slice(None)] * n
            lo[k] = slice(None, -1)
            hi[k] = slice(1, None)
            lo, hi = tuple(lo), tuple(hi)
            hit = omega[lo] & omega[hi] & (inside[lo] != inside[hi])
            if not hit.any():
                continue
            c = centers_all[lo][hit].copy()
            c[:, k] += h[k] / 2
            outward = np.where(inside[lo][hit], 1.0, -1.0)
            nu = np.zeros_like(c)
            nu[:, k] = outward
            area = np.full(len(c), domain.cell_volume / h[k])
            if E is not None and _has_normals(E):
                analytic = E.normal(c)
                good = np.all(np.isfinite(analytic), axis=-1) & (np.abs(analytic[:, k]) > 1e-12)
                area = np.where(good, area * np.abs(np.where(good, analytic[:, k], 1.0)), area)
                nu = np.where(good[:, None], analytic, nu)
            centers.append(c)
            measures.append(area)
            normals.append(nu)
        if not centers:
            return InterfaceMesh.empty(n)
        centers = np.concatenate(centers)
        tags = np.full(len(centers), FacetTag.INTERIOR.value, dtype=object)
        return InterfaceMesh(centers, np.concatenate(measures), np.concatenate(normals), tags)

    @staticmethod
    def boundary_facets(domain: Domain) -> BoundaryFacets:
        """Outer faces of the Ω cells, ordered by axis, side and cell index"""
        n = domain.dim
        omega = domain.omega_mask()
        padded = np.pad(omega, 1, constant_values=False)
        centers_all = domain.cell_centers()
        h = domain.spacing
        curved = domain.shape == DomainShape.BALL and n > 1
        cells, axes, sides, centers, measures, normals = [], [], [], [], [], []
        for k in range(n):
            for side in (-1, 1):
                neighbour = np.roll(padded, -side, axis=k)[tuple(slice(1, -1) for _ in range(n))]
                hit = omega & ~neighbour
                index = np.argwhere(hit)
                if len(index) == 0:
                    continue
                c = centers_all[hit].copy()
                c[:, k] += side * h[k] / 2
                nu = np.zeros_like(c)
                nu[:, k] = side
                area = np.full(len(c), domain.cell_volume / h[k])
                if curved:
                    analytic = domain.as_set().normal(c)
                    area = area * np.maximum(np.abs(analytic[:, k]), 1e-12)
                    nu = analytic
                cells.append(index)
                axes.append(np.full(len(c), k))
                sides.append(np.full(len(c), side))
                centers.append(c)
                measures.append(area)
                normals.append(nu)
        return BoundaryFacets(domain, np.concatenate(cells), np.concatenate(axes), np.concatenate(sides),
                              np.concatenate(centers), np.concatenate(measures), np.concatenate(normals))

    @staticmethod
    def contact_measure(facets: BoundaryFacets, values: np.ndarray) -> float:
        """H^{n-2} of the jump set of a facet-wise boundary field.

        Facets touching along a vertex (2D) or an edge (3D) with different values
        contribute one point or the edge length.
        """
        n = facets.domain.dim
        if n not in (2, 3):
            raise InvalidInputError("contact measure needs n = 2 or 3")
        h = facets.domain.spacing
        lower = facets.domain.bbox_lower
        keys, owners, lengths = [], [], []
        ids = np.arange(len(facets))
        for k in range(n):
            sel = facets.axes == k
            if not sel.any():
                continue
            tangent = [j for j in range(n) if j != k]
            for j in tangent:
                for sign in (-1, 1):
                    points = facets.centers[sel].copy()
                    points[:, j] += sign * h[j] / 2
                    keys.append(np.rint((points - lower) / (h / 2)).astype(np.int64))
                    owners.append(ids[sel])
                    if n == 2:
                        lengths.append(np.ones(int(sel.sum())))
                    else:
                        m = [t for t in tangent if t != j][0]
                        lengths.append(np.full(int(sel.sum()), h[m]))
        keys = np.concatenate(keys)
        owners = np.concatenate(owners)
        lengths = np.concatenate(lengths)
        _, group = np.unique(keys, axis=0, return_inverse=True)
        group = group.ravel()
        order = np.argsort(group, kind="stable")
        group, owners, lengths = group[order], owners[order], lengths[order]
        starts = np.flatnonzero(np.r_[True, group[1:] != group[:-1]])
        v = np.asarray(values, dtype=float)[owners]
        vmin = np.minimum.reduceat(v, starts)
        vmax = np.maximum.reduceat(v, starts)
        count = np.diff(np.r_[starts, len(group)])
        jump = (count > 1) & (vmax > vmin)
        return float(np.sum(lengths[starts][jump]))

    @staticmethod
    def _boundary_samples(domain: Domain, samples: int = None):
        """Quadrature points, weights and outward normals on ∂Ω"""
        n = domain.dim
        if n == 1:
            points = np.array([[domain.bbox_lower[0]], [domain.bbox_upper[0]]])
            return points, np.ones(2), np.array([[-1.0], [1.0]]), 0.0
        if domain.shape == DomainShape.BALL:
            center = np.array(domain.center)
            r = domain.radius
            if n == 2:
                m = samples or 8192
                phi = (np.arange(m) + 0.5) * 2 * math.pi / m
                nu = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
                return center + r * nu, np.full(m, 2 * math.pi * r / m), nu, 2 * math.pi * r / m
            m = samples or 512
            mu = -1 + (np.arange(m) + 0.5) * 2 / m
            phi = (np.arange(2 * m) + 0.5) * math.pi / m
            MU, PHI = np.meshgrid(mu, phi, indexing="ij")
            rho = np.sqrt(1 - MU ** 2)
            nu = np.stack([rho * np.cos(PHI), rho * np.sin(PHI), MU], axis=-1).reshape(-1, 3)
            weight = r * r * (2 / m) * (math.pi / m)
            return center + r * nu, np.full(len(nu), weight), nu, r * math.pi / m
        m = samples or (8192 if n == 2 else 512)
        lower, upper = domain.bbox_lower, domain.bbox_upper
        points, weights, normals = [], [], []
        spacing = 0.0
        for k in range(n):
            tangent = [j for j in range(n) if j != k]
            axes = [lower[j] + (np.arange(m) + 0.5) * (upper[j] - lower[j]) / m for j in tangent]
            mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n - 1)
            area = float(np.prod([(upper[j] - lower[j]) / m for j in tangent]))
            spacing = max(spacing, max((upper[j] - lower[j]) / m for j in tangent))
            for side, plane in ((-1, lower[k]), (1, upper[k])):
                p = np.empty((len(mesh), n))
                p[:, tangent] = mesh
                p[:, k] = plane
                nu = np.zeros((len(mesh), n))
                nu[:, k] = side
                points.append(p)
                weights.append(np.full(len(mesh), area))
                normals.append(nu)
        return np.concatenate(points), np.concatenate(weights), np.concatenate(normals), spacing

    @staticmethod
    def measure_perimeter(E: GeometricSet, omega: Domain, where: PerimeterWhere) -> PerimeterMeasurement:
        """H^{n-1}(∂E ∩ Ω) from facets, or H^{n-1}(∂E ∩ ∂Ω) by sampling ∂Ω"""
        where = PerimeterWhere(where)
        logger.info(f"Measuring {where.value} perimeter of {E.describe()} in {omega.describe()}")

        try:
            if where == PerimeterWhere.INTERIOR:
                inside = E.contains(omega.cell_centers())
                mesh = GeometryService.interior_facets(inside, omega, E)
                value = mesh.total()
                logger.info(f"Interior perimeter: {value:.10g} from {len(mesh)} facets")
                return PerimeterMeasurement(value)

            points, weights, normals, spacing = GeometryService._boundary_samples(omega)
            step = SIDE_OFFSET * max(omega.diameter, 1.0)
            inner = E.contains(points - step * normals)
            outer = E.contains(points + step * normals)
            mismatch = inner != outer
            value = float(np.sum(weights[mismatch]))

            tangential = False
            if _has_normals(E) and omega.dim > 1:
                with np.errstate(invalid="ignore"):
                    near = np.abs(E.signed_distance(points)) < spacing / 2
                    if np.any(near & ~mismatch):
                        candidates = near & ~mismatch
                        dots = np.abs(np.sum(E.normal(points[candidates]) * normals[candidates], axis=-1))
                        tangential = bool(np.any(dots > 0.999))
            if tangential:
                logger.warning(f"∂E meets ∂Ω tangentially for {E.describe()}; boundary perimeter may be unreliable")
            logger.info(f"Boundary perimeter: {value:.10g}")
            return PerimeterMeasurement(value, tangential=tangential)

        except ToolkitException:
            raise
        except Exception as e:
            logger.error(f"Failed to measure perimeter: {str(e)}", exc_info=True)
            raise NumericalError("Failed to measure perimeter")

    @staticmethod
    def classical_perimeter(E: GeometricSet, omega: Domain, where: PerimeterWhere) -> float:
        """Per(E, Ω) or Per(E, ∂Ω)"""
        return GeometryService.measure_perimeter(E, omega, where).value

    @staticmethod
    def interface_mesh(E: GeometricSet, omega: Domain) -> InterfaceMesh:
        """Facets of ∂E inside Ω plus the Ω faces where E meets its complement across ∂Ω"""
        inside = E.contains(omega.cell_centers())
        interior = GeometryService.interior_facets(inside, omega, E)
        facets = GeometryService.boundary_facets(omega)
        h = omega.spacing
        across = facets.centers + (facets.sides * h[facets.axes] / 2)[:, None] * np.eye(omega.dim)[facets.axes]
        keep = facets.trace(inside) != E.contains(across)
        if not keep.any():
            return interior
        return InterfaceMesh.concatenate([interior, facets.mesh(keep)])

    @staticmethod
    def level_set_region(u: ScalarField, theta: float) -> VoxelSet:
        """Ω cells with |u| < θ (|2u - 1| < θ for [0,1] fields)"""
        if not 0 < theta < 1:
            raise InvalidInputError("theta must lie in (0, 1)")
        values = u.values if u.value_range == ValueRange.SIGNED else 2 * u.values - 1
        return VoxelSet(u.omega_mask & (np.abs(values) < theta), u.domain)

    @staticmethod
    def hausdorff_distance(A, B) -> float:
        """One-sided sup over A of the distance to the nearest point of B"""
        a = A.points if isinstance(A, VoxelSet) else np.asarray(A, dtype=float)
        b = B.centers if isinstance(B, InterfaceMesh) else np.asarray(B, dtype=float)
        if len(a) == 0:
            return 0.0
        if len(b) == 0:
            logger.warning("Hausdorff distance to an empty interface is infinite")
            return math.inf
        dist, _ = cKDTree(b).query(a)
        return float(np.max(dist))

    @staticmethod
    def density_fraction(u: ScalarField, theta2: float, center, R: float) -> float:
        """|{u > θ2} ∩ B_R| / |B_R| by cell counting"""
        center = np.atleast_1d(np.asarray(center, dtype=float))
        domain = u.domain
        if R <= 0:
            raise InvalidInputError("radius must be positive")
        if center.shape != (domain.dim,):
            raise InvalidInputError("center must match the field dimension")
        tol = 1e-12 * domain.diameter
        if np.any(center - R < domain.bbox_lower - tol) or np.any(center + R > domain.bbox_upper + tol):
            raise InvalidInputError(f"ball of radius {R:g} leaves the sampled region")
        in_ball = np.linalg.norm(domain.cell_centers() - center, axis=-1) < R
        total = int(np.count_nonzero(in_ball))
        if total == 0:
            raise InvalidInputError("ball contains no cell centers")
        return int(np.count_nonzero(in_ball & (u.values > theta2))) / total
