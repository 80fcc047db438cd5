import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.signal import fftconvolve

from config import settings
from models.domain import Domain
from utils.quadrature import sphere_directions

logger = logging.getLogger(__name__)


class KernelMode(str, Enum):
    SQUARED = "squared"
    ABSOLUTE = "absolute"
    SET = "set"


class NearRule(str, Enum):
    EXACT = "exact"  # cell-pair integrals, piecewise-constant fields, s < 1/2
    TAYLOR = "taylor"  # second-order consistent for smooth fields
    TAYLOR_ABS = "taylor_abs"  # first-order consistent, absolute differences


class Part(str, Enum):
    INTERIOR = "interior"
    EXTERIOR = "exterior"
    FULL = "full"


@dataclass(frozen=True)
class KernelSpec:
    s: float
    n: int
    mode: KernelMode = KernelMode.SQUARED
    truncation: Optional[float] = None

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise ValueError("kernel dimension must be 1, 2 or 3")
        if self.mode == KernelMode.SET:
            if not 0 < self.s < 0.5:
                raise ValueError("set interactions need s in (0, 1/2)")
        elif not 0 < self.s < 1:
            raise ValueError("s must lie in (0, 1)")
        if self.truncation is not None and self.truncation <= 0:
            raise ValueError("truncation radius must be positive")

    @property
    def exponent(self) -> float:
        return self.n + 2 * self.s

    @property
    def default_rule(self) -> NearRule:
        if self.mode == KernelMode.ABSOLUTE:
            return NearRule.TAYLOR_ABS
        if self.mode == KernelMode.SET or self.s < 0.5:
            return NearRule.EXACT
        return NearRule.TAYLOR


class PairWeightTable:
    """Translation-invariant cell-pair weights over the margin-extended grid of a domain.

    stencil[o + E - 1] holds w for the cell offset o, where E is the extended
    grid shape; w(0) = 0.
    """

    def __init__(self, domain: Domain, s: float, rule: NearRule, padding: Tuple[int, ...],
                 stencil: np.ndarray, truncation: Optional[float] = None):
        self.domain = domain
        self.s = float(s)
        self.rule = rule
        self.padding = tuple(padding)
        self.truncation = truncation
        self.extended_shape = tuple(c + 2 * p for c, p in zip(domain.cells, self.padding))
        expected = tuple(2 * e - 1 for e in self.extended_shape)
        if stencil.shape != expected:
            raise ValueError(f"stencil shape {stencil.shape} does not match {expected}")
        self.stencil = stencil
        self._flat = stencil.ravel()
        self._strides = np.array([int(np.prod(expected[k + 1:])) for k in range(len(expected))], dtype=np.int64)
        self._center = int(np.dot(np.array(self.extended_shape) - 1, self._strides))

        mask = domain.omega_mask()
        self.omega_index = np.argwhere(mask) + np.array(self.padding)
        self._omega_keys = self.omega_index.astype(np.int64) @ self._strides
        self._dense = None

    @property
    def n_omega(self) -> int:
        return len(self.omega_index)

    def extended_centers(self) -> np.ndarray:
        return self.domain.cell_centers(self.padding)

    def extended_omega_mask(self) -> np.ndarray:
        return self.domain.omega_mask(self.padding)

    def extended_bounds(self):
        h = self.domain.spacing
        pad = np.array(self.padding)
        return self.domain.bbox_lower - pad * h, self.domain.bbox_upper + pad * h

    def keys(self, index: np.ndarray) -> np.ndarray:
        return np.asarray(index, dtype=np.int64) @ self._strides

    def weights_between(self, keys_a: np.ndarray, keys_b: np.ndarray) -> np.ndarray:
        return self._flat[keys_a[:, None] - keys_b[None, :] + self._center]

    def _blocks(self, rows: int, columns: int):
        size = max(1, min(settings.BLOCK_SIZE, int(4_000_000 // max(columns, 1))))
        return [slice(i, min(i + size, rows)) for i in range(0, rows, size)]

    def _map_blocks(self, func: Callable, blocks):
        if settings.THREADS > 1 and len(blocks) > 1:
            with ThreadPoolExecutor(max_workers=settings.THREADS) as pool:
                return list(pool.map(func, blocks))
        return [func(b) for b in blocks]

    def interior_matrix(self) -> Optional[np.ndarray]:
        """Dense Ω×Ω weights, kept only for small grids"""
        if self._dense is None and self.n_omega <= settings.DENSE_CACHE_LIMIT:
            self._dense = self.weights_between(self._omega_keys, self._omega_keys)
        return self._dense

    def _interior_block(self, block: slice) -> np.ndarray:
        dense = self.interior_matrix()
        if dense is not None:
            return dense[block]
        return self.weights_between(self._omega_keys[block], self._omega_keys)

    def interior_rows(self, values: np.ndarray, absolute: bool = False) -> np.ndarray:
        """r_i = Σ_j w_ij φ(u_i - u_j) with φ the square or the absolute value"""
        values = np.asarray(values, dtype=float)

        def run(block):
            diff = values[block, None] - values[None, :]
            phi = np.abs(diff) if absolute else diff * diff
            return np.sum(self._interior_block(block) * phi, axis=1)

        return np.concatenate(self._map_blocks(run, self._blocks(self.n_omega, self.n_omega)))

    def interior_cross_rows(self, inside: np.ndarray) -> np.ndarray:
        """a_i = Σ_{j ∉ inside} w_ij for every Ω cell i"""
        outside = (~np.asarray(inside, dtype=bool)).astype(float)

        def run(block):
            return np.sum(self._interior_block(block) * outside[None, :], axis=1)

        return np.concatenate(self._map_blocks(run, self._blocks(self.n_omega, self.n_omega)))

    def interior_gradient(self, values: np.ndarray) -> np.ndarray:
        """∂/∂u_i of Σ_ij w_ij (u_i - u_j)^2, i.e. 4 Σ_j w_ij (u_i - u_j)"""
        values = np.asarray(values, dtype=float)

        def run(block):
            diff = values[block, None] - values[None, :]
            return 4.0 * np.sum(self._interior_block(block) * diff, axis=1)

        return np.concatenate(self._map_blocks(run, self._blocks(self.n_omega, self.n_omega)))

    def sums_at(self, keys_rows: np.ndarray, target: np.ndarray) -> np.ndarray:
        """Σ_{j in target} w(i - j) for the cells with the given keys, in a fixed blocked order"""
        target = np.asarray(target, dtype=bool)
        target_keys = self.keys(np.argwhere(target))
        if len(target_keys) == 0 or len(keys_rows) == 0:
            return np.zeros(len(keys_rows))
        if len(keys_rows) * len(target_keys) > settings.DIRECT_PAIR_LIMIT:
            conv = np.maximum(fftconvolve(self.stencil, target.astype(float), mode="valid"), 0.0)
            return conv.ravel()[self._unravel_extended(keys_rows)]

        def run(block):
            return np.sum(self.weights_between(keys_rows[block], target_keys), axis=1)

        return np.concatenate(self._map_blocks(run, self._blocks(len(keys_rows), len(target_keys))))

    def _unravel_extended(self, keys: np.ndarray) -> np.ndarray:
        index = np.zeros((len(keys), len(self.extended_shape)), dtype=np.int64)
        rest = np.asarray(keys, dtype=np.int64)
        for k, stride in enumerate(self._strides):
            index[:, k] = rest // stride
            rest = rest % stride
        return np.ravel_multi_index(index.T, self.extended_shape)

    @property
    def omega_keys(self) -> np.ndarray:
        return self._omega_keys

    def tail_sums(self, label_fn: Callable[[np.ndarray], np.ndarray], levels: Sequence[float],
                  outer_radius: Optional[float] = None, shells: int = 28) -> np.ndarray:
        """Kernel mass beyond the extended box seen from each Ω cell, split by datum level.

        Along each quadrature direction the region past the box is cut into
        geometric shells; each shell carries the exact radial mass of
        |z|^{-n-2s} and the datum level found at its geometric midpoint.
        """
        levels = list(levels)
        n = self.domain.dim
        out = np.zeros((len(levels), self.n_omega))
        if self.truncation is not None:
            return out
        lower, upper = self.extended_bounds()
        dirs, dir_weights = sphere_directions(n)
        points = self.domain.cell_centers()[self.domain.omega_mask()]
        two_s = 2 * self.s
        volume = self.domain.cell_volume
        chunk = max(1, 200_000 // (len(dirs) * shells))

        for start in range(0, len(points), chunk):
            x = points[start:start + chunk]  # (c, n)
            with np.errstate(divide="ignore", invalid="ignore"):
                to_upper = (upper[None, None, :] - x[:, None, :]) / dirs[None, :, :]
                to_lower = (lower[None, None, :] - x[:, None, :]) / dirs[None, :, :]
            exit_dist = np.where(dirs[None, :, :] > 0, to_upper, np.where(dirs[None, :, :] < 0, to_lower, np.inf))
            rho = np.min(exit_dist, axis=-1)  # (c, d)
            if outer_radius is None:
                rho_out = np.full_like(rho, np.inf)
            else:
                xd = np.einsum("cn,dn->cd", x, dirs)
                disc = xd ** 2 - np.sum(x * x, axis=-1)[:, None] + outer_radius ** 2
                rho_out = -xd + np.sqrt(np.maximum(disc, 0.0))
            factors = 2.0 ** np.arange(shells + 1)
            a = np.minimum(rho[..., None] * factors[:-1], rho_out[..., None])
            b = np.minimum(rho[..., None] * factors[1:], rho_out[..., None])
            if outer_radius is None:
                b[..., -1] = np.inf
            with np.errstate(divide="ignore"):
                mass = (a ** -two_s - np.where(np.isinf(b), 0.0, b ** -two_s)) / two_s
            mass = np.where(b > a, mass, 0.0)
            mid = np.where(np.isinf(b), 2 * a, np.sqrt(a * np.where(np.isinf(b), a, b)))
            sample = x[:, None, None, :] + mid[..., None] * dirs[None, :, None, :]
            labels = label_fn(sample)
            for li, level in enumerate(levels):
                hit = np.sum(mass * (labels == level), axis=-1)  # (c, d)
                out[li, start:start + chunk] = volume * (hit @ dir_weights)
        return out

    def describe(self) -> str:
        return f"PairWeightTable(n={self.domain.dim}, cells={self.domain.cells}, s={self.s:g}, rule={self.rule.value}, padding={self.padding})"


def cache_key(domain: Domain, s: float, rule: NearRule, padding, truncation) -> str:
    extents = ",".join(f"{x:.12g}" for x in domain.extents)
    cells = ",".join(str(c) for c in domain.cells)
    pad = ",".join(str(p) for p in padding)
    trunc = "inf" if truncation is None else f"{truncation:.12g}"
    return f"n{domain.dim}|e{extents}|c{cells}|s{s:.15g}|{rule.value}|t{trunc}|p{pad}"
