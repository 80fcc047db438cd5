import itertools
import logging
import math
from collections import OrderedDict
from functools import lru_cache
from typing import Optional, Sequence, Tuple

import numpy as np

from config import settings
from models.domain import Domain
from models.field import ScalarField
from models.geometry import GeometricSet
from models.kernel import KernelMode, KernelSpec, NearRule, Part, PairWeightTable, cache_key
from services.cache_service import CacheService
from utils.exceptions import ToolkitException, InvalidInputError, NumericalError
from utils.quadrature import PiecewiseLinear, gauss_legendre, sphere_integral

logger = logging.getLogger(__name__)

# 1D offsets up to this distance use the closed-form cell-pair integral
CLOSED_FORM_LIMIT = 64
# nD offsets with |o|_∞ in [2, MODERATE_REACH] use tensor Gauss-Legendre
MODERATE_REACH = 3
TABLE_MEMORY = 8
EXTERIOR_MEMORY = 16


def _second_antiderivative(d: np.ndarray, p: float) -> np.ndarray:
    """G with G'' = d^{-p} up to affine terms"""
    if abs(p - 2.0) < 1e-14:
        return -np.log(d)
    return d ** (2 - p) / ((2 - p) * (1 - p))


def _one_dim_weights(k: np.ndarray, h: float, s: float) -> np.ndarray:
    """∫ T_h(z - k h) |z|^{-1-2s} dz for integer distances k ≥ 2"""
    p = 1 + 2 * s
    out = np.zeros_like(k, dtype=float)
    closed = (k >= 2) & (k <= CLOSED_FORM_LIMIT)
    kc = k[closed]
    out[closed] = (_second_antiderivative(kc + 1, p) - 2 * _second_antiderivative(kc, p)
                   + _second_antiderivative(kc - 1, p))
    far = k > CLOSED_FORM_LIMIT
    kf = k[far]
    out[far] = kf ** -p * (1 + p * (p + 1) / (12 * kf ** 2)
                           + p * (p + 1) * (p + 2) * (p + 3) / (360 * kf ** 4))
    return out * h ** (2 - p)


@lru_cache(maxsize=64)
def _near_weights(ratios: Tuple[float, ...], s: float, rule: NearRule) -> dict:
    """Weights of the offsets with |o|_∞ = 1 on a grid with spacing `ratios`.

    Computed for nonnegative offsets and mirrored, so the table is exactly
    symmetric under every axis reflection.
    """
    n = len(ratios)
    out = {}
    if rule == NearRule.EXACT:
        for o in itertools.product((0, 1), repeat=n):
            if not any(o):
                continue
            profiles = [PiecewiseLinear.tent(ok * hk, hk) for ok, hk in zip(o, ratios)]
            out[o] = sphere_integral(profiles, -1 - 2 * s)
    else:
        trapezoids = [PiecewiseLinear.trapezoid(hk) for hk in ratios]
        for k in range(n):
            if rule == NearRule.TAYLOR:
                moment = sphere_integral(trapezoids, 1 - 2 * s, angular=lambda th, k=k: th[k] ** 2)
                w = moment / (2 * ratios[k] ** 2)
            else:
                moment = sphere_integral(trapezoids, -2 * s, angular=lambda th, k=k: abs(th[k]))
                w = moment / (2 * ratios[k])
            o = [0] * n
            o[k] = 1
            out[tuple(o)] = w
    return out


@lru_cache(maxsize=64)
def _moderate_weights(ratios: Tuple[float, ...], s: float, order: int = 8) -> dict:
    """Tent-weighted tensor Gauss-Legendre cell-pair integrals for 2 ≤ |o|_∞ ≤ MODERATE_REACH"""
    n = len(ratios)
    p = n + 2 * s
    out = {}
    for o in itertools.product(range(MODERATE_REACH + 1), repeat=n):
        if max(o) < 2:
            continue
        nodes, weights = [], []
        for ok, hk in zip(o, ratios):
            x, w = gauss_legendre((ok - 1) * hk, (ok + 1) * hk, order, pieces=2)
            nodes.append(x)
            weights.append(w * PiecewiseLinear.tent(ok * hk, hk)(x))
        mesh = np.meshgrid(*nodes, indexing="ij", sparse=True)
        wmesh = np.meshgrid(*weights, indexing="ij", sparse=True)
        r2 = sum(m * m for m in mesh)
        weight = wmesh[0]
        for w in wmesh[1:]:
            weight = weight * w
        out[o] = float(np.sum(weight * r2 ** (-p / 2)))
    return out


def _mirror(o: Sequence[int]):
    """All sign patterns of a nonnegative offset"""
    choices = [(0,) if ok == 0 else (ok, -ok) for ok in o]
    return itertools.product(*choices)


class KernelService:
    _tables: "OrderedDict[str, PairWeightTable]" = OrderedDict()
    _exterior: "OrderedDict[tuple, np.ndarray]" = OrderedDict()

    @staticmethod
    def clear():
        KernelService._tables.clear()
        KernelService._exterior.clear()

    @staticmethod
    def compute_stencil(extended_shape: Sequence[int], spacing: Sequence[float], s: float, rule: NearRule,
                        truncation: Optional[float] = None) -> np.ndarray:
        """Translation-invariant weights w(o) for every offset of the extended grid"""
        n = len(extended_shape)
        h = np.asarray(spacing, dtype=float)
        p = n + 2 * s
        axes = [np.arange(-(e - 1), e) for e in extended_shape]
        grids = np.meshgrid(*axes, indexing="ij", sparse=True)
        center = tuple(e - 1 for e in extended_shape)

        if n == 1:
            stencil = _one_dim_weights(np.abs(grids[0]).astype(float), h[0], s)
        else:
            c = [g * hk for g, hk in zip(grids, h)]
            r2 = sum(ck * ck for ck in c)
            with np.errstate(divide="ignore", invalid="ignore"):
                base = r2 ** (-p / 2)
                corr = sum(hk ** 2 / 12 * (p * (p + 2) * ck * ck * r2 ** (-p / 2 - 2) - p * r2 ** (-p / 2 - 1))
                           for ck, hk in zip(c, h))
                stencil = float(np.prod(h ** 2)) * (base + corr)
            stencil = np.asarray(stencil, dtype=float)
            scale = h[0] ** (n - 2 * s)
            for o, value in _moderate_weights(tuple(h / h[0]), s).items():
                for signed in _mirror(o):
                    if all(abs(ok) <= ck for ok, ck in zip(signed, center)):
                        stencil[tuple(ok + ck for ok, ck in zip(signed, center))] = value * scale

        # near offsets
        scale = h[0] ** (n - 2 * s)
        if rule != NearRule.EXACT:
            for o in itertools.product((-1, 0, 1), repeat=n):
                if any(o) and all(abs(ok) <= ck for ok, ck in zip(o, center)):
                    stencil[tuple(ok + ck for ok, ck in zip(o, center))] = 0.0
        for o, value in _near_weights(tuple(h / h[0]), s, rule).items():
            for signed in _mirror(o):
                if all(abs(ok) <= ck for ok, ck in zip(signed, center)):
                    stencil[tuple(ok + ck for ok, ck in zip(signed, center))] = value * scale
        stencil[center] = 0.0

        if truncation is not None:
            dist2 = sum((g * hk) ** 2 for g, hk in zip(grids, h))
            stencil = np.where(dist2 > truncation ** 2, 0.0, stencil)
        if not np.all(np.isfinite(stencil)) or np.any(stencil < 0):
            raise NumericalError("pair weights are not finite and nonnegative")
        return stencil

    @staticmethod
    def capped_padding(domain: Domain, truncation: Optional[float] = None) -> Tuple[int, ...]:
        """Exterior margin in cells, shrunk to keep the extended grid under MAX_EXTENDED_CELLS"""
        pad = np.array(domain.padding(), dtype=float)
        if truncation is not None:
            pad = np.minimum(pad, np.ceil(truncation / domain.spacing - 1e-9))
        cells = np.array(domain.cells, dtype=float)

        def size(t):
            return float(np.prod(cells + 2 * np.floor(t * pad)))

        if size(1.0) <= settings.MAX_EXTENDED_CELLS:
            return tuple(int(x) for x in pad)
        lo, hi = 0.0, 1.0
        for _ in range(50):
            mid = (lo + hi) / 2
            if size(mid) <= settings.MAX_EXTENDED_CELLS:
                lo = mid
            else:
                hi = mid
        capped = tuple(int(x) for x in np.floor(lo * pad))
        logger.warning(f"Exterior margin capped from {tuple(int(x) for x in pad)} to {capped} cells; "
                       f"the analytic tail covers the rest")
        return capped

    @staticmethod
    def build_table(domain: Domain, s: float, rule: NearRule, truncation: Optional[float] = None,
                    exterior: bool = True, cache_dir: str = None) -> PairWeightTable:
        """PairWeightTable for the domain, from memory, the disk cache, or freshly computed"""
        padding = KernelService.capped_padding(domain, truncation) if exterior else (0,) * domain.dim
        key = cache_key(domain, s, rule, padding, truncation)
        tables = KernelService._tables
        if key in tables:
            tables.move_to_end(key)
            table = tables[key]
            if cache_dir and CacheService.load_stencil(key, cache_dir) is None:
                CacheService.store_stencil(key, table.stencil, domain.dim, s, rule.value, cache_dir)
            return table

        logger.info(f"Building pair weights: n={domain.dim}, cells={domain.cells}, s={s:g}, "
                    f"rule={rule.value}, padding={padding}")
        try:
            stencil = CacheService.load_stencil(key, cache_dir)
            if stencil is None:
                extended = tuple(c + 2 * p for c, p in zip(domain.cells, padding))
                stencil = KernelService.compute_stencil(extended, domain.spacing, s, rule, truncation)
                CacheService.store_stencil(key, stencil, domain.dim, s, rule.value, cache_dir)
            table = PairWeightTable(domain, s, rule, padding, stencil, truncation)
            tables[key] = table
            while len(tables) > TABLE_MEMORY:
                tables.popitem(last=False)
            logger.info(f"Pair weights ready: {table.describe()}")
            return table

        except ToolkitException:
            raise
        except Exception as e:
            logger.error(f"Failed to build pair weights: {str(e)}", exc_info=True)
            raise NumericalError("Failed to build pair weights")

    @staticmethod
    def exterior_sums(table: PairWeightTable, label_fn, levels: Sequence, outer_radius: Optional[float] = None,
                      memo_key=None) -> np.ndarray:
        """S[l, i] = Σ_{j ∈ 𝒞Ω, label(j) = levels[l]} w_ij plus the analytic tail beyond the margin"""
        if memo_key is not None:
            full_key = (id(table), table.describe(), memo_key, tuple(levels), outer_radius)
            if full_key in KernelService._exterior:
                KernelService._exterior.move_to_end(full_key)
                return KernelService._exterior[full_key]

        centers = table.extended_centers()
        outside = ~table.extended_omega_mask()
        if outer_radius is not None:
            outside &= np.linalg.norm(centers, axis=-1) < outer_radius
        labels = label_fn(centers)
        sums = np.zeros((len(levels), table.n_omega))
        for li, level in enumerate(levels):
            sums[li] = table.sums_at(table.omega_keys, outside & (labels == level))
        sums += table.tail_sums(label_fn, levels, outer_radius)
        logger.debug(f"Exterior sums per level: {[float(x) for x in sums.sum(axis=1)]}")

        if memo_key is not None:
            KernelService._exterior[full_key] = sums
            while len(KernelService._exterior) > EXTERIOR_MEMORY:
                KernelService._exterior.popitem(last=False)
        return sums

    @staticmethod
    def _field_exterior(table: PairWeightTable, u: ScalarField) -> Tuple[np.ndarray, np.ndarray]:
        if not u.has_datum():
            raise InvalidInputError("exterior contributions need an exterior datum")
        levels = np.array(u.datum_levels(), dtype=float)
        memo = (id(u.exterior), repr(u.exterior), u.value_range.value)
        return levels, KernelService.exterior_sums(table, u.datum_at, levels, u.outer_radius, memo_key=memo)

    @staticmethod
    def _check_domain(u: ScalarField, omega: Optional[Domain]) -> Domain:
        if omega is not None and omega != u.domain:
            raise InvalidInputError("field and domain do not match")
        return u.domain

    @staticmethod
    def interaction(E: GeometricSet, F: GeometricSet, spec: KernelSpec, domain: Domain) -> float:
        """I_s(E, F) over the cells of the domain"""
        logger.info(f"Computing interaction of {E.describe()} and {F.describe()}, s={spec.s:g}")
        if spec.s >= 0.5:
            raise InvalidInputError("interaction needs s < 1/2")

        try:
            centers = domain.cell_centers()[domain.omega_mask()]
            a = E.contains(centers)
            b = F.contains(centers)
            if np.any(a & b):
                raise InvalidInputError(f"sets overlap on {int(np.count_nonzero(a & b))} cells")
            if not a.any() or not b.any():
                return 0.0
            # fixed argument order so swapping E and F is bitwise symmetric
            if a.tobytes() > b.tobytes():
                a, b = b, a
            table = KernelService.build_table(domain, spec.s, NearRule.EXACT, spec.truncation, exterior=False)
            keys = table.omega_keys
            rows_a, keys_b = keys[a], keys[b]

            def run(block):
                return np.sum(table.weights_between(rows_a[block], keys_b), axis=1)

            blocks = table._blocks(len(rows_a), len(keys_b))
            value = float(np.sum(np.concatenate(table._map_blocks(run, blocks))))
            logger.info(f"Interaction: {value:.12g}")
            return value

        except ToolkitException:
            raise
        except Exception as e:
            logger.error(f"Failed to compute interaction: {str(e)}", exc_info=True)
            raise NumericalError("Failed to compute interaction")

    @staticmethod
    def frac_perimeter(E: GeometricSet, omega: Domain, s: float, part: Part = Part.INTERIOR,
                       truncation: Optional[float] = None) -> float:
        """Per_s(E, Ω) split into interior, exterior or full"""
        part = Part(part)
        try:
            spec = KernelSpec(s, omega.dim, KernelMode.SET, truncation)
        except ValueError as e:
            raise InvalidInputError(str(e))
        logger.info(f"Computing {part.value} fractional perimeter of {E.describe()}, s={s:g}")

        try:
            table = KernelService.build_table(omega, s, spec.default_rule, truncation,
                                              exterior=part != Part.INTERIOR)
            centers = omega.cell_centers()[omega.omega_mask()]
            inside = E.contains(centers)
            value = 0.0
            if part in (Part.INTERIOR, Part.FULL):
                cross = table.interior_cross_rows(inside)
                value += float(np.sum(cross[inside]))
            if part in (Part.EXTERIOR, Part.FULL):
                sums = KernelService.exterior_sums(table, E.contains, (False, True),
                                                   memo_key=(id(E), repr(E), "set"))
                value += float(np.sum(np.where(inside, sums[0], sums[1])))
            logger.info(f"Fractional perimeter ({part.value}): {value:.12g}")
            return value

        except ToolkitException:
            raise
        except Exception as e:
            logger.error(f"Failed to compute fractional perimeter: {str(e)}", exc_info=True)
            raise NumericalError("Failed to compute fractional perimeter")

    @staticmethod
    def kernel_table(u: ScalarField, s: float, part: Part, rule: Optional[NearRule] = None,
                     truncation: Optional[float] = None) -> PairWeightTable:
        try:
            spec = KernelSpec(s, u.dim, KernelMode.SQUARED, truncation)
        except ValueError as e:
            raise InvalidInputError(str(e))
        rule = rule or spec.default_rule
        return KernelService.build_table(u.domain, s, rule, truncation, exterior=Part(part) != Part.INTERIOR)

    @staticmethod
    def kernel_parts(u: ScalarField, s: float, part: Part = Part.FULL, rule: Optional[NearRule] = None,
                     truncation: Optional[float] = None) -> Tuple[float, float]:
        """(K^int, K^ext) with the part not requested left at 0"""
        part = Part(part)
        table = KernelService.kernel_table(u, s, part, rule, truncation)
        values = u.omega_values()
        interior = exterior = 0.0
        if part in (Part.INTERIOR, Part.FULL):
            interior = float(np.sum(table.interior_rows(values)))
        if part in (Part.EXTERIOR, Part.FULL):
            levels, sums = KernelService._field_exterior(table, u)
            diff2 = (values[None, :] - levels[:, None]) ** 2
            exterior = 2.0 * float(np.sum(sums * diff2))
        return interior, exterior

    @staticmethod
    def field_kernel(u: ScalarField, omega: Optional[Domain], s: float, part: Part = Part.INTERIOR,
                     rule: Optional[NearRule] = None, truncation: Optional[float] = None) -> float:
        """K^int, K^ext (with the factor 2) or their sum; 𝒞Ω × 𝒞Ω pairs are omitted"""
        KernelService._check_domain(u, omega)
        part = Part(part)
        logger.info(f"Computing {part.value} field kernel, s={s:g}")

        try:
            interior, exterior = KernelService.kernel_parts(u, s, part, rule, truncation)
            value = interior + exterior
            logger.info(f"Field kernel ({part.value}): {value:.12g}")
            return value

        except ToolkitException:
            raise
        except Exception as e:
            logger.error(f"Failed to compute field kernel: {str(e)}", exc_info=True)
            raise NumericalError("Failed to compute field kernel")

    @staticmethod
    def kernel_gradient(u: ScalarField, s: float, part: Part = Part.FULL, rule: Optional[NearRule] = None,
                        truncation: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
        """(∂K^int/∂u_i, ∂K^ext/∂u_i) over the Ω cells"""
        part = Part(part)
        table = KernelService.kernel_table(u, s, part, rule, truncation)
        values = u.omega_values()
        interior = np.zeros_like(values)
        exterior = np.zeros_like(values)
        if part in (Part.INTERIOR, Part.FULL):
            interior = table.interior_gradient(values)
        if part in (Part.EXTERIOR, Part.FULL):
            levels, sums = KernelService._field_exterior(table, u)
            exterior = 4.0 * np.sum(sums * (values[None, :] - levels[:, None]), axis=0)
        return interior, exterior

    @staticmethod
    def bbm_seminorm(u: ScalarField, omega: Optional[Domain], s: float, rule: Optional[NearRule] = None) -> float:
        """Σ_ij w_ij |u_i - u_j| over Ω × Ω"""
        KernelService._check_domain(u, omega)
        if not 0 < s < 0.5:
            raise InvalidInputError("the W^{2s,1} seminorm needs s in (0, 1/2)")
        rule = rule or KernelSpec(s, u.dim, KernelMode.ABSOLUTE).default_rule
        logger.info(f"Computing W^(2s,1) seminorm, s={s:g}, rule={rule.value}")

        try:
            table = KernelService.build_table(u.domain, s, rule, exterior=False)
            value = float(np.sum(table.interior_rows(u.omega_values(), absolute=True)))
            logger.info(f"Seminorm: {value:.12g}")
            return value

        except ToolkitException:
            raise
        except Exception as e:
            logger.error(f"Failed to compute seminorm: {str(e)}", exc_info=True)
            raise NumericalError("Failed to compute seminorm")
