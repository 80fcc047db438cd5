import logging
import math

import numpy as np
from scipy.special import gamma, ive

from models.field import ScalarField, ValueRange
from models.potential import QuarticWell
from models.spectral import SpectralGrid
from schemas.energy import EnergyBreakdown
from utils.exceptions import ToolkitException, InvalidInputError, NumericalError

logger = logging.getLogger(__name__)

# below this |ξ| the leading term of the series is exact to double precision
SERIES_CUTOFF = 1e-5

WATER_WAVE_WELL = QuarticWell(zeros=(0.0, 1.0), scale=1.0)


class SpectralService:
    _grids = {}

    @staticmethod
    def multiplier_S(s: float, xi_mag):
        """S_s(ξ) = I_{1-s}(|ξ|) / I_{s-1}(|ξ|) |ξ|^{2s}, the real positive branch"""
        if not 0 < s < 1:
            raise InvalidInputError("s must lie in (0, 1)")
        x = np.asarray(xi_mag, dtype=float)
        if np.any(x < 0):
            raise InvalidInputError("|ξ| must be nonnegative")
        small = x < SERIES_CUTOFF
        safe = np.where(small, 1.0, x)
        # exponentially scaled Bessel functions keep the ratio finite for large |ξ|
        ratio = ive(1 - s, safe) / ive(s - 1, safe)
        out = ratio * safe ** (2 * s)
        series = x * x * 2.0 ** (2 * s - 2) * gamma(s) / gamma(2 - s)
        out = np.where(small, series, out)
        if not np.all(np.isfinite(out)):
            raise NumericalError("multiplier evaluation overflowed")
        return float(out) if out.ndim == 0 else out

    @staticmethod
    def multiplier_table(s: float, xi_max: float, count: int = 501):
        """Rows (s, |ξ|, S_s) on a uniform grid of [0, xi_max]"""
        if xi_max <= 0 or count < 2:
            raise InvalidInputError("multiplier table needs xi_max > 0 and at least two points")
        xi = np.linspace(0.0, xi_max, count)
        values = SpectralService.multiplier_S(s, xi)
        return [(s, float(x), float(v)) for x, v in zip(xi, values)]

    @staticmethod
    def grid_for(u: ScalarField, s: float) -> SpectralGrid:
        key = (tuple(u.domain.extents.tolist()), tuple(u.domain.cells), s)
        if key not in SpectralService._grids:
            SpectralService._grids[key] = SpectralGrid(key[0], key[1], s)
        return SpectralService._grids[key]

    @staticmethod
    def quadratic_form(u: ScalarField, grid: SpectralGrid) -> float:
        """∫ S_s |û|^2 as (|box| / M^2) Σ_k S_k |FFT(u)_k|^2"""
        coeffs = np.fft.fftn(u.values)
        return grid.volume / grid.size ** 2 * float(np.sum(grid.symbol * np.abs(coeffs) ** 2))

    @staticmethod
    def operator_form(u: ScalarField, grid: SpectralGrid) -> float:
        """The same quadratic form in real space, h^n Σ u S(D)u"""
        applied = np.real(np.fft.ifftn(grid.symbol * np.fft.fftn(u.values)))
        cell = grid.volume / grid.size
        return cell * float(np.sum(u.values * applied))

    @staticmethod
    def regime_weight(eps: float, s: float) -> float:
        """Rescaling of the water-wave energy per regime of s"""
        if s < 0.5:
            return eps ** (-2 * s)
        if s == 0.5:
            if eps >= 1:
                raise InvalidInputError("the s = 1/2 rescaling needs eps < 1")
            return 1.0 / abs(eps * math.log(eps))
        return 1.0 / eps

    @staticmethod
    def spectral_energy(u: ScalarField, eps: float, s: float, rescaled: bool = False,
                        well=WATER_WAVE_WELL) -> EnergyBreakdown:
        """ε^{2s} ∫ S_s |û|^2 + ∫ W(u) on a periodic box"""
        logger.info(f"Computing spectral energy: eps={eps:g}, s={s:g}, rescaled={rescaled}")
        if not u.periodic:
            raise InvalidInputError("spectral energy needs a periodic field")
        if u.value_range != ValueRange.UNIT:
            raise InvalidInputError("spectral energy needs a [0,1]-valued field")
        if eps <= 0:
            raise InvalidInputError("eps must be positive")

        try:
            grid = SpectralService.grid_for(u, s)
            kinetic = eps ** (2 * s) * SpectralService.quadratic_form(u, grid)
            potential = grid.volume / grid.size * float(np.sum(well.value(u.values)))
            weight = SpectralService.regime_weight(eps, s) if rescaled else 1.0
            tag = "Q_eps" if rescaled else "P_eps"
            breakdown = EnergyBreakdown.assemble(tag, kinetic=weight * kinetic, potential=weight * potential,
                                                 components={"regime_weight": weight})
            logger.info(f"Spectral energy: {breakdown.total:.12g}")
            return breakdown

        except ToolkitException:
            raise
        except Exception as e:
            logger.error(f"Failed to compute spectral energy: {str(e)}", exc_info=True)
            raise NumericalError("Failed to compute spectral energy")
