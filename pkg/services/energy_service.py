import logging
from enum import Enum
from typing import Optional

import numpy as np

from models.domain import Domain
from models.field import ScalarField
from models.geometry import GeometricSet
from models.interface import BoundaryField
from models.kernel import Part
from models.potential import DoubleWell, QuarticWell, ZeroPotential
from schemas.energy import EnergyBreakdown, EnergySpec, EnergyTag, LambdaSchedule
from services.geometry_service import GeometryService, PerimeterWhere
from services.kernel_service import KernelService
from utils.exceptions import ToolkitException, InvalidInputError, UnsupportedError, NumericalError

logger = logging.getLogger(__name__)

DEFAULT_WELL = QuarticWell()


class CapillarityKind(str, Enum):
    LOCAL = "local"
    FRACTIONAL = "fractional"


def _well(spec_or_well) -> DoubleWell:
    if isinstance(spec_or_well, EnergySpec):
        return spec_or_well.well or DEFAULT_WELL
    return spec_or_well or DEFAULT_WELL


class EnergyService:
    _faces = {}

    @staticmethod
    def _check_domain(u: ScalarField, omega: Optional[Domain]):
        if omega is not None and omega != u.domain:
            raise InvalidInputError("field and domain do not match")

    @staticmethod
    def face_pairs(domain: Domain):
        """Neighbouring Ω cell pairs (a, b, 1/h_k^2); faces on ∂Ω carry no difference"""
        key = (domain.describe(), tuple(domain.cells))
        if key in EnergyService._faces:
            return EnergyService._faces[key]
        omega = domain.omega_mask()
        n = domain.dim
        h = domain.spacing
        position = np.full(omega.shape, -1, dtype=np.int64)
        position[omega] = np.arange(int(np.count_nonzero(omega)))
        a_list, b_list, w_list = [], [], []
        for k in range(n):
            lo = [slice(None)] * n
            hi = [slice(None)] * n
            lo[k] = slice(None, -1)
            hi[k] = slice(1, None)
            both = omega[tuple(lo)] & omega[tuple(hi)]
            a_list.append(position[tuple(lo)][both])
            b_list.append(position[tuple(hi)][both])
            w_list.append(np.full(int(both.sum()), 1.0 / h[k] ** 2))
        result = (np.concatenate(a_list), np.concatenate(b_list), np.concatenate(w_list))
        EnergyService._faces[key] = result
        return result

    @staticmethod
    def _mm_terms(u: ScalarField, eps: float, well: DoubleWell):
        a, b, w = EnergyService.face_pairs(u.domain)
        values = u.omega_values()
        volume = u.domain.cell_volume
        gradient_sq = float(np.sum(w * (values[a] - values[b]) ** 2))
        kinetic = eps * volume * gradient_sq
        potential = volume / eps * float(np.sum(well.value(values)))
        return kinetic, potential

    @staticmethod
    def mm_gradient(u: ScalarField, eps: float, well: DoubleWell) -> np.ndarray:
        """Exact gradient of the discrete Modica–Mortola energy over the Ω cells"""
        a, b, w = EnergyService.face_pairs(u.domain)
        values = u.omega_values()
        volume = u.domain.cell_volume
        grad = np.zeros_like(values)
        flux = 2 * eps * volume * w * (values[a] - values[b])
        np.add.at(grad, a, flux)
        np.add.at(grad, b, -flux)
        grad += volume / eps * well.derivative(values)
        return grad

    @staticmethod
    def modica_mortola(u: ScalarField, omega: Optional[Domain], eps: float, well: DoubleWell = None) -> EnergyBreakdown:
        """ε ∫|∇u|^2 + (1/ε) ∫ W(u) with differences across interior faces; the exterior datum does not enter"""
        EnergyService._check_domain(u, omega)
        if eps <= 0:
            raise InvalidInputError("eps must be positive")
        logger.info(f"Computing Modica-Mortola energy, eps={eps:g}")

        try:
            kinetic, potential = EnergyService._mm_terms(u, eps, _well(well))
            breakdown = EnergyBreakdown.assemble(EnergyTag.MM, kinetic=kinetic, potential=potential)
            logger.info(f"Modica-Mortola energy: {breakdown.total:.12g}")
            return breakdown

        except ToolkitException:
            raise
        except Exception as e:
            logger.error(f"Failed to compute Modica-Mortola energy: {str(e)}", exc_info=True)
            raise NumericalError("Failed to compute Modica-Mortola energy")

    @staticmethod
    def potential_integral(u: ScalarField, well: DoubleWell) -> float:
        return u.domain.cell_volume * float(np.sum(well.value(u.omega_values())))

    @staticmethod
    def scaled_nonlocal(u: ScalarField, omega: Optional[Domain], eps: float, s: float, part: Part = Part.FULL,
                        well: DoubleWell = None, rule=None) -> EnergyBreakdown:
        """Regime-weighted kernel plus potential; full = interior + exterior as written"""
        EnergyService._check_domain(u, omega)
        part = Part(part)
        tag = {Part.INTERIOR: EnergyTag.F_INT, Part.EXTERIOR: EnergyTag.F_EXT, Part.FULL: EnergyTag.F_FULL}[part]
        try:
            spec = EnergySpec(tag=tag, eps=eps, s=s)
        except ValueError as e:
            raise InvalidInputError(str(e))
        logger.info(f"Computing {tag.value}: eps={eps:g}, s={s:g}")

        try:
            kin_w, pot_w = spec.regime_weights()
            k_int, k_ext = KernelService.kernel_parts(u, s, part, rule)
            w_int = EnergyService.potential_integral(u, _well(well))
            # each of the interior and exterior functionals carries its own half potential
            copies = 2 if part == Part.FULL else 1
            breakdown = EnergyBreakdown.assemble(
                tag,
                kinetic=kin_w * (k_int + k_ext),
                potential=copies * pot_w * w_int,
                components={
                    "K_int": k_int,
                    "K_ext": k_ext,
                    "W_integral": w_int,
                    "kinetic_weight": kin_w,
                    "potential_weight": pot_w,
                    "potential_single": pot_w * w_int,
                },
            )
            logger.info(f"{tag.value}: {breakdown.total:.12g}")
            return breakdown

        except ToolkitException:
            raise
        except Exception as e:
            logger.error(f"Failed to compute {tag.value}: {str(e)}", exc_info=True)
            raise NumericalError(f"Failed to compute {tag.value}")

    @staticmethod
    def j_raw(u: ScalarField, omega: Optional[Domain], eps: float, s: float, well: DoubleWell = None,
              rule=None) -> EnergyBreakdown:
        """Unrescaled ε^{2s} K + ∫ W"""
        EnergyService._check_domain(u, omega)
        k_int, k_ext = KernelService.kernel_parts(u, s, Part.FULL if u.has_datum() else Part.INTERIOR, rule)
        w_int = EnergyService.potential_integral(u, _well(well))
        return EnergyBreakdown.assemble(EnergyTag.J_RAW, kinetic=eps ** (2 * s) * (k_int + k_ext), potential=w_int,
                                        components={"K_int": k_int, "K_ext": k_ext, "W_integral": w_int})

    @staticmethod
    def j_eps_s(u: ScalarField, omega: Optional[Domain], eps: float, s: float, sigma: float,
                well: DoubleWell = None) -> EnergyBreakdown:
        """K^int + σ K^ext + ε^{-2s} ∫ W"""
        EnergyService._check_domain(u, omega)
        if eps <= 0:
            raise InvalidInputError("eps must be positive")
        if not 0 < s < 0.5:
            raise InvalidInputError("J_eps_s needs s in (0, 1/2)")
        if not -1 <= sigma <= 1:
            raise InvalidInputError("sigma must lie in [-1, 1]")
        logger.info(f"Computing J_eps_s: eps={eps:g}, s={s:g}, sigma={sigma:g}")
        k_int, k_ext = KernelService.kernel_parts(u, s, Part.FULL)
        w_int = EnergyService.potential_integral(u, _well(well))
        return EnergyBreakdown.assemble(EnergyTag.J_EPS_S, kinetic=k_int + sigma * k_ext,
                                        potential=eps ** (-2 * s) * w_int,
                                        components={"K_int": k_int, "K_ext": k_ext, "W_integral": w_int})

    @staticmethod
    def capillarity(E: GeometricSet, omega: Domain, sigma: float, kind: CapillarityKind, s: float = None) -> float:
        """Per(E,Ω) + σ Per(E,∂Ω), or I_s(E, Ω∖E) + σ I_s(E, 𝒞Ω) for E ⊆ Ω"""
        kind = CapillarityKind(kind)
        if not -1 <= sigma <= 1:
            raise InvalidInputError("sigma must lie in [-1, 1]")
        logger.info(f"Computing {kind.value} capillarity of {E.describe()}, sigma={sigma:g}")

        if kind == CapillarityKind.LOCAL:
            interior = GeometryService.classical_perimeter(E, omega, PerimeterWhere.INTERIOR)
            boundary = GeometryService.classical_perimeter(E, omega, PerimeterWhere.BOUNDARY)
            return interior + sigma * boundary

        if s is None:
            raise InvalidInputError("fractional capillarity needs s")
        # E ⊆ Ω is checked on a grid reaching one domain width past Ω
        wide_pad = tuple(c // 2 + 1 for c in omega.cells)
        outside = ~omega.omega_mask(wide_pad)
        if np.any(E.contains(omega.cell_centers(wide_pad)) & outside):
            raise InvalidInputError(f"{E.describe()} is not contained in {omega.describe()}")
        interior = KernelService.frac_perimeter(E, omega, s, Part.INTERIOR)
        if sigma == 0:
            return interior
        exterior = KernelService.frac_perimeter(E, omega, s, Part.EXTERIOR)
        return interior + sigma * exterior

    @staticmethod
    def boundary_modica(u: ScalarField, omega: Optional[Domain], eps: float, V=None, lam: float = 1.0,
                        well: DoubleWell = None) -> EnergyBreakdown:
        """Modica–Mortola plus λ Σ_{∂Ω facets} V(trace) |facet|"""
        EnergyService._check_domain(u, omega)
        if u.dim == 3:
            raise UnsupportedError("boundary Modica-Mortola energy is limited to n = 1, 2")
        V = V or ZeroPotential()
        mm = EnergyService.modica_mortola(u, None, eps, well)
        facets = GeometryService.boundary_facets(u.domain)
        trace = facets.trace(u.values)
        boundary = lam * float(np.sum(V.value(trace) * facets.measures))
        return EnergyBreakdown.assemble(EnergyTag.BOUNDARY_MODICA, kinetic=mm.kinetic, potential=mm.potential,
                                        boundary=boundary, components={"lambda": lam})

    @staticmethod
    def abs_1d(v: ScalarField, interval: Optional[Domain], eps: float, k: float = 1.0, s: float = 0.5,
               schedule: LambdaSchedule = LambdaSchedule.EXPONENTIAL, well: DoubleWell = None) -> EnergyBreakdown:
        """ε^{2s} ∬_{I×I} |v(x)-v(y)|^2/|x-y|^{1+2s} + λ_ε ∫ W(v); s = 1/2 is the |x-y|^{-2} kernel"""
        EnergyService._check_domain(v, interval)
        if v.dim != 1:
            raise InvalidInputError("the ABS energy is one-dimensional")
        if not 0.5 <= s < 1:
            raise InvalidInputError("the ABS energy needs s in [1/2, 1)")
        try:
            spec = EnergySpec(tag=EnergyTag.ABS_1D, eps=eps, s=s, k=k, schedule=schedule)
        except ValueError as e:
            raise InvalidInputError(str(e))
        lam = spec.lambda_eps()
        k_int, _ = KernelService.kernel_parts(v, s, Part.INTERIOR)
        w_int = EnergyService.potential_integral(v, _well(well))
        return EnergyBreakdown.assemble(EnergyTag.ABS_1D, kinetic=eps ** (2 * s) * k_int, potential=lam * w_int,
                                        components={"K_int": k_int, "W_integral": w_int, "lambda": lam})

    @staticmethod
    def abs_1d_limit(v: ScalarField, k: float = 1.0) -> float:
        """8k times the number of jumps of a ±1-valued v"""
        if v.dim != 1:
            raise InvalidInputError("the ABS limit is one-dimensional")
        values = v.omega_values()
        if not np.all(np.abs(values) == 1.0):
            raise InvalidInputError("the ABS limit needs a ±1-valued field")
        jumps = int(np.count_nonzero(values[1:] != values[:-1]))
        logger.info(f"ABS limit: {jumps} jumps")
        return 8.0 * k * jumps

    @staticmethod
    def phi_line_tension(u: ScalarField, v: BoundaryField, omega: Optional[Domain], sigma: float, c: float,
                         well: DoubleWell = None, alphabet=None) -> float:
        """H^{n-1}(Su) + σ ∫_{∂Ω} |H(Tu) - H(v)| + c H^{n-2}(Sv)"""
        EnergyService._check_domain(u, omega)
        well = _well(well)
        lo, hi = well.zeros
        values = u.omega_values()
        if not np.all((values == lo) | (values == hi)):
            raise InvalidInputError(f"u must take only the values {lo:g} and {hi:g}")
        alpha, beta = alphabet or well.zeros
        if not np.all((v.values == alpha) | (v.values == beta)):
            raise InvalidInputError(f"v must take only the values {alpha:g} and {beta:g}")
        if v.facets.domain != u.domain:
            raise InvalidInputError("boundary field belongs to another domain")
        if u.dim == 1 and c != 0:
            raise InvalidInputError("the line-tension term needs n = 2 or 3")

        inside = u.values == hi
        jump = GeometryService.interior_facets(inside, u.domain).total()
        trace = v.facets.trace(u.values)
        mismatch = float(np.sum(np.abs(well.primitive(trace) - well.primitive(v.values)) * v.facets.measures))
        contact = GeometryService.contact_measure(v.facets, v.values) if u.dim > 1 else 0.0
        value = jump + sigma * mismatch + c * contact
        logger.info(f"Line-tension energy: {value:.12g} (jump {jump:.6g}, trace {mismatch:.6g}, contact {contact:.6g})")
        return value

    @staticmethod
    def g_sharp(E: GeometricSet, omega: Domain, sigma: float, c: float) -> float:
        """Per(E,Ω) + σ |∂Ω wetted by E| + c H^{n-2}(contact line), from voxel facets"""
        if omega.dim not in (2, 3):
            raise InvalidInputError("the line-tension capillarity needs n = 2 or 3")
        inside = E.contains(omega.cell_centers()) & omega.omega_mask()
        interior = GeometryService.interior_facets(inside, omega, E).total()
        facets = GeometryService.boundary_facets(omega)
        wet = facets.trace(inside)
        boundary = float(np.sum(facets.measures[wet]))
        contact = GeometryService.contact_measure(facets, wet.astype(float))
        value = interior + sigma * boundary + c * contact
        logger.info(f"G_sharp: {value:.12g} (interior {interior:.6g}, wetted {boundary:.6g}, contact {contact:.6g})")
        return value

    @staticmethod
    def evaluate(spec: EnergySpec, u: ScalarField, part: Part = None, lam: float = None) -> EnergyBreakdown:
        """Dispatch a field functional by tag"""
        tag = spec.tag
        if tag.is_set_functional:
            raise InvalidInputError(f"{tag.value} takes a set, not a field")
        well = _well(spec)
        if tag == EnergyTag.MM:
            return EnergyService.modica_mortola(u, None, spec.eps, well)
        if tag in (EnergyTag.F_INT, EnergyTag.F_EXT, EnergyTag.F_FULL):
            part = part or {EnergyTag.F_INT: Part.INTERIOR, EnergyTag.F_EXT: Part.EXTERIOR,
                            EnergyTag.F_FULL: Part.FULL}[tag]
            return EnergyService.scaled_nonlocal(u, None, spec.eps, spec.s, part, well)
        if tag == EnergyTag.J_RAW:
            return EnergyService.j_raw(u, None, spec.eps, spec.s, well)
        if tag == EnergyTag.J_EPS_S:
            return EnergyService.j_eps_s(u, None, spec.eps, spec.s, spec.sigma, well)
        if tag == EnergyTag.BOUNDARY_MODICA:
            lam = spec.lambda_eps() if lam is None else lam
            return EnergyService.boundary_modica(u, None, spec.eps, spec.boundary_well, lam, well)
        if tag == EnergyTag.ABS_1D:
            return EnergyService.abs_1d(u, None, spec.eps, spec.k, spec.s if spec.s >= 0.5 else 0.5,
                                        LambdaSchedule.EXPONENTIAL, well)
        raise UnsupportedError(f"no field evaluator for {tag.value}")
