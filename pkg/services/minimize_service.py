import logging
import math
from dataclasses import replace
from typing import Optional

import numpy as np
from scipy.ndimage import distance_transform_edt

from models.domain import Domain
from models.field import ScalarField, ValueRange
from models.geometry import GeometricSet
from models.kernel import Part
from models.potential import DoubleWell, OptimalProfile
from schemas.energy import EnergySpec, EnergyTag, LambdaSchedule
from schemas.minimize import IterationRecord, MinimizeConfig, MinimizeResult, SeedKind
from services.energy_service import EnergyService, _well
from services.geometry_service import GeometryService
from services.kernel_service import KernelService
from services.potential_service import PotentialService
from utils.exceptions import ToolkitException, InvalidInputError, NumericalError

logger = logging.getLogger(__name__)


class MinimizeService:

    @staticmethod
    def _part(spec: EnergySpec, part: Optional[Part]) -> Part:
        if part is not None:
            return Part(part)
        return {EnergyTag.F_INT: Part.INTERIOR, EnergyTag.F_EXT: Part.EXTERIOR}.get(spec.tag, Part.FULL)

    @staticmethod
    def gradient(spec: EnergySpec, u: ScalarField, part: Part = None, lam: float = None) -> np.ndarray:
        """Gradient of the discrete energy in the Ω cell values, zero on the other cells"""
        tag = spec.tag
        if tag.is_set_functional:
            raise InvalidInputError(f"{tag.value} is a set functional and has no gradient")
        well = _well(spec)
        values = u.omega_values()
        volume = u.domain.cell_volume
        w_prime = volume * well.derivative(values)

        if tag in (EnergyTag.MM, EnergyTag.BOUNDARY_MODICA):
            grad = EnergyService.mm_gradient(u, spec.eps, well)
            if tag == EnergyTag.BOUNDARY_MODICA and spec.boundary_well is not None:
                lam = spec.lambda_eps() if lam is None else lam
                facets = GeometryService.boundary_facets(u.domain)
                position = np.full(u.domain.cells, -1, dtype=np.int64)
                position[u.omega_mask] = np.arange(len(values))
                cells = position[tuple(facets.cells.T)]
                np.add.at(grad, cells, lam * spec.boundary_well.derivative(facets.trace(u.values)) * facets.measures)
        elif tag in (EnergyTag.F_INT, EnergyTag.F_EXT, EnergyTag.F_FULL):
            part = MinimizeService._part(spec, part)
            kin_w, pot_w = spec.regime_weights()
            g_int, g_ext = KernelService.kernel_gradient(u, spec.s, part)
            copies = 2 if part == Part.FULL else 1
            grad = kin_w * (g_int + g_ext) + copies * pot_w * w_prime
        elif tag == EnergyTag.J_RAW:
            g_int, g_ext = KernelService.kernel_gradient(u, spec.s, Part.FULL if u.has_datum() else Part.INTERIOR)
            grad = spec.eps ** (2 * spec.s) * (g_int + g_ext) + w_prime
        elif tag == EnergyTag.J_EPS_S:
            g_int, g_ext = KernelService.kernel_gradient(u, spec.s, Part.FULL)
            grad = g_int + spec.sigma * g_ext + spec.eps ** (-2 * spec.s) * w_prime
        elif tag == EnergyTag.ABS_1D:
            s = spec.s if spec.s >= 0.5 else 0.5
            lam = EnergySpec(tag=tag, eps=spec.eps, s=s, k=spec.k,
                             schedule=LambdaSchedule.EXPONENTIAL).lambda_eps()
            g_int, _ = KernelService.kernel_gradient(u, s, Part.INTERIOR)
            grad = spec.eps ** (2 * s) * g_int + lam * w_prime
        else:
            raise InvalidInputError(f"no gradient for {tag.value}")

        out = np.zeros(u.domain.cells)
        out[u.omega_mask] = grad
        return out

    @staticmethod
    def project(values: np.ndarray, value_range: ValueRange) -> np.ndarray:
        lo, hi = value_range.bounds
        return np.clip(values, lo, hi)

    @staticmethod
    def odd_perturbation(domain: Domain, amplitude: float) -> np.ndarray:
        """amplitude · sin(π (x_1 - c_1) / L_1) on the Ω cells, odd about the center of Ω"""
        x1 = domain.cell_centers()[domain.omega_mask()][:, 0]
        c1 = (domain.bbox_lower[0] + domain.bbox_upper[0]) / 2
        return amplitude * np.sin(math.pi * (x1 - c1) / domain.extents[0])

    @staticmethod
    def minimize(spec: EnergySpec, u0: ScalarField, cfg: MinimizeConfig = None, part: Part = None,
                 lam: float = None) -> MinimizeResult:
        """Projected gradient descent with Armijo backtracking; only Ω cells move"""
        cfg = cfg or MinimizeConfig()
        logger.info(f"Minimizing {spec.tag.value}: eps={spec.eps:g}, s={spec.s:g}, max_iter={cfg.max_iter}")
        if spec.tag.is_set_functional:
            raise InvalidInputError(f"{spec.tag.value} is a set functional and cannot be minimized")

        def energy(field):
            return EnergyService.evaluate(spec, field, part, lam)

        try:
            x = u0.omega_values().copy()
            if cfg.perturb:
                x = MinimizeService.project(x + MinimizeService.odd_perturbation(u0.domain, cfg.perturb_amplitude),
                                            u0.value_range)
            field = u0.with_omega_values(x)
            current = energy(field)
            grad = MinimizeService.gradient(spec, field, part, lam)[field.omega_mask]
            step = cfg.step_size
            volume = u0.domain.cell_volume
            trace = []
            converged = False
            reason = "iteration cap reached"

            for iteration in range(cfg.max_iter + 1):
                projected = x - MinimizeService.project(x - grad, u0.value_range)
                # L2 norm of the gradient density
                grad_norm = float(np.linalg.norm(projected) / math.sqrt(volume))
                trace.append(IterationRecord(iteration, current.total, grad_norm, step))
                if grad_norm < cfg.tol:
                    converged, reason = True, "gradient tolerance reached"
                    break
                if iteration == cfg.max_iter:
                    break

                while True:
                    candidate = MinimizeService.project(x - step * grad, u0.value_range)
                    trial_field = field.with_omega_values(candidate)
                    trial = energy(trial_field)
                    decrease = float(np.dot(grad, x - candidate))
                    if trial.total <= current.total - cfg.armijo * decrease:
                        break
                    step *= cfg.shrink
                    if step < cfg.min_step:
                        logger.error(f"Line search failed at iteration {iteration}, energy {current.total:.12g}")
                        raise NumericalError(f"line search found no decrease at iteration {iteration}", trace=trace)

                change = current.total - trial.total
                x, field, current = candidate, trial_field, trial
                grad = MinimizeService.gradient(spec, field, part, lam)[field.omega_mask]
                step = step * cfg.growth
                logger.debug(f"iter {iteration + 1}: energy {current.total:.12g}, step {step:.3g}")
                if cfg.rel_energy_tol > 0 and change <= cfg.rel_energy_tol * max(abs(current.total), 1e-300):
                    trace.append(IterationRecord(iteration + 1, current.total,
                                                 float(np.linalg.norm(x - MinimizeService.project(
                                                     x - grad, u0.value_range)) / math.sqrt(volume)), step))
                    converged, reason = True, "energy change below tolerance"
                    break

            logger.info(f"Minimization finished: {reason}, energy {current.total:.12g} after {len(trace) - 1} iterations")
            return MinimizeResult(field=field, energy=current.total, trace=trace, converged=converged,
                                  reason=reason, breakdown=current)

        except ToolkitException:
            raise
        except Exception as e:
            logger.error(f"Failed to minimize: {str(e)}", exc_info=True)
            raise NumericalError("Failed to minimize")

    @staticmethod
    def signed_distance(E: GeometricSet, domain: Domain) -> np.ndarray:
        """Signed distance to ∂E at the cell centers, negative inside E"""
        centers = domain.cell_centers()
        if E.exact_distance:
            return E.signed_distance(centers)
        # voxel sweep for composite sets
        inside = E.contains(centers)
        h = domain.spacing
        if inside.all():
            return np.full(inside.shape, -np.inf)
        if not inside.any():
            return np.full(inside.shape, np.inf)
        d_in = distance_transform_edt(inside, sampling=h)
        d_out = distance_transform_edt(~inside, sampling=h)
        half = float(np.min(h)) / 2
        return np.where(inside, -(d_in - half), d_out - half)

    @staticmethod
    def recovery_sequence(E: GeometricSet, eps: float, w: DoubleWell = None, domain: Domain = None,
                          profile: OptimalProfile = None, outer_radius: float = None) -> ScalarField:
        """u_ε(x) = u0(-d_E(x) / ε), with d_E the signed distance (negative inside E)"""
        if domain is None:
            raise InvalidInputError("recovery sequence needs a domain")
        if eps <= 0:
            raise InvalidInputError("eps must be positive")
        w = _well(w)
        profile = profile or PotentialService.optimal_profile(w)
        logger.info(f"Building recovery sequence for {E.describe()}, eps={eps:g}")
        sd = MinimizeService.signed_distance(E, domain)
        with np.errstate(invalid="ignore"):
            t = np.where(np.isfinite(sd), -sd / eps, np.where(sd < 0, np.inf, -np.inf))
        values = profile(t)
        lo, hi = w.zeros
        if (lo, hi) == (-1.0, 1.0):
            value_range = ValueRange.SIGNED
        elif (lo, hi) == (0.0, 1.0):
            value_range = ValueRange.UNIT
        else:
            raise InvalidInputError("recovery sequences need wells with zeros ±1 or 0, 1")
        return ScalarField(values, domain, exterior=E, value_range=value_range, outer_radius=outer_radius)

    @staticmethod
    def seed(cfg: MinimizeConfig, E: GeometricSet, domain: Domain, eps: float = None, well: DoubleWell = None,
             outer_radius: float = None) -> ScalarField:
        """Initial field for minimize; the exterior datum is always E"""
        if cfg.seed == SeedKind.VOXELIZED:
            u = GeometryService.voxelize(E, domain)
        elif cfg.seed == SeedKind.LINEAR:
            x1 = domain.cell_centers()[..., 0]
            t = (x1 - domain.bbox_lower[0]) / domain.extents[0]
            u = ScalarField(2 * t - 1, domain, exterior=E)
        elif cfg.seed == SeedKind.CONSTANT:
            if not -1 <= cfg.seed_value <= 1:
                raise InvalidInputError("constant seed must lie in [-1, 1]")
            u = ScalarField(np.full(domain.cells, cfg.seed_value), domain, exterior=E)
        else:
            if eps is None:
                raise InvalidInputError("recovery seed needs eps")
            return MinimizeService.recovery_sequence(E, eps, well, domain, outer_radius=outer_radius)
        if outer_radius is not None:
            u = replace(u, outer_radius=outer_radius)
        return u
