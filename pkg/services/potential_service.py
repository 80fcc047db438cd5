import logging
import math
from enum import Enum

import numpy as np
from scipy.integrate import solve_ivp

from models.potential import DoubleWell, OptimalProfile
from utils.exceptions import ToolkitException, UnsupportedError, NumericalError

logger = logging.getLogger(__name__)


class PotentialKind(str, Enum):
    VALUE = "value"
    DERIVATIVE = "derivative"
    PRIMITIVE = "primitive"


class PotentialService:
    _profiles = {}

    @staticmethod
    def potential_eval(w: DoubleWell, t, kind: PotentialKind = PotentialKind.VALUE):
        """Evaluate W, W' or the primitive H of 2 sqrt(W)"""
        kind = PotentialKind(kind)
        if kind == PotentialKind.VALUE:
            return w.value(t)
        if kind == PotentialKind.DERIVATIVE:
            return w.derivative(t)
        return w.primitive(t)

    @staticmethod
    def optimal_profile(w: DoubleWell, samples: int = 6001) -> OptimalProfile:
        """Heteroclinic u0' = sqrt(W(u0)), u0(0) = midpoint, tabulated on [-T, T]"""
        key = (w.describe(), id(w) if w.describe() == type(w).__name__ else None, samples)
        if key in PotentialService._profiles:
            return PotentialService._profiles[key]

        logger.info(f"Computing optimal profile for {w.describe()}")
        if not w.is_nondegenerate():
            raise UnsupportedError(f"degenerate well {w.describe()}: W'' vanishes at a zero")

        try:
            a, b = w.zeros
            mid = (a + b) / 2
            # linearized approach rate sqrt(W''/2) at each zero
            rate = min(math.sqrt(float(w.second_derivative(z)) / 2) for z in w.zeros)
            half_width = 30.0 / rate

            def rhs(_, u):
                # sign keeps rounding past a zero from running away
                side = np.sign((u - a) * (b - u))
                return side * np.sqrt(np.maximum(w.value(u), 0.0))

            grid = np.linspace(0.0, half_width, samples // 2 + 1)
            forward = solve_ivp(rhs, (0.0, half_width), [mid], method="DOP853",
                                t_eval=grid, rtol=1e-12, atol=1e-14)
            backward = solve_ivp(rhs, (0.0, -half_width), [mid], method="DOP853",
                                 t_eval=-grid, rtol=1e-12, atol=1e-14)
            if not (forward.success and backward.success):
                raise NumericalError("profile ODE integration failed")

            t = np.concatenate([-grid[:0:-1], grid])
            u = np.concatenate([backward.y[0][:0:-1], forward.y[0]])
            u = np.maximum.accumulate(np.clip(u, a, b))
            profile = OptimalProfile(w, t, u)
            PotentialService._profiles[key] = profile
            logger.info(f"Optimal profile tabulated on [-{half_width:.3g}, {half_width:.3g}], energy {profile.energy():.10f}")
            return profile

        except ToolkitException:
            raise
        except Exception as e:
            logger.error(f"Failed to compute optimal profile: {str(e)}", exc_info=True)
            raise NumericalError("Failed to compute optimal profile")
