import logging
import math
from abc import ABC, abstractmethod
from typing import Callable, Tuple

import numpy as np
from scipy import integrate
from scipy.interpolate import CubicSpline

logger = logging.getLogger(__name__)


class DoubleWell(ABC):
    """Nonnegative potential vanishing exactly at two zeros a < b"""

    zeros: Tuple[float, float]

    @abstractmethod
    def value(self, t):
        pass

    @abstractmethod
    def derivative(self, t):
        pass

    def second_derivative(self, t, step: float = 1e-4):
        t = np.asarray(t, dtype=float)
        return (self.derivative(t + step) - self.derivative(t - step)) / (2 * step)

    def primitive(self, t):
        """H with H' = 2 sqrt(W) and H(zeros[0]) = 0"""
        a = self.zeros[0]

        def one(x):
            val, _ = integrate.quad(lambda y: 2.0 * math.sqrt(max(float(self.value(y)), 0.0)), a, x,
                                    epsabs=1e-13, epsrel=1e-12, limit=200)
            return val

        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            return one(float(t))
        return np.vectorize(one)(t)

    @property
    def interface_constant(self) -> float:
        """H(b) - H(a)"""
        a, b = self.zeros
        return float(self.primitive(b) - self.primitive(a))

    def is_nondegenerate(self, tol: float = 1e-8) -> bool:
        return all(float(self.second_derivative(z)) > tol for z in self.zeros)

    def describe(self) -> str:
        return type(self).__name__


class QuarticWell(DoubleWell):
    """W(t) = scale (t - a)^2 (t - b)^2; scale 1/4 with zeros ±1 gives (1 - t^2)^2 / 4"""

    def __init__(self, zeros: Tuple[float, float] = (-1.0, 1.0), scale: float = 0.25):
        a, b = float(zeros[0]), float(zeros[1])
        if not a < b:
            raise ValueError("well zeros must satisfy a < b")
        if scale <= 0:
            raise ValueError("well scale must be positive")
        self.zeros = (a, b)
        self.scale = float(scale)

    def value(self, t):
        a, b = self.zeros
        return self.scale * ((t - a) * (t - b)) ** 2

    def derivative(self, t):
        a, b = self.zeros
        return 2.0 * self.scale * (t - a) * (t - b) * (2 * t - a - b)

    def second_derivative(self, t, step=None):
        a, b = self.zeros
        p = (t - a) * (t - b)
        dp = 2 * t - a - b
        return 2.0 * self.scale * (dp * dp + 2 * p)

    def primitive(self, t):
        a, b = self.zeros
        length = b - a
        y = np.asarray(t, dtype=float) - a
        f = length * y ** 2 / 2 - y ** 3 / 3
        f_top = length ** 3 / 6
        c = 2.0 * math.sqrt(self.scale)
        out = np.where(y < 0, -f, np.where(y > length, 2 * f_top - f, f)) * c
        return float(out) if out.ndim == 0 else out

    def describe(self):
        return f"quartic:{self.zeros[0]:g},{self.zeros[1]:g}:{self.scale:g}"


class CallableWell(DoubleWell):
    def __init__(self, value: Callable, derivative: Callable, zeros: Tuple[float, float]):
        self._value = value
        self._derivative = derivative
        self.zeros = (float(zeros[0]), float(zeros[1]))

    def value(self, t):
        return self._value(t)

    def derivative(self, t):
        return self._derivative(t)


class ZeroPotential:
    """V ≡ 0, the admissible non-double-well boundary potential"""

    zeros = (-1.0, 1.0)

    def value(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    def derivative(self, t):
        return np.zeros_like(np.asarray(t, dtype=float))

    def describe(self):
        return "zero"


class OptimalProfile:
    """Tabulated heteroclinic u0 of u' = sqrt(W(u)) with spline queries"""

    def __init__(self, well: DoubleWell, t: np.ndarray, u: np.ndarray):
        self.well = well
        self.t = t
        self.u = u
        self._spline = CubicSpline(t, u)
        self.lower, self.upper = well.zeros

    @property
    def half_width(self) -> float:
        return float(self.t[-1])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        inside = np.clip(t, self.t[0], self.t[-1])
        out = self._spline(inside)
        out = np.where(t > self.t[-1], self.upper, np.where(t < self.t[0], self.lower, out))
        return np.clip(out, self.lower, self.upper)

    def inverse(self, level: float) -> float:
        """t with u0(t) = level"""
        if not self.lower < level < self.upper:
            raise ValueError("level must lie strictly between the wells")
        return float(np.interp(level, self.u, self.t))

    def energy(self) -> float:
        """∫ (u0')^2 + W(u0) over the table, equal to ∫ 2 W(u0)"""
        return float(integrate.simpson(2.0 * self.well.value(self.u), x=self.t))
