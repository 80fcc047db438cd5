import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from utils.exceptions import NumericalError

logger = logging.getLogger(__name__)


def gauss_legendre(a: float, b: float, order: int, pieces: int = 1):
    """Composite Gauss-Legendre nodes and weights on [a, b]"""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, pieces + 1)
    nodes, weights = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        half = (hi - lo) / 2
        nodes.append(lo + half * (x + 1))
        weights.append(half * w)
    return np.concatenate(nodes), np.concatenate(weights)


@dataclass(frozen=True)
class PiecewiseLinear:
    """Continuous piecewise-linear function vanishing outside [knots[0], knots[-1]]"""

    knots: np.ndarray
    values: np.ndarray

    @classmethod
    def tent(cls, center: float, width: float) -> "PiecewiseLinear":
        """(width - |t - center|)_+, the autocorrelation of a cell indicator"""
        return cls(np.array([center - width, center, center + width]), np.array([0.0, width, 0.0]))

    @classmethod
    def trapezoid(cls, width: float) -> "PiecewiseLinear":
        """Sum of the three tents centered at -width, 0, width"""
        return cls(np.array([-2 * width, -width, width, 2 * width]), np.array([0.0, width, width, 0.0]))

    def __call__(self, t):
        return np.interp(t, self.knots, self.values, left=0.0, right=0.0)


def _power_integral(coeffs: np.ndarray, power: float, lo: float, hi: float) -> float:
    """∫_lo^hi r^power · Σ_m coeffs[m] r^m dr, exact"""
    total = 0.0
    for m, c in enumerate(coeffs):
        if c == 0.0:
            continue
        e = power + m + 1
        if abs(e) < 1e-12:
            if lo <= 0:
                raise NumericalError("logarithmically divergent radial integral")
            total += c * math.log(hi / lo)
        else:
            if lo <= 0 and e < 0:
                raise NumericalError("divergent radial integral at the origin")
            lo_term = 0.0 if lo <= 0 else lo ** e
            total += c * (hi ** e - lo_term) / e
    return total


def radial_moment(theta: Sequence[float], profiles: Sequence[PiecewiseLinear], power: float) -> float:
    """∫_0^∞ r^power Π_k profiles[k](r θ_k) dr along the unit direction θ"""
    breaks = [0.0]
    reach = np.inf
    for th, prof in zip(theta, profiles):
        if abs(th) < 1e-15:
            if prof(0.0) == 0.0:
                return 0.0
            continue
        r = prof.knots / th
        breaks.extend(r[r > 0].tolist())
        end = prof.knots[-1] / th if th > 0 else prof.knots[0] / th
        if end <= 0:
            return 0.0
        reach = min(reach, end)
    if not np.isfinite(reach):
        raise NumericalError("unbounded profile support along a ray")
    breaks = np.unique([b for b in breaks if b < reach] + [reach])

    total = 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi - lo <= 1e-15 * reach:
            continue
        poly = np.array([1.0])
        for th, prof in zip(theta, profiles):
            f_lo = float(prof(lo * th))
            f_hi = float(prof(hi * th))
            slope = (f_hi - f_lo) / (hi - lo)
            poly = P.polymul(poly, [f_lo - slope * lo, slope])
        total += _power_integral(poly, power, lo, hi)
    return total


def _angles_2d(profiles, extra=()):
    angles = {0.0, math.pi / 2, math.pi, 1.5 * math.pi}
    xs = np.unique(np.append(profiles[0].knots, 0.0))
    ys = np.unique(np.append(profiles[1].knots, 0.0))
    for x in xs:
        for y in ys:
            if x == 0.0 and y == 0.0:
                continue
            angles.add(math.atan2(y, x) % (2 * math.pi))
    angles.update(extra)
    return np.array(sorted(angles) + [2 * math.pi])


def sphere_integral(
        profiles: Sequence[PiecewiseLinear],
        power: float,
        angular: Callable[[np.ndarray], float] = None,
        order: int = 8,
        pieces: int = 2,
) -> float:
    """∫_{S^{n-1}} a(θ) ∫_0^∞ r^power Π_k profiles[k](r θ_k) dr dθ

    The radial integral is exact; the angular one is Gauss-Legendre on panels
    split where rays cross profile kinks (exact panels in 1D and 2D).
    """
    n = len(profiles)
    angular = angular or (lambda th: 1.0)
    if n == 1:
        return sum(angular(np.array([th])) * radial_moment([th], profiles, power) for th in (1.0, -1.0))

    if n == 2:
        total = 0.0
        edges = _angles_2d(profiles)
        for lo, hi in zip(edges[:-1], edges[1:]):
            if hi - lo < 1e-14:
                continue
            nodes, weights = gauss_legendre(lo, hi, order, pieces)
            for phi, w in zip(nodes, weights):
                th = np.array([math.cos(phi), math.sin(phi)])
                total += w * angular(th) * radial_moment(th, profiles, power)
        return total

    if n == 3:
        total = 0.0
        edges = _angles_2d(profiles[:2])
        mu_nodes, mu_weights = gauss_legendre(-1.0, 1.0, max(order - 2, 4), 4)
        for lo, hi in zip(edges[:-1], edges[1:]):
            if hi - lo < 1e-14:
                continue
            phi_nodes, phi_weights = gauss_legendre(lo, hi, max(order - 2, 4), 1)
            for phi, wp in zip(phi_nodes, phi_weights):
                for mu, wm in zip(mu_nodes, mu_weights):
                    sin_psi = math.sqrt(max(1.0 - mu * mu, 0.0))
                    th = np.array([sin_psi * math.cos(phi), sin_psi * math.sin(phi), mu])
                    total += wp * wm * angular(th) * radial_moment(th, profiles, power)
        return total

    raise NumericalError(f"unsupported dimension {n}")


def sphere_directions(n: int, count: int = None):
    """Quadrature directions and weights on S^{n-1} (weights sum to its measure)"""
    if n == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if n == 2:
        count = count or 256
        phi = (np.arange(count) + 0.5) * 2 * math.pi / count
        return np.stack([np.cos(phi), np.sin(phi)], axis=-1), np.full(count, 2 * math.pi / count)
    count = count or 1024
    # Fibonacci lattice
    k = np.arange(count) + 0.5
    mu = 1 - 2 * k / count
    phi = math.pi * (1 + math.sqrt(5)) * k
    r = np.sqrt(1 - mu ** 2)
    dirs = np.stack([r * np.cos(phi), r * np.sin(phi), mu], axis=-1)
    return dirs, np.full(count, 4 * math.pi / count)


def unit_sphere_measure(n: int) -> float:
    """|S^{n-1}|"""
    return 2 * math.pi ** (n / 2) / math.gamma(n / 2)


def unit_ball_measure(n: int) -> float:
    """ω_n, the measure of the n-dimensional unit ball (ω_0 = 1)"""
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1)
