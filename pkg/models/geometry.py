import logging
from abc import ABC, abstractmethod
from typing import Sequence

import numpy as np

logger = logging.getLogger(__name__)


class GeometricSet(ABC):
    """Analytic subset of R^n given as an expression tree"""

    exact_distance = True

    @abstractmethod
    def contains(self, points: np.ndarray) -> np.ndarray:
        """Membership of points with shape (..., n)"""

    @abstractmethod
    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        """Negative inside, positive outside"""

    @abstractmethod
    def erode(self, delta: float) -> "GeometricSet":
        """Inward retraction by delta; negative delta dilates"""

    @abstractmethod
    def scaled(self, factor: float) -> "GeometricSet":
        """Dilation about the origin"""

    @abstractmethod
    def describe(self) -> str:
        pass

    def normal(self, points: np.ndarray, step: float = 1e-6) -> np.ndarray:
        """Outward unit normal from the signed-distance gradient"""
        points = np.asarray(points, dtype=float)
        n = points.shape[-1]
        grad = np.empty_like(points)
        for k in range(n):
            e = np.zeros(n)
            e[k] = step
            grad[..., k] = (self.signed_distance(points + e) - self.signed_distance(points - e)) / (2 * step)
        norm = np.linalg.norm(grad, axis=-1, keepdims=True)
        return grad / np.where(norm > 0, norm, 1.0)

    def __or__(self, other):
        return Union(self, other)

    def __and__(self, other):
        return Intersection(self, other)

    def __invert__(self):
        return Complement(self)

    def __sub__(self, other):
        return Intersection(self, Complement(other))

    def __repr__(self):
        return self.describe()


class EmptySet(GeometricSet):
    def contains(self, points):
        return np.zeros(np.asarray(points).shape[:-1], dtype=bool)

    def signed_distance(self, points):
        return np.full(np.asarray(points).shape[:-1], np.inf)

    def erode(self, delta):
        return self

    def scaled(self, factor):
        return self

    def describe(self):
        return "empty"


class FullSpace(GeometricSet):
    def contains(self, points):
        return np.ones(np.asarray(points).shape[:-1], dtype=bool)

    def signed_distance(self, points):
        return np.full(np.asarray(points).shape[:-1], -np.inf)

    def erode(self, delta):
        return self

    def scaled(self, factor):
        return self

    def describe(self):
        return "full"


class HalfSpace(GeometricSet):
    """{x : x·ν < c} with unit normal ν"""

    def __init__(self, normal: Sequence[float], offset: float = 0.0):
        normal = np.asarray(normal, dtype=float)
        length = np.linalg.norm(normal)
        if length == 0:
            raise ValueError("half-space normal must be nonzero")
        self.nu = normal / length
        self.offset = float(offset) / length

    def contains(self, points):
        return self.signed_distance(points) < 0

    def signed_distance(self, points):
        return np.asarray(points, dtype=float) @ self.nu - self.offset

    def normal(self, points, step=1e-6):
        return np.broadcast_to(self.nu, np.asarray(points).shape).copy()

    def erode(self, delta):
        return HalfSpace(self.nu, self.offset - delta)

    def scaled(self, factor):
        return HalfSpace(self.nu, self.offset * factor)

    def describe(self):
        nu = ",".join(f"{x:g}" for x in self.nu)
        return f"halfspace:{nu}:{self.offset:g}"


class Box(GeometricSet):
    def __init__(self, lower: Sequence[float], upper: Sequence[float]):
        self.lower = np.asarray(lower, dtype=float)
        self.upper = np.asarray(upper, dtype=float)
        if self.lower.shape != self.upper.shape:
            raise ValueError("box corners differ in dimension")

    def contains(self, points):
        points = np.asarray(points, dtype=float)
        return np.all((points > self.lower) & (points < self.upper), axis=-1)

    def signed_distance(self, points):
        points = np.asarray(points, dtype=float)
        center = (self.lower + self.upper) / 2
        half = (self.upper - self.lower) / 2
        q = np.abs(points - center) - half
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(np.max(q, axis=-1), 0.0)
        return outside + inside

    def erode(self, delta):
        lower, upper = self.lower + delta, self.upper - delta
        if np.any(upper <= lower):
            return EmptySet()
        return Box(lower, upper)

    def scaled(self, factor):
        return Box(self.lower * factor, self.upper * factor)

    def describe(self):
        return "box:" + ",".join(f"{lo:g},{hi:g}" for lo, hi in zip(self.lower, self.upper))


class Ball(GeometricSet):
    def __init__(self, center: Sequence[float], radius: float):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)

    def contains(self, points):
        return self.signed_distance(points) < 0

    def signed_distance(self, points):
        return np.linalg.norm(np.asarray(points, dtype=float) - self.center, axis=-1) - self.radius

    def erode(self, delta):
        if self.radius - delta <= 0:
            return EmptySet()
        return Ball(self.center, self.radius - delta)

    def scaled(self, factor):
        return Ball(self.center * factor, self.radius * factor)

    def describe(self):
        return "ball:" + ",".join(f"{c:g}" for c in self.center) + f",{self.radius:g}"


class Union(GeometricSet):
    exact_distance = False

    def __init__(self, *parts: GeometricSet):
        self.parts = parts

    def contains(self, points):
        result = self.parts[0].contains(points)
        for part in self.parts[1:]:
            result = result | part.contains(points)
        return result

    def signed_distance(self, points):
        return np.min([p.signed_distance(points) for p in self.parts], axis=0)

    def erode(self, delta):
        return Union(*(p.erode(delta) for p in self.parts))

    def scaled(self, factor):
        return Union(*(p.scaled(factor) for p in self.parts))

    def describe(self):
        return "|".join(p.describe() for p in self.parts)


class Intersection(GeometricSet):
    exact_distance = False

    def __init__(self, *parts: GeometricSet):
        self.parts = parts

    def contains(self, points):
        result = self.parts[0].contains(points)
        for part in self.parts[1:]:
            result = result & part.contains(points)
        return result

    def signed_distance(self, points):
        return np.max([p.signed_distance(points) for p in self.parts], axis=0)

    def erode(self, delta):
        return Intersection(*(p.erode(delta) for p in self.parts))

    def scaled(self, factor):
        return Intersection(*(p.scaled(factor) for p in self.parts))

    def describe(self):
        return "&".join(p.describe() for p in self.parts)


class Complement(GeometricSet):
    def __init__(self, inner: GeometricSet):
        self.inner = inner
        self.exact_distance = inner.exact_distance

    def contains(self, points):
        return ~self.inner.contains(points)

    def signed_distance(self, points):
        return -self.inner.signed_distance(points)

    def erode(self, delta):
        return Complement(self.inner.erode(-delta))

    def scaled(self, factor):
        return Complement(self.inner.scaled(factor))

    def describe(self):
        return "!" + self.inner.describe()


def _floats(text: str):
    return [float(x) for x in text.split(",") if x.strip()]


def _parse_primitive(token: str, dim: int) -> GeometricSet:
    token = token.strip()
    if token.startswith("!"):
        return Complement(_parse_primitive(token[1:], dim))
    name, _, args = token.partition(":")
    name = name.lower()
    if name == "empty":
        return EmptySet()
    if name == "full":
        return FullSpace()
    if name == "halfspace":
        # bare "halfspace" is {x_1 > 0}
        if not args:
            normal = np.zeros(dim)
            normal[0] = -1.0
            return HalfSpace(normal, 0.0)
        normal_text, _, offset_text = args.partition(":")
        return HalfSpace(_floats(normal_text), float(offset_text or 0.0))
    if name == "box":
        values = _floats(args)
        if len(values) != 2 * dim:
            raise ValueError(f"box needs {2 * dim} bounds, got {len(values)}")
        return Box(values[0::2], values[1::2])
    if name == "ball":
        values = _floats(args)
        if len(values) != dim + 1:
            raise ValueError(f"ball needs {dim} center coordinates and a radius")
        return Ball(values[:dim], values[dim])
    raise ValueError(f"unknown set primitive '{name}'")


def parse_set(text: str, dim: int) -> GeometricSet:
    """Parse 'a|b' (union) of 'x&y' (intersection) of primitives, '!' negates"""
    terms = []
    for union_part in text.split("|"):
        factors = [_parse_primitive(t, dim) for t in union_part.split("&")]
        terms.append(factors[0] if len(factors) == 1 else Intersection(*factors))
    return terms[0] if len(terms) == 1 else Union(*terms)
