"""Upper half-plane model of the once-punctured-torus Teichmueller space.

Points are flat-torus moduli z = x + iy, y > 0.  Distances use the
Teichmueller normalization, half the standard hyperbolic metric, so the
counting entropy is h = 2 and extremal-length ratios between two points
are bounded by exp(2 d(X, Y)).

The mapping class group is the group of 2x2 integer matrices of
determinant one, acting by Mobius transformations.  The classical
fundamental domain F = {|Re z| <= 1/2, |z| >= 1} has hyperbolic area
pi/3; the unit frame bundle of the quotient has total measure
2 pi^2 / 3 before normalization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Hyperbolic area of F and total frame measure (area x 2 pi directions).
FUND_AREA = math.pi / 3.0
TOTAL_FRAME_MEASURE = FUND_AREA * 2.0 * math.pi

GEOM_TOL = 1e-9


@dataclass(frozen=True)
class ModelPoint:
    """A marked flat-torus modulus x + iy in the upper half-plane."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("point coordinates must be finite")
        if self.y <= 0.0:
            raise ValueError(f"modulus must have positive imaginary part, got y={self.y}")

    @property
    def z(self) -> complex:
        return complex(self.x, self.y)

    @staticmethod
    def from_complex(z: complex) -> "ModelPoint":
        return ModelPoint(z.real, z.imag)


@dataclass(frozen=True)
class ModelParams:
    """Global exponents of the model: genus 1, one puncture."""

    g: int = 1
    n: int = 1
    h: int = 2
    m: int = 1

    def __post_init__(self):
        if self.h != 6 * self.g - 6 + 2 * self.n:
            raise ValueError("entropy exponent must equal 6g - 6 + 2n")
        if self.m != 3 * self.g - 3 + self.n:
            raise ValueError("curve count must equal 3g - 3 + n")


@dataclass(frozen=True)
class RealIsometry:
    """Real Mobius transformation with unit determinant."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if abs(det - 1.0) > 1e-12:
            raise ValueError(f"determinant must be 1 within 1e-12, got {det!r}")

    @staticmethod
    def identity() -> "RealIsometry":
        return RealIsometry(1.0, 0.0, 0.0, 1.0)

    def compose(self, other: "RealIsometry") -> "RealIsometry":
        return RealIsometry(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )


class MappingClass:
    """Integer unimodular matrix; entries are arbitrary-precision ints."""

    __slots__ = ("a", "b", "c", "d")

    def __init__(self, a: int, b: int, c: int, d: int):
        a, b, c, d = int(a), int(b), int(c), int(d)
        if a * d - b * c != 1:
            raise ValueError("mapping class must have determinant 1")
        self.a, self.b, self.c, self.d = a, b, c, d

    @staticmethod
    def identity() -> "MappingClass":
        return MappingClass(1, 0, 0, 1)

    @property
    def trace(self) -> int:
        return self.a + self.d

    @property
    def is_hyperbolic(self) -> bool:
        return abs(self.trace) > 2

    def inverse(self) -> "MappingClass":
        return MappingClass(self.d, -self.b, -self.c, self.a)

    def __mul__(self, other: "MappingClass") -> "MappingClass":
        return MappingClass(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, MappingClass):
            return NotImplemented
        return (self.a, self.b, self.c, self.d) == (other.a, other.b, other.c, other.d)

    def __hash__(self):
        return hash((self.a, self.b, self.c, self.d))

    def __repr__(self):
        return f"MappingClass({self.a}, {self.b}, {self.c}, {self.d})"

    def entries(self):
        return (self.a, self.b, self.c, self.d)

    def as_isometry(self) -> RealIsometry:
        return RealIsometry(float(self.a), float(self.b), float(self.c), float(self.d))

    def apply(self, z: ModelPoint) -> ModelPoint:
        return apply_isometry(self.as_isometry(), z)


def hyp_dist(a: ModelPoint, b: ModelPoint) -> float:
    """Standard hyperbolic distance."""
    t = 1.0 + ((b.x - a.x) ** 2 + (b.y - a.y) ** 2) / (2.0 * a.y * b.y)
    return math.acosh(max(t, 1.0))


def teich_dist(a: ModelPoint, b: ModelPoint) -> float:
    """Teichmueller distance: half the hyperbolic distance."""
    return 0.5 * hyp_dist(a, b)


def hyp_dist_arrays(x1, y1, x2, y2):
    t = 1.0 + ((x2 - x1) ** 2 + (y2 - y1) ** 2) / (2.0 * y1 * y2)
    return np.arccosh(np.maximum(t, 1.0))


def teich_ball_area(r: float) -> float:
    """Hyperbolic area of a ball of Teichmueller radius r (hyperbolic radius 2r)."""
    return 2.0 * math.pi * (math.cosh(2.0 * r) - 1.0)


def hyp_ball_area(rho: float) -> float:
    return 2.0 * math.pi * (math.cosh(rho) - 1.0)


def apply_isometry(g: RealIsometry, z: ModelPoint) -> ModelPoint:
    den = complex(g.c * z.x + g.d, g.c * z.y)
    if abs(den) < 1e-300:
        raise OverflowError("Mobius denominator underflow; transformation is numerically degenerate here")
    w = (complex(g.a * z.x + g.b, g.a * z.y)) / den
    return ModelPoint(w.real, w.imag)


def reduce_to_fundamental(z: ModelPoint) -> tuple[ModelPoint, MappingClass]:
    """Translate-and-invert reduction into F; returns (z', deck) with deck(z) = z'."""
    x, y = z.x, z.y
    # deck rows as integers; row operations mirror the Mobius moves
    ga, gb, gc, gd = 1, 0, 0, 1
    for _ in range(10000):
        m = round(x)
        if m != 0:
            x -= m
            ga -= m * gc
            gb -= m * gd
            continue
        r2 = x * x + y * y
        if r2 < 1.0 - 1e-12:
            # z -> -1/z
            x, y = -x / r2, y / r2
            ga, gb, gc, gd = -gc, -gd, ga, gb
            continue
        break
    else:  # pragma: no cover - reduction always terminates
        raise RuntimeError("reduction did not terminate")
    return ModelPoint(x, y), MappingClass(ga, gb, gc, gd)


def reduce_points(x, y, max_iter: int = 300):
    """Vectorized reduction of coordinate arrays into F (no deck tracking)."""
    x = np.array(x, dtype=float, copy=True)
    y = np.array(y, dtype=float, copy=True)
    for _ in range(max_iter):
        m = np.round(x)
        r2 = (x - m) ** 2 + y * y
        shift = np.abs(m) > 0
        inv = (~shift) & (r2 < 1.0 - 1e-12)
        if not (shift.any() or inv.any()):
            break
        if shift.any():
            x[shift] -= m[shift]
        if inv.any():
            r2i = x[inv] ** 2 + y[inv] ** 2
            x[inv] = -x[inv] / r2i
            y[inv] = y[inv] / r2i
    return x, y


def sample_ball(center: ModelPoint, r: float, rng) -> ModelPoint:
    """One point, uniform w.r.t. hyperbolic area on the Teichmueller-radius-r ball."""
    x, y = sample_ball_arrays(center, r, 1, rng)
    return ModelPoint(float(x[0]), float(y[0]))


def sample_ball_arrays(center: ModelPoint, r: float, n: int, rng):
    """Uniform ball sample as coordinate arrays.

    Inverse-CDF in the hyperbolic radius, uniform angle, then the affine
    isometry taking i to the center.  Draw order: radii first, then angles.
    """
    if r < 0:
        raise ValueError("radius must be nonnegative")
    u = rng.random(n)
    if r == 0.0:
        return np.full(n, center.x), np.full(n, center.y)
    rho = np.arccosh(1.0 + u * (math.cosh(2.0 * r) - 1.0))
    ang = rng.random(n) * 2.0 * math.pi
    w = np.tanh(rho / 2.0) * np.exp(1j * ang)
    z = (1j - 1j * w) / (1.0 + w)  # disk -> H, 0 -> i
    z = center.x + center.y * z
    return z.real, z.imag
