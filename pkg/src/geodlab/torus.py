"""Lengths and short-curve bias functions on the once-punctured torus.

Extremal length is the single length functional: for a curve class (p,q)
on the torus of modulus z it is |p + qz|^2 / Im z, the squared flat
length over the area.  The systole is its minimum over primitive classes.

The bias apparatus attaches to a parameter pack (s, tau, K, eps ladder)
the functions f_j = prod (eps_i / l_i)^s, u = sum f_j, the tail sums
u_j, and G = prod l_i^{-1/2}.  Ladder values decay so fast that they are
stored as logarithms; everything that consumes them works in log space
and only exponentiates quantities that are representable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from math import gcd

import numpy as np

from .halfplane import ModelPoint, reduce_points, reduce_to_fundamental

# Largest possible systole, attained at the hexagonal point.
MAX_SYSTOLE = 2.0 / math.sqrt(3.0)

# On F the systole is attained among these classes: any |q| >= 2 gives
# Ext >= q^2 y >= 4*(sqrt(3)/2) > MAX_SYSTOLE, and |p| >= 2 with |q| <= 1
# is dominated by the (1, +-1) candidates.
_FUND_CANDIDATES = ((1, 0), (0, 1), (1, 1), (1, -1))


@dataclass(frozen=True)
class CurveClass:
    """Primitive homotopy class (p, q), normalized so q > 0 or (p,q) = (1,0)."""

    p: int
    q: int

    def __post_init__(self):
        if gcd(self.p, self.q) != 1:
            raise ValueError(f"curve class must be primitive, got ({self.p}, {self.q})")
        if self.q < 0 or (self.q == 0 and self.p < 0):
            raise ValueError("curve class must be normalized with q > 0, or (1, 0)")

    @staticmethod
    def normalized(p: int, q: int) -> "CurveClass":
        g = gcd(p, q)
        if g == 0:
            raise ValueError("curve class (0, 0) is not a curve")
        p, q = p // g, q // g
        if q < 0 or (q == 0 and p < 0):
            p, q = -p, -q
        return CurveClass(p, q)


def extremal_length(curve: CurveClass, z: ModelPoint) -> float:
    return ((curve.p + curve.q * z.x) ** 2 + (curve.q * z.y) ** 2) / z.y


def systole(z: ModelPoint) -> tuple[CurveClass, float]:
    """Shortest curve class and its extremal length; ties break lexicographically.

    Reduce to F, minimize over the four candidate classes there, and pull
    the winner back through the deck to the original marking.
    """
    zr, deck = reduce_to_fundamental(z)
    cands = []
    for p, q in _FUND_CANDIDATES:
        val = ((p + q * zr.x) ** 2 + (q * zr.y) ** 2) / zr.y
        # Ext((p,q), z) = Ext((pa - qb, -pc + qd), deck z); invert that map.
        p0 = deck.d * p + deck.b * q
        q0 = deck.c * p + deck.a * q
        if q0 < 0 or (q0 == 0 and p0 < 0):
            p0, q0 = -p0, -q0
        cands.append((val, p0, q0))
    val, p0, q0 = min(cands)
    return CurveClass(p0, q0), val


def systole_values(x, y, max_iter: int = 300):
    """Vectorized systole extremal lengths (values only)."""
    xr, yr = reduce_points(x, y, max_iter=max_iter)
    v = 1.0 / yr
    v = np.minimum(v, (xr * xr + yr * yr) / yr)
    v = np.minimum(v, ((1.0 + xr) ** 2 + yr * yr) / yr)
    v = np.minimum(v, ((1.0 - xr) ** 2 + yr * yr) / yr)
    return v


@dataclass(frozen=True)
class BiasParams:
    """Parameter pack for the bias functions.

    The ladder is stored in log space: for m factors at step radius tau,
    K slightly exceeds e^{2 m tau} and the eps values shrink by the factor
    K^2 (2m K^2)^{2/s} at each rung, far below float range for large
    m * tau.  log_eps[j] is log eps_{j+1}; log_eps_prime likewise.
    """

    m: int
    s: float
    tau: float
    log_K: float
    log_eps: tuple
    log_eps_prime: tuple

    @staticmethod
    def default(m: int = 1, tau: float = 3.0, s: float = 0.5) -> "BiasParams":
        """Canonical ladder: built top-down from eps_m = K^{-3}/2 with 2x slack."""
        log_K = 2.0 * m * tau + math.log1p(1e-3)
        step = 2.0 * log_K + (2.0 / s) * (math.log(2.0 * m) + 2.0 * log_K)
        log_eps = [0.0] * m
        log_eps[m - 1] = -3.0 * log_K - math.log(2.0)
        for i in range(m - 2, -1, -1):
            log_eps[i] = log_eps[i + 1] - step - math.log(2.0)
        log_eps_prime = [le - math.log(m) - 2.0 * log_K for le in log_eps]
        p = BiasParams(m, s, tau, log_K, tuple(log_eps), tuple(log_eps_prime))
        p.validate()
        return p

    @staticmethod
    def from_eps(eps, K: float, tau: float, s: float = 0.5, m: int | None = None) -> "BiasParams":
        eps = tuple(float(e) for e in eps)
        m = len(eps) if m is None else m
        if len(eps) != m:
            raise ValueError("need one eps per factor")
        log_eps = tuple(math.log(e) for e in eps)
        log_eps_prime = tuple(le - math.log(m) - 2.0 * math.log(K) for le in log_eps)
        p = BiasParams(m, s, tau, math.log(K), log_eps, log_eps_prime)
        p.validate()
        return p

    def validate(self):
        if not (0.0 < self.s < 1.0):
            raise ValueError("exponent s must lie in (0, 1)")
        if self.log_K <= 2.0 * self.m * self.tau:
            raise ValueError("K must exceed e^{2 m tau}")
        if self.log_eps[self.m - 1] >= -3.0 * self.log_K:
            raise ValueError("top eps must be below K^{-3}")
        step = 2.0 * self.log_K + (2.0 / self.s) * (math.log(2.0 * self.m) + 2.0 * self.log_K)
        for i in range(self.m - 1):
            if self.log_eps[i] >= self.log_eps[i + 1] - step:
                raise ValueError(f"eps ladder violated between rungs {i + 1} and {i + 2}")

    @property
    def K(self) -> float:
        return math.exp(self.log_K)

    def eps(self, j: int) -> float:
        """eps_j as a float; underflows to 0.0 below float range."""
        le = self.log_eps[j - 1]
        return math.exp(le) if le > -700.0 else 0.0

    def eps_prime(self, j: int) -> float:
        le = self.log_eps_prime[j - 1]
        return math.exp(le) if le > -700.0 else 0.0

    def kappa_bounds(self) -> tuple[float, float]:
        """Constants with kappa_1 u <= G <= kappa_2 u, for m = 1 and s = 1/2.

        G/u = 1/(sqrt(l) + sqrt(eps_1)) with l in (0, MAX_SYSTOLE].
        """
        if self.m != 1 or self.s != 0.5:
            raise ValueError("sandwich constants derived for the m=1, s=1/2 model only")
        se = math.exp(0.5 * self.log_eps[0])
        return 1.0 / (math.sqrt(MAX_SYSTOLE) + se), 1.0 / se


@dataclass(frozen=True)
class BiasEvaluation:
    """Sorted short-curve lengths and derived bias values at one point."""

    lengths: tuple
    log_f: tuple  # log f_0 .. log f_m
    f: tuple      # f_0 .. f_m as floats (inf if out of range)
    u: float
    u_tail: tuple  # u_j = sum_{k >= j} f_k for j = 0 .. m
    G: float


def _exp_safe(v: float) -> float:
    if v > 709.0:
        return math.inf
    return math.exp(v)


def bias_eval(z: ModelPoint, params: BiasParams) -> BiasEvaluation:
    if params.m != 1:
        raise ValueError("single-surface bias evaluation is the m = 1 case; use the product module beyond that")
    _, l1 = systole(z)
    log_f1 = params.s * (params.log_eps[0] - math.log(l1))
    f = (1.0, _exp_safe(log_f1))
    u1 = f[1]
    u = f[0] + u1
    G = l1 ** -0.5
    return BiasEvaluation(
        lengths=(l1,),
        log_f=(0.0, log_f1),
        f=f,
        u=u,
        u_tail=(u, u1),
        G=G,
    )


def in_region_W(j: int, z: ModelPoint, params: BiasParams) -> bool:
    """True iff the (j+1)-th shortest length exceeds its ladder threshold.

    For j = m there is no (m+1)-th curve and the region is everything.
    Comparison happens in log space so it stays meaningful when the
    threshold underflows floats.
    """
    if not (0 <= j <= params.m):
        raise ValueError(f"region index must lie in [0, {params.m}]")
    if j == params.m:
        return True
    if params.m != 1:
        raise ValueError("intermediate regions on a single torus need m = 1; use the product module")
    _, l = systole(z)  # the (j+1)-th shortest here is the systole (j = 0)
    return math.log(l) > params.log_eps_prime[j]
