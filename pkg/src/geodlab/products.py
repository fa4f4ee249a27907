"""Products of once-punctured tori and the ball-averaging inequalities.

The product of m factors carries the sup metric.  Its short curves are
the factor systoles sorted ascending, and the bias pack assigns eps_i to
the i-th shortest.  Deep in a cusp the systole is exactly 1/Im, so the
average of the contraction ratio (l(X)/l(z))^s over a ball is an explicit
two-dimensional integral; the Monte Carlo checks are compared against
that quadrature, and the ladder inequalities are then verified pointwise
with normalized statistics whose ratios never leave float range.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad

from .halfplane import ModelPoint, sample_ball_arrays, teich_dist
from .report import ls_slope
from .torus import BiasParams, bias_eval, systole, systole_values


@dataclass(frozen=True)
class ProductPoint:
    factors: tuple

    def __post_init__(self):
        if not self.factors or not all(isinstance(f, ModelPoint) for f in self.factors):
            raise ValueError("a product point is a nonempty tuple of model points")

    @property
    def m(self) -> int:
        return len(self.factors)


def sup_dist(X: ProductPoint, Y: ProductPoint) -> float:
    if X.m != Y.m:
        raise ValueError("points live in different products")
    return max(teich_dist(a, b) for a, b in zip(X.factors, Y.factors))


def sorted_lengths(X: ProductPoint) -> tuple:
    return tuple(sorted(systole(f)[1] for f in X.factors))


@dataclass(frozen=True)
class ProductBiasEvaluation:
    lengths: tuple
    log_f: tuple
    f: tuple
    u: float
    u_tail: tuple
    G: float


def _exp_safe(v: float) -> float:
    return math.inf if v > 709.0 else math.exp(v)


def product_bias_eval(X: ProductPoint, params: BiasParams) -> ProductBiasEvaluation:
    if X.m != params.m:
        raise ValueError(f"point has {X.m} factors, parameters expect {params.m}")
    lengths = sorted_lengths(X)
    log_f = [0.0]
    for i, l in enumerate(lengths):
        log_f.append(log_f[-1] + params.s * (params.log_eps[i] - math.log(l)))
    f = tuple(_exp_safe(v) for v in log_f)
    tails = np.cumsum(f[::-1])[::-1]
    G = math.prod(l ** -0.5 for l in lengths)
    return ProductBiasEvaluation(
        lengths=lengths,
        log_f=tuple(log_f),
        f=f,
        u=float(tails[0]),
        u_tail=tuple(float(t) for t in tails),
        G=G,
    )


def in_region_W(j: int, X: ProductPoint, params: BiasParams) -> bool:
    if not (0 <= j <= params.m):
        raise ValueError(f"region index must lie in [0, {params.m}]")
    if j == params.m:
        return True
    l_next = sorted_lengths(X)[j]
    return math.log(l_next) > params.log_eps_prime[j]


# ---------------------------------------------------------------------------
# Exact ball average of the single-factor contraction ratio, deep in a cusp.


def _ring_average(rho: float, s: float) -> float:
    # the integrand is mildly singular near t = 0 at large rho; the
    # roundoff warning is harmless at the accuracy used here
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        return quad(
            lambda t: (math.cosh(rho) - math.sinh(rho) * math.cos(t)) ** (-s),
            0.0,
            2.0 * math.pi,
            limit=200,
        )[0]


def contraction_ratio_exact(tau: float, s: float = 0.5) -> float:
    """Ball average of (l(X)/l(z))^s over the radius-tau ball, deep in a cusp.

    Depth makes the systole exactly 1/Im, so the ratio depends only on the
    hyperbolic polar coordinates and the average is a plain double integral
    over the radius-2*tau hyperbolic ball.
    """
    if tau <= 0:
        raise ValueError("radius must be positive")
    if not (0.0 < s < 1.0):
        raise ValueError("exponent must lie in (0, 1)")
    area = 2.0 * math.pi * (math.cosh(2.0 * tau) - 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        val = quad(lambda p: _ring_average(p, s) * math.sinh(p), 0.0, 2.0 * tau, limit=400)[0]
    return val / area


def contraction_prefactor_constant(taus, s: float = 0.5) -> float:
    """Smallest C with ratio(tau) <= C * tau * e^(-tau) on the grid."""
    return max(contraction_ratio_exact(t, s) / (t * math.exp(-t)) for t in taus)


def ball_decay_slope(j: int, taus, s: float = 0.5) -> float:
    """Prefactor-removed decay rate of the j-factor ball average.

    The j-factor average is ratio(tau)^j by independence; removing the
    polynomial prefactor tau^j leaves a clean exponential whose least
    squares slope against tau sits near -j.
    """
    vals = [j * math.log(contraction_ratio_exact(t, s)) - j * math.log(t) for t in taus]
    return ls_slope(list(taus), vals)[0]


@dataclass(frozen=True)
class ContractionCheck:
    tau: float
    factors: int
    samples: int
    exact: float
    estimate: float
    sigma: float

    @property
    def ok(self) -> bool:
        return abs(self.estimate - self.exact) <= 3.0 * self.sigma + 1e-12


def verify_contraction(j: int, tau: float, n: int, rng, s: float = 0.5,
                       depth_log: float | None = None) -> ContractionCheck:
    """Monte Carlo ball average of the j-factor ratio against the quadrature.

    All j factors sit at the same representable depth; the ratio statistic
    is a product of per-factor (Im z / Im X)^s terms, each bounded by
    e^(2 s tau), so no bias thresholds enter the estimate at all.
    """
    if n < 1000:
        raise ValueError("fewer than 1000 samples is rejected as meaningless")
    if j < 1:
        raise ValueError("need at least one factor")
    if depth_log is None:
        params = BiasParams.default(m=j, tau=tau)
        depth_log = -params.log_eps_prime[j - 1] + 2.0 * tau + 2.0
    depth_log = min(depth_log, 225.0)  # keep Im and its ball within float range
    y0 = math.exp(depth_log)
    stat = np.ones(n)
    center = ModelPoint(0.0, y0)
    for _ in range(j):
        _, y = sample_ball_arrays(center, tau, n, rng)
        stat *= (y / y0) ** s
    exact = contraction_ratio_exact(tau, s) ** j
    est = float(stat.mean())
    sigma = float(stat.std(ddof=1) / math.sqrt(n))
    return ContractionCheck(tau=tau, factors=j, samples=n, exact=exact,
                            estimate=est, sigma=sigma)


# ---------------------------------------------------------------------------
# Pointwise verification of the averaging inequalities for u and its tails.


@dataclass(frozen=True)
class PointCheck:
    x: float
    y: float
    region: int
    reading: str
    estimate: float
    bound: float
    sigma: float

    @property
    def excess(self) -> float:
        return self.estimate - self.bound

    @property
    def ok(self) -> bool:
        return self.excess <= 3.0 * self.sigma


@dataclass
class InequalityReport:
    contraction_bound: float
    tau: float
    samples: int
    checks: list

    @property
    def thin_checks(self) -> list:
        return [c for c in self.checks if c.region >= 1]

    @property
    def thick_checks(self) -> list:
        return [c for c in self.checks if c.region == 0]

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.thin_checks)

    @property
    def worst_thin_score(self) -> float:
        return max((c.excess / c.sigma for c in self.thin_checks), default=-math.inf)

    @property
    def max_thick_excess(self) -> float:
        return max((c.excess for c in self.thick_checks), default=-math.inf)


def classify_region(z: ModelPoint, params: BiasParams) -> int:
    """Largest j with all of the first j lengths under their thresholds."""
    if params.m != 1:
        raise ValueError("pointwise verification is built for the m = 1 pack")
    _, l1 = systole(z)
    return 1 if math.log(l1) <= params.log_eps_prime[0] else 0


def verify_system(params: BiasParams, centers, contraction_bound: float,
                  tau: float, n: int, rng, declared_region: int | None = None) -> InequalityReport:
    """Check E[u_j(z)] <= c u_j(X) + u_{j-1}(X)/(2K) over balls around centers.

    Statistics are normalized by their center value so every sampled ratio
    is bounded by e^(2 s tau).  Both the tail reading (u_j) and the full
    reading (u) are recorded for cusp points; for points outside every cusp
    region the full reading's additive excess is recorded instead of a
    pass/fail, since u contains the non-contracting constant term.
    """
    if n < 1000:
        raise ValueError("fewer than 1000 samples is rejected as meaningless")
    if params.m != 1:
        raise ValueError("pointwise verification is built for the m = 1 pack")
    c = contraction_bound
    inv2K = 0.5 * math.exp(-params.log_K)
    checks = []
    for X in centers:
        j = classify_region(X, params)
        if declared_region is not None and j != declared_region:
            raise ValueError(
                f"point {X.z} lies in region {j}, not declared region {declared_region}"
            )
        evX = bias_eval(X, params)
        xs, ys = sample_ball_arrays(X, tau, n, rng)
        lz = systole_values(xs, ys)
        # ratio f1(z)/f1(X) without leaving float range
        r1 = np.exp(params.s * (math.log(evX.lengths[0]) - np.log(lz)))
        if j == 1:
            est = float(r1.mean())
            sig = float(r1.std(ddof=1) / math.sqrt(n))
            bound = c + (evX.u_tail[0] / evX.u_tail[1]) * inv2K
            checks.append(PointCheck(X.x, X.y, 1, "u_tail", est, bound, sig))
            ru = (1.0 + evX.f[1] * r1) / evX.u
            estu = float(ru.mean())
            sigu = float(ru.std(ddof=1) / math.sqrt(n))
            boundu = c + inv2K + 1.0 / evX.u
            checks.append(PointCheck(X.x, X.y, 1, "u", estu, boundu, sigu))
        else:
            ru = (1.0 + evX.f[1] * r1) / evX.u
            estu = float(ru.mean())
            sigu = float(ru.std(ddof=1) / math.sqrt(n))
            checks.append(PointCheck(X.x, X.y, 0, "u", estu, c, sigu))
    return InequalityReport(contraction_bound=c, tau=tau, samples=n, checks=checks)
