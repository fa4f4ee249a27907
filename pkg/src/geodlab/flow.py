"""Geodesic flow on the unit-frame space of the model surface.

A frame is a real 2x2 matrix A of determinant 1: the base point is A
applied to i, the direction is encoded in how A rotates the vertical.
Flowing for time t multiplies A on the right by diag(e^t, e^-t), which
moves the base point Teichmueller distance t along its geodesic.  Deck
reduction multiplies on the left by integer matrices and is tracked
exactly in int64, so a flow-and-return event hands back the precise
group element that closes the orbit.  Everything downstream (mixing
correlations, the closed-orbit census, recurrence statistics) is built
from these four moves: build frames, flow, reduce, test a box.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .halfplane import TOTAL_FRAME_MEASURE, MappingClass, ModelPoint, hyp_ball_area
from .report import fmt_value
from .torus import systole_values
from .words import (
    axis_samples,
    conjugacy_word,
    teich_length_from_trace,
    word_to_matrix,
)

YMAX = 1e3
MAX_CENSUS_TIME = 5.0
MIN_MIXING_SAMPLES = 10_000


# ---------------------------------------------------------------------------
# Frames.

def frames_from_points(x, y, th) -> np.ndarray:
    """Unit frames at base points x + iy pointing in direction th."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    th = np.asarray(th, dtype=float)
    sq = np.sqrt(y)
    phi = (math.pi / 2 - th) / 2.0
    c, s = np.cos(phi), np.sin(phi)
    A = np.empty(x.shape + (2, 2))
    A[..., 0, 0] = sq * c + (x / sq) * s
    A[..., 0, 1] = -sq * s + (x / sq) * c
    A[..., 1, 0] = s / sq
    A[..., 1, 1] = c / sq
    return A


def frame_base_dir(A: np.ndarray):
    """Base point coordinates and direction angle of each frame."""
    a, b = A[..., 0, 0], A[..., 0, 1]
    c, d = A[..., 1, 0], A[..., 1, 1]
    den = c * c + d * d
    x = (a * c + b * d) / den
    y = 1.0 / den
    th = np.mod(math.pi / 2 - 2.0 * np.arctan2(c, d), 2.0 * math.pi)
    return x, y, th


def flow(A: np.ndarray, t: float) -> np.ndarray:
    B = A.copy()
    B[..., :, 0] *= math.exp(t)
    B[..., :, 1] *= math.exp(-t)
    return B


def reduce_frames(A: np.ndarray, max_iter: int = 300):
    """Left-multiply each frame into the fundamental domain.

    Returns (deck, reduced) with deck integral and reduced = deck . A.
    """
    B = A.copy()
    n = B.shape[0]
    g = np.zeros((n, 2, 2), dtype=np.int64)
    g[:, 0, 0] = 1
    g[:, 1, 1] = 1
    for _ in range(max_iter):
        x, y, _ = frame_base_dir(B)
        m = np.round(x)
        r2 = (x - m) ** 2 + y * y
        need_shift = np.abs(m) > 0
        need_inv = (~need_shift) & (r2 < 1.0 - 1e-12)
        if not (need_shift.any() or need_inv.any()):
            return g, B
        if need_shift.any():
            mm = m[need_shift]
            B[need_shift, 0, 0] -= mm * B[need_shift, 1, 0]
            B[need_shift, 0, 1] -= mm * B[need_shift, 1, 1]
            mi = mm.astype(np.int64)
            g[need_shift, 0, 0] -= mi * g[need_shift, 1, 0]
            g[need_shift, 0, 1] -= mi * g[need_shift, 1, 1]
        if need_inv.any():
            t0 = B[need_inv, 0, :].copy()
            B[need_inv, 0, :] = -B[need_inv, 1, :]
            B[need_inv, 1, :] = t0
            t1 = g[need_inv, 0, :].copy()
            g[need_inv, 0, :] = -g[need_inv, 1, :]
            g[need_inv, 1, :] = t1
    raise RuntimeError("frame reduction did not converge")


def stable_push(A: np.ndarray, s: float) -> np.ndarray:
    """Move along the strong stable leaf: right-multiply by [[1, s], [0, 1]]."""
    B = A.copy()
    B[..., :, 1] += s * B[..., :, 0]
    return B


def same_stable_leaf(A: np.ndarray, B: np.ndarray, tol: float = 1e-9) -> bool:
    """Leaf membership via the first-column cross product, which the push
    leaves untouched and the flow only rescales."""
    cross = A[..., 0, 0] * B[..., 1, 0] - B[..., 0, 0] * A[..., 1, 0]
    scale = (np.abs(A[..., 0, 0]) + np.abs(A[..., 1, 0])) * (
        np.abs(B[..., 0, 0]) + np.abs(B[..., 1, 0]))
    return bool(np.all(np.abs(cross) <= tol * np.maximum(scale, 1.0)))


def stable_contraction_data(frame: np.ndarray, s: float, times) -> list:
    """(t, leaf parameter s e^{-2t}, measured base separation) per time."""
    out = []
    pushed = stable_push(frame, s)
    for t in times:
        ft = flow(frame, float(t))
        pt = flow(pushed, float(t))
        x1, y1, _ = frame_base_dir(ft)
        x2, y2, _ = frame_base_dir(pt)
        arg = 1.0 + ((x1 - x2) ** 2 + (y1 - y2) ** 2) / (2.0 * y1 * y2)
        sep = float(np.arccosh(np.maximum(arg, 1.0)).reshape(-1)[0])
        out.append((float(t), s * math.exp(-2.0 * float(t)), sep))
    return out


# ---------------------------------------------------------------------------
# Sampling.

def sample_fund(n: int, rng):
    """Uniform hyperbolic-area base points of the fundamental domain,
    cusp truncated at height YMAX."""
    out_x = np.empty(0)
    out_y = np.empty(0)
    ylo = math.sqrt(3.0) / 2.0
    while len(out_x) < n:
        m = int((n - len(out_x)) * 1.6) + 16
        x = rng.random(m) - 0.5
        u = rng.random(m)
        y = 1.0 / (1.0 / ylo - u * (1.0 / ylo - 1.0 / YMAX))
        ok = x * x + y * y >= 1.0
        out_x = np.concatenate([out_x, x[ok]])
        out_y = np.concatenate([out_y, y[ok]])
    return out_x[:n], out_y[:n]


def sample_fund_frames(n: int, rng):
    """Near-uniform frames: area-uniform base point, then uniform angle."""
    x, y = sample_fund(n, rng)
    th = rng.random(n) * 2.0 * math.pi
    return x, y, th


# ---------------------------------------------------------------------------
# Boxes.

@dataclass(frozen=True)
class Box:
    """Product box in frame space: a metric disc of Teichmueller radius
    `radius` around the center, times an angle window of width dtheta."""

    center: ModelPoint
    radius: float
    theta0: float
    dtheta: float

    @staticmethod
    def with_measure(center: ModelPoint, radius: float, theta0: float,
                     fraction: float) -> "Box":
        """Choose the angle width so the box occupies the given fraction
        of the total frame measure."""
        if not (0.0 < radius and 0.0 < fraction < 1.0):
            raise ValueError("need radius > 0 and fraction in (0, 1)")
        dtheta = fraction * TOTAL_FRAME_MEASURE / hyp_ball_area(2.0 * radius)
        if dtheta > 2.0 * math.pi:
            raise ValueError("fraction too large for this radius")
        return Box(center, radius, theta0, dtheta)

    @property
    def fraction(self) -> float:
        return hyp_ball_area(2.0 * self.radius) * self.dtheta / TOTAL_FRAME_MEASURE

    @property
    def measure(self) -> float:
        return hyp_ball_area(2.0 * self.radius) * self.dtheta


def default_box() -> Box:
    return Box.with_measure(ModelPoint(0.0, 1.5), 0.15, math.pi / 2, 0.02)


def in_box_coords(box: Box, x, y, th):
    cx, cy = box.center.x, box.center.y
    chd = 1.0 + ((x - cx) ** 2 + (y - cy) ** 2) / (2.0 * y * cy)
    ok_z = chd <= math.cosh(2.0 * box.radius)
    dth = np.abs(np.mod(th - box.theta0 + math.pi, 2.0 * math.pi) - math.pi)
    return ok_z & (dth <= box.dtheta / 2.0)


def in_box(box: Box, frames: np.ndarray):
    x, y, th = frame_base_dir(frames)
    return in_box_coords(box, x, y, th)


def sample_box(box: Box, n: int, rng) -> np.ndarray:
    from .halfplane import sample_ball_arrays

    x, y = sample_ball_arrays(box.center, box.radius, n, rng)
    th = box.theta0 + (rng.random(n) - 0.5) * box.dtheta
    return frames_from_points(x, y, th)


# ---------------------------------------------------------------------------
# Mixing.

@dataclass(frozen=True)
class MixingEstimate:
    time: float
    samples: int
    estimate: float
    std_error: float
    target: float

    @property
    def diff(self) -> float:
        return self.estimate - self.target

    @property
    def z_score(self) -> float:
        if self.std_error == 0.0:  # all batches identical at short times
            return 0.0 if self.diff == 0.0 else math.copysign(math.inf, self.diff)
        return self.diff / self.std_error


def mixing_correlation(box: Box, t: float, n: int, rng,
                       batches: int = 20) -> MixingEstimate:
    """Estimate the normalized correlation m(U, flow t back into U).

    Samples the box uniformly, flows, reduces, and re-tests membership;
    the estimate multiplies the hit rate by the box fraction, so for a
    mixing flow it approaches fraction squared as t grows.
    """
    if n < MIN_MIXING_SAMPLES:
        raise ValueError(f"need at least {MIN_MIXING_SAMPLES} samples")
    if n % batches != 0:
        raise ValueError("sample count must split into equal batches")
    A = sample_box(box, n, rng)
    _, B = reduce_frames(flow(A, t))
    hit = in_box(box, B).astype(float)
    mu = box.fraction
    est = mu * float(hit.mean())
    bm = mu * hit.reshape(batches, -1).mean(axis=1)
    se = float(bm.std(ddof=1)) / math.sqrt(batches)
    return MixingEstimate(time=t, samples=n, estimate=est,
                          std_error=se, target=mu * mu)


# ---------------------------------------------------------------------------
# Closed-orbit census.

def axis_distance(matrix, z: ModelPoint) -> float:
    """Teichmueller distance from z to the axis of a hyperbolic matrix."""
    a, b, c, d = (float(v) for v in matrix)
    tr = a + d
    if abs(tr) <= 2.0:
        raise ValueError("axis is defined for hyperbolic classes only")
    if c == 0.0:
        xf = b / (d - a)
        return 0.5 * math.asinh(abs(z.x - xf) / z.y)
    disc = math.sqrt(tr * tr - 4.0)
    p = (a - d + disc) / (2.0 * c)
    q = (a - d - disc) / (2.0 * c)
    w = complex(z.x - p, z.y) / complex(z.x - q, z.y)
    return 0.5 * math.acosh(max(abs(w) / abs(w.imag), 1.0))


def closing_constants(box: Box, t: float):
    """(c1, eps): orbit-closing length slack and axis capture radius, in
    hyperbolic units, for return events of flow time t through the box."""
    rh = 2.0 * box.radius
    if t <= rh:
        raise ValueError("flow time must exceed the box diameter scale")
    c1 = (rh + box.dtheta / 2.0) / (1.0 - math.exp(-4.0 * (t - rh))) + 1e-3
    eps = rh + math.log(math.cosh(2.0 * c1)) / 2.0
    return c1, eps


class NonClosingError(RuntimeError):
    """A flow-and-return event failed to certify a closed orbit."""


@dataclass(frozen=True)
class CensusComponent:
    deck: tuple
    word: str
    trace: int
    length: float
    events: int
    est_measure: float
    axis_dist: float
    axis_min_systole: float
    thick_time_fraction: float


@dataclass
class FlowCensus:
    box: Box
    time: float
    samples: int
    in_box_count: int
    events: int
    nonhyperbolic_events: int
    components: list

    @property
    def component_count(self) -> int:
        return len(self.components)

    @property
    def count_ratio(self) -> float:
        """Components seen over the fraction * e^{2t} growth prediction."""
        return self.component_count / (self.box.fraction * math.exp(2.0 * self.time))

    def frac_within(self, factor: float = 3.0) -> float:
        """Share of components whose event rate sits within the given
        factor of the equidistribution prediction fraction * e^{-2t}."""
        target = self.box.fraction * math.exp(-2.0 * self.time)
        ok = sum(1 for c in self.components
                 if target / factor <= c.events / self.samples <= target * factor)
        return ok / self.component_count if self.components else float("nan")

    @property
    def worst_length_gap(self) -> float:
        return max((abs(c.length - self.time) for c in self.components), default=0.0)

    @property
    def worst_axis_dist(self) -> float:
        return max((c.axis_dist for c in self.components), default=0.0)

    def to_csv(self, stream) -> None:
        own = isinstance(stream, (str, bytes))
        fh = open(stream, "w") if own else stream
        try:
            fh.write("word;trace;length;count_of_events;est_component_measure\n")
            for c in self.components:
                fh.write(f"{c.word};{c.trace};{fmt_value(c.length)};"
                         f"{c.events};{fmt_value(c.est_measure)}\n")
        finally:
            if own:
                fh.close()


def margulis_count(box: Box, t: float, n: int, rng,
                   delta_thick: float | None = None) -> FlowCensus:
    """Census of flow-and-return events through the box at flow time t.

    Each event yields the integer deck element closing the orbit; events
    are grouped by that element (trace sign normalized), and every group
    is certified: hyperbolic, length near t, axis near the box center.
    An optional delta_thick keeps only regular components, those whose
    closed orbit spends at least half its time with systole >= delta_thick.
    """
    if not (0.0 < t <= MAX_CENSUS_TIME):
        raise ValueError(f"census flow time must lie in (0, {MAX_CENSUS_TIME}]")
    x, y, th = sample_fund_frames(n, rng)
    sel = in_box_coords(box, x, y, th)
    A = frames_from_points(x[sel], y[sel], th[sel])
    g, B = reduce_frames(flow(A, t))
    hit = in_box(box, B)
    gh = g[hit]
    traces = gh[:, 0, 0] + gh[:, 1, 1]
    gh = gh * np.where(traces < 0, -1, 1)[:, None, None]

    counts: dict = {}
    for mat in gh:
        key = (int(mat[0, 0]), int(mat[0, 1]), int(mat[1, 0]), int(mat[1, 1]))
        counts[key] = counts.get(key, 0) + 1

    comps = []
    nonhyp = 0
    for key, cnt in counts.items():
        tr = key[0] + key[3]
        if tr <= 2:
            nonhyp += cnt
            continue
        length = teich_length_from_trace(float(tr))
        exps = conjugacy_word(MappingClass(*key))
        _, ax, ay = axis_samples(exps)
        sysv = systole_values(ax, ay)
        thick = (float((sysv >= delta_thick).mean())
                 if delta_thick is not None else 1.0)
        comps.append(CensusComponent(
            deck=key,
            word=",".join(str(e) for e in exps),
            trace=tr,
            length=length,
            events=cnt,
            est_measure=cnt / n * TOTAL_FRAME_MEASURE,
            axis_dist=axis_distance(key, box.center),
            axis_min_systole=float(sysv.min()),
            thick_time_fraction=thick,
        ))
    if delta_thick is not None:
        comps = [c for c in comps if c.thick_time_fraction >= 0.5]
    comps.sort(key=lambda c: (-c.events, c.trace, c.word))
    if len(comps) < 10:
        warnings.warn("census found fewer than 10 components; "
                      "increase the sample count or the flow time")
    return FlowCensus(box=box, time=t, samples=n, in_box_count=int(sel.sum()),
                      events=int(hit.sum()), nonhyperbolic_events=nonhyp,
                      components=comps)


@dataclass(frozen=True)
class ClosedOrbit:
    deck: tuple
    word: str
    length: float
    axis_dist: float
    length_slack: float
    axis_slack: float


def close_orbit(frame: np.ndarray, t: float, box: Box) -> ClosedOrbit:
    """Certify the closed orbit shadowing one flow-and-return event.

    The frame must start in the box and land back in it after flowing for
    time t; the deck element of the return is then checked against the
    closing constants.  Any failure raises NonClosingError.
    """
    A = frame.reshape(1, 2, 2).astype(float)
    if not bool(in_box(box, A)[0]):
        raise NonClosingError("frame does not start in the box")
    g, B = reduce_frames(flow(A, t))
    if not bool(in_box(box, B)[0]):
        raise NonClosingError("orbit does not return to the box")
    key = (int(g[0, 0, 0]), int(g[0, 0, 1]), int(g[0, 1, 0]), int(g[0, 1, 1]))
    tr = key[0] + key[3]
    if tr < 0:
        key = tuple(-v for v in key)
        tr = -tr
    if tr <= 2:
        raise NonClosingError("return element is not hyperbolic")
    c1, eps = closing_constants(box, t)
    length = teich_length_from_trace(float(tr))
    adist = axis_distance(key, box.center)
    if abs(length - t) > 2.0 * c1:
        raise NonClosingError("certified length bound violated")
    if 2.0 * adist > eps:
        raise NonClosingError("axis strays from the box center")
    exps = conjugacy_word(MappingClass(*key))
    return ClosedOrbit(deck=key, word=",".join(str(e) for e in exps),
                       length=length, axis_dist=adist,
                       length_slack=2.0 * c1 - abs(length - t),
                       axis_slack=eps - 2.0 * adist)


def word_trace_consistent(census: FlowCensus) -> bool:
    """Every census word rebuilds a matrix with the census trace."""
    for c in census.components:
        exps = tuple(int(v) for v in c.word.split(","))
        if word_to_matrix(exps).trace != c.trace:
            return False
    return True


# ---------------------------------------------------------------------------
# Recurrence into the thin part.

@dataclass(frozen=True)
class RecurrenceResult:
    horizon: int
    samples: int
    delta: float
    theta: float
    fractions: tuple

    @property
    def decay_exponent(self) -> float:
        """Exponential decay rate of the flagged fraction, from the
        log-linear fit over horizons with nonzero fraction."""
        from .report import ls_slope

        rs = [r + 1 for r in range(self.horizon) if self.fractions[r] > 0.0]
        if len(rs) < 2:
            return float("nan")
        slope, _ = ls_slope([float(r) for r in rs],
                            [math.log(self.fractions[r - 1]) for r in rs])
        return -slope


def recurrence_fraction(n: int, horizon: int, delta: float, theta: float,
                        rng) -> RecurrenceResult:
    """Fraction of unit-speed trajectories spending at least a theta share
    of their first r steps in the delta-thin part, for r = 1..horizon."""
    if horizon < 2:
        raise ValueError("horizon must be at least 2")
    if not (0.0 < delta < 1.0 and 0.0 < theta < 1.0):
        raise ValueError("delta and theta must lie in (0, 1)")
    x, y, th = sample_fund_frames(n, rng)
    B = frames_from_points(x, y, th)
    thin_steps = np.zeros(n, dtype=np.int64)
    fracs = []
    for r in range(1, horizon + 1):
        _, B = reduce_frames(flow(B, 1.0))
        bx, by, _ = frame_base_dir(B)
        thin_steps += systole_values(bx, by) < delta
        flagged = thin_steps >= theta * r - 1e-12
        fracs.append(float(flagged.mean()))
    return RecurrenceResult(horizon=horizon, samples=n, delta=delta,
                            theta=theta, fractions=tuple(fracs))
