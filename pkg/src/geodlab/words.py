"""Conjugacy classes of hyperbolic mapping classes as positive twist words.

Every hyperbolic mapping class of the once-punctured torus is conjugate to
a positive word R^{a1} L^{b1} ... R^{ak} L^{bk} in the elementary twists
R = [[1,0],[1,1]] and L = [[1,1],[0,1]], all exponents at least 1, unique
up to rotation by whole (R, L) syllable pairs.  The exponent tuple in its
lexicographically least pair rotation is the canonical label used
throughout the package.

Translation length in the Teichmueller metric is arccosh(trace / 2), half
the hyperbolic translation length.  Closed-geodesic counts grow like
e^{2R} / (2R), which the counting tests exercise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .halfplane import MappingClass
from .torus import systole_values

# Enumeration beyond this radius needs hundreds of thousands of classes
# and is out of desk-scale budget.
MAX_ENUM_LENGTH = 7.5


def teich_length_from_trace(trace) -> float:
    """Translation length arccosh(t/2); exact in log form for huge traces."""
    t = abs(trace)
    if t <= 2:
        raise ValueError(f"trace {trace} is not hyperbolic")
    if t < 1e300:
        return math.acosh(t / 2.0)
    return math.log(t)  # relative error below 1 ulp once 4/t^2 underflows


def canonical(exps: Sequence[int]) -> tuple:
    """Lexicographically least rotation by (R, L) syllable pairs."""
    exps = tuple(int(e) for e in exps)
    if len(exps) < 2 or len(exps) % 2 != 0:
        raise ValueError("a word is a flat tuple of (R, L) exponent pairs")
    if any(e < 1 for e in exps):
        raise ValueError("exponents must be positive integers")
    pairs = [(exps[i], exps[i + 1]) for i in range(0, len(exps), 2)]
    k = len(pairs)
    return min(
        tuple(v for p in pairs[i:] + pairs[:i] for v in p) for i in range(k)
    )


def is_primitive(exps: Sequence[int]) -> bool:
    """False iff the syllable-pair sequence is a proper power."""
    exps = tuple(exps)
    pairs = [(exps[i], exps[i + 1]) for i in range(0, len(exps), 2)]
    k = len(pairs)
    for d in range(1, k):
        if k % d == 0 and pairs[:d] * (k // d) == pairs:
            return False
    return True


def _append_pair(m: tuple, a: int, b: int) -> tuple:
    # m . R^a L^b with R^a L^b = [[1, b], [a, ab+1]]
    m00, m01, m10, m11 = m
    e = a * b + 1
    return (m00 + m01 * a, m00 * b + m01 * e, m10 + m11 * a, m10 * b + m11 * e)


def word_to_matrix(exps: Sequence[int]) -> MappingClass:
    exps = tuple(int(e) for e in exps)
    if len(exps) < 2 or len(exps) % 2 != 0 or any(e < 1 for e in exps):
        raise ValueError("a word is a flat tuple of positive (R, L) exponent pairs")
    m = (1, 0, 0, 1)
    for i in range(0, len(exps), 2):
        m = _append_pair(m, exps[i], exps[i + 1])
    return MappingClass(*m)


@dataclass(frozen=True)
class GeodesicClass:
    """A conjugacy class: canonical exponents, trace, Teichmueller length."""

    exps: tuple
    trace: int
    length: float

    @staticmethod
    def from_exps(exps: Sequence[int]) -> "GeodesicClass":
        c = canonical(exps)
        t = word_to_matrix(c).trace
        return GeodesicClass(c, t, teich_length_from_trace(t))

    @property
    def matrix(self) -> MappingClass:
        return word_to_matrix(self.exps)

    @property
    def label(self) -> str:
        return ",".join(str(e) for e in self.exps)


def _dfs_sequences(trace_cap: float) -> list:
    """All exponent sequences (every rotation) with trace <= trace_cap.

    Appending a pair and raising either exponent both strictly increase the
    trace, so the search tree is pruned exactly.
    """
    out = []

    def rec(m, exps):
        if exps:
            out.append((tuple(exps), m[0] + m[3]))
        a = 1
        while True:
            cur = _append_pair(m, a, 1)
            if cur[0] + cur[3] > trace_cap:
                break
            b = 1
            while cur[0] + cur[3] <= trace_cap:
                exps.extend((a, b))
                rec(cur, exps)
                del exps[-2:]
                b += 1
                cur = _append_pair(m, a, b)
            a += 1

    rec((1, 0, 0, 1), [])
    return out


def enumerate_classes(max_length: float, primitive_only: bool = True) -> list:
    """All conjugacy classes with translation length <= max_length."""
    if max_length > MAX_ENUM_LENGTH:
        raise ValueError(
            f"enumeration above length {MAX_ENUM_LENGTH} is out of budget; narrow the window"
        )
    if max_length <= 0:
        return []
    trace_cap = 2.0 * math.cosh(max_length)
    seen = {}
    for exps, t in _dfs_sequences(trace_cap):
        c = canonical(exps)
        if c not in seen:
            seen[c] = t
    classes = [
        GeodesicClass(c, t, teich_length_from_trace(t))
        for c, t in seen.items()
        if not primitive_only or is_primitive(c)
    ]
    classes.sort(key=lambda g: (g.trace, g.exps))
    return classes


def count_classes(max_length: float, primitive_only: bool = True) -> int:
    return len(enumerate_classes(max_length, primitive_only=primitive_only))


# ---------------------------------------------------------------------------
# Independent cross-check: enumerate matrices entry by entry and peel.


def _peel_letters(a: int, b: int, c: int, d: int):
    """Greedy left peel of a nonnegative det-1 matrix into R/L letters."""
    out = []
    for _ in range(100000):
        if (a, b, c, d) == (1, 0, 0, 1):
            return out
        if c >= a and d >= b:
            out.append("R")
            c -= a
            d -= b
        elif a >= c and b >= d:
            out.append("L")
            a -= c
            b -= d
        else:
            return None
    return None


def _letters_to_exps(letters):
    if not letters or "R" not in letters or "L" not in letters:
        return None
    n = len(letters)
    start = None
    for i in range(n):
        if letters[i] == "R" and letters[i - 1] == "L":
            start = i
            break
    rot = letters[start:] + letters[:start]
    exps = []
    run_char, run = rot[0], 0
    for ch in rot:
        if ch == run_char:
            run += 1
        else:
            exps.append(run)
            run_char, run = ch, 1
    exps.append(run)
    return tuple(exps)


def classes_by_entry_search(trace_max: int, primitive_only: bool = True) -> set:
    """Canonical words of every class with 3 <= trace <= trace_max.

    Positive-word matrices have all entries >= 1, and in any such matrix
    each entry is below the trace, so looping the diagonal and factoring
    the off-diagonal product ad - 1 visits every class.  A completely
    different route from the word DFS, kept as its consistency check.
    """
    found = set()
    for t in range(3, trace_max + 1):
        for a in range(1, t):
            d = t - a
            n = a * d - 1
            if n <= 0:
                continue
            for b in range(1, n + 1):
                if n % b:
                    continue
                letters = _peel_letters(a, b, n // b, d)
                if letters is None:
                    continue
                exps = _letters_to_exps(letters)
                if exps is None:
                    continue
                if primitive_only and not is_primitive(exps):
                    continue
                found.add(canonical(exps))
    return found


# ---------------------------------------------------------------------------
# Arbitrary hyperbolic integer matrix -> canonical word, via the exact
# continued fraction of its attracting fixed point.


def _cmp_quad(A: int, B: int, D: int, X: int) -> int:
    """Sign of A + B sqrt(D) - X, exactly (D not a perfect square)."""
    t = A - X
    if B == 0:
        return (t > 0) - (t < 0)
    if B > 0:
        if t >= 0:
            return 1
        return 1 if B * B * D > t * t else -1
    if t <= 0:
        return -1
    return 1 if t * t > B * B * D else -1


def _ge_quad(P: int, Q: int, D: int, n: int) -> bool:
    """(P + sqrt(D)) / Q >= n, exactly."""
    m = n * Q - P
    if Q > 0:
        return m <= 0 or D > m * m
    return m >= 0 and D < m * m


def _floor_quad(P: int, Q: int, D: int) -> int:
    f = int(math.floor((P + math.sqrt(D)) / Q))
    while _ge_quad(P, Q, D, f + 1):
        f += 1
    while not _ge_quad(P, Q, D, f):
        f -= 1
    return f


def _is_attracting(P: int, Q: int, D: int, c: int, d: int) -> bool:
    # derivative at z = (P + sqrt(D))/Q is 1/(cz + d)^2; attracting iff |cz + d| > 1
    A, B = c * P + d * Q, c
    q = abs(Q)
    return _cmp_quad(A, B, D, q) > 0 or _cmp_quad(A, B, D, -q) < 0


def conjugacy_word(m: MappingClass) -> tuple:
    """Canonical word exponents of the conjugacy class of m.

    Expands the attracting fixed point as an exact integer continued
    fraction until the state repeats; the repeating block spells the word,
    with the R/L roles fixed by the parity of the preperiod (each step
    conjugates by a determinant -1 move).  A trace mismatch afterwards
    means m is a proper power of the primitive block.
    """
    a, b, c, d = m.a, m.b, m.c, m.d
    t = a + d
    if t < 0:
        a, b, c, d, t = -a, -b, -c, -d, -t
    if t <= 2:
        raise ValueError(f"trace {m.trace} is not hyperbolic")
    if c == 0:
        raise ValueError("hyperbolic integer matrices have a nonzero lower-left entry")
    D = t * t - 4
    P, Q = a - d, 2 * c
    if not _is_attracting(P, Q, D, c, d):
        P, Q = -P, -Q
        if not _is_attracting(P, Q, D, c, d):
            raise ArithmeticError("neither fixed point tested attracting")

    digits, seen = [], {}
    while True:
        key = (P, Q)
        if key in seen:
            j0 = seen[key]
            cycle = digits[j0:]
            break
        seen[key] = len(digits)
        g = _floor_quad(P, Q, D)
        digits.append(g)
        Pp = P - g * Q
        num = D - Pp * Pp
        if num % Q:
            raise ArithmeticError("continued fraction invariant broken")
        P, Q = -Pp, num // Q
        if len(digits) > 100000:
            raise ArithmeticError("continued fraction failed to cycle")

    if len(cycle) % 2:
        cycle = cycle + cycle
    if j0 % 2 == 1:
        exps = tuple(cycle)
    else:
        exps = tuple(cycle[1:] + cycle[:1])
    exps = canonical(exps)

    w = word_to_matrix(exps)
    if w.trace == t:
        return exps
    cur, k = w, 1
    while cur.trace < t and k <= 64:
        cur = cur * w
        k += 1
    if cur.trace != t:
        raise ArithmeticError(f"trace {t} is not a power of the primitive block {exps}")
    return canonical(exps * k)


# ---------------------------------------------------------------------------
# Shortest curve along the axis.


def axis_samples(exps: Sequence[int], step: float = 0.02):
    """Points along one period of the axis, spaced ~2*step in arc length.

    The sample grid always contains the apex of the axis semicircle, where
    the systole along simple axes is attained.
    """
    if not (0.0 < step <= 0.1):
        raise ValueError("step must lie in (0, 0.1]")
    m = word_to_matrix(exps)
    t = m.trace
    length = teich_length_from_trace(t)
    disc = math.sqrt(float(t * t - 4))
    c0 = (m.a - m.d) / (2.0 * m.c)
    r0 = disc / (2.0 * m.c)
    half = 2 * max(math.ceil(length / (2.0 * step)), 1)
    n = half + 1
    sigma = (np.arange(n) - half // 2) * (2.0 * length / half)
    x = c0 + r0 * np.tanh(sigma)
    y = r0 / np.cosh(sigma)
    return sigma, x, y


def min_systole_along_axis(exps: Sequence[int], step: float = 0.02) -> float:
    _, x, y = axis_samples(exps, step)
    return float(systole_values(x, y).min())


def min_systole_batch(classes: Sequence[GeodesicClass], step: float = 0.02,
                      chunk_points: int = 500000) -> np.ndarray:
    """Sampled axis-systole minimum per class, batching the reduction."""
    mins = np.empty(len(classes))
    xs, ys, starts, idxs, total = [], [], [], [], 0

    def flush():
        nonlocal xs, ys, starts, idxs, total
        if not idxs:
            return
        vals = systole_values(np.concatenate(xs), np.concatenate(ys))
        seg = np.minimum.reduceat(vals, np.array(starts))
        for i, gi in enumerate(idxs):
            mins[gi] = seg[i]
        xs, ys, starts, idxs, total = [], [], [], [], 0

    for gi, g in enumerate(classes):
        _, x, y = axis_samples(g.exps, step)
        starts.append(total)
        idxs.append(gi)
        xs.append(x)
        ys.append(y)
        total += len(x)
        if total >= chunk_points:
            flush()
    flush()
    return mins


def write_class_table(classes: Sequence[GeodesicClass], stream, step: float = 0.02,
                      min_systoles: Iterable[float] | None = None) -> None:
    """CSV rows word;trace;length;min_systole (word is comma-joined)."""
    ms = np.asarray(list(min_systoles)) if min_systoles is not None \
        else min_systole_batch(classes, step)
    if len(ms) != len(classes):
        raise ValueError("one min_systole per class")
    close = False
    if isinstance(stream, (str, bytes)) or hasattr(stream, "__fspath__"):
        stream = open(stream, "w", encoding="utf-8")
        close = True
    try:
        stream.write("word;trace;length;min_systole\n")
        for g, v in zip(classes, ms):
            stream.write(f"{g.label};{g.trace};{g.length:.9g};{v:.9g}\n")
    finally:
        if close:
            stream.close()
