"""Rough-path computations on planar polylines.

Signatures are truncated tensor series over the two-letter alphabet {1, 2}
(letter 1 = real coordinate, letter 2 = imaginary coordinate), stored as
word -> coefficient maps with words written as digit strings.  A straight
segment has the tensor exponential of its increment as signature, and
polyline signatures are built by Chen concatenation; level 3 additionally
has a vectorized evaluation used by the Monte Carlo drivers.

Also here: the shuffle product on words, Riemann-Stieltjes / Young
integration with dyadic refinement, p-variation of a polyline restricted to
vertex times, and the greedy simple sub-polyline approximation.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, List, Sequence, Tuple, Union

import numpy as np

from .loewner import PlanarPath

Word = str
ALPHABET = ("1", "2")


@lru_cache(maxsize=None)
def all_words(level: int) -> Tuple[Word, ...]:
    """All words over {1, 2} of length 0..level, shortest first."""
    out: List[Word] = []
    for n in range(level + 1):
        out.extend("".join(w) for w in itertools.product(ALPHABET, repeat=n))
    return tuple(out)


class TensorSeries:
    """Truncated signature coefficients: every word of length <= level is
    present in ``coeffs`` and the empty word has coefficient 1 unless the
    series was built with unit=False (group-like elements always have 1).
    """

    __slots__ = ("level", "coeffs")

    def __init__(self, level: int, coeffs: Dict[Word, float]):
        if level < 1:
            raise ValueError(f"level must be >= 1, got {level}")
        self.level = level
        full = {w: 0.0 for w in all_words(level)}
        for w, c in coeffs.items():
            if len(w) > level or any(ch not in "12" for ch in w):
                raise ValueError(f"bad word {w!r} for level {level}")
            full[w] = float(c)
        self.coeffs = full

    def __getitem__(self, word: Word) -> float:
        return self.coeffs[word]

    def __repr__(self):
        nonzero = {w: c for w, c in self.coeffs.items() if c != 0.0}
        return f"TensorSeries(level={self.level}, {nonzero})"

    def to_json(self, **extra) -> str:
        payload = {"level": self.level, "coeffs": self.coeffs}
        payload.update(extra)
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TensorSeries":
        payload = json.loads(text)
        return cls(int(payload["level"]), payload["coeffs"])


def identity_series(level: int) -> TensorSeries:
    """The unit of the tensor algebra: empty word 1, everything else 0."""
    return TensorSeries(level, {"": 1.0})


def segment_signature(increment: Union[complex, Tuple[float, float]], level: int) -> TensorSeries:
    """Signature of a straight segment: the tensor exponential.

    The coefficient of k_1...k_n is the product of the increment components
    selected by the letters, divided by n!.
    """
    if level < 1:
        raise ValueError(f"level must be >= 1, got {level}")
    if isinstance(increment, tuple):
        comp = {"1": float(increment[0]), "2": float(increment[1])}
    else:
        z = complex(increment)
        comp = {"1": z.real, "2": z.imag}
    coeffs = {"": 1.0}
    for n in range(1, level + 1):
        fact = math.factorial(n)
        for w in itertools.product(ALPHABET, repeat=n):
            prod = 1.0
            for ch in w:
                prod *= comp[ch]
            coeffs["".join(w)] = prod / fact
    return TensorSeries(level, coeffs)


def chen_concat(s1: TensorSeries, s2: TensorSeries) -> TensorSeries:
    """Concatenation of signatures: truncated tensor product.

    Coefficient of w is the sum over splittings w = uv of s1(u) * s2(v).
    """
    if s1.level != s2.level:
        raise ValueError(f"level mismatch: {s1.level} vs {s2.level}")
    out = {}
    for w in all_words(s1.level):
        acc = 0.0
        for cut in range(len(w) + 1):
            acc += s1.coeffs[w[:cut]] * s2.coeffs[w[cut:]]
        out[w] = acc
    return TensorSeries(s1.level, out)


def _exclusive_cumsum(arr: np.ndarray) -> np.ndarray:
    out = np.empty_like(arr)
    out[0] = 0.0
    np.cumsum(arr[:-1], out=out[1:])
    return out


def _signature3_coeffs(dx: np.ndarray, dy: np.ndarray) -> Dict[Word, float]:
    """Level-3 polyline signature from segment increments, O(n) per word.

    Uses running prefixes: contribution of segment i to word u..w splits by
    how many letters the segment supplies (Chen expansion of one step).
    """
    d = {"1": dx, "2": dy}
    p1 = {u: _exclusive_cumsum(d[u]) for u in ALPHABET}
    coeffs: Dict[Word, float] = {"": 1.0}
    for u in ALPHABET:
        coeffs[u] = float(d[u].sum())
    p2 = {}
    for u in ALPHABET:
        for v in ALPHABET:
            terms = p1[u] * d[v] + 0.5 * d[u] * d[v]
            coeffs[u + v] = float(terms.sum())
            p2[u + v] = _exclusive_cumsum(terms)
    for u in ALPHABET:
        for v in ALPHABET:
            for w in ALPHABET:
                terms = (p2[u + v] * d[w]
                         + 0.5 * p1[u] * (d[v] * d[w])
                         + (d[u] * d[v] * d[w]) / 6.0)
                coeffs[u + v + w] = float(terms.sum())
    return coeffs


def _as_points(path: Union[PlanarPath, np.ndarray, Sequence[complex]]) -> np.ndarray:
    if isinstance(path, PlanarPath):
        return path.points
    return np.asarray(path, dtype=np.complex128)


def signature_of_polyline(path: Union[PlanarPath, np.ndarray, Sequence[complex]],
                          level: int) -> TensorSeries:
    """Truncated signature of a polyline (exact iterated integrals).

    Level 3 uses the vectorized prefix scheme; other levels fold segment
    exponentials with ``chen_concat``.  The result is invariant under
    reparametrization and under inserting collinear intermediate vertices.
    """
    points = _as_points(path)
    if points.size < 2:
        raise ValueError("a polyline needs at least 2 vertices")
    inc = np.diff(points)
    if level == 3:
        return TensorSeries(3, _signature3_coeffs(inc.real.copy(), inc.imag.copy()))
    sig = identity_series(level)
    for z in inc:
        sig = chen_concat(sig, segment_signature(complex(z), level))
    return sig


def shuffle_product(w1: Word, w2: Word) -> Dict[Word, int]:
    """Multiset of interleavings of w1 and w2 that preserve internal order.

    Returns word -> multiplicity; the multiplicities sum to
    binomial(|w1| + |w2|, |w1|).
    """
    for w in (w1, w2):
        if any(ch not in "12" for ch in w):
            raise ValueError(f"word {w!r} is not over the alphabet {{1,2}}")

    @lru_cache(maxsize=None)
    def rec(u: Word, v: Word) -> Tuple[Tuple[Word, int], ...]:
        if not u:
            return ((v, 1),)
        if not v:
            return ((u, 1),)
        acc: Counter = Counter()
        for w, m in rec(u[:-1], v):
            acc[w + u[-1]] += m
        for w, m in rec(u, v[:-1]):
            acc[w + v[-1]] += m
        return tuple(acc.items())

    return dict(Counter(dict(rec(w1, w2))))


# ---------------------------------------------------------------------------
# Young integration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Partition:
    """Strictly increasing grid of times spanning an interval."""

    times: np.ndarray

    def __post_init__(self):
        times = np.ascontiguousarray(self.times, dtype=np.float64)
        if times.ndim != 1 or times.size < 2:
            raise ValueError("a partition needs at least 2 times")
        if not np.all(np.diff(times) > 0.0):
            raise ValueError("partition times must be strictly increasing")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)

    @property
    def mesh(self) -> float:
        return float(np.max(np.diff(self.times)))

    def refined(self, splits: int) -> "Partition":
        """Insert 2**splits - 1 equally spaced points in every gap."""
        return Partition(_dyadic_refine(self.times, splits))


def _dyadic_refine(times: np.ndarray, splits: int) -> np.ndarray:
    if splits == 0:
        return times
    k = 1 << splits
    frac = np.arange(k) / k
    fine = (times[:-1, None] + np.diff(times)[:, None] * frac[None, :]).ravel()
    return np.append(fine, times[-1])


@dataclass(frozen=True)
class YoungResult:
    """Stieltjes sums across dyadic refinements.

    value is the sum at the finest level; extrapolated removes the leading
    h^2 error term by one Richardson step (useful for smooth integrands).
    """

    value: float
    sums: Tuple[float, ...]
    extrapolated: float


def young_integral(f: Union[np.ndarray, Sequence[float], Callable[[np.ndarray], np.ndarray]],
                   g_times: Union[Partition, np.ndarray, Sequence[float]],
                   g_values: Union[np.ndarray, Sequence[float]],
                   refinement_levels: int = 8) -> YoungResult:
    """Stieltjes integral of f against g with dyadic refinement diagnostics.

    Args:
        f: samples of the integrand on the base grid, or a callable
           evaluated at refined nodes.  Sampled integrands are interpolated
           linearly at refined nodes.
        g_times: base grid (strictly increasing, or a Partition).
        g_values: integrator samples on the base grid; refined nodes use
           linear interpolation, so for piecewise-linear f and g the sums
           are exact at every level.
        refinement_levels: number of dyadic refinement rounds; the result
           carries refinement_levels + 1 sums.

    Each sum is the average-endpoint Stieltjes sum
    sum_j (f(t_j) + f(t_{j-1})) / 2 * (g(t_j) - g(t_{j-1})), whose refinement
    limit is the Young integral whenever it exists.
    """
    if refinement_levels < 1:
        raise ValueError("refinement_levels must be >= 1")
    times = g_times.times if isinstance(g_times, Partition) else np.asarray(g_times, dtype=np.float64)
    gvals = np.asarray(g_values, dtype=np.float64)
    if times.ndim != 1 or times.size < 2 or not np.all(np.diff(times) > 0.0):
        raise ValueError("g_times must be a strictly increasing 1-d grid")
    if gvals.shape != times.shape:
        raise ValueError("g_values must be sampled on g_times")
    if not callable(f):
        f_arr = np.asarray(f, dtype=np.float64)
        if f_arr.shape != times.shape:
            raise ValueError("sampled f must live on the same grid as g")

    sums = []
    for lev in range(refinement_levels + 1):
        t = _dyadic_refine(times, lev)
        g = np.interp(t, times, gvals)
        fv = np.asarray(f(t), dtype=np.float64) if callable(f) else np.interp(t, times, f_arr)
        ds = np.diff(g)
        sums.append(float(np.sum(0.5 * (fv[1:] + fv[:-1]) * ds)))
    extrapolated = sums[-1] + (sums[-1] - sums[-2]) / 3.0
    return YoungResult(value=sums[-1], sums=tuple(sums), extrapolated=extrapolated)


# ---------------------------------------------------------------------------
# p-variation
# ---------------------------------------------------------------------------

def p_variation(path: Union[PlanarPath, np.ndarray, Sequence[complex]], p: float) -> float:
    """p-variation seminorm of a polyline over partitions at vertex times.

    Dynamic programming over vertices: best[j] is the largest sum of
    |increment|^p over partitions of vertices 0..j; the answer is
    best[-1]**(1/p).  Exact for p = 1 (total length); for p > 1 it is the
    true supremum whenever no segment is retraced.
    """
    if p < 1.0:
        raise ValueError(f"p must be >= 1, got {p}")
    points = _as_points(path)
    n = points.size
    if n < 2:
        raise ValueError("a polyline needs at least 2 vertices")
    best = np.zeros(n)
    for j in range(1, n):
        best[j] = np.max(best[:j] + np.abs(points[j] - points[:j]) ** p)
    return float(best[-1] ** (1.0 / p))


# ---------------------------------------------------------------------------
# Simple approximation
# ---------------------------------------------------------------------------

class SimplicityError(RuntimeError):
    """The produced sub-polyline could not be certified simple.

    Attributes
    ----------
    pair : tuple
        Indices (i, j) of the offending segment pair in the output polyline
        (segment k joins vertices k and k+1), or None when the failure is a
        mesh constraint that cannot be met.
    """

    def __init__(self, message: str, pair=None):
        self.pair = pair
        super().__init__(message)


def _first_segment_intersection(points: np.ndarray, slack: float = 1e-12):
    """Index pair of the first intersecting non-adjacent segment pair, else None.

    Closed-segment test with an orientation slack: predicates within slack
    of zero fall back to bounding-interval overlap checks.  Adjacent
    segments are checked for overlap beyond their shared vertex.
    """
    x = points.real
    y = points.imag
    m = points.size - 1
    if m < 2:
        return None
    scale = max(np.ptp(x), np.ptp(y), 1e-300)
    # orientation determinants scale like length^2
    tol = slack * scale * scale

    ax, ay = x[:-1], y[:-1]
    bx, by = x[1:], y[1:]
    lox, hix = np.minimum(ax, bx), np.maximum(ax, bx)
    loy, hiy = np.minimum(ay, by), np.maximum(ay, by)

    chunk = max(1, int(2_000_000 // max(m, 1)))
    for lo in range(0, m, chunk):
        hi = min(lo + chunk, m)
        i = np.arange(lo, hi)[:, None]
        j = np.arange(m)[None, :]
        boxes = ((np.maximum(lox[lo:hi, None], lox[None, :])
                  <= np.minimum(hix[lo:hi, None], hix[None, :]) + slack * scale)
                 & (np.maximum(loy[lo:hi, None], loy[None, :])
                    <= np.minimum(hiy[lo:hi, None], hiy[None, :]) + slack * scale))
        mask = (j > i + 1) & boxes
        if not mask.any():
            continue
        aix, aiy, bix, biy = ax[lo:hi, None], ay[lo:hi, None], bx[lo:hi, None], by[lo:hi, None]
        ajx, ajy, bjx, bjy = ax[None, :], ay[None, :], bx[None, :], by[None, :]
        d1 = (bjx - ajx) * (aiy - ajy) - (bjy - ajy) * (aix - ajx)
        d2 = (bjx - ajx) * (biy - ajy) - (bjy - ajy) * (bix - ajx)
        d3 = (bix - aix) * (ajy - aiy) - (biy - aiy) * (ajx - aix)
        d4 = (bix - aix) * (bjy - aiy) - (biy - aiy) * (bjx - aix)
        opp12 = ((d1 > tol) & (d2 < -tol)) | ((d1 < -tol) & (d2 > tol))
        opp34 = ((d3 > tol) & (d4 < -tol)) | ((d3 < -tol) & (d4 > tol))
        proper = opp12 & opp34 & mask
        near_zero = (np.abs(d1) <= tol) | (np.abs(d2) <= tol) \
            | (np.abs(d3) <= tol) | (np.abs(d4) <= tol)
        degenerate = mask & ~proper & near_zero
        if proper.any():
            ii, jj = np.argwhere(proper)[0]
            return int(ii + lo), int(jj)
        if degenerate.any():
            for ii, jj in np.argwhere(degenerate):
                gi, gj = int(ii + lo), int(jj)
                if _segments_touch(points[gi], points[gi + 1], points[gj], points[gj + 1], tol):
                    return gi, gj
    # adjacent pairs: reject genuine backtracking overlap
    for i in range(m - 1):
        u = points[i] - points[i + 1]
        v = points[i + 2] - points[i + 1]
        cr = u.real * v.imag - u.imag * v.real
        dot = u.real * v.real + u.imag * v.imag
        if abs(cr) <= tol and dot > tol:
            return i, i + 1
    return None


def _segments_touch(p1, p2, q1, q2, tol):
    """Careful closed-segment intersection for (near-)degenerate pairs."""
    def on_segment(a, b, c):
        # c collinear-ish with a-b: is it inside the bounding box?
        return (min(a.real, b.real) - tol <= c.real <= max(a.real, b.real) + tol
                and min(a.imag, b.imag) - tol <= c.imag <= max(a.imag, b.imag) + tol)

    def orient(a, b, c):
        return (b.real - a.real) * (c.imag - a.imag) - (b.imag - a.imag) * (c.real - a.real)

    d1 = orient(q1, q2, p1)
    d2 = orient(q1, q2, p2)
    d3 = orient(p1, p2, q1)
    d4 = orient(p1, p2, q2)
    if ((d1 > tol and d2 < -tol) or (d1 < -tol and d2 > tol)) and \
       ((d3 > tol and d4 < -tol) or (d3 < -tol and d4 > tol)):
        return True
    if abs(d1) <= tol and on_segment(q1, q2, p1):
        return True
    if abs(d2) <= tol and on_segment(q1, q2, p2):
        return True
    if abs(d3) <= tol and on_segment(p1, p2, q1):
        return True
    if abs(d4) <= tol and on_segment(p1, p2, q2):
        return True
    return False


def simple_approximation(path: PlanarPath, epsilon: float) -> PlanarPath:
    """Sub-polyline with time gaps and chord lengths below epsilon, certified
    to have no self-intersections.

    A greedy pass extends every step to the farthest vertex satisfying both
    constraints; the output is then certified by an exact pairwise segment
    intersection test (1e-12 orientation slack).  Inputs that already meet
    the constraints and certify simple are returned unchanged.

    Raises SimplicityError when certification fails (the offending segment
    pair is attached) or when a single input step already violates the
    constraints.
    """
    if epsilon <= 0.0:
        raise ValueError("epsilon must be positive")
    t = path.times
    pts = path.points
    gaps_ok = np.all(np.diff(t) < epsilon) and np.all(np.abs(np.diff(pts)) < epsilon)
    if gaps_ok and _first_segment_intersection(pts) is None:
        return path

    n = pts.size
    keep = [0]
    i = 0
    while i < n - 1:
        j_hi = int(np.searchsorted(t, t[i] + epsilon, side="left")) - 1
        j_hi = min(max(j_hi, i + 1), n - 1)
        j = None
        for cand in range(j_hi, i, -1):
            if abs(pts[cand] - pts[i]) < epsilon and t[cand] - t[i] < epsilon:
                j = cand
                break
        if j is None:
            raise SimplicityError(
                f"no admissible step from vertex {i}: the next vertex is already "
                f">= epsilon away in space or time")
        keep.append(j)
        i = j
    idx = np.array(keep)
    out = PlanarPath(t[idx], pts[idx], path.domain_tag)
    bad = _first_segment_intersection(out.points)
    if bad is not None:
        raise SimplicityError(
            f"output segments {bad[0]} and {bad[1]} intersect", pair=bad)
    return out
