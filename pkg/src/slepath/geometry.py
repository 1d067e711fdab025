"""Annulus crossings and dimension estimators for planar polylines.

Crossing counting follows the stopping-time scheme: tau_0 is the first time
the path leaves the open annulus {r < |z - c| < R}; afterwards the path
alternates between first hits of the closed inner ball and of the closed
complement of the outer ball, and every such hit is a crossing time,
labelled I or O by the set that was hit.  Hits are located by exact
segment-circle intersection (stable quadratic roots), so crossing times
resolve inside segments; a discriminant within 1e-12 of zero is treated as
a tangential graze and not a crossing.

The dimension estimators count axis-aligned grid cells of spacing
ell/sqrt(2) met by the polyline (each cell then has diameter ell) and the
number of pieces in the greedy partition of the curve into arcs of diameter
at most ell.  Both counts scale like ell^(-d) for a d-dimensional curve.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Tuple

import numba as nb
import numpy as np

from .loewner import (
    KappaParams,
    PlanarPath,
    _READONLY_F8,
    compute_trace,
    sample_driving,
    to_unit_disk,
)

INNER = "I"
OUTER = "O"

#: Discriminant threshold below which a segment-circle contact counts as a
#: tangential graze rather than a crossing.
TANGENT_DISC_TOL = 1e-12

_WILSON_Z = 1.96


@dataclass(frozen=True)
class Annulus:
    """Annulus {z : r < |z - center| < R} with 0 < r < R."""

    center: complex
    r: float
    R: float

    def __post_init__(self):
        center = complex(self.center)
        if not (math.isfinite(center.real) and math.isfinite(center.imag)):
            raise ValueError("annulus center must be finite")
        if not (math.isfinite(self.r) and math.isfinite(self.R)):
            raise ValueError("annulus radii must be finite")
        if not (0.0 < self.r < self.R):
            raise ValueError(f"need 0 < r < R, got r={self.r}, R={self.R}")
        object.__setattr__(self, "center", center)

    @property
    def ratio(self) -> float:
        return self.r / self.R


@dataclass(frozen=True)
class CrossingRecord:
    """Crossing times of one path through one annulus.

    tau0 is the first time the path is outside the open annulus (None if it
    never leaves); tau holds the alternating traversal times after tau0 and
    labels[i] names the target hit at tau[i]: "I" for the closed inner ball,
    "O" for the closed complement of the outer ball.
    """

    tau: Tuple[float, ...]
    labels: Tuple[str, ...]
    tau0: Optional[float]

    def __post_init__(self):
        if len(self.tau) != len(self.labels):
            raise ValueError("tau and labels must have equal length")
        for lab in self.labels:
            if lab not in (INNER, OUTER):
                raise ValueError(f"labels must be '{INNER}' or '{OUTER}', got {lab!r}")
        for prev, cur in zip(self.labels, self.labels[1:]):
            if prev == cur:
                raise ValueError("labels must alternate")
        if self.tau and self.tau0 is None:
            raise ValueError("crossing times require tau0")
        if self.tau:
            seq = (self.tau0,) + self.tau
            if any(b < a for a, b in zip(seq, seq[1:])):
                raise ValueError("crossing times must be nondecreasing")

    @property
    def count(self) -> int:
        return len(self.tau)


@dataclass(frozen=True)
class DecayFit:
    """Least-squares fit of log probability against log(r/R).

    ratios, probabilities, and half_widths echo the input estimates,
    including any zero rows that were excluded from the fit; fitted_slope
    and fit_se come from the line through the positive rows; bound_slope is
    the theoretical exponent (beta/2)(floor(k/2) - 1).
    """

    ratios: Tuple[float, ...]
    probabilities: Tuple[float, ...]
    half_widths: Tuple[float, ...]
    fitted_slope: float
    fit_se: float
    bound_slope: float

    def __post_init__(self):
        if not (len(self.ratios) == len(self.probabilities) == len(self.half_widths)):
            raise ValueError("ratios, probabilities, half_widths must align")
        for q in self.ratios:
            if not (0.0 < q < 1.0):
                raise ValueError(f"ratios must lie in (0, 1), got {q}")
        for p in self.probabilities:
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"probabilities must lie in [0, 1], got {p}")


@nb.njit(nb.float64(nb.float64, nb.float64, nb.float64, nb.float64,
                    nb.float64, nb.float64, nb.float64), cache=True)
def _entry_param(px, py, qx, qy, cx, cy, rho2):
    # Smallest s in [0, 1] with |p + s (q - p) - c|^2 <= rho2, else 2.0.
    # The start point must be strictly outside the ball.
    dx = qx - px
    dy = qy - py
    ex = px - cx
    ey = py - cy
    a = dx * dx + dy * dy
    b = 2.0 * (dx * ex + dy * ey)
    c = ex * ex + ey * ey - rho2
    if c <= 0.0:
        return 0.0
    if a == 0.0:
        return 2.0
    disc = b * b - 4.0 * a * c
    if a + b + c <= 0.0:
        # endpoint inside: one root in (0, 1], Citardauq form avoids cancellation
        root = math.sqrt(disc) if disc > 0.0 else 0.0
        s = 2.0 * c / (-b + root)
        return s if s < 1.0 else 1.0
    if disc <= TANGENT_DISC_TOL or b >= 0.0:
        return 2.0
    s = 2.0 * c / (-b + math.sqrt(disc))
    return s if s <= 1.0 else 2.0


@nb.njit(nb.float64(nb.float64, nb.float64, nb.float64, nb.float64,
                    nb.float64, nb.float64, nb.float64), cache=True)
def _exit_param(px, py, qx, qy, cx, cy, rho2):
    # Smallest s in [0, 1] with |p + s (q - p) - c|^2 >= rho2, else 2.0.
    # The start point must be strictly inside the ball.
    dx = qx - px
    dy = qy - py
    ex = px - cx
    ey = py - cy
    c = ex * ex + ey * ey - rho2
    if c >= 0.0:
        return 0.0
    a = dx * dx + dy * dy
    if a == 0.0:
        return 2.0
    b = 2.0 * (dx * ex + dy * ey)
    disc = b * b - 4.0 * a * c
    s = 2.0 * c / (-b - math.sqrt(disc))
    return s if s <= 1.0 else 2.0


@nb.njit(nb.types.Tuple((nb.int64, nb.float64, nb.boolean))(
    _READONLY_F8, _READONLY_F8, _READONLY_F8,
    nb.float64, nb.float64, nb.float64, nb.float64,
    nb.float64[::1], nb.int8[::1]), cache=True)
def _crossing_kernel(ts, xs, ys, cx, cy, r, R, tau_out, label_out):
    """State machine over segments; returns (count, tau0, tau0_found).

    Writes crossing times into tau_out and labels (1 = inner, 0 = outer)
    into label_out; a negative count reports buffer overflow, which means a
    segment crossed the circles more often than the caller allowed for.
    """
    n = xs.size
    r2 = r * r
    R2 = R * R

    ex = xs[0] - cx
    ey = ys[0] - cy
    d2 = ex * ex + ey * ey
    tau0 = ts[0]
    seg = 0
    u = 0.0
    if d2 <= r2:
        inner_side = True
    elif d2 >= R2:
        inner_side = False
    else:
        found = False
        inner_side = False
        for i in range(n - 1):
            s_in = _entry_param(xs[i], ys[i], xs[i + 1], ys[i + 1], cx, cy, r2)
            s_out = _exit_param(xs[i], ys[i], xs[i + 1], ys[i + 1], cx, cy, R2)
            s = s_in if s_in < s_out else s_out
            if s <= 1.0:
                found = True
                inner_side = s_in < s_out
                tau0 = ts[i] + s * (ts[i + 1] - ts[i])
                seg = i
                u = s
                break
        if not found:
            return 0, 0.0, False

    m = 0
    want_inner = not inner_side
    i = seg
    while i < n - 1:
        if u >= 1.0:
            i += 1
            u = 0.0
            continue
        px = xs[i] + u * (xs[i + 1] - xs[i])
        py = ys[i] + u * (ys[i + 1] - ys[i])
        if want_inner:
            s = _entry_param(px, py, xs[i + 1], ys[i + 1], cx, cy, r2)
        else:
            s = _exit_param(px, py, xs[i + 1], ys[i + 1], cx, cy, R2)
        if s <= 1.0:
            u = u + s * (1.0 - u)
            if m >= tau_out.size:
                return -1, tau0, True
            tau_out[m] = ts[i] + u * (ts[i + 1] - ts[i])
            label_out[m] = 1 if want_inner else 0
            m += 1
            want_inner = not want_inner
        else:
            i += 1
            u = 0.0
    return m, tau0, True


def crossing_times(path: PlanarPath, annulus: Annulus) -> CrossingRecord:
    """Extract the annulus crossing times of a polyline.

    The path must be fine enough that each segment crosses each boundary
    circle at most twice; with exact intersection this only matters for the
    graze tolerance, since repeated hits inside one segment are followed
    through a moving cursor.

    Returns a CrossingRecord; count is 0 (with tau0 = None) when the path
    never leaves the open annulus.
    """
    xs = np.ascontiguousarray(path.points.real)
    ys = np.ascontiguousarray(path.points.imag)
    cap = 4 * path.n_vertices + 8
    tau_buf = np.empty(cap)
    label_buf = np.empty(cap, dtype=np.int8)
    m, tau0, found = _crossing_kernel(
        path.times, xs, ys,
        annulus.center.real, annulus.center.imag, annulus.r, annulus.R,
        tau_buf, label_buf)
    if m < 0:
        raise RuntimeError("crossing buffer overflow: a segment crosses the "
                           "circles too often, refine the path")
    labels = tuple(INNER if v == 1 else OUTER for v in label_buf[:m])
    return CrossingRecord(tau=tuple(float(t) for t in tau_buf[:m]),
                          labels=labels,
                          tau0=float(tau0) if found else None)


def wilson_half_width(successes: int, n: int) -> float:
    """Half-width of the Wilson 95% score interval for a binomial rate."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not (0 <= successes <= n):
        raise ValueError("successes must lie in 0..n")
    z = _WILSON_Z
    phat = successes / n
    spread = math.sqrt(phat * (1.0 - phat) / n + z * z / (4.0 * n * n))
    return z * spread / (1.0 + z * z / n)


def crossing_counts(params: KappaParams, annuli: Sequence[Annulus],
                    n_paths: int, dt: float, n_steps: int,
                    seed: int) -> np.ndarray:
    """Crossing counts of simulated unit-disk traces through each annulus.

    Simulates n_paths independent traces (path i drawn with
    SeedSequence(seed, spawn_key=(i,))) and returns an
    (n_paths, len(annuli)) integer array of crossing counts.  All annuli
    are evaluated on the same traces: for a nested ladder r_1 < r_2 < R
    about one center, every inner-outer traversal of the thin annulus
    contains one of the wide annulus, so per-path counts are monotone and
    the resulting estimates are ordered by construction, not just in
    expectation.
    """
    annuli = tuple(annuli)
    if not annuli:
        raise ValueError("need at least one annulus")
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    counts = np.zeros((n_paths, len(annuli)), dtype=np.int64)
    for idx in range(n_paths):
        driving = sample_driving(params, n_steps, dt, seed, path_index=idx)
        disk = to_unit_disk(compute_trace(driving, params))
        for j, annulus in enumerate(annuli):
            counts[idx, j] = crossing_times(disk, annulus).count
    return counts


def crossing_probability(params: KappaParams, annulus: Annulus, k: int,
                         n_paths: int, dt: float, seed: int, *,
                         n_steps: int) -> Tuple[float, float]:
    """Estimate P(trace crosses the annulus at least k times).

    Returns (estimate, half_width) where estimate is the fraction of
    n_paths unit-disk traces with crossing count >= k and half_width is the
    Wilson 95% interval half-width.  n_steps fixes the trace length; the
    simulated horizon is n_steps * dt in capacity time.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    counts = crossing_counts(params, (annulus,), n_paths, dt, n_steps, seed)
    hits = int(np.count_nonzero(counts[:, 0] >= k))
    return hits / n_paths, wilson_half_width(hits, n_paths)


def least_squares_slope(x: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    """Slope of the least-squares line y ~ a + b x and its standard error.

    With exactly two points the fit is exact and the reported error is 0.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1 or x.size < 2:
        raise ValueError("need two 1-d arrays with at least 2 points")
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0.0:
        raise ValueError("x values must not all coincide")
    slope = float(xc @ y) / sxx
    resid = y - y.mean() - slope * xc
    dof = x.size - 2
    se = math.sqrt(float(resid @ resid) / dof / sxx) if dof > 0 else 0.0
    return slope, se


def fit_decay(estimates: Iterable[Sequence[float]], k: int,
              params: KappaParams) -> DecayFit:
    """Fit the log-log decay of crossing estimates against the ratio r/R.

    estimates is a sequence of (ratio, probability) pairs, optionally
    (ratio, probability, half_width) triples.  Zero probabilities cannot
    enter a log fit and are dropped with a warning; at least two positive
    rows must remain.  The fitted slope can be compared with bound_slope =
    (beta/2)(floor(k/2) - 1), the exponent of the theoretical upper bound
    on k-fold crossing probabilities.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    ratios = []
    probs = []
    half_widths = []
    for row in estimates:
        row = tuple(float(v) for v in row)
        if len(row) == 2:
            row = row + (0.0,)
        if len(row) != 3:
            raise ValueError("estimates rows must be (ratio, probability[, half_width])")
        ratios.append(row[0])
        probs.append(row[1])
        half_widths.append(row[2])
    probs_arr = np.array(probs)
    ratios_arr = np.array(ratios)
    keep = probs_arr > 0.0
    dropped = int(np.count_nonzero(~keep))
    if dropped:
        warnings.warn(f"dropping {dropped} zero estimate(s) from the decay fit",
                      stacklevel=2)
    if int(np.count_nonzero(keep)) < 2:
        raise ValueError("need at least 2 positive estimates to fit a slope")
    slope, se = least_squares_slope(np.log(ratios_arr[keep]),
                                    np.log(probs_arr[keep]))
    bound = (params.beta / 2.0) * (k // 2 - 1)
    return DecayFit(ratios=tuple(ratios), probabilities=tuple(probs),
                    half_widths=tuple(half_widths), fitted_slope=slope,
                    fit_se=se, bound_slope=bound)


def catalan_number(ell: int) -> int:
    """The ell-th Catalan number, binom(2 ell, ell) / (ell + 1).

    Counts nonnegative +-1 walks of length 2 ell that return to 0; crossing
    label sequences reduce to such walks.  Restricted to 0 <= ell <= 30 so
    the count stays comfortably inside exact integer range.
    """
    if int(ell) != ell:
        raise ValueError(f"ell must be an integer, got {ell!r}")
    ell = int(ell)
    if not (0 <= ell <= 30):
        raise ValueError(f"ell must lie in 0..30, got {ell}")
    return math.comb(2 * ell, ell) // (ell + 1)


@nb.njit(nb.int64(_READONLY_F8, _READONLY_F8, nb.float64, nb.int64[::1]),
         cache=True)
def _box_cells_kernel(xs, ys, h, out):
    # Grid traversal (Amanatides-Woo): write one packed key per visited
    # cell of the spacing-h grid, duplicates allowed, return the number of
    # keys or -1 on overflow.
    off = 1 << 25
    kmul = 1 << 26
    m = 0
    for i in range(xs.size - 1):
        px = xs[i]
        py = ys[i]
        qx = xs[i + 1]
        qy = ys[i + 1]
        ix = int(math.floor(px / h))
        iy = int(math.floor(py / h))
        if m >= out.size:
            return -1
        out[m] = (ix + off) * kmul + (iy + off)
        m += 1
        dx = qx - px
        dy = qy - py
        if dx > 0.0:
            step_x = 1
            tmax_x = ((ix + 1) * h - px) / dx
            tdel_x = h / dx
        elif dx < 0.0:
            step_x = -1
            tmax_x = (ix * h - px) / dx
            tdel_x = -h / dx
        else:
            step_x = 0
            tmax_x = np.inf
            tdel_x = np.inf
        if dy > 0.0:
            step_y = 1
            tmax_y = ((iy + 1) * h - py) / dy
            tdel_y = h / dy
        elif dy < 0.0:
            step_y = -1
            tmax_y = (iy * h - py) / dy
            tdel_y = -h / dy
        else:
            step_y = 0
            tmax_y = np.inf
            tdel_y = np.inf
        while True:
            if tmax_x < tmax_y:
                if tmax_x > 1.0:
                    break
                ix += step_x
                tmax_x += tdel_x
            else:
                if tmax_y > 1.0:
                    break
                iy += step_y
                tmax_y += tdel_y
            if m >= out.size:
                return -1
            out[m] = (ix + off) * kmul + (iy + off)
            m += 1
        # endpoint cell, in case accumulated tmax roundoff stopped early
        jx = int(math.floor(qx / h))
        jy = int(math.floor(qy / h))
        if m >= out.size:
            return -1
        out[m] = (jx + off) * kmul + (jy + off)
        m += 1
    return m


def box_count(path: PlanarPath, ell: float) -> int:
    """Number of grid cells of spacing ell/sqrt(2) met by the polyline.

    The grid is axis-aligned and anchored at the origin; its cells have
    diameter exactly ell, so the count is a cover count within a bounded
    factor of the minimal one, which leaves log-log slopes intact.  A
    degenerate (single-point) path occupies 1 cell.
    """
    if not (ell > 0.0 and math.isfinite(ell)):
        raise ValueError(f"ell must be positive and finite, got {ell}")
    h = ell / math.sqrt(2.0)
    xs = np.ascontiguousarray(path.points.real)
    ys = np.ascontiguousarray(path.points.imag)
    reach = max(float(np.max(np.abs(xs))), float(np.max(np.abs(ys))))
    if reach / h >= float(1 << 24):
        raise ValueError("ell is too small for the path's coordinate range")
    travel = float(np.sum(np.abs(np.diff(xs)) + np.abs(np.diff(ys))))
    cap = int(travel / h) + 4 * path.n_vertices + 8
    out = np.empty(cap, dtype=np.int64)
    m = _box_cells_kernel(xs, ys, h, out)
    if m < 0:
        raise RuntimeError("cell buffer overflow in grid traversal")
    return int(np.unique(out[:m]).size)


@nb.njit(nb.int64(_READONLY_F8, _READONLY_F8, nb.float64), cache=True)
def _tortuosity_kernel(xs, ys, ell):
    # Greedy partition with continuum cuts: extend the current piece until
    # its diameter would pass ell, cut exactly there (stable quadratic
    # root), start the next piece at the cut point.
    n = xs.size
    ell2 = ell * ell
    bx = np.empty(n + 1)
    by = np.empty(n + 1)
    bx[0] = xs[0]
    by[0] = ys[0]
    m = 1
    pieces = 1
    i = 0
    u = 0.0
    while i < n - 1:
        qx = xs[i + 1]
        qy = ys[i + 1]
        ok = True
        for j in range(m):
            ddx = qx - bx[j]
            ddy = qy - by[j]
            if ddx * ddx + ddy * ddy > ell2:
                ok = False
                break
        if ok:
            bx[m] = qx
            by[m] = qy
            m += 1
            i += 1
            u = 0.0
            continue
        px = xs[i] + u * (qx - xs[i])
        py = ys[i] + u * (qy - ys[i])
        dx = qx - px
        dy = qy - py
        a = dx * dx + dy * dy
        smin = 1.0
        for j in range(m):
            ex = px - bx[j]
            ey = py - by[j]
            c = ex * ex + ey * ey - ell2
            if c >= 0.0:
                # a piece point is already at distance ell: cut right here
                smin = 0.0
                break
            if a == 0.0:
                continue
            b = 2.0 * (dx * ex + dy * ey)
            disc = b * b - 4.0 * a * c
            s = 2.0 * c / (-b - math.sqrt(disc))
            if s < smin:
                smin = s
        single = m == 1
        pieces += 1
        bx[0] = px + smin * dx
        by[0] = py + smin * dy
        m = 1
        cut_u = u + smin * (1.0 - u)
        if cut_u > u:
            u = cut_u
        elif single:
            # ell below the float resolution of this segment: absorb the rest
            i += 1
            u = 0.0
        # otherwise keep (i, u); the fresh single-point piece makes progress
    return pieces


def tortuosity_segments(path: PlanarPath, ell: float) -> int:
    """Greedy count of the partition of the curve into diameter-<= ell arcs.

    Pieces follow the path order and may end inside segments: each piece is
    extended until taking more of the curve would push its diameter past
    ell, and the cut is placed exactly at the diameter-ell point.  Greedy
    maximal pieces are optimal for this chain-partition problem (any other
    partition's i-th cut lies no later than the greedy one, by induction).
    A relative 1e-9 slack on ell absorbs roundoff in the cut equations so
    that exact-arithmetic examples (unit segment at ell = 1/3) come out
    exact.
    """
    if not (ell > 0.0 and math.isfinite(ell)):
        raise ValueError(f"ell must be positive and finite, got {ell}")
    xs = np.ascontiguousarray(path.points.real)
    ys = np.ascontiguousarray(path.points.imag)
    return int(_tortuosity_kernel(xs, ys, ell * (1.0 + 1e-9)))
