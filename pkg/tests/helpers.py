"""Independent reference implementations used as test oracles.

Everything here recomputes a quantity by a method unrelated to the one in
the package: nested quadrature for iterated integrals, closed-form polygon
moments, subset enumeration for p-variation, dense sampling for crossings.
Slow is fine; these only need to be right.
"""

import itertools
import math

import numpy as np
from scipy.integrate import cumulative_simpson


def iterated_integrals_quadrature(points, level=3, nodes_per_segment=9):
    """All signature coefficients of a polyline by cumulative quadrature.

    Solves S_w' = S_{w[:-1]} * d(gamma_letter)/dt segment by segment with
    Simpson's rule on a local grid.  On a polyline the level-k integrand is
    a polynomial of degree k-1 in the segment parameter, so Simpson is
    exact and the only error is roundoff.
    """
    pts = np.asarray(points, dtype=np.complex128)
    inc = np.diff(pts)
    m = inc.size
    s = np.linspace(0.0, 1.0, nodes_per_segment)
    comp = {"1": inc.real, "2": inc.imag}

    # grid functions, shape (m, nodes): value of S_w at local time s of segment j
    ones = np.ones((m, nodes_per_segment))
    grids = {"": ones}
    totals = {"": 1.0}
    words = [""]
    for n in range(1, level + 1):
        new_words = []
        for w in words:
            if len(w) != n - 1:
                continue
            for letter in ("1", "2"):
                word = w + letter
                integrand = grids[w] * comp[letter][:, None]
                local = cumulative_simpson(integrand, x=s, axis=1, initial=0.0)
                seg_totals = local[:, -1]
                offsets = np.concatenate(([0.0], np.cumsum(seg_totals)[:-1]))
                grids[word] = local + offsets[:, None]
                totals[word] = float(offsets[-1] + seg_totals[-1])
                new_words.append(word)
        words.extend(new_words)
    return totals


def polygon_y_moment_boundary(points):
    """Exact line integral of y^2 dx along a closed polyline, edge by edge.

    By Green's theorem this equals -2 * integral of y over the enclosed
    region when the curve is positively oriented.
    """
    pts = np.asarray(points, dtype=np.complex128)
    x0, y0 = pts[:-1].real, pts[:-1].imag
    dx, dy = np.diff(pts.real), np.diff(pts.imag)
    return float(np.sum(dx * (y0 * y0 + y0 * dy + dy * dy / 3.0)))


def p_variation_bruteforce(points, p):
    """Maximize over every subset of interior vertices; exponential cost."""
    pts = np.asarray(points, dtype=np.complex128)
    n = pts.size
    best = 0.0
    for r in range(n - 1):
        for mid in itertools.combinations(range(1, n - 1), r):
            seq = (0, *mid, n - 1)
            total = sum(abs(pts[b] - pts[a]) ** p for a, b in zip(seq[:-1], seq[1:]))
            best = max(best, total)
    return best ** (1.0 / p)


def dyck_path_count(length):
    """Number of nonnegative +1/-1 walks from 0 to 0, by explicit recursion."""
    def rec(pos, left):
        if left == 0:
            return 1 if pos == 0 else 0
        total = rec(pos + 1, left - 1)
        if pos > 0:
            total += rec(pos - 1, left - 1)
        return total
    return rec(0, 2 * length)


def crossing_count_dense(points, center, r, R, samples_per_segment=2000):
    """Annulus crossing count by brute-force dense sampling of the polyline.

    Tracks the same state machine as the fast implementation but on a fine
    sampling of each segment, so geometric intersections are found by sheer
    resolution rather than algebra.  Only trustworthy when segments are
    much shorter than R - r.
    """
    pts = np.asarray(points, dtype=np.complex128)
    fine = []
    frac = np.linspace(0.0, 1.0, samples_per_segment, endpoint=False)
    for a, b in zip(pts[:-1], pts[1:]):
        fine.append(a + (b - a) * frac)
    fine.append(pts[-1:])
    z = np.concatenate(fine) - center
    d = np.abs(z)

    outside_open = np.flatnonzero((d <= r) | (d >= R))
    if outside_open.size == 0:
        return 0
    start = outside_open[0]
    on_inner = d[start] <= r
    count = 0
    for k in range(start + 1, d.size):
        if on_inner and d[k] >= R:
            count += 1
            on_inner = False
        elif not on_inner and d[k] <= r:
            count += 1
            on_inner = True
    return count


def _segment_hits_rect(px, py, qx, qy, x0, x1, y0, y1):
    """Closed-rectangle vs segment test by Liang-Barsky clipping."""
    t0, t1 = 0.0, 1.0
    for delta, lo, hi, origin in ((qx - px, x0, x1, px), (qy - py, y0, y1, py)):
        if delta == 0.0:
            if origin < lo or origin > hi:
                return False
        else:
            ta = (lo - origin) / delta
            tb = (hi - origin) / delta
            if ta > tb:
                ta, tb = tb, ta
            t0 = max(t0, ta)
            t1 = min(t1, tb)
            if t0 > t1:
                return False
    return True


def grid_cells_covered(points, h):
    """Exact set of closed spacing-h grid cells met by a polyline.

    Enumerates every candidate cell in each segment's bounding box and
    clips the segment against it, so no traversal logic is shared with the
    implementation under test.
    """
    pts = np.asarray(points, dtype=np.complex128)
    cells = set()
    for a, b in zip(pts[:-1], pts[1:]):
        ix0 = math.floor(min(a.real, b.real) / h)
        ix1 = math.floor(max(a.real, b.real) / h)
        iy0 = math.floor(min(a.imag, b.imag) / h)
        iy1 = math.floor(max(a.imag, b.imag) / h)
        for ix in range(ix0, ix1 + 1):
            for iy in range(iy0, iy1 + 1):
                if _segment_hits_rect(a.real, a.imag, b.real, b.imag,
                                      ix * h, (ix + 1) * h, iy * h, (iy + 1) * h):
                    cells.add((ix, iy))
    return cells


def tortuosity_optimal_grid(points, ell, samples_per_segment=64):
    """Minimal diameter-<= ell piece count with cuts on a fine curve grid.

    Dynamic program over sample points (original vertices included, so
    window diameters are exact).  The optimum over grid-restricted cuts is
    an upper bound for the continuum optimum, which the greedy
    implementation claims to attain.
    """
    pts = np.asarray(points, dtype=np.complex128)
    fine = [pts[:1]]
    frac = np.linspace(0.0, 1.0, samples_per_segment + 1)[1:]
    for a, b in zip(pts[:-1], pts[1:]):
        fine.append(a + (b - a) * frac)
    z = np.concatenate(fine)
    n = z.size

    # imin[j] = least i with diam(z[i..j]) <= ell; two-pointer is valid
    # because only pairs involving the newly added point need rechecking
    imin = np.empty(n, dtype=np.int64)
    i = 0
    for j in range(n):
        while np.max(np.abs(z[i:j + 1] - z[j])) > ell:
            i += 1
        imin[j] = i

    big = n + 10
    best = np.full(n, big, dtype=np.int64)
    best[0] = 0
    for j in range(1, n):
        lo = imin[j]
        if lo < j:
            best[j] = 1 + int(best[lo:j].min())
    return int(best[-1])
