"""Chordal Loewner solver driven by sampled Brownian motion.

The half-plane Loewner equation used throughout is

    d/dt g_t(z) = a / (g_t(z) + B_t),        a = 2 / kappa,

where B is a standard Brownian motion.  Freezing the driving value at u over
one time step integrates the equation exactly: with h = g + u,

    h(t)^2 = h(0)^2 + 2 a t,

so each step is the square-root slit map g -> -u + sqrt((g + u)^2 + 2 a dt)
and its inverse w -> -u + sqrt((w + u)^2 - 2 a dt).  The square root is the
branch with nonnegative imaginary part, which keeps everything in the closed
upper half plane.  Traces are recovered by composing inverse maps back to
time zero and evaluating at the current driving value, giving the tip
position exactly on each step's slit.

Also provided: Moebius transports of half-plane paths to the unit disk
(0 -> 1, infinity -> -1) and to the disk of radius 1/2 about 1/2
(0 -> 0, infinity -> 1), and the passage-side decision that tracks a marked
interior point under the forward flow.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Optional, TextIO, Union

import numba as nb
import numpy as np

UPPER_HALF_PLANE = "upper-half-plane"
UNIT_DISK = "unit-disk"
SMALL_DISK = "small-disk"

_DOMAIN_TAGS = (UPPER_HALF_PLANE, UNIT_DISK, SMALL_DISK)

#: Identifier of the seed-splitting rule, reported in Monte Carlo output.
#: Path i of a run with master seed s draws from
#: numpy.random.SeedSequence(s, spawn_key=(i,)).
SEED_RULE = "seedseq-spawn-v1"

_CONTAINMENT_TOL = 1e-9

RIGHT = "right"
LEFT = "left"
UNDECIDED = "undecided"


class TraceError(RuntimeError):
    """Slit-map composition produced a non-finite tip.

    Attributes
    ----------
    step : int
        One-based index of the first step whose tip is not finite.
    """

    def __init__(self, step: int, message: Optional[str] = None):
        self.step = step
        super().__init__(message or f"non-finite trace tip at step {step}")


@dataclass(frozen=True)
class KappaParams:
    """Parameter bundle for SLE_kappa, kappa in (0, 4].

    Derived constants are exposed as properties:

    a        speed constant 2 / kappa of the Loewner equation
    lam      sine-power exponent 8 / kappa - 2
    beta     crossing-cost exponent 4 a - 1
    dim      curve dimension 1 + kappa / 8
    c_kappa  normalizer with 1 / c_kappa = integral of sin^lam over [0, pi]
    """

    kappa: float

    def __post_init__(self):
        if not (0.0 < self.kappa <= 4.0):
            raise ValueError(f"kappa must lie in (0, 4], got {self.kappa}")

    @property
    def a(self) -> float:
        return 2.0 / self.kappa

    @property
    def lam(self) -> float:
        return 8.0 / self.kappa - 2.0

    @property
    def beta(self) -> float:
        return 4.0 * self.a - 1.0

    @property
    def dim(self) -> float:
        return 1.0 + self.kappa / 8.0

    @property
    def c_kappa(self) -> float:
        # 1 / integral_0^pi sin^lam = Gamma(lam/2 + 1) / (sqrt(pi) Gamma((lam+1)/2))
        lam = self.lam
        return math.exp(math.lgamma(lam / 2.0 + 1.0) - math.lgamma((lam + 1.0) / 2.0)) / math.sqrt(math.pi)


@dataclass(frozen=True)
class DrivingFunction:
    """Driving values on the uniform capacity-time grid 0, dt, 2 dt, ...

    values[0] is always 0; values[k] is the driving value at time k * dt.
    The seed is informational: it records the stream that generated the
    values (0 for synthetic drivings built by hand).
    """

    dt: float
    values: np.ndarray
    seed: int = 0

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size < 1:
            raise ValueError("values must be a nonempty 1-d sequence")
        if values[0] != 0.0:
            raise ValueError("values[0] must be 0")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_steps(self) -> int:
        return self.values.size - 1

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.values.size)


def sample_driving(params: KappaParams, n_steps: int, dt: float, seed: int,
                   path_index: Optional[int] = None) -> DrivingFunction:
    """Sample a Brownian driving function on n_steps uniform capacity steps.

    Increments are independent N(0, dt) draws from a deterministic stream.
    With path_index=None the stream is SeedSequence(seed); inside a Monte
    Carlo run path i uses SeedSequence(seed, spawn_key=(i,)) so that workers
    can draw independent paths reproducibly (rule ``SEED_RULE``).

    The params argument fixes the parameter context of the run; the driving
    law itself does not depend on kappa.
    """
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if path_index is None:
        ss = np.random.SeedSequence(seed)
    else:
        ss = np.random.SeedSequence(seed, spawn_key=(path_index,))
    rng = np.random.default_rng(ss)
    values = np.empty(n_steps + 1)
    values[0] = 0.0
    np.cumsum(rng.standard_normal(n_steps) * math.sqrt(dt), out=values[1:])
    return DrivingFunction(dt=dt, values=values, seed=seed)


@dataclass(frozen=True)
class PlanarPath:
    """Time-stamped polyline in the complex plane.

    domain_tag declares which domain the vertices are meant to live in and
    is validated on construction (with a 1e-9 slack for the disk cases).
    """

    times: np.ndarray
    points: np.ndarray
    domain_tag: str = UPPER_HALF_PLANE

    def __post_init__(self):
        times = np.ascontiguousarray(self.times, dtype=np.float64)
        points = np.ascontiguousarray(self.points, dtype=np.complex128)
        if times.ndim != 1 or points.ndim != 1 or times.size != points.size:
            raise ValueError("times and points must be 1-d and of equal length")
        if times.size < 2:
            raise ValueError("a path needs at least 2 vertices")
        if not np.all(np.diff(times) > 0.0):
            raise ValueError("times must be strictly increasing")
        if self.domain_tag not in _DOMAIN_TAGS:
            raise ValueError(f"unknown domain_tag {self.domain_tag!r}")
        if self.domain_tag == UPPER_HALF_PLANE:
            if np.min(points.imag) < -_CONTAINMENT_TOL:
                raise ValueError("upper-half-plane path has a vertex below the real axis")
        elif self.domain_tag == UNIT_DISK:
            if np.max(np.abs(points)) > 1.0 + _CONTAINMENT_TOL:
                raise ValueError("unit-disk path leaves the closed unit disk")
        else:
            if np.max(np.abs(points - 0.5)) > 0.5 + _CONTAINMENT_TOL:
                raise ValueError("small-disk path leaves the closed disk |z - 1/2| <= 1/2")
        times.setflags(write=False)
        points.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "points", points)

    @property
    def n_vertices(self) -> int:
        return self.points.size

    @property
    def x(self) -> np.ndarray:
        return self.points.real

    @property
    def y(self) -> np.ndarray:
        return self.points.imag


def write_path_csv(path: PlanarPath, dest: Union[str, TextIO],
                   header_comments: tuple = ()) -> None:
    """Write a path as CSV with header ``t,re,im``.

    Floats are printed with shortest round-trip formatting.  Optional
    comment lines (without the leading '#') are emitted before the header.
    """
    own = isinstance(dest, (str, bytes))
    fh = open(dest, "w", encoding="utf-8") if own else dest
    try:
        for line in header_comments:
            fh.write(f"# {line}\n")
        fh.write("t,re,im\n")
        for t, z in zip(path.times, path.points):
            fh.write(f"{float(t)!r},{float(z.real)!r},{float(z.imag)!r}\n")
    finally:
        if own:
            fh.close()


def read_path_csv(src: Union[str, TextIO], domain_tag: str = UPPER_HALF_PLANE) -> PlanarPath:
    """Read a ``t,re,im`` CSV (comment lines starting with '#' are skipped)."""
    own = isinstance(src, (str, bytes))
    fh = open(src, "r", encoding="utf-8") if own else src
    try:
        times, points = [], []
        header_seen = False
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if not header_seen:
                if line != "t,re,im":
                    raise ValueError(f"unexpected CSV header {line!r}")
                header_seen = True
                continue
            t, re, im = line.split(",")
            times.append(float(t))
            points.append(complex(float(re), float(im)))
        return PlanarPath(np.array(times), np.array(points), domain_tag)
    finally:
        if own:
            fh.close()


# ---------------------------------------------------------------------------
# Elementary maps
# ---------------------------------------------------------------------------

def sqrt_upper(w):
    """Square root with nonnegative imaginary part (branch cut on [0, inf)).

    On the cut the limit from above is taken, so positive reals map to their
    positive root.  Accepts complex scalars or arrays.  Uses the standard
    cancellation-free evaluation: the larger component comes from r +- x and
    the smaller one from the product identity re * im = y / 2.
    """
    w = np.asarray(w, dtype=np.complex128)
    x = w.real
    y = w.imag
    r = np.abs(w)
    big = np.sqrt(0.5 * (r + np.abs(x)))
    small = np.abs(y) / (2.0 * np.where(big > 0.0, big, 1.0))
    re_mag = np.where(x >= 0.0, big, small)
    im_mag = np.where(x >= 0.0, small, big)
    out = np.where(y >= 0.0, re_mag, -re_mag) + 1j * im_mag
    if out.ndim == 0:
        return complex(out)
    return out


def elementary_forward_map(z, u: float, dt: float, a: float):
    """One exact Loewner step with driving value frozen at u.

    Maps the upper half plane minus the step's slit onto the upper half
    plane:  z -> -u + sqrt((z + u)^2 + 2 a dt).
    """
    return -u + sqrt_upper((np.asarray(z, dtype=np.complex128) + u) ** 2 + 2.0 * a * dt)


def elementary_inverse_map(w, u: float, dt: float, a: float):
    """Inverse of one exact Loewner step: w -> -u + sqrt((w + u)^2 - 2 a dt).

    Maps the upper half plane onto the upper half plane minus a slit; the
    preimage of -u is the slit tip -u + i sqrt(2 a dt).
    """
    return -u + sqrt_upper((np.asarray(w, dtype=np.complex128) + u) ** 2 - 2.0 * a * dt)


_READONLY_F8 = nb.types.Array(nb.float64, 1, "C", readonly=True)


@nb.njit(nb.types.Tuple((nb.float64[::1], nb.float64[::1], nb.int64))(
    _READONLY_F8, nb.float64, nb.float64, nb.float64), cache=True)
def _tips_kernel(values, dt, a, stop_absw2):
    """Tip positions by backward composition of inverse slit maps.

    Tip k starts at the exact slit tip -values[k] + i sqrt(2 a dt) and is
    pulled back through steps k-1, ..., 1.  If stop_absw2 > 0 the loop exits
    early once |tip + i|^2 exceeds it (tips are emitted up to and including
    the trigger).  Returns (xs, ys, count).
    """
    n = values.shape[0] - 1
    xs = np.empty(n)
    ys = np.empty(n)
    twoadt = 2.0 * a * dt
    tip_im = math.sqrt(twoadt)
    count = 0
    for k in range(1, n + 1):
        x = -values[k]
        y = tip_im
        for j in range(k - 1, 0, -1):
            u = values[j]
            zx = x + u
            wx = zx * zx - y * y - twoadt
            wy = 2.0 * zx * y
            r = math.hypot(wx, wy)
            big = math.sqrt(0.5 * (r + abs(wx)))
            small = abs(wy) / (2.0 * big) if big > 0.0 else 0.0
            if wx >= 0.0:
                sre = big
                sim = small
            else:
                sre = small
                sim = big
            if wy < 0.0:
                sre = -sre
            x = sre - u
            y = sim
        xs[count] = x
        ys[count] = y
        count += 1
        if stop_absw2 > 0.0:
            d2 = x * x + (y + 1.0) * (y + 1.0)
            if d2 > stop_absw2:
                break
    return xs[:count], ys[:count], count


def _raw_tips(driving: DrivingFunction, params: KappaParams,
              stop_small_disk_delta: float = 0.0):
    """Tips gamma(dt), gamma(2 dt), ... as a complex array.

    With stop_small_disk_delta > 0 the computation stops once the tip's
    small-disk image comes within that distance of the endpoint 1, i.e.
    once |tip + i| > 1 / delta.  Returns (tips, reached) where reached says
    whether the stopping condition fired before the driving ran out.
    """
    stop_absw2 = 0.0
    if stop_small_disk_delta > 0.0:
        stop_absw2 = 1.0 / (stop_small_disk_delta * stop_small_disk_delta)
    xs, ys, count = _tips_kernel(driving.values, driving.dt, params.a, stop_absw2)
    tips = xs + 1j * ys
    bad = ~np.isfinite(xs) | ~np.isfinite(ys)
    if bad.any():
        raise TraceError(int(np.argmax(bad)) + 1)
    reached = False
    if stop_absw2 > 0.0 and count >= 1:
        x = xs[count - 1]
        y = ys[count - 1]
        reached = x * x + (y + 1.0) * (y + 1.0) > stop_absw2
    return tips, reached


def compute_trace(driving: DrivingFunction, params: KappaParams) -> PlanarPath:
    """Trace of the Loewner flow as a half-plane polyline.

    Vertex k is the tip gamma(k dt) obtained by composing the inverse
    elementary maps of steps 1..k and evaluating at the driving value of
    step k; vertex 0 is the origin.  Cost is O(n^2) scalar map evaluations.

    Raises TraceError (with the offending step index) if the composition
    overflows, which only happens for non-finite or absurdly large driving
    values.
    """
    if driving.n_steps < 1:
        raise ValueError("driving must contain at least one step")
    tips, _ = _raw_tips(driving, params)
    points = np.empty(tips.size + 1, dtype=np.complex128)
    points[0] = 0.0
    points[1:] = tips
    times = driving.dt * np.arange(tips.size + 1)
    return PlanarPath(times, points, UPPER_HALF_PLANE)


# ---------------------------------------------------------------------------
# Conformal transport
# ---------------------------------------------------------------------------

def upper_half_plane_to_unit_disk(z):
    """Moebius map (i - z) / (i + z): 0 -> 1, infinity -> -1, i -> 0."""
    z = np.asarray(z, dtype=np.complex128)
    return (1j - z) / (1j + z)


def unit_disk_to_upper_half_plane(z):
    """Inverse of ``upper_half_plane_to_unit_disk``: z -> i (1 - z) / (1 + z)."""
    z = np.asarray(z, dtype=np.complex128)
    return 1j * (1.0 - z) / (1.0 + z)


def upper_half_plane_to_small_disk(w):
    """Moebius map w / (w + i): 0 -> 0, infinity -> 1, i -> 1/2.

    Sends the upper half plane onto the disk of radius 1/2 about 1/2.
    """
    w = np.asarray(w, dtype=np.complex128)
    return w / (w + 1j)


def small_disk_to_upper_half_plane(z):
    """Inverse of ``upper_half_plane_to_small_disk``: z -> i z / (1 - z)."""
    z = np.asarray(z, dtype=np.complex128)
    return 1j * z / (1.0 - z)


def to_unit_disk(path: PlanarPath) -> PlanarPath:
    """Transport a half-plane path to the unit disk (endpoints 1 and -1)."""
    if path.domain_tag != UPPER_HALF_PLANE:
        raise ValueError(f"expected an upper-half-plane path, got {path.domain_tag!r}")
    if np.any(path.points == -1j):
        raise ValueError("pole of the disk map: input point equals -i")
    return PlanarPath(path.times, upper_half_plane_to_unit_disk(path.points), UNIT_DISK)


def to_small_disk(path: PlanarPath) -> PlanarPath:
    """Transport a half-plane path to the disk of radius 1/2 about 1/2."""
    if path.domain_tag != UPPER_HALF_PLANE:
        raise ValueError(f"expected an upper-half-plane path, got {path.domain_tag!r}")
    return PlanarPath(path.times, upper_half_plane_to_small_disk(path.points), SMALL_DISK)


@dataclass(frozen=True)
class ClosureInfo:
    """Diagnostics for a truncated-and-closed small-disk trace.

    stop_index      number of simulated steps kept (vertex count - 2)
    reached_delta   whether the delta stopping rule fired (False: capacity
                    budget exhausted first)
    closure_length  length of the appended straight closing segment
    """

    stop_index: int
    reached_delta: bool
    closure_length: float


def small_disk_trace(driving: DrivingFunction, params: KappaParams,
                     closure_delta: float = 0.01):
    """Simulate, transport to the small disk, and close to the endpoint 1.

    The trace is truncated at the first tip whose small-disk image is within
    closure_delta of 1 (or at the capacity budget if that never happens) and
    a straight closing segment to 1 is appended.  Returns (path, info).
    """
    if closure_delta <= 0.0:
        raise ValueError("closure_delta must be positive")
    tips, reached = _raw_tips(driving, params, stop_small_disk_delta=closure_delta)
    disk = upper_half_plane_to_small_disk(tips)
    m = disk.size
    points = np.empty(m + 2, dtype=np.complex128)
    points[0] = 0.0
    points[1:m + 1] = disk
    points[m + 1] = 1.0
    closure_length = abs(1.0 - disk[m - 1])
    times = np.empty(m + 2)
    times[:m + 1] = driving.dt * np.arange(m + 1)
    times[m + 1] = times[m] + max(closure_length, driving.dt)
    path = PlanarPath(times, points, SMALL_DISK)
    return path, ClosureInfo(stop_index=m, reached_delta=reached,
                             closure_length=closure_length)


# ---------------------------------------------------------------------------
# Passage side
# ---------------------------------------------------------------------------

@nb.njit(nb.types.Tuple((nb.int8, nb.int64))(
    _READONLY_F8, nb.float64, nb.float64, nb.float64, nb.float64, nb.float64),
    cache=True)
def _passage_kernel(values, dt, a, x0, y0, threshold):
    """Forward flow of a marked point; returns (side, steps_used).

    side: +1 right, -1 left, 0 undecided.  The decision fires once
    |Re w| > threshold * Im w for w = g_t(z) + B_t.
    """
    x = x0
    y = y0
    twoadt = 2.0 * a * dt
    n = values.shape[0] - 1
    for j in range(1, n + 1):
        u = values[j]
        zx = x + u
        wx = zx * zx - y * y + twoadt
        wy = 2.0 * zx * y
        r = math.hypot(wx, wy)
        big = math.sqrt(0.5 * (r + abs(wx)))
        small = abs(wy) / (2.0 * big) if big > 0.0 else 0.0
        if wx >= 0.0:
            sre = big
            sim = small
        else:
            sre = small
            sim = big
        if wy < 0.0:
            sre = -sre
        # sre + i sim equals g_t(z) + B_t after this step
        if abs(sre) > threshold * sim:
            side = nb.int8(1) if sre > 0.0 else nb.int8(-1)
            return side, j
        x = sre - u
        y = sim
    return nb.int8(0), n


def left_passage_side(driving: DrivingFunction, params: KappaParams, z: complex,
                      ratio_threshold: float = 100.0) -> str:
    """Which side of the trace the point z ends on: 'right', 'left', or
    'undecided' if the driving runs out before the decision threshold.

    The point is followed under the forward elementary maps; the side is the
    sign of Re(g_t(z) + B_t) once |Re| / Im exceeds ratio_threshold.  For
    kappa <= 4 interior points are almost surely not swallowed, so the
    decision fires for long enough driving.
    """
    z = complex(z)
    if z.imag <= 0.0:
        raise ValueError(f"z must lie strictly in the upper half plane, got {z}")
    side, _ = _passage_kernel(driving.values, driving.dt, params.a,
                              z.real, z.imag, ratio_threshold)
    if side > 0:
        return RIGHT
    if side < 0:
        return LEFT
    return UNDECIDED


def forward_map_composition(driving: DrivingFunction, params: KappaParams, z: complex) -> complex:
    """Image of z under the full forward composition g_{T} (T = n dt).

    Mainly a testing hook: the hydrodynamic expansion
    g_T(z) = z + a T / z + O(|z|^-2) can be checked at large |z|.
    """
    out = complex(z)
    for j in range(1, driving.values.size):
        out = complex(elementary_forward_map(out, driving.values[j], driving.dt, params.a))
    return out
