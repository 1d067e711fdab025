"""Monte Carlo experiment drivers behind the command-line interface.

Each experiment is a pure function from an ExperimentConfig to a result
dataclass; ``run`` dispatches on the command name, writes the output file,
prints a one-line summary, and maps errors to process exit codes (0 ok,
2 bad config, 3 numeric failure).  All randomness flows through
SeedSequence(seed, spawn_key=(i,)) per path, so results are reproducible
bitwise from the config alone; no timestamps or timings ever reach the
output files.

The signature experiment uses a graded capacity grid: step sizes grow
geometrically from a base step so that a modest step budget reaches the
large capacity time needed to drive the trace tip close to its terminal
point before closing.  Tips are rendered at ``render_per_step`` capacity
fractions per step to keep the polyline's spatial resolution near the
origin, where the small-disk map expands.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, fields
from typing import Dict, Optional, TextIO, Tuple, Union

import numba as nb
import numpy as np

from .formulas import QuadratureSpec, phi, write_akappa_table
from .geometry import (Annulus, DecayFit, crossing_times, fit_decay,
                       least_squares_slope, wilson_half_width)
from .loewner import (LEFT, RIGHT, SEED_RULE, KappaParams, PlanarPath,
                      TraceError, compute_trace, left_passage_side,
                      sample_driving, to_unit_disk,
                      upper_half_plane_to_small_disk, write_path_csv)
from .roughpath import _signature3_coeffs

COMMANDS = ("trace", "akappa-table", "signature-mc", "left-passage",
            "crossings", "dimension")

#: Environment variable naming the default output directory.
OUTPUT_DIR_ENV = "SLEPATH_OUTPUT_DIR"

#: Fraction of failed paths above which a Monte Carlo run aborts.
MAX_FAILURE_FRACTION = 1e-3

#: Signature words whose Monte Carlo means the signature experiment reports.
SIGNATURE_WORDS = ("221", "122", "212")


class ExperimentError(RuntimeError):
    """A run failed numerically (too many bad paths, impossible fit, ...)."""


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

def _unit_point(theta: float) -> Tuple[float, float]:
    return (math.cos(theta), math.sin(theta))


_DEFAULT_POINTS = (_unit_point(math.pi / 3.0), _unit_point(math.pi / 2.0),
                   _unit_point(2.0 * math.pi / 3.0))


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete, serializable description of one experiment run.

    The same dataclass covers every command; fields a command does not use
    are carried along unchanged so that the embedded config echo always
    reproduces the run.  ``default_config`` supplies per-command defaults.

    Common fields: command, kappa, n_paths, dt, n_steps, seed, output_path,
    threads.  The rest are command-specific: closure_delta / total_time /
    render_per_step (signature-mc), points / ratio_threshold (left-passage),
    center / outer_radius / ratios / k_values (crossings), ell0 / n_ells /
    fit_start (dimension), quad_abs_tol / quad_rel_tol (akappa-table).
    """

    command: str
    kappa: float = 2.0
    n_paths: int = 1
    dt: float = 0.01
    n_steps: int = 1000
    seed: int = 0
    closure_delta: float = 0.1
    output_path: Optional[str] = None
    threads: int = 0
    total_time: float = 340.0
    render_per_step: int = 2
    points: Tuple[Tuple[float, float], ...] = _DEFAULT_POINTS
    ratio_threshold: float = 100.0
    center: Tuple[float, float] = (0.0, 0.0)
    outer_radius: float = 0.6
    ratios: Tuple[float, ...] = (0.5, 0.25, 0.125)
    k_values: Tuple[int, ...] = (4,)
    ell0: float = 0.5
    n_ells: int = 7
    fit_start: int = 2
    quad_abs_tol: float = 1e-12
    quad_rel_tol: float = 1e-12
    closure_check_paths: int = 2000

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}; "
                             f"expected one of {', '.join(COMMANDS)}")
        if not (0.0 < self.kappa <= 4.0):
            raise ValueError(f"kappa must lie in (0, 4], got {self.kappa}")
        if self.n_paths < 1:
            raise ValueError(f"n_paths must be >= 1, got {self.n_paths}")
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.n_steps < 1:
            raise ValueError(f"n_steps must be >= 1, got {self.n_steps}")
        if not (isinstance(self.seed, int) and self.seed >= 0):
            raise ValueError(f"seed must be a nonnegative integer, got {self.seed}")
        if self.closure_delta <= 0.0 or self.closure_delta >= 1.0:
            raise ValueError("closure_delta must lie in (0, 1)")
        if self.threads < 0:
            raise ValueError(f"threads must be >= 0, got {self.threads}")
        if self.total_time <= 0.0:
            raise ValueError("total_time must be positive")
        if self.render_per_step < 1:
            raise ValueError("render_per_step must be >= 1")
        object.__setattr__(self, "points",
                           tuple((float(p[0]), float(p[1])) for p in self.points))
        if not self.points:
            raise ValueError("points must not be empty")
        for p in self.points:
            if p[1] <= 0.0:
                raise ValueError(f"points must lie in the open upper half plane, got {p}")
        if self.ratio_threshold <= 1.0:
            raise ValueError("ratio_threshold must exceed 1")
        object.__setattr__(self, "center",
                           (float(self.center[0]), float(self.center[1])))
        if self.outer_radius <= 0.0:
            raise ValueError("outer_radius must be positive")
        object.__setattr__(self, "ratios", tuple(float(r) for r in self.ratios))
        if not self.ratios:
            raise ValueError("ratios must not be empty")
        for r in self.ratios:
            if not (0.0 < r < 1.0):
                raise ValueError(f"ratios must lie in (0, 1), got {r}")
        if len(set(self.ratios)) != len(self.ratios):
            raise ValueError("ratios must be distinct")
        object.__setattr__(self, "k_values", tuple(int(k) for k in self.k_values))
        if not self.k_values or any(k < 1 for k in self.k_values):
            raise ValueError("k_values must be nonempty positive integers")
        if self.ell0 <= 0.0:
            raise ValueError("ell0 must be positive")
        if self.n_ells < 2:
            raise ValueError("n_ells must be >= 2")
        if not (0 <= self.fit_start <= self.n_ells - 2):
            raise ValueError("fit_start must leave at least 2 rungs for the fit")
        if self.quad_abs_tol <= 0.0 or self.quad_rel_tol <= 0.0:
            raise ValueError("quadrature tolerances must be positive")
        if self.closure_check_paths < 0:
            raise ValueError("closure_check_paths must be >= 0")

    @property
    def params(self) -> KappaParams:
        return KappaParams(self.kappa)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = [list(e) if isinstance(e, tuple) else e for e in v]
            out[f.name] = v
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if "command" not in data:
            raise ValueError("config is missing the 'command' field")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown config field(s): {', '.join(unknown)}")
        coerced = dict(data)
        for name in ("points", "ratios", "k_values", "center"):
            if name in coerced and isinstance(coerced[name], list):
                coerced[name] = tuple(tuple(e) if isinstance(e, list) else e
                                      for e in coerced[name])
        return cls(**coerced)


# Per-command defaults mirroring the sizes used by the acceptance runs.
_COMMAND_DEFAULTS = {
    "trace": dict(kappa=2.0, n_paths=1, dt=0.01, n_steps=1000),
    "akappa-table": dict(),
    "signature-mc": dict(kappa=2.0, n_paths=100_000, dt=0.01, n_steps=2000,
                         total_time=340.0, render_per_step=2, closure_delta=0.1),
    "left-passage": dict(kappa=8.0 / 3.0, n_paths=4000, dt=1e-3, n_steps=600_000),
    "crossings": dict(kappa=2.0, n_paths=20_000, dt=5e-3, n_steps=3200),
    "dimension": dict(kappa=8.0 / 3.0, n_paths=20, dt=2.5e-4, n_steps=4000),
}


def default_config(command: str, **overrides) -> ExperimentConfig:
    """Config with the command's standard sizes, plus explicit overrides."""
    if command not in COMMANDS:
        raise ValueError(f"unknown command {command!r}; "
                         f"expected one of {', '.join(COMMANDS)}")
    known = {f.name for f in fields(ExperimentConfig)} - {"command"}
    unknown = sorted(set(overrides) - known)
    if unknown:
        raise ValueError(f"unknown config field(s): {', '.join(unknown)}")
    merged = dict(_COMMAND_DEFAULTS[command])
    merged.update(overrides)
    return ExperimentConfig(command=command, **merged)


def config_echo(config: ExperimentConfig) -> dict:
    """Config as a dict for embedding in output files.

    output_path is omitted: it has no influence on the computation, and
    leaving it out keeps runs written to different locations byte-identical.
    """
    echo = config.to_dict()
    del echo["output_path"]
    return echo


def config_json(config: ExperimentConfig) -> str:
    """Single-line JSON echo of a config, key-sorted for stable output."""
    return json.dumps(config_echo(config), sort_keys=True, allow_nan=False,
                      separators=(", ", ": "))


def resolve_output_path(config: ExperimentConfig) -> str:
    """Output file for a run: explicit path, or a per-command default name
    inside $SLEPATH_OUTPUT_DIR (falling back to the working directory)."""
    if config.output_path is not None:
        return config.output_path
    ext = "json" if config.command in ("signature-mc", "left-passage") else "csv"
    base = f"{config.command}.{ext}"
    return os.path.join(os.environ.get(OUTPUT_DIR_ENV, "."), base)


# ---------------------------------------------------------------------------
# Graded-grid trace rendering for the signature experiment
# ---------------------------------------------------------------------------

def geometric_time_grid(dt0: float, total_time: float, n_steps: int) -> np.ndarray:
    """Step sizes dt0 * rho^j, j = 0..n_steps-1, rescaled to sum to total_time.

    The growth factor rho >= 1 is solved by bisection in log space; when the
    budget n_steps * dt0 already covers total_time the grid is uniform.  The
    final rescale makes the sum exact, so the first step is only nominally
    dt0.
    """
    if dt0 <= 0.0 or total_time <= 0.0:
        raise ValueError("dt0 and total_time must be positive")
    if n_steps < 1:
        raise ValueError(f"n_steps must be >= 1, got {n_steps}")
    if dt0 * n_steps >= total_time:
        return np.full(n_steps, total_time / n_steps)

    def total(x: float) -> float:
        # sum of dt0 * e^(j x) for j < n_steps, guarded against overflow
        if x == 0.0:
            return dt0 * n_steps
        if n_steps * x > 600.0:
            return math.inf
        return dt0 * math.expm1(n_steps * x) / math.expm1(x)

    lo, hi = 0.0, 1.0
    while total(hi) < total_time:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if total(mid) < total_time:
            lo = mid
        else:
            hi = mid
    grid = dt0 * np.exp(0.5 * (lo + hi) * np.arange(n_steps))
    return grid * (total_time / grid.sum())


_READONLY_F8 = nb.types.Array(nb.float64, 1, "C", readonly=True)


@nb.njit(nb.types.Tuple((nb.float64[::1], nb.float64[::1], nb.boolean))(
    _READONLY_F8, _READONLY_F8, nb.float64, nb.float64, nb.int64), cache=True)
def _graded_tips_kernel(values, dts, a, stop_absw2, q):
    """Trace tips on a nonuniform grid, q sub-tips per step.

    Sub-tip m of step k sits at capacity fraction m/q inside the step and is
    pulled back through steps k-1, ..., 1 with the exact inverse slit maps.
    After each full step the loop stops once |tip + i|^2 exceeds stop_absw2
    (the small-disk closure rule); the flag reports whether that fired
    before the step budget ran out.
    """
    n = values.shape[0] - 1
    xs = np.empty(n * q)
    ys = np.empty(n * q)
    count = 0
    reached = False
    x = 0.0
    y = 0.0
    for k in range(1, n + 1):
        for m in range(1, q + 1):
            x = -values[k]
            y = math.sqrt(2.0 * a * dts[k - 1] * m / q)
            for j in range(k - 1, 0, -1):
                u = values[j]
                zx = x + u
                wx = zx * zx - y * y - 2.0 * a * dts[j - 1]
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
        if x * x + (y + 1.0) * (y + 1.0) > stop_absw2:
            reached = True
            break
    return xs[:count], ys[:count], reached


def _closed_small_disk_points(tips_x: np.ndarray, tips_y: np.ndarray,
                              cut: int) -> np.ndarray:
    """Small-disk polyline 0 -> tips[:cut] -> 1 as a complex vertex array."""
    w = tips_x[:cut] + 1j * tips_y[:cut]
    z = upper_half_plane_to_small_disk(w)
    pts = np.empty(cut + 2, dtype=np.complex128)
    pts[0] = 0.0
    pts[1:cut + 1] = z
    pts[cut + 1] = 1.0
    return pts


# ---------------------------------------------------------------------------
# Result containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WordStat:
    """Sample mean and standard error of one signature coefficient."""

    n: int
    mean: float
    se: float

    def to_dict(self) -> dict:
        return {"n": self.n, "mean": self.mean, "se": self.se}


@dataclass(frozen=True)
class SignatureMcResult:
    """Monte Carlo estimate of the level-3 signature coefficients.

    words holds the per-word statistics at the configured closure_delta;
    closure_shift holds paired statistics of (estimate at delta/2) minus
    (estimate at delta) on the same traces, the direct measurement of how
    much the closure rule moves each mean (empty when closure_check_paths
    is 0).  n_unreached counts paths whose step budget ran out before the
    closure_delta stopping radius.
    """

    config: ExperimentConfig
    n_failed: int
    n_unreached: int
    mean_closure_length: float
    words: Dict[str, WordStat]
    closure_shift: Dict[str, WordStat]

    def to_dict(self) -> dict:
        return {
            "command": self.config.command,
            "config": config_echo(self.config),
            "seed_rule": SEED_RULE,
            "n_paths": self.config.n_paths,
            "n_failed": self.n_failed,
            "n_unreached": self.n_unreached,
            "mean_closure_length": self.mean_closure_length,
            "words": {w: s.to_dict() for w, s in self.words.items()},
            "closure_shift": {w: s.to_dict() for w, s in self.closure_shift.items()},
        }


@dataclass(frozen=True)
class PassagePointResult:
    """Side counts for one marked point.

    frequency is the right-side fraction among decided paths; half_width is
    its Wilson 95% half-width; target is the exact right-passage probability
    for the point's angle.
    """

    point: Tuple[float, float]
    target: float
    n_right: int
    n_left: int
    n_undecided: int
    frequency: float
    half_width: float

    @property
    def n_decided(self) -> int:
        return self.n_right + self.n_left

    def to_dict(self) -> dict:
        se = math.sqrt(self.frequency * (1.0 - self.frequency)
                       / self.n_decided) if self.n_decided else float("nan")
        return {
            "re": self.point[0], "im": self.point[1],
            "target": self.target,
            "n": self.n_decided, "mean": self.frequency, "se": se,
            "half_width": self.half_width,
            "n_right": self.n_right, "n_left": self.n_left,
            "n_undecided": self.n_undecided,
        }


@dataclass(frozen=True)
class LeftPassageResult:
    """Right-passage frequencies for each configured point."""

    config: ExperimentConfig
    n_failed: int
    points: Tuple[PassagePointResult, ...]

    def to_dict(self) -> dict:
        return {
            "command": self.config.command,
            "config": config_echo(self.config),
            "seed_rule": SEED_RULE,
            "n_paths": self.config.n_paths,
            "n_failed": self.n_failed,
            "points": [p.to_dict() for p in self.points],
        }

    @property
    def max_deviation(self) -> float:
        return max(abs(p.frequency - p.target) for p in self.points)


@dataclass(frozen=True)
class CrossingRow:
    """Estimate of one (ratio, k) cell of the crossing ladder."""

    ratio: float
    r: float
    k: int
    hits: int
    estimate: float
    half_width: float


@dataclass(frozen=True)
class CrossingLadderResult:
    """Crossing estimates over a ladder of nested annuli, with decay fits.

    All annuli share the same traces, so per-path counts, and hence the
    estimates, are monotone across the ladder by construction.
    """

    config: ExperimentConfig
    n_failed: int
    rows: Tuple[CrossingRow, ...]
    fits: Dict[int, DecayFit]


@dataclass(frozen=True)
class DimensionResult:
    """Box and tortuosity counts over a dyadic scale ladder, with slopes.

    Counts are per-scale means over the simulated traces; slopes are fitted
    on log(mean count) against log(1/ell) over the rungs from fit_start on.
    """

    config: ExperimentConfig
    n_failed: int
    ells: Tuple[float, ...]
    box_means: Tuple[float, ...]
    tortuosity_means: Tuple[float, ...]
    box_slope: float
    box_se: float
    tortuosity_slope: float
    tortuosity_se: float


# ---------------------------------------------------------------------------
# Experiment drivers
# ---------------------------------------------------------------------------

def _check_failures(n_failed: int, n_paths: int) -> None:
    if n_failed > MAX_FAILURE_FRACTION * n_paths:
        raise ExperimentError(
            f"{n_failed} of {n_paths} paths failed, more than the "
            f"{MAX_FAILURE_FRACTION:.1%} abort threshold")


def _word_stat(sums: float, sumsq: float, n: int) -> WordStat:
    mean = sums / n
    var = max(sumsq / n - mean * mean, 0.0)
    return WordStat(n=n, mean=mean, se=math.sqrt(var / n))


def run_signature_mc(config: ExperimentConfig) -> SignatureMcResult:
    """Estimate the level-3 signature coefficients of closed disk traces.

    Each path is simulated on the graded capacity grid, rendered with
    render_per_step sub-tips per step, transported to the small disk,
    truncated at the first rendered tip within closure_delta of the endpoint
    1, and closed straight to it.

    The first closure_check_paths paths keep rendering until the delta/2
    radius and are closed a second time there, so the shift each mean
    suffers under halving the closure distance is measured pairwise on
    identical traces.  Rendering past the delta cut does not change the
    primary estimate (the cut index depends only on the driving), so the
    subsample size affects cost and the shift's precision, nothing else.
    """
    params = config.params
    n_paths = config.n_paths
    delta = config.closure_delta
    dts = geometric_time_grid(config.dt, config.total_time, config.n_steps)
    sqrt_dts = np.sqrt(dts)
    cut_absw2 = (1.0 / delta) ** 2
    half_absw2 = (2.0 / delta) ** 2
    q = config.render_per_step

    sums = {w: 0.0 for w in SIGNATURE_WORDS}
    sumsq = {w: 0.0 for w in SIGNATURE_WORDS}
    dsums = {w: 0.0 for w in SIGNATURE_WORDS}
    dsumsq = {w: 0.0 for w in SIGNATURE_WORDS}
    closure_total = 0.0
    n_failed = 0
    n_unreached = 0
    n_used = 0
    n_shift = 0
    for i in range(n_paths):
        check = i < config.closure_check_paths
        rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(i,)))
        values = np.empty(config.n_steps + 1)
        values[0] = 0.0
        np.cumsum(rng.standard_normal(config.n_steps) * sqrt_dts, out=values[1:])
        xs, ys, _ = _graded_tips_kernel(values, dts, params.a,
                                        half_absw2 if check else cut_absw2, q)
        if xs.size == 0 or not (np.isfinite(xs[-1]) and np.isfinite(ys[-1])):
            n_failed += 1
            continue
        d2 = xs * xs + (ys + 1.0) ** 2
        over = np.nonzero(d2 > cut_absw2)[0]
        cut = int(over[0]) + 1 if over.size else xs.size
        if not over.size:
            n_unreached += 1

        pts = _closed_small_disk_points(xs, ys, cut)
        diffs = np.diff(pts)
        coeffs = _signature3_coeffs(diffs.real.copy(), diffs.imag.copy())
        coeffs_half = None
        if check:
            over_half = np.nonzero(d2 > half_absw2)[0]
            cut_half = int(over_half[0]) + 1 if over_half.size else xs.size
            pts_half = _closed_small_disk_points(xs, ys, cut_half)
            diffs_half = np.diff(pts_half)
            coeffs_half = _signature3_coeffs(diffs_half.real.copy(),
                                             diffs_half.imag.copy())
        ok = all(math.isfinite(coeffs[w]) for w in SIGNATURE_WORDS)
        if ok and coeffs_half is not None:
            ok = all(math.isfinite(coeffs_half[w]) for w in SIGNATURE_WORDS)
        if not ok:
            n_failed += 1
            continue

        n_used += 1
        closure_total += abs(1.0 - pts[-2])
        for w in SIGNATURE_WORDS:
            v = coeffs[w]
            sums[w] += v
            sumsq[w] += v * v
        if coeffs_half is not None:
            n_shift += 1
            for w in SIGNATURE_WORDS:
                d = coeffs_half[w] - coeffs[w]
                dsums[w] += d
                dsumsq[w] += d * d
    _check_failures(n_failed, n_paths)
    if n_used == 0:
        raise ExperimentError("no path produced a usable signature")
    shift = {}
    if n_shift > 0:
        shift = {w: _word_stat(dsums[w], dsumsq[w], n_shift)
                 for w in SIGNATURE_WORDS}
    return SignatureMcResult(
        config=config, n_failed=n_failed, n_unreached=n_unreached,
        mean_closure_length=closure_total / n_used,
        words={w: _word_stat(sums[w], sumsq[w], n_used) for w in SIGNATURE_WORDS},
        closure_shift=shift)


def run_left_passage(config: ExperimentConfig) -> LeftPassageResult:
    """Estimate right-passage frequencies at the configured marked points.

    All points are evaluated on the same driving paths.  A point is decided
    once the flowed image's |Re| / Im ratio exceeds ratio_threshold; paths
    that run out of capacity first count as undecided for that point and
    drop out of its frequency denominator.
    """
    params = config.params
    quad = QuadratureSpec(abs_tol=config.quad_abs_tol, rel_tol=config.quad_rel_tol)
    zs = [complex(p[0], p[1]) for p in config.points]
    targets = [1.0 - phi(math.atan2(z.imag, z.real), params, quad) for z in zs]
    n_right = np.zeros(len(zs), dtype=np.int64)
    n_left = np.zeros(len(zs), dtype=np.int64)
    n_undecided = np.zeros(len(zs), dtype=np.int64)
    n_failed = 0
    for i in range(config.n_paths):
        driving = sample_driving(params, config.n_steps, config.dt,
                                 config.seed, path_index=i)
        try:
            sides = [left_passage_side(driving, params, z,
                                       ratio_threshold=config.ratio_threshold)
                     for z in zs]
        except (TraceError, FloatingPointError):
            n_failed += 1
            continue
        for j, side in enumerate(sides):
            if side == RIGHT:
                n_right[j] += 1
            elif side == LEFT:
                n_left[j] += 1
            else:
                n_undecided[j] += 1
    _check_failures(n_failed, config.n_paths)
    points = []
    for j, z in enumerate(zs):
        decided = int(n_right[j] + n_left[j])
        if decided == 0:
            raise ExperimentError(f"no decided paths for point {z}")
        points.append(PassagePointResult(
            point=(z.real, z.imag), target=targets[j],
            n_right=int(n_right[j]), n_left=int(n_left[j]),
            n_undecided=int(n_undecided[j]),
            frequency=int(n_right[j]) / decided,
            half_width=wilson_half_width(int(n_right[j]), decided)))
    return LeftPassageResult(config=config, n_failed=n_failed,
                             points=tuple(points))


def run_crossing_ladder(config: ExperimentConfig) -> CrossingLadderResult:
    """Estimate k-fold annulus-crossing probabilities over a ratio ladder.

    One trace per path is transported to the unit disk and tested against
    every annulus (center and outer radius fixed, inner radius = ratio * R),
    so the ladder shares paths.  For each k the log-log decay of the
    estimates against the ratio is fitted and compared with the theoretical
    bound exponent.
    """
    params = config.params
    center = complex(config.center[0], config.center[1])
    annuli = [Annulus(center, ratio * config.outer_radius, config.outer_radius)
              for ratio in config.ratios]
    hits = np.zeros((len(annuli), len(config.k_values)), dtype=np.int64)
    n_failed = 0
    n_used = 0
    for i in range(config.n_paths):
        driving = sample_driving(params, config.n_steps, config.dt,
                                 config.seed, path_index=i)
        try:
            disk = to_unit_disk(compute_trace(driving, params))
            counts = [crossing_times(disk, annulus).count for annulus in annuli]
        except (TraceError, RuntimeError):
            n_failed += 1
            continue
        n_used += 1
        for j, c in enumerate(counts):
            for m, k in enumerate(config.k_values):
                if c >= k:
                    hits[j, m] += 1
    _check_failures(n_failed, config.n_paths)
    if n_used == 0:
        raise ExperimentError("no path produced a usable trace")
    rows = []
    for j, ratio in enumerate(config.ratios):
        for m, k in enumerate(config.k_values):
            h = int(hits[j, m])
            rows.append(CrossingRow(
                ratio=ratio, r=ratio * config.outer_radius, k=k, hits=h,
                estimate=h / n_used, half_width=wilson_half_width(h, n_used)))
    fits = {}
    for m, k in enumerate(config.k_values):
        triples = [(row.ratio, row.estimate, row.half_width)
                   for row in rows if row.k == k]
        try:
            fits[k] = fit_decay(triples, k, params)
        except ValueError as exc:
            raise ExperimentError(f"decay fit failed for k={k}: {exc}") from exc
    return CrossingLadderResult(config=config, n_failed=n_failed,
                                rows=tuple(rows), fits=fits)


def run_dimension(config: ExperimentConfig) -> DimensionResult:
    """Box-counting and tortuosity scaling of raw half-plane traces.

    Counts both covered grid cells (spacing ell / sqrt 2) and minimal
    diameter-ell pieces for every rung of the dyadic ladder
    ell0, ell0/2, ..., averages them over paths, and fits log-log slopes
    over the rungs from fit_start on.
    """
    from .geometry import box_count, tortuosity_segments

    params = config.params
    ells = [config.ell0 * 0.5 ** j for j in range(config.n_ells)]
    box_totals = np.zeros(len(ells))
    tort_totals = np.zeros(len(ells))
    n_failed = 0
    n_used = 0
    for i in range(config.n_paths):
        driving = sample_driving(params, config.n_steps, config.dt,
                                 config.seed, path_index=i)
        try:
            trace = compute_trace(driving, params)
            boxes = [box_count(trace, ell) for ell in ells]
            torts = [tortuosity_segments(trace, ell) for ell in ells]
        except (TraceError, RuntimeError):
            n_failed += 1
            continue
        n_used += 1
        box_totals += boxes
        tort_totals += torts
    _check_failures(n_failed, config.n_paths)
    if n_used == 0:
        raise ExperimentError("no path produced a usable trace")
    box_means = box_totals / n_used
    tort_means = tort_totals / n_used
    sl = slice(config.fit_start, None)
    x = np.log(1.0 / np.asarray(ells))[sl]
    box_slope, box_se = least_squares_slope(x, np.log(box_means[sl]))
    tort_slope, tort_se = least_squares_slope(x, np.log(tort_means[sl]))
    return DimensionResult(
        config=config, n_failed=n_failed, ells=tuple(ells),
        box_means=tuple(box_means), tortuosity_means=tuple(tort_means),
        box_slope=box_slope, box_se=box_se,
        tortuosity_slope=tort_slope, tortuosity_se=tort_se)


def run_trace(config: ExperimentConfig) -> PlanarPath:
    """Simulate a single half-plane trace from the config's seed."""
    driving = sample_driving(config.params, config.n_steps, config.dt, config.seed)
    return compute_trace(driving, config.params)


# ---------------------------------------------------------------------------
# Output writers
# ---------------------------------------------------------------------------

def _open_dest(dest: Union[str, TextIO]):
    own = isinstance(dest, (str, bytes))
    fh = open(dest, "w", encoding="utf-8") if own else dest
    return fh, own


def _write_json_report(result, dest: Union[str, TextIO]) -> None:
    fh, own = _open_dest(dest)
    try:
        json.dump(result.to_dict(), fh, sort_keys=True, allow_nan=False, indent=2)
        fh.write("\n")
    finally:
        if own:
            fh.close()


def write_crossing_csv(result: CrossingLadderResult, dest: Union[str, TextIO]) -> None:
    """Ladder rows as CSV, with the config echo and fits in comment lines."""
    config = result.config
    fh, own = _open_dest(dest)
    try:
        fh.write(f"# config = {config_json(config)}\n")
        fh.write(f"# seed_rule = {SEED_RULE}\n")
        fh.write(f"# n_failed = {result.n_failed}\n")
        for k in sorted(result.fits):
            fit = result.fits[k]
            fh.write(f"# fit k={k}: slope={fit.fitted_slope!r} se={fit.fit_se!r} "
                     f"bound={fit.bound_slope!r}\n")
        n_used = config.n_paths - result.n_failed
        fh.write("kappa,center_re,center_im,r,R,k,n_paths,estimate,ci_half_width\n")
        for row in result.rows:
            fh.write(f"{config.kappa!r},{config.center[0]!r},{config.center[1]!r},"
                     f"{row.r!r},{config.outer_radius!r},{row.k},"
                     f"{n_used},{row.estimate!r},{row.half_width!r}\n")
    finally:
        if own:
            fh.close()


def write_dimension_csv(result: DimensionResult, dest: Union[str, TextIO]) -> None:
    """Scale-ladder mean counts as CSV with slopes in comment lines."""
    config = result.config
    fh, own = _open_dest(dest)
    try:
        fh.write(f"# config = {config_json(config)}\n")
        fh.write(f"# seed_rule = {SEED_RULE}\n")
        fh.write(f"# n_failed = {result.n_failed}\n")
        fh.write(f"# box slope = {result.box_slope!r} (se {result.box_se!r})\n")
        fh.write(f"# tortuosity slope = {result.tortuosity_slope!r} "
                 f"(se {result.tortuosity_se!r})\n")
        fh.write(f"# target dim = {config.params.dim!r}\n")
        fh.write("kappa,ell,box_count,tortuosity_count\n")
        for ell, b, t in zip(result.ells, result.box_means, result.tortuosity_means):
            fh.write(f"{config.kappa!r},{ell!r},{b!r},{t!r}\n")
    finally:
        if own:
            fh.close()


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------

def _apply_threads(threads: int) -> None:
    if threads > 0:
        nb.set_num_threads(min(threads, nb.config.NUMBA_NUM_THREADS))


def run(config: ExperimentConfig, quiet: bool = False) -> int:
    """Execute one experiment: write its output file, print one summary line.

    Returns a process exit code: 0 on success, 3 on numeric failure
    (ExperimentError or an unreachable accuracy request).  Config errors
    raise before this point, at ExperimentConfig construction.
    """
    _apply_threads(config.threads)
    out = resolve_output_path(config)

    def say(line: str) -> None:
        if not quiet:
            print(line)

    try:
        if config.command == "trace":
            path = run_trace(config)
            write_path_csv(path, out, header_comments=(
                f"config = {config_json(config)}",))
            say(f"trace: kappa={config.kappa:g} n_steps={config.n_steps} "
                f"seed={config.seed} -> {out} ({path.n_vertices} vertices)")
        elif config.command == "akappa-table":
            quad = QuadratureSpec(abs_tol=config.quad_abs_tol,
                                  rel_tol=config.quad_rel_tol)
            fh, own = _open_dest(out)
            try:
                fh.write(f"# config = {config_json(config)}\n")
                write_akappa_table(fh, quad)
            finally:
                if own:
                    fh.close()
            say(f"akappa-table: 7 rows -> {out}")
        elif config.command == "signature-mc":
            result = run_signature_mc(config)
            _write_json_report(result, out)
            s221 = result.words["221"]
            say(f"signature-mc: kappa={config.kappa:g} n={s221.n} "
                f"S221={s221.mean:.7f} se={s221.se:.1e} "
                f"unreached={result.n_unreached} -> {out}")
        elif config.command == "left-passage":
            result = run_left_passage(config)
            _write_json_report(result, out)
            say(f"left-passage: kappa={config.kappa:g} n={config.n_paths} "
                f"points={len(result.points)} "
                f"max|freq-target|={result.max_deviation:.4f} -> {out}")
        elif config.command == "crossings":
            result = run_crossing_ladder(config)
            write_crossing_csv(result, out)
            bits = ", ".join(
                f"k={k}: slope={fit.fitted_slope:.2f} bound={fit.bound_slope:g}"
                for k, fit in sorted(result.fits.items()))
            say(f"crossings: kappa={config.kappa:g} n={config.n_paths} "
                f"{bits} -> {out}")
        else:
            result = run_dimension(config)
            write_dimension_csv(result, out)
            say(f"dimension: kappa={config.kappa:g} n={config.n_paths} "
                f"box={result.box_slope:.3f} tortuosity={result.tortuosity_slope:.3f} "
                f"(target {config.params.dim:g}) -> {out}")
    except ExperimentError as exc:
        say(f"{config.command}: numeric failure: {exc}")
        return 3
    return 0
