"""Tests for the driving-function sampler, the discrete Loewner flow, the
conformal changes of coordinates, and the marked-point passage decision."""

import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from slepath import (
    KappaParams,
    DrivingFunction,
    PlanarPath,
    TraceError,
    UPPER_HALF_PLANE,
    UNIT_DISK,
    SMALL_DISK,
    SEED_RULE,
    sample_driving,
    elementary_forward_map,
    elementary_inverse_map,
    sqrt_upper,
    compute_trace,
    to_unit_disk,
    to_small_disk,
    small_disk_trace,
    left_passage_side,
    write_path_csv,
    read_path_csv,
)
from slepath.loewner import (
    forward_map_composition,
    upper_half_plane_to_unit_disk,
    unit_disk_to_upper_half_plane,
    upper_half_plane_to_small_disk,
    small_disk_to_upper_half_plane,
)


def test_parameter_constants():
    p = KappaParams(2.0)
    assert p.a == 1.0
    assert p.lam == 2.0
    assert p.beta == 3.0
    assert p.dim == 1.25
    q = KappaParams(8.0 / 3.0)
    assert math.isclose(q.a, 0.75)
    assert math.isclose(q.lam, 1.0)
    assert math.isclose(q.beta, 2.0)
    assert math.isclose(q.dim, 4.0 / 3.0)
    # c at lambda = 1 is 1/2, at lambda = 0 (kappa = 4) it is 1/pi
    assert math.isclose(q.c_kappa, 0.5, rel_tol=1e-12)
    assert math.isclose(KappaParams(4.0).c_kappa, 1.0 / math.pi, rel_tol=1e-12)


def test_parameter_validation():
    for bad in (0.0, -1.0, 4.0001, 8.0):
        with pytest.raises(ValueError):
            KappaParams(bad)


def test_beta_matches_a():
    for kappa in (0.5, 1.0, 2.0, 8.0 / 3.0, 3.3, 4.0):
        p = KappaParams(kappa)
        assert math.isclose(p.beta, 4.0 * p.a - 1.0, rel_tol=1e-14)


# ---------------------------------------------------------------------------
# elementary maps and the vertical-slit solution
# ---------------------------------------------------------------------------

def test_elementary_maps_known_values():
    # with a*dt = 1/2 the inverse map sends i*sqrt(2) to i*sqrt(3)
    w = elementary_inverse_map(1j * math.sqrt(2.0), u=0.0, dt=0.5, a=1.0)
    assert abs(w - 1j * math.sqrt(3.0)) < 1e-14
    z = elementary_forward_map(1j * math.sqrt(3.0), u=0.0, dt=0.5, a=1.0)
    assert abs(z - 1j * math.sqrt(2.0)) < 1e-14
    # the slit tip is the image of the driving point
    tip = elementary_inverse_map(0.0 + 0.0j, u=0.0, dt=0.5, a=1.0)
    assert abs(tip - 1j) < 1e-14


def test_forward_inverse_roundtrip():
    rng = np.random.default_rng(11)
    for _ in range(1000):
        u = rng.uniform(-2.0, 2.0)
        dt = rng.uniform(1e-4, 1.0)
        a = rng.uniform(0.5, 2.0)
        z = rng.uniform(-3.0, 3.0) + 1j * rng.uniform(1e-2, 3.0)
        w = elementary_forward_map(z, u, dt, a)
        back = elementary_inverse_map(w, u, dt, a)
        assert abs(back - z) < 1e-10


def test_sqrt_upper_branch():
    assert abs(sqrt_upper(np.complex128(-1.0)) - 1j) < 1e-15
    assert abs(sqrt_upper(np.complex128(4.0)) - 2.0) < 1e-15
    # approaching the cut from below picks the limit from above
    assert abs(sqrt_upper(np.complex128(complex(4.0, -0.0))) - 2.0) < 1e-15
    rng = np.random.default_rng(3)
    w = rng.normal(size=1000) + 1j * rng.normal(size=1000)
    s = sqrt_upper(w)
    assert np.all(s.imag >= 0.0)
    assert np.max(np.abs(s * s - w)) < 1e-12 * np.max(np.abs(w))


def test_sqrt_upper_large_arguments():
    """The stable form must not lose precision when re(w) is hugely negative."""
    for y in (1e3, 1e5, 1e8):
        w = np.complex128(-(y * y) + 2j * y)  # (iy + 1)^2 - 1, roughly
        s = sqrt_upper(w)
        assert abs(s * s - w) < 1e-12 * abs(w)


def test_zero_driving_vertical_segment():
    """Constant zero driving grows a straight vertical slit of height
    sqrt(2 a t); the discrete tips must reproduce it almost exactly."""
    params = KappaParams(2.0)
    n = 10_000
    dt = 1e-3
    driving = DrivingFunction(dt=dt, values=np.zeros(n + 1))
    path = compute_trace(driving, params)
    t = path.times
    exact = 1j * np.sqrt(2.0 * params.a * t)
    assert np.max(np.abs(path.points - exact)) < 1e-9
    assert path.points[0] == 0.0
    assert path.domain_tag == UPPER_HALF_PLANE


def test_capacity_normalization():
    """Far from the hull, the composed forward maps agree with the
    hydrodynamic expansion z + a T / z."""
    params = KappaParams(2.0)
    driving = sample_driving(params, n_steps=50, dt=0.1, seed=9)
    T = 50 * 0.1
    z = 1j * 1e6
    g = forward_map_composition(driving, params, z)
    assert abs(g - (z + params.a * T / z)) < 1e-4


# ---------------------------------------------------------------------------
# driving-function sampling
# ---------------------------------------------------------------------------

def test_driving_determinism_and_spawning():
    params = KappaParams(8.0 / 3.0)
    d1 = sample_driving(params, 500, 0.01, seed=42)
    d2 = sample_driving(params, 500, 0.01, seed=42)
    assert np.array_equal(d1.values, d2.values)
    d3 = sample_driving(params, 500, 0.01, seed=43)
    assert not np.array_equal(d1.values, d3.values)
    p0 = sample_driving(params, 500, 0.01, seed=42, path_index=0)
    p1 = sample_driving(params, 500, 0.01, seed=42, path_index=1)
    assert not np.array_equal(p0.values, p1.values)
    assert not np.array_equal(p0.values, d1.values)
    assert SEED_RULE == "seedseq-spawn-v1"


def test_driving_starts_at_zero_and_has_brownian_increments():
    params = KappaParams(2.0)
    n = 100_000
    dt = 0.02
    d = sample_driving(params, n, dt, seed=7)
    assert d.values[0] == 0.0
    assert d.n_steps == n
    inc = np.diff(d.values)
    # squared increments have mean dt and variance 2 dt^2
    assert abs(np.mean(inc * inc) - dt) < 3.0 * dt * math.sqrt(2.0 / n)
    assert abs(np.mean(inc)) < 3.0 * math.sqrt(dt / n)


def test_driving_validation():
    with pytest.raises(ValueError):
        DrivingFunction(dt=0.0, values=np.zeros(3))
    with pytest.raises(ValueError):
        DrivingFunction(dt=0.1, values=np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        sample_driving(KappaParams(2.0), 0, 0.1, seed=1)


# ---------------------------------------------------------------------------
# traces
# ---------------------------------------------------------------------------

def test_trace_shape_and_times():
    params = KappaParams(3.0)
    driving = sample_driving(params, 200, 0.01, seed=5)
    path = compute_trace(driving, params)
    assert path.n_vertices == 201
    assert path.points[0] == 0.0
    assert np.allclose(path.times, np.arange(201) * 0.01)
    assert np.all(path.y >= 0.0)


def test_trace_determinism():
    params = KappaParams(8.0 / 3.0)
    driving = sample_driving(params, 300, 0.01, seed=12)
    p1 = compute_trace(driving, params)
    p2 = compute_trace(driving, params)
    assert np.array_equal(p1.points, p2.points)


def test_trace_error_reports_step():
    params = KappaParams(2.0)
    values = np.zeros(10)
    values[4] = np.inf
    driving = DrivingFunction(dt=0.1, values=values)
    with pytest.raises(TraceError) as info:
        compute_trace(driving, params)
    assert info.value.step == 4


def test_trace_mirror_symmetry():
    """Negating the driving function reflects the trace across the
    imaginary axis, exactly in floating point."""
    params = KappaParams(2.0)
    driving = sample_driving(params, 400, 0.005, seed=21)
    mirrored = DrivingFunction(dt=driving.dt, values=-driving.values)
    p = compute_trace(driving, params)
    q = compute_trace(mirrored, params)
    assert np.array_equal(q.points, -np.conj(p.points))


# ---------------------------------------------------------------------------
# changes of coordinates
# ---------------------------------------------------------------------------

def test_disk_map_special_points():
    assert abs(upper_half_plane_to_unit_disk(0.0 + 0.0j) - 1.0) < 1e-15
    assert abs(upper_half_plane_to_unit_disk(1j)) < 1e-15
    assert abs(upper_half_plane_to_unit_disk(1j * 1e12) + 1.0) < 1e-11
    assert abs(upper_half_plane_to_small_disk(0.0 + 0.0j)) < 1e-15
    assert abs(upper_half_plane_to_small_disk(1j) - 0.5) < 1e-15
    assert abs(upper_half_plane_to_small_disk(1e12 + 1j) - 1.0) < 1e-11


def test_disk_map_roundtrips():
    rng = np.random.default_rng(17)
    z = rng.uniform(-5, 5, size=1000) + 1j * rng.uniform(1e-3, 5, size=1000)
    w1 = unit_disk_to_upper_half_plane(upper_half_plane_to_unit_disk(z))
    w2 = small_disk_to_upper_half_plane(upper_half_plane_to_small_disk(z))
    assert np.max(np.abs(w1 - z)) < 1e-12 * np.max(np.abs(z) + 1.0)
    assert np.max(np.abs(w2 - z)) < 1e-12 * np.max(np.abs(z) + 1.0)


def test_path_domain_conversion():
    params = KappaParams(2.0)
    driving = sample_driving(params, 300, 0.01, seed=2)
    path = compute_trace(driving, params)
    disk = to_unit_disk(path)
    assert disk.domain_tag == UNIT_DISK
    assert np.all(np.abs(disk.points) <= 1.0 + 1e-12)
    assert abs(disk.points[0] - 1.0) < 1e-15
    small = to_small_disk(path)
    assert small.domain_tag == SMALL_DISK
    assert np.all(np.abs(small.points - 0.5) <= 0.5 + 1e-12)
    assert abs(small.points[0]) < 1e-15
    with pytest.raises(ValueError):
        to_unit_disk(disk)


def test_small_disk_trace_closure():
    params = KappaParams(2.0)
    driving = sample_driving(params, 2000, 0.05, seed=31)
    path, info = small_disk_trace(driving, params, closure_delta=0.05)
    assert path.domain_tag == SMALL_DISK
    assert path.points[-1] == 1.0
    assert np.all(np.diff(path.times) > 0.0)
    if info.reached_delta:
        assert info.closure_length <= 0.05
        assert info.stop_index <= driving.n_steps
    else:
        assert info.stop_index == driving.n_steps
    assert abs(path.points[-2] - 1.0) == pytest.approx(info.closure_length)


def test_small_disk_trace_without_reaching_delta():
    params = KappaParams(2.0)
    driving = sample_driving(params, 50, 0.001, seed=1)
    path, info = small_disk_trace(driving, params, closure_delta=1e-9)
    assert not info.reached_delta
    assert info.stop_index == 50


# ---------------------------------------------------------------------------
# marked-point passage
# ---------------------------------------------------------------------------

def test_left_passage_zero_driving():
    """A straight vertical trace leaves right-half points on its right."""
    params = KappaParams(8.0 / 3.0)
    driving = DrivingFunction(dt=0.01, values=np.zeros(20_001))
    assert left_passage_side(driving, params, 0.3 + 0.4j) == "right"
    assert left_passage_side(driving, params, -0.3 + 0.4j) == "left"


def test_left_passage_undecided_for_short_runs():
    params = KappaParams(8.0 / 3.0)
    driving = DrivingFunction(dt=0.01, values=np.zeros(3))
    assert left_passage_side(driving, params, 1.0 + 1.0j) == "undecided"


def test_left_passage_mirror_symmetry():
    params = KappaParams(8.0 / 3.0)
    rng = np.random.default_rng(8)
    for seed in range(5):
        driving = sample_driving(params, 4000, 0.002, seed=seed)
        mirrored = DrivingFunction(dt=driving.dt, values=-driving.values)
        z = rng.uniform(0.1, 1.0) + 1j * rng.uniform(0.1, 1.0)
        side = left_passage_side(driving, params, z)
        flipped = left_passage_side(mirrored, params, complex(-z.real, z.imag))
        swap = {"left": "right", "right": "left", "undecided": "undecided"}
        assert flipped == swap[side]


def test_left_passage_rejects_lower_half_plane():
    params = KappaParams(2.0)
    driving = DrivingFunction(dt=0.01, values=np.zeros(10))
    with pytest.raises(ValueError):
        left_passage_side(driving, params, 1.0 - 1.0j)


# ---------------------------------------------------------------------------
# paths and CSV
# ---------------------------------------------------------------------------

def test_path_validation():
    with pytest.raises(ValueError):
        PlanarPath(np.array([0.0, 0.0]), np.array([0j, 1j]))
    with pytest.raises(ValueError):
        PlanarPath(np.array([0.0, 1.0]), np.array([0j, 1 - 1j]))
    with pytest.raises(ValueError):
        PlanarPath(np.array([0.0, 1.0]), np.array([1 + 0j, 2 + 0j]), UNIT_DISK)
    with pytest.raises(ValueError):
        PlanarPath(np.array([0.0, 1.0]), np.array([0j, 1j]), "strip")
    with pytest.raises(ValueError):
        PlanarPath(np.array([0.0]), np.array([0j]))


def test_csv_roundtrip_is_exact():
    params = KappaParams(2.0)
    driving = sample_driving(params, 100, 0.01, seed=4)
    path = compute_trace(driving, params)
    buf = io.StringIO()
    write_path_csv(path, buf)
    buf.seek(0)
    back = read_path_csv(buf)
    assert np.array_equal(back.times, path.times)
    assert np.array_equal(back.points, path.points)
    assert back.domain_tag == path.domain_tag


@settings(deadline=None, max_examples=200)
@given(
    u=st.floats(-5.0, 5.0),
    dt=st.floats(1e-6, 2.0),
    a=st.floats(0.5, 2.0),
    x=st.floats(-10.0, 10.0),
    y=st.floats(1e-3, 10.0),
)
def test_roundtrip_property(u, dt, a, x, y):
    z = complex(x, y)
    w = elementary_forward_map(z, u, dt, a)
    assert w.imag >= 0.0
    assert abs(elementary_inverse_map(w, u, dt, a) - z) < 1e-9 * (1.0 + abs(z))


@settings(deadline=None, max_examples=200)
@given(x=st.floats(-100.0, 100.0), y=st.floats(-100.0, 100.0))
def test_sqrt_upper_property(x, y):
    w = np.complex128(complex(x, y))
    s = sqrt_upper(w)
    assert s.imag >= 0.0
    assert abs(s * s - w) <= 1e-10 * (1.0 + abs(w))
