import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dampwave import domain as dm
from dampwave.rays import (Ray, check_egc, check_gcc, interpolate, reflect, sample_directions,
                           sample_positions, trace_ray)

UNIT = dm.Disk((0.0, 0.0), 1.0)


def test_normal_incidence_reverses_direction():
    segs = trace_ray(Ray((3.0, 0.0), (-1.0, 0.0)), [UNIT], 5.0)
    assert segs[0].length == pytest.approx(2.0)
    assert segs[0].obstacle == 0
    np.testing.assert_allclose(segs[1].start.position, (1.0, 0.0), atol=1e-14)
    np.testing.assert_allclose(segs[1].start.direction, (1.0, 0.0), atol=1e-14)


def test_miss_is_one_straight_segment():
    segs = trace_ray(Ray((3.0, 3.0), (-1.0, 0.0)), [UNIT], 10.0)
    assert len(segs) == 1 and segs[0].obstacle is None
    np.testing.assert_allclose(segs[0].point(10.0), (-7.0, 3.0))


def test_oblique_hit_matches_line_circle_oracle():
    segs = trace_ray(Ray((3.0, 0.5), (-1.0, 0.0)), [UNIT], 6.0)
    hit = np.array([math.sqrt(0.75), 0.5])
    np.testing.assert_allclose(segs[1].start.position, hit, atol=1e-14)
    n = hit  # unit normal of the unit circle
    d = np.array([-1.0, 0.0])
    expected = d - 2 * d.dot(n) * n
    np.testing.assert_allclose(segs[1].start.direction, expected, atol=1e-14)
    assert segs[0].length == pytest.approx(3.0 - math.sqrt(0.75))


def test_start_inside_obstacle_rejected():
    with pytest.raises(ValueError):
        trace_ray(Ray((0.2, 0.0), (1.0, 0.0)), [UNIT], 1.0)
    with pytest.raises(ValueError):
        trace_ray(Ray((3.0, 0.0), (1.0, 0.0)), [UNIT], 0.0)


def test_tangential_hit_flagged():
    segs = trace_ray(Ray((3.0, 1.0), (-1.0, 0.0)), [UNIT], 6.0)
    assert any(s.degenerate for s in segs)
    np.testing.assert_allclose(segs[-1].start.direction, (-1.0, 0.0))


def test_trapped_axis_ray_bounces_between_two_disks():
    disks = [dm.Disk((-2.0, 0.0), 0.5), dm.Disk((2.0, 0.0), 0.5)]
    segs = trace_ray(Ray((0.0, 0.0), (1.0, 0.0)), disks, 20.0)
    inner = segs[1:-1]
    assert all(s.length == pytest.approx(3.0) for s in inner)
    assert max(abs(s.start.position[1]) for s in segs) == 0.0


@settings(max_examples=60, deadline=None)
@given(angle=st.floats(0, 2 * math.pi), nangle=st.floats(0, 2 * math.pi))
def test_reflection_preserves_speed_and_flips_normal_component(angle, nangle):
    d = np.array([math.cos(angle), math.sin(angle)])
    n = np.array([math.cos(nangle), math.sin(nangle)])
    r = reflect(d, n)
    assert np.linalg.norm(r) == pytest.approx(1.0)
    assert r.dot(n) == pytest.approx(-d.dot(n), abs=1e-12)
    np.testing.assert_allclose(reflect(r, n), d, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(x=st.floats(1.2, 4.0), y=st.floats(-3.0, 3.0), angle=st.floats(0, 2 * math.pi),
       t_max=st.floats(0.5, 30.0))
def test_trace_duration_and_unit_speed(x, y, angle, t_max):
    disks = [dm.Disk((-2.0, 0.0), 0.5), dm.Disk((0.5, 0.0), 0.6)]
    start = Ray((x, y), (math.cos(angle), math.sin(angle)))
    if any(math.dist(start.position, d.center) <= d.radius for d in disks):
        return
    segs = trace_ray(start, disks, t_max)
    assert sum(s.length for s in segs) == pytest.approx(t_max)
    for s in segs:
        assert np.linalg.norm(s.start.direction) == pytest.approx(1.0)
        end = s.point(s.length)
        for d in disks:
            assert math.dist(end, d.center) >= d.radius - 1e-9


def test_interpolation_reproduces_linear_fields():
    spec = dm.DomainSpec(2, 3.0, 0.25, (), 1.0, 2.0)
    grid = dm.build_grid(spec)
    field = 2.0 * grid.coords[0] - 0.5 * grid.coords[1] + 1.0
    rng = np.random.default_rng(3)
    pts = rng.uniform(-2.5, 2.5, size=(200, 2))
    np.testing.assert_allclose(interpolate(field, grid, pts), 2 * pts[:, 0] - 0.5 * pts[:, 1] + 1, atol=1e-12)


def test_interpolation_ignores_masked_corners():
    spec = dm.DomainSpec(2, 4.0, 0.2, (UNIT,), 2.0, 3.0)
    grid = dm.build_grid(spec)
    ones = grid.mask(np.ones(grid.shape))
    vals = interpolate(ones, grid, np.array([[1.01, 0.0], [0.0, 1.05], [0.72, 0.72]]))
    np.testing.assert_allclose(vals, 1.0)


def test_sampling_covers_axis_and_avoids_obstacles():
    spec = dm.DomainSpec(2, 8.0, 0.1, (dm.Disk((-2.0, 0.0), 0.5), dm.Disk((2.0, 0.0), 0.5)), 3.0, 3.5)
    pts = sample_positions(spec, 200)
    assert 150 <= len(pts) <= 220
    assert (np.hypot(*pts.T) <= spec.r0 + 1.0).all()
    assert ((pts[:, 1] == 0.0) & (np.abs(pts[:, 0]) < 1.5)).any()
    dirs = sample_directions(64)
    assert ((dirs == [1.0, 0.0]).all(axis=1)).any()


def _setup(kind, obstacles, r0=2.0, r1=3.0, h=0.1):
    spec = dm.DomainSpec(2, 8.0, h, obstacles, r0, r1)
    grid = dm.build_grid(spec)
    return spec, grid, dm.sample_damper(kind, spec, grid)


def test_gcc_single_disk_satisfied():
    spec, grid, a = _setup(dm.ExteriorSmooth(1.5), (UNIT,))
    rep = check_gcc(a, spec, (100, 32), grid=grid)
    assert rep.satisfied and rep.num_failed == 0
    assert rep.T0_estimate <= 2 * (spec.r0 + 1) + 1.0


def test_gcc_two_disk_trap_fails_on_axis():
    two = (dm.Disk((-2.0, 0.0), 0.5), dm.Disk((2.0, 0.0), 0.5))
    spec, grid, a = _setup(dm.ExteriorWithHole(((-2.0, 2.0, -0.1, 0.1),)), two, 3.0, 3.5)
    rep = check_gcc(a, spec, (100, 32), grid=grid)
    assert not rep.satisfied and math.isinf(rep.T0_estimate)
    assert abs(rep.worst_ray.position[1]) <= 2 * spec.h
    assert abs(rep.worst_ray.direction[1]) == 0.0
    d = rep.to_dict()
    assert d["T0_estimate"] is None and d["satisfied"] is False
    assert "NOT satisfied" in rep.to_text()


def test_gcc_full_damper_has_zero_time():
    spec, grid, a = _setup(dm.ConstantOne(), (UNIT,))
    rep = check_gcc(a, spec, (50, 16), grid=grid)
    assert rep.satisfied and rep.T0_estimate == 0.0


def test_threads_do_not_change_report():
    spec, grid, a = _setup(dm.ExteriorSmooth(1.5), (UNIT,))
    assert check_gcc(a, spec, (40, 16), grid=grid) == check_gcc(a, spec, (40, 16), grid=grid, threads=4)


def test_egc_trapped_pair_without_damping_fails():
    two = (dm.Disk((-2.0, 0.0), 0.5), dm.Disk((2.0, 0.0), 0.5))
    spec, grid, a = _setup(dm.Zero(), two, 3.0, 3.5)
    rep = check_egc(a, spec, (60, 16), escape_radius=5.0, grid=grid)
    assert not rep.satisfied


def test_egc_free_space_without_damping_escapes():
    spec, grid, a = _setup(dm.Zero(), ())
    rep = check_egc(a, spec, (60, 16), escape_radius=5.0, grid=grid)
    assert rep.satisfied
    assert rep.T0_estimate <= 2 * 5.0 + 2 * (spec.r0 + 1)


def test_egc_single_disk_with_damper():
    spec, grid, a = _setup(dm.ExteriorSmooth(1.5), (UNIT,))
    assert check_egc(a, spec, (60, 16), escape_radius=5.0, grid=grid).satisfied


def test_undamped_disk_fails_gcc_but_passes_egc():
    spec, grid, a = _setup(dm.Zero(), (UNIT,))
    assert not check_gcc(a, spec, (40, 16), grid=grid).satisfied
    assert check_egc(a, spec, (40, 16), escape_radius=5.0, grid=grid).satisfied
