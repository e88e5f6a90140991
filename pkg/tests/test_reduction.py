import math

import numpy as np
import pytest

from nonholo import autodiff as ad
from nonholo import constraint_geometry as geo
from nonholo import dynamics as dyn
from nonholo import reduction as red
from nonholo.autodiff import SmoothMap
from nonholo.constraint_geometry import ConstrainedChartPoint
from nonholo.errors import InvarianceError, PreconditionError
from nonholo.hamilton_jacobi import OneFormSection, PhaseMap, \
    identity_phase_map
from nonholo.mechanics import MechanicalSystem, PhasePoint
from nonholo.reduction import (momentum_drift, momentum_map, pi_relatedness_residual,
                               reduce, reduced_type1_residual,
                               reduced_type2_residual, reference_comparison)

from test_hamilton_jacobi import (closed_particle_section,
                                  disk_constant_section,
                                  printed_particle_section)


@pytest.fixture(scope="module")
def particle_chart(particle):
    return reduce(particle.system, particle.charts["particle-R2"])


@pytest.fixture(scope="module")
def disk_r2_chart(disk):
    return reduce(disk.system, disk.charts["disk-R2"])


@pytest.fixture(scope="module")
def disk_se2_chart(disk):
    return reduce(disk.system, disk.charts["disk-SE2"])


def chart_points(sys_, rng, count, box=2.0):
    for _ in range(count):
        yield ConstrainedChartPoint(rng.uniform(-box, box, sys_.n),
                                    rng.uniform(-box, box, sys_.m))


# -- reduced fields ------------------------------------------------------------

def test_particle_reduced_field_from_push_down(particle, particle_chart,
                                               rng):
    # pushed-down rates (dy, dpx, dpy) = (py, -s s' px py / (1+s^2), 0);
    # the multiplier solution projected to the invariant coordinates
    for _ in range(30):
        y, px, py = rng.uniform(-2, 2, 3)
        got = np.array([ad.value_of(t) for t in
                        particle_chart.reduced_field([y, px, py])])
        lam = px * py / (1.0 + y * y)
        assert np.allclose(got, [py, -y * lam, 0.0], atol=1e-12)


def test_particle_reference_conflicts_reported(particle, particle_chart,
                                               rng):
    points = list(chart_points(particle.system, rng, 25))
    report = reference_comparison(particle.system, particle_chart, points)
    # the classical simplified table for this example disagrees with the
    # pushed-down field in all three components at generic points
    assert set(report.conflicts) == {"dy/dt", "dpx/dt", "dpy/dt"}
    assert report.max_gap > 0.1
    assert "authoritative" in report.note


def test_disk_r2_reduced_field_matches_reference(disk, disk_r2_chart, rng):
    points = list(chart_points(disk.system, rng, 25))
    report = reference_comparison(disk.system, disk_r2_chart, points)
    assert report.conflicts == ()
    assert report.max_gap < 1e-9


def test_disk_se2_reduced_field_matches_reference(disk, disk_se2_chart,
                                                  rng):
    points = list(chart_points(disk.system, rng, 25))
    report = reference_comparison(disk.system, disk_se2_chart, points)
    assert report.conflicts == ()
    assert report.max_gap < 1e-9


def test_disk_reduced_field_values(disk, disk_r2_chart, disk_se2_chart):
    got = [ad.value_of(t)
           for t in disk_r2_chart.reduced_field([0.4, -0.7, 2.0, 3.0])]
    assert np.allclose(got, [1.0, 3.0, 0.0, 0.0], atol=1e-13)
    got = [ad.value_of(t)
           for t in disk_se2_chart.reduced_field([0.4, 2.0, 3.0])]
    assert np.allclose(got, [1.0, 0.0, 0.0], atol=1e-13)


def test_pi_relatedness(particle, disk, particle_chart, disk_r2_chart,
                        disk_se2_chart, rng):
    cases = [(particle.system, particle_chart),
             (disk.system, disk_r2_chart), (disk.system, disk_se2_chart)]
    for sys_, chart in cases:
        for point in chart_points(sys_, rng, 100):
            assert pi_relatedness_residual(sys_, chart, point) <= 1e-10


def test_reduced_energy_descends(particle, disk, particle_chart,
                                 disk_r2_chart, disk_se2_chart, rng):
    cases = [(particle.system, particle_chart),
             (disk.system, disk_r2_chart), (disk.system, disk_se2_chart)]
    for sys_, chart in cases:
        for point in chart_points(sys_, rng, 1000):
            x = np.concatenate([point.q, point.u])
            down = chart.project_values(x)
            h_reduced = ad.value_of(chart.reduced_hamiltonian(list(down))[0])
            h_full = ad.value_of(geo.chart_hamiltonian(sys_, list(x)))
            assert abs(h_reduced - h_full) <= 1e-12 * (1.0 + abs(h_full))


def test_reduce_audit_rejects_non_invariant_chart(particle):
    # projecting onto x exposes the translation fiber
    bad = red.QuotientChart(
        name="bad", reduced_dim=3,
        project=SmoothMap(5, 3, lambda xs: [xs[0], xs[3], xs[4]]),
        section=SmoothMap(3, 5, lambda rs: [rs[0], 0.0, 0.0, rs[1], rs[2]]),
        fiber_motion=lambda x, g: np.array([x[0] + g[0], x[1], x[2] + g[1],
                                            x[3], x[4]]),
        group_dim=2)
    with pytest.raises(InvarianceError):
        reduce(particle.system, bad)


def test_reduce_audit_rejects_broken_section(particle):
    chart = particle.charts["particle-R2"]
    import dataclasses
    broken = dataclasses.replace(
        chart, section=SmoothMap(3, 5,
                                 lambda rs: [0.0, rs[0] + 1.0, 0.0, rs[1],
                                             rs[2]]))
    with pytest.raises(InvarianceError):
        reduce(particle.system, broken)


def test_reduced_flow_satisfies_pushed_down_equations(particle,
                                                      particle_chart):
    # flow the reduced field from (y, px, py) = (1, 2, 3) and check the
    # pushed-down equations pointwise, plus the closed-form invariant
    # px * sqrt(1 + y^2) = const
    state = np.array([1.0, 2.0, 3.0])
    dt = 1e-3

    def rate(s):
        return np.array([ad.value_of(t)
                         for t in particle_chart.reduced_field(list(s))])

    invariant0 = state[1] * math.sqrt(1 + state[0] ** 2)
    for _ in range(1000):
        y, px, py = state
        got = rate(state)
        lam = px * py / (1.0 + y * y)
        assert np.allclose(got, [py, -y * lam, 0.0], atol=1e-10)
        k1 = rate(state)
        k2 = rate(state + 0.5 * dt * k1)
        k3 = rate(state + 0.5 * dt * k2)
        k4 = rate(state + dt * k3)
        state = state + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    assert state[0] == pytest.approx(1.0 + 3.0, abs=1e-9)  # y = y0 + py*t
    assert state[1] * math.sqrt(1 + state[0] ** 2) \
        == pytest.approx(invariant0, abs=1e-9)


# -- reduced residuals -----------------------------------------------------------

def test_reduced_type1_particle(particle, particle_chart, rng):
    section = closed_particle_section()
    for _ in range(25):
        q = rng.uniform(-2, 2, 3)
        assert reduced_type1_residual(particle.system, particle_chart,
                                      section, q) <= 1e-9


def test_reduced_type1_disk(disk, disk_r2_chart, disk_se2_chart, rng):
    section = disk_constant_section()
    for chart in (disk_r2_chart, disk_se2_chart):
        for _ in range(25):
            q = rng.uniform(-2, 2, 4)
            assert reduced_type1_residual(disk.system, chart, section, q) \
                <= 1e-9


def test_reduced_type1_requires_closedness(particle, particle_chart):
    section = printed_particle_section()
    with pytest.raises(PreconditionError):
        reduced_type1_residual(particle.system, particle_chart, section,
                               [0.0, 1.0, 0.0])


def test_reduced_type2_identity(particle, particle_chart, rng):
    section = closed_particle_section()
    eps = identity_phase_map(3)
    for _ in range(10):
        q = rng.uniform(-2, 2, 3)
        point = PhasePoint(q, section.momenta(q))
        reduced_gap, full_gap = reduced_type2_residual(
            particle.system, particle_chart, section, eps, point)
        assert reduced_gap <= 1e-9
        assert full_gap <= 1e-9


def test_reduced_type2_invariant_translation(particle, particle_chart, rng):
    section = closed_particle_section()
    shift = np.array([0.4, 0.0, -0.9, 0.0, 0.6, 0.0])
    eps = PhaseMap(SmoothMap(6, 6,
                             lambda zs: [z + s for z, s in zip(zs, shift)]))
    for _ in range(10):
        q = rng.uniform(-2, 2, 3)
        target = np.concatenate([q, section.momenta(q)])
        pre = target - shift
        point = PhasePoint(pre[:3], pre[3:])
        reduced_gap, full_gap = reduced_type2_residual(
            particle.system, particle_chart, section, eps, point)
        assert reduced_gap <= 1e-9
        assert full_gap <= 1e-9


def test_reduced_type2_covanish_on_violated_instance(particle,
                                                     particle_chart):
    # a section in the image but not closed on the admissible pairs:
    # both the reduced and the unreduced gaps are nonzero together
    section = printed_particle_section()
    eps = identity_phase_map(3)
    q = np.array([0.3, 1.2, -0.5])
    point = PhasePoint(q, section.momenta(q))
    reduced_gap, full_gap = reduced_type2_residual(
        particle.system, particle_chart, section, eps, point)
    assert reduced_gap > 1e-3
    assert full_gap > 1e-3


# -- momentum map -----------------------------------------------------------------

def test_momentum_particle(particle):
    action = particle.actions["translate-xz"]
    value = momentum_map(action, PhasePoint([0.4, 1.0, -2.0],
                                            [2.0, 3.0, 2.0]))
    assert np.allclose(value, [2.0, 2.0])


def test_momentum_disk_se2(disk):
    action = disk.actions["se2"]
    q = np.array([1.5, -0.5, 0.3, 0.9])
    p = np.array([2.0, 1.0, 0.5, -1.0])
    value = momentum_map(action, PhasePoint(q, p))
    rotation = -q[1] * p[0] + q[0] * p[1] + p[3]
    assert np.allclose(value, [2.0, 1.0, rotation])


def test_momentum_zero(disk):
    action = disk.actions["translate-xy"]
    assert np.array_equal(momentum_map(action, PhasePoint(np.ones(4),
                                                          np.zeros(4))),
                          np.zeros(2))


def test_momentum_drift_particle_closed_form(particle):
    # from q = 0, p = (2, 3, 0): p_x(t) = 2 / sqrt(1 + 9 t^2) decays and
    # p_z(t) = y p_x = 6 t / sqrt(1 + 9 t^2); neither component of the
    # translation momentum survives the constraint forces
    action = particle.actions["translate-xz"]
    start = ConstrainedChartPoint([0.0, 0.0, 0.0], [2.0, 3.0])
    traj = dyn.integrate(particle.system, start, 1.0, 1e-3, action=action)
    drift = momentum_drift(traj, action)
    assert drift[0] == pytest.approx(2.0 - 2.0 / math.sqrt(10), abs=1e-6)
    assert drift[1] == pytest.approx(6.0 / math.sqrt(10), abs=1e-6)
    series = traj.momentum_series
    assert series[0, -1] == pytest.approx(2.0 / math.sqrt(10), abs=1e-6)
    assert series[1, -1] == pytest.approx(6.0 / math.sqrt(10), abs=1e-6)


def test_momentum_drift_straight_disk(disk):
    action = disk.actions["translate-xy"]
    start = ConstrainedChartPoint(np.zeros(4), [1.0, 0.0])  # p_phi = 0
    traj = dyn.integrate(disk.system, start, 1.0, 1e-3, action=action)
    drift = momentum_drift(traj, action)
    assert np.max(drift) < 1e-10


def test_momentum_drift_constant_trajectory(particle):
    action = particle.actions["translate-xz"]
    start = ConstrainedChartPoint([0.2, -0.1, 0.5], [0.0, 0.0])
    traj = dyn.integrate(particle.system, start, 1.0, 1e-2, action=action)
    assert np.max(momentum_drift(traj, action)) == 0.0


# -- audit machinery on an unconstrained system --------------------------------

def test_map_invariance_audit_free_system():
    sys_ = MechanicalSystem(n=2,
                            metric=lambda qs: [[1.0, 0.0], [0.0, 1.0]],
                            potential=lambda qs: 0.0, constraints=None,
                            k=0, name="free")
    chart = red.QuotientChart(
        name="free-x", reduced_dim=3,
        project=SmoothMap(4, 3, lambda xs: [xs[1], xs[2], xs[3]]),
        section=SmoothMap(3, 4, lambda rs: [0.0, rs[0], rs[1], rs[2]]),
        fiber_motion=lambda x, g: np.array([x[0] + g[0], x[1], x[2], x[3]]),
        group_dim=1)
    chart = reduce(sys_, chart)
    section = OneFormSection(SmoothMap(2, 2, lambda qs: [0.7, -0.2]))

    def lifted(zs):
        x, y, px, py = zs
        return [x, y + 0.1 * x * x, px - 0.2 * x * py, py]

    eps = PhaseMap(SmoothMap(4, 4, lifted))
    point = PhasePoint([0.8, -0.3], [0.7, -0.2])
    with pytest.raises(PreconditionError, match="not invariant"):
        reduced_type2_residual(sys_, chart, section, eps, point)
